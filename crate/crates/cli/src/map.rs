//! Fidelity maps over the `(θ, φ)` plane.
//!
//! `map.csv` holds `theta,phi,fidelity` rows in θ-major order after a
//! `# config_hash=… mode=…` comment; wall times go to `timing.csv` so the
//! map itself stays byte-identical between runs. Finished cells are
//! appended to `cells.log` while the sweep runs, and an interrupted sweep
//! picks them up again when restarted with the same configuration.

use std::collections::HashMap;
use std::f64::consts::FRAC_PI_2;
use std::fmt::Write as _;
use std::fs::{self, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use mplc::unitary::u2;
use mplc::PhaseMaskStack;
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::heatmap::render_heatmap;
use crate::{io_err, CliError, CliResult};

pub const MAP_FILE: &str = "map.csv";
pub const TIMING_FILE: &str = "timing.csv";
pub const HEATMAP_FILE: &str = "heatmap.ppm";
pub const CONFIG_FILE: &str = "config.txt";
pub const LOG_FILE: &str = "cells.log";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapMode {
    /// Every cell optimized for its own target.
    Design,
    /// One design per θ at `φ = π/2`, the other columns reached with the
    /// correcting output mask.
    Corrected,
}

impl MapMode {
    pub fn name(&self) -> &'static str {
        match self {
            MapMode::Design => "design",
            MapMode::Corrected => "corrected",
        }
    }

    pub fn from_name(name: &str) -> Option<MapMode> {
        match name {
            "design" => Some(MapMode::Design),
            "corrected" => Some(MapMode::Corrected),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FidelityMap {
    pub thetas: Vec<f64>,
    pub phis: Vec<f64>,
    /// Row-major, θ outer. NaN marks a failed cell.
    pub fidelities: Vec<f64>,
    pub seconds: Vec<f64>,
    pub config_hash: String,
    pub mode: MapMode,
}

fn header(hash: &str, mode: MapMode) -> String {
    format!("# config_hash={hash} mode={}\n", mode.name())
}

/// Parses a `# config_hash=… mode=…` line.
fn parse_header(line: &str) -> Option<(String, MapMode)> {
    let rest = line.strip_prefix("# config_hash=")?;
    let (hash, mode) = rest.split_once(" mode=")?;
    Some((hash.to_string(), MapMode::from_name(mode.trim())?))
}

impl FidelityMap {
    pub fn fidelity(&self, i: usize, j: usize) -> f64 {
        self.fidelities[i * self.phis.len() + j]
    }

    pub fn cells(&self) -> usize {
        self.fidelities.len()
    }

    pub fn failed(&self) -> usize {
        self.fidelities.iter().filter(|f| f.is_nan()).count()
    }

    /// Mean over the cells that succeeded.
    pub fn mean(&self) -> f64 {
        let ok: Vec<f64> = self.fidelities.iter().copied().filter(|f| !f.is_nan()).collect();
        ok.iter().sum::<f64>() / ok.len() as f64
    }

    /// Error when more than a tenth of the cells failed.
    pub fn check_failures(&self) -> CliResult<()> {
        let (failed, total) = (self.failed(), self.cells());
        if failed * 10 > total {
            return Err(CliError::PartialMap { failed, total });
        }
        Ok(())
    }

    fn table(&self, column: &str, values: &[f64]) -> String {
        let mut out = header(&self.config_hash, self.mode);
        let _ = writeln!(out, "theta,phi,{column}");
        for (i, theta) in self.thetas.iter().enumerate() {
            for (j, phi) in self.phis.iter().enumerate() {
                let v = values[i * self.phis.len() + j];
                let _ = writeln!(out, "{theta:.16e},{phi:.16e},{v:.16e}");
            }
        }
        out
    }

    pub fn to_csv(&self) -> String {
        self.table("fidelity", &self.fidelities)
    }

    pub fn timing_csv(&self) -> String {
        self.table("seconds", &self.seconds)
    }

    /// Reads a map back from its CSV. Wall times are not stored there and
    /// come back as zeros.
    pub fn from_csv(text: &str) -> Result<FidelityMap, String> {
        let mut lines = text.lines().enumerate();
        let (config_hash, mode) = lines
            .next()
            .and_then(|(_, l)| parse_header(l))
            .ok_or("line 1: expected `# config_hash=… mode=…`")?;
        match lines.next() {
            Some((_, "theta,phi,fidelity")) => {}
            _ => return Err("line 2: expected header `theta,phi,fidelity`".into()),
        }
        let mut rows = Vec::new();
        for (n, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let values: Vec<f64> = line
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| format!("line {}: {e}", n + 1))?;
            if values.len() != 3 {
                return Err(format!("line {}: expected three columns", n + 1));
            }
            rows.push((values[0], values[1], values[2]));
        }
        if rows.is_empty() {
            return Err("map has no cells".into());
        }
        let mut thetas: Vec<f64> = Vec::new();
        for r in &rows {
            if thetas.last() != Some(&r.0) {
                thetas.push(r.0);
            }
        }
        let cols = rows.len() / thetas.len();
        let phis: Vec<f64> = rows[..cols].iter().map(|r| r.1).collect();
        let consistent = cols * thetas.len() == rows.len()
            && rows
                .iter()
                .enumerate()
                .all(|(k, r)| r.0 == thetas[k / cols] && r.1 == phis[k % cols]);
        if !consistent {
            return Err("cells do not form a θ-major rectangular grid".into());
        }
        Ok(FidelityMap {
            thetas,
            phis,
            seconds: vec![0.0; rows.len()],
            fidelities: rows.into_iter().map(|r| r.2).collect(),
            config_hash,
            mode,
        })
    }
}

pub fn mode_of(config: &RunConfig) -> MapMode {
    if config.sweep.correcting_mask {
        MapMode::Corrected
    } else {
        MapMode::Design
    }
}

/// Finished cell `(index, fidelity, seconds)`.
pub type Cell = (usize, f64, f64);

fn design_cell(config: &RunConfig, theta: f64, phi: f64) -> f64 {
    let target = match u2(theta, phi) {
        Ok(t) => t,
        Err(_) => return f64::NAN,
    };
    config.setup.design(&target).map_or(f64::NAN, |r| r.final_fidelity)
}

fn corrected_cell(config: &RunConfig, stack: &PhaseMaskStack, theta: f64, phi: f64) -> f64 {
    let run = || -> mplc::Result<f64> {
        let target = u2(theta, phi)?;
        let mask = config.setup.correction_mask(phi)?;
        config.setup.evaluate(stack, &target, Some(&mask))
    };
    run().unwrap_or(f64::NAN)
}

/// Computes the map cells not present in `done`, reporting each finished
/// cell to `sink`. Runs on a pool of `workers` threads; the result does not
/// depend on the worker count.
pub fn compute_map(
    config: &RunConfig,
    workers: usize,
    done: &HashMap<usize, (f64, f64)>,
    sink: &(dyn Fn(Cell) + Sync),
) -> CliResult<FidelityMap> {
    let thetas = config.sweep.theta.closed("sweep.theta")?;
    let phis = config.sweep.phi.half_open("sweep.phi")?;
    let cols = phis.len();
    let total = thetas.len() * cols;
    let mode = mode_of(config);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| CliError::Failed(format!("worker pool: {e}")))?;
    let todo: Vec<usize> = (0..total).filter(|k| !done.contains_key(k)).collect();

    let computed: Vec<Cell> = pool.install(|| match mode {
        MapMode::Design => todo
            .par_iter()
            .map(|&k| {
                let start = Instant::now();
                let f = design_cell(config, thetas[k / cols], phis[k % cols]);
                let cell = (k, f, start.elapsed().as_secs_f64());
                sink(cell);
                cell
            })
            .collect(),
        MapMode::Corrected => {
            let mut rows: Vec<usize> = todo.iter().map(|k| k / cols).collect();
            rows.dedup();
            let designs: HashMap<usize, (Option<PhaseMaskStack>, f64)> = rows
                .par_iter()
                .map(|&i| {
                    let start = Instant::now();
                    let stack = u2(thetas[i], FRAC_PI_2)
                        .and_then(|t| config.setup.design(&t))
                        .ok()
                        .map(|r| r.stack);
                    (i, (stack, start.elapsed().as_secs_f64()))
                })
                .collect();
            todo.par_iter()
                .map(|&k| {
                    let start = Instant::now();
                    let (i, j) = (k / cols, k % cols);
                    let (stack, design_seconds) = &designs[&i];
                    let f = stack.as_ref().map_or(f64::NAN, |s| corrected_cell(config, s, thetas[i], phis[j]));
                    let cell = (k, f, start.elapsed().as_secs_f64() + design_seconds / cols as f64);
                    sink(cell);
                    cell
                })
                .collect()
        }
    });

    let mut fidelities = vec![f64::NAN; total];
    let mut seconds = vec![0.0; total];
    for (&k, &(f, s)) in done {
        if k < total {
            fidelities[k] = f;
            seconds[k] = s;
        }
    }
    for (k, f, s) in computed {
        fidelities[k] = f;
        seconds[k] = s;
    }
    Ok(FidelityMap { thetas, phis, fidelities, seconds, config_hash: config.hash(), mode })
}

fn first_line(path: &Path) -> CliResult<Option<String>> {
    match fs::read_to_string(path) {
        Ok(text) => Ok(Some(text.lines().next().unwrap_or("").to_string())),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(io_err(path)(e)),
    }
}

/// Fails if `path` exists and carries a different hash or mode.
fn check_existing(path: &Path, hash: &str, mode: MapMode) -> CliResult<()> {
    if let Some(line) = first_line(path)? {
        let found = parse_header(&line);
        if found.as_ref().map(|(h, m)| (h.as_str(), *m)) != Some((hash, mode)) {
            return Err(CliError::HashMismatch {
                path: path.to_path_buf(),
                expected: format!("{hash} ({})", mode.name()),
                found: found.map_or_else(|| "none".into(), |(h, m)| format!("{h} ({})", m.name())),
            });
        }
    }
    Ok(())
}

fn read_log(path: &Path) -> CliResult<HashMap<usize, (f64, f64)>> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut done = HashMap::new();
    for line in text.lines().skip(1) {
        let parts: Vec<&str> = line.split(',').collect();
        if let [k, f, s] = parts[..] {
            let parsed = (
                k.parse::<usize>(),
                u64::from_str_radix(f, 16).map(f64::from_bits),
                u64::from_str_radix(s, 16).map(f64::from_bits),
            );
            if let (Ok(k), Ok(f), Ok(s)) = parsed {
                if !f.is_nan() {
                    done.insert(k, (f, s));
                }
            }
        }
    }
    Ok(done)
}

fn write_file(path: PathBuf, bytes: &[u8]) -> CliResult<()> {
    fs::write(&path, bytes).map_err(io_err(path))
}

/// Runs the sweep described by `config` into `out_dir`, writing the map,
/// timing table, heatmap and config echo. Cells already recorded in the
/// directory's log by an interrupted run with the same configuration are
/// reused. More than 10% failed cells is reported as an error after all
/// files are written.
pub fn run_map(config: &RunConfig, out_dir: &Path, workers: usize, progress: bool) -> CliResult<FidelityMap> {
    config.validate()?;
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let hash = config.hash();
    let mode = mode_of(config);
    check_existing(&out_dir.join(MAP_FILE), &hash, mode)?;
    let log_path = out_dir.join(LOG_FILE);
    check_existing(&log_path, &hash, mode)?;

    let done = if log_path.exists() { read_log(&log_path)? } else { HashMap::new() };
    let mut log = OpenOptions::new().create(true).append(true).open(&log_path).map_err(io_err(&log_path))?;
    if done.is_empty() {
        log.set_len(0).map_err(io_err(&log_path))?;
        log.write_all(header(&hash, mode).as_bytes()).map_err(io_err(&log_path))?;
    }
    let log = Mutex::new(log);
    let total = config.sweep.theta.closed("sweep.theta")?.len() * config.sweep.phi.half_open("sweep.phi")?.len();
    let finished = Mutex::new(done.len());
    let sink = |(k, f, s): Cell| {
        let mut log = log.lock().unwrap_or_else(|e| e.into_inner());
        let _ = writeln!(log, "{k},{:016x},{:016x}", f.to_bits(), s.to_bits());
        let _ = log.flush();
        drop(log);
        if progress {
            let mut n = finished.lock().unwrap_or_else(|e| e.into_inner());
            *n += 1;
            eprintln!("cell {}/{total}: fidelity {f:.4} in {s:.1} s", *n);
        }
    };

    let map = compute_map(config, workers, &done, &sink)?;
    drop(log);
    write_file(out_dir.join(MAP_FILE), map.to_csv().as_bytes())?;
    write_file(out_dir.join(TIMING_FILE), map.timing_csv().as_bytes())?;
    write_file(out_dir.join(HEATMAP_FILE), &render_heatmap(&map))?;
    write_file(out_dir.join(CONFIG_FILE), format!("# config_hash={hash}\n{}", config.canonical()).as_bytes())?;
    fs::remove_file(&log_path).map_err(io_err(&log_path))?;
    map.check_failures()?;
    Ok(map)
}

/// Renders `map.csv` at `input` into a heatmap at `output`.
pub fn render_file(input: &Path, output: &Path) -> CliResult<FidelityMap> {
    let text = fs::read_to_string(input).map_err(|e| CliError::Input { path: input.into(), message: e.to_string() })?;
    let map = FidelityMap::from_csv(&text).map_err(|message| CliError::Input { path: input.into(), message })?;
    if let Some(parent) = output.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    write_file(output.to_path_buf(), &render_heatmap(&map))?;
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_map() -> FidelityMap {
        FidelityMap {
            thetas: vec![0.0, 0.5],
            phis: vec![-1.0, 0.0, 1.0],
            fidelities: vec![0.9, 0.8, f64::NAN, 1.0, 0.25, 0.5],
            seconds: vec![1.0; 6],
            config_hash: "f00d".into(),
            mode: MapMode::Corrected,
        }
    }

    #[test]
    fn csv_round_trip() {
        let m = small_map();
        let text = m.to_csv();
        assert!(text.starts_with("# config_hash=f00d mode=corrected\ntheta,phi,fidelity\n"));
        assert!(text.contains("0.0000000000000000e0,-1.0000000000000000e0,9.0000000000000002e-1\n"));
        assert!(text.contains(",NaN\n"));
        let back = FidelityMap::from_csv(&text).unwrap();
        assert_eq!(back.thetas, m.thetas);
        assert_eq!(back.phis, m.phis);
        assert_eq!(back.to_csv(), text);
        assert!(m.timing_csv().contains("theta,phi,seconds\n"));
    }

    #[test]
    fn bad_csv_is_rejected() {
        assert!(FidelityMap::from_csv("theta,phi,fidelity\n").is_err());
        assert!(FidelityMap::from_csv("# config_hash=a mode=design\ntheta,phi,fidelity\n").is_err());
        assert!(FidelityMap::from_csv("# config_hash=a mode=design\ntheta,phi,fidelity\n0,0,x\n").is_err());
        let ragged = "# config_hash=a mode=design\ntheta,phi,fidelity\n0,0,1\n0,1,1\n1,0,1\n";
        assert!(FidelityMap::from_csv(ragged).is_err());
    }

    #[test]
    fn failure_threshold() {
        let mut m = small_map();
        assert!(matches!(m.check_failures(), Err(CliError::PartialMap { failed: 1, total: 6 })));
        m.fidelities[2] = 0.1;
        assert!(m.check_failures().is_ok());
        assert!((m.mean() - (0.9 + 0.8 + 0.1 + 1.0 + 0.25 + 0.5) / 6.0).abs() < 1e-15);
    }

    #[test]
    fn header_parsing() {
        assert_eq!(parse_header("# config_hash=ab mode=design"), Some(("ab".into(), MapMode::Design)));
        assert_eq!(parse_header("# config_hash=ab mode=other"), None);
        assert_eq!(parse_header("theta,phi"), None);
    }
}
