//! The non-map subcommands: single designs, geometry tables, perturbation
//! studies and knife-edge scans.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use mplc::alignment::{locate_beam, profile_moments, BeamEstimate, KnifeConfig};
use mplc::beams::make_beam_array;
use mplc::geometry::{count_reflections, linspace, max_planes_vs_distance, min_angle_for_two_reflections, MplcGeometry};
use mplc::io::{write_pattern, write_stack};
use mplc::perturb::{fidelity_vs_alpha, mean_phase_gradient, synth_stack_perturbation, AlphaRow};
use mplc::propagation::mplc_forward_partial;
use mplc::unitary::{u2, UnitaryTarget};
use mplc::wfm::OptimizationResult;
use mplc::PhaseMaskStack;

use crate::config::{ConfigError, RunConfig};
use crate::{io_err, CliError, CliResult};

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(io_err(path))
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

/// `U(θ, φ)`, with out-of-range angles reported as invalid input.
fn target(theta: f64, phi: f64) -> CliResult<UnitaryTarget> {
    u2(theta, phi).map_err(|e| CliError::Config(ConfigError::Invalid(e.to_string())))
}

/// Optimizes the stack for `U(θ, φ)` and writes `stack.mplm` and
/// `report.txt` into `out_dir`.
pub fn run_design(config: &RunConfig, theta: f64, phi: f64, out_dir: &Path) -> CliResult<OptimizationResult> {
    let target = target(theta, phi)?;
    let result = config.setup.design(&target)?;
    if !result.final_fidelity.is_finite() {
        return Err(CliError::Failed(format!("design for θ={theta}, φ={phi} produced a non-finite fidelity")));
    }
    create_dir(out_dir)?;
    write_stack(out_dir.join("stack.mplm"), &result.stack)?;

    let mut report = String::new();
    let _ = writeln!(report, "theta = {theta:?}");
    let _ = writeln!(report, "phi = {phi:?}");
    let _ = writeln!(report, "fidelity = {:?}", result.final_fidelity);
    let _ = writeln!(report, "iterations = {}", result.iterations());
    let _ = writeln!(report, "wall_time_s = {:.3}", result.wall_time);
    let _ = writeln!(report, "config_hash = {}", config.hash());
    let _ = writeln!(report, "\n[config]");
    report.push_str(&config.canonical());
    let _ = writeln!(report, "\n[history]");
    let _ = writeln!(report, "iteration,fidelity");
    for (i, f) in result.history.iter().enumerate() {
        let _ = writeln!(report, "{},{f:.16e}", i + 1);
    }
    write_text(&out_dir.join("report.txt"), &report)?;
    Ok(result)
}

/// Reflection counts over the configured distance, waist and angle grids
/// (`reflections.csv`, negative counts mark the first overlapping plane as
/// `-plane`), and the best count per distance (`max_planes.csv`). Returns
/// the best counts and the smallest angle giving two reflections at the
/// template distance.
pub fn run_geometry(config: &RunConfig, out_dir: &Path) -> CliResult<(Vec<mplc::geometry::PlanesAtDistance>, Option<f64>)> {
    let g = &config.geometry;
    let waists = linspace(g.waist_min, g.waist_max, g.waist_count);
    let angles: Vec<f64> = linspace(g.angle_min_deg, g.angle_max_deg, g.angle_count)
        .into_iter()
        .map(f64::to_radians)
        .collect();
    let best = max_planes_vs_distance(&g.template, &g.distances, &waists, &angles)?;
    create_dir(out_dir)?;
    let hash = config.hash();

    let mut table = format!("# config_hash={hash}\nL_m,tau_rad,waist_m,reflections\n");
    for &l in &g.distances {
        for &tau in &angles {
            let geometry = MplcGeometry { mirror_distance: l, insertion_angle: tau, ..g.template };
            for &w in &waists {
                let n = count_reflections(&geometry, w).as_signed();
                let _ = writeln!(table, "{l:.16e},{tau:.16e},{w:.16e},{n}");
            }
        }
    }
    write_text(&out_dir.join("reflections.csv"), &table)?;

    let mut summary = format!("# config_hash={hash}\nL_m,max_reflections,waist_m,tau_rad\n");
    for b in &best {
        let _ = writeln!(
            summary,
            "{:.16e},{},{:.16e},{:.16e}",
            b.mirror_distance, b.reflections, b.waist, b.insertion_angle
        );
    }
    write_text(&out_dir.join("max_planes.csv"), &summary)?;
    let threshold = min_angle_for_two_reflections(&g.template, &waists, &angles);
    Ok((best, threshold))
}

/// Designs `U(θ, φ)` from the perturb block, draws one perturbation pattern
/// per plane and tabulates the fidelity against the pattern strength.
pub fn run_perturb(config: &RunConfig, seed: u64, out_dir: &Path) -> CliResult<Vec<AlphaRow>> {
    let p = &config.perturb;
    let s = &config.setup;
    let target = target(p.theta, p.phi)?;
    let design = s.design(&target)?;
    let patterns = synth_stack_perturbation(s.grid, s.planes, p.gradient, p.correlation_length, seed)?;
    let rows = fidelity_vs_alpha(s, &design.stack, &target, &patterns, &p.alphas)?;

    create_dir(out_dir)?;
    write_stack(out_dir.join("design.mplm"), &design.stack)?;
    for (i, pattern) in patterns.iter().enumerate() {
        let notes = [
            ("plane", (i + 1).to_string()),
            ("target_gradient_rad_per_px", format!("{:?}", p.gradient)),
            ("mean_gradient_rad_per_px", format!("{:?}", mean_phase_gradient(std::slice::from_ref(pattern))?)),
            ("correlation_px", format!("{:?}", p.correlation_length)),
            ("seed", seed.wrapping_add(i as u64).to_string()),
        ];
        write_pattern(out_dir.join(format!("pattern_{}.mplm", i + 1)), pattern, s.plane_spacing, &notes)?;
    }
    let mut csv = format!("# config_hash={} seed={seed}\nalpha,fidelity\n", config.hash());
    for r in &rows {
        let _ = writeln!(csv, "{:.16e},{:.16e}", r.alpha, r.fidelity);
    }
    write_text(&out_dir.join("perturb.csv"), &csv)?;
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KnifeRow {
    /// 1-based plane.
    pub plane: usize,
    /// Centroid and `1/e²` radius of the y profile arriving at the plane.
    pub true_center: f64,
    pub true_waist: f64,
    pub estimate: BeamEstimate,
}

/// Interior pixel boundaries within `range·radius` of `center`, every
/// `step` pixels.
pub fn edge_positions(grid: &mplc::SamplingGrid, center: f64, radius: f64, range: f64, step: usize) -> Vec<f64> {
    let first = grid.origin().1 - 0.5 * grid.pitch();
    (1..grid.ny())
        .map(|i| first + i as f64 * grid.pitch())
        .step_by(step.max(1))
        .filter(|y| (y - center).abs() <= range * radius)
        .collect()
}

/// Knife-edge scans of one input beam at every plane of `stack`.
pub fn knife_rows(config: &RunConfig, stack: &PhaseMaskStack, seed: u64) -> CliResult<Vec<KnifeRow>> {
    let s = &config.setup;
    let k = &config.knife;
    let beams = make_beam_array(&s.input, s.grid)?.beams;
    let beam = beams
        .get(k.beam.wrapping_sub(1))
        .ok_or_else(|| CliError::Failed(format!("no input beam {}", k.beam)))?;
    let knife = KnifeConfig {
        diffuser: k.diffuser,
        seed,
        realizations: k.realizations,
        collection: k.collection,
        aperture_factor: k.aperture_factor,
        ..KnifeConfig::default()
    };
    let g = s.grid;
    (1..=stack.planes())
        .map(|plane| {
            let arriving = mplc_forward_partial(beam, stack, s.wavelength(), plane, false)?;
            let (center, waist) = profile_moments(&arriving.profile_y(), (0..g.ny()).map(|i| g.y(i)))?;
            let positions = edge_positions(&g, center, waist, k.range, k.step_pixels);
            let estimate = locate_beam(beam, stack, s.wavelength(), plane, &positions, &knife)?;
            Ok(KnifeRow { plane, true_center: center, true_waist: waist, estimate })
        })
        .collect()
}

/// Knife-edge scans with every plane blank, written to `knife.csv`.
pub fn run_knife(config: &RunConfig, seed: u64, out_dir: &Path) -> CliResult<Vec<KnifeRow>> {
    let s = &config.setup;
    let stack = PhaseMaskStack::zeros(s.grid, s.planes, s.plane_spacing)?;
    let rows = knife_rows(config, &stack, seed)?;
    create_dir(out_dir)?;
    let mut csv = format!("# config_hash={} seed={seed}\nplane,true_center_m,true_waist_m,center_m,waist_m\n", config.hash());
    for r in &rows {
        let _ = writeln!(
            csv,
            "{},{:.16e},{:.16e},{:.16e},{:.16e}",
            r.plane, r.true_center, r.true_waist, r.estimate.center, r.estimate.waist
        );
    }
    write_text(&out_dir.join("knife.csv"), &csv)?;
    Ok(rows)
}
