use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mplc_cli::config::parse_number;
use mplc_cli::{commands, load_config, map, CliError, CliResult, RunConfig};

#[derive(Parser)]
#[command(name = "mplc", version, about = "Design and analyse multi-plane light converters")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Configuration file; the reference setup when omitted.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory, overriding `run.out_dir`.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

fn angle(text: &str) -> Result<f64, String> {
    parse_number(text).ok_or_else(|| format!("`{text}` is not a number (pi expressions such as 3*pi/20 are allowed)"))
}

#[derive(Subcommand)]
enum Command {
    /// Optimize one stack for U(theta, phi).
    Design {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = angle, default_value = "3*pi/20", allow_hyphen_values = true)]
        theta: f64,
        #[arg(long, value_parser = angle, default_value = "pi/2", allow_hyphen_values = true)]
        phi: f64,
    },
    /// Sweep the (theta, phi) grid and write map.csv, timing.csv and heatmap.ppm.
    Map {
        #[command(flatten)]
        common: Common,
        /// Worker threads, overriding `sweep.workers`.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Reflection-count tables for the folded single-SLM geometry.
    Geometry {
        #[command(flatten)]
        common: Common,
    },
    /// Fidelity against the strength of a random phase perturbation.
    Perturb {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Simulated knife-edge scans of one input beam on every plane.
    Knife {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Render a map.csv file as a PPM heatmap.
    Render {
        /// Map CSV to render.
        input: PathBuf,
        /// Output image; heatmap.ppm next to the input when omitted.
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
}

fn setup(common: &Common) -> CliResult<(RunConfig, PathBuf)> {
    let config = load_config(common.config.as_deref())?;
    let out = common.out.clone().unwrap_or_else(|| config.out_dir.clone());
    Ok((config, out))
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Design { common, theta, phi } => {
            let (config, out) = setup(&common)?;
            let r = commands::run_design(&config, theta, phi, &out)?;
            println!("fidelity {:.6} after {} iterations ({:.1} s)", r.final_fidelity, r.iterations(), r.wall_time);
        }
        Command::Map { common, workers } => {
            let (config, out) = setup(&common)?;
            let workers = workers.unwrap_or(config.sweep.workers);
            if workers == 0 {
                return Err(CliError::Config(mplc_cli::ConfigError::Invalid("--workers must be at least 1".into())));
            }
            let m = map::run_map(&config, &out, workers, true)?;
            println!("{} cells, mean fidelity {:.6}, {} failed", m.cells(), m.mean(), m.failed());
        }
        Command::Geometry { common } => {
            let (config, out) = setup(&common)?;
            let (best, threshold) = commands::run_geometry(&config, &out)?;
            for b in &best {
                println!("L = {:.4} m: {} reflections", b.mirror_distance, b.reflections);
            }
            match threshold {
                Some(t) => println!("two reflections from {:.3} deg", t.to_degrees()),
                None => println!("no angle in range gives two reflections"),
            }
        }
        Command::Perturb { common, seed } => {
            let (config, out) = setup(&common)?;
            let rows = commands::run_perturb(&config, seed.unwrap_or(config.perturb.seed), &out)?;
            for r in &rows {
                println!("alpha {:.3}: fidelity {:.6}", r.alpha, r.fidelity);
            }
        }
        Command::Knife { common, seed } => {
            let (config, out) = setup(&common)?;
            let pitch = config.setup.grid.pitch();
            let rows = commands::run_knife(&config, seed.unwrap_or(config.knife.seed), &out)?;
            for r in &rows {
                println!(
                    "plane {}: center off by {:+.2} px, waist off by {:+.2}%",
                    r.plane,
                    (r.estimate.center - r.true_center) / pitch,
                    (r.estimate.waist / r.true_waist - 1.0) * 100.0
                );
            }
        }
        Command::Render { input, out } => {
            let out = out.unwrap_or_else(|| input.parent().unwrap_or(Path::new(".")).join(map::HEATMAP_FILE));
            map::render_file(&input, &out)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
