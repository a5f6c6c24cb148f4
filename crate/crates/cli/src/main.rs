use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use filstokes::scenario::{self, SimConfig, SweepParam};
use filstokes::{par, verify};

/// Zero-thickness limit dynamics of rigid filaments in Stokes flow.
#[derive(Parser)]
#[command(name = "filstokes", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a configuration and write trajectory, plots and manifest.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Also write resistance matrices, Faxén loads and inertia.
        #[arg(long)]
        dump_matrices: bool,
    },
    /// Evaluate the perturbation flow of the initial configuration.
    Field {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Points per side of an automatic cube grid around the bodies.
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Run self-check suites: kernels, mobility, dynamics, flowfield or all.
    Verify {
        #[arg(default_value = "all")]
        suite: String,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Convergence study over eps, dt or n.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        param: SweepParam,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn load(path: &Path) -> Result<SimConfig> {
    SimConfig::load(path).map_err(anyhow::Error::from)
}

fn execute(cmd: Command) -> Result<bool> {
    match cmd {
        Command::Simulate {
            config,
            out,
            dump_matrices,
        } => {
            let cfg = load(&config)?;
            let summary = scenario::run(&cfg, &out, dump_matrices)?;
            if summary.halted_at_collision {
                eprintln!(
                    "halted at collision: t = {:.6}, d_min = {:.3e}",
                    summary.collision_time.unwrap_or(f64::NAN),
                    summary.collision_distance.unwrap_or(f64::NAN)
                );
            }
            println!("{} steps to t = {}", summary.steps, summary.final_time);
            if let Some(r) = summary.decay_rate {
                println!("initial-layer decay rate {r:.6e}");
            }
            if let Some(e) = summary.sup_pose_error {
                println!("sup pose error vs limit {e:.6e}");
            }
            println!("wrote {}", out.join("manifest.json").display());
            Ok(true)
        }
        Command::Field { config, out, grid } => {
            let cfg = load(&config)?;
            let report = scenario::run_field(&cfg, &out, grid)?;
            println!(
                "grid {:?}, scaled divergence {:.3e}, {} masked points",
                report.grid.dims, report.max_scaled_divergence, report.masked_points
            );
            println!("wrote {}", out.join("field_report.json").display());
            Ok(true)
        }
        Command::Verify { suite, out, seed } => {
            let suites = verify::Suite::parse(&suite)?;
            let report = verify::run(&suites, seed);
            let json = serde_json::to_string_pretty(&report)?;
            match out {
                Some(p) => {
                    std::fs::write(&p, json).with_context(|| format!("writing {}", p.display()))?
                }
                None => println!("{json}"),
            }
            eprint!("{}", report.summary());
            Ok(report.ok())
        }
        Command::Sweep {
            config,
            param,
            values,
            out,
        } => {
            if values.len() < 2 {
                bail!("a sweep needs at least 2 values");
            }
            let cfg = load(&config)?;
            let report = scenario::run_sweep(&cfg, param, &values, &out)?;
            for r in &report.rows {
                println!("{:>12.4e}  {:.6e}", r.value, r.error);
            }
            if let Some(m) = report.monotone {
                println!("monotone: {m}");
            }
            println!("wrote {}", out.join("sweep.json").display());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match par::with_threads(scenario::thread_limit(), || execute(cli.command)) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
