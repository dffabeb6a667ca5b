use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use qhydro::runner::{
    self, compare_trajectories, exit, output::read_trajectories, presets::PRESETS, resolve_source, RunError,
};

#[derive(Parser)]
#[command(name = "qhydro", version, about = "Quantum hydrodynamic trajectories in one dimension")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a config file or a preset name.
    Run {
        /// Path to a TOML config, or a preset name (see `presets`).
        source: String,
        /// Output directory; defaults to output.directory of the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// `section.key=value`, applied after the config is read.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Compare two trajectories files (or run directories) index by index.
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        from: f64,
        #[arg(long, default_value_t = f64::INFINITY)]
        to: f64,
        /// Write the report here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the built-in presets.
    Presets,
}

fn trajectories_path(p: PathBuf) -> PathBuf {
    if p.is_dir() {
        p.join("trajectories.dat")
    } else {
        p
    }
}

fn run(cli: Cli) -> Result<i32, RunError> {
    match cli.command {
        Command::Presets => {
            for (name, summary, _) in PRESETS {
                println!("{name:<20} {summary}");
            }
            Ok(exit::SUCCESS)
        }
        Command::Run {
            source,
            out,
            overrides,
        } => {
            let mut cfg = resolve_source(&source, &overrides)?;
            if let Some(dir) = out {
                cfg.output.directory = dir;
            }
            let summary = runner::run_experiment(&cfg, &cfg.output.directory)?;
            println!("{}: {}", cfg.name, summary.primary.describe());
            if let Some(report) = &summary.comparison {
                for &k in &report.highlighted {
                    if let Some(p) = report.pair(k) {
                        println!("  trajectory {k}: max deviation {:.4e} bohr", p.max_deviation);
                    }
                }
            }
            println!("outputs in {}", summary.directory.display());
            Ok(if summary.is_physics_terminal() {
                exit::PHYSICS_TERMINAL
            } else {
                exit::SUCCESS
            })
        }
        Command::Compare { a, b, from, to, out } => {
            let sa = read_trajectories(&trajectories_path(a))?;
            let sb = read_trajectories(&trajectories_path(b))?;
            let report = compare_trajectories(&sa, &sb, (from, to), &[9, 38, 39, 50])?;
            let text = runner::output::render_comparison(&report, &sa, &sb);
            match out {
                Some(path) => std::fs::write(&path, text).map_err(|e| RunError::Io { path, source: e })?,
                None => print!("{text}"),
            }
            Ok(exit::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
