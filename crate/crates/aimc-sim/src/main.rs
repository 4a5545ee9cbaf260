//! `aimc-sim` CLI: run presets or config files, list presets, validate
//! configs.

use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use aimc_sim::harness::{preset, preset_names, run_experiment, ExperimentConfig};
use aimc_sim::optim;

#[derive(Parser)]
#[command(name = "aimc-sim", version, about = "Analog in-memory training simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a preset or a config file.
    Run {
        /// Preset name (see `list-presets`).
        #[arg(long, conflicts_with = "config")]
        preset: Option<String>,
        /// TOML config file.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Dotted-path overrides, e.g. `--set optimizer.alpha=0.05`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        sets: Vec<String>,
        /// Output directory (default `runs/<preset-or-config-stem>`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Master seed override.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// List available presets and registered algorithms.
    ListPresets,
    /// Parse and validate a config file.
    Validate { config: PathBuf },
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Run {
            preset: preset_name,
            config,
            sets,
            out,
            seed,
        } => {
            let (mut cfg, default_out) = match (&preset_name, &config) {
                (Some(name), None) => (
                    preset(name).with_context(|| format!("loading preset `{name}`"))?,
                    PathBuf::from("runs").join(name),
                ),
                (None, Some(path)) => {
                    let stem = path
                        .file_stem()
                        .map(|s| s.to_string_lossy().into_owned())
                        .unwrap_or_else(|| "experiment".into());
                    (
                        ExperimentConfig::from_file(path)
                            .with_context(|| format!("loading config {}", path.display()))?,
                        PathBuf::from("runs").join(stem),
                    )
                }
                _ => bail!("exactly one of --preset or --config is required"),
            };
            cfg = cfg.with_sets(&sets)?;
            if let Some(seed) = seed {
                cfg.run.seed = seed;
            }
            let out_dir = out.unwrap_or(default_out);
            let summary = run_experiment(&cfg, &out_dir)?;
            println!("wrote {}", out_dir.display());
            for point in &summary.points {
                for algo in &point.algorithms {
                    let mut parts = vec![format!("{} / {}", point.label, algo.algorithm)];
                    for key in ["tail_loss", "tail_dist_sq", "test_accuracy"] {
                        if let Some(m) = algo.mean.get(key) {
                            let s = algo.std.get(key).copied().unwrap_or(0.0);
                            parts.push(format!("{key}={m:.6e}±{s:.1e}"));
                        }
                    }
                    println!("  {}", parts.join("  "));
                }
            }
            Ok(())
        }
        Command::ListPresets => {
            println!("presets:");
            for name in preset_names() {
                println!("  {name}");
            }
            println!("algorithms:");
            for reg in optim::registry() {
                let aliases = if reg.aliases.is_empty() {
                    String::new()
                } else {
                    format!(" (aliases: {})", reg.aliases.join(", "))
                };
                println!("  {}{aliases} — {}", reg.name, reg.summary);
            }
            Ok(())
        }
        Command::Validate { config } => {
            ExperimentConfig::from_file(&config)
                .with_context(|| format!("validating {}", config.display()))?;
            println!("ok: {}", config.display());
            Ok(())
        }
    }
}
