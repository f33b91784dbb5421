use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hamnet::harness::{
    density_sweep, ensemble, load_weights, pretrain_scenario, run_scenario, write_ensemble, write_run,
    write_summary_json, write_sweep, RunSummary, ScenarioConfig, SummaryDocument,
};
use hamnet::neuralnet::NetParams;
use hamnet::strategies::StrategyKind;

#[derive(Parser)]
#[command(name = "hamnet", version, about = "Self-organizing ad-hoc networks of learning agents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the shared value network and store its weights.
    Pretrain {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// One decision-phase run.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Seeded ensemble of runs, summarized over the final window.
    Ensemble {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 20)]
        runs: usize,
        #[arg(long)]
        weights: Option<PathBuf>,
        /// Comma-separated strategies to compare instead of the configured one.
        #[arg(long, value_delimiter = ',')]
        strategies: Vec<StrategyKind>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// One ensemble per density with a fixed agent count. Without weights,
    /// network strategies pretrain at each density.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        rho: Vec<f64>,
        #[arg(long, default_value_t = 20)]
        runs: usize,
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn load_config(path: &Path, weights: Option<PathBuf>) -> hamnet::Result<ScenarioConfig> {
    let mut config = ScenarioConfig::load(path)?;
    if weights.is_some() {
        config.weights_path = weights;
    }
    Ok(config)
}

fn weights_for(config: &ScenarioConfig, kind: StrategyKind) -> hamnet::Result<Option<NetParams>> {
    let mut c = config.clone();
    c.strategy.kind = kind;
    load_weights(&c)
}

fn execute(cli: Cli) -> hamnet::Result<()> {
    match cli.command {
        Command::Pretrain { config, out } => {
            let config = ScenarioConfig::load(&config)?;
            let (params, stats) = pretrain_scenario(&config)?;
            params.save(&out)?;
            eprintln!(
                "pretrained on {} transitions over {} steps, mean loss {:.6}, skipped {}",
                stats.transitions, stats.steps, stats.mean_loss, stats.skipped_updates
            );
        }
        Command::Run {
            config,
            weights,
            seed,
            out_dir,
        } => {
            let mut config = load_config(&config, weights)?;
            if let Some(seed) = seed {
                config.seed = seed;
            }
            let weights = load_weights(&config)?;
            let run = run_scenario(&config, weights.as_ref())?;
            write_run(&out_dir, &run)?;
            let summary = RunSummary::from_runs(std::slice::from_ref(&run), config.window)?;
            write_summary_json(&out_dir.join("summary.json"), &SummaryDocument::new(&config, &[summary]))?;
            eprintln!(
                "{}: connectivity {:.1}%, total H {:.3}",
                config.strategy.kind.name(),
                run.window_means.connectivity_pct,
                run.window_means.total_h
            );
        }
        Command::Ensemble {
            config,
            runs,
            weights,
            strategies,
            out_dir,
        } => {
            let config = load_config(&config, weights)?;
            let kinds = if strategies.is_empty() {
                vec![config.strategy.kind]
            } else {
                strategies
            };
            let mut summaries = Vec::new();
            for kind in kinds {
                let mut c = config.clone();
                c.strategy.kind = kind;
                let w = weights_for(&config, kind)?;
                let result = ensemble(&c, w.as_ref(), runs)?;
                write_ensemble(&out_dir.join(kind.name()), &result)?;
                eprintln!(
                    "{}: connectivity {:.1}% (sd {:.1}), total H {:.3}, energy {:.3}",
                    kind.name(),
                    result.summary.mean.connectivity_pct,
                    result.summary.std.connectivity_pct,
                    result.summary.mean.total_h,
                    result.summary.mean.energy
                );
                summaries.push(result.summary);
            }
            write_summary_json(&out_dir.join("summary.json"), &SummaryDocument::new(&config, &summaries))?;
        }
        Command::Sweep {
            config,
            rho,
            runs,
            weights,
            out_dir,
        } => {
            let config = load_config(&config, weights)?;
            let w = match config.weights_path {
                Some(_) => load_weights(&config)?,
                None => None,
            };
            let points = density_sweep(&config, &rho, w.as_ref(), runs)?;
            write_sweep(&out_dir, &config, &points)?;
            for p in &points {
                eprintln!(
                    "rho {}: L {:.2}, connectivity {:.1}%, mean radius {:.2}",
                    p.rho, p.ensemble.summary.side_length, p.ensemble.summary.mean.connectivity_pct, p.ensemble.summary.mean.mean_radius
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
