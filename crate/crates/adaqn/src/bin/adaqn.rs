use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use adaqn::harness::audit::AUDIT_FILE;
use adaqn::harness::config::ExperimentConfig;
use adaqn::harness::{flop_audit, grid_search, inspect_report, run_experiment, write_audit};
use adaqn::OptimError;

#[derive(Parser)]
#[command(name = "adaqn", about = "Stochastic quasi-Newton training runs", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Overrides {
    /// Override the run seed from the config file.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the output directory from the config file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Execute one configured training run.
    Run {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
        /// Continue from a checkpoint instead of starting fresh.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Run every cell of the configured hyperparameter grid.
    Grid {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Measure per-iteration operation counts against the cost model.
    Audit {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Summarize a metrics file as a table.
    Inspect { metrics: PathBuf },
}

fn load(config: &PathBuf, overrides: &Overrides) -> Result<ExperimentConfig, OptimError> {
    let mut config = ExperimentConfig::load(config)?;
    if let Some(seed) = overrides.seed {
        config.run.seed = seed;
    }
    if let Some(out) = &overrides.out {
        config.run.out = out.clone();
    }
    Ok(config)
}

fn dispatch(cli: Cli) -> Result<(), OptimError> {
    match cli.command {
        Command::Run {
            config,
            overrides,
            resume,
        } => {
            let config = load(&config, &overrides)?;
            let outcome = run_experiment(&config, resume.as_deref())?;
            for record in &outcome.records {
                println!(
                    "epoch {:>4}  iter {:>8}  train {:.6}  test {:.6}  mem {:.2}  a/s/r {}/{}/{}  flops {}",
                    record.epoch,
                    record.iteration,
                    record.train_loss,
                    record.test_loss,
                    record.avg_memory,
                    record.accepted,
                    record.skipped,
                    record.rejected,
                    record.flops,
                );
            }
            println!("metrics: {}", outcome.metrics_path.display());
            println!("checkpoint: {}", outcome.checkpoint_path.display());
        }
        Command::Grid { config, overrides } => {
            let config = load(&config, &overrides)?;
            let summary = grid_search(&config)?;
            println!("rank  alpha      L     test loss      status");
            for cell in &summary.cells {
                let l = cell
                    .cycle_length
                    .map(|l| l.to_string())
                    .unwrap_or_else(|| "-".into());
                match (&cell.final_record, &cell.error) {
                    (Some(r), _) => println!(
                        "{:>4}  {:<9}  {:<4}  {:<13.6}  ok",
                        cell.rank, cell.alpha, l, r.test_loss
                    ),
                    (None, Some(e)) => {
                        println!("{:>4}  {:<9}  {:<4}  {:<13}  failed: {e}", cell.rank, cell.alpha, l, "-")
                    }
                    (None, None) => unreachable!("cell has neither record nor error"),
                }
            }
            println!(
                "summary: {}",
                config.run.resolved_out().join("grid_summary.json").display()
            );
        }
        Command::Audit { config, overrides } => {
            let config = load(&config, &overrides)?;
            let section = config.audit.clone().unwrap_or_default();
            let report = flop_audit(&section)?;
            println!("{:>10}  per-iteration ops", "n");
            for entry in &report.sizes {
                println!("{:>10}  {:.1}", entry.n, entry.per_iteration);
            }
            println!(
                "linear fit: {:.3} ops/coordinate/iteration, max deviation {:.2}%",
                report.fit.slope,
                report.fit.max_rel_deviation * 100.0
            );
            println!(
                "degenerate (no curvature) vs adagrad at n={}: {:.1} vs {:.1} ({:+.2}%)",
                report.degenerate.n,
                report.degenerate.adaqn_per_iteration,
                report.degenerate.adagrad_per_iteration,
                report.degenerate.rel_diff * 100.0
            );
            print!("cycle-length sweep at n={}:", report.cycle_sweep.n);
            for e in &report.cycle_sweep.entries {
                print!("  L={} {:.1}", e.cycle_length, e.per_iteration);
            }
            println!(
                "  ({})",
                if report.cycle_sweep.strictly_decreasing {
                    "strictly decreasing"
                } else {
                    "NOT monotone"
                }
            );
            let out_dir = config.run.resolved_out();
            std::fs::create_dir_all(&out_dir)?;
            let path = out_dir.join(AUDIT_FILE);
            write_audit(&path, &report)?;
            println!("report: {}", path.display());
        }
        Command::Inspect { metrics } => {
            print!("{}", inspect_report(&metrics)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                OptimError::Config(_) => 2,
                OptimError::Numerical { .. }
                | OptimError::DimensionMismatch { .. }
                | OptimError::EmptyFifo => 3,
                OptimError::Io(_) | OptimError::Serde(_) => 4,
            };
            ExitCode::from(code)
        }
    }
}
