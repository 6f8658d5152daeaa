use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use etl::cli::{self, AnalysisKind, Comparison, RunConfig, SynthOptions};
use etl::dataio::{Phase, SplitOptions};
use etl::eval::Metric;
use etl::Result;

#[derive(Parser)]
#[command(
    name = "etl",
    version,
    about = "Cross-domain recommendation with equivalent transformations"
)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a paired leave-one-out dataset from two rating files.
    Prepare {
        #[arg(long)]
        ratings_a: PathBuf,
        #[arg(long)]
        ratings_b: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 5)]
        min_count: usize,
        #[arg(long, default_value_t = 99)]
        n_negatives: usize,
        /// Reuse validation negatives for the test item.
        #[arg(long)]
        shared_negatives: bool,
    },
    /// Generate a synthetic paired dataset with known factors.
    Synth {
        #[arg(long, default_value_t = 2000)]
        users: usize,
        #[arg(long, default_value_t = 500)]
        items_a: usize,
        #[arg(long, default_value_t = 500)]
        items_b: usize,
        #[arg(long, default_value_t = 8)]
        shared_dim: usize,
        #[arg(long, default_value_t = 4)]
        specific_dim: usize,
        /// Expected fraction of user-item pairs that are interactions.
        #[arg(long, default_value_t = 0.02)]
        sparsity: f64,
        #[arg(long, default_value_t = 3.0)]
        signal: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 99)]
        n_negatives: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model and write a run directory.
    Train {
        /// Flat `key = value` config; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// `key=value` overrides, applied after the config file.
        #[arg(long = "set")]
        set: Vec<String>,
    },
    /// Evaluate a checkpoint and print CSV metrics.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Overrides the dataset recorded in the run config.
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long, default_value = "test")]
        phase: Phase,
        /// Also write metrics.csv and metrics.json here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Latent-space diagnostics on a trained run.
    Analyze {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long, default_value = "all")]
        which: AnalysisKind,
    },
    /// Train every point of a hyperparameter grid.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "set")]
        set: Vec<String>,
        /// Grid axis `key=v1,v2,...`; repeat for more axes.
        #[arg(long = "grid", required = true)]
        grid: Vec<String>,
        #[arg(long)]
        out: PathBuf,
        /// Runs trained concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Aggregate run directories (or sweep directories) into mean ± SE.
    Report {
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        #[arg(long, default_value = "hr")]
        metric: Metric,
        #[arg(long, default_value_t = 10)]
        k: usize,
        /// Paired t-test `key=a,b` between runs that differ only in `key`.
        #[arg(long)]
        compare: Option<Comparison>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(path: Option<PathBuf>, set: &[String]) -> Result<RunConfig> {
    let mut cfg = match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.apply_overrides(set)?;
    Ok(cfg)
}

fn run(args: Args) -> Result<()> {
    match args.command {
        Command::Prepare {
            ratings_a,
            ratings_b,
            out,
            seed,
            min_count,
            n_negatives,
            shared_negatives,
        } => {
            let opts = SplitOptions {
                n_negatives,
                shared_negatives,
                seed,
                min_count,
            };
            for s in cli::cmd_prepare(ratings_a, ratings_b, &out, &opts)? {
                println!("{s}");
            }
        }
        Command::Synth {
            users,
            items_a,
            items_b,
            shared_dim,
            specific_dim,
            sparsity,
            signal,
            seed,
            n_negatives,
            out,
        } => {
            let opts = SynthOptions {
                n_users: users,
                n_items: [items_a, items_b],
                shared_dim,
                specific_dim,
                sparsity,
                signal,
                seed,
                n_negatives,
            };
            for s in cli::cmd_synth(&opts, &out)?.dataset.stats() {
                println!("{s}");
            }
        }
        Command::Train { config, set } => {
            let o = cli::cmd_train(&load_config(config, &set)?)?;
            println!(
                "best_epoch={} run_dir={}",
                o.fit.best_epoch,
                o.run_dir.display()
            );
            print!("{}", o.report.to_csv());
        }
        Command::Eval {
            checkpoint,
            dataset,
            phase,
            out,
        } => {
            let r = cli::cmd_eval(&checkpoint, dataset.as_deref(), phase)?;
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir).map_err(|e| etl::Error::io(&dir, e))?;
                r.write(&dir)?;
            }
            print!("{}", r.to_csv());
        }
        Command::Analyze {
            checkpoint,
            dataset,
            which,
        } => {
            let v = cli::cmd_analyze(&checkpoint, dataset.as_deref(), which)?;
            println!("{}", serde_json::to_string_pretty(&v).unwrap_or_default());
        }
        Command::Sweep {
            config,
            set,
            grid,
            out,
            jobs,
        } => {
            let base = load_config(config, &set)?;
            let rows = cli::cmd_sweep(&base, &cli::parse_grid(&grid)?, &out, jobs)?;
            println!(
                "{} runs written to {}",
                rows.len(),
                out.join("sweep.csv").display()
            );
        }
        Command::Report {
            runs,
            metric,
            k,
            compare,
            out,
        } => {
            let records = cli::collect_runs(&runs)?;
            let s = cli::cmd_report(&records, metric, k, compare.as_ref(), out.as_deref())?;
            print!("{}", s.to_csv());
            if let Some(t) = s.ttest {
                for (d, t) in ["a", "b"].iter().zip(t) {
                    println!("ttest domain={d} n={} t={:.4} p={:.4}", t.n, t.t, t.p);
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("etl-error {}: {e}", e.category());
            ExitCode::FAILURE
        }
    }
}
