use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use posa_core::experiment::{
    grid_search_k, resolved_seeds, run_experiment, variance_comparison, ExperimentConfig, PlannedRun, RunOptions,
};

#[derive(Parser)]
#[command(name = "posa", version, about = "Run action-subspace policy-gradient experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train every (estimator, K, seed) combination in the config.
    Run(Common),
    /// Sweep the number of subspaces K for ASDG.
    Gridk(Common),
    /// Compare gradient variances of ADFB, ASDG and GADB at a frozen policy.
    Variance(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML).
    config: PathBuf,
    /// Validate the config and print the run matrix without training.
    #[arg(long)]
    dry_run: bool,
    /// Added to every seed in the config.
    #[arg(long, default_value_t = 0)]
    seed_offset: u64,
    /// Output directory (overrides `output.dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Cap on iterations per run.
    #[arg(long)]
    max_iterations: Option<usize>,
    /// Use only the first N seeds.
    #[arg(long)]
    max_seeds: Option<usize>,
}

impl Common {
    fn load(&self) -> Result<(ExperimentConfig, String, RunOptions)> {
        let (config, text) = ExperimentConfig::load(&self.config).context("invalid config")?;
        let opts = RunOptions {
            seed_offset: self.seed_offset,
            out_dir: self.out.clone(),
            dry_run: self.dry_run,
            max_iterations: self.max_iterations,
            max_seeds: self.max_seeds,
        };
        Ok((config, text, opts))
    }
}

fn print_plan(runs: &[PlannedRun]) {
    println!("{:<20} {:<10} {:>3} {:>6} {:>6} {:>6}", "run_id", "estimator", "k", "seed", "iters", "batch");
    for r in runs {
        println!(
            "{:<20} {:<10} {:>3} {:>6} {:>6} {:>6}",
            r.run_id, r.estimator, r.k, r.seed, r.config.n_iterations, r.config.batch_size
        );
    }
    println!("{} runs planned", runs.len());
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run(c) => {
            let (config, text, opts) = c.load()?;
            let report = run_experiment(&config, &text, &opts)?;
            if opts.dry_run {
                print_plan(&report.planned);
                return Ok(true);
            }
            for r in &report.results {
                let last = r.rows.last().map_or(f64::NAN, |x| x.mean_return);
                match &r.error {
                    None => println!("{:<20} iterations={:<5} final_return={last:.4}", r.run.run_id, r.rows.len()),
                    Some(e) => eprintln!("{:<20} FAILED after {} iterations: {e}", r.run.run_id, r.rows.len()),
                }
            }
            println!("wrote {}", report.out_dir.join("metrics.csv").display());
            Ok(!report.failed())
        }
        Command::Gridk(c) => {
            let (config, text, opts) = c.load()?;
            let report = grid_search_k(&config, &text, &opts)?;
            if opts.dry_run {
                print_plan(&report.experiment.planned);
                return Ok(true);
            }
            println!("{:>3} {:>6} {:>14} {:>14}", "k", "seed", "final_return", "auc");
            for r in &report.rows {
                println!("{:>3} {:>6} {:>14.4} {:>14.4}", r.k, r.seed, r.final_return, r.auc);
            }
            if let Some(k) = report.best_k() {
                println!("best k by mean auc: {k}");
            }
            Ok(!report.experiment.failed())
        }
        Command::Variance(c) => {
            let (config, _, opts) = c.load()?;
            if opts.dry_run {
                let v = config.variance.clone().unwrap_or_default();
                let seeds = resolved_seeds(&config, &opts);
                println!(
                    "variance: warmup={} n_batches={} batch_size={} seeds={seeds:?}",
                    v.warmup_iterations, v.n_batches, v.batch_size
                );
                return Ok(true);
            }
            let rows = variance_comparison(&config, &opts)?;
            println!("{:>6} {:<10} {:>3} {:>16}", "seed", "estimator", "k", "variance");
            for r in &rows {
                println!("{:>6} {:<10} {:>3} {:>16.6e}", r.seed, r.estimator, r.k, r.variance);
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
