//! Experiment harness: TOML configs, run matrices over estimators, K and
//! seeds, CSV metrics and a run manifest.
//!
//! Config format (version 1):
//!
//! ```toml
//! version = 1
//! name = "d10k2"
//!
//! [train]            # any TrainConfig field; omitted fields take defaults
//! n_iterations = 300
//! env = { kind = "block_quadratic", block_dims = [5, 5] }
//!
//! [sweep]
//! estimators = ["ASDG", "GADB", "ADFB"]
//! subspaces = [2]    # K values tried for ASDG (defaults to train.subspaces)
//! seeds = [0, 1, 2]
//!
//! [output]
//! dir = "runs/d10k2"
//!
//! [gridk]            # optional, used by the K grid search
//! k_values = [1, 2, 3, 4]
//! final_window = 10
//!
//! [variance]         # optional, used by the variance comparison
//! warmup_iterations = 30
//! n_batches = 20
//! batch_size = 512
//! ```

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::estimators::{gradient_variances, Critics, EstimatorKind, EstimatorSpec};
use crate::partition::Partition;
use crate::trainer::{posa_train_with, IterationRecord, TrainConfig, Trainer};
use crate::util::{rng_stream, stream};

pub const CONFIG_VERSION: u32 = 1;

/// Column order of every metrics CSV.
pub const METRICS_HEADER: [&str; 12] = [
    "run_id",
    "estimator",
    "k",
    "seed",
    "iteration",
    "env_steps",
    "mean_return",
    "grad_variance",
    "partition",
    "value_loss",
    "adv_loss",
    "wall_ms",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub estimators: Vec<EstimatorKind>,
    /// K values for ASDG; empty means `train.subspaces`.
    pub subspaces: Vec<usize>,
    pub seeds: Vec<u64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            estimators: vec![EstimatorKind::Asdg],
            subspaces: Vec::new(),
            seeds: vec![0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("runs") }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridKConfig {
    pub k_values: Vec<usize>,
    /// Iterations averaged for the final-return column.
    pub final_window: usize,
}

impl Default for GridKConfig {
    fn default() -> Self {
        Self {
            k_values: Vec::new(),
            final_window: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VarianceConfig {
    /// ASDG iterations trained before the policy and critics are frozen.
    pub warmup_iterations: usize,
    pub n_batches: usize,
    pub batch_size: usize,
}

impl Default for VarianceConfig {
    fn default() -> Self {
        Self {
            warmup_iterations: 30,
            n_batches: 20,
            batch_size: 512,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub name: String,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub gridk: Option<GridKConfig>,
    #[serde(default)]
    pub variance: Option<VarianceConfig>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<(Self, String)> {
        let text = fs::read_to_string(path)?;
        let config = Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        Ok((config, text))
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        if self.sweep.seeds.is_empty() {
            return Err(Error::Config("sweep.seeds must list at least one seed".into()));
        }
        if self.sweep.estimators.is_empty() {
            return Err(Error::Config("sweep.estimators must list at least one estimator".into()));
        }
        let m = self.train.env.action_dim();
        if let Some(&k) = self.sweep.subspaces.iter().find(|&&k| k == 0 || k > m) {
            return Err(Error::Config(format!("sweep.subspaces value {k} outside 1..={m}")));
        }
        if let Some(g) = &self.gridk {
            if let Some(&k) = g.k_values.iter().find(|&&k| k == 0 || k > m) {
                return Err(Error::Config(format!("gridk.k_values value {k} outside 1..={m}")));
            }
            if g.final_window == 0 {
                return Err(Error::Config("gridk.final_window must be >= 1".into()));
            }
        }
        if let Some(v) = &self.variance {
            if v.n_batches < 2 || v.batch_size == 0 {
                return Err(Error::Config("variance needs n_batches >= 2 and batch_size >= 1".into()));
            }
        }
        self.train.validate()
    }

    fn asdg_ks(&self) -> Vec<usize> {
        if self.sweep.subspaces.is_empty() {
            vec![self.train.subspaces]
        } else {
            self.sweep.subspaces.clone()
        }
    }
}

/// Command-line adjustments applied on top of a config.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOptions {
    pub seed_offset: u64,
    pub out_dir: Option<PathBuf>,
    pub dry_run: bool,
    /// Truncate every run to at most this many iterations.
    pub max_iterations: Option<usize>,
    /// Use only the first this-many seeds.
    pub max_seeds: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannedRun {
    pub run_id: String,
    pub estimator: EstimatorKind,
    pub k: usize,
    pub seed: u64,
    pub config: TrainConfig,
}

pub fn resolved_seeds(config: &ExperimentConfig, opts: &RunOptions) -> Vec<u64> {
    let n = opts.max_seeds.unwrap_or(usize::MAX);
    config.sweep.seeds.iter().take(n).map(|s| s + opts.seed_offset).collect()
}

fn planned(base: &TrainConfig, estimator: EstimatorKind, k: usize, seed: u64, opts: &RunOptions) -> PlannedRun {
    let mut config = base.clone();
    config.estimator = estimator;
    config.subspaces = k;
    config.seed = seed;
    if let Some(n) = opts.max_iterations {
        config.n_iterations = config.n_iterations.min(n);
    }
    PlannedRun {
        run_id: format!("{}_k{k}_s{seed}", estimator.name().to_lowercase()),
        estimator,
        k,
        seed,
        config,
    }
}

/// The run matrix in execution order: estimator, then K, then seed.
pub fn plan_runs(config: &ExperimentConfig, opts: &RunOptions) -> Vec<PlannedRun> {
    let m = config.train.env.action_dim();
    let mut runs = Vec::new();
    for &estimator in &config.sweep.estimators {
        let ks = match estimator {
            EstimatorKind::Asdg => config.asdg_ks(),
            EstimatorKind::Adfb => vec![m],
            _ => vec![1],
        };
        for k in ks {
            for seed in resolved_seeds(config, opts) {
                runs.push(planned(&config.train, estimator, k, seed, opts));
            }
        }
    }
    runs
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub run_id: String,
    pub estimator: EstimatorKind,
    pub k: usize,
    pub seed: u64,
    pub iteration: usize,
    pub env_steps: u64,
    pub mean_return: f64,
    pub grad_variance: Option<f64>,
    pub partition: Partition,
    pub value_loss: f64,
    pub adv_loss: Option<f64>,
    pub wall_ms: Option<f64>,
}

impl MetricsRow {
    pub fn from_record(run: &PlannedRun, r: &IterationRecord) -> Self {
        Self {
            run_id: run.run_id.clone(),
            estimator: run.estimator,
            k: run.k,
            seed: run.seed,
            iteration: r.iteration,
            env_steps: r.env_steps,
            mean_return: r.mean_return,
            grad_variance: r.grad_variance,
            partition: r.partition.clone(),
            value_loss: r.value_loss,
            adv_loss: r.adv_loss,
            wall_ms: r.wall_ms,
        }
    }

    pub fn fields(&self) -> [String; 12] {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        [
            self.run_id.clone(),
            self.estimator.name().to_string(),
            self.k.to_string(),
            self.seed.to_string(),
            self.iteration.to_string(),
            self.env_steps.to_string(),
            self.mean_return.to_string(),
            opt(self.grad_variance),
            self.partition.to_string(),
            self.value_loss.to_string(),
            opt(self.adv_loss),
            opt(self.wall_ms),
        ]
    }
}

/// CSV sink that flushes after every row so partial runs stay on disk.
pub struct MetricsWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl MetricsWriter<BufWriter<File>> {
    pub fn create(path: &Path) -> Result<Self> {
        Self::new(BufWriter::new(File::create(path)?))
    }
}

impl<W: Write> MetricsWriter<W> {
    pub fn new(out: W) -> Result<Self> {
        let mut inner = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        inner.write_record(METRICS_HEADER)?;
        Ok(Self { inner })
    }

    pub fn write(&mut self, row: &MetricsRow) -> Result<()> {
        self.inner.write_record(row.fields())?;
        self.inner.flush()?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.inner.flush()?;
        Ok(())
    }
}

/// Outcome of one planned run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub run: PlannedRun,
    pub rows: Vec<MetricsRow>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
struct ManifestRun {
    run_id: String,
    estimator: String,
    k: usize,
    seed: u64,
    iterations: usize,
    csv: String,
    status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
struct Manifest {
    name: String,
    command: String,
    config_sha256: String,
    config_version: u32,
    crate_version: String,
    seed_offset: u64,
    seeds: Vec<u64>,
    status: String,
    runs: Vec<ManifestRun>,
    /// The full resolved configuration.
    config: ExperimentConfig,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn out_dir(config: &ExperimentConfig, opts: &RunOptions) -> PathBuf {
    opts.out_dir.clone().unwrap_or_else(|| config.output.dir.clone())
}

fn execute(run: &PlannedRun, dir: &Path) -> Result<RunResult> {
    let path = dir.join(format!("{}.csv", run.run_id));
    let mut writer = MetricsWriter::create(&path)?;
    let mut rows = Vec::new();
    let outcome = posa_train_with(&run.config, |record| {
        let row = MetricsRow::from_record(run, record);
        writer.write(&row)?;
        rows.push(row);
        Ok(())
    });
    writer.finish()?;
    Ok(RunResult {
        run: run.clone(),
        rows,
        error: outcome.err().map(|e| e.to_string()),
    })
}

fn write_merged(dir: &Path, file: &str, results: &[RunResult]) -> Result<()> {
    let mut w = MetricsWriter::create(&dir.join(file))?;
    for row in results.iter().flat_map(|r| &r.rows) {
        w.write(row)?;
    }
    w.finish()
}

fn write_manifest(
    dir: &Path,
    command: &str,
    config: &ExperimentConfig,
    config_text: &str,
    opts: &RunOptions,
    results: &[RunResult],
) -> Result<()> {
    let failed = results.iter().any(|r| r.error.is_some());
    let manifest = Manifest {
        name: config.name.clone(),
        command: command.to_string(),
        config_sha256: sha256_hex(config_text.as_bytes()),
        config_version: config.version,
        crate_version: env!("CARGO_PKG_VERSION").to_string(),
        seed_offset: opts.seed_offset,
        seeds: resolved_seeds(config, opts),
        status: if failed { "failed" } else { "ok" }.to_string(),
        runs: results
            .iter()
            .map(|r| ManifestRun {
                run_id: r.run.run_id.clone(),
                estimator: r.run.estimator.name().to_string(),
                k: r.run.k,
                seed: r.run.seed,
                iterations: r.rows.len(),
                csv: format!("{}.csv", r.run.run_id),
                status: if r.error.is_some() { "failed" } else { "ok" }.to_string(),
                error: r.error.clone(),
            })
            .collect(),
        config: config.clone(),
    };
    let text = toml::to_string(&manifest).map_err(|e| Error::Config(e.to_string()))?;
    fs::write(dir.join("manifest.toml"), text)?;
    Ok(())
}

/// Summary handed back to the caller.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub out_dir: PathBuf,
    pub planned: Vec<PlannedRun>,
    pub results: Vec<RunResult>,
}

impl ExperimentReport {
    pub fn failed(&self) -> bool {
        self.results.iter().any(|r| r.error.is_some())
    }
}

fn run_matrix(
    command: &str,
    runs: Vec<PlannedRun>,
    config: &ExperimentConfig,
    text: &str,
    opts: &RunOptions,
) -> Result<ExperimentReport> {
    let dir = out_dir(config, opts);
    if opts.dry_run {
        return Ok(ExperimentReport {
            out_dir: dir,
            planned: runs,
            results: Vec::new(),
        });
    }
    let run_dir = dir.join("runs");
    fs::create_dir_all(&run_dir)?;
    let mut results = Vec::with_capacity(runs.len());
    for run in &runs {
        let result = execute(run, &run_dir)?;
        let stop = result.error.is_some();
        results.push(result);
        if stop {
            break;
        }
    }
    write_merged(&dir, "metrics.csv", &results)?;
    write_manifest(&dir, command, config, text, opts, &results)?;
    Ok(ExperimentReport {
        out_dir: dir,
        planned: runs,
        results,
    })
}

/// Run every (estimator, K, seed) combination of the config.
pub fn run_experiment(config: &ExperimentConfig, config_text: &str, opts: &RunOptions) -> Result<ExperimentReport> {
    run_matrix("run", plan_runs(config, opts), config, config_text, opts)
}

pub fn run_experiment_file(path: &Path, opts: &RunOptions) -> Result<ExperimentReport> {
    let (config, text) = ExperimentConfig::load(path)?;
    run_experiment(&config, &text, opts)
}

/// Mean of the last `window` returns.
pub fn final_window_mean(returns: &[f64], window: usize) -> f64 {
    let w = window.clamp(1, returns.len().max(1));
    let tail = &returns[returns.len().saturating_sub(w)..];
    tail.iter().sum::<f64>() / tail.len().max(1) as f64
}

/// Trapezoidal area under the return curve against environment steps,
/// divided by the step span (a step-weighted mean return).
pub fn curve_auc(env_steps: &[u64], returns: &[f64]) -> f64 {
    match returns.len() {
        0 => 0.0,
        1 => returns[0],
        n => {
            let mut area = 0.0;
            for i in 1..n {
                area += 0.5 * (returns[i] + returns[i - 1]) * (env_steps[i] - env_steps[i - 1]) as f64;
            }
            area / (env_steps[n - 1] - env_steps[0]) as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridKRow {
    pub k: usize,
    pub seed: u64,
    pub final_return: f64,
    pub auc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridKReport {
    pub experiment: ExperimentReport,
    pub rows: Vec<GridKRow>,
}

impl GridKReport {
    /// K with the highest mean AUC across seeds.
    pub fn best_k(&self) -> Option<usize> {
        let mut ks: Vec<usize> = self.rows.iter().map(|r| r.k).collect();
        ks.dedup();
        ks.into_iter().max_by(|&a, &b| {
            let mean = |k| {
                let v: Vec<f64> = self.rows.iter().filter(|r| r.k == k).map(|r| r.auc).collect();
                v.iter().sum::<f64>() / v.len() as f64
            };
            mean(a).total_cmp(&mean(b))
        })
    }
}

pub const GRIDK_HEADER: [&str; 4] = ["k", "seed", "final_return", "auc"];

/// ASDG over each K in `gridk.k_values` (all of `1..=m` when empty).
pub fn grid_search_k(config: &ExperimentConfig, config_text: &str, opts: &RunOptions) -> Result<GridKReport> {
    let grid = config.gridk.clone().unwrap_or_default();
    let m = config.train.env.action_dim();
    let ks = if grid.k_values.is_empty() { (1..=m).collect() } else { grid.k_values.clone() };
    let mut runs = Vec::new();
    for &k in &ks {
        for seed in resolved_seeds(config, opts) {
            runs.push(planned(&config.train, EstimatorKind::Asdg, k, seed, opts));
        }
    }
    let experiment = run_matrix("gridk", runs, config, config_text, opts)?;
    let rows: Vec<GridKRow> = experiment
        .results
        .iter()
        .map(|r| {
            let returns: Vec<f64> = r.rows.iter().map(|x| x.mean_return).collect();
            let steps: Vec<u64> = r.rows.iter().map(|x| x.env_steps).collect();
            GridKRow {
                k: r.run.k,
                seed: r.run.seed,
                final_return: final_window_mean(&returns, grid.final_window),
                auc: curve_auc(&steps, &returns),
            }
        })
        .collect();
    if !opts.dry_run {
        let mut w = csv::Writer::from_path(experiment.out_dir.join("gridk.csv"))?;
        w.write_record(GRIDK_HEADER)?;
        for r in &rows {
            w.write_record([r.k.to_string(), r.seed.to_string(), r.final_return.to_string(), r.auc.to_string()])?;
        }
        w.flush()?;
    }
    Ok(GridKReport { experiment, rows })
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarianceRow {
    pub seed: u64,
    pub estimator: EstimatorKind,
    pub k: usize,
    pub variance: f64,
}

pub const VARIANCE_HEADER: [&str; 4] = ["seed", "estimator", "k", "variance"];

/// Train ASDG briefly, freeze everything, then compare the gradient variance
/// of ADFB, ASDG and GADB on shared batches.
pub fn variance_comparison(config: &ExperimentConfig, opts: &RunOptions) -> Result<Vec<VarianceRow>> {
    let vc = config.variance.clone().unwrap_or_default();
    let seeds = resolved_seeds(config, opts);
    let dir = out_dir(config, opts);
    if opts.dry_run {
        return Ok(Vec::new());
    }
    fs::create_dir_all(&dir)?;
    let mut rows = Vec::new();
    for seed in seeds {
        let mut train = config.train.clone();
        train.estimator = EstimatorKind::Asdg;
        train.seed = seed;
        let warmup = opts.max_iterations.map_or(vc.warmup_iterations, |n| n.min(vc.warmup_iterations));
        rows.extend(frozen_variances(&train, warmup, vc.n_batches, vc.batch_size)?);
    }
    let mut w = csv::Writer::from_path(dir.join("variance.csv"))?;
    w.write_record(VARIANCE_HEADER)?;
    for r in &rows {
        w.write_record([r.seed.to_string(), r.estimator.name().to_string(), r.k.to_string(), r.variance.to_string()])?;
    }
    w.flush()?;
    Ok(rows)
}

/// Variances of ADFB, ASDG (learned partition) and GADB after `warmup`
/// ASDG iterations of `train`.
pub fn frozen_variances(train: &TrainConfig, warmup: usize, n_batches: usize, batch_size: usize) -> Result<Vec<VarianceRow>> {
    let mut trainer = Trainer::new(train.clone())?;
    for _ in 0..warmup {
        trainer.step()?;
    }
    let m = trainer.policy().action_dim();
    let specs = [
        EstimatorSpec::new(EstimatorKind::Adfb, m),
        EstimatorSpec::asdg(trainer.partition().clone()),
        EstimatorSpec::new(EstimatorKind::Gadb, m),
    ];
    let critics = Critics {
        value_net: trainer.value_net(),
        advnet: Some(trainer.advnet()),
        gamma: train.gamma,
        lambda: train.lambda,
        normalize: train.normalize_advantages,
    };
    let mut env = trainer.env().clone();
    let mut rng = rng_stream(train.seed, stream::PROBE);
    let v = gradient_variances(trainer.policy(), &mut env, &specs, &critics, n_batches, batch_size, &mut rng)?;
    Ok(specs
        .iter()
        .zip(v)
        .map(|(s, variance)| VarianceRow {
            seed: train.seed,
            estimator: s.kind,
            k: s.partition.k(),
            variance,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = r#"
version = 1
name = "small"

[train]
n_iterations = 2
batch_size = 32
policy_epochs = 1
policy_minibatch = 16
fit_steps = 2
fit_minibatch = 16
policy_hidden = [8]
value_hidden = [8]
env = { kind = "block_quadratic", block_dims = [2, 2] }
advnet = { wide_hidden = [8], deep_hidden = [8, 8] }

[sweep]
estimators = ["ASDG", "GADB", "ADFB"]
subspaces = [2]
seeds = [0, 1]
"#;

    #[test]
    fn parses_and_plans() {
        let c = ExperimentConfig::from_toml(SMALL).unwrap();
        let plan = plan_runs(&c, &RunOptions::default());
        let ids: Vec<&str> = plan.iter().map(|p| p.run_id.as_str()).collect();
        assert_eq!(ids, ["asdg_k2_s0", "asdg_k2_s1", "gadb_k1_s0", "gadb_k1_s1", "adfb_k4_s0", "adfb_k4_s1"]);
        let shifted = plan_runs(&c, &RunOptions { seed_offset: 10, ..RunOptions::default() });
        assert_eq!(shifted[0].seed, 10);
        assert_eq!(shifted[0].config.seed, 10);
    }

    #[test]
    fn config_errors_name_the_problem() {
        let err = ExperimentConfig::from_toml(&SMALL.replace("batch_size = 32", "batch_sise = 32")).unwrap_err();
        assert!(err.to_string().contains("batch_sise"), "{err}");
        let err = ExperimentConfig::from_toml(&SMALL.replace("version = 1", "version = 2")).unwrap_err();
        assert!(err.to_string().contains("version"));
        let err = ExperimentConfig::from_toml(&SMALL.replace("seeds = [0, 1]", "seeds = []")).unwrap_err();
        assert!(err.to_string().contains("seeds"));
    }

    #[test]
    fn dry_run_writes_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let c = ExperimentConfig::from_toml(SMALL).unwrap();
        let opts = RunOptions {
            dry_run: true,
            out_dir: Some(dir.path().join("out")),
            ..RunOptions::default()
        };
        let report = run_experiment(&c, SMALL, &opts).unwrap();
        assert_eq!(report.planned.len(), 6);
        assert!(!dir.path().join("out").exists());
    }

    #[test]
    fn run_writes_csvs_and_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let c = ExperimentConfig::from_toml(SMALL).unwrap();
        let opts = RunOptions {
            out_dir: Some(dir.path().to_path_buf()),
            max_seeds: Some(1),
            ..RunOptions::default()
        };
        let report = run_experiment(&c, SMALL, &opts).unwrap();
        assert!(!report.failed());
        let merged = fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
        assert_eq!(merged.lines().next().unwrap(), METRICS_HEADER.join(","));
        assert_eq!(merged.lines().count(), 1 + 3 * 2);
        let manifest = fs::read_to_string(dir.path().join("manifest.toml")).unwrap();
        assert!(manifest.contains(&sha256_hex(SMALL.as_bytes())));
        assert!(dir.path().join("runs/asdg_k2_s0.csv").exists());
    }

    #[test]
    fn auc_and_window() {
        assert_eq!(final_window_mean(&[1.0, 2.0, 3.0, 5.0], 2), 4.0);
        assert_eq!(final_window_mean(&[1.0], 10), 1.0);
        assert_eq!(curve_auc(&[10, 20, 30], &[0.0, 1.0, 1.0]), 0.75);
    }

    #[test]
    fn gridk_rows_per_k() {
        let text = format!("{SMALL}\n[gridk]\nk_values = []\nfinal_window = 1\n");
        let c = ExperimentConfig::from_toml(&text).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let opts = RunOptions {
            out_dir: Some(dir.path().to_path_buf()),
            max_seeds: Some(1),
            max_iterations: Some(1),
            ..RunOptions::default()
        };
        let report = grid_search_k(&c, &text, &opts).unwrap();
        assert_eq!(report.rows.len(), 4);
        assert!(report.best_k().is_some());
    }
}
