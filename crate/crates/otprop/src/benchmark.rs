//! Benchmark orchestration: datasets x fractions x seeds x algorithms, with
//! deterministic CSV/JSON emission.
//!
//! Each cell draws a stratified split, runs the algorithm transductively, and
//! scores the initially-unlabeled points only. The Gaussian baseline is
//! grid-searched over its bandwidth per (dataset, fraction) and reports its
//! best-mean-accuracy setting, mirroring how such comparators are usually
//! tuned.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::baseline::{gaussian_affinity, lp_propagate};
use crate::data::{gather_rows, load_csv, Dataset, LoadOptions};
use crate::error::{Error, Result};
use crate::metrics::{accuracy, ari, nmi, score_measure};
use crate::propagation::{propagate, OtpConfig};
use crate::split::make_split;

/// Algorithms the harness can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Otp,
    Lp,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Otp => "otp",
            Algorithm::Lp => "lp",
        }
    }
}

/// One dataset entry of a benchmark config.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub path: String,
    pub label_column: String,
    /// Display name; defaults to the file stem.
    #[serde(default)]
    pub name: Option<String>,
    /// Large datasets are skipped unless explicitly included.
    #[serde(default)]
    pub large: bool,
}

fn default_fractions() -> Vec<f64> {
    vec![0.15, 0.25, 0.35]
}

fn default_seeds() -> Vec<u64> {
    (0..10).collect()
}

fn default_algorithms() -> Vec<Algorithm> {
    vec![Algorithm::Otp, Algorithm::Lp]
}

fn default_epsilon() -> f64 {
    0.005
}

fn default_alpha() -> f64 {
    0.02
}

fn default_sigma_grid() -> Vec<f64> {
    vec![0.1, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 2.5, 3.0]
}

fn default_sinkhorn_tol() -> f64 {
    1e-9
}

fn default_sinkhorn_max_iter() -> usize {
    10_000
}

fn default_lp_tol() -> f64 {
    1e-6
}

fn default_lp_max_iter() -> usize {
    1000
}

fn default_true() -> bool {
    true
}

/// Full benchmark configuration; every field has a default, so a config file
/// only needs the dataset list.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub datasets: Vec<DatasetSpec>,
    #[serde(default = "default_fractions")]
    pub fractions: Vec<f64>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_algorithms")]
    pub algorithms: Vec<Algorithm>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_sigma_grid")]
    pub sigma_grid: Vec<f64>,
    #[serde(default = "default_sinkhorn_tol")]
    pub sinkhorn_tol: f64,
    #[serde(default = "default_sinkhorn_max_iter")]
    pub sinkhorn_max_iter: usize,
    #[serde(default = "default_lp_tol")]
    pub lp_tol: f64,
    #[serde(default = "default_lp_max_iter")]
    pub lp_max_iter: usize,
    #[serde(default = "default_true")]
    pub standardize: bool,
    /// Include dataset entries marked `large`.
    #[serde(default)]
    pub include_large: bool,
    /// Measure wall-clock runtime per cell. Turn off to make result files
    /// byte-reproducible across runs (runtimes are written as zero).
    #[serde(default = "default_true")]
    pub record_runtime: bool,
}

impl BenchmarkConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    fn otp_config(&self) -> OtpConfig<f64> {
        OtpConfig {
            epsilon: self.epsilon,
            alpha: self.alpha,
            sinkhorn_tol: self.sinkhorn_tol,
            sinkhorn_max_iter: self.sinkhorn_max_iter,
        }
    }
}

/// One scored benchmark cell.
#[derive(Debug, Clone, Serialize)]
pub struct CellResult {
    pub dataset: String,
    pub fraction: f64,
    pub seed: u64,
    pub algorithm: Algorithm,
    pub acc: f64,
    pub nmi: f64,
    pub ari: f64,
    pub runtime_s: f64,
    /// Propagation sweeps (or baseline iterations).
    pub iterations: usize,
    /// Sweeps that ran with a relaxed threshold.
    pub relaxations: usize,
    /// Chosen kernel bandwidth (baseline only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    /// Inner-solver health: no unconverged transport solves, or the baseline
    /// iteration reached its tolerance.
    pub solver_converged: bool,
}

/// A cell that failed; the run continues without it.
#[derive(Debug, Clone, Serialize)]
pub struct CellFailure {
    pub dataset: String,
    pub fraction: f64,
    pub seed: u64,
    pub algorithm: Algorithm,
    pub message: String,
}

/// Per-(dataset, fraction, algorithm) aggregate over seeds.
#[derive(Debug, Clone, Serialize)]
pub struct GroupAggregate {
    pub dataset: String,
    pub fraction: f64,
    pub algorithm: Algorithm,
    pub cells: usize,
    pub acc_mean: f64,
    pub acc_std: f64,
    pub nmi_mean: f64,
    pub nmi_std: f64,
    pub ari_mean: f64,
    pub ari_std: f64,
    pub runtime_mean_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
}

/// Rendered per-iteration trace of one propagation cell.
#[derive(Debug, Clone)]
pub struct TraceArtifact {
    pub dataset: String,
    pub fraction: f64,
    pub seed: u64,
    pub csv: String,
}

/// Everything a benchmark run produces.
#[derive(Debug, Clone)]
pub struct BenchmarkResults {
    pub cells: Vec<CellResult>,
    pub aggregates: Vec<GroupAggregate>,
    /// Per metric, per algorithm: sum over (dataset, fraction) groups of
    /// `mean / best_mean`.
    pub scores: BTreeMap<String, BTreeMap<String, f64>>,
    pub failures: Vec<CellFailure>,
    pub traces: Vec<TraceArtifact>,
}

struct ScoredRun {
    acc: f64,
    nmi: f64,
    ari: f64,
    runtime_s: f64,
    iterations: usize,
    relaxations: usize,
    solver_converged: bool,
    trace_csv: Option<String>,
}

fn run_otp_cell(
    dataset: &Dataset,
    fraction: f64,
    seed: u64,
    config: &BenchmarkConfig,
) -> Result<ScoredRun> {
    let mask = make_split(dataset, fraction, seed)?;
    let x_l = gather_rows(dataset.features.view(), &mask.labeled);
    let y_l: Vec<usize> = mask.labeled.iter().map(|&i| dataset.labels[i]).collect();
    let x_u = gather_rows(dataset.features.view(), &mask.unlabeled);
    let truth: Vec<usize> = mask.unlabeled.iter().map(|&i| dataset.labels[i]).collect();

    let start = Instant::now();
    let outcome = propagate(
        x_l.view(),
        &y_l,
        x_u.view(),
        dataset.num_classes(),
        &config.otp_config(),
    )?;
    let runtime_s = if config.record_runtime {
        start.elapsed().as_secs_f64()
    } else {
        0.0
    };

    let relaxations = outcome
        .trace
        .iterations
        .iter()
        .filter(|r| r.relaxed)
        .count();
    Ok(ScoredRun {
        acc: accuracy(&truth, &outcome.labels)?,
        nmi: nmi(&truth, &outcome.labels)?,
        ari: ari(&truth, &outcome.labels)?,
        runtime_s,
        iterations: outcome.trace.iterations.len(),
        relaxations,
        solver_converged: outcome.trace.sinkhorn_failures == 0,
        trace_csv: Some(outcome.trace.to_csv()),
    })
}

fn run_lp_cell(
    dataset: &Dataset,
    fraction: f64,
    seed: u64,
    sigma: f64,
    config: &BenchmarkConfig,
) -> Result<ScoredRun> {
    let mask = make_split(dataset, fraction, seed)?;
    // Labeled points first, then unlabeled, as the propagation iteration
    // clamps by position.
    let order: Vec<usize> = mask
        .labeled
        .iter()
        .chain(mask.unlabeled.iter())
        .copied()
        .collect();
    let points = gather_rows(dataset.features.view(), &order);
    let y_l: Vec<usize> = mask.labeled.iter().map(|&i| dataset.labels[i]).collect();
    let truth: Vec<usize> = mask.unlabeled.iter().map(|&i| dataset.labels[i]).collect();

    let start = Instant::now();
    let affinity = gaussian_affinity(points.view(), sigma)?;
    let outcome = lp_propagate(
        &affinity,
        &y_l,
        dataset.num_classes(),
        config.lp_tol,
        config.lp_max_iter,
    )?;
    let runtime_s = if config.record_runtime {
        start.elapsed().as_secs_f64()
    } else {
        0.0
    };

    Ok(ScoredRun {
        acc: accuracy(&truth, &outcome.labels)?,
        nmi: nmi(&truth, &outcome.labels)?,
        ari: ari(&truth, &outcome.labels)?,
        runtime_s,
        iterations: outcome.iterations,
        relaxations: 0,
        solver_converged: outcome.converged,
        trace_csv: None,
    })
}

/// Run every (dataset, fraction, seed, algorithm) cell, aggregate, and score.
/// Cell failures are recorded and the run continues.
pub fn run_benchmark(config: &BenchmarkConfig) -> Result<BenchmarkResults> {
    for &fraction in &config.fractions {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "fraction {fraction} outside (0, 1]"
            )));
        }
    }

    let load_options = LoadOptions {
        standardize: config.standardize,
        ..LoadOptions::default()
    };
    let mut datasets: BTreeMap<String, Dataset> = BTreeMap::new();
    for spec in &config.datasets {
        if spec.large && !config.include_large {
            continue;
        }
        let mut ds = load_csv(Path::new(&spec.path), &spec.label_column, &load_options)?;
        if let Some(name) = &spec.name {
            ds.name = name.clone();
        }
        if datasets.contains_key(&ds.name) {
            return Err(Error::InvalidArgument(format!(
                "duplicate dataset name `{}`",
                ds.name
            )));
        }
        datasets.insert(ds.name.clone(), ds);
    }

    let mut cells = Vec::new();
    let mut failures = Vec::new();
    let mut traces = Vec::new();

    for (name, dataset) in &datasets {
        for &fraction in &config.fractions {
            for &algorithm in &config.algorithms {
                match algorithm {
                    Algorithm::Otp => {
                        for &seed in &config.seeds {
                            match run_otp_cell(dataset, fraction, seed, config) {
                                Ok(run) => {
                                    if let Some(csv) = run.trace_csv {
                                        traces.push(TraceArtifact {
                                            dataset: name.clone(),
                                            fraction,
                                            seed,
                                            csv,
                                        });
                                    }
                                    cells.push(CellResult {
                                        dataset: name.clone(),
                                        fraction,
                                        seed,
                                        algorithm,
                                        acc: run.acc,
                                        nmi: run.nmi,
                                        ari: run.ari,
                                        runtime_s: run.runtime_s,
                                        iterations: run.iterations,
                                        relaxations: run.relaxations,
                                        sigma: None,
                                        solver_converged: run.solver_converged,
                                    });
                                }
                                Err(e) => failures.push(CellFailure {
                                    dataset: name.clone(),
                                    fraction,
                                    seed,
                                    algorithm,
                                    message: e.to_string(),
                                }),
                            }
                        }
                    }
                    Algorithm::Lp => {
                        // Bandwidth grid search: keep the sigma with the best
                        // mean accuracy over seeds (first in grid order wins
                        // ties).
                        let mut best: Option<(f64, f64, Vec<(u64, ScoredRun)>)> = None;
                        let mut first_error: Option<String> = None;
                        for &sigma in &config.sigma_grid {
                            let mut runs = Vec::new();
                            let mut failed = false;
                            for &seed in &config.seeds {
                                match run_lp_cell(dataset, fraction, seed, sigma, config) {
                                    Ok(run) => runs.push((seed, run)),
                                    Err(e) => {
                                        first_error.get_or_insert_with(|| e.to_string());
                                        failed = true;
                                        break;
                                    }
                                }
                            }
                            if failed || runs.is_empty() {
                                continue;
                            }
                            let mean_acc =
                                runs.iter().map(|(_, r)| r.acc).sum::<f64>() / runs.len() as f64;
                            let better = match &best {
                                Some((best_acc, _, _)) => mean_acc > *best_acc,
                                None => true,
                            };
                            if better {
                                best = Some((mean_acc, sigma, runs));
                            }
                        }
                        match best {
                            Some((_, sigma, runs)) => {
                                for (seed, run) in runs {
                                    cells.push(CellResult {
                                        dataset: name.clone(),
                                        fraction,
                                        seed,
                                        algorithm,
                                        acc: run.acc,
                                        nmi: run.nmi,
                                        ari: run.ari,
                                        runtime_s: run.runtime_s,
                                        iterations: run.iterations,
                                        relaxations: 0,
                                        sigma: Some(sigma),
                                        solver_converged: run.solver_converged,
                                    });
                                }
                            }
                            None => {
                                let message = first_error
                                    .unwrap_or_else(|| "empty sigma grid".to_string());
                                for &seed in &config.seeds {
                                    failures.push(CellFailure {
                                        dataset: name.clone(),
                                        fraction,
                                        seed,
                                        algorithm,
                                        message: message.clone(),
                                    });
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    cells.sort_by(|a, b| format_key(a).cmp(&format_key(b)));
    traces.sort_by(|a, b| {
        a.dataset
            .cmp(&b.dataset)
            .then(a.fraction.total_cmp(&b.fraction))
            .then(a.seed.cmp(&b.seed))
    });

    let aggregates = aggregate(&cells);
    let scores = compute_scores(&aggregates);
    Ok(BenchmarkResults {
        cells,
        aggregates,
        scores,
        failures,
        traces,
    })
}

fn format_key(cell: &CellResult) -> (String, u64, u64, &'static str) {
    (
        cell.dataset.clone(),
        cell.fraction.to_bits(),
        cell.seed,
        cell.algorithm.name(),
    )
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn aggregate(cells: &[CellResult]) -> Vec<GroupAggregate> {
    let mut groups: BTreeMap<(String, u64, &'static str), Vec<&CellResult>> = BTreeMap::new();
    for cell in cells {
        groups
            .entry((
                cell.dataset.clone(),
                cell.fraction.to_bits(),
                cell.algorithm.name(),
            ))
            .or_default()
            .push(cell);
    }
    groups
        .into_values()
        .map(|group| {
            let acc: Vec<f64> = group.iter().map(|c| c.acc).collect();
            let nmi: Vec<f64> = group.iter().map(|c| c.nmi).collect();
            let ari: Vec<f64> = group.iter().map(|c| c.ari).collect();
            let runtime: Vec<f64> = group.iter().map(|c| c.runtime_s).collect();
            let (acc_mean, acc_std) = mean_std(&acc);
            let (nmi_mean, nmi_std) = mean_std(&nmi);
            let (ari_mean, ari_std) = mean_std(&ari);
            GroupAggregate {
                dataset: group[0].dataset.clone(),
                fraction: group[0].fraction,
                algorithm: group[0].algorithm,
                cells: group.len(),
                acc_mean,
                acc_std,
                nmi_mean,
                nmi_std,
                ari_mean,
                ari_std,
                runtime_mean_s: mean_std(&runtime).0,
                sigma: group[0].sigma,
            }
        })
        .collect()
}

fn compute_scores(aggregates: &[GroupAggregate]) -> BTreeMap<String, BTreeMap<String, f64>> {
    // Only groups every algorithm completed can be ranked against each other.
    let algorithms: Vec<&'static str> = {
        let mut names: Vec<&'static str> =
            aggregates.iter().map(|a| a.algorithm.name()).collect();
        names.sort_unstable();
        names.dedup();
        names
    };
    if algorithms.is_empty() {
        return BTreeMap::new();
    }
    let mut group_keys: Vec<(String, u64)> = aggregates
        .iter()
        .map(|a| (a.dataset.clone(), a.fraction.to_bits()))
        .collect();
    group_keys.sort();
    group_keys.dedup();

    let lookup: BTreeMap<(String, u64, &'static str), &GroupAggregate> = aggregates
        .iter()
        .map(|a| {
            (
                (a.dataset.clone(), a.fraction.to_bits(), a.algorithm.name()),
                a,
            )
        })
        .collect();
    let complete: Vec<&(String, u64)> = group_keys
        .iter()
        .filter(|(ds, fr)| {
            algorithms
                .iter()
                .all(|alg| lookup.contains_key(&(ds.clone(), *fr, alg)))
        })
        .collect();
    if complete.is_empty() {
        return BTreeMap::new();
    }

    let mut scores = BTreeMap::new();
    for (metric, extract) in [
        ("acc", (|a: &GroupAggregate| a.acc_mean) as fn(&GroupAggregate) -> f64),
        ("nmi", |a: &GroupAggregate| a.nmi_mean),
        ("ari", |a: &GroupAggregate| a.ari_mean),
    ] {
        let mut perf: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for alg in &algorithms {
            let values: Vec<f64> = complete
                .iter()
                .map(|(ds, fr)| extract(lookup[&(ds.clone(), *fr, *alg)]))
                .collect();
            perf.insert(alg.to_string(), values);
        }
        if let Ok(metric_scores) = score_measure(&perf) {
            scores.insert(metric.to_string(), metric_scores);
        }
    }
    scores
}

/// Write the per-cell table:
/// `dataset,fraction,seed,algorithm,acc,nmi,ari,runtime_s`.
pub fn write_results_csv<W: Write>(results: &BenchmarkResults, mut out: W) -> Result<()> {
    writeln!(out, "dataset,fraction,seed,algorithm,acc,nmi,ari,runtime_s")?;
    for c in &results.cells {
        writeln!(
            out,
            "{},{},{},{},{:.6},{:.6},{:.6},{:.6}",
            c.dataset,
            c.fraction,
            c.seed,
            c.algorithm.name(),
            c.acc,
            c.nmi,
            c.ari,
            c.runtime_s
        )?;
    }
    Ok(())
}

#[derive(Serialize)]
struct JsonReport<'a> {
    cells: &'a [CellResult],
    aggregates: &'a [GroupAggregate],
    scores: &'a BTreeMap<String, BTreeMap<String, f64>>,
    failures: &'a [CellFailure],
}

/// Write the JSON mirror: cells plus the aggregate block (means, stds,
/// scores) and any failures.
pub fn write_results_json<W: Write>(results: &BenchmarkResults, out: W) -> Result<()> {
    serde_json::to_writer_pretty(
        out,
        &JsonReport {
            cells: &results.cells,
            aggregates: &results.aggregates,
            scores: &results.scores,
            failures: &results.failures,
        },
    )?;
    Ok(())
}

/// Write `results.csv`, `results.json`, and one trace CSV per propagation
/// cell into `out_dir` (created if missing).
pub fn emit_results(results: &BenchmarkResults, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    let mut csv_file = std::fs::File::create(out_dir.join("results.csv"))?;
    write_results_csv(results, &mut csv_file)?;
    let mut json_file = std::fs::File::create(out_dir.join("results.json"))?;
    write_results_json(results, &mut json_file)?;
    for trace in &results.traces {
        let name = format!(
            "trace_{}_f{}_s{}.csv",
            trace.dataset, trace.fraction, trace.seed
        );
        std::fs::write(out_dir.join(name), &trace.csv)?;
    }
    Ok(())
}
