//! Command-line front end: transductive labeling, out-of-sample induction,
//! the benchmark harness, and standalone metric evaluation.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use otprop::benchmark::{emit_results, run_benchmark, BenchmarkConfig};
use otprop::data::{gather_rows, load_csv, LoadOptions};
use otprop::induction::{default_kernel_scale, InductionModel};
use otprop::metrics::{accuracy, ari, nmi};
use otprop::propagation::{propagate, OtpConfig};
use otprop::split::make_split;

#[derive(Parser)]
#[command(
    name = "otprop",
    about = "Transductive label propagation via entropy-regularized optimal transport",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Label the unlabeled part of a dataset transductively.
    Transduce(TransduceArgs),
    /// Predict labels for new points with a saved induction model.
    Induct(InductArgs),
    /// Run the benchmark grid from a JSON config.
    Benchmark(BenchmarkArgs),
    /// Score a prediction file against a truth file (ACC/NMI/ARI).
    Metrics(MetricsArgs),
}

#[derive(Args)]
struct TransduceArgs {
    /// Dataset CSV with a header row.
    #[arg(long)]
    data: PathBuf,
    /// Name of the label column.
    #[arg(long = "label-col")]
    label_col: String,
    /// Fraction of points revealed as labeled (stratified).
    #[arg(long = "labeled-frac")]
    labeled_frac: f64,
    /// Split seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Relative regularization strength of the transport solver.
    #[arg(long, default_value_t = 0.005)]
    epsilon: f64,
    /// Certainty threshold for committing labels.
    #[arg(long, default_value_t = 0.02)]
    alpha: f64,
    /// Skip z-scoring the features.
    #[arg(long = "no-standardize")]
    no_standardize: bool,
    /// Output CSV: index,true,predicted,certainty,iteration.
    #[arg(long)]
    out: PathBuf,
    /// Also save the induction model built over the transduction.
    #[arg(long = "model-out")]
    model_out: Option<PathBuf>,
    /// Also save the per-iteration trace CSV.
    #[arg(long = "trace-out")]
    trace_out: Option<PathBuf>,
}

#[derive(Args)]
struct InductArgs {
    /// Model file written by `transduce --model-out`.
    #[arg(long)]
    model: PathBuf,
    /// CSV of feature rows (header row, all columns numeric).
    #[arg(long)]
    points: PathBuf,
    /// Output CSV: index,predicted.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchmarkArgs {
    /// JSON benchmark configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for results.csv, results.json, and trace CSVs.
    #[arg(long = "out-dir")]
    out_dir: PathBuf,
    /// Include dataset entries marked large in the config.
    #[arg(long)]
    large: bool,
}

#[derive(Args)]
struct MetricsArgs {
    /// CSV holding the ground-truth labels.
    #[arg(long)]
    truth: PathBuf,
    /// CSV holding the predicted labels.
    #[arg(long)]
    pred: PathBuf,
    /// Column to read from the truth file (default: first column).
    #[arg(long = "truth-col")]
    truth_col: Option<String>,
    /// Column to read from the prediction file (default: first column).
    #[arg(long = "pred-col")]
    pred_col: Option<String>,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Transduce(args) => transduce(args),
        Command::Induct(args) => induct(args),
        Command::Benchmark(args) => benchmark(args),
        Command::Metrics(args) => metrics(args),
    }
}

fn transduce(args: TransduceArgs) -> Result<()> {
    let options = LoadOptions {
        standardize: !args.no_standardize,
        ..LoadOptions::default()
    };
    let dataset = load_csv(&args.data, &args.label_col, &options)
        .with_context(|| format!("loading {}", args.data.display()))?;
    let mask = make_split(&dataset, args.labeled_frac, args.seed)?;
    let x_l = gather_rows(dataset.features.view(), &mask.labeled);
    let y_l: Vec<usize> = mask.labeled.iter().map(|&i| dataset.labels[i]).collect();
    let x_u = gather_rows(dataset.features.view(), &mask.unlabeled);

    let config = OtpConfig {
        epsilon: args.epsilon,
        alpha: args.alpha,
        ..OtpConfig::default()
    };
    let outcome = propagate(
        x_l.view(),
        &y_l,
        x_u.view(),
        dataset.num_classes(),
        &config,
    )?;

    // Per-point rows keyed by the original dataset index, ascending.
    let mut rows: Vec<(usize, usize, usize, f64, usize)> = outcome
        .trace
        .points
        .iter()
        .map(|p| {
            let orig = mask.unlabeled[p.index];
            (orig, dataset.labels[orig], p.class, p.certainty, p.iteration)
        })
        .collect();
    rows.sort_by_key(|r| r.0);

    let mut writer = csv::Writer::from_path(&args.out)
        .with_context(|| format!("writing {}", args.out.display()))?;
    writer.write_record(["index", "true", "predicted", "certainty", "iteration"])?;
    for (index, truth, predicted, certainty, iteration) in rows {
        writer.write_record([
            index.to_string(),
            dataset.class_names[truth].clone(),
            dataset.class_names[predicted].clone(),
            format!("{certainty:.6}"),
            iteration.to_string(),
        ])?;
    }
    writer.flush()?;

    if let Some(path) = &args.trace_out {
        std::fs::write(path, outcome.trace.to_csv())
            .with_context(|| format!("writing {}", path.display()))?;
    }

    if let Some(path) = &args.model_out {
        let kernel_scale = default_kernel_scale(args.epsilon, outcome.trace.final_cost_max);
        let mut model = InductionModel::from_transduction(
            x_l.view(),
            &y_l,
            x_u.view(),
            &outcome.labels,
            kernel_scale,
        )?;
        if let Some(scaling) = &dataset.scaling {
            model = model.with_scaling(scaling.clone())?;
        }
        let file = File::create(path).with_context(|| format!("writing {}", path.display()))?;
        model.write_csv(BufWriter::new(file))?;
    }

    eprintln!(
        "labeled {} points in {} iterations",
        mask.unlabeled.len(),
        outcome.trace.iterations.len()
    );
    Ok(())
}

fn induct(args: InductArgs) -> Result<()> {
    let file = File::open(&args.model).with_context(|| format!("opening {}", args.model.display()))?;
    let model = InductionModel::<f64>::read_csv(BufReader::new(file))?;

    let mut reader = csv::Reader::from_path(&args.points)
        .with_context(|| format!("opening {}", args.points.display()))?;
    let mut points: Vec<Vec<f64>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row: std::result::Result<Vec<f64>, _> =
            record.iter().map(|v| v.trim().parse::<f64>()).collect();
        let row = row.map_err(|e| anyhow::anyhow!("row {}: {e}", i + 1))?;
        if row.len() != model.dim() {
            bail!(
                "row {} has {} features, model expects {}",
                i + 1,
                row.len(),
                model.dim()
            );
        }
        points.push(row);
    }

    let mut writer = csv::Writer::from_path(&args.out)
        .with_context(|| format!("writing {}", args.out.display()))?;
    writer.write_record(["index", "predicted"])?;
    for (i, row) in points.iter().enumerate() {
        let point = ndarray::ArrayView1::from(&row[..]);
        let label = model.induce_label(point)?;
        writer.write_record([i.to_string(), label.to_string()])?;
    }
    writer.flush()?;
    Ok(())
}

fn benchmark(args: BenchmarkArgs) -> Result<()> {
    let mut config = BenchmarkConfig::from_json_file(&args.config)
        .with_context(|| format!("reading {}", args.config.display()))?;
    if args.large {
        config.include_large = true;
    }
    let results = run_benchmark(&config)?;
    emit_results(&results, &args.out_dir)?;
    eprintln!(
        "{} cells, {} failures -> {}",
        results.cells.len(),
        results.failures.len(),
        args.out_dir.display()
    );
    Ok(())
}

/// Read one label column as strings: the named column, or the first one.
fn read_label_column(path: &Path, column: Option<&str>) -> Result<Vec<String>> {
    let mut reader =
        csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let headers = reader.headers()?.clone();
    let idx = match column {
        Some(name) => headers
            .iter()
            .position(|h| h == name)
            .with_context(|| format!("column `{name}` not found in {}", path.display()))?,
        None => 0,
    };
    let mut labels = Vec::new();
    for record in reader.records() {
        let record = record?;
        labels.push(
            record
                .get(idx)
                .with_context(|| format!("short row in {}", path.display()))?
                .to_string(),
        );
    }
    Ok(labels)
}

fn metrics(args: MetricsArgs) -> Result<()> {
    let truth = read_label_column(&args.truth, args.truth_col.as_deref())?;
    let pred = read_label_column(&args.pred, args.pred_col.as_deref())?;
    if truth.len() != pred.len() {
        bail!(
            "{} truth labels but {} predictions",
            truth.len(),
            pred.len()
        );
    }
    // Shared dense id per label string, so equal strings compare equal
    // across the two files.
    let mut ids: std::collections::HashMap<String, usize> = std::collections::HashMap::new();
    let mut encode = |labels: &[String]| -> Vec<usize> {
        labels
            .iter()
            .map(|v| {
                let next = ids.len();
                *ids.entry(v.clone()).or_insert(next)
            })
            .collect()
    };
    let truth_ids = encode(&truth);
    let pred_ids = encode(&pred);

    let mut out = std::io::stdout().lock();
    writeln!(out, "acc={:.6}", accuracy(&truth_ids, &pred_ids)?)?;
    writeln!(out, "nmi={:.6}", nmi(&truth_ids, &pred_ids)?)?;
    writeln!(out, "ari={:.6}", ari(&truth_ids, &pred_ids)?)?;
    Ok(())
}
