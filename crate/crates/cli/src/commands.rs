//! Command-line surface: argument definitions and the five subcommands.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use ecnn::cascade::{confusion, forward, label_for};
use ecnn::data_io::{
    load_csv, read_table, split_train_test, synth_dataset, write_csv, LabelColumn, SynthParams,
};
use ecnn::rng::{derive_seed, seeded_rng};
use ecnn::{multi_run, used_features, Dataset, TrainConfig};

use crate::error::CliError;
use crate::model_file::ModelFile;
use crate::report::{read_summaries, render, write_summaries, ReportFormat};

/// Directory used for outputs whose path flag is omitted.
pub const OUTPUT_DIR_ENV: &str = "ECNN_OUTPUT_DIR";

/// Stream index reserved for the train/test split, away from run seeds.
const SPLIT_STREAM: u64 = u64::MAX;

#[derive(Debug, Parser)]
#[command(
    name = "ecnn",
    version,
    about = "Train and apply evolving cascade neural networks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train with restarts and keep the model with the lowest training error
    Train(TrainArgs),
    /// Write per-example outputs and labels
    Predict(PredictArgs),
    /// Report error rate, accuracy and confusion counts on labeled data
    Eval(EvalArgs),
    /// Generate a synthetic dataset with known relevant features
    Synth(SynthArgs),
    /// Histograms of model sizes and error rates from a run-summary file
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training data (CSV with header)
    #[arg(long)]
    pub data: PathBuf,
    /// Label column, by name or 0-based index
    #[arg(long)]
    pub label: String,
    /// Separate labeled test set
    #[arg(long, conflicts_with = "test_fraction")]
    pub test_data: Option<PathBuf>,
    /// Hold out this fraction of --data as a random test set
    #[arg(long)]
    pub test_fraction: Option<f64>,
    #[arg(long, default_value_t = 100)]
    pub runs: usize,
    #[arg(long, default_value_t = 1.9)]
    pub chi: f64,
    #[arg(long, default_value_t = 0.0015)]
    pub delta: f64,
    #[arg(long, default_value_t = 100)]
    pub max_fit_steps: usize,
    #[arg(long, default_value_t = 50)]
    pub max_layers: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1.0)]
    pub init_sigma: f64,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    /// After accepting a neuron, move on to the next ranked feature
    #[arg(long)]
    pub advance_on_accept: bool,
    /// Model file [default: $ECNN_OUTPUT_DIR/model.ecnn]
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Run-summary CSV [default: <out>.runs.csv]
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Label column to skip, if the data has one
    #[arg(long)]
    pub label: Option<String>,
    /// Defaults to the threshold stored in the model file
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Output CSV [default: standard output]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub label: Option<String>,
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub m: usize,
    /// Comma-separated 0-based indices of the features that drive the label
    #[arg(long, value_delimiter = ',')]
    pub relevant: Vec<usize>,
    #[arg(long, default_value_t = 0.5)]
    pub noise: f64,
    /// Fraction of positive labels
    #[arg(long, default_value_t = 0.5)]
    pub prevalence: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV [default: $ECNN_OUTPUT_DIR/synth.csv]; ground truth goes
    /// next to it as <out>.truth.json
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Text,
    Csv,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Run-summary CSV written by `train`
    #[arg(long)]
    pub summary: PathBuf,
    /// Error-rate bucket width in percentage points
    #[arg(long, default_value_t = 0.5)]
    pub bin: f64,
    #[arg(long, value_enum, default_value_t = FormatArg::Text)]
    pub format: FormatArg,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn default_output(name: &str) -> PathBuf {
    std::env::var_os(OUTPUT_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("."))
        .join(name)
}

fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_os_string();
    s.push(suffix);
    PathBuf::from(s)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn check_threshold(t: f64) -> Result<f64, CliError> {
    if t > 0.0 && t < 1.0 {
        Ok(t)
    } else {
        Err(CliError::Usage(format!("threshold {t} must lie in (0, 1)")))
    }
}

pub fn execute(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Train(a) => train(a, out, err),
        Command::Predict(a) => predict(a, out),
        Command::Eval(a) => eval(a, out),
        Command::Synth(a) => synth(a, out),
        Command::Report(a) => report(a, out),
    }
}

fn io_err(e: std::io::Error) -> CliError {
    CliError::Internal(e.to_string())
}

fn train(a: TrainArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let config = TrainConfig {
        chi: a.chi,
        delta: a.delta,
        max_fit_steps: a.max_fit_steps,
        max_layers: a.max_layers,
        seed: a.seed,
        init_sigma: a.init_sigma,
        classification_threshold: a.threshold,
        advance_on_accept: a.advance_on_accept,
    };
    config.validate()?;
    if a.runs == 0 {
        return Err(CliError::Usage("--runs must be at least 1".into()));
    }
    let label = LabelColumn::Name(a.label.clone());
    let data = load_csv(&a.data, &label)?;
    let (train, test): (Dataset, Option<Dataset>) = match (&a.test_data, a.test_fraction) {
        (Some(path), _) => (data, Some(load_csv(path, &label)?)),
        (None, Some(fraction)) => {
            let tt = split_train_test(
                &data,
                fraction,
                &mut seeded_rng(derive_seed(a.seed, SPLIT_STREAM)),
            )?;
            (tt.train, Some(tt.test))
        }
        (None, None) => (data, None),
    };

    let outcome = multi_run(&train, test.as_ref(), &config, a.runs)?;
    for j in outcome.best.normalization().zero_variance_features() {
        writeln!(
            err,
            "warning: feature {j} has zero variance in the training data; it is mapped to 0"
        )
        .map_err(io_err)?;
    }

    let model_path = a.out.unwrap_or_else(|| default_output("model.ecnn"));
    let summary_path = a
        .summary
        .unwrap_or_else(|| sidecar(&model_path, ".runs.csv"));
    let names = train.feature_names().map(<[String]>::to_vec);
    ModelFile::new(outcome.best.clone(), config, names.clone()).save(&model_path)?;
    let mut summary = Vec::new();
    write_summaries(&outcome.summaries, &mut summary)?;
    write_file(&summary_path, &summary)?;

    let best = &outcome.summaries[outcome.best_run];
    let features: Vec<String> = used_features(&outcome.best)
        .into_iter()
        .map(|j| match &names {
            Some(n) => format!("{} ({j})", n[j]),
            None => j.to_string(),
        })
        .collect();
    let failed = outcome
        .summaries
        .iter()
        .filter(|s| s.failure.is_some())
        .count();
    writeln!(out, "runs: {} ({} failed)", outcome.summaries.len(), failed).map_err(io_err)?;
    writeln!(out, "best run: {} (seed {})", best.run_index, best.seed).map_err(io_err)?;
    writeln!(
        out,
        "neurons: {}{}",
        outcome.best.len(),
        if outcome.best.is_degenerate() {
            " (anchor only)"
        } else {
            ""
        }
    )
    .map_err(io_err)?;
    writeln!(out, "selected features: {}", features.join(", ")).map_err(io_err)?;
    writeln!(
        out,
        "train error: {:.2}%",
        best.train_error_pct.unwrap_or(f64::NAN)
    )
    .map_err(io_err)?;
    if let Some(t) = best.test_error_pct {
        writeln!(out, "test error: {t:.2}%").map_err(io_err)?;
    }
    writeln!(out, "model: {}", model_path.display()).map_err(io_err)?;
    writeln!(out, "run summary: {}", summary_path.display()).map_err(io_err)?;
    Ok(())
}

fn check_features(model: &ModelFile, found: usize) -> Result<(), CliError> {
    let expected = model.model.n_features();
    if expected != found {
        return Err(CliError::Data(format!(
            "feature count mismatch: model expects {expected} features, data has {found}"
        )));
    }
    Ok(())
}

fn predict(a: PredictArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let model = ModelFile::load(&a.model)?;
    let threshold = check_threshold(a.threshold.unwrap_or(model.config.classification_threshold))?;
    let label = a.label.map(LabelColumn::Name);
    let table = read_table(&a.data, label.as_ref())?;
    check_features(&model, table.feature_names.len())?;

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["index", "output", "label"])?;
    for (i, row) in table.rows.iter().enumerate() {
        let z = forward(&model.model, row)?.output;
        w.write_record([
            i.to_string(),
            z.to_string(),
            label_for(z, threshold).to_string(),
        ])?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::Internal(e.to_string()))?;
    match a.out {
        Some(path) => write_file(&path, &bytes),
        None => out.write_all(&bytes).map_err(io_err),
    }
}

fn eval(a: EvalArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let model = ModelFile::load(&a.model)?;
    let threshold = check_threshold(a.threshold.unwrap_or(model.config.classification_threshold))?;
    let Some(label) = a.label else {
        return Err(CliError::Data("unlabeled data: eval needs --label".into()));
    };
    let data = load_csv(&a.data, &LabelColumn::Name(label))?;
    check_features(&model, data.n_features())?;
    let c = confusion(&model.model, &data, threshold)?;
    writeln!(out, "examples: {}", c.total()).map_err(io_err)?;
    writeln!(out, "misclassified: {}", c.misclassified()).map_err(io_err)?;
    writeln!(out, "error rate: {:.2}%", c.error_rate()).map_err(io_err)?;
    writeln!(out, "accuracy: {:.2}%", c.accuracy()).map_err(io_err)?;
    writeln!(
        out,
        "confusion: tp={} fp={} tn={} fn={}",
        c.true_positive, c.false_positive, c.true_negative, c.false_negative
    )
    .map_err(io_err)?;
    Ok(())
}

fn synth(a: SynthArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let params = SynthParams {
        n: a.n,
        m: a.m,
        relevant: a.relevant,
        noise_sigma: a.noise,
        prevalence: a.prevalence,
        seed: a.seed,
    };
    let s = synth_dataset(&params)?;
    let path = a.out.unwrap_or_else(|| default_output("synth.csv"));
    let mut bytes = Vec::new();
    write_csv(&s.data, "y", &mut bytes)?;
    write_file(&path, &bytes)?;
    let truth_path = sidecar(&path, ".truth.json");
    let mut truth =
        serde_json::to_string_pretty(&s.truth).map_err(|e| CliError::Internal(e.to_string()))?;
    truth.push('\n');
    write_file(&truth_path, truth.as_bytes())?;
    writeln!(
        out,
        "wrote {} examples x {} features ({} positive) to {}",
        s.data.n_examples(),
        s.data.n_features(),
        s.data.positives(),
        path.display()
    )
    .map_err(io_err)?;
    writeln!(out, "ground truth: {}", truth_path.display()).map_err(io_err)?;
    Ok(())
}

fn report(a: ReportArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if !(a.bin > 0.0 && a.bin.is_finite()) {
        return Err(CliError::Usage("--bin must be positive".into()));
    }
    let file = std::fs::File::open(&a.summary).map_err(|e| CliError::io(&a.summary, e))?;
    let summaries = read_summaries(file)?;
    let format = match a.format {
        FormatArg::Text => ReportFormat::Text,
        FormatArg::Csv => ReportFormat::Csv,
    };
    let text = render(&summaries, a.bin, format);
    match a.out {
        Some(path) => write_file(&path, text.as_bytes()),
        None => out.write_all(text.as_bytes()).map_err(io_err),
    }
}
