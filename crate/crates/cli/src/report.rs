//! Run-summary files and the histogram reports built from them.
//!
//! A summary file is CSV with one row per run:
//! `run,seed,size,train_error_pct,test_error_pct,selected_features,status`.
//! Feature lists are `;`-separated; missing error rates are empty cells;
//! `status` is `ok` or `failed: <reason>`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{Read, Write};

use ecnn::RunSummary;

use crate::error::CliError;

const HEADER: [&str; 7] = [
    "run",
    "seed",
    "size",
    "train_error_pct",
    "test_error_pct",
    "selected_features",
    "status",
];

pub fn write_summaries<W: Write>(summaries: &[RunSummary], out: W) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for s in summaries {
        let features = s
            .selected_features
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join(";");
        let status = match &s.failure {
            None => "ok".to_string(),
            Some(reason) => format!("failed: {reason}"),
        };
        w.write_record([
            s.run_index.to_string(),
            s.seed.to_string(),
            s.model_size.to_string(),
            opt(s.train_error_pct),
            opt(s.test_error_pct),
            features,
            status,
        ])?;
    }
    w.flush().map_err(|e| CliError::Internal(e.to_string()))
}

pub fn read_summaries<R: Read>(input: R) -> Result<Vec<RunSummary>, CliError> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers()?.clone();
    if headers.iter().ne(HEADER) {
        return Err(CliError::Data(format!(
            "malformed summary file: header must be {}",
            HEADER.join(",")
        )));
    }
    let mut out = Vec::new();
    for (k, record) in rdr.records().enumerate() {
        let record = record?;
        let row = k + 2;
        let bad =
            |what: &str| CliError::Data(format!("malformed summary file: line {row}: bad {what}"));
        let num = |i: usize, what: &str| -> Result<u64, CliError> {
            record[i].parse().map_err(|_| bad(what))
        };
        let pct = |i: usize, what: &str| -> Result<Option<f64>, CliError> {
            match &record[i] {
                "" => Ok(None),
                v => v.parse::<f64>().map(Some).map_err(|_| bad(what)),
            }
        };
        let selected_features = match &record[5] {
            "" => Vec::new(),
            list => list
                .split(';')
                .map(|f| f.parse().map_err(|_| bad("selected_features")))
                .collect::<Result<_, _>>()?,
        };
        let failure = match &record[6] {
            "ok" => None,
            s if s.starts_with("failed: ") => Some(s["failed: ".len()..].to_string()),
            _ => return Err(bad("status")),
        };
        out.push(RunSummary {
            run_index: num(0, "run")? as usize,
            seed: num(1, "seed")?,
            model_size: num(2, "size")? as usize,
            train_error_pct: pct(3, "train_error_pct")?,
            test_error_pct: pct(4, "test_error_pct")?,
            selected_features,
            failure,
        });
    }
    if out.is_empty() {
        return Err(CliError::Data("summary file has no runs".into()));
    }
    Ok(out)
}

/// Number of completed runs per model size.
pub fn size_histogram(summaries: &[RunSummary]) -> BTreeMap<usize, usize> {
    let mut h = BTreeMap::new();
    for s in summaries.iter().filter(|s| s.failure.is_none()) {
        *h.entry(s.model_size).or_insert(0) += 1;
    }
    h
}

/// Counts per bucket `[k * bin, (k + 1) * bin)`, keyed by `k`.
pub fn error_histogram(values: impl IntoIterator<Item = f64>, bin: f64) -> BTreeMap<i64, usize> {
    let mut h = BTreeMap::new();
    for v in values {
        *h.entry((v / bin).floor() as i64).or_insert(0) += 1;
    }
    h
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Csv,
}

pub fn render(summaries: &[RunSummary], bin: f64, format: ReportFormat) -> String {
    let sizes = size_histogram(summaries);
    let train = error_histogram(summaries.iter().filter_map(|s| s.train_error_pct), bin);
    let test = error_histogram(summaries.iter().filter_map(|s| s.test_error_pct), bin);
    let keys: std::collections::BTreeSet<i64> = train.keys().chain(test.keys()).copied().collect();
    let count = |h: &BTreeMap<i64, usize>, k: i64| h.get(&k).copied().unwrap_or(0);

    let mut out = String::new();
    match format {
        ReportFormat::Csv => {
            out.push_str("size,runs\n");
            for (size, n) in &sizes {
                let _ = writeln!(out, "{size},{n}");
            }
            out.push('\n');
            out.push_str("error_from_pct,error_to_pct,train_runs,test_runs\n");
            for &k in &keys {
                let _ = writeln!(
                    out,
                    "{:.2},{:.2},{},{}",
                    k as f64 * bin,
                    (k + 1) as f64 * bin,
                    count(&train, k),
                    count(&test, k)
                );
            }
        }
        ReportFormat::Text => {
            let completed = summaries.iter().filter(|s| s.failure.is_none()).count();
            let _ = writeln!(out, "runs: {} ({} completed)", summaries.len(), completed);
            out.push_str("\nmodel size histogram\n");
            out.push_str("  size  runs\n");
            for (size, n) in &sizes {
                let _ = writeln!(out, "  {size:>4}  {n:>4}  {}", "#".repeat(*n));
            }
            let _ = writeln!(out, "\nerror rate histogram (bin {bin}%)");
            out.push_str("  range %           train  test\n");
            for &k in &keys {
                let range = format!("[{:.2}, {:.2})", k as f64 * bin, (k + 1) as f64 * bin);
                let _ = writeln!(
                    out,
                    "  {range:<16}  {:>5}  {:>4}",
                    count(&train, k),
                    count(&test, k)
                );
            }
        }
    }
    out
}
