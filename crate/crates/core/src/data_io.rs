//! Reading and writing CSV datasets, normalization, the train/test and
//! odd/even splits, and a synthetic generator with known relevant features.

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::domain::{Dataset, FeatureStats, Normalization, SplitAB};
use crate::error::{Error, Result};
use crate::rng::seeded_rng;

/// Which CSV column holds the label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelColumn {
    /// Header name. A name that matches no header but parses as an integer
    /// is used as a 0-based index.
    Name(String),
    Index(usize),
}

impl LabelColumn {
    fn resolve(&self, headers: &[String]) -> Result<usize> {
        match self {
            LabelColumn::Index(i) if *i < headers.len() => Ok(*i),
            LabelColumn::Index(i) => Err(Error::InvalidArgument(format!(
                "label column index {i} out of range for {} columns",
                headers.len()
            ))),
            LabelColumn::Name(name) => match headers.iter().position(|h| h == name) {
                Some(i) => Ok(i),
                None => match name.parse::<usize>() {
                    Ok(i) => LabelColumn::Index(i).resolve(headers),
                    Err(_) => Err(Error::InvalidArgument(format!("no column named '{name}'"))),
                },
            },
        }
    }
}

impl From<&str> for LabelColumn {
    fn from(s: &str) -> Self {
        LabelColumn::Name(s.to_string())
    }
}

/// A parsed CSV file: feature columns in file order plus optional labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub feature_names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub labels: Option<Vec<f64>>,
    pub label_name: Option<String>,
}

impl Table {
    pub fn into_dataset(self) -> Result<Dataset> {
        let labels = self
            .labels
            .ok_or_else(|| Error::InvalidArgument("data has no label column".into()))?;
        Dataset::from_rows(self.rows, labels)?.with_feature_names(self.feature_names)
    }
}

fn parse_label(cell: &str, line: u64, column: &str) -> Result<f64> {
    match cell.trim().parse::<f64>() {
        Ok(v) if v == 0.0 || v == 1.0 => Ok(v),
        _ => Err(Error::Parse {
            line,
            column: column.to_string(),
            message: format!("label '{cell}' is not 0 or 1"),
        }),
    }
}

/// Reads a headed CSV file. With `label` set, that column is parsed as
/// 0/1 labels and excluded from the features.
pub fn read_table(path: &Path, label: Option<&LabelColumn>) -> Result<Table> {
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_table_from(file, label)
}

pub fn read_table_from<R: std::io::Read>(reader: R, label: Option<&LabelColumn>) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let label_idx = label.map(|l| l.resolve(&headers)).transpose()?;
    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != label_idx)
        .map(|(_, h)| h.clone())
        .collect();

    let mut rows = Vec::new();
    let mut labels = label_idx.map(|_| Vec::new());
    for record in rdr.records() {
        let record = record.map_err(|e| match e.kind() {
            csv::ErrorKind::UnequalLengths {
                pos,
                expected_len,
                len,
            } => Error::Parse {
                line: pos.as_ref().map_or(0, csv::Position::line),
                column: String::new(),
                message: format!("ragged row: {len} fields, expected {expected_len}"),
            },
            _ => Error::Csv(e),
        })?;
        let line = record.position().map_or(0, csv::Position::line);
        let mut row = Vec::with_capacity(feature_names.len());
        for (i, cell) in record.iter().enumerate() {
            if Some(i) == label_idx {
                let y = parse_label(cell, line, &headers[i])?;
                labels.as_mut().expect("label column resolved").push(y);
                continue;
            }
            let v: f64 = cell.trim().parse().map_err(|_| Error::Parse {
                line,
                column: headers[i].clone(),
                message: format!("'{cell}' is not a number"),
            })?;
            row.push(v);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Empty("no examples"));
    }
    Ok(Table {
        feature_names,
        rows,
        labels,
        label_name: label_idx.map(|i| headers[i].clone()),
    })
}

/// Loads a labeled dataset; every other column becomes a feature.
pub fn load_csv(path: &Path, label: &LabelColumn) -> Result<Dataset> {
    read_table(path, Some(label))?.into_dataset()
}

/// Writes `data` with a header; features first, label last. Floats use the
/// shortest representation that parses back to the same value.
pub fn write_csv<W: Write>(data: &Dataset, label_name: &str, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let names: Vec<String> = match data.feature_names() {
        Some(n) => n.to_vec(),
        None => (0..data.n_features()).map(|j| format!("x{j}")).collect(),
    };
    w.write_record(
        names
            .iter()
            .map(String::as_str)
            .chain(std::iter::once(label_name)),
    )?;
    for (row, y) in data.rows().zip(data.targets()) {
        w.write_record(row.iter().chain(std::iter::once(y)).map(|v| v.to_string()))?;
    }
    w.flush().map_err(|source| Error::Io {
        path: "<csv output>".into(),
        source,
    })?;
    Ok(())
}

/// Z-scores every feature with the sample mean and the `n - 1` standard
/// deviation of `train`. Zero-variance features become 0 and are listed by
/// [`Normalization::zero_variance_features`].
pub fn normalize(train: &Dataset) -> (Dataset, Normalization) {
    let n = train.n_examples();
    let m = train.n_features();
    let mut stats = Vec::with_capacity(m);
    for j in 0..m {
        let mean = train.rows().map(|r| r[j]).sum::<f64>() / n as f64;
        let std = if n < 2 {
            0.0
        } else {
            (train.rows().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        stats.push(FeatureStats { mean, std });
    }
    let norm = Normalization::new(stats).expect("stats of finite data are finite");
    let data = norm.apply(train).expect("dimensions match");
    (data, norm)
}

/// 1-based odd positions go to subset A, even positions to B.
pub fn split_odd_even(train: &Dataset) -> Result<SplitAB> {
    let n = train.n_examples();
    if n < 2 {
        return Err(Error::InvalidSplit(format!(
            "odd/even split needs at least 2 examples, found {n}"
        )));
    }
    SplitAB::from_indices(
        train,
        (0..n).step_by(2).collect(),
        (1..n).step_by(2).collect(),
    )
}

#[derive(Debug, Clone)]
pub struct TrainTest {
    pub train: Dataset,
    pub test: Dataset,
    /// Source rows of each side, ascending.
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
}

/// Uniform random partition; the test side gets `round(n * test_fraction)`
/// examples. Both sides keep the source order.
pub fn split_train_test<R: Rng + ?Sized>(
    d: &Dataset,
    test_fraction: f64,
    rng: &mut R,
) -> Result<TrainTest> {
    let n = d.n_examples();
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidSplit(format!(
            "test fraction {test_fraction} not in (0, 1)"
        )));
    }
    let n_test = (n as f64 * test_fraction).round() as usize;
    if n_test == 0 || n_test >= n {
        return Err(Error::InvalidSplit(format!(
            "test fraction {test_fraction} of {n} examples leaves an empty side"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut test_indices = order[..n_test].to_vec();
    let mut train_indices = order[n_test..].to_vec();
    test_indices.sort_unstable();
    train_indices.sort_unstable();
    Ok(TrainTest {
        train: d.subset(&train_indices),
        test: d.subset(&test_indices),
        train_indices,
        test_indices,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub n: usize,
    pub m: usize,
    pub relevant: Vec<usize>,
    pub noise_sigma: f64,
    /// Fraction of positive labels; 0.5 thresholds at the median.
    pub prevalence: f64,
    pub seed: u64,
}

impl SynthParams {
    pub fn new(n: usize, m: usize, relevant: Vec<usize>, noise_sigma: f64, seed: u64) -> Self {
        SynthParams {
            n,
            m,
            relevant,
            noise_sigma,
            prevalence: 0.5,
            seed,
        }
    }
}

/// Generative ground truth of a synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthTruth {
    pub params: SynthParams,
    /// Coefficient of each relevant feature, same order as `params.relevant`.
    pub coefficients: Vec<f64>,
    /// Scores strictly above this are labeled 1.
    pub threshold: f64,
}

#[derive(Debug, Clone)]
pub struct Synthetic {
    pub data: Dataset,
    pub truth: SynthTruth,
}

/// Every feature is i.i.d. N(0, 1). The score of an example is
/// `sum_k a_k x_k + noise_sigma * e`, summed over the relevant features,
/// with `|a_k|` uniform in `[0.5, 1.5]`, a random sign and `e ~ N(0, 1)`.
/// The label is 1 when the score exceeds the `1 - prevalence` quantile of
/// all scores (the median by default).
pub fn synth_dataset(params: &SynthParams) -> Result<Synthetic> {
    let SynthParams {
        n,
        m,
        ref relevant,
        noise_sigma,
        prevalence,
        seed,
    } = *params;
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 examples, got {n}"
        )));
    }
    if let Some(j) = relevant.iter().find(|&&j| j >= m) {
        return Err(Error::InvalidArgument(format!(
            "relevant feature {j} out of range for {m} features"
        )));
    }
    let mut seen = vec![false; m];
    for &j in relevant {
        if std::mem::replace(&mut seen[j], true) {
            return Err(Error::InvalidArgument(format!(
                "relevant feature {j} listed twice"
            )));
        }
    }
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(Error::InvalidArgument(
            "noise sigma must be non-negative".into(),
        ));
    }
    if !(prevalence > 0.0 && prevalence < 1.0) {
        return Err(Error::InvalidArgument(
            "prevalence must lie in (0, 1)".into(),
        ));
    }

    let mut rng = seeded_rng(seed);
    let coefficients: Vec<f64> = relevant
        .iter()
        .map(|_| {
            let magnitude = rng.random_range(0.5..=1.5);
            if rng.random::<bool>() {
                magnitude
            } else {
                -magnitude
            }
        })
        .collect();
    let mut rows = Vec::with_capacity(n);
    let mut scores = Vec::with_capacity(n);
    for _ in 0..n {
        let row: Vec<f64> = (0..m).map(|_| StandardNormal.sample(&mut rng)).collect();
        let noise: f64 = StandardNormal.sample(&mut rng);
        let signal: f64 = relevant
            .iter()
            .zip(&coefficients)
            .map(|(&j, a)| a * row[j])
            .sum();
        scores.push(signal + noise_sigma * noise);
        rows.push(row);
    }
    let mut sorted = scores.clone();
    sorted.sort_by(f64::total_cmp);
    let below = ((n as f64 * (1.0 - prevalence)).round() as usize).clamp(1, n - 1);
    let threshold = 0.5 * (sorted[below - 1] + sorted[below]);
    let targets = scores.iter().map(|&s| f64::from(s > threshold)).collect();

    let names = (0..m).map(|j| format!("x{j}")).collect();
    let data = Dataset::from_rows(rows, targets)?.with_feature_names(names)?;
    Ok(Synthetic {
        data,
        truth: SynthTruth {
            params: params.clone(),
            coefficients,
            threshold,
        },
    })
}
