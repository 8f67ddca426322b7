//! Value types shared by every stage of training and inference.
//!
//! Everything here is validated at construction and immutable afterwards,
//! so a `Dataset` or `CascadeModel` that exists is known to satisfy its
//! invariants.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The first candidate neuron needs an anchor plus one distinct feature.
pub const MIN_FEATURES: usize = 2;

/// A single broken dataset invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    LengthMismatch {
        rows: usize,
        targets: usize,
    },
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },
    NonBinaryTarget {
        row: usize,
        value: f64,
    },
    NonFiniteFeature {
        row: usize,
        column: usize,
    },
    TooFewFeatures {
        found: usize,
    },
    NameCount {
        expected: usize,
        found: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::LengthMismatch { rows, targets } => {
                write!(f, "{rows} feature rows but {targets} targets")
            }
            Violation::RaggedRow {
                row,
                expected,
                found,
            } => {
                write!(f, "row {row} has {found} features, expected {expected}")
            }
            Violation::NonBinaryTarget { row, value } => {
                write!(f, "non-binary target at row {row} (value {value})")
            }
            Violation::NonFiniteFeature { row, column } => {
                write!(f, "non-finite feature value at row {row}, column {column}")
            }
            Violation::TooFewFeatures { found } => {
                write!(f, "at least two features required (found {found})")
            }
            Violation::NameCount { expected, found } => {
                write!(f, "{found} feature names for {expected} features")
            }
        }
    }
}

/// Checks every dataset invariant on raw parts and itemizes what is wrong.
pub fn validate_dataset(
    rows: &[Vec<f64>],
    targets: &[f64],
) -> std::result::Result<(), Vec<Violation>> {
    let mut violations = Vec::new();
    if rows.len() != targets.len() {
        violations.push(Violation::LengthMismatch {
            rows: rows.len(),
            targets: targets.len(),
        });
    }
    let m = rows.first().map_or(0, Vec::len);
    if m < MIN_FEATURES {
        violations.push(Violation::TooFewFeatures { found: m });
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != m {
            violations.push(Violation::RaggedRow {
                row: i,
                expected: m,
                found: row.len(),
            });
        }
        if let Some(j) = row.iter().position(|v| !v.is_finite()) {
            violations.push(Violation::NonFiniteFeature { row: i, column: j });
        }
    }
    for (i, &y) in targets.iter().enumerate() {
        if y != 0.0 && y != 1.0 {
            violations.push(Violation::NonBinaryTarget { row: i, value: y });
        }
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

/// `n` examples by `m` features with binary targets, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n_features: usize,
    features: Vec<f64>,
    targets: Vec<f64>,
    feature_names: Option<Vec<String>>,
}

impl Dataset {
    pub fn from_rows(rows: Vec<Vec<f64>>, targets: Vec<f64>) -> Result<Self> {
        validate_dataset(&rows, &targets).map_err(Error::InvalidDataset)?;
        let n_features = rows.first().map_or(0, Vec::len);
        Ok(Dataset {
            n_features,
            features: rows.into_iter().flatten().collect(),
            targets,
            feature_names: None,
        })
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.n_features {
            return Err(Error::InvalidDataset(vec![Violation::NameCount {
                expected: self.n_features,
                found: names.len(),
            }]));
        }
        self.feature_names = Some(names);
        Ok(self)
    }

    pub fn n_examples(&self) -> usize {
        self.targets.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.features.chunks_exact(self.n_features)
    }

    pub fn value(&self, row: usize, column: usize) -> f64 {
        self.features[row * self.n_features + column]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn target(&self, i: usize) -> f64 {
        self.targets[i]
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    pub fn positives(&self) -> usize {
        self.targets.iter().filter(|&&y| y == 1.0).count()
    }

    /// Examples at `indices`, in the order given. Indices must be in range.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(indices.len() * self.n_features);
        let mut targets = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.row(i));
            targets.push(self.targets[i]);
        }
        Dataset {
            n_features: self.n_features,
            features,
            targets,
            feature_names: self.feature_names.clone(),
        }
    }

    /// Same targets and names, features replaced element-wise.
    pub(crate) fn map_features(&self, mut f: impl FnMut(usize, f64) -> f64) -> Dataset {
        let m = self.n_features;
        let features = self
            .features
            .iter()
            .enumerate()
            .map(|(k, &v)| f(k % m, v))
            .collect();
        Dataset {
            n_features: m,
            features,
            targets: self.targets.clone(),
            feature_names: self.feature_names.clone(),
        }
    }
}

/// Fitting subset A and validation subset B drawn from one source dataset.
#[derive(Debug, Clone)]
pub struct SplitAB {
    set_a: Dataset,
    set_b: Dataset,
    indices_a: Vec<usize>,
    indices_b: Vec<usize>,
}

impl SplitAB {
    pub fn from_indices(
        source: &Dataset,
        indices_a: Vec<usize>,
        indices_b: Vec<usize>,
    ) -> Result<Self> {
        if indices_a.is_empty() || indices_b.is_empty() {
            return Err(Error::InvalidSplit(
                "both subsets need at least one example".into(),
            ));
        }
        let n = source.n_examples();
        let mut seen = vec![false; n];
        for &i in indices_a.iter().chain(&indices_b) {
            if i >= n {
                return Err(Error::InvalidSplit(format!(
                    "index {i} out of range for {n} examples"
                )));
            }
            if seen[i] {
                return Err(Error::InvalidSplit(format!("example {i} used twice")));
            }
            seen[i] = true;
        }
        Ok(SplitAB {
            set_a: source.subset(&indices_a),
            set_b: source.subset(&indices_b),
            indices_a,
            indices_b,
        })
    }

    pub fn set_a(&self) -> &Dataset {
        &self.set_a
    }

    pub fn set_b(&self) -> &Dataset {
        &self.set_b
    }

    pub fn indices_a(&self) -> &[usize] {
        &self.indices_a
    }

    pub fn indices_b(&self) -> &[usize] {
        &self.indices_b
    }

    pub fn n_features(&self) -> usize {
        self.set_a.n_features()
    }
}

/// Where one input of a neuron comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputSource {
    /// Output of the neuron at this (1-based) layer.
    Neuron(usize),
    /// Feature column (0-based).
    Feature(usize),
}

/// One neuron of the cascade. `weights[0]` is the bias; `weights[k]` pairs
/// with `inputs[k - 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuronSpec {
    pub layer: usize,
    pub inputs: Vec<InputSource>,
    pub weights: Vec<f64>,
}

impl NeuronSpec {
    fn check(&self, anchor: usize, n_features: usize, single_input: bool) -> Result<()> {
        let r = self.layer;
        let bad = |msg: String| Err(Error::InvalidModel(format!("neuron at layer {r}: {msg}")));
        if r == 0 {
            return bad("layers are numbered from 1".into());
        }
        if self.weights.len() != self.inputs.len() + 1 {
            return bad(format!(
                "{} weights for {} inputs",
                self.weights.len(),
                self.inputs.len()
            ));
        }
        if let Some(w) = self.weights.iter().find(|w| !w.is_finite()) {
            return bad(format!("non-finite weight {w}"));
        }
        if single_input {
            return if self.inputs == [InputSource::Feature(anchor)] {
                Ok(())
            } else {
                bad("single-input neuron must read the anchor feature".into())
            };
        }
        if self.inputs.len() != r + 1 {
            return bad(format!(
                "expected {} inputs, found {}",
                r + 1,
                self.inputs.len()
            ));
        }
        for (k, src) in self.inputs[..r - 1].iter().enumerate() {
            if *src != InputSource::Neuron(r - 1 - k) {
                return bad(format!(
                    "input {k} should be the output of layer {}",
                    r - 1 - k
                ));
            }
        }
        if self.inputs[r - 1] != InputSource::Feature(anchor) {
            return bad(format!(
                "input {} should be the anchor feature {anchor}",
                r - 1
            ));
        }
        match self.inputs[r] {
            InputSource::Feature(j) if j == anchor => {
                bad("candidate feature equals the anchor".into())
            }
            InputSource::Feature(j) if j >= n_features => bad(format!(
                "feature {j} out of range for {n_features} features"
            )),
            InputSource::Feature(_) => Ok(()),
            InputSource::Neuron(_) => bad("last input must be a feature".into()),
        }
    }

    /// Feature column wired as the candidate input, if any.
    pub fn candidate_feature(&self) -> Option<usize> {
        match self.inputs.last() {
            Some(InputSource::Feature(j)) if self.inputs.len() > 1 => Some(*j),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub mean: f64,
    pub std: f64,
}

/// Per-feature z-score transform. Zero-variance features map to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Normalization {
    stats: Vec<FeatureStats>,
}

impl Normalization {
    pub fn new(stats: Vec<FeatureStats>) -> Result<Self> {
        if let Some((j, s)) = stats
            .iter()
            .enumerate()
            .find(|(_, s)| !s.mean.is_finite() || !s.std.is_finite() || s.std < 0.0)
        {
            return Err(Error::InvalidModel(format!(
                "feature {j}: invalid normalization stats (mean {}, std {})",
                s.mean, s.std
            )));
        }
        Ok(Normalization { stats })
    }

    /// Mean 0, std 1 for every feature: applying it changes nothing.
    pub fn identity(n_features: usize) -> Self {
        Normalization {
            stats: vec![
                FeatureStats {
                    mean: 0.0,
                    std: 1.0
                };
                n_features
            ],
        }
    }

    pub fn stats(&self) -> &[FeatureStats] {
        &self.stats
    }

    pub fn n_features(&self) -> usize {
        self.stats.len()
    }

    pub fn zero_variance_features(&self) -> Vec<usize> {
        self.stats
            .iter()
            .enumerate()
            .filter(|(_, s)| s.std == 0.0)
            .map(|(j, _)| j)
            .collect()
    }

    #[inline]
    pub fn apply_value(&self, column: usize, value: f64) -> f64 {
        let s = self.stats[column];
        if s.std == 0.0 {
            0.0
        } else {
            (value - s.mean) / s.std
        }
    }

    pub fn apply_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.stats.len() {
            return Err(Error::DimensionMismatch {
                expected: self.stats.len(),
                found: row.len(),
            });
        }
        Ok(row
            .iter()
            .enumerate()
            .map(|(j, &v)| self.apply_value(j, v))
            .collect())
    }

    pub fn apply(&self, data: &Dataset) -> Result<Dataset> {
        if data.n_features() != self.stats.len() {
            return Err(Error::DimensionMismatch {
                expected: self.stats.len(),
                found: data.n_features(),
            });
        }
        Ok(data.map_features(|j, v| self.apply_value(j, v)))
    }
}

/// A trained cascade: neurons in layer order, the last one being the output.
///
/// A model whose only neuron reads just the anchor feature is *degenerate*:
/// it is what training returns when no candidate ever beat the best
/// single-input neuron.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModel")]
pub struct CascadeModel {
    neurons: Vec<NeuronSpec>,
    anchor_feature: usize,
    criterion_history: Vec<f64>,
    normalization: Normalization,
}

#[derive(Deserialize)]
struct RawModel {
    neurons: Vec<NeuronSpec>,
    anchor_feature: usize,
    criterion_history: Vec<f64>,
    normalization: Normalization,
}

impl TryFrom<RawModel> for CascadeModel {
    type Error = Error;

    fn try_from(raw: RawModel) -> Result<Self> {
        CascadeModel::new(
            raw.neurons,
            raw.anchor_feature,
            raw.criterion_history,
            Normalization::new(raw.normalization.stats)?,
        )
    }
}

impl CascadeModel {
    /// Validates and builds a model. Neurons may arrive in any order; they
    /// are stored sorted by layer.
    pub fn new(
        mut neurons: Vec<NeuronSpec>,
        anchor_feature: usize,
        criterion_history: Vec<f64>,
        normalization: Normalization,
    ) -> Result<Self> {
        let m = normalization.n_features();
        if m < MIN_FEATURES {
            return Err(Error::InvalidModel(format!(
                "at least two features required (found {m})"
            )));
        }
        if anchor_feature >= m {
            return Err(Error::InvalidModel(format!(
                "anchor feature {anchor_feature} out of range for {m} features"
            )));
        }
        if neurons.is_empty() {
            return Err(Error::InvalidModel("model has no neurons".into()));
        }
        neurons.sort_by_key(|n| n.layer);
        let single_input = neurons.len() == 1 && neurons[0].inputs.len() == 1;
        for (k, neuron) in neurons.iter().enumerate() {
            if neuron.layer != k + 1 {
                return Err(Error::InvalidModel(format!(
                    "layers must be 1..={}, found layer {} at position {}",
                    neurons.len(),
                    neuron.layer,
                    k + 1
                )));
            }
            neuron.check(anchor_feature, m, single_input)?;
        }
        let expected_history = if single_input { 1 } else { neurons.len() + 1 };
        if criterion_history.len() != expected_history {
            return Err(Error::InvalidModel(format!(
                "criterion history has {} entries, expected {expected_history}",
                criterion_history.len()
            )));
        }
        if criterion_history.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::InvalidModel(
                "criterion values must be finite and non-negative".into(),
            ));
        }
        if let Some(r) = criterion_history.windows(2).position(|w| w[1] >= w[0]) {
            return Err(Error::InvalidModel(format!(
                "criterion must strictly decrease: C{} = {} is not below C{} = {}",
                r + 1,
                criterion_history[r + 1],
                r,
                criterion_history[r]
            )));
        }
        Ok(CascadeModel {
            neurons,
            anchor_feature,
            criterion_history,
            normalization,
        })
    }

    pub fn neurons(&self) -> &[NeuronSpec] {
        &self.neurons
    }

    pub fn len(&self) -> usize {
        self.neurons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neurons.is_empty()
    }

    pub fn anchor_feature(&self) -> usize {
        self.anchor_feature
    }

    pub fn criterion_history(&self) -> &[f64] {
        &self.criterion_history
    }

    pub fn normalization(&self) -> &Normalization {
        &self.normalization
    }

    pub fn n_features(&self) -> usize {
        self.normalization.n_features()
    }

    pub fn is_degenerate(&self) -> bool {
        self.neurons.len() == 1 && self.neurons[0].inputs.len() == 1
    }

    /// Criterion of the output neuron.
    pub fn criterion(&self) -> f64 {
        *self.criterion_history.last().expect("history is non-empty")
    }

    pub fn with_normalization(mut self, normalization: Normalization) -> Result<Self> {
        if normalization.n_features() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                found: normalization.n_features(),
            });
        }
        self.normalization = normalization;
        Ok(self)
    }
}

/// Hyperparameters of training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Learning rate of the projection rule.
    pub chi: f64,
    /// Fitting stops once the validation error drops by less than this.
    pub delta: f64,
    pub max_fit_steps: usize,
    pub max_layers: usize,
    pub seed: u64,
    /// Standard deviation of the Gaussian initial weights.
    pub init_sigma: f64,
    pub classification_threshold: f64,
    /// Move to the next ranked feature after an accepted neuron instead of
    /// retrying the same one at the next layer.
    pub advance_on_accept: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            chi: 1.9,
            delta: 0.0015,
            max_fit_steps: 100,
            max_layers: 50,
            seed: 0,
            init_sigma: 1.0,
            classification_threshold: 0.5,
            advance_on_accept: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.into()));
        if !(self.chi > 0.0 && self.chi.is_finite()) {
            return bad("chi must be positive");
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return bad("delta must be positive");
        }
        if self.max_fit_steps == 0 {
            return bad("max_fit_steps must be at least 1");
        }
        if self.max_layers == 0 {
            return bad("max_layers must be at least 1");
        }
        if !(self.init_sigma > 0.0 && self.init_sigma.is_finite()) {
            return bad("init_sigma must be positive");
        }
        if !(self.classification_threshold > 0.0 && self.classification_threshold < 1.0) {
            return bad("classification_threshold must lie in (0, 1)");
        }
        Ok(())
    }
}

/// Criterion of the single-input neuron reading one feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitnessRecord {
    pub feature: usize,
    pub score: f64,
    /// Fitted weights (bias, feature). Empty when the fit failed.
    pub weights: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_valid_dataset() {
        let rows = vec![vec![0.0, 1.0, 2.0]; 4];
        assert_eq!(validate_dataset(&rows, &[0.0, 1.0, 1.0, 0.0]), Ok(()));
        let d = Dataset::from_rows(rows, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        assert_eq!((d.n_examples(), d.n_features()), (4, 3));
        assert_eq!(d.positives(), 2);
    }

    #[test]
    fn non_binary_target_reported_with_row() {
        let rows = vec![vec![0.0, 1.0]; 3];
        let v = validate_dataset(&rows, &[0.0, 2.0, 1.0]).unwrap_err();
        assert_eq!(v, vec![Violation::NonBinaryTarget { row: 1, value: 2.0 }]);
        assert!(v[0].to_string().starts_with("non-binary target at row 1"));
    }

    #[test]
    fn single_feature_rejected() {
        let v = validate_dataset(&[vec![1.0], vec![2.0]], &[0.0, 1.0]).unwrap_err();
        assert!(v[0].to_string().contains("at least two features required"));
    }

    #[test]
    fn itemizes_every_violation() {
        let rows = vec![vec![f64::NAN, 1.0], vec![1.0]];
        let v = validate_dataset(&rows, &[0.5]).unwrap_err();
        assert!(v.contains(&Violation::LengthMismatch {
            rows: 2,
            targets: 1
        }));
        assert!(v.contains(&Violation::NonFiniteFeature { row: 0, column: 0 }));
        assert!(v.contains(&Violation::RaggedRow {
            row: 1,
            expected: 2,
            found: 1
        }));
        assert!(v.contains(&Violation::NonBinaryTarget { row: 0, value: 0.5 }));
    }

    #[test]
    fn split_rejects_overlap_and_empty_sides() {
        let d = Dataset::from_rows(vec![vec![0.0, 0.0]; 4], vec![0.0; 4]).unwrap();
        assert!(SplitAB::from_indices(&d, vec![0, 1], vec![1, 2]).is_err());
        assert!(SplitAB::from_indices(&d, vec![], vec![1, 2]).is_err());
        assert!(SplitAB::from_indices(&d, vec![0], vec![9]).is_err());
        let s = SplitAB::from_indices(&d, vec![0, 2], vec![1, 3]).unwrap();
        assert_eq!(s.set_a().n_examples(), 2);
    }

    fn neuron(layer: usize, inputs: Vec<InputSource>) -> NeuronSpec {
        let weights = vec![0.0; inputs.len() + 1];
        NeuronSpec {
            layer,
            inputs,
            weights,
        }
    }

    #[test]
    fn model_requires_cascade_wiring() {
        use InputSource::*;
        let norm = || Normalization::identity(4);
        let n1 = neuron(1, vec![Feature(0), Feature(1)]);
        let n2 = neuron(2, vec![Neuron(1), Feature(0), Feature(2)]);
        assert!(
            CascadeModel::new(vec![n2.clone(), n1.clone()], 0, vec![3.0, 2.0, 1.0], norm()).is_ok()
        );

        // anchor missing from layer 2
        let bad2 = neuron(2, vec![Neuron(1), Feature(3), Feature(2)]);
        assert!(CascadeModel::new(vec![n1.clone(), bad2], 0, vec![3.0, 2.0, 1.0], norm()).is_err());
        // non-decreasing history
        assert!(
            CascadeModel::new(vec![n1.clone(), n2.clone()], 0, vec![3.0, 2.0, 2.0], norm())
                .is_err()
        );
        // candidate equals anchor
        let same = neuron(1, vec![Feature(0), Feature(0)]);
        assert!(CascadeModel::new(vec![same], 0, vec![2.0, 1.0], norm()).is_err());
        // gap in layers
        let n3 = neuron(3, vec![Neuron(2), Neuron(1), Feature(0), Feature(2)]);
        assert!(CascadeModel::new(vec![n1, n3], 0, vec![3.0, 2.0, 1.0], norm()).is_err());
    }

    #[test]
    fn degenerate_model_is_single_anchor_neuron() {
        let n = neuron(1, vec![InputSource::Feature(2)]);
        let m = CascadeModel::new(vec![n], 2, vec![4.0], Normalization::identity(3)).unwrap();
        assert!(m.is_degenerate());
        assert_eq!(m.criterion(), 4.0);
    }

    #[test]
    fn config_defaults_are_valid() {
        let c = TrainConfig::default();
        c.validate().unwrap();
        assert_eq!(
            (c.chi, c.delta, c.max_fit_steps, c.max_layers),
            (1.9, 0.0015, 100, 50)
        );
        let bad = TrainConfig { delta: 0.0, ..c };
        assert!(bad.validate().is_err());
    }
}
