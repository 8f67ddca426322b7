//! Forward evaluation of a trained cascade.
//!
//! Inputs are raw feature vectors; the model's stored normalization is
//! applied before the first neuron sees them.

use crate::domain::{CascadeModel, Dataset, InputSource};
use crate::error::{Error, Result};
use crate::fitting::neuron_output;

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    /// `z_1 .. z_R` in layer order.
    pub neuron_outputs: Vec<f64>,
    /// Output of the last neuron.
    pub output: f64,
}

pub fn forward(model: &CascadeModel, example: &[f64]) -> Result<ForwardOutput> {
    let normalized = model.normalization().apply_row(example)?;
    forward_normalized(model, &normalized)
}

/// Like [`forward`] but for an example that is already normalized.
pub fn forward_normalized(model: &CascadeModel, example: &[f64]) -> Result<ForwardOutput> {
    if example.len() != model.n_features() {
        return Err(Error::DimensionMismatch {
            expected: model.n_features(),
            found: example.len(),
        });
    }
    if model.is_empty() {
        return Err(Error::InvalidModel("model has no neurons".into()));
    }
    let mut outputs: Vec<f64> = Vec::with_capacity(model.len());
    let mut inputs = Vec::new();
    for neuron in model.neurons() {
        inputs.clear();
        inputs.extend(neuron.inputs.iter().map(|src| match *src {
            InputSource::Feature(j) => example[j],
            InputSource::Neuron(l) => outputs[l - 1],
        }));
        outputs.push(neuron_output(&inputs, &neuron.weights)?);
    }
    let output = *outputs.last().expect("model is non-empty");
    Ok(ForwardOutput {
        neuron_outputs: outputs,
        output,
    })
}

/// Class 1 when the output reaches `threshold`.
pub fn classify(model: &CascadeModel, example: &[f64], threshold: f64) -> Result<u8> {
    Ok(label_for(forward(model, example)?.output, threshold))
}

#[inline]
pub fn label_for(output: f64, threshold: f64) -> u8 {
    u8::from(output >= threshold)
}

/// Feature columns read by any neuron, in order of first use.
pub fn used_features(model: &CascadeModel) -> Vec<usize> {
    let mut seen = Vec::new();
    for neuron in model.neurons() {
        for src in &neuron.inputs {
            if let InputSource::Feature(j) = *src {
                if !seen.contains(&j) {
                    seen.push(j);
                }
            }
        }
    }
    seen
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Confusion {
    pub true_positive: usize,
    pub false_positive: usize,
    pub true_negative: usize,
    pub false_negative: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.true_positive + self.false_positive + self.true_negative + self.false_negative
    }

    pub fn misclassified(&self) -> usize {
        self.false_positive + self.false_negative
    }

    pub fn error_rate(&self) -> f64 {
        100.0 * self.misclassified() as f64 / self.total() as f64
    }

    pub fn accuracy(&self) -> f64 {
        100.0 - self.error_rate()
    }
}

pub fn confusion(model: &CascadeModel, data: &Dataset, threshold: f64) -> Result<Confusion> {
    if data.n_examples() == 0 {
        return Err(Error::Empty("dataset has no examples"));
    }
    let mut c = Confusion::default();
    for (row, &y) in data.rows().zip(data.targets()) {
        let predicted = classify(model, row, threshold)?;
        match (predicted, y == 1.0) {
            (1, true) => c.true_positive += 1,
            (1, false) => c.false_positive += 1,
            (_, false) => c.true_negative += 1,
            (_, true) => c.false_negative += 1,
        }
    }
    Ok(c)
}

/// Percentage of misclassified examples.
pub fn error_rate(model: &CascadeModel, data: &Dataset, threshold: f64) -> Result<f64> {
    Ok(confusion(model, data, threshold)?.error_rate())
}

pub fn accuracy(model: &CascadeModel, data: &Dataset, threshold: f64) -> Result<f64> {
    Ok(confusion(model, data, threshold)?.accuracy())
}
