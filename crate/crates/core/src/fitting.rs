//! Fitting one candidate neuron.
//!
//! Weights are updated on subset A by a normalized residual projection,
//! `w <- w - chi * U_A * eta_A / ||U_A||_F^2`, and monitored on subset B.
//! The validation error `e_B = ||eta_B||_2` of the final iterate is the
//! neuron's regularity criterion. Fitting stops at the first step `k >= 2`
//! where `e_B(k-1) - e_B(k) < delta`, or at `max_fit_steps`.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::domain::{Dataset, InputSource, SplitAB, TrainConfig};
use crate::error::{Error, Result};

/// Sigmoid outputs are clamped to `[EPS, 1 - EPS]`.
pub const SATURATION_EPS: f64 = 1e-12;

#[inline]
pub fn sigmoid(activation: f64) -> f64 {
    (1.0 / (1.0 + (-activation).exp())).clamp(SATURATION_EPS, 1.0 - SATURATION_EPS)
}

/// `len` independent draws from N(0, sigma^2).
pub fn init_weights<R: Rng + ?Sized>(len: usize, sigma: f64, rng: &mut R) -> Vec<f64> {
    if sigma == 0.0 {
        return vec![0.0; len];
    }
    let normal = Normal::new(0.0, sigma).expect("sigma is finite and non-negative");
    (0..len).map(|_| normal.sample(rng)).collect()
}

#[inline]
fn activate(inputs: &[f64], weights: &[f64]) -> f64 {
    let sum = inputs
        .iter()
        .zip(&weights[1..])
        .fold(weights[0], |acc, (u, w)| acc + u * w);
    sigmoid(sum)
}

/// Output of a sigmoid neuron; `weights[0]` is the bias.
pub fn neuron_output(inputs: &[f64], weights: &[f64]) -> Result<f64> {
    if weights.len() != inputs.len() + 1 {
        return Err(Error::DimensionMismatch {
            expected: inputs.len() + 1,
            found: weights.len(),
        });
    }
    Ok(activate(inputs, weights))
}

/// Per-example input vectors of one neuron over one subset, with a leading
/// bias entry of 1. Stored example-major, i.e. the transpose of the
/// `(p + 1) x n` matrix `U`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    width: usize,
    data: Vec<f64>,
}

impl DesignMatrix {
    /// `data` holds `width` values per example, bias first.
    pub fn new(width: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || !data.len().is_multiple_of(width) {
            return Err(Error::DimensionMismatch {
                expected: width,
                found: data.len(),
            });
        }
        Ok(DesignMatrix { width, data })
    }

    /// Builds the neuron inputs for every example of `subset`, reading
    /// earlier neuron outputs from `prior_outputs[layer - 1][example]`.
    pub fn assemble(
        subset: &Dataset,
        wiring: &[InputSource],
        prior_outputs: &[Vec<f64>],
    ) -> Result<Self> {
        let n = subset.n_examples();
        let m = subset.n_features();
        for src in wiring {
            match *src {
                InputSource::Feature(j) if j >= m => {
                    return Err(Error::InvalidWiring(format!(
                        "feature {j} out of range for {m} features"
                    )));
                }
                InputSource::Neuron(l) if l == 0 || l > prior_outputs.len() => {
                    return Err(Error::InvalidWiring(format!(
                        "layer {l} is not among the {} prior neurons",
                        prior_outputs.len()
                    )));
                }
                InputSource::Neuron(l) if prior_outputs[l - 1].len() != n => {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        found: prior_outputs[l - 1].len(),
                    });
                }
                _ => {}
            }
        }
        let width = wiring.len() + 1;
        let mut data = Vec::with_capacity(n * width);
        for (i, row) in subset.rows().enumerate() {
            data.push(1.0);
            for src in wiring {
                data.push(match *src {
                    InputSource::Feature(j) => row[j],
                    InputSource::Neuron(l) => prior_outputs[l - 1][i],
                });
            }
        }
        Ok(DesignMatrix { width, data })
    }

    /// Number of weights, including the bias.
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn n_examples(&self) -> usize {
        self.data.len() / self.width
    }

    pub fn example(&self, i: usize) -> &[f64] {
        &self.data[i * self.width..(i + 1) * self.width]
    }

    pub fn examples(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.width)
    }

    /// Squared Frobenius norm over all entries, bias included.
    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    /// Sigmoid output for every example.
    pub fn outputs(&self, weights: &[f64]) -> Vec<f64> {
        self.examples().map(|u| sigmoid(dot(u, weights))).collect()
    }

    /// `f(u_i, w) - y_i` for every example.
    pub fn residuals(&self, targets: &[f64], weights: &[f64]) -> Vec<f64> {
        self.examples()
            .zip(targets)
            .map(|(u, y)| sigmoid(dot(u, weights)) - y)
            .collect()
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Residuals `f(u_i, w) - y_i` of a wired neuron over `subset`.
pub fn error_vector(
    subset: &Dataset,
    wiring: &[InputSource],
    prior_outputs: &[Vec<f64>],
    weights: &[f64],
) -> Result<Vec<f64>> {
    if weights.len() != wiring.len() + 1 {
        return Err(Error::DimensionMismatch {
            expected: wiring.len() + 1,
            found: weights.len(),
        });
    }
    let design = DesignMatrix::assemble(subset, wiring, prior_outputs)?;
    Ok(design.residuals(subset.targets(), weights))
}

/// Euclidean norm of the validation residuals.
pub fn validation_error(residuals: &[f64]) -> Result<f64> {
    if residuals.is_empty() {
        return Err(Error::Empty("validation residuals are empty"));
    }
    Ok(norm(residuals))
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|e| e * e).sum::<f64>().sqrt()
}

/// One projection step: `w - chi * ||U||^-2 * U * eta`.
pub fn projection_update(
    weights: &[f64],
    inputs: &DesignMatrix,
    residuals: &[f64],
    chi: f64,
) -> Result<Vec<f64>> {
    if weights.len() != inputs.width() {
        return Err(Error::DimensionMismatch {
            expected: inputs.width(),
            found: weights.len(),
        });
    }
    if residuals.len() != inputs.n_examples() {
        return Err(Error::DimensionMismatch {
            expected: inputs.n_examples(),
            found: residuals.len(),
        });
    }
    let norm_sq = inputs.frobenius_sq();
    if norm_sq == 0.0 {
        return Err(Error::SingularInput);
    }
    Ok(project(weights, inputs, residuals, chi / norm_sq))
}

fn project(weights: &[f64], inputs: &DesignMatrix, residuals: &[f64], step: f64) -> Vec<f64> {
    let mut correction = vec![0.0; weights.len()];
    for (u, &eta) in inputs.examples().zip(residuals) {
        for (c, x) in correction.iter_mut().zip(u) {
            *c += x * eta;
        }
    }
    weights
        .iter()
        .zip(&correction)
        .map(|(w, c)| w - step * c)
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub weights: Vec<f64>,
    /// Validation error of `weights`, the neuron's regularity criterion.
    pub criterion: f64,
    pub steps_taken: usize,
    /// `e_B(k)` for `k = 1..=steps_taken`.
    pub eb_trace: Vec<f64>,
}

/// Fits a neuron wired by `wiring` on `split`. `prior_outputs_a/b` hold the
/// outputs of the already accepted neurons on each subset.
pub fn fit_neuron<R: Rng + ?Sized>(
    split: &SplitAB,
    wiring: &[InputSource],
    prior_outputs_a: &[Vec<f64>],
    prior_outputs_b: &[Vec<f64>],
    config: &TrainConfig,
    rng: &mut R,
) -> Result<FitResult> {
    let design_a = DesignMatrix::assemble(split.set_a(), wiring, prior_outputs_a)?;
    let design_b = DesignMatrix::assemble(split.set_b(), wiring, prior_outputs_b)?;
    fit_design(
        &design_a,
        split.set_a().targets(),
        &design_b,
        split.set_b().targets(),
        config,
        rng,
    )
}

/// [`fit_neuron`] on pre-assembled design matrices.
pub fn fit_design<R: Rng + ?Sized>(
    design_a: &DesignMatrix,
    targets_a: &[f64],
    design_b: &DesignMatrix,
    targets_b: &[f64],
    config: &TrainConfig,
    rng: &mut R,
) -> Result<FitResult> {
    if design_a.width() != design_b.width() {
        return Err(Error::DimensionMismatch {
            expected: design_a.width(),
            found: design_b.width(),
        });
    }
    if design_b.n_examples() == 0 {
        return Err(Error::Empty("validation subset is empty"));
    }
    let norm_sq = design_a.frobenius_sq();
    if norm_sq == 0.0 {
        return Err(Error::SingularInput);
    }
    let step = config.chi / norm_sq;

    let mut weights = init_weights(design_a.width(), config.init_sigma, rng);
    let mut previous: Vec<f64> = Vec::new();
    let mut trace = Vec::new();
    for k in 1..=config.max_fit_steps {
        let eta_b = design_b.residuals(targets_b, &weights);
        let eb = norm(&eta_b);
        trace.push(eb);
        let decrement = (k >= 2).then(|| trace[k - 2] - eb);
        if decrement.is_some_and(|d| d < config.delta) || k == config.max_fit_steps {
            // Got worse on B: the previous iterate is the better one.
            if decrement.is_some_and(|d| d < 0.0) {
                return Ok(FitResult {
                    weights: previous,
                    criterion: trace[k - 2],
                    steps_taken: k,
                    eb_trace: trace,
                });
            }
            return Ok(FitResult {
                weights,
                criterion: eb,
                steps_taken: k,
                eb_trace: trace,
            });
        }
        let eta_a = design_a.residuals(targets_a, &weights);
        let next = project(&weights, design_a, &eta_a, step);
        previous = std::mem::replace(&mut weights, next);
    }
    unreachable!("the loop returns at k == max_fit_steps")
}
