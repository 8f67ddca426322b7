//! Growing a cascade one neuron at a time.
//!
//! Every feature first gets a one-input neuron; the best of them fixes the
//! anchor feature and the starting criterion `C_0`. Candidates then walk
//! the ranked feature list: a candidate at layer `r` reads all previous
//! neuron outputs, the anchor and the feature at position `h`, and is kept
//! only if its criterion is strictly below the current one. A rejected
//! candidate advances `h`; an accepted one adds a layer and, unless
//! `advance_on_accept` is set, retries the same feature one layer deeper.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cascade::{error_rate, used_features};
use crate::data_io::{normalize, split_odd_even};
use crate::domain::{
    CascadeModel, Dataset, FitnessRecord, InputSource, NeuronSpec, Normalization, SplitAB,
    TrainConfig,
};
use crate::error::{Error, Result};
use crate::fitting::{fit_design, fit_neuron, DesignMatrix};
use crate::rng::{derive_seed, seeded_rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceptedLayer {
    pub layer: usize,
    /// 1-based position in the ranked feature list.
    pub position: usize,
    pub feature: usize,
    pub criterion: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectedCandidate {
    pub layer: usize,
    pub position: usize,
    pub feature: usize,
    pub criterion: f64,
    /// Criterion the candidate had to beat.
    pub best: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    FeatureListExhausted,
    MaxLayersReached,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolveTrace {
    /// One-input fits, ascending by criterion.
    pub ranked_features: Vec<FitnessRecord>,
    pub accepted: Vec<AcceptedLayer>,
    pub rejected: Vec<RejectedCandidate>,
    pub stop_reason: StopReason,
    /// No candidate beat `C_0`; the model is the anchor neuron alone.
    pub degenerate: bool,
}

impl EvolveTrace {
    /// The best one-input neuron as a model of its own.
    pub fn anchor_model(&self, normalization: Normalization) -> Result<CascadeModel> {
        let head = self
            .ranked_features
            .first()
            .ok_or(Error::InvalidModel("trace has no ranked features".into()))?;
        let neuron = NeuronSpec {
            layer: 1,
            inputs: vec![InputSource::Feature(head.feature)],
            weights: head.weights.clone(),
        };
        CascadeModel::new(vec![neuron], head.feature, vec![head.score], normalization)
    }
}

/// Fits a bias-plus-one-feature neuron for every feature and sorts the
/// results by criterion, lower feature index first on ties. A feature
/// whose fit fails ranks last with an infinite score.
pub fn rank_features<R: Rng + ?Sized>(
    split: &SplitAB,
    config: &TrainConfig,
    rng: &mut R,
) -> Result<Vec<FitnessRecord>> {
    let m = split.n_features();
    if m < crate::domain::MIN_FEATURES {
        return Err(Error::InvalidArgument(format!(
            "at least two features required (found {m})"
        )));
    }
    let mut records: Vec<FitnessRecord> = (0..m)
        .map(
            |j| match fit_neuron(split, &[InputSource::Feature(j)], &[], &[], config, rng) {
                Ok(fit) => FitnessRecord {
                    feature: j,
                    score: fit.criterion,
                    weights: fit.weights,
                },
                Err(_) => FitnessRecord {
                    feature: j,
                    score: f64::INFINITY,
                    weights: Vec::new(),
                },
            },
        )
        .collect();
    records.sort_by(|a, b| a.score.total_cmp(&b.score).then(a.feature.cmp(&b.feature)));
    Ok(records)
}

/// Wiring of a layer-`layer` candidate:
/// `[z_{r-1}, .., z_1, x_anchor, x_candidate]`.
pub fn build_candidate(
    layer: usize,
    anchor: usize,
    candidate_feature: usize,
    prior_layer_count: usize,
) -> Result<Vec<InputSource>> {
    if candidate_feature == anchor {
        return Err(Error::InvalidWiring(format!(
            "candidate feature {candidate_feature} equals the anchor"
        )));
    }
    if layer == 0 || prior_layer_count != layer - 1 {
        return Err(Error::InvalidWiring(format!(
            "layer {layer} needs {} prior neurons, found {prior_layer_count}",
            layer.saturating_sub(1)
        )));
    }
    let mut wiring: Vec<InputSource> = (1..layer).rev().map(InputSource::Neuron).collect();
    wiring.push(InputSource::Feature(anchor));
    wiring.push(InputSource::Feature(candidate_feature));
    Ok(wiring)
}

/// Grows one cascade on `split`.
pub fn evolve<R: Rng + ?Sized>(
    split: &SplitAB,
    config: &TrainConfig,
    rng: &mut R,
) -> Result<(CascadeModel, EvolveTrace)> {
    config.validate()?;
    let m = split.n_features();
    let ranked = rank_features(split, config, rng)?;
    let anchor = ranked[0].feature;
    let c0 = ranked[0].score;
    if !c0.is_finite() {
        return Err(Error::InvalidArgument(
            "no single-input neuron could be fitted".into(),
        ));
    }

    let (set_a, set_b) = (split.set_a(), split.set_b());
    let mut neurons: Vec<NeuronSpec> = Vec::new();
    let mut history = vec![c0];
    let mut prior_a: Vec<Vec<f64>> = Vec::new();
    let mut prior_b: Vec<Vec<f64>> = Vec::new();
    let mut accepted = Vec::new();
    let mut rejected = Vec::new();
    let mut position = 2;

    let stop_reason = loop {
        if neurons.len() >= config.max_layers {
            break StopReason::MaxLayersReached;
        }
        let layer = neurons.len() + 1;
        let feature = ranked[position - 1].feature;
        let best = *history.last().expect("history starts with C0");
        let wiring = build_candidate(layer, anchor, feature, neurons.len())?;
        let design_a = DesignMatrix::assemble(set_a, &wiring, &prior_a)?;
        let design_b = DesignMatrix::assemble(set_b, &wiring, &prior_b)?;
        let fit = fit_design(
            &design_a,
            set_a.targets(),
            &design_b,
            set_b.targets(),
            config,
            rng,
        )?;

        if fit.criterion < best {
            prior_a.push(design_a.outputs(&fit.weights));
            prior_b.push(design_b.outputs(&fit.weights));
            accepted.push(AcceptedLayer {
                layer,
                position,
                feature,
                criterion: fit.criterion,
            });
            history.push(fit.criterion);
            neurons.push(NeuronSpec {
                layer,
                inputs: wiring,
                weights: fit.weights,
            });
            if !config.advance_on_accept {
                continue;
            }
        } else {
            rejected.push(RejectedCandidate {
                layer,
                position,
                feature,
                criterion: fit.criterion,
                best,
            });
        }
        if position < m {
            position += 1;
        } else {
            break StopReason::FeatureListExhausted;
        }
    };

    let degenerate = neurons.is_empty();
    let trace = EvolveTrace {
        ranked_features: ranked,
        accepted,
        rejected,
        stop_reason,
        degenerate,
    };
    let identity = Normalization::identity(m);
    let model = if degenerate {
        trace.anchor_model(identity)?
    } else {
        CascadeModel::new(neurons, anchor, history, identity)?
    };
    Ok((model, trace))
}

/// Outcome of one member run of [`multi_run`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run_index: usize,
    pub seed: u64,
    pub model_size: usize,
    pub train_error_pct: Option<f64>,
    pub test_error_pct: Option<f64>,
    pub selected_features: Vec<usize>,
    /// Set when the run failed; such runs never become the best model.
    pub failure: Option<String>,
}

#[derive(Debug, Clone)]
pub struct MultiRunOutcome {
    /// Lowest training error, then fewest neurons, then lowest run index.
    pub best: CascadeModel,
    pub best_run: usize,
    pub best_trace: EvolveTrace,
    pub summaries: Vec<RunSummary>,
}

/// Restarts training `runs` times from different random initial weights
/// and keeps the model with the lowest training error.
///
/// `train` is z-scored with its own statistics and split by odd/even
/// position; the returned models carry those statistics so they accept raw
/// inputs. Runs execute in parallel, each on its own derived seed.
pub fn multi_run(
    train: &Dataset,
    test: Option<&Dataset>,
    config: &TrainConfig,
    runs: usize,
) -> Result<MultiRunOutcome> {
    config.validate()?;
    if runs == 0 {
        return Err(Error::InvalidArgument("runs must be at least 1".into()));
    }
    if let Some(t) = test {
        if t.n_features() != train.n_features() {
            return Err(Error::DimensionMismatch {
                expected: train.n_features(),
                found: t.n_features(),
            });
        }
    }
    let (normalized, stats) = normalize(train);
    let split = split_odd_even(&normalized)?;
    let threshold = config.classification_threshold;

    let results: Vec<(RunSummary, Option<(CascadeModel, EvolveTrace)>)> = (0..runs)
        .into_par_iter()
        .map(|run_index| {
            let seed = derive_seed(config.seed, run_index as u64);
            let attempt = (|| -> Result<_> {
                let (model, trace) = evolve(&split, config, &mut seeded_rng(seed))?;
                let model = model.with_normalization(stats.clone())?;
                let train_err = error_rate(&model, train, threshold)?;
                let test_err = test.map(|t| error_rate(&model, t, threshold)).transpose()?;
                Ok((model, trace, train_err, test_err))
            })();
            match attempt {
                Ok((model, trace, train_err, test_err)) => (
                    RunSummary {
                        run_index,
                        seed,
                        model_size: model.len(),
                        train_error_pct: Some(train_err),
                        test_error_pct: test_err,
                        selected_features: used_features(&model),
                        failure: None,
                    },
                    Some((model, trace)),
                ),
                Err(e) => (
                    RunSummary {
                        run_index,
                        seed,
                        model_size: 0,
                        train_error_pct: None,
                        test_error_pct: None,
                        selected_features: Vec::new(),
                        failure: Some(e.to_string()),
                    },
                    None,
                ),
            }
        })
        .collect();

    let best_run = results
        .iter()
        .filter(|(s, m)| m.is_some() && s.train_error_pct.is_some())
        .min_by(|(a, _), (b, _)| {
            a.train_error_pct
                .unwrap()
                .total_cmp(&b.train_error_pct.unwrap())
                .then(a.model_size.cmp(&b.model_size))
                .then(a.run_index.cmp(&b.run_index))
        })
        .map(|(s, _)| s.run_index);
    let Some(best_run) = best_run else {
        let reason = results[0].0.failure.clone().unwrap_or_default();
        return Err(Error::InvalidArgument(format!(
            "every run failed; first failure: {reason}"
        )));
    };

    let mut summaries = Vec::with_capacity(runs);
    let mut best = None;
    for (summary, outcome) in results {
        if summary.run_index == best_run {
            best = outcome;
        }
        summaries.push(summary);
    }
    let (best, best_trace) = best.expect("best run produced a model");
    Ok(MultiRunOutcome {
        best,
        best_run,
        best_trace,
        summaries,
    })
}
