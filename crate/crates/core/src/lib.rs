//! Evolving cascade neural networks.
//!
//! A cascade is grown one sigmoid neuron per layer. Each neuron reads the
//! outputs of every earlier neuron, a fixed anchor feature and one more
//! candidate feature. A candidate is fitted on one half of the training data
//! and kept only if its error on the other half (the regularity criterion)
//! is strictly lower than that of the network so far, so the features that
//! end up in the model are the ones that improved held-out error.
//!
//! - [`domain`]: datasets, splits, neurons, models, configuration
//! - [`fitting`]: fitting a single neuron by the projection rule
//! - [`cascade`]: forward evaluation, classification, error rates
//! - [`evolve`]: feature ranking, growth loop, multi-run restarts
//! - [`data_io`]: CSV, normalization, splits, synthetic data

pub mod cascade;
pub mod data_io;
pub mod domain;
pub mod error;
pub mod evolve;
pub mod fitting;
pub mod rng;

pub use cascade::{classify, error_rate, forward, used_features, ForwardOutput};
pub use domain::{
    CascadeModel, Dataset, FitnessRecord, InputSource, NeuronSpec, Normalization, SplitAB,
    TrainConfig,
};
pub use error::{Error, Result};
pub use evolve::{evolve, multi_run, EvolveTrace, MultiRunOutcome, RunSummary, StopReason};
pub use fitting::{fit_neuron, FitResult};
