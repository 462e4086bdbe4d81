//! Experiment orchestration: metric, seeded Monte-Carlo trials, sweeps,
//! dataset files, and the bridge to an external denoiser.

pub mod container;
pub mod dataset;
pub mod denoiser;
pub mod experiment;
pub mod metrics;
pub mod pipeline;
pub mod seeds;

pub use container::{read_tensor, write_tensor, Tensor};
pub use dataset::{export_dataset, import_dataset, DatasetManifest, SamplePair};
pub use denoiser::{Denoiser, ExternalDenoiser, WeightsHeader};
pub use experiment::{
    run_sweep, Estimator, ExperimentConfig, SweepResults, SweepRow, SweepVariable,
};
pub use metrics::{nmse_db, NMSE_FLOOR_DB};
pub use pipeline::{run_trial, EstimationSetup, TrialOutput};
pub use seeds::{derive_seed, trial_rng, Purpose};
