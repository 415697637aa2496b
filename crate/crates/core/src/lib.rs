//! Fishing-activity detection from Vessel Monitoring System pings.
//!
//! Pings are grouped into trips, turned into per-interval speed and turning
//! observations, and classified as Fishing or Steaming by a hidden Markov
//! model with K Gaussian components whose components are labelled after
//! fitting. Two baselines (a speed-threshold rule and an autoregressive
//! two-state HMM), accuracy scoring, a synthetic-fleet simulator and gridded
//! effort maps complete the pipeline.
//!
//! The numerical core is generic over [`Scalar`] (`f32`/`f64`); the aliases
//! below fix it to `f64`, which the data pipeline uses throughout.

pub mod activity;
pub mod competitors;
pub mod effort;
pub mod error;
pub mod evaluation;
pub mod geo;
pub mod hmm;
pub mod labelling;
pub mod linalg;
pub mod model_file;
pub mod pipeline;
pub mod scalar;
pub mod seeding;
pub mod simulator;
pub mod trajectory;

pub use activity::{Activity, ActivitySequence};
pub use error::{Error, Result};
pub use scalar::Scalar;

pub type HmmParamsF64 = hmm::HmmParams<f64>;
pub type HmmParamsF32 = hmm::HmmParams<f32>;
pub type FittedModelF64 = hmm::FittedModel<f64>;
pub type FittedModelF32 = hmm::FittedModel<f32>;
pub type ObservationsF64 = hmm::ObservationSequence<f64>;
pub type ObservationsF32 = hmm::ObservationSequence<f32>;
pub type EmConfigF64 = hmm::EmConfig<f64>;
