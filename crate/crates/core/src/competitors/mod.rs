//! Baseline classifiers: the speed-threshold rule and the DMARP model.

pub mod dmarp;
pub mod polar;
pub mod threshold;

pub use dmarp::{
    dmarp_fit, dmarp_identifiability_floor, dmarp_initialize, dmarp_posteriors, dmarp_viterbi, DmarpConfig, DmarpFit,
    DmarpParams, DmarpState, RhoMode,
};
pub use polar::{polar_speeds, PolarSpeed};
pub use threshold::{
    estimate_thresholds, fit_speed_mixture, threshold_classify, SpeedMixture, ThresholdConfig, MIN_CALIBRATION_SPEEDS,
};
