//! Two-sample testing of mixture components with known, observation-specific
//! mixing weights.
//!
//! The test compares `Y_i ~ sum_u omega_u(i) p_u` with `Z_i ~ sum_u sigma_u(i) q_u`
//! and rejects `p_l = q_l for all l` when a wavelet U-statistic built from the
//! dual vectors of the weight matrices exceeds a threshold.

pub mod calibration;
pub mod error;
pub mod io;
pub mod numeric;
pub mod simulation;
pub mod statistic;
pub mod wavelet;
pub mod weights;

pub use calibration::{
    appendix_CT, bootstrap_threshold, lower_constant, mc_quantile_threshold, optimal_sum_from_statistics,
    optimal_sum_threshold, theoretical_threshold, upper_constant, ModelConstants, OptimalSum,
};
pub use error::{Error, Result};
pub use simulation::{
    adversarial_alternative, builtin_model, builtin_models, expand_weights, run_power_study, sample_mixture,
    AdversarialAlternative, ComponentDist, ExperimentReport, MixtureSpec, PowerStudyConfig, WeightBlock,
};
pub use statistic::{
    run_test, select_level, statistic_fast, statistic_naive, Diagnostics, PairedSample, RateParams, TestConfig,
    TestOutcome, ThresholdMethod, ThresholdSpec,
};
pub use wavelet::{CoefficientArray, Interval, LevelIndex, ScalingBasis};
pub use weights::{dual_basis, gram_spectrum, model_K, DualBasis, GramSpectrum, WeightMatrix};
