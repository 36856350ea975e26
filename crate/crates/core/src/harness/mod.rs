//! Replicated risk simulations and rate fitting.

mod experiment;
mod loss;
mod rates;

pub use experiment::{
    run_experiment, DesignKind, Experiment, ExperimentConfig, Replicate, RiskCurve, RiskRow, Truth,
};
pub use loss::{affine_distance, empirical_loss, population_loss};
pub use rates::{
    adaptive_exponent, fit_rate, minimax_exponent, rate_flagged, rate_report, worst_case_exponent,
    RateEntry, RateTable, Regime, RegimeDescriptor, RATE_BAND,
};
