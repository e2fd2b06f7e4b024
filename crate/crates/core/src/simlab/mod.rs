//! Noise models, Monte Carlo experiments and their diagnostics.

mod config;
mod diagnostics;
mod noise;
mod overlays;
mod runner;

pub use config::{CorrelationSpec, EstimatorKind, ExperimentConfig, ThetaGenerator, SCHEMA_VERSION};
pub use diagnostics::{
    clt_diagnostics, correlation, jackknife_moments, ks_distance_normal, kurtosis, risk_summary, skewness,
    variance_estimate, CltDiagnostics, Estimate, RiskSummary,
};
pub use noise::{check_noise_condition, sample_noise, CheckMethod, NoiseCheck, NoiseFamily, NoiseModel};
pub use overlays::{theoretical_overlays, OverlayParams, Overlays};
pub use runner::{
    generate_theta, resolve, run_experiment, run_experiment_with_threads, EstimatorReport, ExperimentReport,
    OrderReport, Scenario,
};
