//! Simulation and Bayesian fusion of thinned spatial point patterns.
//!
//! A latent log-Gaussian Cox process is observed through two independent
//! thinning channels: aerial line transects (partially observed locations)
//! and passive acoustic monitors (call counts without locations). This crate
//! simulates both channels, evaluates the single-source and fused
//! likelihoods, fits them by Metropolis-within-Gibbs, and scores the fits
//! against simulated truth.

pub mod detection;
pub mod error;
pub mod gp;
pub mod grid;
pub mod inference;
pub mod io;
pub mod lgcp;
pub mod metrics;
pub mod observe;
pub mod rng;
pub mod scenario;
pub mod stats;
pub mod transect;

pub use detection::{
    aerial_f, aerial_p, aerial_surface, fused_surface, pam_p, pam_surface, AerialDetectionParams,
    Hydrophone, PamDetectionParams,
};
pub use error::{Error, Result};
pub use gp::{sample_gp, CholeskyFactor, ExpCovariance, GpSampler};
pub use grid::{build_grid, integrate_field, Bounds, CellMask, GridSpec, GriddedField, Point};
pub use inference::{
    check_identifiability, loglik_aerial, loglik_fused, loglik_pam, log_aux_callrate, log_aux_surface, mcmc_fit,
    posterior_abundance, FitData, McmcConfig, ModelSpec, PosteriorSamples, ScalarPrior, Sources,
};
pub use lgcp::{build_intensity, count_in_region, simulate_pattern, IntensityModel, Marks, PointPattern};
pub use metrics::{
    evaluate, full_data_loglik, intensity_discrepancy, nhpp_loglik, rmse_log_intensity, rps, EvaluationReport, LoglikSummary,
    RegionSummary,
};
pub use observe::{
    simulate_aerial, simulate_pam, thinning_estimator_check, AerialObservation, EstimatorSummary,
    PamObservation, PatternSource,
};
pub use transect::{dist_to_transect, Transect};
