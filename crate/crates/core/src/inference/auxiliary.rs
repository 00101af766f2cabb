//! Auxiliary-data models for the call rate and the surfacing probability.
//!
//! Call-rate observations are Gamma with mean `c` and a fixed variance;
//! surfacing-fraction observations are Beta with mean `pi` and a fixed
//! sample-size parameter.

use statrs::function::gamma::ln_gamma;

pub const DEFAULT_CALL_RATE_VARIANCE: f64 = 10.0;
pub const DEFAULT_SURFACING_PRECISION: f64 = 15.0;

/// `(shape, rate)` of the Gamma with mean `c` and variance `variance`.
pub fn callrate_gamma_params(c: f64, variance: f64) -> (f64, f64) {
    (c * c / variance, c / variance)
}

/// `(alpha, beta)` of the Beta with mean `pi` and sample size `precision`.
pub fn surface_beta_params(pi: f64, precision: f64) -> (f64, f64) {
    (pi * precision, (1.0 - pi) * precision)
}

/// Sum of Gamma log densities of `observations` given call rate `c`.
pub fn log_aux_callrate(c: f64, observations: &[f64], variance: f64) -> f64 {
    if observations.is_empty() {
        return 0.0;
    }
    if !(c > 0.0 && c.is_finite()) {
        return f64::NEG_INFINITY;
    }
    let (shape, rate) = callrate_gamma_params(c, variance);
    let norm = shape * rate.ln() - ln_gamma(shape);
    observations
        .iter()
        .map(|&x| norm + (shape - 1.0) * x.ln() - rate * x)
        .sum()
}

/// Sum of Beta log densities of `observations` given surfacing probability
/// `pi`.
pub fn log_aux_surface(pi: f64, observations: &[f64], precision: f64) -> f64 {
    if observations.is_empty() {
        return 0.0;
    }
    if !(pi > 0.0 && pi < 1.0) {
        return f64::NEG_INFINITY;
    }
    let (a, b) = surface_beta_params(pi, precision);
    let norm = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b);
    observations
        .iter()
        .map(|&x| norm + (a - 1.0) * x.ln() + (b - 1.0) * (1.0 - x).ln())
        .sum()
}
