//! Data simulated from the fitting model itself (centroid-located aerial
//! detections, Poisson acoustic counts, auxiliary draws). Unlike the
//! generative simulators in `observe`, this matches the likelihood exactly,
//! which joint-distribution checks of the sampler require.

use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma};

use crate::detection::{aerial_f, pam_p, AerialDetectionParams};
use crate::error::{Error, Result};
use crate::grid::Point;
use crate::lgcp::poisson_draw;
use crate::observe::{AerialObservation, PamObservation};

use super::auxiliary::{callrate_gamma_params, surface_beta_params};
use super::{AuxiliaryData, FitData, ModelSpec, SamplerState, SpatialBasis};

/// Replaces the observations in `template` (and the auxiliary observations,
/// keeping their counts) with a draw given `state`.
pub fn simulate_fitting_data<R: Rng + ?Sized>(
    spec: &ModelSpec,
    template: &FitData,
    basis: &SpatialBasis,
    state: &SamplerState,
    rng: &mut R,
) -> Result<(FitData, AuxiliaryData)> {
    let active = basis.active();
    if state.z.len() != active.len() || state.beta.len() != spec.n_beta() {
        return Err(Error::Dimension("state does not match the model".into()));
    }
    let grid = &template.grid;
    let area = grid.cell_area();
    let u = basis.factor().mul(&state.z);
    let s = state.sigma2.sqrt();
    let centroids: Vec<Point> = active.iter().map(|&c| grid.centroid(c)).collect();
    let lambda: Vec<f64> = active
        .iter()
        .zip(&u)
        .map(|(&c, ui)| {
            let xb: f64 = state.beta[0]
                + state.beta[1..]
                    .iter()
                    .zip(&spec.covariates)
                    .map(|(b, x)| b * x.values()[c])
                    .sum::<f64>();
            (xb + s * ui).exp()
        })
        .collect();

    let mut data = template.clone();
    data.aerial.clear();
    if spec.sources.aerial() {
        let f_params = AerialDetectionParams::new(1.0, template.aerial_params.plateau_km)?;
        for t in &template.transects {
            let mut detections = Vec::new();
            for (p, l) in centroids.iter().zip(&lambda) {
                let mean = state.pi * aerial_f(t.distance_to(p), &f_params) * l * area;
                for _ in 0..poisson_draw(mean, rng) {
                    detections.push(*p);
                }
            }
            data.aerial.push(AerialObservation {
                transect_id: t.id().to_string(),
                detections,
            });
        }
    }
    data.pam = template
        .hydrophones
        .iter()
        .map(|h| {
            let count = if spec.sources.pam() {
                let local = h.params(&template.pam_params);
                let mass: f64 = centroids
                    .iter()
                    .zip(&lambda)
                    .map(|(p, l)| pam_p(1000.0 * p.distance(&h.location), &local) * l * area)
                    .sum();
                poisson_draw(state.c * spec.window_scale * mass, rng)
            } else {
                0
            };
            PamObservation {
                hydrophone_id: h.id.clone(),
                count,
            }
        })
        .collect();

    let mut aux = spec.auxiliary.clone();
    if !aux.call_rates.is_empty() {
        let (shape, rate) = callrate_gamma_params(state.c, aux.call_rate_variance);
        let g = Gamma::new(shape, 1.0 / rate).map_err(|e| Error::Domain(e.to_string()))?;
        for x in aux.call_rates.iter_mut() {
            *x = g.sample(rng).max(f64::MIN_POSITIVE);
        }
    }
    if !aux.surfacing.is_empty() {
        let (a, b) = surface_beta_params(state.pi, aux.surfacing_precision);
        let d = Beta::new(a, b).map_err(|e| Error::Domain(e.to_string()))?;
        for x in aux.surfacing.iter_mut() {
            *x = d.sample(rng).clamp(1e-12, 1.0 - 1e-12);
        }
    }
    Ok((data, aux))
}
