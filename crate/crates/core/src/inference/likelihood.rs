//! Aerial, acoustic, and fused log-likelihoods on the grid.
//!
//! Integrals use midpoint quadrature. Detection probabilities at observed
//! points are evaluated at the centroid of the containing cell, so the aerial
//! term is exactly the discretized NHPP density. The acoustic term omits
//! `log Y_k!`. Impossible data give `-inf` rather than an error.
//!
//! The free functions evaluate from scratch and serve as the reference.
//! [`LikelihoodTables`] precomputes everything that does not depend on the
//! intensity so the sampler pays O(cells * (1 + hydrophones)) per
//! evaluation.

use crate::detection::{aerial_f, pam_p, transect_surface, AerialDetectionParams, Hydrophone, PamDetectionParams};
use crate::error::{Error, Result};
use crate::gp::dot;
use crate::grid::{GriddedField, Point};
use crate::observe::{AerialObservation, PamObservation};
use crate::transect::Transect;

use super::{pam_counts_in_order, FitData, Sources};

fn check_intensity(intensity: &GriddedField) -> Result<()> {
    match intensity.values().iter().find(|&&v| v < 0.0) {
        Some(v) => Err(Error::Domain(format!("intensity must be nonnegative, got {v}"))),
        None => Ok(()),
    }
}

fn cell_of(intensity: &GriddedField, p: &Point) -> Result<usize> {
    intensity
        .grid()
        .cell_of(p)
        .ok_or_else(|| Error::Domain(format!("observation ({}, {}) lies outside the grid", p.x, p.y)))
}

/// `-sum_l int p_l lambda + sum_l sum_{s in S_l} log(p_l(s) lambda(s))`.
/// Transects without an observation block contribute only their integral.
pub fn loglik_aerial(
    intensity: &GriddedField,
    observations: &[AerialObservation],
    transects: &[Transect],
    params: &AerialDetectionParams,
) -> Result<f64> {
    check_intensity(intensity)?;
    params.validate()?;
    let grid = intensity.grid();
    let area = grid.cell_area();
    for obs in observations {
        if !transects.iter().any(|t| t.id() == obs.transect_id) {
            return Err(Error::Config(format!("observations for unknown transect '{}'", obs.transect_id)));
        }
    }
    let mut total = 0.0;
    for t in transects {
        let p = transect_surface(grid, t, params);
        let integral: f64 = p.values().iter().zip(intensity.values()).map(|(p, l)| p * l * area).sum();
        total -= integral;
        for obs in observations.iter().filter(|o| o.transect_id == t.id()) {
            for s in &obs.detections {
                let cell = cell_of(intensity, s)?;
                total += (p.values()[cell] * intensity.values()[cell]).ln();
            }
        }
    }
    Ok(total)
}

/// `sum_k [-mu_k + Y_k log mu_k]` with `mu_k = c * sum_cells p_k lambda area`.
pub fn loglik_pam(
    intensity: &GriddedField,
    observations: &[PamObservation],
    hydrophones: &[Hydrophone],
    c: f64,
    params: &PamDetectionParams,
) -> Result<f64> {
    check_intensity(intensity)?;
    if !(c >= 0.0 && c.is_finite()) {
        return Err(Error::Domain(format!("call rate must be nonnegative, got {c}")));
    }
    let counts = pam_counts_in_order(observations, hydrophones)?;
    let grid = intensity.grid();
    let area = grid.cell_area();
    let mut total = 0.0;
    for (h, &y) in hydrophones.iter().zip(&counts) {
        let local = h.params(params);
        let mass: f64 = grid
            .centroids()
            .zip(intensity.values())
            .map(|(s, l)| pam_p(1000.0 * s.distance(&h.location), &local) * l * area)
            .sum();
        total += poisson_kernel(c * mass, y as f64);
    }
    Ok(total)
}

/// Sum of [`loglik_aerial`] and [`loglik_pam`] over both blocks of `data`.
pub fn loglik_fused(intensity: &GriddedField, data: &FitData, pi: f64, c: f64) -> Result<f64> {
    data.grid.ensure_same(intensity.grid(), "fused likelihood")?;
    let aerial_params = AerialDetectionParams::new(pi, data.aerial_params.plateau_km)?;
    Ok(loglik_aerial(intensity, &data.aerial, &data.transects, &aerial_params)?
        + loglik_pam(intensity, &data.pam, &data.hydrophones, c, &data.pam_params)?)
}

#[inline]
fn poisson_kernel(mu: f64, y: f64) -> f64 {
    if mu > 0.0 {
        -mu + y * mu.ln()
    } else if y > 0.0 {
        f64::NEG_INFINITY
    } else {
        0.0
    }
}

#[derive(Debug, Clone)]
struct AerialTable {
    /// `sum_l f_l` per active cell.
    f_sum: Vec<f64>,
    /// Detections per active cell, summed over transects.
    counts: Vec<f64>,
    n_detections: f64,
    /// `sum log f_l` over all detections.
    log_f: f64,
}

#[derive(Debug, Clone)]
struct PamTable {
    /// One row of detection probabilities per hydrophone.
    p: Vec<Vec<f64>>,
    y: Vec<f64>,
}

/// Intensity-dependent sums needed by the likelihood.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IntensityStats {
    /// `lambda(D)`.
    pub total: f64,
    /// `int (sum_l f_l) lambda`.
    pub aerial_mass: f64,
    /// `sum over detections of log lambda`.
    pub log_at_detections: f64,
    /// `int p_k lambda` per hydrophone.
    pub pam_mass: Vec<f64>,
}

/// Precomputed detection tables over the active cells of a fit.
#[derive(Debug, Clone)]
pub struct LikelihoodTables {
    cell_area: f64,
    n_cells: usize,
    aerial: Option<AerialTable>,
    pam: Option<PamTable>,
}

impl LikelihoodTables {
    pub fn new(data: &FitData, sources: Sources) -> Result<Self> {
        data.validate()?;
        let grid = &data.grid;
        let active = data.active_cells();
        let centroids: Vec<Point> = active.iter().map(|&c| grid.centroid(c)).collect();
        let mut position = vec![usize::MAX; grid.n_cells()];
        for (i, &c) in active.iter().enumerate() {
            position[c] = i;
        }
        let aerial = if sources.aerial() {
            let f_params = AerialDetectionParams::new(1.0, data.aerial_params.plateau_km)?;
            let mut f_sum = vec![0.0; active.len()];
            let mut counts = vec![0.0; active.len()];
            let mut n_detections = 0.0;
            let mut log_f = 0.0;
            for (t, dets) in data.transects.iter().zip(data.detections_by_transect()?) {
                let f: Vec<f64> = centroids.iter().map(|s| aerial_f(t.distance_to(s), &f_params)).collect();
                for (acc, v) in f_sum.iter_mut().zip(&f) {
                    *acc += v;
                }
                for p in dets {
                    let i = position[grid.cell_of(p).expect("validated")];
                    if f[i] <= 0.0 {
                        return Err(Error::Domain(format!(
                            "detection ({}, {}) on transect '{}' has zero detection probability at its cell",
                            p.x,
                            p.y,
                            t.id()
                        )));
                    }
                    counts[i] += 1.0;
                    n_detections += 1.0;
                    log_f += f[i].ln();
                }
            }
            Some(AerialTable {
                f_sum,
                counts,
                n_detections,
                log_f,
            })
        } else {
            None
        };
        let pam = if sources.pam() {
            let y = data.counts_by_hydrophone()?.into_iter().map(|v| v as f64).collect();
            let p = data
                .hydrophones
                .iter()
                .map(|h| {
                    let local = h.params(&data.pam_params);
                    centroids
                        .iter()
                        .map(|s| pam_p(1000.0 * s.distance(&h.location), &local))
                        .collect()
                })
                .collect();
            Some(PamTable { p, y })
        } else {
            None
        };
        Ok(LikelihoodTables {
            cell_area: grid.cell_area(),
            n_cells: active.len(),
            aerial,
            pam,
        })
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn n_detections(&self) -> f64 {
        self.aerial.as_ref().map_or(0.0, |a| a.n_detections)
    }

    pub fn uses_aerial(&self) -> bool {
        self.aerial.is_some()
    }

    pub fn uses_pam(&self) -> bool {
        self.pam.is_some()
    }

    /// Fills `lambda` with `exp(eta)` and returns the likelihood sums.
    pub fn stats_into(&self, eta: &[f64], lambda: &mut Vec<f64>) -> IntensityStats {
        assert_eq!(eta.len(), self.n_cells, "log-intensity length");
        lambda.clear();
        lambda.extend(eta.iter().map(|e| e.exp()));
        let a = self.cell_area;
        let mut st = IntensityStats {
            total: a * lambda.iter().sum::<f64>(),
            ..Default::default()
        };
        if let Some(t) = &self.aerial {
            st.aerial_mass = a * dot(&t.f_sum, lambda);
            st.log_at_detections = dot(&t.counts, eta);
        }
        if let Some(t) = &self.pam {
            st.pam_mass = t.p.iter().map(|row| a * dot(row, lambda)).collect();
        }
        st
    }

    pub fn stats(&self, eta: &[f64]) -> IntensityStats {
        self.stats_into(eta, &mut Vec::with_capacity(eta.len()))
    }

    pub fn aerial_loglik(&self, st: &IntensityStats, pi: f64) -> f64 {
        match &self.aerial {
            None => 0.0,
            Some(t) => {
                let mut ll = -pi * st.aerial_mass + t.log_f + st.log_at_detections;
                if t.n_detections > 0.0 {
                    ll += t.n_detections * pi.ln();
                }
                ll
            }
        }
    }

    /// `c_eff` is the call rate times the window scale.
    pub fn pam_loglik(&self, st: &IntensityStats, c_eff: f64) -> f64 {
        match &self.pam {
            None => 0.0,
            Some(t) => t
                .y
                .iter()
                .zip(&st.pam_mass)
                .map(|(&y, &m)| poisson_kernel(c_eff * m, y))
                .sum(),
        }
    }

    pub fn loglik(&self, st: &IntensityStats, pi: f64, c_eff: f64) -> f64 {
        self.aerial_loglik(st, pi) + self.pam_loglik(st, c_eff)
    }
}
