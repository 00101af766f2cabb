//! Closed-form detection (thinning) functions for the two observation
//! channels and the detection-probability surfaces built from them.
//!
//! Units differ by channel: transect distances are in kilometres, acoustic
//! distances in metres. [`pam_surface`] converts centroid-to-hydrophone
//! distances from km to m before calling [`pam_p`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridSpec, GriddedField, Point};
use crate::transect::Transect;

/// Aerial availability and distance-detection parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AerialDetectionParams {
    /// Probability a whale is at the surface (available to be seen).
    pub pi: f64,
    /// Half-width (km) inside which a surfaced whale is always seen.
    pub plateau_km: f64,
}

impl Default for AerialDetectionParams {
    fn default() -> Self {
        AerialDetectionParams {
            pi: 1.0,
            plateau_km: 0.75,
        }
    }
}

impl AerialDetectionParams {
    pub fn new(pi: f64, plateau_km: f64) -> Result<Self> {
        let p = AerialDetectionParams { pi, plateau_km };
        p.validate()?;
        Ok(p)
    }

    pub fn with_pi(pi: f64) -> Result<Self> {
        AerialDetectionParams::new(pi, 0.75)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.pi) {
            return Err(Error::Config(format!("surfacing probability {} outside [0, 1]", self.pi)));
        }
        if !(self.plateau_km > 0.0 && self.plateau_km.is_finite()) {
            return Err(Error::Config(format!("plateau width must be positive, got {}", self.plateau_km)));
        }
        Ok(())
    }
}

/// Acoustic detection parameters: received level must exceed ambient noise
/// by the SNR threshold, with source levels uniform on `[sl_low, sl_high]`
/// and transmission loss `tl_coeff * log10(d_m)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PamDetectionParams {
    pub noise_db: f64,
    pub snr_threshold_db: f64,
    pub tl_coeff: f64,
    pub sl_low_db: f64,
    pub sl_high_db: f64,
}

impl Default for PamDetectionParams {
    fn default() -> Self {
        PamDetectionParams {
            noise_db: 104.0,
            snr_threshold_db: 26.0,
            tl_coeff: 14.5,
            sl_low_db: 141.0,
            sl_high_db: 197.0,
        }
    }
}

impl PamDetectionParams {
    pub fn with_noise(noise_db: f64) -> Self {
        PamDetectionParams {
            noise_db,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sl_low_db < self.sl_high_db) {
            return Err(Error::Config(format!(
                "source-level bounds must satisfy low < high, got {} and {}",
                self.sl_low_db, self.sl_high_db
            )));
        }
        if !(self.tl_coeff > 0.0) {
            return Err(Error::Config(format!(
                "transmission-loss coefficient must be positive, got {}",
                self.tl_coeff
            )));
        }
        let all_finite = [self.noise_db, self.snr_threshold_db, self.tl_coeff, self.sl_low_db, self.sl_high_db]
            .iter()
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::Config("acoustic parameters must be finite".into()));
        }
        Ok(())
    }
}

/// A bottom-mounted recorder. `noise_db`, when present, overrides the
/// ambient noise in [`PamDetectionParams`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hydrophone {
    pub id: String,
    pub location: Point,
    pub noise_db: Option<f64>,
}

impl Hydrophone {
    pub fn new(id: impl Into<String>, location: Point, noise_db: Option<f64>) -> Self {
        Hydrophone {
            id: id.into(),
            location,
            noise_db,
        }
    }

    pub fn params(&self, base: &PamDetectionParams) -> PamDetectionParams {
        PamDetectionParams {
            noise_db: self.noise_db.unwrap_or(base.noise_db),
            ..*base
        }
    }

    pub fn check_within(&self, grid: &GridSpec) -> Result<()> {
        if grid.contains(&self.location) {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "hydrophone {} at ({}, {}) lies outside the domain",
                self.id, self.location.x, self.location.y
            )))
        }
    }
}

/// Distance-detection probability for a surfaced whale `distance_km` from the
/// flight line: 1 within the plateau, `exp(-(d - plateau)^2)` beyond.
pub fn aerial_f(distance_km: f64, params: &AerialDetectionParams) -> f64 {
    if distance_km <= params.plateau_km {
        1.0
    } else {
        let excess = distance_km - params.plateau_km;
        (-excess * excess).exp()
    }
}

/// `pi * f(d)`: detection probability by one transect.
pub fn aerial_p(distance_km: f64, params: &AerialDetectionParams) -> f64 {
    params.pi * aerial_f(distance_km, params)
}

/// Probability one call made `distance_m` metres from a hydrophone is
/// detected. Defined as 1 at `d <= 0`, the limit as the transmission loss
/// goes to minus infinity.
pub fn pam_p(distance_m: f64, params: &PamDetectionParams) -> f64 {
    if distance_m <= 0.0 {
        return 1.0;
    }
    let q = params.snr_threshold_db + params.noise_db + params.tl_coeff * distance_m.log10();
    if q > params.sl_high_db {
        0.0
    } else if q < params.sl_low_db {
        1.0
    } else {
        1.0 - (q - params.sl_low_db) / (params.sl_high_db - params.sl_low_db)
    }
}

/// Per-transect detection surface `pi * f(d(centroid, transect))`.
pub fn transect_surface(
    grid: &GridSpec,
    transect: &Transect,
    params: &AerialDetectionParams,
) -> GriddedField {
    let values = grid
        .centroids()
        .map(|c| aerial_p(transect.distance_to(&c), params))
        .collect();
    GriddedField::new(*grid, values).expect("probabilities are finite")
}

/// Per-hydrophone call-detection surface.
pub fn hydrophone_surface(
    grid: &GridSpec,
    hydrophone: &Hydrophone,
    params: &PamDetectionParams,
) -> GriddedField {
    let local = hydrophone.params(params);
    let values = grid
        .centroids()
        .map(|c| pam_p(1000.0 * c.distance(&hydrophone.location), &local))
        .collect();
    GriddedField::new(*grid, values).expect("probabilities are finite")
}

fn complement_product<'a>(grid: &GridSpec, surfaces: impl Iterator<Item = &'a GriddedField>) -> GriddedField {
    let mut miss = vec![1.0; grid.n_cells()];
    for s in surfaces {
        for (m, p) in miss.iter_mut().zip(s.values()) {
            *m *= 1.0 - p;
        }
    }
    let values = miss.into_iter().map(|m| 1.0 - m).collect();
    GriddedField::new(*grid, values).expect("probabilities are finite")
}

/// Probability a surfaced whale at each centroid is seen from at least one
/// transect.
pub fn aerial_surface(
    grid: &GridSpec,
    transects: &[Transect],
    params: &AerialDetectionParams,
) -> GriddedField {
    let per: Vec<GriddedField> = transects
        .iter()
        .map(|t| transect_surface(grid, t, params))
        .collect();
    complement_product(grid, per.iter())
}

/// Probability a call made at each centroid is heard by at least one
/// hydrophone. Identically zero with no hydrophones.
pub fn pam_surface(
    grid: &GridSpec,
    hydrophones: &[Hydrophone],
    params: &PamDetectionParams,
) -> GriddedField {
    let per: Vec<GriddedField> = hydrophones
        .iter()
        .map(|h| hydrophone_surface(grid, h, params))
        .collect();
    complement_product(grid, per.iter())
}

/// `1 - (1 - a)(1 - b)` evaluated so that rounding never drops the result
/// below either input.
#[inline]
pub fn fuse_probability(a: f64, b: f64) -> f64 {
    (a + b * (1.0 - a)).max(b + a * (1.0 - b)).min(1.0)
}

/// Cellwise probability of detection by either channel.
pub fn fused_surface(a: &GriddedField, b: &GriddedField) -> Result<GriddedField> {
    a.zip_with(b, fuse_probability)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Bounds;
    use crate::rng;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;

    fn grid() -> GridSpec {
        GridSpec::new(Bounds::new(0.0, 40.0, 0.0, 40.0), 1.0).unwrap()
    }

    #[test]
    fn aerial_hand_values() {
        let p = AerialDetectionParams::default();
        assert_eq!(aerial_f(0.0, &p), 1.0);
        assert_eq!(aerial_f(0.75, &p), 1.0);
        assert!((aerial_f(1.75, &p) - (-1.0f64).exp()).abs() <= 1e-12);
        assert_relative_eq!(aerial_f(1.75, &p), 0.367879, epsilon = 1e-6);
        let p4 = AerialDetectionParams::with_pi(0.4).unwrap();
        assert_eq!(aerial_p(0.3, &p4), 0.4);
    }

    #[test]
    fn pam_hand_values() {
        let p = PamDetectionParams::default();
        assert!((pam_p(1000.0, &p) - (1.0 - 32.5 / 56.0)).abs() <= 1e-12);
        assert_relative_eq!(pam_p(1000.0, &p), 0.41964, epsilon = 1e-5);
        // Full detection below 10^(11/14.5) m, none beyond 10^(67/14.5) m.
        let near = 10f64.powf(11.0 / 14.5);
        let far = 10f64.powf(67.0 / 14.5);
        assert_relative_eq!(near, 5.74, epsilon = 5e-3);
        assert_relative_eq!(far / 1000.0, 41.75, epsilon = 5e-3);
        assert_eq!(pam_p(near * 0.999, &p), 1.0);
        assert_eq!(pam_p(1.0, &p), 1.0);
        assert_eq!(pam_p(0.0, &p), 1.0);
        assert_eq!(pam_p(far * 1.001, &p), 0.0);
        assert!(pam_p(far * 0.999, &p) > 0.0);
    }

    #[test]
    fn pam_continuous_at_breakpoints() {
        let p = PamDetectionParams::default();
        let near = 10f64.powf(11.0 / 14.5);
        let far = 10f64.powf(67.0 / 14.5);
        assert!((pam_p(near * (1.0 + 1e-9), &p) - 1.0).abs() < 1e-8);
        assert!(pam_p(far * (1.0 - 1e-9), &p) < 1e-8);
    }

    #[test]
    fn parameter_validation() {
        assert!(AerialDetectionParams::new(1.1, 0.75).is_err());
        assert!(AerialDetectionParams::new(0.5, 0.0).is_err());
        let mut p = PamDetectionParams::default();
        assert!(p.validate().is_ok());
        p.sl_low_db = 200.0;
        assert!(p.validate().is_err());
        let mut p = PamDetectionParams::default();
        p.tl_coeff = 0.0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn single_transect_on_line() {
        let g = GridSpec::new(Bounds::new(0.0, 4.0, 0.0, 4.0), 1.0).unwrap();
        let t = Transect::horizontal("t", 0.5, 0.0, 4.0).unwrap();
        let s = aerial_surface(&g, &[t], &AerialDetectionParams::with_pi(1.0).unwrap());
        assert_eq!(s.values()[0], 1.0);
        assert_eq!(s.values()[3], 1.0);
    }

    #[test]
    fn coincident_transects_combine_by_complement() {
        let g = GridSpec::new(Bounds::new(0.0, 4.0, 0.0, 4.0), 1.0).unwrap();
        let t = Transect::horizontal("t", 0.5, 0.0, 4.0).unwrap();
        let s = aerial_surface(&g, &[t.clone(), t], &AerialDetectionParams::with_pi(0.4).unwrap());
        assert_relative_eq!(s.values()[0], 0.64, max_relative = 1e-14);
    }

    #[test]
    fn eight_transect_layout_matches_percell_recomputation() {
        let g = grid();
        let transects: Vec<Transect> = (0..8)
            .map(|i| Transect::horizontal(format!("T{i}"), 2.5 + 5.0 * i as f64, 0.0, 40.0).unwrap())
            .collect();
        let params = AerialDetectionParams::with_pi(0.4).unwrap();
        let s = aerial_surface(&g, &transects, &params);
        for (cell, c) in g.centroids().enumerate() {
            // Independent route: nearest line is within 2.5 km, so only the
            // two bracketing lines matter beyond ~1e-10.
            let mut miss = 1.0;
            for i in 0..8 {
                let d = (c.y - (2.5 + 5.0 * i as f64)).abs();
                let f = if d <= 0.75 { 1.0 } else { (-(d - 0.75) * (d - 0.75)).exp() };
                miss *= 1.0 - 0.4 * f;
            }
            assert!((s.values()[cell] - (1.0 - miss)).abs() < 1e-14);
        }
        // Ridges of 0.4 along the lines, lower in between.
        let on_line = g.cell_of(&Point::new(10.3, 7.5)).unwrap();
        let between = g.cell_of(&Point::new(10.3, 5.2)).unwrap();
        assert_relative_eq!(s.values()[on_line], 0.4, max_relative = 1e-6);
        assert!(s.values()[between] < 0.1);
    }

    #[test]
    fn hydrophone_at_centroid_detects_everything() {
        let g = grid();
        let h = Hydrophone::new("h", g.centroid(0), None);
        let s = pam_surface(&g, &[h], &PamDetectionParams::default());
        assert_eq!(s.values()[0], 1.0);
    }

    #[test]
    fn no_hydrophones_gives_zero_surface() {
        let s = pam_surface(&grid(), &[], &PamDetectionParams::default());
        assert!(s.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn hydrophone_noise_overrides_global() {
        let g = grid();
        let quiet = Hydrophone::new("q", Point::new(20.0, 20.0), Some(102.9));
        let loud = Hydrophone::new("l", Point::new(20.0, 20.0), Some(108.1));
        let base = PamDetectionParams::default();
        let sq = hydrophone_surface(&g, &quiet, &base);
        let sl = hydrophone_surface(&g, &loud, &base);
        assert!(sq.values().iter().zip(sl.values()).all(|(q, l)| q >= l));
        assert!(sq.integrate() > sl.integrate());
    }

    #[test]
    fn array_fusion_differences_are_nonnegative() {
        let g = grid();
        let hydros: Vec<Hydrophone> = (0..3)
            .flat_map(|i| (0..3).map(move |j| (i, j)))
            .map(|(i, j)| {
                let step = 40.0 / 3.0;
                Hydrophone::new(
                    format!("H{i}{j}"),
                    Point::new((i as f64 + 0.5) * step, (j as f64 + 0.5) * step),
                    None,
                )
            })
            .collect();
        let transects: Vec<Transect> = (0..8)
            .map(|i| Transect::horizontal(format!("T{i}"), 2.5 + 5.0 * i as f64, 0.0, 40.0).unwrap())
            .collect();
        let pa = aerial_surface(&g, &transects, &AerialDetectionParams::with_pi(0.4).unwrap());
        let pp = pam_surface(&g, &hydros, &PamDetectionParams::default());
        let fused = fused_surface(&pa, &pp).unwrap();
        for ((f, a), p) in fused.values().iter().zip(pa.values()).zip(pp.values()) {
            assert!(f - a >= 0.0 && f - p >= 0.0);
            assert!((0.0..=1.0).contains(f));
        }
    }

    #[test]
    fn fused_identities() {
        assert_relative_eq!(fuse_probability(0.4, 0.5), 0.7, max_relative = 1e-15);
        assert_eq!(fuse_probability(0.3, 0.0), 0.3);
        assert_eq!(fuse_probability(0.0, 0.3), 0.3);
        assert_eq!(fuse_probability(1.0, 1.0), 1.0);
        assert_eq!(fuse_probability(1.0, 0.2), 1.0);
        let g = GridSpec::new(Bounds::new(0.0, 2.0, 0.0, 2.0), 1.0).unwrap();
        let other = GridSpec::new(Bounds::new(0.0, 3.0, 0.0, 3.0), 1.0).unwrap();
        assert!(fused_surface(&GriddedField::constant(g, 0.1), &GriddedField::constant(other, 0.1)).is_err());
    }

    #[test]
    fn fused_dominates_on_a_million_cells() {
        let mut rng = rng::seeded(17);
        for _ in 0..1_000_000 {
            let a: f64 = rng.random();
            let b: f64 = if rng.random_bool(0.1) { 0.0 } else { rng.random() };
            let f = fuse_probability(a, b);
            assert!(f >= a && f >= b && f <= 1.0);
            if a.min(b) == 0.0 {
                assert_eq!(f, a.max(b));
            } else if a < 0.999 && b < 0.999 && a.min(b) > 1e-3 {
                assert!(f > a.max(b));
            }
        }
    }

    proptest! {
        #[test]
        fn aerial_monotone(d1 in 0.0f64..20.0, d2 in 0.0f64..20.0) {
            let p = AerialDetectionParams::default();
            let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
            prop_assert!(aerial_f(lo, &p) >= aerial_f(hi, &p));
            prop_assert!((0.0..=1.0).contains(&aerial_f(d1, &p)));
        }

        #[test]
        fn pam_monotone_in_distance_and_noise(
            d1 in 0.0f64..60_000.0, d2 in 0.0f64..60_000.0,
            n1 in 95.0f64..115.0, n2 in 95.0f64..115.0,
        ) {
            let (dlo, dhi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
            let (nlo, nhi) = if n1 <= n2 { (n1, n2) } else { (n2, n1) };
            let lo = PamDetectionParams::with_noise(nlo);
            let hi = PamDetectionParams::with_noise(nhi);
            prop_assert!(pam_p(dlo, &lo) >= pam_p(dhi, &lo));
            prop_assert!(pam_p(dlo, &lo) >= pam_p(dlo, &hi));
            prop_assert!((0.0..=1.0).contains(&pam_p(d1, &hi)));
        }
    }
}
