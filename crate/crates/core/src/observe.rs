//! Observation channels applied to a true point pattern: the generative
//! sampling model.
//!
//! Aerial detection draws an independent Bernoulli(`pi * f(d)`) for every
//! whale and every transect, so a whale may be recorded by several transects
//! and surfacing is not shared between them. Acoustic detection draws
//! Poisson(`c`) calls per whale and an independent Bernoulli for every
//! call/hydrophone pair. Neither channel produces false positives, and
//! detections keep their exact coordinates.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::detection::{aerial_p, pam_p, AerialDetectionParams, Hydrophone, PamDetectionParams};
use crate::error::{Error, Result};
use crate::grid::{GriddedField, Point};
use crate::lgcp::{poisson_draw, simulate_pattern_with, PointPattern};
use crate::rng;
use crate::transect::Transect;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AerialObservation {
    pub transect_id: String,
    pub detections: Vec<Point>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PamObservation {
    pub hydrophone_id: String,
    pub count: u64,
}

pub fn simulate_aerial_with<R: Rng + ?Sized>(
    pattern: &PointPattern,
    transects: &[Transect],
    params: &AerialDetectionParams,
    rng: &mut R,
) -> Result<Vec<AerialObservation>> {
    params.validate()?;
    let mut obs: Vec<AerialObservation> = transects
        .iter()
        .map(|t| AerialObservation {
            transect_id: t.id().to_string(),
            detections: Vec::new(),
        })
        .collect();
    for p in pattern.points() {
        for (t, o) in transects.iter().zip(obs.iter_mut()) {
            let prob = aerial_p(t.distance_to(p), params);
            if rng.random_bool(prob) {
                o.detections.push(*p);
            }
        }
    }
    Ok(obs)
}

/// Per-transect detected subsets of `pattern`, deterministic in `seed`.
pub fn simulate_aerial(
    pattern: &PointPattern,
    transects: &[Transect],
    params: &AerialDetectionParams,
    seed: u64,
) -> Result<Vec<AerialObservation>> {
    simulate_aerial_with(pattern, transects, params, &mut rng::seeded(seed))
}

/// Acoustic simulation output, including the calls each whale emitted.
#[derive(Debug, Clone, PartialEq)]
pub struct PamSimulation {
    pub observations: Vec<PamObservation>,
    pub calls_per_whale: Vec<u64>,
}

pub fn simulate_pam_with<R: Rng + ?Sized>(
    pattern: &PointPattern,
    hydrophones: &[Hydrophone],
    call_rate: f64,
    params: &PamDetectionParams,
    rng: &mut R,
) -> Result<PamSimulation> {
    if !(call_rate >= 0.0 && call_rate.is_finite()) {
        return Err(Error::Config(format!("call rate must be nonnegative, got {call_rate}")));
    }
    params.validate()?;
    let local: Vec<PamDetectionParams> = hydrophones.iter().map(|h| h.params(params)).collect();
    let mut counts = vec![0u64; hydrophones.len()];
    let mut calls_per_whale = Vec::with_capacity(pattern.len());
    for p in pattern.points() {
        let calls = poisson_draw(call_rate, rng);
        calls_per_whale.push(calls);
        if calls == 0 {
            continue;
        }
        let probs: Vec<f64> = hydrophones
            .iter()
            .zip(&local)
            .map(|(h, lp)| pam_p(1000.0 * p.distance(&h.location), lp))
            .collect();
        for _ in 0..calls {
            for (k, &prob) in probs.iter().enumerate() {
                if rng.random_bool(prob) {
                    counts[k] += 1;
                }
            }
        }
    }
    let observations = hydrophones
        .iter()
        .zip(counts)
        .map(|(h, count)| PamObservation {
            hydrophone_id: h.id.clone(),
            count,
        })
        .collect();
    Ok(PamSimulation {
        observations,
        calls_per_whale,
    })
}

/// Per-hydrophone detected call counts, deterministic in `seed`.
pub fn simulate_pam(
    pattern: &PointPattern,
    hydrophones: &[Hydrophone],
    call_rate: f64,
    params: &PamDetectionParams,
    seed: u64,
) -> Result<Vec<PamObservation>> {
    Ok(simulate_pam_with(pattern, hydrophones, call_rate, params, &mut rng::seeded(seed))?.observations)
}

/// Expected detected calls per hydrophone given the whale locations.
pub fn expected_pam_counts(
    pattern: &PointPattern,
    hydrophones: &[Hydrophone],
    call_rate: f64,
    params: &PamDetectionParams,
) -> Vec<f64> {
    hydrophones
        .iter()
        .map(|h| {
            let lp = h.params(params);
            call_rate
                * pattern
                    .points()
                    .iter()
                    .map(|p| pam_p(1000.0 * p.distance(&h.location), &lp))
                    .sum::<f64>()
        })
        .collect()
}

/// Where the thinned points come from in [`thinning_estimator_check`].
#[derive(Debug, Clone)]
pub enum PatternSource {
    /// Thin the same realization every replicate.
    Fixed(PointPattern),
    /// Draw a fresh Poisson realization from this intensity every replicate.
    Poisson(GriddedField),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimatorSummary {
    pub replicates: usize,
    pub mean: f64,
    pub variance: f64,
}

/// Monte Carlo mean and variance of the inverse-probability estimator
/// `sum_k N_k / p_k` of `lambda(D)` under independent Bernoulli thinning with
/// retention `p_surface` (evaluated per cell).
pub fn thinning_estimator_check(
    source: &PatternSource,
    p_surface: &GriddedField,
    replicates: usize,
    seed: u64,
) -> Result<EstimatorSummary> {
    if replicates == 0 {
        return Err(Error::Config("need at least one replicate".into()));
    }
    if let Some(v) = p_surface.values().iter().find(|&&v| !(0.0..=1.0).contains(&v)) {
        return Err(Error::Domain(format!("retention probability {v} outside [0, 1]")));
    }
    let grid = p_surface.grid();
    if let PatternSource::Poisson(intensity) = source {
        grid.ensure_same(intensity.grid(), "thinning estimator")?;
    }
    let probs = p_surface.values();
    let mut estimates = Vec::with_capacity(replicates);
    for r in 0..replicates {
        let mut rng = rng::stream(seed, r as u64);
        let drawn;
        let pattern = match source {
            PatternSource::Fixed(p) => p,
            PatternSource::Poisson(intensity) => {
                drawn = simulate_pattern_with(intensity, &mut rng)?;
                &drawn
            }
        };
        let mut est = 0.0;
        for pt in pattern.points() {
            let cell = grid
                .cell_of(pt)
                .ok_or_else(|| Error::Domain(format!("point ({}, {}) outside the grid", pt.x, pt.y)))?;
            let p = probs[cell];
            if p <= 0.0 {
                return Err(Error::Domain(format!(
                    "cell {cell} has zero retention probability but contains a point; the estimator is undefined"
                )));
            }
            if rng.random_bool(p) {
                est += 1.0 / p;
            }
        }
        estimates.push(est);
    }
    Ok(EstimatorSummary {
        replicates,
        mean: crate::stats::mean(&estimates),
        variance: crate::stats::variance(&estimates),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Bounds, GridSpec};
    use crate::stats;

    fn grid40() -> GridSpec {
        GridSpec::new(Bounds::new(0.0, 40.0, 0.0, 40.0), 1.0).unwrap()
    }

    fn eight_transects() -> Vec<Transect> {
        (0..8)
            .map(|i| Transect::horizontal(format!("T{i}"), 2.5 + 5.0 * i as f64, 0.0, 40.0).unwrap())
            .collect()
    }

    fn scattered(n: usize, seed: u64) -> PointPattern {
        let mut rng = rng::seeded(seed);
        PointPattern::new(
            (0..n)
                .map(|_| Point::new(40.0 * rng.random::<f64>(), 40.0 * rng.random::<f64>()))
                .collect(),
        )
    }

    #[test]
    fn zero_surfacing_sees_nothing() {
        let pat = scattered(50, 1);
        let obs = simulate_aerial(&pat, &eight_transects(), &AerialDetectionParams::with_pi(0.0).unwrap(), 3)
            .unwrap();
        assert_eq!(obs.len(), 8);
        assert!(obs.iter().all(|o| o.detections.is_empty()));
    }

    #[test]
    fn whales_on_the_line_are_always_seen() {
        let t = Transect::horizontal("A", 10.0, 0.0, 40.0).unwrap();
        let pat = PointPattern::new((0..20).map(|i| Point::new(i as f64 * 2.0, 10.0)).collect());
        let obs = simulate_aerial(&pat, &[t], &AerialDetectionParams::with_pi(1.0).unwrap(), 9).unwrap();
        assert_eq!(obs[0].detections, pat.points());
    }

    #[test]
    fn detections_are_members_of_the_pattern() {
        let pat = scattered(89, 4);
        let obs = simulate_aerial(&pat, &eight_transects(), &AerialDetectionParams::with_pi(0.4).unwrap(), 5)
            .unwrap();
        for o in &obs {
            for d in &o.detections {
                assert!(pat.points().contains(d));
            }
        }
        let again = simulate_aerial(&pat, &eight_transects(), &AerialDetectionParams::with_pi(0.4).unwrap(), 5)
            .unwrap();
        assert_eq!(obs, again);
    }

    #[test]
    fn detected_at_least_once_matches_surface() {
        let pat = scattered(89, 6);
        let transects = eight_transects();
        let params = AerialDetectionParams::with_pi(0.4).unwrap();
        let expected: f64 = pat
            .points()
            .iter()
            .map(|p| {
                1.0 - transects
                    .iter()
                    .map(|t| 1.0 - aerial_p(t.distance_to(p), &params))
                    .product::<f64>()
            })
            .sum();
        let reps = 4000;
        let seen: Vec<f64> = (0..reps)
            .map(|r| {
                let obs = simulate_aerial_with(&pat, &transects, &params, &mut rng::stream(8, r)).unwrap();
                let mut any = vec![false; pat.len()];
                for o in &obs {
                    for d in &o.detections {
                        let i = pat.points().iter().position(|p| p == d).unwrap();
                        any[i] = true;
                    }
                }
                any.iter().filter(|&&a| a).count() as f64
            })
            .collect();
        let m = stats::mean(&seen);
        let se = (stats::variance(&seen) / reps as f64).sqrt();
        assert!((m - expected).abs() < 3.0 * se, "mean {m} expected {expected}");
    }

    #[test]
    fn zero_call_rate_gives_zero_counts() {
        let pat = scattered(30, 2);
        let h = vec![Hydrophone::new("H", Point::new(20.0, 20.0), None)];
        let obs = simulate_pam(&pat, &h, 0.0, &PamDetectionParams::default(), 1).unwrap();
        assert_eq!(obs[0].count, 0);
        assert!(simulate_pam(&pat, &h, -1.0, &PamDetectionParams::default(), 1).is_err());
    }

    #[test]
    fn whale_at_hydrophone_is_always_heard() {
        let loc = Point::new(12.0, 30.0);
        let pat = PointPattern::new(vec![loc]);
        let h = vec![Hydrophone::new("H", loc, None)];
        let reps = 10_000;
        let ys: Vec<f64> = (0..reps)
            .map(|r| {
                simulate_pam_with(&pat, &h, 6.0, &PamDetectionParams::default(), &mut rng::stream(4, r))
                    .unwrap()
                    .observations[0]
                    .count as f64
            })
            .collect();
        let m = stats::mean(&ys);
        assert!((m - 6.0).abs() < 3.0 * (6.0f64 / reps as f64).sqrt(), "mean {m}");
    }

    #[test]
    fn expected_counts_match_monte_carlo() {
        let pat = scattered(40, 12);
        let hydros: Vec<Hydrophone> = (0..3)
            .flat_map(|i| (0..3).map(move |j| (i, j)))
            .map(|(i, j)| {
                Hydrophone::new(
                    format!("H{i}{j}"),
                    Point::new((i as f64 + 0.5) * 40.0 / 3.0, (j as f64 + 0.5) * 40.0 / 3.0),
                    None,
                )
            })
            .collect();
        let params = PamDetectionParams::default();
        let expected = expected_pam_counts(&pat, &hydros, 6.0, &params);
        let reps = 3000;
        let mut sums = vec![Vec::with_capacity(reps); hydros.len()];
        for r in 0..reps {
            let sim = simulate_pam_with(&pat, &hydros, 6.0, &params, &mut rng::stream(13, r as u64)).unwrap();
            for (k, o) in sim.observations.iter().enumerate() {
                sums[k].push(o.count as f64);
            }
        }
        for (k, ys) in sums.iter().enumerate() {
            let m = stats::mean(ys);
            let se = (stats::variance(ys) / reps as f64).sqrt();
            assert!((m - expected[k]).abs() < 3.0 * se, "hydrophone {k}: {m} vs {}", expected[k]);
        }
    }

    #[test]
    fn channels_are_conditionally_independent() {
        let pat = scattered(89, 14);
        let transects = eight_transects();
        let hydros = vec![
            Hydrophone::new("A", Point::new(10.0, 10.0), None),
            Hydrophone::new("B", Point::new(30.0, 30.0), None),
        ];
        let ap = AerialDetectionParams::with_pi(0.4).unwrap();
        let pp = PamDetectionParams::default();
        let reps = 5000;
        let (mut a, mut b) = (Vec::new(), Vec::new());
        for r in 0..reps {
            let seed = rng::derive_seed(77, r);
            let obs = simulate_aerial(&pat, &transects, &ap, rng::derive_seed(seed, 1)).unwrap();
            let y = simulate_pam(&pat, &hydros, 6.0, &pp, rng::derive_seed(seed, 2)).unwrap();
            a.push(obs.iter().map(|o| o.detections.len()).sum::<usize>() as f64);
            b.push(y.iter().map(|o| o.count).sum::<u64>() as f64);
        }
        // The pattern is fixed, so any correlation would be channel leakage.
        let r = stats::pearson(&a, &b);
        assert!(r.abs() < 4.0 / (reps as f64).sqrt(), "r = {r}");
    }

    #[test]
    fn full_retention_recovers_n_exactly() {
        let g = grid40();
        let pat = scattered(37, 3);
        let s = thinning_estimator_check(
            &PatternSource::Fixed(pat),
            &GriddedField::constant(g, 1.0),
            50,
            1,
        )
        .unwrap();
        assert_eq!(s.mean, 37.0);
        assert_eq!(s.variance, 0.0);
    }

    #[test]
    fn half_retention_poisson_moments() {
        // Var(N/p) = lambda(D)/p for Poisson N.
        let g = grid40();
        let s = thinning_estimator_check(
            &PatternSource::Poisson(GriddedField::constant(g, 100.0 / 1600.0)),
            &GriddedField::constant(g, 0.5),
            10_000,
            2,
        )
        .unwrap();
        let se = (200.0f64 / 10_000.0).sqrt();
        assert!((s.mean - 100.0).abs() < 3.0 * se, "mean {}", s.mean);
        assert!((s.variance / 200.0 - 1.0).abs() < 0.1, "var {}", s.variance);
    }

    #[test]
    fn zero_probability_cell_with_point_is_an_error() {
        let g = grid40();
        let mut p = vec![0.5; g.n_cells()];
        p[0] = 0.0;
        let pat = PointPattern::new(vec![Point::new(0.5, 0.5)]);
        let err = thinning_estimator_check(
            &PatternSource::Fixed(pat),
            &GriddedField::new(g, p).unwrap(),
            10,
            1,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
    }

    #[test]
    fn less_thinning_gives_smaller_variance() {
        let g = GridSpec::new(Bounds::new(0.0, 10.0, 0.0, 10.0), 1.0).unwrap();
        let lam = GriddedField::constant(g, 0.8);
        let p1 = GriddedField::from_fn(g, |c| 0.2 + 0.02 * c.x).unwrap();
        let p2 = p1.map(|v| v + 0.3).unwrap();
        let s1 = thinning_estimator_check(&PatternSource::Poisson(lam.clone()), &p1, 4000, 5).unwrap();
        let s2 = thinning_estimator_check(&PatternSource::Poisson(lam), &p2, 4000, 6).unwrap();
        assert!(s1.variance > s2.variance, "{} vs {}", s1.variance, s2.variance);
    }
}
