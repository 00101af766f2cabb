//! True intensity surfaces and complete point-pattern realizations.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{CellMask, GridSpec, GriddedField, Point};
use crate::rng;

/// Log-linear intensity `exp(beta_0 + sum_j beta_j X_j(s) + w(s))`.
#[derive(Debug, Clone)]
pub struct IntensityModel {
    beta: Vec<f64>,
    covariates: Vec<GriddedField>,
    latent: Option<GriddedField>,
}

impl IntensityModel {
    pub fn new(
        beta: Vec<f64>,
        covariates: Vec<GriddedField>,
        latent: Option<GriddedField>,
    ) -> Result<Self> {
        if beta.is_empty() {
            return Err(Error::Config("intensity model needs an intercept".into()));
        }
        if beta.len() != covariates.len() + 1 {
            return Err(Error::Dimension(format!(
                "{} slope coefficients for {} covariate fields",
                beta.len() - 1,
                covariates.len()
            )));
        }
        if beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::Domain("coefficients must be finite".into()));
        }
        Ok(IntensityModel {
            beta,
            covariates,
            latent,
        })
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn covariates(&self) -> &[GriddedField] {
        &self.covariates
    }

    pub fn latent(&self) -> Option<&GriddedField> {
        self.latent.as_ref()
    }

    /// Linear predictor `log lambda` on `grid`.
    pub fn log_intensity(&self, grid: &GridSpec) -> Result<GriddedField> {
        for (j, x) in self.covariates.iter().enumerate() {
            grid.ensure_same(x.grid(), &format!("covariate {}", j + 1))?;
        }
        if let Some(w) = &self.latent {
            grid.ensure_same(w.grid(), "latent field")?;
        }
        let mut eta = vec![self.beta[0]; grid.n_cells()];
        for (b, x) in self.beta[1..].iter().zip(&self.covariates) {
            for (e, v) in eta.iter_mut().zip(x.values()) {
                *e += b * v;
            }
        }
        if let Some(w) = &self.latent {
            for (e, v) in eta.iter_mut().zip(w.values()) {
                *e += v;
            }
        }
        GriddedField::new(*grid, eta)
    }
}

/// Intensity surface in points per km^2.
pub fn build_intensity(model: &IntensityModel, grid: &GridSpec) -> Result<GriddedField> {
    let eta = model.log_intensity(grid)?;
    eta.map(f64::exp).map_err(|_| {
        Error::Domain("log-intensity overflows: intensity is not finite everywhere".into())
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Marks {
    pub surfaced: Option<bool>,
    pub calls: Option<u64>,
}

/// A set of planar locations with optional per-point marks.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointPattern {
    points: Vec<Point>,
    marks: Option<Vec<Marks>>,
}

impl PointPattern {
    pub fn new(points: Vec<Point>) -> Self {
        PointPattern {
            points,
            marks: None,
        }
    }

    pub fn with_marks(points: Vec<Point>, marks: Vec<Marks>) -> Result<Self> {
        if marks.len() != points.len() {
            return Err(Error::Dimension(format!(
                "{} marks for {} points",
                marks.len(),
                points.len()
            )));
        }
        Ok(PointPattern {
            points,
            marks: Some(marks),
        })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn marks(&self) -> Option<&[Marks]> {
        self.marks.as_deref()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Checks every point lies in the domain and, if given, in an active cell.
    pub fn check_within(&self, grid: &GridSpec, mask: Option<&CellMask>) -> Result<()> {
        for (i, p) in self.points.iter().enumerate() {
            let cell = grid.cell_of(p).ok_or_else(|| {
                Error::Domain(format!("point {i} ({}, {}) lies outside the domain", p.x, p.y))
            })?;
            if let Some(m) = mask {
                if !m.contains_cell(cell) {
                    return Err(Error::Domain(format!(
                        "point {i} ({}, {}) lies in a masked cell",
                        p.x, p.y
                    )));
                }
            }
        }
        Ok(())
    }

    /// Number of points per grid cell; points outside the grid are dropped.
    pub fn cell_counts(&self, grid: &GridSpec) -> Vec<u64> {
        let mut counts = vec![0; grid.n_cells()];
        for p in &self.points {
            if let Some(c) = grid.cell_of(p) {
                counts[c] += 1;
            }
        }
        counts
    }
}

pub(crate) fn poisson_draw<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    // rand_distr's Poisson is exact for any finite positive mean.
    Poisson::new(mean).expect("positive finite mean").sample(rng) as u64
}

/// Cellwise Poisson counts with uniform placement inside each cell.
pub fn simulate_pattern_with<R: Rng + ?Sized>(
    intensity: &GriddedField,
    rng: &mut R,
) -> Result<PointPattern> {
    if let Some(i) = intensity.values().iter().position(|&v| v < 0.0) {
        return Err(Error::Domain(format!(
            "intensity is negative at cell {i} ({})",
            intensity.values()[i]
        )));
    }
    let grid = intensity.grid();
    let area = grid.cell_area();
    let res = grid.resolution();
    let mut points = Vec::new();
    for (cell, &lambda) in intensity.values().iter().enumerate() {
        let n = poisson_draw(lambda * area, rng);
        if n == 0 {
            continue;
        }
        let origin = grid.cell_origin(cell);
        for _ in 0..n {
            let u: f64 = rng.random();
            let v: f64 = rng.random();
            points.push(Point::new(origin.x + u * res, origin.y + v * res));
        }
    }
    Ok(PointPattern::new(points))
}

pub fn simulate_pattern(intensity: &GriddedField, seed: u64) -> Result<PointPattern> {
    simulate_pattern_with(intensity, &mut rng::seeded(seed))
}

/// Points whose containing cell is selected by `region`.
pub fn count_in_region(pattern: &PointPattern, region: &CellMask) -> usize {
    let grid = region.grid();
    pattern
        .points()
        .iter()
        .filter_map(|p| grid.cell_of(p))
        .filter(|&c| region.contains_cell(c))
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Bounds;
    use approx::assert_relative_eq;
    use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, Poisson as PoissonPmf};

    fn grid(side: f64, res: f64) -> GridSpec {
        GridSpec::new(Bounds::new(0.0, side, 0.0, side), res).unwrap()
    }

    #[test]
    fn study_coefficients_with_zero_covariates() {
        let g = grid(4.0, 1.0);
        let zero = GriddedField::constant(g, 0.0);
        let m = IntensityModel::new(vec![-3.8, 0.3, 0.6, 0.9], vec![zero.clone(), zero.clone(), zero], None)
            .unwrap();
        let f = build_intensity(&m, &g).unwrap();
        for &v in f.values() {
            assert_eq!(v, (-3.8f64).exp());
            assert_relative_eq!(v, 0.022371, epsilon = 1e-6);
        }
    }

    #[test]
    fn intercept_only_zero_gives_one() {
        let g = grid(2.0, 1.0);
        let f = build_intensity(&IntensityModel::new(vec![0.0], vec![], None).unwrap(), &g).unwrap();
        assert!(f.values().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn log_two_covariate_gives_two() {
        let g = grid(2.0, 1.0);
        let x = GriddedField::constant(g, std::f64::consts::LN_2);
        let f = build_intensity(&IntensityModel::new(vec![0.0, 1.0], vec![x], None).unwrap(), &g)
            .unwrap();
        for &v in f.values() {
            assert_relative_eq!(v, 2.0, max_relative = 1e-15);
        }
    }

    #[test]
    fn latent_field_adds_to_predictor() {
        let g = grid(2.0, 1.0);
        let w = GriddedField::new(g, vec![0.0, 1.0, -1.0, 2.0]).unwrap();
        let m = IntensityModel::new(vec![0.5], vec![], Some(w)).unwrap();
        let eta = m.log_intensity(&g).unwrap();
        assert_eq!(eta.values(), &[0.5, 1.5, -0.5, 2.5]);
    }

    #[test]
    fn dimension_errors() {
        let g = grid(2.0, 1.0);
        let x = GriddedField::constant(g, 0.0);
        assert!(matches!(
            IntensityModel::new(vec![0.0], vec![x.clone()], None),
            Err(Error::Dimension(_))
        ));
        let other = GriddedField::constant(grid(3.0, 1.0), 0.0);
        let m = IntensityModel::new(vec![0.0, 1.0], vec![other], None).unwrap();
        assert!(matches!(build_intensity(&m, &g), Err(Error::Dimension(_))));
    }

    #[test]
    fn zero_intensity_gives_empty_pattern() {
        let f = GriddedField::constant(grid(40.0, 1.0), 0.0);
        assert!(simulate_pattern(&f, 1).unwrap().is_empty());
    }

    #[test]
    fn negative_intensity_is_rejected() {
        let g = grid(2.0, 1.0);
        let f = GriddedField::new(g, vec![1.0, -0.1, 0.0, 0.0]).unwrap();
        assert!(matches!(simulate_pattern(&f, 1), Err(Error::Domain(_))));
    }

    #[test]
    fn simulation_is_deterministic_and_in_domain() {
        let g = grid(10.0, 1.0);
        let f = GriddedField::from_fn(g, |p| 0.1 + p.x / 10.0).unwrap();
        let a = simulate_pattern(&f, 5).unwrap();
        let b = simulate_pattern(&f, 5).unwrap();
        assert_eq!(a, b);
        a.check_within(&g, None).unwrap();
    }

    #[test]
    fn mean_total_matches_integral() {
        // Constant 86.10/1600 on the 40 km square; 10^4 replicates, +-3 SE.
        let g = grid(40.0, 1.0);
        let f = GriddedField::constant(g, 86.10 / 1600.0);
        let reps = 10_000;
        let counts: Vec<f64> = (0..reps)
            .map(|r| simulate_pattern_with(&f, &mut rng::stream(11, r)).unwrap().len() as f64)
            .collect();
        let mean = counts.iter().sum::<f64>() / reps as f64;
        let se = (86.10f64 / reps as f64).sqrt();
        assert!((mean - 86.10).abs() < 3.0 * se, "mean {mean}");
    }

    #[test]
    fn concentrated_cell_counts_are_poisson() {
        let g = grid(3.0, 1.0);
        let mut vals = vec![0.0; 9];
        vals[4] = 3.0;
        let f = GriddedField::new(g, vals).unwrap();
        let reps = 5000;
        let mut hist = vec![0u64; 9]; // 0..=7 and a >=8 tail bin
        for r in 0..reps {
            let pat = simulate_pattern_with(&f, &mut rng::stream(3, r)).unwrap();
            for p in pat.points() {
                assert_eq!(g.cell_of(p), Some(4));
                assert!(p.x > 1.0 && p.x < 2.0 && p.y > 1.0 && p.y < 2.0);
            }
            hist[pat.len().min(8)] += 1;
        }
        let pois = PoissonPmf::new(3.0).unwrap();
        let mut chi2 = 0.0;
        for (k, &obs) in hist.iter().enumerate() {
            let p = if k < 8 {
                pois.pmf(k as u64)
            } else {
                1.0 - (0..8).map(|j| pois.pmf(j)).sum::<f64>()
            };
            let expected = p * reps as f64;
            chi2 += (obs as f64 - expected).powi(2) / expected;
        }
        let pval = 1.0 - ChiSquared::new(8.0).unwrap().cdf(chi2);
        assert!(pval > 0.001, "chi2 {chi2}, p {pval}");
    }

    #[test]
    fn disjoint_region_counts_uncorrelated() {
        let g = grid(10.0, 1.0);
        let f = GriddedField::constant(g, 0.2);
        let left = CellMask::rectangle(g, Bounds::new(0.0, 5.0, 0.0, 10.0));
        let right = CellMask::rectangle(g, Bounds::new(5.0, 10.0, 0.0, 10.0));
        let reps = 10_000;
        let (mut a, mut b) = (Vec::new(), Vec::new());
        for r in 0..reps {
            let pat = simulate_pattern_with(&f, &mut rng::stream(21, r)).unwrap();
            a.push(count_in_region(&pat, &left) as f64);
            b.push(count_in_region(&pat, &right) as f64);
        }
        let r = pearson(&a, &b);
        assert!(r.abs() < 0.05, "r = {r}");
    }

    #[test]
    fn superposition_matches_union() {
        let g = grid(6.0, 1.0);
        let f1 = GriddedField::from_fn(g, |p| 0.3 * p.x / 6.0).unwrap();
        let f2 = GriddedField::from_fn(g, |p| 0.2 * p.y / 6.0).unwrap();
        let sum = f1.zip_with(&f2, |a, b| a + b).unwrap();
        let reps = 4000;
        let mut joint = Vec::new();
        let mut union = Vec::new();
        for r in 0..reps {
            joint.push(simulate_pattern_with(&sum, &mut rng::stream(31, r)).unwrap().len());
            let n1 = simulate_pattern_with(&f1, &mut rng::stream(32, r)).unwrap().len();
            let n2 = simulate_pattern_with(&f2, &mut rng::stream(33, r)).unwrap().len();
            union.push(n1 + n2);
        }
        // Two-sample Kolmogorov-Smirnov on the total-count distributions.
        let d = crate::stats::ks_two_sample_statistic(
            &joint.iter().map(|&v| v as f64).collect::<Vec<_>>(),
            &union.iter().map(|&v| v as f64).collect::<Vec<_>>(),
        );
        let p = crate::stats::ks_two_sample_pvalue(d, reps as usize, reps as usize);
        assert!(p > 0.01, "D = {d}, p = {p}");
    }

    #[test]
    fn region_counts() {
        let g = grid(3.0, 1.0);
        assert_eq!(count_in_region(&PointPattern::default(), &CellMask::all(g)), 0);
        let pat = PointPattern::new(vec![
            Point::new(0.5, 0.5),
            Point::new(2.5, 2.5),
            Point::new(2.2, 0.1),
        ]);
        assert_eq!(count_in_region(&pat, &CellMask::all(g)), 3);
        let left = CellMask::rectangle(g, Bounds::new(0.0, 1.0, 0.0, 3.0));
        assert_eq!(count_in_region(&pat, &left), 1);
    }

    fn pearson(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let ma = a.iter().sum::<f64>() / n;
        let mb = b.iter().sum::<f64>() / n;
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }
}
