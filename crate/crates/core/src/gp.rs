//! Mean-zero Gaussian random fields on grid centroids with exponential
//! covariance `sigma2 * exp(-d / phi)`.
//!
//! Kernel convention: the range parameter divides the distance, so the
//! correlation falls to `exp(-3) ~ 0.05` at `3 * phi`. An effective range of
//! 9 km therefore means `phi = 3`.
//!
//! Fields are drawn as `w = L z` with `L` the lower Cholesky factor of the
//! covariance and `z` i.i.d. standard normal. The factor is stored packed
//! (row-major lower triangle) because the sampler multiplies by it once per
//! iteration.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridSpec, GriddedField, Point};
use crate::rng;

/// Relative diagonal jitter schedule: first attempt, growth per retry, cap.
pub const JITTER_START: f64 = 1e-10;
pub const JITTER_GROWTH: f64 = 10.0;
pub const JITTER_MAX: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpCovariance {
    sigma2: f64,
    phi: f64,
}

impl ExpCovariance {
    pub fn new(sigma2: f64, phi: f64) -> Result<Self> {
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::Config(format!("marginal variance must be positive, got {sigma2}")));
        }
        if !(phi > 0.0 && phi.is_finite()) {
            return Err(Error::Config(format!("range parameter must be positive, got {phi}")));
        }
        Ok(ExpCovariance { sigma2, phi })
    }

    /// Builds the kernel from the distance at which correlation is ~0.05.
    pub fn from_effective_range(sigma2: f64, effective_range: f64) -> Result<Self> {
        ExpCovariance::new(sigma2, effective_range / 3.0)
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn effective_range(&self) -> f64 {
        3.0 * self.phi
    }

    pub fn at(&self, distance: f64) -> f64 {
        self.sigma2 * (-distance / self.phi).exp()
    }

    pub fn correlation(&self) -> ExpCovariance {
        ExpCovariance {
            sigma2: 1.0,
            phi: self.phi,
        }
    }
}

/// Dense covariance matrix over `centroids`. Exactly symmetric: only the
/// upper triangle is evaluated.
pub fn cov_matrix(centroids: &[Point], cov: &ExpCovariance) -> Result<DMatrix<f64>> {
    if centroids.is_empty() {
        return Err(Error::Config("covariance needs at least one location".into()));
    }
    let n = centroids.len();
    let mut m = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = cov.sigma2;
        for j in (i + 1)..n {
            let d = centroids[i].distance(&centroids[j]);
            if !d.is_finite() {
                return Err(Error::Domain(format!("distance between sites {i} and {j} is not finite")));
            }
            let v = cov.at(d);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    Ok(m)
}

/// Dot product with four independent accumulators so the compiler can keep
/// several lanes in flight. Summation order is fixed, so results are
/// deterministic.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let tail: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Lower-triangular Cholesky factor stored row-major and packed.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    n: usize,
    packed: Vec<f64>,
    jitter: f64,
}

#[inline]
fn row_offset(i: usize) -> usize {
    i * (i + 1) / 2
}

impl CholeskyFactor {
    /// Factors `matrix`, adding diagonal jitter `JITTER_START * scale`,
    /// growing by `JITTER_GROWTH` per failed attempt up to
    /// `JITTER_MAX * scale`.
    pub fn with_jitter(matrix: &DMatrix<f64>, scale: f64) -> Result<Self> {
        let n = matrix.nrows();
        if n == 0 || n != matrix.ncols() {
            return Err(Error::Dimension(format!(
                "cannot factor a {}x{} matrix",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let mut rel = JITTER_START;
        loop {
            let jitter = rel * scale;
            let mut m = matrix.clone();
            for i in 0..n {
                m[(i, i)] += jitter;
            }
            if let Some(chol) = m.cholesky() {
                let l = chol.l();
                let mut packed = Vec::with_capacity(row_offset(n));
                for i in 0..n {
                    for j in 0..=i {
                        packed.push(l[(i, j)]);
                    }
                }
                return Ok(CholeskyFactor { n, packed, jitter });
            }
            rel *= JITTER_GROWTH;
            if rel > JITTER_MAX * (1.0 + 1e-9) {
                return Err(Error::Numerical(format!(
                    "Cholesky factorization of {n}x{n} covariance failed with jitter up to {:e}",
                    JITTER_MAX * scale
                )));
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.packed[row_offset(i)..row_offset(i + 1)]
    }

    /// `out = L z`.
    pub fn mul_into(&self, z: &[f64], out: &mut [f64]) {
        assert_eq!(z.len(), self.n);
        assert_eq!(out.len(), self.n);
        for (i, o) in out.iter_mut().enumerate() {
            *o = dot(self.row(i), &z[..=i]);
        }
    }

    pub fn mul(&self, z: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.mul_into(z, &mut out);
        out
    }

    /// Solves `L x = b` by forward substitution.
    pub fn solve_lower(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let mut x = vec![0.0; self.n];
        for i in 0..self.n {
            let row = self.row(i);
            let s = dot(&row[..i], &x[..i]);
            x[i] = (b[i] - s) / row[i];
        }
        x
    }

    /// `log det(L L^T)`.
    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.n).map(|i| self.row(i)[i].ln()).sum::<f64>()
    }
}

/// Factors the covariance of `cov` over the grid centroids.
pub fn factor_grid(grid: &GridSpec, cov: &ExpCovariance) -> Result<CholeskyFactor> {
    let centroids: Vec<Point> = grid.centroids().collect();
    let m = cov_matrix(&centroids, cov)?;
    CholeskyFactor::with_jitter(&m, cov.sigma2()).map_err(|e| match e {
        Error::Numerical(msg) => Error::Numerical(format!(
            "{msg} (grid of {} cells, phi = {})",
            grid.n_cells(),
            cov.phi()
        )),
        other => other,
    })
}

/// Reusable sampler for repeated draws on one grid.
#[derive(Debug, Clone)]
pub struct GpSampler {
    grid: GridSpec,
    factor: CholeskyFactor,
}

impl GpSampler {
    pub fn new(grid: &GridSpec, cov: &ExpCovariance) -> Result<Self> {
        Ok(GpSampler {
            grid: *grid,
            factor: factor_grid(grid, cov)?,
        })
    }

    pub fn factor(&self) -> &CholeskyFactor {
        &self.factor
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> GriddedField {
        let z: Vec<f64> = (0..self.factor.dim())
            .map(|_| rng.sample(StandardNormal))
            .collect();
        GriddedField::new(self.grid, self.factor.mul(&z)).expect("finite draw on own grid")
    }
}

/// One draw of the field at the grid centroids, deterministic in `seed`.
pub fn sample_gp(grid: &GridSpec, cov: &ExpCovariance, seed: u64) -> Result<GriddedField> {
    let sampler = GpSampler::new(grid, cov)?;
    Ok(sampler.sample(&mut rng::seeded(seed)))
}
