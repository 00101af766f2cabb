//! Metropolis-within-Gibbs sampler.
//!
//! The latent field is kept whitened: `w = sqrt(sigma2) * L z` with `L` the
//! Cholesky factor of the correlation matrix, computed once per fit because
//! the range is fixed. One iteration runs, in order:
//!
//! 1. an elliptical slice update of `z` (prior `N(0, I)`);
//! 2. a centered update of `sigma2` given `w` (conjugate draw for an inverse
//!    gamma prior, random walk on `log sigma2` otherwise), rescaling `z`;
//! 3. a random-walk update of `log sigma2` with `z` held fixed;
//! 4. an exact Gibbs move along `(beta_0 + d, w - d)`, which leaves the
//!    intensity unchanged and so only involves the priors;
//! 5. a joint random-walk update of `beta`;
//! 6. random-walk updates of `logit(pi)` and `log(c)` when they are free.
//!
//! Random-walk scales adapt by Robbins-Monro during burn-in (and the `beta`
//! proposal covariance by the empirical covariance); everything is frozen
//! afterwards. `sqrt(sigma2) * L z` is maintained incrementally and
//! resynchronized every [`RESYNC_EVERY`] iterations.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::{cov_matrix, dot, CholeskyFactor, ExpCovariance};
use crate::grid::{CellMask, GridSpec, GriddedField, Point};
use crate::rng::{self, SimRng};

use super::auxiliary::{log_aux_callrate, log_aux_surface};
use super::{check_identifiability, FitData, IntensityStats, LikelihoodTables, ModelSpec, ScalarPrior, Sources};

pub const RESYNC_EVERY: usize = 100;

/// Robbins-Monro gain exponent.
const ADAPT_DECAY: f64 = 0.6;
/// Recompute the `beta` proposal covariance this often during burn-in.
const COV_UPDATE_EVERY: u64 = 100;

/// Whitening basis for the latent field over the active cells.
#[derive(Debug, Clone)]
pub struct SpatialBasis {
    grid: GridSpec,
    active: Vec<usize>,
    range: f64,
    factor: CholeskyFactor,
    /// `L^{-1} 1`, the whitened image of a constant unit field.
    whitened_ones: Vec<f64>,
    whitened_ones_norm2: f64,
}

impl SpatialBasis {
    pub fn new(grid: &GridSpec, mask: Option<&CellMask>, range: f64) -> Result<Self> {
        let active = match mask {
            Some(m) => {
                grid.ensure_same(m.grid(), "study-region mask")?;
                m.active_cells()
            }
            None => (0..grid.n_cells()).collect(),
        };
        let centroids: Vec<Point> = active.iter().map(|&c| grid.centroid(c)).collect();
        let cov = ExpCovariance::new(1.0, range)?;
        let m = cov_matrix(&centroids, &cov)?;
        let factor = CholeskyFactor::with_jitter(&m, 1.0).map_err(|e| match e {
            Error::Numerical(msg) => Error::Numerical(format!("{msg} ({} cells, range {range})", active.len())),
            other => other,
        })?;
        let whitened_ones = factor.solve_lower(&vec![1.0; active.len()]);
        let whitened_ones_norm2 = dot(&whitened_ones, &whitened_ones);
        Ok(SpatialBasis {
            grid: *grid,
            active,
            range,
            factor,
            whitened_ones,
            whitened_ones_norm2,
        })
    }

    pub fn for_data(data: &FitData, range: f64) -> Result<Self> {
        SpatialBasis::new(&data.grid, data.mask.as_ref(), range)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn active(&self) -> &[usize] {
        &self.active
    }

    pub fn range(&self) -> f64 {
        self.range
    }

    pub fn factor(&self) -> &CholeskyFactor {
        &self.factor
    }

    fn check_compatible(&self, data: &FitData, range: f64) -> Result<()> {
        self.grid.ensure_same(&data.grid, "spatial basis")?;
        if self.active != data.active_cells() {
            return Err(Error::Dimension("spatial basis was built for a different study region".into()));
        }
        if (self.range - range).abs() > 1e-12 * range {
            return Err(Error::Config(format!(
                "spatial basis has range {} but the model uses {range}",
                self.range
            )));
        }
        Ok(())
    }
}

/// A named set of cells whose abundance is recorded every draw.
#[derive(Debug, Clone)]
pub struct NamedRegion {
    pub name: String,
    pub mask: CellMask,
}

#[derive(Debug, Clone)]
pub struct McmcConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    /// Keep the latent field of every `latent_stride`-th retained draw;
    /// 0 keeps none.
    pub latent_stride: usize,
    /// Adapt proposal scales during burn-in.
    pub adapt: bool,
    pub regions: Vec<NamedRegion>,
}

impl McmcConfig {
    pub fn new(iterations: usize, burn_in: usize) -> Self {
        McmcConfig {
            iterations,
            burn_in,
            thin: 1,
            latent_stride: 10,
            adapt: true,
            regions: Vec::new(),
        }
    }

    /// 20,000 iterations with 5,000 burn-in.
    pub fn simulation_study() -> Self {
        McmcConfig::new(20_000, 5_000)
    }

    /// 100,000 iterations with 20,000 burn-in.
    pub fn application() -> Self {
        McmcConfig::new(100_000, 20_000)
    }

    pub fn n_draws(&self) -> usize {
        (self.iterations.saturating_sub(self.burn_in)) / self.thin.max(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.thin == 0 {
            return Err(Error::Config("thinning interval must be at least 1".into()));
        }
        if self.n_draws() == 0 {
            return Err(Error::Config(format!(
                "{} iterations with {} burn-in and thinning {} retain no draws",
                self.iterations, self.burn_in, self.thin
            )));
        }
        Ok(())
    }
}

/// Sampler state in the whitened parameterization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerState {
    pub beta: Vec<f64>,
    pub sigma2: f64,
    /// Whitened latent field; `w = sqrt(sigma2) * L z`.
    pub z: Vec<f64>,
    pub pi: f64,
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub sources: Sources,
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub latent_stride: usize,
    pub seed: u64,
    pub draws: usize,
    /// Post-burn-in acceptance rate of each Metropolis block.
    pub acceptance: BTreeMap<String, f64>,
    /// Mean elliptical-slice shrinkage steps per iteration after burn-in.
    pub latent_shrinks_per_iteration: f64,
}

#[derive(Debug, Clone)]
pub struct PosteriorSamples {
    pub grid: GridSpec,
    /// Grid indices of the cells the latent field lives on.
    pub active: Vec<usize>,
    pub beta: Vec<Vec<f64>>,
    pub sigma2: Vec<f64>,
    pub pi: Vec<f64>,
    pub c: Vec<f64>,
    pub loglik: Vec<f64>,
    /// `lambda(D)` of every draw.
    pub abundance: Vec<f64>,
    pub region_abundance: Vec<(String, Vec<f64>)>,
    /// Latent field per stored draw, over the active cells.
    pub latent: Vec<Vec<f64>>,
    /// Draw index of each stored latent field.
    pub latent_draws: Vec<usize>,
    /// Posterior mean of `lambda`; zero outside the study region.
    pub mean_intensity: GriddedField,
    /// Posterior mean of `log lambda`; zero outside the study region.
    pub mean_log_intensity: GriddedField,
    pub meta: RunMeta,
}

impl PosteriorSamples {
    pub fn len(&self) -> usize {
        self.sigma2.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma2.is_empty()
    }

    pub fn region(&self, name: &str) -> Option<&[f64]> {
        self.region_abundance
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
    }

    /// Stored latent draw `k` expanded to the grid (zero outside the region).
    pub fn latent_field(&self, k: usize) -> GriddedField {
        expand(&self.grid, &self.active, &self.latent[k])
    }
}

fn expand(grid: &GridSpec, active: &[usize], values: &[f64]) -> GriddedField {
    let mut out = vec![0.0; grid.n_cells()];
    for (&cell, &v) in active.iter().zip(values) {
        out[cell] = v;
    }
    GriddedField::new(*grid, out).expect("finite values on own grid")
}

#[derive(Debug, Clone)]
struct RwScale {
    log_scale: f64,
    target: f64,
    adapted: u64,
    proposed: u64,
    accepted: u64,
}

impl RwScale {
    fn new(scale: f64, target: f64) -> Self {
        RwScale {
            log_scale: scale.ln(),
            target,
            adapted: 0,
            proposed: 0,
            accepted: 0,
        }
    }

    fn scale(&self) -> f64 {
        self.log_scale.exp()
    }

    fn record(&mut self, log_ratio: f64, accepted: bool, adapting: bool) {
        self.proposed += 1;
        self.accepted += accepted as u64;
        if adapting {
            self.adapted += 1;
            let alpha = if log_ratio.is_nan() { 0.0 } else { log_ratio.min(0.0).exp() };
            let gain = (self.adapted as f64).powf(-ADAPT_DECAY);
            self.log_scale = (self.log_scale + gain * (alpha - self.target)).clamp(-20.0, 5.0);
        }
    }

    fn reset_counts(&mut self) {
        self.proposed = 0;
        self.accepted = 0;
    }

    fn rate(&self) -> Option<f64> {
        (self.proposed > 0).then(|| self.accepted as f64 / self.proposed as f64)
    }
}

/// Joint random-walk proposal for the coefficients with a learned shape.
#[derive(Debug, Clone)]
struct CoefficientProposal {
    rw: RwScale,
    chol: DMatrix<f64>,
    n: u64,
    mean: DVector<f64>,
    m2: DMatrix<f64>,
}

impl CoefficientProposal {
    fn new(p: usize) -> Self {
        let target = if p == 1 { 0.44 } else { 0.3 };
        CoefficientProposal {
            rw: RwScale::new(0.1, target),
            chol: DMatrix::identity(p, p),
            n: 0,
            mean: DVector::zeros(p),
            m2: DMatrix::zeros(p, p),
        }
    }

    fn observe(&mut self, beta: &[f64]) {
        let x = DVector::from_column_slice(beta);
        self.n += 1;
        let delta = &x - &self.mean;
        self.mean += &delta / self.n as f64;
        let delta2 = &x - &self.mean;
        self.m2 += &delta * delta2.transpose();
        let p = beta.len();
        if p > 1 && self.n >= 2 * COV_UPDATE_EVERY && self.n % COV_UPDATE_EVERY == 0 {
            let mut cov = &self.m2 / (self.n - 1) as f64;
            let floor = 1e-10 * (cov.trace() / p as f64).max(1e-12);
            for i in 0..p {
                cov[(i, i)] += floor;
            }
            if let Some(ch) = cov.cholesky() {
                let first = self.n == 2 * COV_UPDATE_EVERY;
                self.chol = ch.l();
                if first {
                    self.rw.log_scale = (2.38 / (p as f64).sqrt()).ln();
                }
            }
        }
    }
}

#[inline]
fn metropolis(rng: &mut SimRng, log_ratio: f64) -> bool {
    if log_ratio.is_nan() {
        return false;
    }
    log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio
}

#[inline]
fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Single-chain Metropolis-within-Gibbs sampler.
#[derive(Debug, Clone)]
pub struct Sampler {
    spec: ModelSpec,
    basis: Arc<SpatialBasis>,
    tables: LikelihoodTables,
    /// Covariate values at the active cells, one vector per covariate.
    design: Vec<Vec<f64>>,
    state: SamplerState,
    u: Vec<f64>,
    xb: Vec<f64>,
    eta: Vec<f64>,
    lambda: Vec<f64>,
    stats: IntensityStats,
    loglik: f64,
    nu: Vec<f64>,
    v: Vec<f64>,
    xb_prop: Vec<f64>,
    eta_prop: Vec<f64>,
    lambda_prop: Vec<f64>,
    beta_prop: CoefficientProposal,
    sigma2_centered: RwScale,
    sigma2_whitened: RwScale,
    pi_rw: RwScale,
    c_rw: RwScale,
    latent_updates: u64,
    latent_shrinks: u64,
    adapting: bool,
    iteration: usize,
    rng: SimRng,
}

impl Sampler {
    /// Validates the model and data, refuses non-identifiable specifications,
    /// and initializes at `beta` = prior means, `w = 0`, `sigma2` = prior
    /// center, and `pi`, `c` at their fixed values, auxiliary-data means, or
    /// prior centers, in that order of preference.
    pub fn new(spec: &ModelSpec, data: &FitData, basis: Arc<SpatialBasis>, seed: u64) -> Result<Self> {
        spec.validate(&data.grid)?;
        check_identifiability(spec)?;
        basis.check_compatible(data, spec.range)?;
        let tables = LikelihoodTables::new(data, spec.sources)?;
        let active = basis.active().to_vec();
        let design: Vec<Vec<f64>> = spec
            .covariates
            .iter()
            .map(|x| active.iter().map(|&c| x.values()[c]).collect())
            .collect();
        let n = active.len();
        let p = spec.n_beta();
        let beta: Vec<f64> = spec.beta_priors.iter().map(|b| b.center()).collect();
        let pi = spec.fixed_pi.unwrap_or_else(|| {
            if spec.auxiliary.surfacing.is_empty() {
                spec.pi_prior.center()
            } else {
                crate::stats::mean(&spec.auxiliary.surfacing)
            }
        });
        let c = spec.fixed_c.unwrap_or_else(|| {
            if spec.auxiliary.call_rates.is_empty() {
                spec.c_prior.center()
            } else {
                crate::stats::mean(&spec.auxiliary.call_rates)
            }
        });
        let state = SamplerState {
            beta,
            sigma2: spec.variance_prior.center(),
            z: vec![0.0; n],
            pi,
            c,
        };
        let mut sampler = Sampler {
            spec: spec.clone(),
            basis,
            tables,
            design,
            state,
            u: vec![0.0; n],
            xb: vec![0.0; n],
            eta: vec![0.0; n],
            lambda: Vec::with_capacity(n),
            stats: IntensityStats::default(),
            loglik: 0.0,
            nu: vec![0.0; n],
            v: vec![0.0; n],
            xb_prop: vec![0.0; n],
            eta_prop: vec![0.0; n],
            lambda_prop: Vec::with_capacity(n),
            beta_prop: CoefficientProposal::new(p),
            sigma2_centered: RwScale::new(0.05, 0.44),
            sigma2_whitened: RwScale::new(0.1, 0.44),
            pi_rw: RwScale::new(0.3, 0.44),
            c_rw: RwScale::new(0.3, 0.44),
            latent_updates: 0,
            latent_shrinks: 0,
            adapting: true,
            iteration: 0,
            rng: rng::seeded(seed),
        };
        sampler.refresh();
        sampler.check_finite()?;
        Ok(sampler)
    }

    /// Replaces the current state (for example with a prior draw).
    pub fn set_state(&mut self, state: SamplerState) -> Result<()> {
        if state.beta.len() != self.spec.n_beta() || state.z.len() != self.u.len() {
            return Err(Error::Dimension(format!(
                "state has {} coefficients and {} latent values, sampler expects {} and {}",
                state.beta.len(),
                state.z.len(),
                self.spec.n_beta(),
                self.u.len()
            )));
        }
        if !(state.sigma2 > 0.0 && state.pi > 0.0 && state.pi <= 1.0 && state.c > 0.0) {
            return Err(Error::Domain(format!(
                "state out of support: sigma2 = {}, pi = {}, c = {}",
                state.sigma2, state.pi, state.c
            )));
        }
        self.state = state;
        self.resync();
        self.check_finite()
    }

    pub fn state(&self) -> &SamplerState {
        &self.state
    }

    pub fn set_adapting(&mut self, adapting: bool) {
        self.adapting = adapting;
    }

    pub fn tables(&self) -> &LikelihoodTables {
        &self.tables
    }

    pub fn basis(&self) -> &Arc<SpatialBasis> {
        &self.basis
    }

    pub fn loglik(&self) -> f64 {
        self.loglik
    }

    pub fn stats(&self) -> &IntensityStats {
        &self.stats
    }

    /// Current `log lambda` over the active cells.
    pub fn log_intensity(&self) -> &[f64] {
        &self.eta
    }

    /// Current `lambda` over the active cells.
    pub fn intensity(&self) -> &[f64] {
        &self.lambda
    }

    /// Current latent field `w` over the active cells.
    pub fn latent(&self) -> Vec<f64> {
        let s = self.state.sigma2.sqrt();
        self.u.iter().map(|u| s * u).collect()
    }

    fn c_eff(&self) -> f64 {
        self.state.c * self.spec.window_scale
    }

    fn pi_free(&self) -> bool {
        self.spec.fixed_pi.is_none()
    }

    fn c_free(&self) -> bool {
        self.spec.fixed_c.is_none()
    }

    fn fill_xb(&self, beta: &[f64], out: &mut [f64]) {
        out.fill(beta[0]);
        for (b, x) in beta[1..].iter().zip(&self.design) {
            for (o, xi) in out.iter_mut().zip(x) {
                *o += b * xi;
            }
        }
    }

    fn refresh(&mut self) {
        let mut xb = std::mem::take(&mut self.xb);
        self.fill_xb(&self.state.beta, &mut xb);
        self.xb = xb;
        let s = self.state.sigma2.sqrt();
        for ((e, x), u) in self.eta.iter_mut().zip(&self.xb).zip(&self.u) {
            *e = x + s * u;
        }
        self.stats = self.tables.stats_into(&self.eta, &mut self.lambda);
        self.loglik = self.tables.loglik(&self.stats, self.state.pi, self.c_eff());
    }

    fn resync(&mut self) {
        self.basis.factor.mul_into(&self.state.z, &mut self.u);
        self.refresh();
    }

    fn log_prior_beta(&self, beta: &[f64]) -> f64 {
        self.spec.beta_priors.iter().zip(beta).map(|(p, b)| p.ln_pdf(*b)).sum()
    }

    fn log_pi_terms(&self, pi: f64) -> f64 {
        let aux = &self.spec.auxiliary;
        self.spec.pi_prior.ln_pdf(pi) + log_aux_surface(pi, &aux.surfacing, aux.surfacing_precision)
    }

    fn log_c_terms(&self, c: f64) -> f64 {
        let aux = &self.spec.auxiliary;
        self.spec.c_prior.ln_pdf(c) + log_aux_callrate(c, &aux.call_rates, aux.call_rate_variance)
    }

    /// Unnormalized log posterior in the whitened parameterization.
    pub fn log_posterior(&self) -> f64 {
        let mut lp = self.loglik
            + self.log_prior_beta(&self.state.beta)
            + self.spec.variance_prior.ln_pdf(self.state.sigma2)
            - 0.5 * dot(&self.state.z, &self.state.z);
        if self.pi_free() {
            lp += self.log_pi_terms(self.state.pi);
        }
        if self.c_free() {
            lp += self.log_c_terms(self.state.c);
        }
        lp
    }

    fn check_finite(&self) -> Result<()> {
        let lp = self.log_posterior();
        if lp.is_finite() {
            Ok(())
        } else {
            Err(Error::Divergent {
                iteration: self.iteration,
                state: format!(
                    "beta = {:?}, sigma2 = {}, pi = {}, c = {}, loglik = {}, log posterior = {}, lambda(D) = {}",
                    self.state.beta, self.state.sigma2, self.state.pi, self.state.c, self.loglik, lp, self.stats.total
                ),
            })
        }
    }

    /// Runs one full sweep over all blocks.
    pub fn step(&mut self) -> Result<()> {
        self.iteration += 1;
        if self.iteration % RESYNC_EVERY == 0 {
            self.resync();
        }
        self.update_latent();
        self.update_sigma2_centered();
        self.update_sigma2_whitened();
        self.shift_intercept();
        self.update_beta();
        if self.pi_free() {
            self.update_pi();
        }
        if self.c_free() {
            self.update_c();
        }
        self.check_finite()
    }

    fn update_latent(&mut self) {
        let n = self.u.len();
        for x in self.nu.iter_mut() {
            *x = self.rng.sample(StandardNormal);
        }
        self.basis.factor.mul_into(&self.nu, &mut self.v);
        let s = self.state.sigma2.sqrt();
        let (pi, c_eff) = (self.state.pi, self.c_eff());
        let log_y = self.loglik + self.rng.random::<f64>().ln();
        let mut theta = self.rng.random::<f64>() * TAU;
        let (mut lo, mut hi) = (theta - TAU, theta);
        self.latent_updates += 1;
        loop {
            let (sn, cs) = theta.sin_cos();
            for i in 0..n {
                self.eta_prop[i] = self.xb[i] + s * (self.u[i] * cs + self.v[i] * sn);
            }
            let st = self.tables.stats_into(&self.eta_prop, &mut self.lambda_prop);
            let ll = self.tables.loglik(&st, pi, c_eff);
            if ll > log_y {
                for i in 0..n {
                    self.state.z[i] = self.state.z[i] * cs + self.nu[i] * sn;
                    self.u[i] = self.u[i] * cs + self.v[i] * sn;
                }
                std::mem::swap(&mut self.eta, &mut self.eta_prop);
                std::mem::swap(&mut self.lambda, &mut self.lambda_prop);
                self.stats = st;
                self.loglik = ll;
                return;
            }
            self.latent_shrinks += 1;
            if theta < 0.0 {
                lo = theta;
            } else {
                hi = theta;
            }
            if hi - lo < 1e-12 {
                // The bracket has collapsed onto the current state.
                return;
            }
            theta = self.rng.random_range(lo..hi);
        }
    }

    fn rescale_whitened(&mut self, sigma2_new: f64) {
        let ratio = (self.state.sigma2 / sigma2_new).sqrt();
        for (z, u) in self.state.z.iter_mut().zip(self.u.iter_mut()) {
            *z *= ratio;
            *u *= ratio;
        }
        self.state.sigma2 = sigma2_new;
        self.refresh();
    }

    /// `sigma2 | w`, with `w` held fixed.
    fn update_sigma2_centered(&mut self) {
        let n = self.u.len() as f64;
        let quad = self.state.sigma2 * dot(&self.state.z, &self.state.z);
        let proposal = match self.spec.variance_prior {
            ScalarPrior::InverseGamma { shape, scale } => {
                let g = Gamma::new(shape + 0.5 * n, 1.0 / (scale + 0.5 * quad)).expect("positive parameters");
                Some(1.0 / g.sample(&mut self.rng))
            }
            ScalarPrior::Gamma { .. } => {
                let prior = self.spec.variance_prior;
                let target = |x: f64| prior.ln_pdf(x) - 0.5 * n * x.ln() - quad / (2.0 * x) + x.ln();
                let cur = self.state.sigma2;
                let prop = cur * (self.sigma2_centered.scale() * self.rng.sample::<f64, _>(StandardNormal)).exp();
                let log_ratio = target(prop) - target(cur);
                let ok = metropolis(&mut self.rng, log_ratio);
                self.sigma2_centered.record(log_ratio, ok, self.adapting);
                ok.then_some(prop)
            }
            _ => unreachable!("validated variance prior"),
        };
        if let Some(s2) = proposal {
            if s2 > 0.0 && s2.is_finite() {
                self.rescale_whitened(s2);
            }
        }
    }

    /// `sigma2` with `z` held fixed, so the field scales with it.
    fn update_sigma2_whitened(&mut self) {
        let cur = self.state.sigma2;
        let step = self.sigma2_whitened.scale() * self.rng.sample::<f64, _>(StandardNormal);
        let prop = cur * step.exp();
        let s = prop.sqrt();
        for i in 0..self.u.len() {
            self.eta_prop[i] = self.xb[i] + s * self.u[i];
        }
        let st = self.tables.stats_into(&self.eta_prop, &mut self.lambda_prop);
        let ll = self.tables.loglik(&st, self.state.pi, self.c_eff());
        let prior = self.spec.variance_prior;
        let log_ratio = ll - self.loglik + prior.ln_pdf(prop) - prior.ln_pdf(cur) + step;
        let ok = metropolis(&mut self.rng, log_ratio);
        self.sigma2_whitened.record(log_ratio, ok, self.adapting);
        if ok {
            self.state.sigma2 = prop;
            std::mem::swap(&mut self.eta, &mut self.eta_prop);
            std::mem::swap(&mut self.lambda, &mut self.lambda_prop);
            self.stats = st;
            self.loglik = ll;
        }
    }

    /// Exact draw along `(beta_0 + d, w - d)`. The intensity is unchanged, so
    /// only the intercept prior and the whitened field prior vary along the
    /// line, and the conditional of `d` is Gaussian.
    fn shift_intercept(&mut self) {
        let (m, v) = match self.spec.beta_priors[0] {
            ScalarPrior::Normal { mean, variance } => (mean, variance),
            _ => unreachable!("validated coefficient prior"),
        };
        let s = self.state.sigma2.sqrt();
        let r = &self.basis.whitened_ones;
        let precision = 1.0 / v + self.basis.whitened_ones_norm2 / self.state.sigma2;
        let slope = -(self.state.beta[0] - m) / v + dot(&self.state.z, r) / s;
        let d = slope / precision + self.rng.sample::<f64, _>(StandardNormal) / precision.sqrt();
        self.state.beta[0] += d;
        for ((z, u), ri) in self.state.z.iter_mut().zip(self.u.iter_mut()).zip(r) {
            *z -= d * ri / s;
            *u -= d / s;
        }
        self.refresh();
    }

    fn update_beta(&mut self) {
        let p = self.state.beta.len();
        let eps = DVector::from_iterator(p, (0..p).map(|_| self.rng.sample::<f64, _>(StandardNormal)));
        let step = &self.beta_prop.chol * eps * self.beta_prop.rw.scale();
        let prop: Vec<f64> = self.state.beta.iter().zip(step.iter()).map(|(b, d)| b + d).collect();
        let mut xb = std::mem::take(&mut self.xb_prop);
        self.fill_xb(&prop, &mut xb);
        self.xb_prop = xb;
        let s = self.state.sigma2.sqrt();
        for i in 0..self.u.len() {
            self.eta_prop[i] = self.xb_prop[i] + s * self.u[i];
        }
        let st = self.tables.stats_into(&self.eta_prop, &mut self.lambda_prop);
        let ll = self.tables.loglik(&st, self.state.pi, self.c_eff());
        let log_ratio = ll - self.loglik + self.log_prior_beta(&prop) - self.log_prior_beta(&self.state.beta);
        let ok = metropolis(&mut self.rng, log_ratio);
        self.beta_prop.rw.record(log_ratio, ok, self.adapting);
        if ok {
            self.state.beta = prop;
            std::mem::swap(&mut self.xb, &mut self.xb_prop);
            std::mem::swap(&mut self.eta, &mut self.eta_prop);
            std::mem::swap(&mut self.lambda, &mut self.lambda_prop);
            self.stats = st;
            self.loglik = ll;
        }
        if self.adapting {
            let beta = self.state.beta.clone();
            self.beta_prop.observe(&beta);
        }
    }

    fn update_pi(&mut self) {
        let cur = self.state.pi;
        let logit = (cur / (1.0 - cur)).ln();
        let prop = logistic(logit + self.pi_rw.scale() * self.rng.sample::<f64, _>(StandardNormal));
        if !(prop > 0.0 && prop < 1.0) {
            self.pi_rw.record(f64::NEG_INFINITY, false, self.adapting);
            return;
        }
        let ll_cur = self.tables.aerial_loglik(&self.stats, cur);
        let ll_prop = self.tables.aerial_loglik(&self.stats, prop);
        let jac = |x: f64| x.ln() + (1.0 - x).ln();
        let log_ratio = ll_prop - ll_cur + self.log_pi_terms(prop) - self.log_pi_terms(cur) + jac(prop) - jac(cur);
        let ok = metropolis(&mut self.rng, log_ratio);
        self.pi_rw.record(log_ratio, ok, self.adapting);
        if ok {
            self.state.pi = prop;
            self.loglik += ll_prop - ll_cur;
        }
    }

    fn update_c(&mut self) {
        let cur = self.state.c;
        let step = self.c_rw.scale() * self.rng.sample::<f64, _>(StandardNormal);
        let prop = cur * step.exp();
        let ws = self.spec.window_scale;
        let ll_cur = self.tables.pam_loglik(&self.stats, cur * ws);
        let ll_prop = self.tables.pam_loglik(&self.stats, prop * ws);
        let log_ratio = ll_prop - ll_cur + self.log_c_terms(prop) - self.log_c_terms(cur) + step;
        let ok = metropolis(&mut self.rng, log_ratio);
        self.c_rw.record(log_ratio, ok, self.adapting);
        if ok {
            self.state.c = prop;
            self.loglik += ll_prop - ll_cur;
        }
    }

    /// Clears acceptance counters, for example at the end of burn-in.
    pub fn reset_counters(&mut self) {
        for rw in [
            &mut self.beta_prop.rw,
            &mut self.sigma2_centered,
            &mut self.sigma2_whitened,
            &mut self.pi_rw,
            &mut self.c_rw,
        ] {
            rw.reset_counts();
        }
        self.latent_updates = 0;
        self.latent_shrinks = 0;
    }

    /// Acceptance rate of every Metropolis block that has been proposed.
    pub fn acceptance(&self) -> BTreeMap<String, f64> {
        let mut out = BTreeMap::new();
        for (name, rw) in [
            ("beta", &self.beta_prop.rw),
            ("sigma2_centered", &self.sigma2_centered),
            ("sigma2_whitened", &self.sigma2_whitened),
            ("pi", &self.pi_rw),
            ("c", &self.c_rw),
        ] {
            if let Some(r) = rw.rate() {
                out.insert(name.to_string(), r);
            }
        }
        out
    }

    pub fn latent_shrinks_per_update(&self) -> f64 {
        if self.latent_updates == 0 {
            0.0
        } else {
            self.latent_shrinks as f64 / self.latent_updates as f64
        }
    }
}

/// Fits the model, building the whitening basis for this data.
pub fn mcmc_fit(spec: &ModelSpec, data: &FitData, config: &McmcConfig, seed: u64) -> Result<PosteriorSamples> {
    let basis = Arc::new(SpatialBasis::for_data(data, spec.range)?);
    mcmc_fit_with_basis(spec, data, config, basis, seed)
}

/// Fits the model with a precomputed basis, so several fits on the same
/// grid share one factorization.
pub fn mcmc_fit_with_basis(
    spec: &ModelSpec,
    data: &FitData,
    config: &McmcConfig,
    basis: Arc<SpatialBasis>,
    seed: u64,
) -> Result<PosteriorSamples> {
    config.validate()?;
    let mut sampler = Sampler::new(spec, data, basis, seed)?;
    let active = sampler.basis.active().to_vec();
    let mut position = vec![usize::MAX; data.grid.n_cells()];
    for (i, &c) in active.iter().enumerate() {
        position[c] = i;
    }
    let mut regions = Vec::with_capacity(config.regions.len());
    for r in &config.regions {
        data.grid.ensure_same(r.mask.grid(), &format!("region '{}'", r.name))?;
        let idx: Vec<usize> = r
            .mask
            .active_cells()
            .into_iter()
            .filter_map(|c| (position[c] != usize::MAX).then_some(position[c]))
            .collect();
        regions.push(idx);
    }

    let n = active.len();
    let draws = config.n_draws();
    let area = data.grid.cell_area();
    let mut out = PosteriorSamples {
        grid: data.grid,
        active: active.clone(),
        beta: Vec::with_capacity(draws),
        sigma2: Vec::with_capacity(draws),
        pi: Vec::with_capacity(draws),
        c: Vec::with_capacity(draws),
        loglik: Vec::with_capacity(draws),
        abundance: Vec::with_capacity(draws),
        region_abundance: config.regions.iter().map(|r| (r.name.clone(), Vec::with_capacity(draws))).collect(),
        latent: Vec::new(),
        latent_draws: Vec::new(),
        mean_intensity: GriddedField::constant(data.grid, 0.0),
        mean_log_intensity: GriddedField::constant(data.grid, 0.0),
        meta: RunMeta {
            sources: spec.sources,
            iterations: config.iterations,
            burn_in: config.burn_in,
            thin: config.thin,
            latent_stride: config.latent_stride,
            seed,
            draws,
            acceptance: BTreeMap::new(),
            latent_shrinks_per_iteration: 0.0,
        },
    };
    let mut sum_lambda = vec![0.0; n];
    let mut sum_eta = vec![0.0; n];

    sampler.set_adapting(config.adapt && config.burn_in > 0);
    for it in 0..config.iterations {
        if it == config.burn_in {
            sampler.set_adapting(false);
            sampler.reset_counters();
        }
        sampler.step()?;
        if it < config.burn_in || (it - config.burn_in + 1) % config.thin != 0 {
            continue;
        }
        let k = out.sigma2.len();
        let st = &sampler.state;
        out.beta.push(st.beta.clone());
        out.sigma2.push(st.sigma2);
        out.pi.push(st.pi);
        out.c.push(st.c);
        out.loglik.push(sampler.loglik);
        out.abundance.push(sampler.stats.total);
        for ((_, series), idx) in out.region_abundance.iter_mut().zip(&regions) {
            series.push(area * idx.iter().map(|&i| sampler.lambda[i]).sum::<f64>());
        }
        for i in 0..n {
            sum_lambda[i] += sampler.lambda[i];
            sum_eta[i] += sampler.eta[i];
        }
        if config.latent_stride > 0 && k % config.latent_stride == 0 {
            out.latent.push(sampler.latent());
            out.latent_draws.push(k);
        }
    }
    let d = out.sigma2.len() as f64;
    let mean_l: Vec<f64> = sum_lambda.iter().map(|s| s / d).collect();
    let mean_e: Vec<f64> = sum_eta.iter().map(|s| s / d).collect();
    out.mean_intensity = expand(&data.grid, &active, &mean_l);
    out.mean_log_intensity = expand(&data.grid, &active, &mean_e);
    out.meta.acceptance = sampler.acceptance();
    out.meta.latent_shrinks_per_iteration = sampler.latent_shrinks_per_update();
    Ok(out)
}
