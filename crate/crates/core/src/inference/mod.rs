//! Likelihoods, priors, auxiliary-data models, and the Metropolis-within-Gibbs
//! sampler for the aerial-only, acoustic-only, and fused fitting models.
//!
//! The fitting model is `log lambda(s) = X(s) beta + w(s)` with `w` a
//! mean-zero Gaussian field with exponential covariance of fixed range. Only
//! the product `pi * lambda` is identified by aerial data and only
//! `c * lambda` by acoustic counts, so at least one of `pi` and `c` has to be
//! pinned (fixed or informed by auxiliary data); [`check_identifiability`]
//! enforces that.

mod abundance;
pub mod auxiliary;
mod likelihood;
mod sampler;
mod simulate;

use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma, Normal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF};
use statrs::function::gamma::ln_gamma;

use crate::detection::{AerialDetectionParams, Hydrophone, PamDetectionParams};
use crate::error::{Error, Result};
use crate::grid::{CellMask, GridSpec, GriddedField};
use crate::observe::{AerialObservation, PamObservation};
use crate::transect::Transect;

pub use abundance::{posterior_abundance, predictive_counts, AbundanceDraws};
pub use auxiliary::{
    callrate_gamma_params, log_aux_callrate, log_aux_surface, surface_beta_params,
    DEFAULT_CALL_RATE_VARIANCE, DEFAULT_SURFACING_PRECISION,
};
pub use likelihood::{loglik_aerial, loglik_fused, loglik_pam, IntensityStats, LikelihoodTables};
pub use sampler::{
    mcmc_fit, mcmc_fit_with_basis, McmcConfig, NamedRegion, PosteriorSamples, RunMeta, Sampler,
    SamplerState, SpatialBasis,
};
pub use simulate::simulate_fitting_data;

/// Which observation channels enter the likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sources {
    Aerial,
    Pam,
    #[serde(alias = "fused")]
    Both,
}

impl Sources {
    pub fn aerial(self) -> bool {
        matches!(self, Sources::Aerial | Sources::Both)
    }

    pub fn pam(self) -> bool {
        matches!(self, Sources::Pam | Sources::Both)
    }

    pub fn label(self) -> &'static str {
        match self {
            Sources::Aerial => "aerial",
            Sources::Pam => "pam",
            Sources::Both => "fused",
        }
    }
}

impl std::str::FromStr for Sources {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "aerial" => Ok(Sources::Aerial),
            "pam" => Ok(Sources::Pam),
            "fused" | "both" => Ok(Sources::Both),
            other => Err(Error::Config(format!(
                "unknown model '{other}', expected aerial, pam, or fused"
            ))),
        }
    }
}

/// Univariate prior. Densities are `-inf` outside the support.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ScalarPrior {
    Normal { mean: f64, variance: f64 },
    Uniform { lower: f64, upper: f64 },
    Beta { alpha: f64, beta: f64 },
    Gamma { shape: f64, rate: f64 },
    InverseGamma { shape: f64, scale: f64 },
}

impl ScalarPrior {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            ScalarPrior::Normal { mean, variance } => mean.is_finite() && variance > 0.0 && variance.is_finite(),
            ScalarPrior::Uniform { lower, upper } => lower.is_finite() && upper.is_finite() && lower < upper,
            ScalarPrior::Beta { alpha, beta } => alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite(),
            ScalarPrior::Gamma { shape, rate } => shape > 0.0 && rate > 0.0 && shape.is_finite() && rate.is_finite(),
            ScalarPrior::InverseGamma { shape, scale } => {
                shape > 0.0 && scale > 0.0 && shape.is_finite() && scale.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid prior {self:?}")))
        }
    }

    pub fn support(&self) -> (f64, f64) {
        match *self {
            ScalarPrior::Normal { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            ScalarPrior::Uniform { lower, upper } => (lower, upper),
            ScalarPrior::Beta { .. } => (0.0, 1.0),
            ScalarPrior::Gamma { .. } | ScalarPrior::InverseGamma { .. } => (0.0, f64::INFINITY),
        }
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        if !x.is_finite() {
            return f64::NEG_INFINITY;
        }
        match *self {
            ScalarPrior::Normal { mean, variance } => {
                -0.5 * (2.0 * std::f64::consts::PI * variance).ln() - (x - mean).powi(2) / (2.0 * variance)
            }
            ScalarPrior::Uniform { lower, upper } => {
                if x >= lower && x <= upper {
                    -(upper - lower).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            ScalarPrior::Beta { alpha, beta } => {
                if x > 0.0 && x < 1.0 {
                    statrs::distribution::Beta::new(alpha, beta).expect("validated").ln_pdf(x)
                } else {
                    f64::NEG_INFINITY
                }
            }
            ScalarPrior::Gamma { shape, rate } => {
                if x > 0.0 {
                    shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * x.ln() - rate * x
                } else {
                    f64::NEG_INFINITY
                }
            }
            ScalarPrior::InverseGamma { shape, scale } => {
                // Closed form: the density itself underflows far in the tails.
                if x > 0.0 {
                    shape * scale.ln() - ln_gamma(shape) - (shape + 1.0) * x.ln() - scale / x
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            ScalarPrior::Normal { mean, variance } => statrs::distribution::Normal::new(mean, variance.sqrt())
                .expect("validated")
                .cdf(x),
            ScalarPrior::Uniform { lower, upper } => ((x - lower) / (upper - lower)).clamp(0.0, 1.0),
            ScalarPrior::Beta { alpha, beta } => {
                statrs::distribution::Beta::new(alpha, beta).expect("validated").cdf(x.clamp(0.0, 1.0))
            }
            ScalarPrior::Gamma { shape, rate } => {
                statrs::distribution::Gamma::new(shape, rate).expect("validated").cdf(x.max(0.0))
            }
            ScalarPrior::InverseGamma { shape, scale } => {
                if x <= 0.0 {
                    0.0
                } else {
                    statrs::distribution::InverseGamma::new(shape, scale)
                        .expect("validated")
                        .cdf(x)
                }
            }
        }
    }

    /// `None` when the mean does not exist.
    pub fn mean(&self) -> Option<f64> {
        match *self {
            ScalarPrior::Normal { mean, .. } => Some(mean),
            ScalarPrior::Uniform { lower, upper } => Some(0.5 * (lower + upper)),
            ScalarPrior::Beta { alpha, beta } => Some(alpha / (alpha + beta)),
            ScalarPrior::Gamma { shape, rate } => Some(shape / rate),
            ScalarPrior::InverseGamma { shape, scale } => (shape > 1.0).then(|| scale / (shape - 1.0)),
        }
    }

    /// A central point of the distribution, used for initialization: the mean
    /// when it exists, otherwise the median.
    pub fn center(&self) -> f64 {
        self.mean().unwrap_or_else(|| match *self {
            ScalarPrior::InverseGamma { shape, scale } => statrs::distribution::InverseGamma::new(shape, scale)
                .expect("validated")
                .inverse_cdf(0.5),
            _ => unreachable!("only the inverse gamma can lack a mean"),
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            ScalarPrior::Normal { mean, variance } => Normal::new(mean, variance.sqrt()).expect("validated").sample(rng),
            ScalarPrior::Uniform { lower, upper } => rng.random_range(lower..upper),
            ScalarPrior::Beta { alpha, beta } => Beta::new(alpha, beta).expect("validated").sample(rng),
            ScalarPrior::Gamma { shape, rate } => Gamma::new(shape, 1.0 / rate).expect("validated").sample(rng),
            ScalarPrior::InverseGamma { shape, scale } => {
                1.0 / Gamma::new(shape, 1.0 / scale).expect("validated").sample(rng)
            }
        }
    }
}

/// Auxiliary observations informing the call rate and the surfacing fraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AuxiliaryData {
    /// Observed call rates, each modelled as Gamma with mean `c`.
    pub call_rates: Vec<f64>,
    pub call_rate_variance: f64,
    /// Observed surfacing fractions, each Beta with mean `pi`.
    pub surfacing: Vec<f64>,
    pub surfacing_precision: f64,
}

impl Default for AuxiliaryData {
    fn default() -> Self {
        AuxiliaryData {
            call_rates: Vec::new(),
            call_rate_variance: DEFAULT_CALL_RATE_VARIANCE,
            surfacing: Vec::new(),
            surfacing_precision: DEFAULT_SURFACING_PRECISION,
        }
    }
}

impl AuxiliaryData {
    pub fn validate(&self) -> Result<()> {
        if !(self.call_rate_variance > 0.0 && self.call_rate_variance.is_finite()) {
            return Err(Error::Config(format!(
                "call-rate variance must be positive, got {}",
                self.call_rate_variance
            )));
        }
        if !(self.surfacing_precision > 0.0 && self.surfacing_precision.is_finite()) {
            return Err(Error::Config(format!(
                "surfacing precision must be positive, got {}",
                self.surfacing_precision
            )));
        }
        if let Some(x) = self.call_rates.iter().find(|&&x| !(x > 0.0 && x.is_finite())) {
            return Err(Error::Config(format!("call-rate observations must be positive, got {x}")));
        }
        if let Some(x) = self.surfacing.iter().find(|&&x| !(x > 0.0 && x < 1.0)) {
            return Err(Error::Config(format!(
                "surfacing observations must lie in (0, 1), got {x}"
            )));
        }
        Ok(())
    }
}

/// Everything about the fitting model except the data.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub sources: Sources,
    /// Covariate fields, not including the intercept.
    pub covariates: Vec<GriddedField>,
    /// Normal priors for the intercept followed by one per covariate.
    pub beta_priors: Vec<ScalarPrior>,
    /// Inverse gamma (conjugate) or gamma prior on the field variance.
    pub variance_prior: ScalarPrior,
    /// Exponential-kernel range parameter `phi` (km); correlation is
    /// `exp(-d / phi)`.
    pub range: f64,
    pub pi_prior: ScalarPrior,
    pub fixed_pi: Option<f64>,
    pub c_prior: ScalarPrior,
    pub fixed_c: Option<f64>,
    pub auxiliary: AuxiliaryData,
    /// Multiplies `c` to convert a per-hour call rate into the expected calls
    /// per observation window.
    pub window_scale: f64,
    /// Skip the identifiability guard.
    pub allow_nonidentifiable: bool,
}

impl ModelSpec {
    /// Intercept-only model with vague priors: `beta_0 ~ N(0, 1000^2)`,
    /// `sigma2 ~ InvGamma(2, 2)`, `phi = 3`, `pi ~ U(0, 1)`, `c ~ U(0, 100)`.
    pub fn intercept_only(sources: Sources) -> Self {
        ModelSpec {
            sources,
            covariates: Vec::new(),
            beta_priors: vec![ScalarPrior::Normal {
                mean: 0.0,
                variance: 1.0e6,
            }],
            variance_prior: ScalarPrior::InverseGamma { shape: 2.0, scale: 2.0 },
            range: 3.0,
            pi_prior: ScalarPrior::Uniform { lower: 0.0, upper: 1.0 },
            fixed_pi: None,
            c_prior: ScalarPrior::Uniform { lower: 0.0, upper: 100.0 },
            fixed_c: None,
            auxiliary: AuxiliaryData::default(),
            window_scale: 1.0,
            allow_nonidentifiable: false,
        }
    }

    pub fn n_beta(&self) -> usize {
        self.covariates.len() + 1
    }

    pub fn pi_pinned(&self) -> bool {
        self.fixed_pi.is_some() || !self.auxiliary.surfacing.is_empty()
    }

    pub fn c_pinned(&self) -> bool {
        self.fixed_c.is_some() || !self.auxiliary.call_rates.is_empty()
    }

    pub fn validate(&self, grid: &GridSpec) -> Result<()> {
        if self.beta_priors.len() != self.n_beta() {
            return Err(Error::Dimension(format!(
                "{} coefficient priors for {} covariates plus intercept",
                self.beta_priors.len(),
                self.covariates.len()
            )));
        }
        for p in &self.beta_priors {
            p.validate()?;
            if !matches!(p, ScalarPrior::Normal { .. }) {
                return Err(Error::Config(format!("coefficient priors must be normal, got {p:?}")));
            }
        }
        for (j, x) in self.covariates.iter().enumerate() {
            grid.ensure_same(x.grid(), &format!("covariate {}", j + 1))?;
        }
        self.variance_prior.validate()?;
        if !matches!(
            self.variance_prior,
            ScalarPrior::InverseGamma { .. } | ScalarPrior::Gamma { .. }
        ) {
            return Err(Error::Config(format!(
                "field variance prior must be inverse gamma or gamma, got {:?}",
                self.variance_prior
            )));
        }
        if !(self.range > 0.0 && self.range.is_finite()) {
            return Err(Error::Config(format!("range must be positive, got {}", self.range)));
        }
        self.pi_prior.validate()?;
        let (lo, hi) = self.pi_prior.support();
        if lo < 0.0 || hi > 1.0 {
            return Err(Error::Config(format!(
                "surfacing prior support [{lo}, {hi}] leaves [0, 1]"
            )));
        }
        self.c_prior.validate()?;
        if self.c_prior.support().0 < 0.0 {
            return Err(Error::Config("call-rate prior must be supported on c >= 0".into()));
        }
        if let Some(pi) = self.fixed_pi {
            if !(pi > 0.0 && pi <= 1.0) {
                return Err(Error::Config(format!("fixed surfacing probability {pi} outside (0, 1]")));
            }
        }
        if let Some(c) = self.fixed_c {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::Config(format!("fixed call rate must be positive, got {c}")));
            }
        }
        if !(self.window_scale > 0.0 && self.window_scale.is_finite()) {
            return Err(Error::Config(format!(
                "window scale must be positive, got {}",
                self.window_scale
            )));
        }
        self.auxiliary.validate()
    }
}

/// Refuses specifications whose intensity scale is confounded with a free
/// detection scale. Aerial data identify `pi * lambda`, acoustic data
/// `c * lambda`; a scale counts as pinned when fixed or backed by auxiliary
/// observations.
pub fn check_identifiability(spec: &ModelSpec) -> Result<()> {
    if spec.allow_nonidentifiable {
        return Ok(());
    }
    let problem = match spec.sources {
        Sources::Aerial if !spec.pi_pinned() => {
            Some("aerial-only fit needs the surfacing probability fixed or auxiliary surfacing data")
        }
        Sources::Pam if !spec.c_pinned() => {
            Some("acoustic-only fit needs the call rate fixed or auxiliary call-rate data")
        }
        Sources::Both if !spec.pi_pinned() && !spec.c_pinned() => Some(
            "fused fit needs the surfacing probability or the call rate fixed or backed by auxiliary data",
        ),
        _ => None,
    };
    match problem {
        Some(msg) => Err(Error::NonIdentifiable(msg.into())),
        None => Ok(()),
    }
}

/// Observations and survey geometry for one fit.
#[derive(Debug, Clone)]
pub struct FitData {
    pub grid: GridSpec,
    /// Cells outside the study region (land, NODATA) are excluded when set.
    pub mask: Option<CellMask>,
    pub transects: Vec<Transect>,
    pub aerial: Vec<AerialObservation>,
    /// Only the plateau is used; the surfacing probability is a model
    /// parameter.
    pub aerial_params: AerialDetectionParams,
    pub hydrophones: Vec<Hydrophone>,
    pub pam: Vec<PamObservation>,
    pub pam_params: PamDetectionParams,
}

impl FitData {
    pub fn new(grid: GridSpec) -> Self {
        FitData {
            grid,
            mask: None,
            transects: Vec::new(),
            aerial: Vec::new(),
            aerial_params: AerialDetectionParams::default(),
            hydrophones: Vec::new(),
            pam: Vec::new(),
            pam_params: PamDetectionParams::default(),
        }
    }

    /// Indices of the cells in the study region.
    pub fn active_cells(&self) -> Vec<usize> {
        match &self.mask {
            Some(m) => m.active_cells(),
            None => (0..self.grid.n_cells()).collect(),
        }
    }

    /// Detections grouped in transect order; transects without an
    /// observation block contribute none.
    pub(crate) fn detections_by_transect(&self) -> Result<Vec<&[crate::grid::Point]>> {
        let mut out: Vec<&[crate::grid::Point]> = vec![&[]; self.transects.len()];
        let mut seen = vec![false; self.transects.len()];
        for obs in &self.aerial {
            let idx = self
                .transects
                .iter()
                .position(|t| t.id() == obs.transect_id)
                .ok_or_else(|| Error::Config(format!("observations for unknown transect '{}'", obs.transect_id)))?;
            if seen[idx] {
                return Err(Error::Config(format!(
                    "transect '{}' has more than one observation block",
                    obs.transect_id
                )));
            }
            seen[idx] = true;
            out[idx] = &obs.detections;
        }
        Ok(out)
    }

    /// Counts in hydrophone order; every hydrophone needs exactly one count.
    pub(crate) fn counts_by_hydrophone(&self) -> Result<Vec<u64>> {
        pam_counts_in_order(&self.pam, &self.hydrophones)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(m) = &self.mask {
            self.grid.ensure_same(m.grid(), "study-region mask")?;
            if m.count() == 0 {
                return Err(Error::Config("study-region mask has no active cells".into()));
            }
        }
        self.aerial_params.validate()?;
        self.pam_params.validate()?;
        for t in &self.transects {
            t.check_within(&self.grid)?;
        }
        for h in &self.hydrophones {
            h.check_within(&self.grid)?;
        }
        for (t, dets) in self.transects.iter().zip(self.detections_by_transect()?) {
            for p in dets {
                match self.grid.cell_of(p) {
                    Some(cell) if self.mask.as_ref().map_or(true, |m| m.contains_cell(cell)) => {}
                    _ => {
                        return Err(Error::Domain(format!(
                            "detection ({}, {}) on transect '{}' is outside the study region",
                            p.x,
                            p.y,
                            t.id()
                        )))
                    }
                }
            }
        }
        self.counts_by_hydrophone()?;
        Ok(())
    }
}

pub(crate) fn pam_counts_in_order(pam: &[PamObservation], hydrophones: &[Hydrophone]) -> Result<Vec<u64>> {
    let mut counts = vec![None; hydrophones.len()];
    for obs in pam {
        let idx = hydrophones
            .iter()
            .position(|h| h.id == obs.hydrophone_id)
            .ok_or_else(|| Error::Config(format!("count for unknown hydrophone '{}'", obs.hydrophone_id)))?;
        if counts[idx].replace(obs.count).is_some() {
            return Err(Error::Config(format!(
                "hydrophone '{}' has more than one count",
                obs.hydrophone_id
            )));
        }
    }
    counts
        .into_iter()
        .zip(hydrophones)
        .map(|(c, h)| c.ok_or_else(|| Error::Config(format!("no count for hydrophone '{}'", h.id))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::stats;

    #[test]
    fn identifiability_guard() {
        let mut spec = ModelSpec::intercept_only(Sources::Pam);
        assert!(matches!(check_identifiability(&spec), Err(Error::NonIdentifiable(_))));
        spec.fixed_c = Some(6.0);
        assert!(check_identifiability(&spec).is_ok());

        let mut spec = ModelSpec::intercept_only(Sources::Aerial);
        spec.fixed_c = Some(6.0);
        assert!(check_identifiability(&spec).is_err());
        spec.auxiliary.surfacing = vec![0.6, 0.7];
        assert!(check_identifiability(&spec).is_ok());

        let mut spec = ModelSpec::intercept_only(Sources::Both);
        assert!(check_identifiability(&spec).is_err());
        spec.auxiliary.call_rates = vec![4.0];
        assert!(check_identifiability(&spec).is_ok());

        let mut spec = ModelSpec::intercept_only(Sources::Both);
        spec.allow_nonidentifiable = true;
        assert!(check_identifiability(&spec).is_ok());
    }

    #[test]
    fn sources_parse() {
        assert_eq!("fused".parse::<Sources>().unwrap(), Sources::Both);
        assert_eq!("pam".parse::<Sources>().unwrap(), Sources::Pam);
        assert!("both-ish".parse::<Sources>().is_err());
    }

    #[test]
    fn prior_samples_match_cdf() {
        let priors = [
            ScalarPrior::Normal { mean: 1.0, variance: 4.0 },
            ScalarPrior::Uniform { lower: 0.0, upper: 100.0 },
            ScalarPrior::Beta { alpha: 9.75, beta: 5.25 },
            ScalarPrior::Gamma { shape: 2.0, rate: 2.0 },
            ScalarPrior::InverseGamma { shape: 2.0, scale: 2.0 },
        ];
        for (i, p) in priors.iter().enumerate() {
            let mut r = rng::seeded(i as u64);
            let xs: Vec<f64> = (0..5000).map(|_| p.sample(&mut r)).collect();
            let (_, pv) = stats::ks_test(&xs, |x| p.cdf(x));
            assert!(pv > 0.001, "{p:?}: p = {pv}");
        }
    }

    #[test]
    fn prior_densities_integrate_to_one() {
        let priors = [
            ScalarPrior::Normal { mean: 1.0, variance: 4.0 },
            ScalarPrior::Beta { alpha: 2.0, beta: 3.0 },
            ScalarPrior::Gamma { shape: 2.0, rate: 2.0 },
            ScalarPrior::InverseGamma { shape: 3.0, scale: 2.0 },
        ];
        for p in priors {
            let (lo, hi) = match p.support() {
                (a, _) if a.is_infinite() => (-30.0, 30.0),
                (a, b) if b.is_infinite() => (a, 200.0),
                s => s,
            };
            let n = 400_000;
            let h = (hi - lo) / n as f64;
            let total: f64 = (0..n).map(|i| p.ln_pdf(lo + (i as f64 + 0.5) * h).exp() * h).sum();
            assert!((total - 1.0).abs() < 1e-3, "{p:?}: {total}");
        }
        assert_eq!(ScalarPrior::Uniform { lower: 0.0, upper: 1.0 }.ln_pdf(1.5), f64::NEG_INFINITY);
    }

    #[test]
    fn log_densities_stay_finite_in_the_tails() {
        let ig = ScalarPrior::InverseGamma { shape: 2.0, scale: 2.0 };
        // ln(4) - 3 ln(0.0025) - 800
        let expect = 4f64.ln() - 3.0 * 0.0025f64.ln() - 800.0;
        assert!((ig.ln_pdf(0.0025) - expect).abs() < 1e-9);
        assert!(ig.ln_pdf(1e-6).is_finite());
        let g = ScalarPrior::Gamma { shape: 2.0, rate: 2.0 };
        assert!((g.ln_pdf(900.0) - (4f64.ln() + 900f64.ln() - 1800.0)).abs() < 1e-9);
        assert!(ScalarPrior::Beta { alpha: 2.0, beta: 3.0 }.ln_pdf(1e-200).is_finite());
    }

    #[test]
    fn inverse_gamma_without_mean_centers_on_median() {
        let p = ScalarPrior::InverseGamma { shape: 1.0, scale: 2.0 };
        assert!(p.mean().is_none());
        assert!((p.cdf(p.center()) - 0.5).abs() < 1e-9);
        assert_eq!(ScalarPrior::InverseGamma { shape: 2.0, scale: 2.0 }.mean(), Some(2.0));
    }

    #[test]
    fn spec_validation() {
        let g = GridSpec::new(crate::grid::Bounds::new(0.0, 4.0, 0.0, 4.0), 1.0).unwrap();
        let mut spec = ModelSpec::intercept_only(Sources::Both);
        assert!(spec.validate(&g).is_ok());
        spec.variance_prior = ScalarPrior::Normal { mean: 0.0, variance: 1.0 };
        assert!(spec.validate(&g).is_err());
        let mut spec = ModelSpec::intercept_only(Sources::Both);
        spec.covariates.push(GriddedField::constant(g, 1.0));
        assert!(matches!(spec.validate(&g), Err(Error::Dimension(_))));
        let mut spec = ModelSpec::intercept_only(Sources::Both);
        spec.pi_prior = ScalarPrior::Gamma { shape: 1.0, rate: 1.0 };
        assert!(spec.validate(&g).is_err());
    }
}
