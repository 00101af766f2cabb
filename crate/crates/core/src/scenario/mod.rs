//! Simulation-study design: known truth, survey layouts at three sampling
//! levels, the fifteen-scenario design, and the sweep that fits every
//! scenario with each data source alone and fused.
//!
//! Fits are keyed by the data they see. A single-source fit shared by
//! several scenarios (the aerial-only fit is the same for every PAM level)
//! runs once per replicate and is reported under each scenario.

mod ccb;
mod summary;

use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detection::{AerialDetectionParams, Hydrophone, PamDetectionParams};
use crate::error::{Error, Result};
use crate::gp::{sample_gp, ExpCovariance};
use crate::grid::{Bounds, CellMask, GridSpec, GriddedField, Point};
use crate::inference::{mcmc_fit_with_basis, FitData, McmcConfig, ModelSpec, NamedRegion, Sources, SpatialBasis};
use crate::lgcp::{build_intensity, simulate_pattern, IntensityModel, PointPattern};
use crate::metrics::{evaluate, rmse_log_intensity_masked, EvaluationReport};
use crate::observe::{simulate_aerial, simulate_pam};
use crate::rng::derive_seed;
use crate::transect::Transect;

pub use ccb::{ccb_preset, run_ccb, CcbFit, CcbOutcome, CcbPreset, CCB_NOISE_DB};
pub use summary::{
    abundance_table, detectability_table, main_table, region_table, sampling_intensity_table, summarize_fits,
    trend_checks, FitSummary, ModelComparison, RegionAverage, TableRow, Trend, TrendChecks,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Low,
    Moderate,
    High,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::Low, Level::Moderate, Level::High];

    /// 0, 1, 2 from low to high.
    pub fn rank(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            Level::Low => "low",
            Level::Moderate => "moderate",
            Level::High => "high",
        }
    }
}

/// One value per level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelValues<T> {
    pub low: T,
    pub moderate: T,
    pub high: T,
}

impl<T: Copy> LevelValues<T> {
    pub fn get(&self, level: Level) -> T {
        match level {
            Level::Low => self.low,
            Level::Moderate => self.moderate,
            Level::High => self.high,
        }
    }
}

/// The factor levels of one scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: usize,
    pub abundance: Level,
    pub aerial: Level,
    pub pam: Level,
    pub surfacing: Level,
    pub calls: Level,
}

/// The fifteen scenarios: 1-9 cross aerial and PAM sampling intensity,
/// 10-13 cross surfacing probability and call rate, 14-15 vary abundance.
/// Every factor not varied is moderate.
pub fn design() -> Vec<Scenario> {
    use Level::*;
    let m = Scenario {
        id: 0,
        abundance: Moderate,
        aerial: Moderate,
        pam: Moderate,
        surfacing: Moderate,
        calls: Moderate,
    };
    let mut out = Vec::with_capacity(15);
    for pam in Level::ALL {
        for aerial in Level::ALL {
            out.push(Scenario {
                id: out.len() + 1,
                aerial,
                pam,
                ..m
            });
        }
    }
    for (surfacing, calls) in [(Low, Low), (Low, High), (High, Low), (High, High)] {
        out.push(Scenario {
            id: out.len() + 1,
            surfacing,
            calls,
            ..m
        });
    }
    for abundance in [Low, High] {
        out.push(Scenario {
            id: out.len() + 1,
            abundance,
            ..m
        });
    }
    out
}

/// The scenario with all factors moderate.
pub const MODERATE_SCENARIO: usize = 5;

/// `count` east-west transects at `y = (i + 1/2) * side / count`.
pub fn transect_layout(count: usize, side_km: f64) -> Result<Vec<Transect>> {
    (0..count)
        .map(|i| Transect::horizontal(format!("T{}", i + 1), (i as f64 + 0.5) * side_km / count as f64, 0.0, side_km))
        .collect()
}

/// A `side x side` array of hydrophones at the centers of equal blocks.
pub fn hydrophone_layout(side: usize, side_km: f64) -> Vec<Hydrophone> {
    let step = side_km / side as f64;
    (0..side * side)
        .map(|k| {
            let (row, col) = (k / side, k % side);
            Hydrophone::new(
                format!("H{}", k + 1),
                Point::new((col as f64 + 0.5) * step, (row as f64 + 0.5) * step),
                None,
            )
        })
        .collect()
}

/// Iteration budget of every fit in a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepMcmc {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub latent_stride: usize,
}

impl Default for SweepMcmc {
    fn default() -> Self {
        SweepMcmc {
            iterations: 20_000,
            burn_in: 5_000,
            thin: 1,
            latent_stride: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub transects: LevelValues<usize>,
    /// Hydrophones per side of the square array.
    pub hydrophone_side: LevelValues<usize>,
    pub surfacing: LevelValues<f64>,
    pub call_rate: LevelValues<f64>,
    /// Multiplier of the moderate true intensity.
    pub abundance_scale: LevelValues<f64>,
    pub replicates: usize,
    /// Scenario ids to run; empty runs all fifteen.
    pub scenarios: Vec<usize>,
    pub side_km: f64,
    pub resolution_km: f64,
    /// Intercept then one slope per covariate.
    pub beta: Vec<f64>,
    pub covariate_variance: f64,
    pub covariate_range: f64,
    /// Range parameter of the fitted latent field.
    pub fit_range: f64,
    pub noise_db: f64,
    pub mcmc: SweepMcmc,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            transects: LevelValues {
                low: 4,
                moderate: 8,
                high: 16,
            },
            hydrophone_side: LevelValues {
                low: 2,
                moderate: 3,
                high: 4,
            },
            surfacing: LevelValues {
                low: 0.15,
                moderate: 0.40,
                high: 0.65,
            },
            call_rate: LevelValues {
                low: 3.0,
                moderate: 6.0,
                high: 12.0,
            },
            abundance_scale: LevelValues {
                low: 0.5,
                moderate: 1.0,
                high: 2.0,
            },
            replicates: 1,
            scenarios: Vec::new(),
            side_km: 40.0,
            resolution_km: 1.0,
            beta: vec![-3.8, 0.3, 0.6, 0.9],
            covariate_variance: 1.0,
            covariate_range: 3.0,
            fit_range: 3.0,
            noise_db: 104.0,
            mcmc: SweepMcmc::default(),
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.replicates == 0 {
            return bad("sweep needs at least one replicate".into());
        }
        if let Some(id) = self.scenarios.iter().find(|&&id| !(1..=15).contains(&id)) {
            return bad(format!("scenario id {id} is not in 1..=15"));
        }
        for l in Level::ALL {
            if self.transects.get(l) == 0 || self.hydrophone_side.get(l) == 0 {
                return bad(format!("{} sampling level has no transects or hydrophones", l.label()));
            }
            let pi = self.surfacing.get(l);
            if !(pi > 0.0 && pi <= 1.0) {
                return bad(format!("surfacing probability {pi} is not in (0, 1]"));
            }
            if !(self.call_rate.get(l) > 0.0) || !(self.abundance_scale.get(l) > 0.0) {
                return bad(format!("{} call rate and abundance scale must be positive", l.label()));
            }
        }
        if self.beta.is_empty() {
            return bad("beta needs an intercept".into());
        }
        if !(self.covariate_variance > 0.0 && self.covariate_range > 0.0 && self.fit_range > 0.0) {
            return bad("covariate variance and ranges must be positive".into());
        }
        let m = &self.mcmc;
        if m.thin == 0 || m.burn_in >= m.iterations {
            return bad(format!(
                "sweep MCMC needs thin >= 1 and burn-in {} below iterations {}",
                m.burn_in, m.iterations
            ));
        }
        self.grid().map(|_| ())
    }

    pub fn grid(&self) -> Result<GridSpec> {
        GridSpec::new(Bounds::new(0.0, self.side_km, 0.0, self.side_km), self.resolution_km)
    }

    pub fn selected(&self) -> Vec<Scenario> {
        design()
            .into_iter()
            .filter(|s| self.scenarios.is_empty() || self.scenarios.contains(&s.id))
            .collect()
    }

    pub fn mcmc_config(&self) -> Result<McmcConfig> {
        let mut cfg = McmcConfig::new(self.mcmc.iterations, self.mcmc.burn_in);
        cfg.thin = self.mcmc.thin;
        cfg.latent_stride = self.mcmc.latent_stride.max(1);
        cfg.regions = subregions(&self.grid()?)
            .into_iter()
            .map(|(name, mask)| NamedRegion { name, mask })
            .collect();
        Ok(cfg)
    }
}

/// Three small square subregions across the middle of the domain, each a
/// fifth of the side wide: `left`, `middle` and `right`.
pub fn subregions(grid: &GridSpec) -> Vec<(String, CellMask)> {
    let b = grid.bounds();
    let w = b.x_max - b.x_min;
    let h = b.y_max - b.y_min;
    let (y0, y1) = (b.y_min + 0.4 * h, b.y_min + 0.6 * h);
    [("left", 0.05), ("middle", 0.4), ("right", 0.75)]
        .into_iter()
        .map(|(name, x)| {
            let x0 = b.x_min + x * w;
            (name.to_string(), CellMask::rectangle(*grid, Bounds::new(x0, x0 + 0.2 * w, y0, y1)))
        })
        .collect()
}

/// Covariates and the moderate true intensity of one replicate.
#[derive(Debug, Clone)]
pub struct Truth {
    pub covariates: Vec<GriddedField>,
    pub moderate_intensity: GriddedField,
}

impl Truth {
    pub fn intensity(&self, scale: f64) -> Result<GriddedField> {
        self.moderate_intensity.map(|v| v * scale)
    }
}

/// Independent mean-zero exponential GP covariates and the log-linear
/// intensity they define.
pub fn simulate_truth(spec: &SweepSpec, seed: u64) -> Result<Truth> {
    let grid = spec.grid()?;
    let cov = ExpCovariance::new(spec.covariate_variance, spec.covariate_range)?;
    let covariates = (1..spec.beta.len())
        .map(|j| sample_gp(&grid, &cov, derive_seed(seed, j as u64)))
        .collect::<Result<Vec<_>>>()?;
    let model = IntensityModel::new(spec.beta.clone(), covariates.clone(), None)?;
    Ok(Truth {
        moderate_intensity: build_intensity(&model, &grid)?,
        covariates,
    })
}

/// Which data a fit sees. Single-source fits ignore the other channel's
/// factors, so scenarios that differ only there share the fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FitKey {
    pub abundance: Level,
    /// Aerial sampling level and surfacing level.
    pub aerial: Option<(Level, Level)>,
    /// PAM sampling level and call-rate level.
    pub pam: Option<(Level, Level)>,
}

impl FitKey {
    pub fn new(s: &Scenario, sources: Sources) -> FitKey {
        FitKey {
            abundance: s.abundance,
            aerial: sources.aerial().then_some((s.aerial, s.surfacing)),
            pam: sources.pam().then_some((s.pam, s.calls)),
        }
    }

    pub fn sources(&self) -> Sources {
        match (self.aerial.is_some(), self.pam.is_some()) {
            (true, true) => Sources::Both,
            (true, false) => Sources::Aerial,
            _ => Sources::Pam,
        }
    }

    fn seed_label(&self) -> u64 {
        let code = |o: Option<(Level, Level)>| o.map_or(0, |(a, b)| 1 + 3 * a.rank() + b.rank()) as u64;
        self.abundance.rank() as u64 * 100 + code(self.aerial) * 10 + code(self.pam)
    }
}

const MODELS: [Sources; 3] = [Sources::Aerial, Sources::Pam, Sources::Both];

/// One fitted model on one replicate, as reported under one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRow {
    pub scenario: usize,
    pub replicate: usize,
    pub model: String,
    pub abundance_level: Level,
    pub aerial_level: Level,
    pub pam_level: Level,
    pub surfacing_level: Level,
    pub calls_level: Level,
    pub true_count: Option<u64>,
    pub expected_abundance: Option<f64>,
    pub abundance_mean: Option<f64>,
    pub abundance_sd: Option<f64>,
    pub lower_95: Option<f64>,
    pub upper_95: Option<f64>,
    pub covers: Option<bool>,
    pub rmse_log_intensity: Option<f64>,
    pub rps: Option<f64>,
    pub loglik_mean: Option<f64>,
    pub loglik_sd: Option<f64>,
    pub intensity_l1: Option<f64>,
    pub intensity_l2: Option<f64>,
    pub error: Option<String>,
}

impl FitRow {
    pub fn ok(&self) -> bool {
        self.error.is_none()
    }
}

/// Abundance and log-intensity RMSE of one fit within one subregion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionRow {
    pub scenario: usize,
    pub replicate: usize,
    pub model: String,
    pub region: String,
    pub true_count: u64,
    pub expected_abundance: f64,
    pub abundance_mean: f64,
    pub abundance_sd: f64,
    pub rmse_log_intensity: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepOutput {
    pub rows: Vec<FitRow>,
    pub regions: Vec<RegionRow>,
}

impl SweepOutput {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| !r.ok()).count()
    }
}

struct Replicate {
    truth: Truth,
    patterns: BTreeMap<Level, PointPattern>,
}

struct FitResult {
    report: EvaluationReport,
    region_rmse: Vec<f64>,
}

fn replicate_seed(seed: u64, replicate: usize) -> u64 {
    derive_seed(seed, replicate as u64 + 1)
}

fn build_replicate(spec: &SweepSpec, scenarios: &[Scenario], seed: u64) -> Result<Replicate> {
    let truth = simulate_truth(spec, derive_seed(seed, 1))?;
    let mut patterns = BTreeMap::new();
    for s in scenarios {
        if let std::collections::btree_map::Entry::Vacant(slot) = patterns.entry(s.abundance) {
            let intensity = truth.intensity(spec.abundance_scale.get(s.abundance))?;
            slot.insert(simulate_pattern(&intensity, derive_seed(seed, 10 + s.abundance.rank() as u64))?);
        }
    }
    Ok(Replicate { truth, patterns })
}

/// Observed data for `key`: aerial detections depend on the abundance,
/// aerial and surfacing levels only, PAM counts on the abundance, PAM and
/// call-rate levels only, so every fit seeing a channel sees the same draw.
pub fn survey_data(
    spec: &SweepSpec,
    key: &FitKey,
    pattern: &PointPattern,
    replicate_seed: u64,
) -> Result<(FitData, f64, f64)> {
    let mut data = FitData::new(spec.grid()?);
    data.pam_params = PamDetectionParams::with_noise(spec.noise_db);
    let mut pi = spec.surfacing.moderate;
    let mut c = spec.call_rate.moderate;
    if let Some((level, surf)) = key.aerial {
        pi = spec.surfacing.get(surf);
        data.transects = transect_layout(spec.transects.get(level), spec.side_km)?;
        data.aerial_params = AerialDetectionParams::with_pi(pi)?;
        let label = 1000 + 100 * key.abundance.rank() + 10 * level.rank() + surf.rank();
        data.aerial = simulate_aerial(
            pattern,
            &data.transects,
            &data.aerial_params,
            derive_seed(replicate_seed, label as u64),
        )?;
    }
    if let Some((level, calls)) = key.pam {
        c = spec.call_rate.get(calls);
        data.hydrophones = hydrophone_layout(spec.hydrophone_side.get(level), spec.side_km);
        let label = 2000 + 100 * key.abundance.rank() + 10 * level.rank() + calls.rank();
        data.pam = simulate_pam(
            pattern,
            &data.hydrophones,
            c,
            &data.pam_params,
            derive_seed(replicate_seed, label as u64),
        )?;
    }
    Ok((data, pi, c))
}

/// The simulation-study model: intercept only, `beta_0 ~ N(0, 1000^2)`,
/// `sigma2 ~ InvGamma(2, 2)`, fixed range, and `pi` and `c` fixed at their
/// true values.
pub fn study_model(sources: Sources, range: f64, pi: f64, c: f64) -> ModelSpec {
    let mut spec = ModelSpec::intercept_only(sources);
    spec.range = range;
    spec.fixed_pi = Some(pi);
    spec.fixed_c = Some(c);
    spec
}

fn run_fit(
    spec: &SweepSpec,
    key: &FitKey,
    rep: &Replicate,
    basis: &Arc<SpatialBasis>,
    cfg: &McmcConfig,
    rseed: u64,
) -> Result<FitResult> {
    let pattern = &rep.patterns[&key.abundance];
    let (data, pi, c) = survey_data(spec, key, pattern, rseed)?;
    let model = study_model(key.sources(), spec.fit_range, pi, c);
    let fit_seed = derive_seed(rseed, 5000 + key.seed_label());
    let samples = mcmc_fit_with_basis(&model, &data, cfg, Arc::clone(basis), fit_seed)?;
    let truth = rep.truth.intensity(spec.abundance_scale.get(key.abundance))?;
    let regions: Vec<(String, CellMask)> = cfg.regions.iter().map(|r| (r.name.clone(), r.mask.clone())).collect();
    let report = evaluate(&samples, &[], &truth, pattern, &regions, derive_seed(fit_seed, 1))?;
    let region_rmse = regions
        .iter()
        .map(|(_, m)| rmse_log_intensity_masked(&samples.mean_intensity, &truth, Some(m)))
        .collect::<Result<_>>()?;
    Ok(FitResult { report, region_rmse })
}

fn row_for(s: &Scenario, replicate: usize, sources: Sources, result: &Result<FitResult>) -> FitRow {
    let mut row = FitRow {
        scenario: s.id,
        replicate,
        model: sources.label().to_string(),
        abundance_level: s.abundance,
        aerial_level: s.aerial,
        pam_level: s.pam,
        surfacing_level: s.surfacing,
        calls_level: s.calls,
        true_count: None,
        expected_abundance: None,
        abundance_mean: None,
        abundance_sd: None,
        lower_95: None,
        upper_95: None,
        covers: None,
        rmse_log_intensity: None,
        rps: None,
        loglik_mean: None,
        loglik_sd: None,
        intensity_l1: None,
        intensity_l2: None,
        error: None,
    };
    match result {
        Ok(fit) => {
            let r = &fit.report;
            let total = &r.abundance[0];
            row.true_count = Some(total.true_count);
            row.expected_abundance = Some(total.true_abundance);
            row.abundance_mean = Some(total.mean);
            row.abundance_sd = Some(total.sd);
            row.lower_95 = Some(total.lower_95);
            row.upper_95 = Some(total.upper_95);
            row.covers = Some(r.interval_covers_count);
            row.rmse_log_intensity = Some(r.rmse_log_intensity);
            row.rps = Some(r.rps);
            row.loglik_mean = Some(r.full_data_loglik_mean);
            row.loglik_sd = Some(r.full_data_loglik_sd);
            row.intensity_l1 = Some(r.intensity_l1);
            row.intensity_l2 = Some(r.intensity_l2);
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}

/// Runs every selected scenario on every replicate. A failed fit is
/// recorded in its rows and the sweep continues; only setup errors abort.
/// Output order is fixed by scenario, replicate and model regardless of
/// scheduling.
pub fn run_sweep(spec: &SweepSpec, seed: u64) -> Result<SweepOutput> {
    spec.validate()?;
    let scenarios = spec.selected();
    let grid = spec.grid()?;
    let basis = Arc::new(SpatialBasis::new(&grid, None, spec.fit_range)?);
    let cfg = spec.mcmc_config()?;

    let replicates: Vec<Replicate> = (0..spec.replicates)
        .into_par_iter()
        .map(|r| build_replicate(spec, &scenarios, replicate_seed(seed, r)))
        .collect::<Result<_>>()?;

    let mut keys: Vec<FitKey> = scenarios
        .iter()
        .flat_map(|s| MODELS.iter().map(move |&m| FitKey::new(s, m)))
        .collect();
    keys.sort();
    keys.dedup();
    let jobs: Vec<(usize, FitKey)> = (0..spec.replicates)
        .flat_map(|r| keys.iter().map(move |k| (r, *k)))
        .collect();
    log::info!(
        "sweep: {} scenarios, {} replicates, {} distinct fits",
        scenarios.len(),
        spec.replicates,
        jobs.len()
    );
    let results: Vec<Result<FitResult>> = jobs
        .par_iter()
        .map(|(r, key)| {
            let out = run_fit(spec, key, &replicates[*r], &basis, &cfg, replicate_seed(seed, *r));
            match &out {
                Ok(_) => log::info!("replicate {} {:?}: done", r + 1, key),
                Err(e) => log::warn!("replicate {} {:?}: {e}", r + 1, key),
            }
            out
        })
        .collect();
    let lookup: BTreeMap<(usize, FitKey), &Result<FitResult>> =
        jobs.iter().copied().zip(results.iter()).collect();

    let mut out = SweepOutput::default();
    for s in &scenarios {
        for r in 0..spec.replicates {
            for &m in &MODELS {
                let result = lookup[&(r, FitKey::new(s, m))];
                out.rows.push(row_for(s, r + 1, m, result));
                if let Ok(fit) = result {
                    for (summary, rmse) in fit.report.abundance[1..].iter().zip(&fit.region_rmse) {
                        out.regions.push(RegionRow {
                            scenario: s.id,
                            replicate: r + 1,
                            model: m.label().to_string(),
                            region: summary.name.clone(),
                            true_count: summary.true_count,
                            expected_abundance: summary.true_abundance,
                            abundance_mean: summary.mean,
                            abundance_sd: summary.sd,
                            rmse_log_intensity: *rmse,
                        });
                    }
                }
            }
        }
    }
    Ok(out)
}
