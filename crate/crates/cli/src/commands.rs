//! The subcommands. Each writes into its own output directory and finishes
//! with a manifest.

use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

use ppfusion_core::inference::AuxiliaryData;
use ppfusion_core::rng::derive_seed;
use ppfusion_core::stats;
use ppfusion_core::scenario::{
    abundance_table, detectability_table, main_table, region_table, run_sweep, sampling_intensity_table,
    summarize_fits, trend_checks, FitRow, RegionRow, SweepSpec,
};
use ppfusion_core::{
    build_intensity, evaluate, io, mcmc_fit, sample_gp, simulate_aerial, simulate_pam, simulate_pattern,
    AerialDetectionParams, ExpCovariance, FitData, GridSpec, GriddedField, IntensityModel, PamDetectionParams,
    PosteriorSamples, Sources,
};

use crate::config::{config_error, LoadedConfig};
use crate::manifest::{read_manifest, Manifest};

pub const PATTERN_FILE: &str = "pattern.csv";
pub const TRANSECTS_FILE: &str = "transects.csv";
pub const HYDROPHONES_FILE: &str = "hydrophones.csv";
pub const AERIAL_FILE: &str = "aerial.csv";
pub const PAM_FILE: &str = "pam.csv";
pub const AUXILIARY_FILE: &str = "auxiliary.csv";
pub const TRUTH_INTENSITY_FILE: &str = "truth_intensity.asc";
pub const TRUTH_LOG_INTENSITY_FILE: &str = "truth_log_intensity.asc";
pub const REPORT_FILE: &str = "report.json";
pub const ROWS_FILE: &str = "rows.csv";
pub const REGION_ROWS_FILE: &str = "regions.csv";
pub const TRENDS_FILE: &str = "trends.json";
pub const POSTERIOR_SUMMARY_FILE: &str = "posterior_summary.json";

/// True covariate `k` (1-based) of a simulation.
pub fn covariate_file(k: usize) -> String {
    format!("covariate_{k}.asc")
}

/// Covariate `k` (1-based) a fit used, stored beside its samples.
pub fn fit_covariate_file(k: usize) -> String {
    format!("fit_covariate_{k}.asc")
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let json = serde_json::to_string_pretty(value)? + "\n";
    std::fs::write(path, json).with_context(|| format!("writing {}", path.display()))
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn read_rows<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    r.deserialize()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| config_error(format!("{}: {e}", path.display())))
}

/// Distinct stream labels so each model's chain uses its own randomness.
fn model_label(sources: Sources) -> u64 {
    match sources {
        Sources::Aerial => 1,
        Sources::Pam => 2,
        Sources::Both => 3,
    }
}

/// Draws the truth and both observation channels and writes them with the
/// survey layout, so the output directory alone is enough to fit.
pub fn simulate(cfg: &LoadedConfig, seed: u64, out: &Path) -> Result<()> {
    let truth = cfg
        .config
        .truth
        .as_ref()
        .ok_or_else(|| config_error("simulate needs a [truth] section"))?;
    let grid = cfg.grid()?;
    let mask = cfg.mask(&grid)?;
    let survey = cfg.survey()?;

    let mut covariates = Vec::with_capacity(truth.covariates.len());
    for (k, src) in truth.covariates.iter().enumerate() {
        let field = match (&src.raster, &src.gp) {
            (Some(p), None) => io::load_raster(cfg.resolve(p), &grid)?.field,
            (None, Some(gp)) => sample_gp(
                &grid,
                &ExpCovariance::new(gp.variance, gp.range)?,
                derive_seed(seed, 100 + k as u64),
            )?,
            _ => return Err(config_error(format!("covariate {} needs exactly one of raster and gp", k + 1))),
        };
        covariates.push(field);
    }
    let latent = match &truth.latent {
        Some(l) => Some(sample_gp(&grid, &ExpCovariance::new(l.variance, l.range)?, derive_seed(seed, 1))?),
        None => None,
    };
    let model = IntensityModel::new(truth.beta.clone(), covariates.clone(), latent)?;
    let mut intensity = build_intensity(&model, &grid)?;
    if let Some(m) = &mask {
        // No animals outside the study region.
        let values = intensity
            .values()
            .iter()
            .zip(m.cells())
            .map(|(&v, &inside)| if inside { v } else { 0.0 })
            .collect();
        intensity = GriddedField::new(grid, values)?;
    }
    let pattern = simulate_pattern(&intensity, derive_seed(seed, 2))?;

    let transects = cfg.transects(&grid)?;
    let hydrophones = cfg.hydrophones(&grid)?;
    let aerial_params = AerialDetectionParams::new(truth.surfacing, survey.plateau_km)?;
    let pam_params = PamDetectionParams::with_noise(survey.noise_db);
    let aerial = simulate_aerial(&pattern, &transects, &aerial_params, derive_seed(seed, 3))?;
    let pam = simulate_pam(&pattern, &hydrophones, truth.call_rate, &pam_params, derive_seed(seed, 4))?;

    create_dir(out)?;
    io::write_pattern(out.join(PATTERN_FILE), &pattern)?;
    io::write_transects(out.join(TRANSECTS_FILE), &transects)?;
    io::write_hydrophones(out.join(HYDROPHONES_FILE), &hydrophones)?;
    io::write_aerial(out.join(AERIAL_FILE), &aerial)?;
    io::write_pam(out.join(PAM_FILE), &pam)?;
    if let Some(p) = &cfg.config.data.auxiliary {
        io::write_auxiliary(out.join(AUXILIARY_FILE), &io::read_auxiliary(cfg.resolve(p))?)?;
    }
    for (k, field) in covariates.iter().enumerate() {
        io::write_raster(out.join(covariate_file(k + 1)), field, mask.as_ref())?;
    }
    io::write_raster(out.join(TRUTH_INTENSITY_FILE), &intensity, mask.as_ref())?;
    let log_intensity = model.log_intensity(&grid)?;
    io::write_raster(out.join(TRUTH_LOG_INTENSITY_FILE), &log_intensity, mask.as_ref())?;
    log::info!(
        "simulated {} animals, {} aerial detections, {} acoustic detections",
        pattern.len(),
        aerial.iter().map(|o| o.detections.len()).sum::<usize>(),
        pam.iter().map(|o| o.count).sum::<u64>()
    );
    Manifest::new("simulate", &cfg.hash, seed).finish(out)
}

/// Numbered rasters `name(1)`, `name(2)`, ... present in `dir`.
fn numbered_rasters(dir: &Path, name: fn(usize) -> String, grid: &GridSpec) -> Result<Vec<GriddedField>> {
    let mut out = Vec::new();
    while dir.join(name(out.len() + 1)).is_file() {
        out.push(io::load_raster(dir.join(name(out.len() + 1)), grid)?.field);
    }
    Ok(out)
}

/// Fits one model. Observations come from a simulation directory when
/// `data_dir` is given, otherwise from the config's survey and data files.
pub fn fit(
    cfg: &LoadedConfig,
    seed: u64,
    out: &Path,
    sources: Option<Sources>,
    data_dir: Option<&Path>,
) -> Result<()> {
    let sources = sources.unwrap_or(cfg.config.model.sources);
    let grid = cfg.grid()?;
    let mut data = FitData::new(grid);
    data.mask = cfg.mask(&grid)?;
    if let Some(s) = &cfg.config.survey {
        data.aerial_params = AerialDetectionParams::new(1.0, s.plateau_km)?;
        data.pam_params = PamDetectionParams::with_noise(s.noise_db);
    }

    let mut manifest = Manifest::new("fit", &cfg.hash, seed);
    manifest.model = Some(sources.label().to_string());
    let mut auxiliary = AuxiliaryData::default();
    let mut covariates = Vec::new();
    for p in &cfg.config.model.covariates {
        covariates.push(io::load_raster(cfg.resolve(p), &grid)?.field);
    }
    match data_dir {
        Some(dir) => {
            let (_, hash) = read_manifest(dir)?;
            manifest.data_manifest = Some(hash);
            data.transects = io::read_transects(dir.join(TRANSECTS_FILE))?;
            data.hydrophones = io::read_hydrophones(dir.join(HYDROPHONES_FILE))?;
            data.aerial = io::read_aerial(dir.join(AERIAL_FILE))?;
            data.pam = io::read_pam(dir.join(PAM_FILE))?;
            if dir.join(AUXILIARY_FILE).is_file() {
                auxiliary = io::read_auxiliary(dir.join(AUXILIARY_FILE))?;
            }
            if cfg.config.model.simulated_covariates {
                covariates.extend(numbered_rasters(dir, covariate_file, &grid)?);
            }
        }
        None => {
            if cfg.config.model.simulated_covariates {
                return Err(config_error("simulated_covariates needs a simulation directory (--data)"));
            }
            if cfg.config.survey.is_some() {
                data.transects = cfg.transects(&grid)?;
                data.hydrophones = cfg.hydrophones(&grid)?;
            }
            let d = &cfg.config.data;
            if let Some(p) = &d.aerial {
                data.aerial = io::read_aerial(cfg.resolve(p))?;
            }
            if let Some(p) = &d.pam {
                data.pam = io::read_pam(cfg.resolve(p))?;
            }
            if let Some(p) = &d.auxiliary {
                auxiliary = io::read_auxiliary(cfg.resolve(p))?;
            }
        }
    }
    // A channel the model ignores must not constrain the fit.
    if !sources.aerial() {
        data.transects.clear();
        data.aerial.clear();
    }
    if !sources.pam() {
        data.hydrophones.clear();
        data.pam.clear();
    }

    let spec = cfg.model(sources, covariates, auxiliary)?;
    let mcmc = cfg.mcmc(&grid)?;
    let samples = mcmc_fit(&spec, &data, &mcmc, derive_seed(seed, 5000 + model_label(sources)))?;
    log::info!(
        "{} fit: {} draws, abundance mean {:.2}",
        sources.label(),
        samples.len(),
        samples.abundance.iter().sum::<f64>() / samples.len() as f64
    );

    create_dir(out)?;
    io::write_samples(out, &samples)?;
    for (k, field) in spec.covariates.iter().enumerate() {
        io::write_raster(out.join(fit_covariate_file(k + 1)), field, data.mask.as_ref())?;
    }
    manifest.finish(out)
}

/// Scores a fit against the simulation it was fitted to. Refuses pairs that
/// came from different configs or data.
pub fn evaluate_fit(cfg: &LoadedConfig, seed: u64, out: &Path, truth_dir: &Path, samples_dir: &Path) -> Result<()> {
    let (truth_manifest, truth_hash) = read_manifest(truth_dir)?;
    let (fit_manifest, fit_hash) = read_manifest(samples_dir)?;
    if truth_manifest.command != "simulate" || fit_manifest.command != "fit" {
        return Err(config_error("evaluate needs a simulation directory and a fit directory"));
    }
    if truth_manifest.config_hash != fit_manifest.config_hash || fit_manifest.config_hash != cfg.hash {
        return Err(config_error(format!(
            "config mismatch: simulation {}, samples {}, current config {}",
            truth_manifest.config_hash, fit_manifest.config_hash, cfg.hash
        )));
    }
    if fit_manifest.data_manifest.as_deref() != Some(truth_hash.as_str()) {
        return Err(config_error(format!(
            "the samples in {} were not fitted to the data in {}",
            samples_dir.display(),
            truth_dir.display()
        )));
    }

    let samples: PosteriorSamples = io::read_samples(samples_dir)?;
    let grid = samples.grid;
    let truth = io::load_raster(truth_dir.join(TRUTH_INTENSITY_FILE), &grid)?.field;
    let pattern = io::read_pattern(truth_dir.join(PATTERN_FILE))?;
    let covariates = numbered_rasters(samples_dir, fit_covariate_file, &grid)?;
    let regions = cfg.regions(&grid)?;
    let report = evaluate(&samples, &covariates, &truth, &pattern, &regions, derive_seed(seed, 7))?;

    create_dir(out)?;
    write_json(&out.join(REPORT_FILE), &report)?;
    let mut manifest = Manifest::new("evaluate", &cfg.hash, seed);
    manifest.model = fit_manifest.model;
    manifest.data_manifest = Some(truth_hash);
    manifest.samples_manifest = Some(fit_hash);
    manifest.finish(out)
}

/// Number of failed fits in a sweep that otherwise completed.
#[derive(Debug)]
pub struct PartialSweep {
    pub failed: usize,
    pub total: usize,
}

impl std::fmt::Display for PartialSweep {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} of {} fits failed; see the error column of {ROWS_FILE}", self.failed, self.total)
    }
}

impl std::error::Error for PartialSweep {}

/// Runs the scenario design and writes the rows, tables and trend checks.
pub fn sweep(cfg: &LoadedConfig, seed: u64, out: &Path) -> Result<()> {
    let spec: SweepSpec = cfg.config.sweep.clone().unwrap_or_default();
    let output = run_sweep(&spec, seed)?;
    create_dir(out)?;
    write_rows(&out.join(ROWS_FILE), &output.rows)?;
    write_rows(&out.join(REGION_ROWS_FILE), &output.regions)?;
    write_tables(out, &output.rows, &output.regions, seed)?;
    Manifest::new("sweep", &cfg.hash, seed).finish(out)?;
    match output.failures() {
        0 => Ok(()),
        failed => Err(PartialSweep {
            failed,
            total: output.rows.len(),
        }
        .into()),
    }
}

fn write_tables(out: &Path, rows: &[FitRow], regions: &[RegionRow], seed: u64) -> Result<()> {
    let summaries = summarize_fits(rows);
    write_rows(&out.join("summary.csv"), &summaries)?;
    write_rows(&out.join("main_table.csv"), &main_table(&summaries))?;
    write_rows(&out.join("sampling_intensity.csv"), &sampling_intensity_table(&summaries))?;
    write_rows(&out.join("detectability.csv"), &detectability_table(&summaries))?;
    write_rows(&out.join("abundance_level.csv"), &abundance_table(&summaries))?;
    write_rows(&out.join("region_table.csv"), &region_table(regions))?;
    write_json(&out.join(TRENDS_FILE), &trend_checks(rows, derive_seed(seed, 9)))
}

#[derive(Debug, Serialize)]
struct ScalarSummary {
    mean: f64,
    sd: f64,
    lower_95: f64,
    upper_95: f64,
}

fn scalar_summary(draws: &[f64]) -> ScalarSummary {
    ScalarSummary {
        mean: stats::mean(draws),
        sd: stats::sd(draws),
        lower_95: stats::quantile(draws, 0.025),
        upper_95: stats::quantile(draws, 0.975),
    }
}

#[derive(Debug, Serialize)]
struct PosteriorSummary {
    model: String,
    draws: usize,
    abundance: ScalarSummary,
    regions: Vec<(String, ScalarSummary)>,
    beta: Vec<ScalarSummary>,
    sigma2: ScalarSummary,
    pi: ScalarSummary,
    c: ScalarSummary,
    acceptance: std::collections::BTreeMap<String, f64>,
}

/// Rebuilds tables from a sweep directory, or summarizes a fit directory.
pub fn report(seed: u64, input: &Path, out: &Path) -> Result<()> {
    create_dir(out)?;
    if input.join(ROWS_FILE).is_file() {
        let rows: Vec<FitRow> = read_rows(&input.join(ROWS_FILE))?;
        let regions: Vec<RegionRow> = read_rows(&input.join(REGION_ROWS_FILE))?;
        write_tables(out, &rows, &regions, seed)
    } else if input.join(io::DRAWS_FILE).is_file() {
        let s = io::read_samples(input)?;
        if s.is_empty() {
            return Err(config_error(format!("{} holds no draws", input.display())));
        }
        let n_beta = s.beta[0].len();
        let summary = PosteriorSummary {
            model: s.meta.sources.label().to_string(),
            draws: s.len(),
            abundance: scalar_summary(&s.abundance),
            regions: s
                .region_abundance
                .iter()
                .map(|(n, v)| (n.clone(), scalar_summary(v)))
                .collect(),
            beta: (0..n_beta)
                .map(|j| scalar_summary(&s.beta.iter().map(|b| b[j]).collect::<Vec<_>>()))
                .collect(),
            sigma2: scalar_summary(&s.sigma2),
            pi: scalar_summary(&s.pi),
            c: scalar_summary(&s.c),
            acceptance: s.meta.acceptance.clone(),
        };
        write_json(&out.join(POSTERIOR_SUMMARY_FILE), &summary)
    } else {
        Err(config_error(format!(
            "{} is neither a sweep directory ({ROWS_FILE}) nor a fit directory ({})",
            input.display(),
            io::DRAWS_FILE
        )))
    }
}
