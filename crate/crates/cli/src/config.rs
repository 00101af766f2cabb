//! The run configuration: one TOML file describes one reproducible run.
//!
//! Relative paths are resolved against the directory holding the config
//! file, and every referenced file must exist when the config is loaded.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use ppfusion_core::inference::{AuxiliaryData, McmcConfig, NamedRegion};
use ppfusion_core::scenario::{hydrophone_layout, transect_layout, SweepSpec};
use ppfusion_core::{
    io, AerialDetectionParams, Bounds, CellMask, GridSpec, Hydrophone, ModelSpec, PamDetectionParams, ScalarPrior,
    Sources, Transect,
};

/// Study-area geometry: explicit bounds, or the header of a raster.
#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub x_min: Option<f64>,
    pub x_max: Option<f64>,
    pub y_min: Option<f64>,
    pub y_max: Option<f64>,
    pub resolution: Option<f64>,
    /// Take the geometry from this raster's header.
    pub raster: Option<PathBuf>,
    /// Raster whose NODATA cells lie outside the study region.
    pub mask: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SurveySection {
    pub transects: Option<PathBuf>,
    /// Evenly spaced east-west lines, used when no transect file is given.
    pub transect_count: Option<usize>,
    pub hydrophones: Option<PathBuf>,
    /// A `side x side` block-centred array, used when no hydrophone file is
    /// given.
    pub hydrophone_side: Option<usize>,
    #[serde(default = "default_plateau")]
    pub plateau_km: f64,
    #[serde(default = "default_noise")]
    pub noise_db: f64,
}

fn default_plateau() -> f64 {
    AerialDetectionParams::default().plateau_km
}

fn default_noise() -> f64 {
    PamDetectionParams::default().noise_db
}

#[derive(Debug, Clone, Copy, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    pub variance: f64,
    /// Exponential-kernel range `phi` in km.
    pub range: f64,
}

/// A true covariate: read from a raster or drawn as a Gaussian field.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct CovariateSource {
    pub raster: Option<PathBuf>,
    pub gp: Option<FieldSpec>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct TruthSection {
    /// Intercept followed by one slope per covariate.
    pub beta: Vec<f64>,
    #[serde(default)]
    pub covariates: Vec<CovariateSource>,
    pub latent: Option<FieldSpec>,
    pub surfacing: f64,
    pub call_rate: f64,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub aerial: Option<PathBuf>,
    pub pam: Option<PathBuf>,
    pub auxiliary: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub sources: Sources,
    /// Covariate rasters entering the fitted intensity.
    pub covariates: Vec<PathBuf>,
    /// Fit with the covariates written by `simulate` (requires a data
    /// directory).
    pub simulated_covariates: bool,
    /// Intercept first, then one per covariate; defaults to `N(0, 1000^2)`
    /// for each.
    pub beta_priors: Vec<ScalarPrior>,
    pub variance_prior: ScalarPrior,
    pub range: f64,
    pub pi_prior: ScalarPrior,
    pub fixed_pi: Option<f64>,
    pub c_prior: ScalarPrior,
    pub fixed_c: Option<f64>,
    pub call_rate_variance: Option<f64>,
    pub surfacing_precision: Option<f64>,
    pub window_scale: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        let base = ModelSpec::intercept_only(Sources::Both);
        ModelSection {
            sources: base.sources,
            covariates: Vec::new(),
            simulated_covariates: false,
            beta_priors: Vec::new(),
            variance_prior: base.variance_prior,
            range: base.range,
            pi_prior: base.pi_prior,
            fixed_pi: None,
            c_prior: base.c_prior,
            fixed_c: None,
            call_rate_variance: None,
            surfacing_precision: None,
            window_scale: base.window_scale,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct McmcSection {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub latent_stride: usize,
    pub adapt: bool,
}

impl Default for McmcSection {
    fn default() -> Self {
        let c = McmcConfig::simulation_study();
        McmcSection {
            iterations: c.iterations,
            burn_in: c.burn_in,
            thin: c.thin,
            latent_stride: c.latent_stride,
            adapt: c.adapt,
        }
    }
}

/// Named rectangle whose abundance is tracked and scored.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSection {
    pub name: String,
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    #[serde(default)]
    pub grid: GridSection,
    pub survey: Option<SurveySection>,
    pub truth: Option<TruthSection>,
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub mcmc: McmcSection,
    #[serde(default)]
    pub regions: Vec<RegionSection>,
    pub sweep: Option<SweepSpec>,
}

/// A parsed config with its location and content hash.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub base_dir: PathBuf,
    /// SHA-256 of the file bytes, hex encoded.
    pub hash: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl LoadedConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).with_context(|| format!("reading config {}", path.display()))?;
        let text = std::str::from_utf8(&bytes).with_context(|| format!("config {} is not UTF-8", path.display()))?;
        let config: RunConfig = toml::from_str(text).with_context(|| format!("parsing config {}", path.display()))?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let loaded = LoadedConfig {
            config,
            base_dir,
            hash: sha256_hex(&bytes),
        };
        loaded.check_paths()?;
        Ok(loaded)
    }

    /// Defaults for commands that can run without a config file.
    pub fn empty() -> Self {
        let config: RunConfig = toml::from_str("").expect("every section has a default");
        LoadedConfig {
            config,
            base_dir: PathBuf::new(),
            hash: sha256_hex(b""),
        }
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    fn check_paths(&self) -> Result<()> {
        let c = &self.config;
        let mut paths: Vec<&PathBuf> = Vec::new();
        paths.extend(c.grid.raster.iter().chain(&c.grid.mask));
        if let Some(s) = &c.survey {
            paths.extend(s.transects.iter().chain(&s.hydrophones));
        }
        if let Some(t) = &c.truth {
            paths.extend(t.covariates.iter().filter_map(|s| s.raster.as_ref()));
        }
        paths.extend(c.data.aerial.iter().chain(&c.data.pam).chain(&c.data.auxiliary));
        paths.extend(&c.model.covariates);
        for p in paths {
            let full = self.resolve(p);
            if !full.is_file() {
                bail!(config_error(format!("referenced file {} does not exist", full.display())));
            }
        }
        Ok(())
    }

    /// Seed from the command line, else from the file; there is no clock
    /// fallback.
    pub fn seed(&self, flag: Option<u64>) -> Result<u64> {
        flag.or(self.config.seed)
            .ok_or_else(|| config_error("a seed is required: pass --seed or set `seed` in the config"))
    }

    pub fn grid(&self) -> Result<GridSpec> {
        let g = &self.config.grid;
        let explicit = [g.x_min, g.x_max, g.y_min, g.y_max, g.resolution];
        let grid = match (&g.raster, explicit.iter().all(Option::is_some)) {
            (Some(_), true) => return Err(config_error("[grid] gives both a raster and explicit bounds")),
            (Some(p), false) => *io::read_raster(self.resolve(p))?.grid(),
            (None, true) => GridSpec::new(
                Bounds::new(g.x_min.unwrap(), g.x_max.unwrap(), g.y_min.unwrap(), g.y_max.unwrap()),
                g.resolution.unwrap(),
            )?,
            (None, false) => {
                return Err(config_error(
                    "[grid] needs x_min, x_max, y_min, y_max and resolution, or a raster",
                ))
            }
        };
        Ok(grid)
    }

    pub fn mask(&self, grid: &GridSpec) -> Result<Option<CellMask>> {
        match &self.config.grid.mask {
            None => Ok(None),
            Some(p) => Ok(Some(io::load_raster(self.resolve(p), grid)?.mask)),
        }
    }

    pub fn survey(&self) -> Result<&SurveySection> {
        self.config
            .survey
            .as_ref()
            .ok_or_else(|| config_error("the config has no [survey] section"))
    }

    pub fn transects(&self, grid: &GridSpec) -> Result<Vec<Transect>> {
        let s = self.survey()?;
        match (&s.transects, s.transect_count) {
            (Some(p), None) => Ok(io::read_transects(self.resolve(p))?),
            (None, Some(n)) => Ok(transect_layout_for(grid, n)?),
            (None, None) => Ok(Vec::new()),
            (Some(_), Some(_)) => Err(config_error("[survey] gives both a transect file and transect_count")),
        }
    }

    pub fn hydrophones(&self, grid: &GridSpec) -> Result<Vec<Hydrophone>> {
        let s = self.survey()?;
        match (&s.hydrophones, s.hydrophone_side) {
            (Some(p), None) => Ok(io::read_hydrophones(self.resolve(p))?),
            (None, Some(n)) => Ok(hydrophone_layout_for(grid, n)?),
            (None, None) => Ok(Vec::new()),
            (Some(_), Some(_)) => Err(config_error(
                "[survey] gives both a hydrophone file and hydrophone_side",
            )),
        }
    }

    pub fn mcmc(&self, grid: &GridSpec) -> Result<McmcConfig> {
        let m = &self.config.mcmc;
        let mut cfg = McmcConfig::new(m.iterations, m.burn_in);
        cfg.thin = m.thin;
        cfg.latent_stride = m.latent_stride;
        cfg.adapt = m.adapt;
        cfg.regions = self
            .regions(grid)?
            .into_iter()
            .map(|(name, mask)| NamedRegion { name, mask })
            .collect();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn regions(&self, grid: &GridSpec) -> Result<Vec<(String, CellMask)>> {
        let mut out: Vec<(String, CellMask)> = Vec::new();
        for r in &self.config.regions {
            if out.iter().any(|(n, _)| *n == r.name) {
                return Err(config_error(format!("region '{}' is defined twice", r.name)));
            }
            let mask = CellMask::rectangle(*grid, Bounds::new(r.x_min, r.x_max, r.y_min, r.y_max));
            if mask.count() == 0 {
                return Err(config_error(format!("region '{}' contains no cell centroids", r.name)));
            }
            out.push((r.name.clone(), mask));
        }
        Ok(out)
    }

    /// The fitting model, given its covariate fields and auxiliary data.
    pub fn model(
        &self,
        sources: Sources,
        covariates: Vec<ppfusion_core::GriddedField>,
        auxiliary: AuxiliaryData,
    ) -> Result<ModelSpec> {
        let m = &self.config.model;
        let mut spec = ModelSpec::intercept_only(sources);
        let default_beta = spec.beta_priors[0];
        spec.beta_priors = if m.beta_priors.is_empty() {
            vec![default_beta; covariates.len() + 1]
        } else {
            m.beta_priors.clone()
        };
        spec.covariates = covariates;
        spec.variance_prior = m.variance_prior;
        spec.range = m.range;
        spec.pi_prior = m.pi_prior;
        spec.fixed_pi = m.fixed_pi;
        spec.c_prior = m.c_prior;
        spec.fixed_c = m.fixed_c;
        spec.window_scale = m.window_scale;
        spec.auxiliary = auxiliary;
        if let Some(v) = m.call_rate_variance {
            spec.auxiliary.call_rate_variance = v;
        }
        if let Some(v) = m.surfacing_precision {
            spec.auxiliary.surfacing_precision = v;
        }
        Ok(spec)
    }
}

/// `count` evenly spaced east-west lines spanning the grid.
fn transect_layout_for(grid: &GridSpec, count: usize) -> Result<Vec<Transect>> {
    let b = grid.bounds();
    if count == 0 {
        return Err(config_error("transect_count must be at least 1"));
    }
    if b.x_min == 0.0 && b.y_min == 0.0 && b.x_max == b.y_max {
        return Ok(transect_layout(count, b.x_max)?);
    }
    let step = (b.y_max - b.y_min) / count as f64;
    (0..count)
        .map(|i| {
            Transect::horizontal(format!("T{}", i + 1), b.y_min + (i as f64 + 0.5) * step, b.x_min, b.x_max)
                .map_err(Into::into)
        })
        .collect()
}

/// Block-centred array on a square grid anchored at the origin.
fn hydrophone_layout_for(grid: &GridSpec, side: usize) -> Result<Vec<Hydrophone>> {
    let b = grid.bounds();
    if side == 0 {
        return Err(config_error("hydrophone_side must be at least 1"));
    }
    if !(b.x_min == 0.0 && b.y_min == 0.0 && b.x_max == b.y_max) {
        return Err(config_error(
            "hydrophone_side needs a square grid anchored at the origin; list hydrophones in a file instead",
        ));
    }
    Ok(hydrophone_layout(side, b.x_max))
}

/// Marker for errors caused by the user's input rather than by numerics.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn config_error(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}
