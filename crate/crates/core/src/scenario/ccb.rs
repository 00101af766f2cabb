//! A synthetic bay survey modelled on a real right-whale study area: an
//! irregular coastline, a bathymetry covariate with a strong north-south
//! gradient, fifteen east-west flight lines 2.8 km apart and ten
//! hydrophones with site-specific ambient noise. Surfacing probability and
//! call rate are unknown and informed by auxiliary tag data.

use std::sync::Arc;

use rand_distr::{Beta, Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::detection::{AerialDetectionParams, Hydrophone, PamDetectionParams};
use crate::error::{Error, Result};
use crate::gp::{sample_gp, ExpCovariance};
use crate::grid::{Bounds, CellMask, GridSpec, GriddedField, Point};
use crate::inference::{
    auxiliary::{callrate_gamma_params, surface_beta_params, DEFAULT_CALL_RATE_VARIANCE, DEFAULT_SURFACING_PRECISION},
    mcmc_fit_with_basis, AuxiliaryData, FitData, McmcConfig, ModelSpec, ScalarPrior, Sources, SpatialBasis,
};
use crate::lgcp::{simulate_pattern, PointPattern};
use crate::observe::{simulate_aerial, simulate_pam};
use crate::rng::{self, derive_seed};
use crate::stats;
use crate::transect::Transect;

/// Ambient noise (dB re 1 uPa) of the ten hydrophones.
pub const CCB_NOISE_DB: [f64; 10] = [102.9, 103.6, 104.4, 104.8, 105.2, 105.5, 106.1, 106.7, 107.4, 108.1];

const SIDE_KM: f64 = 42.0;
const TRANSECTS: usize = 15;
const TRANSECT_SPACING_KM: f64 = 2.8;
const TRUE_ABUNDANCE: f64 = 60.0;
const TRUE_PI: f64 = 0.66;
const TRUE_CALLS: f64 = 3.86;
const BATHYMETRY_SLOPE: f64 = -0.5;
const FIELD_VARIANCE: f64 = 0.8;
/// One third of the maximum distance across the bay.
const RANGE_KM: f64 = 23.0 / 3.0;
const SURFACING_OBSERVATIONS: usize = 15;
const CALL_RATE_OBSERVATIONS: usize = 3;

const HYDROPHONES: [(f64, f64); 10] = [
    (10.0, 8.0),
    (20.0, 7.0),
    (29.0, 9.0),
    (8.0, 18.0),
    (18.0, 17.0),
    (28.0, 19.0),
    (12.0, 28.0),
    (22.0, 27.0),
    (31.0, 29.0),
    (20.0, 36.0),
];

#[derive(Debug, Clone)]
pub struct CcbPreset {
    pub grid: GridSpec,
    /// Water cells.
    pub mask: CellMask,
    /// Depth in meters (negative below the surface); zero on land.
    pub bathymetry: GriddedField,
    /// Bathymetry standardized over the water cells; zero on land.
    pub covariate: GriddedField,
    pub truth: GriddedField,
    pub pattern: PointPattern,
    pub data: FitData,
    pub auxiliary: AuxiliaryData,
    pub true_pi: f64,
    pub true_call_rate: f64,
}

fn is_land(p: Point) -> bool {
    let west_shore = p.x < 3.0 && p.y < 30.0;
    let south_shore = p.y < 3.0 && p.x > 18.0;
    let forearm = p.x > 35.0 && p.y < 30.0;
    let open_sea = p.x > 33.0 && p.y > 37.0;
    west_shore || south_shore || forearm || open_sea
}

fn bathymetry(grid: &GridSpec, mask: &CellMask) -> Result<GriddedField> {
    let land: Vec<Point> = (0..grid.n_cells())
        .filter(|&c| !mask.contains_cell(c))
        .map(|c| grid.centroid(c))
        .collect();
    let values = (0..grid.n_cells())
        .map(|c| {
            if !mask.contains_cell(c) {
                return 0.0;
            }
            let p = grid.centroid(c);
            let shore = land.iter().map(|q| q.distance(&p)).fold(f64::INFINITY, f64::min);
            // Deepens to the north and shoals toward the coast.
            -(6.0 + 1.2 * p.y) * (1.0 - (-shore / 3.0).exp())
        })
        .collect();
    GriddedField::new(*grid, values)
}

fn standardize(field: &GriddedField, mask: &CellMask) -> Result<GriddedField> {
    let water: Vec<f64> = mask.active_cells().iter().map(|&c| field.values()[c]).collect();
    let (m, s) = (stats::mean(&water), stats::sd(&water));
    let values = field
        .values()
        .iter()
        .enumerate()
        .map(|(c, v)| if mask.contains_cell(c) { (v - m) / s } else { 0.0 })
        .collect();
    GriddedField::new(*field.grid(), values)
}

/// Flight line `i` runs across the water at its latitude with a slight
/// dog-leg at mid-bay.
fn flight_line(i: usize, grid: &GridSpec, mask: &CellMask) -> Result<Transect> {
    let y = 0.5 * TRANSECT_SPACING_KM + i as f64 * TRANSECT_SPACING_KM;
    let row = grid.cell_of(&Point::new(0.0, y)).expect("flight line inside the grid") / grid.nx();
    let water: Vec<usize> = (0..grid.nx()).filter(|&col| mask.contains_cell(row * grid.nx() + col)).collect();
    let (first, last) = (water[0] as f64, *water.last().expect("water on every flight line") as f64 + 1.0);
    let res = grid.resolution();
    let (x0, x1) = (first * res + 0.2, last * res - 0.2);
    let dy = if i % 2 == 0 { 0.3 } else { -0.3 };
    Transect::new(
        format!("L{:02}", i + 1),
        vec![Point::new(x0, y), Point::new(0.5 * (x0 + x1), y + dy), Point::new(x1, y)],
    )
}

/// Builds the bay, its true intensity and pattern, both surveys and the
/// auxiliary tag data, all from `seed`.
pub fn ccb_preset(seed: u64) -> Result<CcbPreset> {
    let grid = GridSpec::new(Bounds::new(0.0, SIDE_KM, 0.0, SIDE_KM), 1.0)?;
    let mask = CellMask::new(grid, grid.centroids().map(|p| !is_land(p)).collect())?;
    let bathymetry = bathymetry(&grid, &mask)?;
    let covariate = standardize(&bathymetry, &mask)?;

    let field = sample_gp(&grid, &ExpCovariance::new(FIELD_VARIANCE, RANGE_KM)?, derive_seed(seed, 1))?;
    let shape: Vec<f64> = (0..grid.n_cells())
        .map(|c| {
            if mask.contains_cell(c) {
                (BATHYMETRY_SLOPE * covariate.values()[c] + field.values()[c]).exp()
            } else {
                0.0
            }
        })
        .collect();
    let scale = TRUE_ABUNDANCE / (shape.iter().sum::<f64>() * grid.cell_area());
    let truth = GriddedField::new(grid, shape.iter().map(|v| v * scale).collect())?;
    let pattern = simulate_pattern(&truth, derive_seed(seed, 2))?;

    let mut data = FitData::new(grid);
    data.mask = Some(mask.clone());
    data.transects = (0..TRANSECTS).map(|i| flight_line(i, &grid, &mask)).collect::<Result<_>>()?;
    data.hydrophones = HYDROPHONES
        .iter()
        .zip(CCB_NOISE_DB)
        .enumerate()
        .map(|(k, (&(x, y), noise))| Hydrophone::new(format!("P{:02}", k + 1), Point::new(x, y), Some(noise)))
        .collect();
    for h in &data.hydrophones {
        let cell = grid.cell_of(&h.location).expect("hydrophone inside the grid");
        if !mask.contains_cell(cell) {
            return Err(Error::Config(format!("hydrophone {} is on land", h.id)));
        }
    }
    data.aerial_params = AerialDetectionParams::with_pi(TRUE_PI)?;
    data.pam_params = PamDetectionParams::with_noise(CCB_NOISE_DB.iter().sum::<f64>() / 10.0);
    data.aerial = simulate_aerial(&pattern, &data.transects, &data.aerial_params, derive_seed(seed, 3))?;
    data.pam = simulate_pam(&pattern, &data.hydrophones, TRUE_CALLS, &data.pam_params, derive_seed(seed, 4))?;

    let mut r = rng::seeded(derive_seed(seed, 5));
    let (a, b) = surface_beta_params(TRUE_PI, DEFAULT_SURFACING_PRECISION);
    let surf = Beta::new(a, b).map_err(|e| Error::Config(e.to_string()))?;
    let (shape_c, rate_c) = callrate_gamma_params(TRUE_CALLS, DEFAULT_CALL_RATE_VARIANCE);
    let calls = Gamma::new(shape_c, 1.0 / rate_c).map_err(|e| Error::Config(e.to_string()))?;
    let auxiliary = AuxiliaryData {
        surfacing: (0..SURFACING_OBSERVATIONS)
            .map(|_| surf.sample(&mut r).clamp(1e-6, 1.0 - 1e-6))
            .collect(),
        call_rates: (0..CALL_RATE_OBSERVATIONS)
            .map(|_| calls.sample(&mut r).max(1e-6))
            .collect(),
        ..AuxiliaryData::default()
    };
    Ok(CcbPreset {
        grid,
        mask,
        bathymetry,
        covariate,
        truth,
        pattern,
        data,
        auxiliary,
        true_pi: TRUE_PI,
        true_call_rate: TRUE_CALLS,
    })
}

impl CcbPreset {
    /// Application priors: `beta_0 ~ N(0, 100)`, bathymetry slope
    /// `~ N(0, 1)`, `sigma2 ~ Gamma(2, 2)`, range fixed at a third of the
    /// maximum distance, `pi ~ U(0, 1)`, `c ~ U(0, 100)`, and both informed
    /// by the auxiliary data.
    pub fn model(&self, sources: Sources) -> ModelSpec {
        let mut spec = ModelSpec::intercept_only(sources);
        spec.covariates = vec![self.covariate.clone()];
        spec.beta_priors = vec![
            ScalarPrior::Normal {
                mean: 0.0,
                variance: 100.0,
            },
            ScalarPrior::Normal {
                mean: 0.0,
                variance: 1.0,
            },
        ];
        spec.variance_prior = ScalarPrior::Gamma { shape: 2.0, rate: 2.0 };
        spec.range = RANGE_KM;
        spec.auxiliary = self.auxiliary.clone();
        spec
    }
}

/// Posterior summary of one bay fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CcbFit {
    pub model: String,
    pub abundance_mean: f64,
    pub abundance_sd: f64,
    pub pi_mean: f64,
    pub pi_sd: f64,
    pub pi_lower_95: f64,
    pub pi_upper_95: f64,
    pub call_rate_mean: f64,
    pub call_rate_sd: f64,
    pub bathymetry_slope_mean: f64,
    pub sigma2_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CcbOutcome {
    pub true_count: usize,
    pub aerial_detections: usize,
    pub calls_detected: u64,
    pub aux_surfacing_mean: f64,
    pub aux_call_rate_mean: f64,
    pub fused: CcbFit,
    pub aerial: CcbFit,
}

/// Fits the fused and the aerial-only model to the preset.
pub fn run_ccb(preset: &CcbPreset, config: &McmcConfig, seed: u64) -> Result<CcbOutcome> {
    let basis = Arc::new(SpatialBasis::for_data(&preset.data, RANGE_KM)?);
    let fit = |sources: Sources, s: u64| -> Result<CcbFit> {
        let post = mcmc_fit_with_basis(&preset.model(sources), &preset.data, config, Arc::clone(&basis), s)?;
        let slope: Vec<f64> = post.beta.iter().map(|b| b[1]).collect();
        Ok(CcbFit {
            model: sources.label().to_string(),
            abundance_mean: stats::mean(&post.abundance),
            abundance_sd: stats::sd(&post.abundance),
            pi_mean: stats::mean(&post.pi),
            pi_sd: stats::sd(&post.pi),
            pi_lower_95: stats::quantile(&post.pi, 0.025),
            pi_upper_95: stats::quantile(&post.pi, 0.975),
            call_rate_mean: stats::mean(&post.c),
            call_rate_sd: stats::sd(&post.c),
            bathymetry_slope_mean: stats::mean(&slope),
            sigma2_mean: stats::mean(&post.sigma2),
        })
    };
    Ok(CcbOutcome {
        true_count: preset.pattern.len(),
        aerial_detections: preset.data.aerial.iter().map(|o| o.detections.len()).sum(),
        calls_detected: preset.data.pam.iter().map(|o| o.count).sum(),
        aux_surfacing_mean: stats::mean(&preset.auxiliary.surfacing),
        aux_call_rate_mean: stats::mean(&preset.auxiliary.call_rates),
        fused: fit(Sources::Both, derive_seed(seed, 1))?,
        aerial: fit(Sources::Aerial, derive_seed(seed, 2))?,
    })
}
