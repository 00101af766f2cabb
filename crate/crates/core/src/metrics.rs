//! Scores of a fitted intensity against simulated truth.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{CellMask, GriddedField};
use crate::inference::{predictive_counts, PosteriorSamples};
use crate::lgcp::{count_in_region, PointPattern};
use crate::stats;

/// Root mean square difference of `log` intensities over the cells of
/// `mask` (all cells when `None`).
pub fn rmse_log_intensity_masked(
    estimated: &GriddedField,
    truth: &GriddedField,
    mask: Option<&CellMask>,
) -> Result<f64> {
    estimated.grid().ensure_same(truth.grid(), "log-intensity RMSE")?;
    if let Some(m) = mask {
        estimated.grid().ensure_same(m.grid(), "log-intensity RMSE mask")?;
    }
    let mut sum = 0.0;
    let mut n = 0usize;
    for (cell, (e, t)) in estimated.values().iter().zip(truth.values()).enumerate() {
        if mask.is_some_and(|m| !m.contains_cell(cell)) {
            continue;
        }
        if !(*e > 0.0 && *t > 0.0) {
            return Err(Error::Domain(format!(
                "log-intensity RMSE needs positive intensities, cell {cell} has estimate {e} and truth {t}"
            )));
        }
        sum += (e.ln() - t.ln()).powi(2);
        n += 1;
    }
    if n == 0 {
        return Err(Error::Config("no cells to compare".into()));
    }
    Ok((sum / n as f64).sqrt())
}

pub fn rmse_log_intensity(estimated: &GriddedField, truth: &GriddedField) -> Result<f64> {
    rmse_log_intensity_masked(estimated, truth, None)
}

/// Ranked probability score of an empirical count forecast:
/// `sum_n (F(n) - 1[n >= truth])^2`, summed up to the largest of the draws
/// and the truth (every later term is zero).
pub fn rps(draws: &[u64], truth: u64) -> f64 {
    assert!(!draws.is_empty(), "RPS needs at least one draw");
    let mut sorted = draws.to_vec();
    sorted.sort_unstable();
    let n_max = sorted[sorted.len() - 1].max(truth);
    let total = sorted.len() as f64;
    let mut below = 0usize;
    let mut score = 0.0;
    for n in 0..=n_max {
        while below < sorted.len() && sorted[below] <= n {
            below += 1;
        }
        let f = below as f64 / total;
        let step = if n >= truth { 1.0 } else { 0.0 };
        score += (f - step).powi(2);
    }
    score
}

/// Discretized NHPP log density of `pattern` under a cellwise-constant
/// intensity: `-lambda(D) + sum_s log lambda(cell(s))`. Zero intensity at an
/// occupied cell gives `-inf`.
pub fn nhpp_loglik(intensity: &GriddedField, pattern: &PointPattern) -> Result<f64> {
    let grid = intensity.grid();
    pattern.check_within(grid, None)?;
    let counts = pattern.cell_counts(grid);
    Ok(nhpp_from_counts(intensity.values(), &counts, grid.cell_area()))
}

fn nhpp_from_counts(lambda: &[f64], counts: &[u64], area: f64) -> f64 {
    let mut ll = -area * lambda.iter().sum::<f64>();
    for (&l, &n) in lambda.iter().zip(counts) {
        if n > 0 {
            ll += n as f64 * l.ln();
        }
    }
    ll
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoglikSummary {
    pub mean: f64,
    pub sd: f64,
    pub values: Vec<f64>,
}

/// [`nhpp_loglik`] of the full true pattern under each stored posterior
/// draw of the intensity.
pub fn full_data_loglik(
    samples: &PosteriorSamples,
    true_pattern: &PointPattern,
    covariates: &[GriddedField],
) -> Result<LoglikSummary> {
    if samples.latent.is_empty() {
        return Err(Error::Config("no stored latent draws; set a positive latent stride".into()));
    }
    let grid = &samples.grid;
    true_pattern.check_within(grid, None)?;
    for (j, x) in covariates.iter().enumerate() {
        grid.ensure_same(x.grid(), &format!("covariate {}", j + 1))?;
    }
    let all_counts = true_pattern.cell_counts(grid);
    let counts: Vec<u64> = samples.active.iter().map(|&c| all_counts[c]).collect();
    let outside: u64 = all_counts.iter().sum::<u64>() - counts.iter().sum::<u64>();
    let area = grid.cell_area();
    let values: Vec<f64> = samples
        .latent
        .iter()
        .zip(&samples.latent_draws)
        .map(|(w, &k)| {
            if outside > 0 {
                return f64::NEG_INFINITY;
            }
            let beta = &samples.beta[k];
            let lambda: Vec<f64> = samples
                .active
                .iter()
                .zip(w)
                .map(|(&c, wi)| {
                    let xb = beta[0]
                        + beta[1..]
                            .iter()
                            .zip(covariates)
                            .map(|(b, x)| b * x.values()[c])
                            .sum::<f64>();
                    (xb + wi).exp()
                })
                .collect();
            nhpp_from_counts(&lambda, &counts, area)
        })
        .collect();
    Ok(LoglikSummary {
        mean: stats::mean(&values),
        sd: stats::sd(&values),
        values,
    })
}

/// `(1/|D|) int |estimated - truth|^order` for order 1 or 2.
pub fn intensity_discrepancy(estimated: &GriddedField, truth: &GriddedField, order: u8) -> Result<f64> {
    estimated.grid().ensure_same(truth.grid(), "intensity discrepancy")?;
    let power = match order {
        1 => 1,
        2 => 2,
        other => return Err(Error::Config(format!("discrepancy order must be 1 or 2, got {other}"))),
    };
    let grid = estimated.grid();
    let integral: f64 = estimated
        .values()
        .iter()
        .zip(truth.values())
        .map(|(e, t)| (e - t).abs().powi(power) * grid.cell_area())
        .sum();
    Ok(integral / grid.area())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub lower_95: f64,
    pub upper_95: f64,
    /// Realized number of animals in the region.
    pub true_count: u64,
    /// Integral of the true intensity over the region.
    pub true_abundance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub model: String,
    /// Whole study region first, then named regions.
    pub abundance: Vec<RegionSummary>,
    pub rmse_log_intensity: f64,
    pub rps: f64,
    pub full_data_loglik_mean: f64,
    pub full_data_loglik_sd: f64,
    /// Area-normalized L1 discrepancy of the posterior mean intensity.
    pub intensity_l1: f64,
    /// Area-normalized integrated squared discrepancy.
    pub intensity_l2: f64,
    /// Whether the 95% interval of `lambda(D)` covers the realized count.
    pub interval_covers_count: bool,
}

fn summarize(name: &str, draws: &[f64], true_count: u64, true_abundance: f64) -> RegionSummary {
    RegionSummary {
        name: name.to_string(),
        mean: stats::mean(draws),
        sd: stats::sd(draws),
        lower_95: stats::quantile(draws, 0.025),
        upper_95: stats::quantile(draws, 0.975),
        true_count,
        true_abundance,
    }
}

/// Scores `samples` against the true intensity and realized pattern.
/// `regions` must match the named regions recorded during sampling.
pub fn evaluate(
    samples: &PosteriorSamples,
    covariates: &[GriddedField],
    truth: &GriddedField,
    true_pattern: &PointPattern,
    regions: &[(String, CellMask)],
    seed: u64,
) -> Result<EvaluationReport> {
    if samples.is_empty() {
        return Err(Error::Config("no posterior draws to evaluate".into()));
    }
    let grid = &samples.grid;
    grid.ensure_same(truth.grid(), "true intensity")?;
    let study = CellMask::new(*grid, {
        let mut cells = vec![false; grid.n_cells()];
        for &c in &samples.active {
            cells[c] = true;
        }
        cells
    })?;
    let true_n = count_in_region(true_pattern, &study) as u64;
    let mut abundance = vec![summarize(
        "total",
        &samples.abundance,
        true_n,
        truth.integrate_masked(&study)?,
    )];
    for (name, mask) in regions {
        let draws = samples
            .region(name)
            .ok_or_else(|| Error::Config(format!("region '{name}' was not recorded during sampling")))?;
        let region = mask.intersect(&study)?;
        abundance.push(summarize(
            name,
            draws,
            count_in_region(true_pattern, &region) as u64,
            truth.integrate_masked(&region)?,
        ));
    }
    let total = &abundance[0];
    let interval_covers_count = (total.lower_95..=total.upper_95).contains(&(true_n as f64));
    let predictive = predictive_counts(&samples.abundance, seed);
    let fdl = full_data_loglik(samples, true_pattern, covariates)?;
    // Cells outside the study region carry no estimated intensity.
    let indicator = GriddedField::new(*grid, study.cells().iter().map(|&b| f64::from(u8::from(b))).collect())?;
    let masked_truth = truth.zip_with(&indicator, |t, m| t * m)?;
    Ok(EvaluationReport {
        model: samples.meta.sources.label().to_string(),
        rmse_log_intensity: rmse_log_intensity_masked(&samples.mean_intensity, truth, Some(&study))?,
        rps: rps(&predictive, true_n),
        full_data_loglik_mean: fdl.mean,
        full_data_loglik_sd: fdl.sd,
        intensity_l1: intensity_discrepancy(&samples.mean_intensity, &masked_truth, 1)?,
        intensity_l2: intensity_discrepancy(&samples.mean_intensity, &masked_truth, 2)?,
        interval_covers_count,
        abundance,
    })
}
