//! Abundance draws and posterior-predictive counts.

use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{CellMask, GriddedField};
use crate::rng;

use super::PosteriorSamples;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbundanceDraws {
    /// `int_region lambda` per draw.
    pub abundance: Vec<f64>,
    /// One `Poisson(abundance)` count per draw.
    pub predictive: Vec<u64>,
}

/// One posterior-predictive count per abundance draw.
pub fn predictive_counts(abundance: &[f64], seed: u64) -> Vec<u64> {
    let mut r = rng::seeded(seed);
    abundance
        .iter()
        .map(|&m| {
            if m > 0.0 {
                Poisson::new(m).expect("positive finite mean").sample(&mut r) as u64
            } else {
                0
            }
        })
        .collect()
}

/// Integrates `exp(X beta + w)` over `region` (the whole study region when
/// `None`) for every draw with a stored latent field.
pub fn posterior_abundance(
    samples: &PosteriorSamples,
    covariates: &[GriddedField],
    region: Option<&CellMask>,
    seed: u64,
) -> Result<AbundanceDraws> {
    if samples.latent.is_empty() {
        return Err(Error::Config("no stored latent draws; set a positive latent stride".into()));
    }
    let grid = &samples.grid;
    for (j, x) in covariates.iter().enumerate() {
        grid.ensure_same(x.grid(), &format!("covariate {}", j + 1))?;
    }
    if let Some(m) = region {
        grid.ensure_same(m.grid(), "abundance region")?;
    }
    let p = samples.beta.first().map_or(0, |b| b.len());
    if p != covariates.len() + 1 {
        return Err(Error::Dimension(format!(
            "draws have {p} coefficients but {} covariates were supplied",
            covariates.len()
        )));
    }
    let cells: Vec<(usize, usize)> = samples
        .active
        .iter()
        .enumerate()
        .filter(|(_, &c)| region.map_or(true, |m| m.contains_cell(c)))
        .map(|(i, &c)| (i, c))
        .collect();
    let area = grid.cell_area();
    let abundance: Vec<f64> = samples
        .latent
        .iter()
        .zip(&samples.latent_draws)
        .map(|(w, &k)| {
            let beta = &samples.beta[k];
            area * cells
                .iter()
                .map(|&(i, c)| {
                    let xb: f64 = beta[0]
                        + beta[1..]
                            .iter()
                            .zip(covariates)
                            .map(|(b, x)| b * x.values()[c])
                            .sum::<f64>();
                    (xb + w[i]).exp()
                })
                .sum::<f64>()
        })
        .collect();
    let predictive = predictive_counts(&abundance, seed);
    Ok(AbundanceDraws { abundance, predictive })
}
