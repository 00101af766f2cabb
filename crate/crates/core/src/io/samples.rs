//! On-disk layout of a posterior sample set.
//!
//! A directory holding `draws.csv` (one row per kept draw), `latent.csv`
//! (one row per stored latent field, one column per active cell), the
//! posterior mean rasters and `run.json` with the grid, active cells and run
//! metadata. Floats are written in shortest round-trip form, so reading a
//! written set reproduces it exactly.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::raster::{read_raster, write_raster};
use crate::error::{Error, Result};
use crate::grid::{CellMask, GridSpec};
use crate::inference::{PosteriorSamples, RunMeta};

pub const DRAWS_FILE: &str = "draws.csv";
pub const LATENT_FILE: &str = "latent.csv";
pub const MEAN_INTENSITY_FILE: &str = "mean_intensity.asc";
pub const MEAN_LOG_INTENSITY_FILE: &str = "mean_log_intensity.asc";
pub const RUN_FILE: &str = "run.json";

const REGION_PREFIX: &str = "abundance:";

#[derive(Debug, Serialize, Deserialize)]
struct RunFile {
    grid: GridSpec,
    active: Vec<usize>,
    n_beta: usize,
    meta: RunMeta,
}

fn fmt(v: f64) -> String {
    format!("{v:?}")
}

fn write_csv(path: &Path, header: Vec<String>, rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(&header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_samples(dir: impl AsRef<Path>, samples: &PosteriorSamples) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let n_beta = samples.beta.first().map_or(0, Vec::len);

    let mut header = vec!["draw".to_string()];
    header.extend((0..n_beta).map(|j| format!("beta_{j}")));
    header.extend(["sigma2", "pi", "c", "loglik", "abundance"].map(String::from));
    header.extend(samples.region_abundance.iter().map(|(n, _)| format!("{REGION_PREFIX}{n}")));
    let rows = (0..samples.len()).map(|k| {
        let mut row = vec![k.to_string()];
        row.extend(samples.beta[k].iter().map(|&b| fmt(b)));
        row.extend(
            [
                samples.sigma2[k],
                samples.pi[k],
                samples.c[k],
                samples.loglik[k],
                samples.abundance[k],
            ]
            .map(fmt),
        );
        row.extend(samples.region_abundance.iter().map(|(_, v)| fmt(v[k])));
        row
    });
    write_csv(&dir.join(DRAWS_FILE), header, rows)?;

    let mut header = vec!["draw".to_string()];
    header.extend(samples.active.iter().map(|c| format!("cell_{c}")));
    let rows = samples.latent.iter().zip(&samples.latent_draws).map(|(w, &k)| {
        let mut row = vec![k.to_string()];
        row.extend(w.iter().map(|&v| fmt(v)));
        row
    });
    write_csv(&dir.join(LATENT_FILE), header, rows)?;

    let mask = active_mask(&samples.grid, &samples.active)?;
    write_raster(dir.join(MEAN_INTENSITY_FILE), &samples.mean_intensity, Some(&mask))?;
    write_raster(dir.join(MEAN_LOG_INTENSITY_FILE), &samples.mean_log_intensity, Some(&mask))?;

    let run = RunFile {
        grid: samples.grid,
        active: samples.active.clone(),
        n_beta,
        meta: samples.meta.clone(),
    };
    let path = dir.join(RUN_FILE);
    let json = serde_json::to_string_pretty(&run).map_err(|e| Error::parse(&path, e.to_string()))?;
    std::fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))
}

fn active_mask(grid: &GridSpec, active: &[usize]) -> Result<CellMask> {
    let mut cells = vec![false; grid.n_cells()];
    for &c in active {
        cells[c] = true;
    }
    CellMask::new(*grid, cells)
}

fn parse_f64(path: &Path, row: usize, s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::parse(path, format!("row {row}: invalid number '{s}'")))
}

fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut r = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        other => Error::parse(path, format!("{other:?}")),
    })?;
    let header = r.headers()?.iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|rec| rec.iter().map(String::from).collect()))
        .collect::<std::result::Result<_, _>>()?;
    Ok((header, rows))
}

pub fn read_samples(dir: impl AsRef<Path>) -> Result<PosteriorSamples> {
    let dir = dir.as_ref();
    let run_path = dir.join(RUN_FILE);
    let text = std::fs::read_to_string(&run_path).map_err(|e| Error::io(&run_path, e))?;
    let run: RunFile = serde_json::from_str(&text).map_err(|e| Error::parse(&run_path, e.to_string()))?;

    let draws_path = dir.join(DRAWS_FILE);
    let (header, rows) = read_csv(&draws_path)?;
    let fixed = 1 + run.n_beta + 5;
    if header.len() < fixed {
        return Err(Error::parse(&draws_path, format!("expected at least {fixed} columns")));
    }
    let region_names: Vec<String> = header[fixed..]
        .iter()
        .map(|h| {
            h.strip_prefix(REGION_PREFIX)
                .map(String::from)
                .ok_or_else(|| Error::parse(&draws_path, format!("unexpected column '{h}'")))
        })
        .collect::<Result<_>>()?;
    let mut beta = Vec::with_capacity(rows.len());
    let mut scalars = vec![Vec::with_capacity(rows.len()); 5];
    let mut regions = vec![Vec::with_capacity(rows.len()); region_names.len()];
    for (i, row) in rows.iter().enumerate() {
        let vals: Vec<f64> = row[1..]
            .iter()
            .map(|s| parse_f64(&draws_path, i + 1, s))
            .collect::<Result<_>>()?;
        beta.push(vals[..run.n_beta].to_vec());
        for (s, v) in scalars.iter_mut().zip(&vals[run.n_beta..run.n_beta + 5]) {
            s.push(*v);
        }
        for (r, v) in regions.iter_mut().zip(&vals[run.n_beta + 5..]) {
            r.push(*v);
        }
    }
    let [sigma2, pi, c, loglik, abundance]: [Vec<f64>; 5] = scalars.try_into().expect("five scalar columns");

    let latent_path = dir.join(LATENT_FILE);
    let (header, rows) = read_csv(&latent_path)?;
    if header.len() != run.active.len() + 1 {
        return Err(Error::parse(
            &latent_path,
            format!("{} columns for {} active cells", header.len(), run.active.len()),
        ));
    }
    let mut latent = Vec::with_capacity(rows.len());
    let mut latent_draws = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        let k: usize = row[0]
            .parse()
            .map_err(|_| Error::parse(&latent_path, format!("row {}: invalid draw index", i + 1)))?;
        if k >= sigma2.len() {
            return Err(Error::parse(&latent_path, format!("row {}: draw {k} does not exist", i + 1)));
        }
        latent_draws.push(k);
        latent.push(row[1..].iter().map(|s| parse_f64(&latent_path, i + 1, s)).collect::<Result<_>>()?);
    }

    let mean_intensity = read_raster(dir.join(MEAN_INTENSITY_FILE))?.field;
    let mean_log_intensity = read_raster(dir.join(MEAN_LOG_INTENSITY_FILE))?.field;
    run.grid.ensure_same(mean_intensity.grid(), "mean intensity raster")?;
    Ok(PosteriorSamples {
        grid: run.grid,
        active: run.active,
        beta,
        sigma2,
        pi,
        c,
        loglik,
        abundance,
        region_abundance: region_names.into_iter().zip(regions).collect(),
        latent,
        latent_draws,
        mean_intensity,
        mean_log_intensity,
        meta: run.meta,
    })
}
