//! Aggregation of sweep rows into per-scenario summaries, table-shaped
//! views and the trend checks the study design is meant to reveal.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{FitRow, Level, RegionRow, MODERATE_SCENARIO};
use crate::stats;

/// Replicate averages of one model under one scenario. Standard deviations
/// are averages of posterior standard deviations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub scenario: usize,
    pub model: String,
    pub abundance_level: Level,
    pub aerial_level: Level,
    pub pam_level: Level,
    pub surfacing_level: Level,
    pub calls_level: Level,
    pub replicates_ok: usize,
    pub replicates_failed: usize,
    pub true_count: Option<f64>,
    pub expected_abundance: Option<f64>,
    pub abundance_mean: Option<f64>,
    pub abundance_sd: Option<f64>,
    /// Fraction of replicates whose 95% interval covers the realized count.
    pub coverage: Option<f64>,
    pub rmse_log_intensity: Option<f64>,
    pub rps: Option<f64>,
    pub loglik_mean: Option<f64>,
    pub loglik_sd: Option<f64>,
    pub intensity_l1: Option<f64>,
    pub intensity_l2: Option<f64>,
}

fn avg(rows: &[&FitRow], f: impl Fn(&FitRow) -> Option<f64>) -> Option<f64> {
    let v: Vec<f64> = rows.iter().filter_map(|r| f(r)).collect();
    (!v.is_empty()).then(|| stats::mean(&v))
}

const MODEL_ORDER: [&str; 3] = ["aerial", "pam", "fused"];

fn model_rank(model: &str) -> usize {
    MODEL_ORDER.iter().position(|m| *m == model).unwrap_or(MODEL_ORDER.len())
}

/// One summary per (scenario, model), ordered by scenario then model.
pub fn summarize_fits(rows: &[FitRow]) -> Vec<FitSummary> {
    let mut groups: BTreeMap<(usize, usize, String), Vec<&FitRow>> = BTreeMap::new();
    for r in rows {
        groups
            .entry((r.scenario, model_rank(&r.model), r.model.clone()))
            .or_default()
            .push(r);
    }
    groups
        .into_iter()
        .map(|((scenario, _, model), all)| {
            let ok: Vec<&FitRow> = all.iter().copied().filter(|r| r.ok()).collect();
            let first = all[0];
            FitSummary {
                scenario,
                model,
                abundance_level: first.abundance_level,
                aerial_level: first.aerial_level,
                pam_level: first.pam_level,
                surfacing_level: first.surfacing_level,
                calls_level: first.calls_level,
                replicates_ok: ok.len(),
                replicates_failed: all.len() - ok.len(),
                true_count: avg(&ok, |r| r.true_count.map(|n| n as f64)),
                expected_abundance: avg(&ok, |r| r.expected_abundance),
                abundance_mean: avg(&ok, |r| r.abundance_mean),
                abundance_sd: avg(&ok, |r| r.abundance_sd),
                coverage: avg(&ok, |r| r.covers.map(|c| f64::from(u8::from(c)))),
                rmse_log_intensity: avg(&ok, |r| r.rmse_log_intensity),
                rps: avg(&ok, |r| r.rps),
                loglik_mean: avg(&ok, |r| r.loglik_mean),
                loglik_sd: avg(&ok, |r| r.loglik_sd),
                intensity_l1: avg(&ok, |r| r.intensity_l1),
                intensity_l2: avg(&ok, |r| r.intensity_l2),
            }
        })
        .collect()
}

/// A cell of a two-way table. `-` marks a factor that does not apply
/// because the model omits that data source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub row: String,
    pub column: String,
    pub model: String,
    pub replicates: usize,
    pub true_count: Option<f64>,
    pub abundance_mean: Option<f64>,
    pub abundance_sd: Option<f64>,
    pub rmse_log_intensity: Option<f64>,
}

fn cell(row: String, column: String, s: &FitSummary) -> TableRow {
    TableRow {
        row,
        column,
        model: s.model.clone(),
        replicates: s.replicates_ok,
        true_count: s.true_count,
        abundance_mean: s.abundance_mean,
        abundance_sd: s.abundance_sd,
        rmse_log_intensity: s.rmse_log_intensity,
    }
}

fn two_way(
    summaries: &[FitSummary],
    scenarios: std::ops::RangeInclusive<usize>,
    row_factor: impl Fn(&FitSummary) -> Level,
    column_factor: impl Fn(&FitSummary) -> Level,
) -> Vec<TableRow> {
    let mut out: Vec<TableRow> = Vec::new();
    for s in summaries.iter().filter(|s| scenarios.contains(&s.scenario)) {
        let (row, column) = match s.model.as_str() {
            "aerial" => ("-".to_string(), column_factor(s).label().to_string()),
            "pam" => (row_factor(s).label().to_string(), "-".to_string()),
            _ => (row_factor(s).label().to_string(), column_factor(s).label().to_string()),
        };
        // Single-source fits repeat across scenarios; keep one.
        if !out.iter().any(|t| t.row == row && t.column == column && t.model == s.model) {
            out.push(cell(row, column, s));
        }
    }
    out
}

/// Scenarios 1-9: PAM sampling level by aerial sampling level.
pub fn sampling_intensity_table(summaries: &[FitSummary]) -> Vec<TableRow> {
    two_way(summaries, 1..=9, |s| s.pam_level, |s| s.aerial_level)
}

/// Scenarios 10-13: call-rate level by surfacing level.
pub fn detectability_table(summaries: &[FitSummary]) -> Vec<TableRow> {
    two_way(summaries, 10..=13, |s| s.calls_level, |s| s.surfacing_level)
}

/// Scenarios 14, 5 and 15: every model at low, moderate and high abundance.
pub fn abundance_table(summaries: &[FitSummary]) -> Vec<TableRow> {
    let mut out: Vec<TableRow> = summaries
        .iter()
        .filter(|s| [14, MODERATE_SCENARIO, 15].contains(&s.scenario))
        .map(|s| cell(s.abundance_level.label().to_string(), s.model.clone(), s))
        .collect();
    out.sort_by_key(|t| {
        (
            model_rank(&t.column),
            Level::ALL.iter().position(|l| l.label() == t.row),
        )
    });
    out
}

/// The all-moderate scenario, one row per model.
pub fn main_table(summaries: &[FitSummary]) -> Vec<FitSummary> {
    summaries
        .iter()
        .filter(|s| s.scenario == MODERATE_SCENARIO)
        .cloned()
        .collect()
}

/// Replicate averages of one model within one subregion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionAverage {
    pub model: String,
    pub region: String,
    pub replicates: usize,
    pub true_count: f64,
    pub expected_abundance: f64,
    pub abundance_mean: f64,
    pub abundance_sd: f64,
    pub rmse_log_intensity: f64,
}

/// Subregion averages for the all-moderate scenario.
pub fn region_table(regions: &[RegionRow]) -> Vec<RegionAverage> {
    let order = ["left", "middle", "right"];
    let mut groups: BTreeMap<(usize, Option<usize>, String), Vec<&RegionRow>> = BTreeMap::new();
    for r in regions.iter().filter(|r| r.scenario == MODERATE_SCENARIO) {
        let key = (model_rank(&r.model), order.iter().position(|o| *o == r.region), r.region.clone());
        groups.entry(key).or_default().push(r);
    }
    groups
        .into_values()
        .map(|g| {
            let m = |f: &dyn Fn(&RegionRow) -> f64| stats::mean(&g.iter().map(|r| f(r)).collect::<Vec<_>>());
            RegionAverage {
                model: g[0].model.clone(),
                region: g[0].region.clone(),
                replicates: g.len(),
                true_count: m(&|r| r.true_count as f64),
                expected_abundance: m(&|r| r.expected_abundance),
                abundance_mean: m(&|r| r.abundance_mean),
                abundance_sd: m(&|r| r.abundance_sd),
                rmse_log_intensity: m(&|r| r.rmse_log_intensity),
            }
        })
        .collect()
}

/// Rank correlation between a sampling level and replicate-centered RMSE.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Trend {
    pub rho: f64,
    /// One-sided permutation p-value for a negative correlation.
    pub p_value: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelComparison {
    pub replicates: usize,
    pub fused_coverage: f64,
    pub mean_sd_aerial: f64,
    pub mean_sd_pam: f64,
    pub mean_sd_fused: f64,
    pub mean_rmse_aerial: f64,
    pub mean_rmse_pam: f64,
    pub mean_rmse_fused: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrendChecks {
    /// Fused RMSE against aerial level with the PAM level held fixed.
    pub aerial_trend: Option<Trend>,
    /// Fused RMSE against PAM level with the aerial level held fixed.
    pub pam_trend: Option<Trend>,
    /// Replicates with fused RMSE strictly increasing in abundance level,
    /// out of replicates with all three levels.
    pub abundance_ordered: Option<(usize, usize)>,
    pub moderate: Option<ModelComparison>,
}

const PERMUTATIONS: usize = 9999;

fn fused_rmse(rows: &[FitRow]) -> BTreeMap<(usize, usize), f64> {
    rows.iter()
        .filter(|r| r.model == "fused")
        .filter_map(|r| r.rmse_log_intensity.map(|v| ((r.scenario, r.replicate), v)))
        .collect()
}

/// Pools (level, RMSE) over replicates and levels of the held factor after
/// subtracting the mean of each complete three-level group.
fn trend(rows: &[FitRow], varied: impl Fn(&FitRow) -> Level, held: impl Fn(&FitRow) -> Level, seed: u64) -> Option<Trend> {
    let mut groups: BTreeMap<(usize, Level), Vec<(f64, f64)>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.model == "fused" && (1..=9).contains(&r.scenario)) {
        if let Some(v) = r.rmse_log_intensity {
            groups
                .entry((r.replicate, held(r)))
                .or_default()
                .push(((varied(r).rank()) as f64, v));
        }
    }
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for g in groups.values().filter(|g| g.len() == 3) {
        let m = g.iter().map(|p| p.1).sum::<f64>() / 3.0;
        for &(lvl, v) in g {
            x.push(lvl);
            y.push(v - m);
        }
    }
    (x.len() >= 6).then(|| Trend {
        rho: stats::spearman(&x, &y),
        p_value: stats::spearman_negative_pvalue(&x, &y, PERMUTATIONS, seed),
        points: x.len(),
    })
}

fn comparison(rows: &[FitRow]) -> Option<ModelComparison> {
    let of = |model: &str| -> Vec<&FitRow> {
        rows.iter()
            .filter(|r| r.scenario == MODERATE_SCENARIO && r.model == model && r.ok())
            .collect()
    };
    let (a, p, f) = (of("aerial"), of("pam"), of("fused"));
    if a.is_empty() || p.is_empty() || f.is_empty() {
        return None;
    }
    Some(ModelComparison {
        replicates: f.len(),
        fused_coverage: avg(&f, |r| r.covers.map(|c| f64::from(u8::from(c))))?,
        mean_sd_aerial: avg(&a, |r| r.abundance_sd)?,
        mean_sd_pam: avg(&p, |r| r.abundance_sd)?,
        mean_sd_fused: avg(&f, |r| r.abundance_sd)?,
        mean_rmse_aerial: avg(&a, |r| r.rmse_log_intensity)?,
        mean_rmse_pam: avg(&p, |r| r.rmse_log_intensity)?,
        mean_rmse_fused: avg(&f, |r| r.rmse_log_intensity)?,
    })
}

pub fn trend_checks(rows: &[FitRow], seed: u64) -> TrendChecks {
    let fused = fused_rmse(rows);
    let replicates: Vec<usize> = {
        let mut r: Vec<usize> = rows.iter().map(|r| r.replicate).collect();
        r.sort_unstable();
        r.dedup();
        r
    };
    let mut complete = 0;
    let mut ordered = 0;
    for rep in replicates {
        let v: Option<Vec<f64>> = [14, MODERATE_SCENARIO, 15]
            .iter()
            .map(|&s| fused.get(&(s, rep)).copied())
            .collect();
        if let Some(v) = v {
            complete += 1;
            if v[0] < v[1] && v[1] < v[2] {
                ordered += 1;
            }
        }
    }
    TrendChecks {
        aerial_trend: trend(rows, |r| r.aerial_level, |r| r.pam_level, seed),
        pam_trend: trend(rows, |r| r.pam_level, |r| r.aerial_level, seed.wrapping_add(1)),
        abundance_ordered: (complete > 0).then_some((ordered, complete)),
        moderate: comparison(rows),
    }
}
