//! CSV tables for survey geometry, point patterns and observations.
//!
//! Writers emit exactly the schemas the readers accept, so simulated output
//! can be fed straight back into a fit.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::detection::Hydrophone;
use crate::error::{Error, Result};
use crate::grid::Point;
use crate::inference::AuxiliaryData;
use crate::lgcp::{Marks, PointPattern};
use crate::observe::{AerialObservation, PamObservation};
use crate::transect::Transect;

fn read_rows<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    reader
        .deserialize()
        .enumerate()
        .map(|(i, row)| row.map_err(|e| Error::parse(path, format!("row {}: {e}", i + 1))))
        .collect()
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        other => Error::parse(path, format!("{other:?}")),
    }
}

fn write_rows<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>, header: &[&str]) -> Result<()> {
    let mut writer = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    writer.write_record(header)?;
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

/// Keys in order of first appearance, each with its rows.
fn group_by_key<T>(rows: Vec<T>, key: impl Fn(&T) -> &str) -> Vec<(String, Vec<T>)> {
    let mut groups: Vec<(String, Vec<T>)> = Vec::new();
    let mut index: BTreeMap<String, usize> = BTreeMap::new();
    for row in rows {
        let k = key(&row).to_string();
        let i = *index.entry(k.clone()).or_insert_with(|| {
            groups.push((k, Vec::new()));
            groups.len() - 1
        });
        groups[i].1.push(row);
    }
    groups
}

#[derive(Debug, Serialize, Deserialize)]
struct TransectRow {
    transect_id: String,
    x_km: f64,
    y_km: f64,
    vertex_order: i64,
}

/// Transect vertices are ordered by `vertex_order` within each id.
pub fn read_transects(path: impl AsRef<Path>) -> Result<Vec<Transect>> {
    let path = path.as_ref();
    let rows: Vec<TransectRow> = read_rows(path)?;
    group_by_key(rows, |r| &r.transect_id)
        .into_iter()
        .map(|(id, mut rows)| {
            rows.sort_by_key(|r| r.vertex_order);
            if let Some(w) = rows.windows(2).find(|w| w[0].vertex_order == w[1].vertex_order) {
                return Err(Error::parse(
                    path,
                    format!("transect '{id}' repeats vertex_order {}", w[0].vertex_order),
                ));
            }
            Transect::new(id, rows.iter().map(|r| Point::new(r.x_km, r.y_km)).collect())
        })
        .collect()
}

pub fn write_transects(path: impl AsRef<Path>, transects: &[Transect]) -> Result<()> {
    let rows = transects.iter().flat_map(|t| {
        t.vertices().iter().enumerate().map(move |(i, v)| TransectRow {
            transect_id: t.id().to_string(),
            x_km: v.x,
            y_km: v.y,
            vertex_order: i as i64,
        })
    });
    write_rows(path.as_ref(), rows, &["transect_id", "x_km", "y_km", "vertex_order"])
}

#[derive(Debug, Serialize, Deserialize)]
struct HydrophoneRow {
    hydrophone_id: String,
    x_km: f64,
    y_km: f64,
    /// Empty means the run-wide ambient noise.
    #[serde(default)]
    noise_db: Option<f64>,
}

pub fn read_hydrophones(path: impl AsRef<Path>) -> Result<Vec<Hydrophone>> {
    let path = path.as_ref();
    let rows: Vec<HydrophoneRow> = read_rows(path)?;
    let mut seen = std::collections::BTreeSet::new();
    rows.into_iter()
        .map(|r| {
            if !seen.insert(r.hydrophone_id.clone()) {
                return Err(Error::parse(path, format!("duplicate hydrophone '{}'", r.hydrophone_id)));
            }
            Ok(Hydrophone::new(r.hydrophone_id, Point::new(r.x_km, r.y_km), r.noise_db))
        })
        .collect()
}

pub fn write_hydrophones(path: impl AsRef<Path>, hydrophones: &[Hydrophone]) -> Result<()> {
    let rows = hydrophones.iter().map(|h| HydrophoneRow {
        hydrophone_id: h.id.clone(),
        x_km: h.location.x,
        y_km: h.location.y,
        noise_db: h.noise_db,
    });
    write_rows(path.as_ref(), rows, &["hydrophone_id", "x_km", "y_km", "noise_db"])
}

#[derive(Debug, Serialize, Deserialize)]
struct PatternRow {
    x_km: f64,
    y_km: f64,
    #[serde(default)]
    surfaced: Option<bool>,
    #[serde(default)]
    calls: Option<u64>,
}

/// Marks are kept only when the file has a `surfaced` or `calls` column.
pub fn read_pattern(path: impl AsRef<Path>) -> Result<PointPattern> {
    let path = path.as_ref();
    let marked = {
        let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
        let headers = reader.headers().map_err(|e| csv_error(path, e))?;
        headers.iter().any(|h| matches!(h.trim(), "surfaced" | "calls"))
    };
    let rows: Vec<PatternRow> = read_rows(path)?;
    let points = rows.iter().map(|r| Point::new(r.x_km, r.y_km)).collect();
    if marked {
        let marks = rows
            .iter()
            .map(|r| Marks {
                surfaced: r.surfaced,
                calls: r.calls,
            })
            .collect();
        PointPattern::with_marks(points, marks)
    } else {
        Ok(PointPattern::new(points))
    }
}

pub fn write_pattern(path: impl AsRef<Path>, pattern: &PointPattern) -> Result<()> {
    let path = path.as_ref();
    match pattern.marks() {
        Some(marks) => {
            let rows = pattern.points().iter().zip(marks).map(|(p, m)| PatternRow {
                x_km: p.x,
                y_km: p.y,
                surfaced: m.surfaced,
                calls: m.calls,
            });
            write_rows(path, rows, &["x_km", "y_km", "surfaced", "calls"])
        }
        None => write_rows(path, pattern.points().iter().map(|p| (p.x, p.y)), &["x_km", "y_km"]),
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct DetectionRow {
    transect_id: String,
    x_km: f64,
    y_km: f64,
}

/// One block per transect that has detections, in order of first
/// appearance. Transects without rows have no detections.
pub fn read_aerial(path: impl AsRef<Path>) -> Result<Vec<AerialObservation>> {
    let rows: Vec<DetectionRow> = read_rows(path.as_ref())?;
    Ok(group_by_key(rows, |r| &r.transect_id)
        .into_iter()
        .map(|(id, rows)| AerialObservation {
            transect_id: id,
            detections: rows.iter().map(|r| Point::new(r.x_km, r.y_km)).collect(),
        })
        .collect())
}

pub fn write_aerial(path: impl AsRef<Path>, observations: &[AerialObservation]) -> Result<()> {
    let rows = observations.iter().flat_map(|o| {
        o.detections.iter().map(move |p| DetectionRow {
            transect_id: o.transect_id.clone(),
            x_km: p.x,
            y_km: p.y,
        })
    });
    write_rows(path.as_ref(), rows, &["transect_id", "x_km", "y_km"])
}

pub fn read_pam(path: impl AsRef<Path>) -> Result<Vec<PamObservation>> {
    read_rows(path.as_ref())
}

pub fn write_pam(path: impl AsRef<Path>, observations: &[PamObservation]) -> Result<()> {
    write_rows(path.as_ref(), observations, &["hydrophone_id", "count"])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum AuxKind {
    CallRate,
    Surfacing,
}

#[derive(Debug, Serialize, Deserialize)]
struct AuxRow {
    kind: AuxKind,
    value: f64,
}

/// Rows `kind,value` with kind `call_rate` or `surfacing`. The variance and
/// precision settings keep their defaults; they belong to the model config.
pub fn read_auxiliary(path: impl AsRef<Path>) -> Result<AuxiliaryData> {
    let rows: Vec<AuxRow> = read_rows(path.as_ref())?;
    let mut aux = AuxiliaryData::default();
    for r in rows {
        match r.kind {
            AuxKind::CallRate => aux.call_rates.push(r.value),
            AuxKind::Surfacing => aux.surfacing.push(r.value),
        }
    }
    Ok(aux)
}

pub fn write_auxiliary(path: impl AsRef<Path>, aux: &AuxiliaryData) -> Result<()> {
    let rows = aux
        .call_rates
        .iter()
        .map(|&v| AuxRow {
            kind: AuxKind::CallRate,
            value: v,
        })
        .chain(aux.surfacing.iter().map(|&v| AuxRow {
            kind: AuxKind::Surfacing,
            value: v,
        }));
    write_rows(path.as_ref(), rows, &["kind", "value"])
}
