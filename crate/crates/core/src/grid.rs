//! Rectangular study domain, its regular-grid discretization, and midpoint
//! quadrature of gridded surfaces.
//!
//! Cells are indexed row-major starting from the south-west corner: cell
//! `row * nx + col` has centroid
//! `(x_min + (col + 0.5) * res, y_min + (row + 0.5) * res)`.
//! Every surface is evaluated at centroids and treated as constant within a
//! cell, so integrals are `sum(value * cell_area)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const DIVISIBILITY_TOL: f64 = 1e-9;

/// A planar location in kilometres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Bounds {
    pub const fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Self {
        Bounds {
            x_min,
            x_max,
            y_min,
            y_max,
        }
    }

    pub fn contains(&self, p: &Point) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.y >= self.y_min && p.y <= self.y_max
    }

    pub fn area(&self) -> f64 {
        (self.x_max - self.x_min) * (self.y_max - self.y_min)
    }
}

/// Regular discretization of a rectangular domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    bounds: Bounds,
    resolution: f64,
    nx: usize,
    ny: usize,
}

fn cell_count(extent: f64, resolution: f64, axis: &str) -> Result<usize> {
    let ratio = extent / resolution;
    let rounded = ratio.round();
    if rounded < 1.0 || ((ratio - rounded) / rounded).abs() > DIVISIBILITY_TOL {
        return Err(Error::Config(format!(
            "{axis} extent {extent} is not a positive integer multiple of resolution {resolution}"
        )));
    }
    Ok(rounded as usize)
}

impl GridSpec {
    /// Builds the grid, failing if the resolution does not divide both
    /// extents.
    pub fn new(bounds: Bounds, resolution: f64) -> Result<Self> {
        let finite = [bounds.x_min, bounds.x_max, bounds.y_min, bounds.y_max, resolution]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Config("grid bounds and resolution must be finite".into()));
        }
        if !(resolution > 0.0) {
            return Err(Error::Config(format!(
                "grid resolution must be positive, got {resolution}"
            )));
        }
        if bounds.x_max <= bounds.x_min || bounds.y_max <= bounds.y_min {
            return Err(Error::Config(format!(
                "grid bounds are not well ordered: x [{}, {}], y [{}, {}]",
                bounds.x_min, bounds.x_max, bounds.y_min, bounds.y_max
            )));
        }
        let nx = cell_count(bounds.x_max - bounds.x_min, resolution, "x")?;
        let ny = cell_count(bounds.y_max - bounds.y_min, resolution, "y")?;
        Ok(GridSpec {
            bounds,
            resolution,
            nx,
            ny,
        })
    }

    pub fn bounds(&self) -> Bounds {
        self.bounds
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn n_cells(&self) -> usize {
        self.nx * self.ny
    }

    pub fn cell_area(&self) -> f64 {
        self.resolution * self.resolution
    }

    pub fn area(&self) -> f64 {
        self.bounds.area()
    }

    pub fn centroid(&self, cell: usize) -> Point {
        let row = cell / self.nx;
        let col = cell % self.nx;
        Point {
            x: self.bounds.x_min + (col as f64 + 0.5) * self.resolution,
            y: self.bounds.y_min + (row as f64 + 0.5) * self.resolution,
        }
    }

    /// Centroids in row-major order.
    pub fn centroids(&self) -> impl ExactSizeIterator<Item = Point> + '_ {
        (0..self.n_cells()).map(move |c| self.centroid(c))
    }

    /// Lower-left corner of a cell.
    pub fn cell_origin(&self, cell: usize) -> Point {
        let c = self.centroid(cell);
        Point::new(c.x - 0.5 * self.resolution, c.y - 0.5 * self.resolution)
    }

    /// Index of the cell containing `p`; points on the upper/right domain
    /// edge belong to the last cell. `None` outside the domain.
    pub fn cell_of(&self, p: &Point) -> Option<usize> {
        if !self.bounds.contains(p) {
            return None;
        }
        let col = (((p.x - self.bounds.x_min) / self.resolution).floor() as usize).min(self.nx - 1);
        let row = (((p.y - self.bounds.y_min) / self.resolution).floor() as usize).min(self.ny - 1);
        Some(row * self.nx + col)
    }

    pub fn contains(&self, p: &Point) -> bool {
        self.bounds.contains(p)
    }

    /// Same geometry up to floating-point noise in the bounds.
    pub fn same_geometry(&self, other: &GridSpec) -> bool {
        let tol = 1e-9 * self.resolution.max(1.0);
        self.nx == other.nx
            && self.ny == other.ny
            && (self.resolution - other.resolution).abs() <= tol
            && (self.bounds.x_min - other.bounds.x_min).abs() <= tol
            && (self.bounds.y_min - other.bounds.y_min).abs() <= tol
    }

    pub(crate) fn describe(&self) -> String {
        format!(
            "{}x{} cells of {} km from ({}, {})",
            self.nx, self.ny, self.resolution, self.bounds.x_min, self.bounds.y_min
        )
    }

    pub(crate) fn ensure_same(&self, other: &GridSpec, what: &str) -> Result<()> {
        if self.same_geometry(other) {
            Ok(())
        } else {
            Err(Error::Dimension(format!(
                "{what}: grid {} does not match grid {}",
                self.describe(),
                other.describe()
            )))
        }
    }
}

/// `build_grid` in operation form.
pub fn build_grid(bounds: Bounds, resolution: f64) -> Result<GridSpec> {
    GridSpec::new(bounds, resolution)
}

/// One finite real value per grid cell, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GriddedField {
    grid: GridSpec,
    values: Vec<f64>,
}

impl GriddedField {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_cells() {
            return Err(Error::Dimension(format!(
                "field has {} values but the grid has {} cells",
                values.len(),
                grid.n_cells()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!(
                "field value at cell {i} is not finite ({})",
                values[i]
            )));
        }
        Ok(GriddedField { grid, values })
    }

    pub fn constant(grid: GridSpec, value: f64) -> Self {
        assert!(value.is_finite(), "constant field value must be finite");
        GriddedField {
            grid,
            values: vec![value; grid.n_cells()],
        }
    }

    /// Evaluates `f` at every centroid.
    pub fn from_fn(grid: GridSpec, mut f: impl FnMut(Point) -> f64) -> Result<Self> {
        let values = grid.centroids().map(&mut f).collect();
        GriddedField::new(grid, values)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn value_at(&self, p: &Point) -> Option<f64> {
        self.grid.cell_of(p).map(|c| self.values[c])
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        GriddedField::new(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    /// Cellwise combination of two fields on the same grid.
    pub fn zip_with(&self, other: &GriddedField, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.grid.ensure_same(&other.grid, "zip_with")?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        GriddedField::new(self.grid, values)
    }

    pub fn integrate(&self) -> f64 {
        integrate_field(self)
    }

    /// Integral restricted to the cells selected by `mask`.
    pub fn integrate_masked(&self, mask: &CellMask) -> Result<f64> {
        self.grid.ensure_same(mask.grid(), "integrate_masked")?;
        let sum: f64 = self
            .values
            .iter()
            .zip(mask.cells())
            .filter(|(_, &keep)| keep)
            .map(|(v, _)| v)
            .sum();
        Ok(sum * self.grid.cell_area())
    }
}

/// Midpoint quadrature: `sum(value) * cell_area`.
pub fn integrate_field(field: &GriddedField) -> f64 {
    field.values.iter().sum::<f64>() * field.grid.cell_area()
}

/// Boolean selection of grid cells: a coastline/NODATA mask, or a subregion
/// used for local abundance.
#[derive(Debug, Clone, PartialEq)]
pub struct CellMask {
    grid: GridSpec,
    cells: Vec<bool>,
}

impl CellMask {
    pub fn new(grid: GridSpec, cells: Vec<bool>) -> Result<Self> {
        if cells.len() != grid.n_cells() {
            return Err(Error::Dimension(format!(
                "mask has {} entries but the grid has {} cells",
                cells.len(),
                grid.n_cells()
            )));
        }
        Ok(CellMask { grid, cells })
    }

    pub fn all(grid: GridSpec) -> Self {
        CellMask {
            grid,
            cells: vec![true; grid.n_cells()],
        }
    }

    /// Cells whose centroid lies in the closed rectangle.
    pub fn rectangle(grid: GridSpec, region: Bounds) -> Self {
        let cells = grid.centroids().map(|c| region.contains(&c)).collect();
        CellMask { grid, cells }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn cells(&self) -> &[bool] {
        &self.cells
    }

    pub fn contains_cell(&self, cell: usize) -> bool {
        self.cells[cell]
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    /// Indices of selected cells in ascending order.
    pub fn active_cells(&self) -> Vec<usize> {
        self.cells
            .iter()
            .enumerate()
            .filter_map(|(i, &c)| c.then_some(i))
            .collect()
    }

    pub fn intersect(&self, other: &CellMask) -> Result<CellMask> {
        self.grid.ensure_same(&other.grid, "mask intersection")?;
        let cells = self
            .cells
            .iter()
            .zip(&other.cells)
            .map(|(&a, &b)| a && b)
            .collect();
        Ok(CellMask {
            grid: self.grid,
            cells,
        })
    }
}
