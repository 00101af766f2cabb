//! ESRI ASCII grid rasters.
//!
//! Header keys `ncols`, `nrows`, `xllcorner` (or `xllcenter`), `yllcorner`
//! (or `yllcenter`), `cellsize` and optional `NODATA_value`, then `nrows`
//! rows of `ncols` values with the north row first. Fields are stored south
//! row first, so rows are flipped on the way in and out.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{Bounds, CellMask, GridSpec, GriddedField};

pub const DEFAULT_NODATA: f64 = -9999.0;

/// A raster field plus the cells that carried data. NODATA cells hold zero
/// in `field`.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    pub field: GriddedField,
    pub mask: CellMask,
}

impl Raster {
    pub fn grid(&self) -> &GridSpec {
        self.field.grid()
    }

    pub fn has_nodata(&self) -> bool {
        self.mask.count() < self.grid().n_cells()
    }
}

struct Header {
    ncols: usize,
    nrows: usize,
    x_corner: f64,
    y_corner: f64,
    cellsize: f64,
    nodata: f64,
}

fn parse_header_value<T: std::str::FromStr>(path: &Path, key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::parse(path, format!("header '{key}' has invalid value '{value}'")))
}

/// Parses raster text; `path` only labels errors.
pub fn parse_raster(text: &str, path: &Path) -> Result<Raster> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty()).peekable();
    let (mut ncols, mut nrows, mut cellsize) = (None, None, None);
    let (mut x, mut y) = (None, None);
    let mut nodata = DEFAULT_NODATA;
    while let Some(line) = lines.peek() {
        let mut parts = line.split_whitespace();
        let key = parts.next().unwrap_or_default();
        if !key.starts_with(|c: char| c.is_ascii_alphabetic()) {
            break;
        }
        let value = parts
            .next()
            .ok_or_else(|| Error::parse(path, format!("header '{key}' has no value")))?;
        match key.to_ascii_lowercase().as_str() {
            "ncols" => ncols = Some(parse_header_value::<usize>(path, key, value)?),
            "nrows" => nrows = Some(parse_header_value::<usize>(path, key, value)?),
            "cellsize" => cellsize = Some(parse_header_value::<f64>(path, key, value)?),
            "xllcorner" => x = Some((parse_header_value::<f64>(path, key, value)?, false)),
            "xllcenter" => x = Some((parse_header_value::<f64>(path, key, value)?, true)),
            "yllcorner" => y = Some((parse_header_value::<f64>(path, key, value)?, false)),
            "yllcenter" => y = Some((parse_header_value::<f64>(path, key, value)?, true)),
            "nodata_value" => nodata = parse_header_value(path, key, value)?,
            _ => return Err(Error::parse(path, format!("unknown header key '{key}'"))),
        }
        lines.next();
    }
    let missing = |k: &str| Error::parse(path, format!("header is missing '{k}'"));
    let cellsize = cellsize.ok_or_else(|| missing("cellsize"))?;
    let to_corner = |(v, centered): (f64, bool)| if centered { v - 0.5 * cellsize } else { v };
    let header = Header {
        ncols: ncols.ok_or_else(|| missing("ncols"))?,
        nrows: nrows.ok_or_else(|| missing("nrows"))?,
        x_corner: to_corner(x.ok_or_else(|| missing("xllcorner"))?),
        y_corner: to_corner(y.ok_or_else(|| missing("yllcorner"))?),
        cellsize,
        nodata,
    };
    if header.ncols == 0 || header.nrows == 0 {
        return Err(Error::parse(path, "raster has no cells"));
    }
    let grid = GridSpec::new(
        Bounds::new(
            header.x_corner,
            header.x_corner + header.ncols as f64 * header.cellsize,
            header.y_corner,
            header.y_corner + header.nrows as f64 * header.cellsize,
        ),
        header.cellsize,
    )
    .map_err(|e| Error::parse(path, e.to_string()))?;

    let n = header.ncols * header.nrows;
    let mut values = vec![0.0; n];
    let mut present = vec![true; n];
    let mut k = 0usize;
    for token in lines.flat_map(|l| l.split_whitespace()) {
        if k == n {
            return Err(Error::parse(path, format!("more than {n} values")));
        }
        let v: f64 = token
            .parse()
            .map_err(|_| Error::parse(path, format!("invalid value '{token}' at position {k}")))?;
        // File position k is row k / ncols counted from the north.
        let row = header.nrows - 1 - k / header.ncols;
        let cell = row * header.ncols + k % header.ncols;
        if v == header.nodata {
            present[cell] = false;
        } else if v.is_finite() {
            values[cell] = v;
        } else {
            return Err(Error::parse(path, format!("non-finite value '{token}' at position {k}")));
        }
        k += 1;
    }
    if k != n {
        return Err(Error::parse(path, format!("expected {n} values, found {k}")));
    }
    Ok(Raster {
        field: GriddedField::new(grid, values)?,
        mask: CellMask::new(grid, present)?,
    })
}

pub fn read_raster(path: impl AsRef<Path>) -> Result<Raster> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_raster(&text, path)
}

/// Reads a raster that must share the geometry of the run grid.
pub fn load_raster(path: impl AsRef<Path>, grid: &GridSpec) -> Result<Raster> {
    let path = path.as_ref();
    let raster = read_raster(path)?;
    if !raster.grid().same_geometry(grid) {
        return Err(Error::Alignment(format!(
            "{} has grid {}, the run grid is {}",
            path.display(),
            raster.grid().describe(),
            grid.describe()
        )));
    }
    Ok(raster)
}

/// Renders `field` with cells outside `mask` written as NODATA. Values use
/// the shortest representation that parses back to the same bits.
pub fn format_raster(field: &GriddedField, mask: Option<&CellMask>) -> Result<String> {
    let grid = field.grid();
    if let Some(m) = mask {
        grid.ensure_same(m.grid(), "raster mask")?;
    }
    let b = grid.bounds();
    let mut out = String::new();
    let _ = writeln!(out, "ncols {}", grid.nx());
    let _ = writeln!(out, "nrows {}", grid.ny());
    let _ = writeln!(out, "xllcorner {}", b.x_min);
    let _ = writeln!(out, "yllcorner {}", b.y_min);
    let _ = writeln!(out, "cellsize {}", grid.resolution());
    let _ = writeln!(out, "NODATA_value {DEFAULT_NODATA}");
    for row in (0..grid.ny()).rev() {
        for col in 0..grid.nx() {
            let cell = row * grid.nx() + col;
            if col > 0 {
                out.push(' ');
            }
            let v = field.values()[cell];
            if mask.map_or(true, |m| m.contains_cell(cell)) {
                if v == DEFAULT_NODATA {
                    return Err(Error::Domain(format!(
                        "cell {cell} holds the NODATA sentinel {DEFAULT_NODATA} as data"
                    )));
                }
                let _ = write!(out, "{v:?}");
            } else {
                let _ = write!(out, "{DEFAULT_NODATA}");
            }
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn write_raster(path: impl AsRef<Path>, field: &GriddedField, mask: Option<&CellMask>) -> Result<()> {
    let path = path.as_ref();
    let text = format_raster(field, mask)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;
    use rand::Rng;

    fn p() -> &'static Path {
        Path::new("test.asc")
    }

    #[test]
    fn single_cell() {
        let text = "ncols 1\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 1\nNODATA_value -9999\n7\n";
        let r = parse_raster(text, p()).unwrap();
        assert_eq!(r.field.values(), &[7.0]);
        assert_eq!(r.grid().n_cells(), 1);
        assert!(!r.has_nodata());
    }

    #[test]
    fn north_row_comes_first() {
        let text = "NCOLS 2\nNROWS 2\nXLLCENTER 0.5\nYLLCENTER 10.5\nCELLSIZE 1\n1 2\n3 4\n";
        let r = parse_raster(text, p()).unwrap();
        assert_eq!(r.grid().bounds(), Bounds::new(0.0, 2.0, 10.0, 12.0));
        // South row is stored first.
        assert_eq!(r.field.values(), &[3.0, 4.0, 1.0, 2.0]);
    }

    #[test]
    fn nodata_enters_the_mask() {
        let text = "ncols 3\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 2\nNODATA_value -1\n5 -1 6\n";
        let r = parse_raster(text, p()).unwrap();
        assert_eq!(r.mask.cells(), &[true, false, true]);
        assert_eq!(r.field.values(), &[5.0, 0.0, 6.0]);
        let back = parse_raster(&format_raster(&r.field, Some(&r.mask)).unwrap(), p()).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn malformed_files_are_rejected() {
        let base = "ncols 2\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 1\n";
        assert!(matches!(parse_raster(&format!("{base}1\n"), p()), Err(Error::Parse { .. })));
        assert!(matches!(parse_raster(&format!("{base}1 2 3\n"), p()), Err(Error::Parse { .. })));
        assert!(matches!(parse_raster(&format!("{base}1 x\n"), p()), Err(Error::Parse { .. })));
        assert!(matches!(parse_raster("ncols 2\n1 2\n", p()), Err(Error::Parse { .. })));
        assert!(matches!(parse_raster(&format!("{base}bogus 3\n1 2\n"), p()), Err(Error::Parse { .. })));
    }

    #[test]
    fn misaligned_raster_names_both_grids() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.asc");
        let g = GridSpec::new(Bounds::new(0.0, 4.0, 0.0, 4.0), 1.0).unwrap();
        write_raster(&path, &GriddedField::constant(g, 1.0), None).unwrap();
        let run = GridSpec::new(Bounds::new(0.0, 4.0, 0.0, 4.0), 2.0).unwrap();
        let err = load_raster(&path, &run).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::Alignment(_)));
        assert!(msg.contains("4x4 cells of 1 km") && msg.contains("2x2 cells of 2 km"), "{msg}");
        assert!(load_raster(&path, &g).is_ok());
    }

    #[test]
    fn north_south_gradient_has_monotone_row_means() {
        let g = GridSpec::new(Bounds::new(0.0, 6.0, 0.0, 5.0), 1.0).unwrap();
        let mut r = rng::seeded(4);
        let field = GriddedField::from_fn(g, |pt| -10.0 * pt.y + r.random::<f64>()).unwrap();
        let back = parse_raster(&format_raster(&field, None).unwrap(), p()).unwrap();
        let means: Vec<f64> = (0..g.ny())
            .map(|row| back.field.values()[row * g.nx()..(row + 1) * g.nx()].iter().sum::<f64>() / g.nx() as f64)
            .collect();
        assert!(means.windows(2).all(|w| w[1] < w[0]), "{means:?}");
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_identical(seed: u64, nx in 1usize..6, ny in 1usize..6, x0 in -50.0f64..50.0) {
            let g = GridSpec::new(Bounds::new(x0, x0 + 0.5 * nx as f64, 3.0, 3.0 + 0.5 * ny as f64), 0.5).unwrap();
            let mut r = rng::seeded(seed);
            let field = GriddedField::from_fn(g, |_| (r.random::<f64>() - 0.5) * 10f64.powi(r.random_range(-8..8))).unwrap();
            let back = parse_raster(&format_raster(&field, None).unwrap(), p()).unwrap();
            for (a, b) in field.values().iter().zip(back.field.values()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
            prop_assert!(back.grid().same_geometry(&g));
        }
    }
}
