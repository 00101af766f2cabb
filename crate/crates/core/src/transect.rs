//! Flight-line geometry for the aerial channel.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridSpec, Point};

/// A fixed, known aerial survey route: a polyline in km.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transect {
    id: String,
    vertices: Vec<Point>,
}

impl Transect {
    pub fn new(id: impl Into<String>, vertices: Vec<Point>) -> Result<Self> {
        let id = id.into();
        if vertices.len() < 2 {
            return Err(Error::Config(format!(
                "transect {id} needs at least 2 vertices, got {}",
                vertices.len()
            )));
        }
        if vertices.iter().any(|v| !v.x.is_finite() || !v.y.is_finite()) {
            return Err(Error::Config(format!("transect {id} has a non-finite vertex")));
        }
        if let Some(i) = vertices.windows(2).position(|w| w[0] == w[1]) {
            return Err(Error::Config(format!(
                "transect {id} repeats vertex {} at positions {i} and {}",
                i,
                i + 1
            )));
        }
        Ok(Transect { id, vertices })
    }

    /// Straight east-west line at latitude `y` from `x0` to `x1`.
    pub fn horizontal(id: impl Into<String>, y: f64, x0: f64, x1: f64) -> Result<Self> {
        Transect::new(id, vec![Point::new(x0, y), Point::new(x1, y)])
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn length(&self) -> f64 {
        self.vertices.windows(2).map(|w| w[0].distance(&w[1])).sum()
    }

    pub fn check_within(&self, grid: &GridSpec) -> Result<()> {
        match self.vertices.iter().find(|v| !grid.contains(v)) {
            Some(v) => Err(Error::Config(format!(
                "transect {} vertex ({}, {}) lies outside the domain",
                self.id, v.x, v.y
            ))),
            None => Ok(()),
        }
    }

    /// Distance from `p` to the nearest point on this route.
    pub fn distance_to(&self, p: &Point) -> f64 {
        // Construction guarantees at least one non-degenerate segment.
        dist_to_polyline(p, &self.vertices).expect("validated transect")
    }
}

fn dist_to_segment(p: &Point, a: &Point, b: &Point) -> Option<f64> {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return None;
    }
    let t = (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0);
    let proj = Point::new(a.x + t * dx, a.y + t * dy);
    Some(p.distance(&proj))
}

/// Euclidean distance from `p` to a polyline, skipping zero-length segments.
/// Fails when fewer than two vertices are given or every segment is
/// degenerate.
pub fn dist_to_polyline(p: &Point, vertices: &[Point]) -> Result<f64> {
    if vertices.len() < 2 {
        return Err(Error::Domain("polyline needs at least 2 vertices".into()));
    }
    vertices
        .windows(2)
        .filter_map(|w| dist_to_segment(p, &w[0], &w[1]))
        .reduce(f64::min)
        .ok_or_else(|| Error::Domain("every polyline segment has zero length".into()))
}

pub fn dist_to_transect(p: &Point, transect: &Transect) -> f64 {
    transect.distance_to(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn east_west() -> Transect {
        Transect::horizontal("t", 5.0, 0.0, 40.0).unwrap()
    }

    #[test]
    fn on_the_line() {
        assert_eq!(dist_to_transect(&Point::new(10.0, 5.0), &east_west()), 0.0);
    }

    #[test]
    fn perpendicular_offset() {
        assert_eq!(dist_to_transect(&Point::new(10.0, 7.0), &east_west()), 2.0);
    }

    #[test]
    fn beyond_segment_end_uses_endpoint() {
        assert_eq!(dist_to_transect(&Point::new(45.0, 5.0), &east_west()), 5.0);
        let d = dist_to_transect(&Point::new(43.0, 9.0), &east_west());
        assert!((d - 5.0).abs() < 1e-15);
    }

    #[test]
    fn polyline_takes_minimum_over_segments() {
        let t = Transect::new(
            "L",
            vec![Point::new(0.0, 0.0), Point::new(10.0, 0.0), Point::new(10.0, 10.0)],
        )
        .unwrap();
        assert_eq!(t.distance_to(&Point::new(12.0, 5.0)), 2.0);
        assert_eq!(t.distance_to(&Point::new(5.0, -1.0)), 1.0);
        assert_eq!(t.length(), 20.0);
    }

    #[test]
    fn degenerate_segments_are_skipped() {
        let pts = [
            Point::new(0.0, 0.0),
            Point::new(0.0, 0.0),
            Point::new(4.0, 0.0),
        ];
        assert_eq!(dist_to_polyline(&Point::new(2.0, 3.0), &pts).unwrap(), 3.0);
        let all_degenerate = [Point::new(1.0, 1.0), Point::new(1.0, 1.0)];
        assert!(dist_to_polyline(&Point::new(0.0, 0.0), &all_degenerate).is_err());
        assert!(dist_to_polyline(&Point::new(0.0, 0.0), &pts[..1]).is_err());
    }

    #[test]
    fn construction_invariants() {
        assert!(Transect::new("a", vec![Point::new(0.0, 0.0)]).is_err());
        assert!(Transect::new("a", vec![Point::new(1.0, 1.0), Point::new(1.0, 1.0)]).is_err());
        let grid = GridSpec::new(crate::grid::Bounds::new(0.0, 40.0, 0.0, 40.0), 1.0).unwrap();
        assert!(east_west().check_within(&grid).is_ok());
        let outside = Transect::horizontal("o", 5.0, 0.0, 41.0).unwrap();
        assert!(outside.check_within(&grid).is_err());
    }

    proptest! {
        #[test]
        fn translation_invariant(
            px in -50.0f64..50.0, py in -50.0f64..50.0,
            ax in -20.0f64..20.0, ay in -20.0f64..20.0,
            bx in -20.0f64..20.0, by in -20.0f64..20.0,
            tx in -100.0f64..100.0, ty in -100.0f64..100.0,
        ) {
            prop_assume!((ax - bx).abs() + (ay - by).abs() > 1e-3);
            let t = Transect::new("t", vec![Point::new(ax, ay), Point::new(bx, by)]).unwrap();
            let moved = Transect::new(
                "t",
                vec![Point::new(ax + tx, ay + ty), Point::new(bx + tx, by + ty)],
            ).unwrap();
            let d0 = t.distance_to(&Point::new(px, py));
            let d1 = moved.distance_to(&Point::new(px + tx, py + ty));
            prop_assert!((d0 - d1).abs() <= 1e-12 * d0.max(1.0));
        }
    }
}
