use serde::{Deserialize, Serialize};

use crate::error::{Result, ZenoError};
use crate::grid::Grid;

/// Raster domain: a boolean bitmap over a fixed grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaskRaster {
    pub grid: Grid,
    pub inside: Vec<bool>,
}

/// Bounded open region. Rectangles sit at the origin corner, annuli and shells
/// are centered on the origin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Domain {
    Interval { x0: f64, x1: f64 },
    Rectangle { a: f64, b: f64 },
    Annulus { r1: f64, r2: f64 },
    Shell { r1: f64, r2: f64 },
    Mask(MaskRaster),
}

/// Relative tolerance (in grid spacings) of the strict interior test.
const EDGE_TOL: f64 = 1e-9;

impl Domain {
    pub fn validate(&self) -> Result<()> {
        let pos = |field: &str, v: f64| -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(ZenoError::invalid(field, format!("must be positive, got {v}")))
            }
        };
        match self {
            Domain::Interval { x0, x1 } => {
                if !(x0.is_finite() && x1.is_finite() && x1 > x0) {
                    return Err(ZenoError::invalid("x1", format!("need x1 > x0, got [{x0}, {x1}]")));
                }
            }
            Domain::Rectangle { a, b } => {
                pos("a", *a)?;
                pos("b", *b)?;
            }
            Domain::Annulus { r1, r2 } | Domain::Shell { r1, r2 } => {
                if !(r1.is_finite() && *r1 >= 0.0) {
                    return Err(ZenoError::invalid("r1", format!("must be non-negative, got {r1}")));
                }
                pos("r2", *r2)?;
                if r2 <= r1 {
                    return Err(ZenoError::invalid("r2", format!("need r2 > r1, got r1 = {r1}, r2 = {r2}")));
                }
            }
            Domain::Mask(m) => {
                if m.inside.len() != m.grid.len() {
                    return Err(ZenoError::invalid("mask", "bitmap length does not match its grid"));
                }
                if !m.inside.iter().any(|&b| b) {
                    return Err(ZenoError::invalid("mask", "mask has no interior cells"));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Interval { .. } => 1,
            Domain::Rectangle { .. } | Domain::Annulus { .. } => 2,
            Domain::Shell { .. } => 3,
            Domain::Mask(m) => m.grid.dim(),
        }
    }

    /// Axis-aligned bounding box, one `(lo, hi)` per dimension.
    pub fn bounding_box(&self) -> Vec<(f64, f64)> {
        match self {
            Domain::Interval { x0, x1 } => vec![(*x0, *x1)],
            Domain::Rectangle { a, b } => vec![(0.0, *a), (0.0, *b)],
            Domain::Annulus { r2, .. } => vec![(-r2, *r2); 2],
            Domain::Shell { r2, .. } => vec![(-r2, *r2); 3],
            Domain::Mask(m) => {
                let mut lo = vec![f64::INFINITY; m.grid.dim()];
                let mut hi = vec![f64::NEG_INFINITY; m.grid.dim()];
                for (f, _) in m.inside.iter().enumerate().filter(|(_, &b)| b) {
                    let p = m.grid.point(f);
                    for k in 0..m.grid.dim() {
                        let h = 0.5 * m.grid.axis(k).spacing;
                        lo[k] = lo[k].min(p[k] - h);
                        hi[k] = hi[k].max(p[k] + h);
                    }
                }
                lo.into_iter().zip(hi).collect()
            }
        }
    }

    /// Strict interior test; points within `1e-9 * h` of the boundary count as outside.
    pub fn contains(&self, p: &[f64], h: f64) -> bool {
        let t = EDGE_TOL * h;
        match self {
            Domain::Interval { x0, x1 } => p[0] > x0 + t && p[0] < x1 - t,
            Domain::Rectangle { a, b } => p[0] > t && p[0] < a - t && p[1] > t && p[1] < b - t,
            Domain::Annulus { r1, r2 } => {
                let r = p[0].hypot(p[1]);
                (*r1 == 0.0 || r > r1 + t) && r < r2 - t
            }
            Domain::Shell { r1, r2 } => {
                let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
                (*r1 == 0.0 || r > r1 + t) && r < r2 - t
            }
            Domain::Mask(m) => {
                let mut idx = [0usize; 3];
                for k in 0..m.grid.dim() {
                    let a = m.grid.axis(k);
                    let i = ((p[k] - a.origin) / a.spacing).floor();
                    if i < 0.0 || i >= a.points as f64 {
                        return false;
                    }
                    idx[k] = i as usize;
                }
                m.inside[m.grid.ravel(&idx[..m.grid.dim()])]
            }
        }
    }

    /// Distance from `p` outward to the region, zero inside or on it.
    pub fn distance_outside(&self, p: &[f64]) -> Option<f64> {
        let d = match self {
            Domain::Interval { x0, x1 } => (x0 - p[0]).max(p[0] - x1).max(0.0),
            Domain::Rectangle { a, b } => {
                let dx = (-p[0]).max(p[0] - a).max(0.0);
                let dy = (-p[1]).max(p[1] - b).max(0.0);
                dx.hypot(dy)
            }
            Domain::Annulus { r1, r2 } => {
                let r = p[0].hypot(p[1]);
                (r1 - r).max(r - r2).max(0.0)
            }
            Domain::Shell { r1, r2 } => {
                let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
                (r1 - r).max(r - r2).max(0.0)
            }
            Domain::Mask(_) => return None,
        };
        Some(d)
    }

    /// Fraction of a grid step from interior point `p` to the boundary along
    /// `axis` in direction `sign`. Raster walls lie on pixel faces.
    pub fn boundary_fraction(&self, p: &[f64], axis: usize, sign: f64, h: f64) -> Option<f64> {
        let s = match self {
            Domain::Interval { x0, x1 } => {
                if sign > 0.0 {
                    x1 - p[0]
                } else {
                    p[0] - x0
                }
            }
            Domain::Rectangle { a, b } => {
                let hi = if axis == 0 { *a } else { *b };
                if sign > 0.0 {
                    hi - p[axis]
                } else {
                    p[axis]
                }
            }
            Domain::Annulus { r1, r2 } | Domain::Shell { r1, r2 } => {
                let d = self.dim();
                let rr: f64 = p[..d].iter().map(|x| x * x).sum();
                let b = sign * p[axis];
                let mut best = f64::INFINITY;
                for r in [*r1, *r2] {
                    if r == 0.0 {
                        continue;
                    }
                    // s^2 + 2 b s + (rr - r^2) = 0
                    let c = rr - r * r;
                    let disc = b * b - c;
                    if disc < 0.0 {
                        continue;
                    }
                    let sq = disc.sqrt();
                    for s in [-b - sq, -b + sq] {
                        if s > 0.0 && s < best {
                            best = s;
                        }
                    }
                }
                best
            }
            Domain::Mask(m) => {
                // walk pixels along the axis to the first face with an outside pixel beyond it
                let a = m.grid.axis(axis);
                let mut idx = [0usize; 3];
                for k in 0..m.grid.dim() {
                    let ax = m.grid.axis(k);
                    let i = ((p[k] - ax.origin) / ax.spacing).floor();
                    if i < 0.0 || i >= ax.points as f64 {
                        return Some(1.0);
                    }
                    idx[k] = i as usize;
                }
                let mut i = idx[axis] as i64;
                loop {
                    let next = i + sign as i64;
                    idx[axis] = next.max(0) as usize;
                    if next < 0 || next >= a.points as i64 || !m.inside[m.grid.ravel(&idx[..m.grid.dim()])] {
                        break;
                    }
                    i = next;
                    if ((a.origin + (i as f64 + 0.5) * a.spacing) - p[axis]).abs() > h {
                        break;
                    }
                }
                let face = a.origin + (i as f64 + if sign > 0.0 { 1.0 } else { 0.0 }) * a.spacing;
                (face - p[axis]).abs()
            }
        };
        Some((s / h).clamp(1e-3, 1.0))
    }
}

/// Characteristic mask of a domain on a grid, with boundary metadata.
#[derive(Clone, Debug)]
pub struct Mask {
    grid: Grid,
    inside: Vec<bool>,
}

impl Mask {
    pub fn new(grid: Grid, inside: Vec<bool>) -> Result<Self> {
        if inside.len() != grid.len() {
            return Err(ZenoError::GridMismatch("mask length does not match grid".into()));
        }
        Ok(Mask { grid, inside })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn inside(&self) -> &[bool] {
        &self.inside
    }

    pub fn count(&self) -> usize {
        self.inside.iter().filter(|&&b| b).count()
    }

    pub fn as_field(&self) -> Vec<f64> {
        self.inside.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
    }

    /// Interior cells with at least one axis neighbour outside the mask.
    pub fn boundary_cells(&self) -> Vec<usize> {
        let strides = self.grid.strides();
        let shape = self.grid.shape();
        (0..self.grid.len())
            .filter(|&f| {
                if !self.inside[f] {
                    return false;
                }
                let idx = self.grid.unravel(f);
                (0..self.grid.dim()).any(|k| {
                    idx[k] == 0
                        || idx[k] + 1 == shape[k]
                        || !self.inside[f - strides[k]]
                        || !self.inside[f + strides[k]]
                })
            })
            .collect()
    }
}

/// Sample the characteristic function of `domain` at every cell center.
pub fn characteristic_mask(domain: &Domain, grid: &Grid) -> Result<Mask> {
    domain.validate()?;
    if domain.dim() != grid.dim() {
        return Err(ZenoError::GridMismatch(format!(
            "domain is {}-dimensional but grid is {}-dimensional",
            domain.dim(),
            grid.dim()
        )));
    }
    if let Domain::Mask(m) = domain {
        grid.check_same(&m.grid)?;
        return Mask::new(grid.clone(), m.inside.clone());
    }
    for (k, (lo, hi)) in domain.bounding_box().into_iter().enumerate() {
        let a = grid.axis(k);
        if lo < a.lo() || hi > a.hi() {
            return Err(ZenoError::DomainOutsideGrid(format!(
                "axis {k}: domain spans [{lo}, {hi}] but grid covers [{}, {}]",
                a.lo(),
                a.hi()
            )));
        }
    }
    let h = grid.axes().iter().map(|a| a.spacing).fold(f64::INFINITY, f64::min);
    let inside = (0..grid.len()).map(|f| domain.contains(&grid.point(f), h)).collect();
    Mask::new(grid.clone(), inside)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Axis;

    fn square_grid(cells: usize, lo: f64, hi: f64, margin: f64) -> Grid {
        let a = Axis::node_aligned(lo, hi, cells, margin).unwrap();
        Grid::new(vec![a.clone(), a]).unwrap()
    }

    #[test]
    fn rectangle_mask_excludes_walls() {
        let g = square_grid(16, 0.0, 1.0, 0.2);
        let m = characteristic_mask(&Domain::Rectangle { a: 1.0, b: 1.0 }, &g).unwrap();
        assert_eq!(m.count(), 15 * 15);
    }

    #[test]
    fn mask_is_idempotent() {
        let g = square_grid(32, -2.0, 2.0, 0.1);
        let d = Domain::Annulus { r1: 1.0, r2: 2.0 };
        let m = characteristic_mask(&d, &g).unwrap();
        let f = m.as_field();
        assert!(f.iter().all(|&v| v * v == v));
    }

    #[test]
    fn domain_outside_grid_is_rejected() {
        let g = square_grid(16, 0.0, 1.0, 0.0);
        let e = characteristic_mask(&Domain::Annulus { r1: 0.5, r2: 1.0 }, &g).unwrap_err();
        assert!(matches!(e, ZenoError::DomainOutsideGrid(_)));
    }

    #[test]
    fn invalid_radii_are_rejected() {
        assert!(Domain::Annulus { r1: 2.0, r2: 1.0 }.validate().is_err());
        assert!(Domain::Shell { r1: -1.0, r2: 1.0 }.validate().is_err());
        assert!(Domain::Annulus { r1: 0.0, r2: 1.0 }.validate().is_ok());
    }

    #[test]
    fn annulus_boundary_fraction_matches_geometry() {
        let d = Domain::Annulus { r1: 1.0, r2: 2.0 };
        let th = d.boundary_fraction(&[1.95, 0.0], 0, 1.0, 0.1).unwrap();
        assert!((th - 0.5).abs() < 1e-12);
        let th = d.boundary_fraction(&[1.05, 0.0], 0, -1.0, 0.1).unwrap();
        assert!((th - 0.5).abs() < 1e-12);
    }

    #[test]
    fn raster_walls_sit_on_pixel_faces() {
        let grid = Grid::new(vec![Axis::new(0.0, 0.1, 6).unwrap(), Axis::new(0.0, 0.1, 3).unwrap()]).unwrap();
        // row of inside pixels 1..=4 at y index 1
        let inside = (0..grid.len()).map(|f| (1..=4).contains(&grid.unravel(f)[0]) && grid.unravel(f)[1] == 1).collect();
        let d = Domain::Mask(MaskRaster { grid: grid.clone(), inside });
        let p = grid.point(grid.ravel(&[4, 1]));
        assert!((d.boundary_fraction(&p, 0, 1.0, 0.1).unwrap() - 0.5).abs() < 1e-12);
        assert!((d.boundary_fraction(&p, 1, -1.0, 0.1).unwrap() - 0.5).abs() < 1e-12);
        let p = grid.point(grid.ravel(&[1, 1]));
        assert!((d.boundary_fraction(&p, 0, -1.0, 0.1).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn boundary_cells_touch_outside() {
        let g = square_grid(8, 0.0, 1.0, 0.2);
        let m = characteristic_mask(&Domain::Rectangle { a: 1.0, b: 1.0 }, &g).unwrap();
        assert_eq!(m.boundary_cells().len(), 4 * 7 - 4);
    }
}
