use serde::{Deserialize, Serialize};

use crate::error::{Result, ZenoError};

/// One uniform axis. Sample `i` sits at the cell center `origin + (i + 0.5) * spacing`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub origin: f64,
    pub spacing: f64,
    pub points: usize,
}

impl Axis {
    pub fn new(origin: f64, spacing: f64, points: usize) -> Result<Self> {
        if !origin.is_finite() {
            return Err(ZenoError::invalid("origin", "must be finite"));
        }
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(ZenoError::invalid("spacing", format!("must be positive, got {spacing}")));
        }
        if points < 2 {
            return Err(ZenoError::invalid("points", "need at least two samples per axis"));
        }
        Ok(Axis { origin, spacing, points })
    }

    /// Axis whose samples include the nodes `lo + j*h`, `h = (hi-lo)/cells`, for
    /// `j = -p ..= cells + p`. `p` is the smallest pad giving at least `margin`
    /// on each side, then grown so the length factors into 2, 3, 5 and 7.
    pub fn node_aligned(lo: f64, hi: f64, cells: usize, margin: f64) -> Result<Self> {
        if !(hi > lo) {
            return Err(ZenoError::invalid("extent", format!("need hi > lo, got [{lo}, {hi}]")));
        }
        if cells < 2 {
            return Err(ZenoError::invalid("cells", "need at least two cells"));
        }
        if !(margin >= 0.0 && margin.is_finite()) {
            return Err(ZenoError::invalid("margin", "must be finite and non-negative"));
        }
        let h = (hi - lo) / cells as f64;
        let pad = (margin / h - 1e-9).ceil().max(1.0) as usize;
        let total = fft_friendly_len(cells + 1 + 2 * pad, (cells + 1) % 2);
        let pad = (total - cells - 1) / 2;
        Axis::new(lo - (pad as f64 + 0.5) * h, h, total)
    }

    pub fn coord(&self, i: usize) -> f64 {
        self.origin + (i as f64 + 0.5) * self.spacing
    }

    pub fn extent(&self) -> f64 {
        self.spacing * self.points as f64
    }

    pub fn lo(&self) -> f64 {
        self.origin
    }

    pub fn hi(&self) -> f64 {
        self.origin + self.extent()
    }

    /// Angular wavenumbers in FFT order.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let n = self.points;
        let dk = 2.0 * std::f64::consts::PI / self.extent();
        (0..n)
            .map(|j| {
                let s = if j <= (n - 1) / 2 { j as i64 } else { j as i64 - n as i64 };
                s as f64 * dk
            })
            .collect()
    }
}

/// Smallest integer `>= min` with the given parity whose prime factors are all at most 7.
pub fn fft_friendly_len(min: usize, parity: usize) -> usize {
    let mut n = min.max(2);
    loop {
        if n % 2 == parity % 2 && is_7_smooth(n) {
            return n;
        }
        n += 1;
    }
}

fn is_7_smooth(mut n: usize) -> bool {
    for p in [2, 3, 5, 7] {
        while n % p == 0 {
            n /= p;
        }
    }
    n == 1
}

/// Uniform Cartesian grid in one to three dimensions, row-major with axis 0 slowest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    axes: Vec<Axis>,
}

impl Grid {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() || axes.len() > 3 {
            return Err(ZenoError::invalid("axes", format!("dimension must be 1..=3, got {}", axes.len())));
        }
        for a in &axes {
            Axis::new(a.origin, a.spacing, a.points)?;
        }
        Ok(Grid { axes })
    }

    pub fn line(axis: Axis) -> Self {
        Grid { axes: vec![axis] }
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn axis(&self, k: usize) -> &Axis {
        &self.axes[k]
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.points).collect()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.points).product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Quadrature weight of one sample.
    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(|a| a.spacing).product()
    }

    pub fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.dim()];
        for k in (0..self.dim().saturating_sub(1)).rev() {
            s[k] = s[k + 1] * self.axes[k + 1].points;
        }
        s
    }

    pub fn unravel(&self, mut flat: usize) -> [usize; 3] {
        let mut idx = [0; 3];
        for k in (0..self.dim()).rev() {
            let n = self.axes[k].points;
            idx[k] = flat % n;
            flat /= n;
        }
        idx
    }

    pub fn ravel(&self, idx: &[usize]) -> usize {
        let mut flat = 0;
        for (k, a) in self.axes.iter().enumerate() {
            flat = flat * a.points + idx[k];
        }
        flat
    }

    /// Coordinates of a sample; unused trailing entries are zero.
    pub fn point(&self, flat: usize) -> [f64; 3] {
        let idx = self.unravel(flat);
        let mut p = [0.0; 3];
        for (k, a) in self.axes.iter().enumerate() {
            p[k] = a.coord(idx[k]);
        }
        p
    }

    /// True when both grids sample the same points (to a relative tolerance).
    pub fn same_as(&self, other: &Grid) -> bool {
        self.dim() == other.dim()
            && self.axes.iter().zip(&other.axes).all(|(a, b)| {
                a.points == b.points
                    && ((a.spacing - b.spacing).abs() <= 1e-12 * a.spacing)
                    && ((a.origin - b.origin).abs() <= 1e-12 * a.spacing.max(a.origin.abs()))
            })
    }

    pub fn check_same(&self, other: &Grid) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(ZenoError::GridMismatch(format!("shapes {:?} vs {:?}", self.shape(), other.shape())))
        }
    }
}

/// hbar and particle mass. Both default to one.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalUnits {
    pub hbar: f64,
    pub mass: f64,
}

impl Default for PhysicalUnits {
    fn default() -> Self {
        PhysicalUnits { hbar: 1.0, mass: 1.0 }
    }
}

impl PhysicalUnits {
    pub fn new(hbar: f64, mass: f64) -> Result<Self> {
        let u = PhysicalUnits { hbar, mass };
        u.validate()?;
        Ok(u)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.hbar.is_finite() && self.hbar > 0.0) {
            return Err(ZenoError::invalid("hbar", format!("must be positive, got {}", self.hbar)));
        }
        if !(self.mass.is_finite() && self.mass > 0.0) {
            return Err(ZenoError::invalid("mass", format!("must be positive, got {}", self.mass)));
        }
        Ok(())
    }

    /// hbar^2 / 2M, the factor turning k^2 into an energy.
    pub fn kinetic(&self) -> f64 {
        self.hbar * self.hbar / (2.0 * self.mass)
    }

    pub fn energy_of_k2(&self, k2: f64) -> f64 {
        self.kinetic() * k2
    }

    /// Free-particle phase rate hbar k^2 / 2M.
    pub fn omega_of_k2(&self, k2: f64) -> f64 {
        self.hbar * k2 / (2.0 * self.mass)
    }

    /// Spreading length sqrt(hbar tau / M).
    pub fn spread(&self, tau: f64) -> f64 {
        (self.hbar * tau.abs() / self.mass).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn node_aligned_axis_hits_walls() {
        let a = Axis::node_aligned(0.0, 2.0, 64, 0.5).unwrap();
        let h = a.spacing;
        assert!((h - 2.0 / 64.0).abs() < 1e-15);
        let hits = (0..a.points).filter(|&i| a.coord(i).abs() < 1e-12 || (a.coord(i) - 2.0).abs() < 1e-12).count();
        assert_eq!(hits, 2);
        assert!(a.lo() <= -0.5 && a.hi() >= 2.5);
        assert!(is_7_smooth(a.points));
    }

    #[test]
    fn ravel_roundtrip() {
        let g = Grid::new(vec![Axis::new(0.0, 1.0, 3).unwrap(), Axis::new(0.0, 1.0, 5).unwrap(), Axis::new(0.0, 1.0, 4).unwrap()]).unwrap();
        for f in 0..g.len() {
            assert_eq!(g.ravel(&g.unravel(f)), f);
        }
        assert_eq!(g.strides(), vec![20, 4, 1]);
    }

    #[test]
    fn wavenumbers_are_symmetric() {
        let a = Axis::new(0.0, 0.1, 8).unwrap();
        let k = a.wavenumbers();
        assert_eq!(k[0], 0.0);
        assert!((k[1] + k[7]).abs() < 1e-12);
        assert!(k[4] < 0.0);
    }

    #[test]
    fn units_reject_nonpositive() {
        assert!(PhysicalUnits::new(0.0, 1.0).is_err());
        assert!(PhysicalUnits::new(1.0, -1.0).is_err());
        assert_eq!(PhysicalUnits::default().kinetic(), 0.5);
    }
}
