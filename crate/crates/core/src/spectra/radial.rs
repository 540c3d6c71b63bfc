//! Annulus, shell and angular-sector spectra from radial cross products.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use crate::domain::Domain;
use crate::error::{Result, ZenoError};
use crate::grid::{Axis, Grid, PhysicalUnits};
use crate::spectra::basis::{BasisEntry, QuantumNumberLabel, Representation, SpectralBasis, SpectrumSource};
use crate::spectra::bessel::{bessel_jy, spherical_jy};
use crate::spectra::roots::{annulus_roots, shell_roots};
use crate::wavefunction::WaveFunction;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RadialKind {
    /// Planar radial equation, order nu, measure r dr.
    Cylinder,
    /// Three-dimensional radial equation, integer l, measure r^2 dr.
    Spherical,
}

/// One normalised radial eigenfunction.
#[derive(Clone, Copy, Debug)]
pub struct RadialMode {
    pub kind: RadialKind,
    pub order: f64,
    pub n: u32,
    pub k: f64,
    pub energy: f64,
    pub r1: f64,
    pub r2: f64,
    scale: f64,
}

impl RadialMode {
    fn raw(&self, r: f64) -> f64 {
        let (k, r1) = (self.k, self.r1);
        match self.kind {
            RadialKind::Cylinder => {
                let (ja, ya) = bessel_jy(self.order, k * r1);
                let (j, y) = bessel_jy(self.order, k * r);
                j * ya - ja * y
            }
            RadialKind::Spherical => {
                let l = self.order as u32;
                let (ja, ya) = spherical_jy(l, k * r1);
                let (j, y) = spherical_jy(l, k * r);
                j * ya - ja * y
            }
        }
    }

    /// R(r), zero outside [r1, r2].
    pub fn eval(&self, r: f64) -> f64 {
        if r <= self.r1 || r >= self.r2 {
            0.0
        } else {
            self.scale * self.raw(r)
        }
    }

    /// Liouville form: sqrt(r) R for the plane, r R for the shell.
    pub fn liouville(&self, r: f64) -> f64 {
        match self.kind {
            RadialKind::Cylinder => r.sqrt() * self.eval(r),
            RadialKind::Spherical => r * self.eval(r),
        }
    }

    /// Coefficient of 1/r^2 in the Liouville equation.
    pub fn centrifugal(&self) -> f64 {
        match self.kind {
            RadialKind::Cylinder => self.order * self.order - 0.25,
            RadialKind::Spherical => self.order * (self.order + 1.0),
        }
    }

    fn new(kind: RadialKind, order: f64, n: u32, k: f64, r1: f64, r2: f64, units: PhysicalUnits) -> Self {
        let mut m = RadialMode { kind, order, n, k, energy: units.energy_of_k2(k * k), r1, r2, scale: 1.0 };
        let p = if kind == RadialKind::Cylinder { 1 } else { 2 };
        let norm = simpson(|r| m.raw(r).powi(2) * r.powi(p), r1, r2, 4096);
        m.scale = 1.0 / norm.sqrt();
        // fix the sign so the mode starts positive next to the inner wall
        if m.raw(r1 + 1e-3 * (r2 - r1)) < 0.0 {
            m.scale = -m.scale;
        }
        m
    }
}

/// Composite Simpson rule with `n` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

fn check_order_counts(n_max: u32) -> Result<()> {
    if n_max == 0 {
        return Err(ZenoError::invalid("n_max", "must be at least 1"));
    }
    Ok(())
}

/// Radial modes of the annulus for |l| <= l_max, n <= n_max (l >= 0 only).
pub fn annulus_spectrum(r1: f64, r2: f64, l_max: u32, n_max: u32, units: PhysicalUnits) -> Result<Vec<RadialMode>> {
    check_order_counts(n_max)?;
    let mut out = Vec::new();
    for l in 0..=l_max {
        let ks = annulus_roots(l as f64, r1, r2, n_max as usize)?;
        for (i, k) in ks.into_iter().enumerate() {
            out.push(RadialMode::new(RadialKind::Cylinder, l as f64, i as u32 + 1, k, r1, r2, units));
        }
    }
    Ok(out)
}

/// Radial modes of the shell for l <= l_max.
pub fn shell_spectrum(r1: f64, r2: f64, l_max: u32, n_max: u32, units: PhysicalUnits) -> Result<Vec<RadialMode>> {
    check_order_counts(n_max)?;
    let mut out = Vec::new();
    for l in 0..=l_max {
        let ks = shell_roots(l, r1, r2, n_max as usize)?;
        for (i, k) in ks.into_iter().enumerate() {
            out.push(RadialMode::new(RadialKind::Spherical, l as f64, i as u32 + 1, k, r1, r2, units));
        }
    }
    Ok(out)
}

/// Annular sector of opening `opening` with Dirichlet walls on the rays:
/// angular functions sin(m pi theta / opening), Bessel order m pi / opening.
pub fn sector_spectrum(
    r1: f64,
    r2: f64,
    opening: f64,
    m_max: u32,
    n_max: u32,
    units: PhysicalUnits,
) -> Result<Vec<RadialMode>> {
    check_order_counts(n_max)?;
    if !(opening > 0.0 && opening <= 2.0 * PI) {
        return Err(ZenoError::invalid("opening", "must lie in (0, 2 pi]"));
    }
    let mut out = Vec::new();
    for m in 1..=m_max {
        let nu = m as f64 * PI / opening;
        let ks = annulus_roots(nu, r1, r2, n_max as usize)?;
        for (i, k) in ks.into_iter().enumerate() {
            out.push(RadialMode::new(RadialKind::Cylinder, nu, i as u32 + 1, k, r1, r2, units));
        }
    }
    Ok(out)
}

/// Annulus eigenfields R(r) e^{i l theta} / sqrt(2 pi) on a Cartesian grid,
/// both signs of l, sorted by energy.
pub fn annulus_modes(
    r1: f64,
    r2: f64,
    l_max: u32,
    n_max: u32,
    grid: &Grid,
    units: PhysicalUnits,
) -> Result<SpectralBasis> {
    let domain = Domain::Annulus { r1, r2 };
    domain.validate()?;
    if grid.dim() != 2 {
        return Err(ZenoError::GridMismatch("annulus modes need a 2D grid".into()));
    }
    let h = grid.axis(0).spacing.min(grid.axis(1).spacing);
    let c = 1.0 / (2.0 * PI).sqrt();
    let mut entries = Vec::new();
    for mode in annulus_spectrum(r1, r2, l_max, n_max, units)? {
        let l = mode.order as i32;
        let signs: &[i32] = if l == 0 { &[1] } else { &[1, -1] };
        for &s in signs {
            let f = WaveFunction::from_fn(grid, |p| {
                if !domain.contains(p, h) {
                    return Complex64::new(0.0, 0.0);
                }
                let r = p[0].hypot(p[1]);
                let th = p[1].atan2(p[0]);
                Complex64::from_polar(c * mode.eval(r), (s * l) as f64 * th)
            })?;
            entries.push(BasisEntry {
                label: QuantumNumberLabel::Annulus { n: mode.n, l: s * l },
                energy: mode.energy,
                field: Arc::new(f),
            });
        }
    }
    SpectralBasis::new(domain, SpectrumSource::Analytic, Representation::Cartesian, grid.clone(), entries)
}

/// Shell eigenpairs in the reduced radial representation u(r) = r R(r) on
/// `cells` cells across [r1, r2]; every radial mode appears once per m.
pub fn shell_radial_modes(
    r1: f64,
    r2: f64,
    l_max: u32,
    n_max: u32,
    cells: usize,
    units: PhysicalUnits,
) -> Result<SpectralBasis> {
    let domain = Domain::Shell { r1, r2 };
    domain.validate()?;
    let grid = Grid::line(Axis::node_aligned(r1, r2, cells, 0.0)?);
    let mut entries = Vec::new();
    for mode in shell_spectrum(r1, r2, l_max, n_max, units)? {
        let f = Arc::new(WaveFunction::from_fn(&grid, |p| Complex64::new(mode.liouville(p[0]), 0.0))?);
        let l = mode.order as u32;
        for m in -(l as i32)..=(l as i32) {
            entries.push(BasisEntry {
                label: QuantumNumberLabel::Shell { n: mode.n, l, m },
                energy: mode.energy,
                field: f.clone(),
            });
        }
    }
    SpectralBasis::new(domain, SpectrumSource::Analytic, Representation::RadialShell, grid, entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radial_functions_vanish_on_both_walls() {
        for m in annulus_spectrum(1.0, 2.0, 3, 3, PhysicalUnits::default()).unwrap() {
            let peak = (1..100).map(|i| m.raw(1.0 + i as f64 / 100.0).abs()).fold(0.0, f64::max);
            assert!(m.raw(1.0).abs() <= 1e-12 * peak);
            assert!(m.raw(2.0).abs() <= 1e-10 * peak, "{:?} {}", m, m.raw(2.0));
        }
    }

    #[test]
    fn radial_normalisation_and_orthogonality() {
        let modes = annulus_spectrum(1.0, 2.0, 2, 3, PhysicalUnits::default()).unwrap();
        for a in &modes {
            for b in modes.iter().filter(|b| b.order == a.order) {
                let ip = simpson(|r| a.eval(r) * b.eval(r) * r, 1.0, 2.0, 4000);
                let t = if a.n == b.n { 1.0 } else { 0.0 };
                assert!((ip - t).abs() < 1e-8, "{} {} {}", a.n, b.n, ip);
            }
        }
    }

    #[test]
    fn half_integer_sector_matches_shell() {
        // order 3/2 cross products share roots with l = 1 spherical ones
        let s = sector_spectrum(1.0, 2.0, 2.0 * PI / 3.0, 1, 3, PhysicalUnits::default()).unwrap();
        let sh = shell_spectrum(1.0, 2.0, 1, 3, PhysicalUnits::default()).unwrap();
        for (a, b) in s.iter().zip(sh.iter().filter(|m| m.order == 1.0)) {
            assert!((a.k - b.k).abs() < 1e-10 * b.k);
        }
    }
}
