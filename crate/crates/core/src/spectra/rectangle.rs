use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use crate::domain::Domain;
use crate::error::{Result, ZenoError};
use crate::grid::{Grid, PhysicalUnits};
use crate::spectra::basis::{BasisEntry, QuantumNumberLabel, Representation, SpectralBasis, SpectrumSource};
use crate::wavefunction::WaveFunction;

/// Dirichlet energy of sine mode `n` on an interval of length `a`.
pub fn interval_energy(a: f64, n: u32, units: PhysicalUnits) -> f64 {
    units.energy_of_k2((n as f64 * PI / a).powi(2))
}

pub fn rectangle_energy(a: f64, b: f64, n: u32, m: u32, units: PhysicalUnits) -> f64 {
    units.energy_of_k2((n as f64 * PI / a).powi(2) + (m as f64 * PI / b).powi(2))
}

/// sqrt(2/a) sin(n pi (x - x0)/a) inside the interval, zero outside.
pub fn interval_mode(x0: f64, a: f64, n: u32, x: f64) -> f64 {
    let s = x - x0;
    if s <= 0.0 || s >= a {
        0.0
    } else {
        (2.0 / a).sqrt() * (n as f64 * PI * s / a).sin()
    }
}

fn check_counts(n_max: u32, m_max: u32) -> Result<()> {
    if n_max == 0 || m_max == 0 {
        return Err(ZenoError::invalid("n_max", "mode counts must be at least 1"));
    }
    Ok(())
}

pub fn interval_modes(x0: f64, x1: f64, n_max: u32, grid: &Grid, units: PhysicalUnits) -> Result<SpectralBasis> {
    let domain = Domain::Interval { x0, x1 };
    domain.validate()?;
    check_counts(n_max, 1)?;
    if grid.dim() != 1 {
        return Err(ZenoError::GridMismatch("interval modes need a 1D grid".into()));
    }
    let h = grid.axis(0).spacing;
    let a = x1 - x0;
    let entries = (1..=n_max)
        .map(|n| {
            let f = WaveFunction::from_fn(grid, |p| {
                let v = if domain.contains(p, h) { interval_mode(x0, a, n, p[0]) } else { 0.0 };
                Complex64::new(v, 0.0)
            })?;
            Ok(BasisEntry {
                label: QuantumNumberLabel::Interval { n },
                energy: interval_energy(a, n, units),
                field: Arc::new(f),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    SpectralBasis::new(domain, SpectrumSource::Analytic, Representation::Cartesian, grid.clone(), entries)
}

/// Product sine modes on [0,a] x [0,b], sampled on `grid`.
pub fn rectangle_modes(
    a: f64,
    b: f64,
    n_max: u32,
    m_max: u32,
    grid: &Grid,
    units: PhysicalUnits,
) -> Result<SpectralBasis> {
    let domain = Domain::Rectangle { a, b };
    domain.validate()?;
    check_counts(n_max, m_max)?;
    if grid.dim() != 2 {
        return Err(ZenoError::GridMismatch("rectangle modes need a 2D grid".into()));
    }
    let h = grid.axis(0).spacing.min(grid.axis(1).spacing);
    let mut entries = Vec::new();
    for n in 1..=n_max {
        for m in 1..=m_max {
            let f = WaveFunction::from_fn(grid, |p| {
                let v = if domain.contains(p, h) {
                    interval_mode(0.0, a, n, p[0]) * interval_mode(0.0, b, m, p[1])
                } else {
                    0.0
                };
                Complex64::new(v, 0.0)
            })?;
            entries.push(BasisEntry {
                label: QuantumNumberLabel::Rectangle { n, m },
                energy: rectangle_energy(a, b, n, m, units),
                field: Arc::new(f),
            });
        }
    }
    SpectralBasis::new(domain, SpectrumSource::Analytic, Representation::Cartesian, grid.clone(), entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Axis;

    #[test]
    fn sampled_sines_are_orthonormal_on_node_aligned_grid() {
        let a = Axis::node_aligned(0.0, PI, 32, 0.3).unwrap();
        let g = Grid::new(vec![a.clone(), a]).unwrap();
        let b = rectangle_modes(PI, PI, 3, 3, &g, PhysicalUnits::default()).unwrap();
        assert!(b.normalization.max_gram_deviation < 1e-12);
        assert_eq!(b.normalization.max_boundary_sample, 0.0);
        assert_eq!(b.entries[0].energy, 1.0);
    }
}
