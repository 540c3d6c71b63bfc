//! Free evolution on a padded periodic box.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::domain::{Domain, Mask};
use crate::error::{Result, ZenoError};
use crate::grid::{Axis, Grid, PhysicalUnits};
use crate::wavefunction::WaveFunction;

/// Padding margin (total, per axis) required per unit of sqrt(hbar tau / M).
pub const GUARD_WIDTHS: f64 = 8.0;

/// Per-axis phase factors exp(-i hbar k^2 tau / 2M), with the inverse-FFT
/// normalisation folded into axis 0.
#[derive(Debug)]
pub struct PhaseTable {
    pub tau: f64,
    pub axes: Vec<Vec<Complex64>>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize)]
pub struct PropagatorCounters {
    pub transforms: u64,
    pub cache_hits: u64,
    pub cache_misses: u64,
}

/// Precomputed FFT plans and wavenumbers for one grid. Immutable apart from
/// the phase cache and counters, so it can be shared between threads.
pub struct SpectralPropagator {
    grid: Grid,
    units: PhysicalUnits,
    support: Vec<(f64, f64)>,
    k2: Vec<Vec<f64>>,
    fwd: Vec<Arc<dyn Fft<f64>>>,
    inv: Vec<Arc<dyn Fft<f64>>>,
    cache: RwLock<HashMap<u64, Arc<PhaseTable>>>,
    transforms: AtomicU64,
    hits: AtomicU64,
    misses: AtomicU64,
}

impl std::fmt::Debug for SpectralPropagator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralPropagator")
            .field("shape", &self.grid.shape())
            .field("support", &self.support)
            .finish()
    }
}

impl SpectralPropagator {
    /// `support` is the box (per axis) the evolved fields live in; the rest of
    /// the grid is padding.
    pub fn new(grid: &Grid, support: &[(f64, f64)], units: PhysicalUnits) -> Result<Self> {
        units.validate()?;
        if support.len() != grid.dim() {
            return Err(ZenoError::GridMismatch(format!(
                "support has {} axes, grid has {}",
                support.len(),
                grid.dim()
            )));
        }
        for (k, &(lo, hi)) in support.iter().enumerate() {
            let a = grid.axis(k);
            if !(hi >= lo) || lo < a.lo() - 1e-12 || hi > a.hi() + 1e-12 {
                return Err(ZenoError::DomainOutsideGrid(format!(
                    "axis {k}: support [{lo}, {hi}] not inside [{}, {}]",
                    a.lo(),
                    a.hi()
                )));
            }
        }
        let mut planner = FftPlanner::new();
        let fwd = grid.axes().iter().map(|a| planner.plan_fft_forward(a.points)).collect();
        let inv = grid.axes().iter().map(|a| planner.plan_fft_inverse(a.points)).collect();
        let k2 = grid.axes().iter().map(|a| a.wavenumbers().into_iter().map(|k| k * k).collect()).collect();
        Ok(SpectralPropagator {
            grid: grid.clone(),
            units,
            support: support.to_vec(),
            k2,
            fwd,
            inv,
            cache: RwLock::new(HashMap::new()),
            transforms: AtomicU64::new(0),
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
        })
    }

    /// Node-aligned grid with `cells` cells across the bounding box of `domain`
    /// and enough padding for steps up to `tau_max`.
    pub fn for_domain(domain: &Domain, cells: usize, tau_max: f64, units: PhysicalUnits) -> Result<Self> {
        domain.validate()?;
        units.validate()?;
        if let Domain::Mask(m) = domain {
            return SpectralPropagator::new(&m.grid, &domain.bounding_box(), units);
        }
        let bbox = domain.bounding_box();
        let side = 0.5 * GUARD_WIDTHS * units.spread(tau_max) * (1.0 + 1e-9);
        let axes = bbox
            .iter()
            .map(|&(lo, hi)| Axis::node_aligned(lo, hi, cells, side))
            .collect::<Result<Vec<_>>>()?;
        SpectralPropagator::new(&Grid::new(axes)?, &bbox, units)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn units(&self) -> PhysicalUnits {
        self.units
    }

    pub fn support(&self) -> &[(f64, f64)] {
        &self.support
    }

    /// L_pad / L_domain per axis.
    pub fn padding_factors(&self) -> Vec<f64> {
        self.grid
            .axes()
            .iter()
            .zip(&self.support)
            .map(|(a, (lo, hi))| a.extent() / (hi - lo).max(a.spacing))
            .collect()
    }

    /// Total padding L_pad - L_domain per axis.
    pub fn margins(&self) -> Vec<f64> {
        self.grid.axes().iter().zip(&self.support).map(|(a, (lo, hi))| a.extent() - (hi - lo)).collect()
    }

    /// Largest step the padding can absorb.
    pub fn tau_limit(&self) -> f64 {
        let m = self.margins().into_iter().fold(f64::INFINITY, f64::min);
        (m / GUARD_WIDTHS).powi(2) * self.units.mass / self.units.hbar
    }

    pub fn check_guard(&self, tau: f64) -> Result<()> {
        if !tau.is_finite() {
            return Err(ZenoError::invalid("tau", "must be finite"));
        }
        let required = GUARD_WIDTHS * self.units.spread(tau);
        for (axis, margin) in self.margins().into_iter().enumerate() {
            if margin < required * (1.0 - 1e-9) {
                return Err(ZenoError::GuardViolated { axis, tau, margin, required });
            }
        }
        Ok(())
    }

    pub fn counters(&self) -> PropagatorCounters {
        PropagatorCounters {
            transforms: self.transforms.load(Ordering::Relaxed),
            cache_hits: self.hits.load(Ordering::Relaxed),
            cache_misses: self.misses.load(Ordering::Relaxed),
        }
    }

    /// Phase table for `tau`, cached on the exact bit pattern.
    pub fn phases(&self, tau: f64) -> Arc<PhaseTable> {
        let key = tau.to_bits();
        if let Some(t) = self.cache.read().expect("phase cache poisoned").get(&key) {
            self.hits.fetch_add(1, Ordering::Relaxed);
            return t.clone();
        }
        self.misses.fetch_add(1, Ordering::Relaxed);
        let norm = 1.0 / self.grid.len() as f64;
        let axes = self
            .k2
            .iter()
            .enumerate()
            .map(|(k, k2)| {
                k2.iter()
                    .map(|&q| {
                        let z = Complex64::from_polar(1.0, -self.units.omega_of_k2(q) * tau);
                        if k == 0 {
                            z * norm
                        } else {
                            z
                        }
                    })
                    .collect()
            })
            .collect();
        let t = Arc::new(PhaseTable { tau, axes });
        self.cache.write().expect("phase cache poisoned").insert(key, t.clone());
        t
    }

    /// U(tau) psi for psi supported inside the unpadded region.
    pub fn evolve_free(&self, psi: &WaveFunction, tau: f64) -> Result<WaveFunction> {
        self.grid.check_same(psi.grid())?;
        self.check_guard(tau)?;
        let mut out = psi.clone();
        let table = self.phases(tau);
        self.apply(out.amps_mut(), &table);
        Ok(out)
    }

    /// In-place U(tau) with a precomputed table; guard and grid checks are the caller's job.
    pub fn apply(&self, data: &mut [Complex64], table: &PhaseTable) {
        let shape = self.grid.shape();
        let mut scratch = vec![Complex64::new(0.0, 0.0); data.len()];
        fft_nd(data, &shape, &self.fwd, &mut scratch);
        multiply_phases(data, &shape, &table.axes);
        fft_nd(data, &shape, &self.inv, &mut scratch);
        self.transforms.fetch_add(2, Ordering::Relaxed);
    }

    /// One projected step P U(tau) on a field already inside the mask.
    pub fn apply_projected(&self, data: &mut [Complex64], table: &PhaseTable, mask: &Mask) {
        self.apply(data, table);
        data.par_iter_mut().zip(mask.inside().par_iter()).for_each(|(z, &b)| {
            if !b {
                *z = Complex64::new(0.0, 0.0);
            }
        });
    }
}

fn multiply_phases(data: &mut [Complex64], shape: &[usize], phases: &[Vec<Complex64>]) {
    let d = shape.len();
    let last = shape[d - 1];
    data.par_chunks_mut(last).enumerate().for_each(|(row, chunk)| {
        let mut pre = Complex64::new(1.0, 0.0);
        let mut r = row;
        for k in (0..d - 1).rev() {
            pre *= phases[k][r % shape[k]];
            r /= shape[k];
        }
        for (z, p) in chunk.iter_mut().zip(&phases[d - 1]) {
            *z *= pre * p;
        }
    });
}

/// Unnormalised multidimensional FFT with one 1D plan per axis.
fn fft_nd(data: &mut [Complex64], shape: &[usize], plans: &[Arc<dyn Fft<f64>>], scratch: &mut [Complex64]) {
    let d = shape.len();
    for k in 0..d {
        let n = shape[k];
        let plan = &plans[k];
        let work = plan.get_inplace_scratch_len();
        if k == d - 1 {
            data.par_chunks_mut(n).for_each_init(
                || vec![Complex64::new(0.0, 0.0); work],
                |s, row| plan.process_with_scratch(row, s),
            );
            continue;
        }
        let inner: usize = shape[k + 1..].iter().product();
        let block = n * inner;
        {
            let src: &[Complex64] = data;
            scratch.par_chunks_mut(n).enumerate().for_each_init(
                || vec![Complex64::new(0.0, 0.0); work],
                |s, (r, row)| {
                    let (a, b) = (r / inner, r % inner);
                    let base = a * block + b;
                    for (j, z) in row.iter_mut().enumerate() {
                        *z = src[base + j * inner];
                    }
                    plan.process_with_scratch(row, s);
                },
            );
        }
        let src: &[Complex64] = scratch;
        data.par_chunks_mut(inner).enumerate().for_each(|(r, row)| {
            let (a, j) = (r / n, r % n);
            let base = a * block + j;
            for (b, z) in row.iter_mut().enumerate() {
                *z = src[base + b * n];
            }
        });
    }
}

/// Dense free-particle kernel between two small grids, quadrature weight included.
#[derive(Clone, Debug)]
pub struct KernelMatrix {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<Complex64>,
}

/// Largest grid the dense kernel is built for.
pub const KERNEL_MAX_POINTS: usize = 4096;

impl KernelMatrix {
    pub fn build(source: &Grid, target: &Grid, tau: f64, units: PhysicalUnits) -> Result<Self> {
        units.validate()?;
        if tau == 0.0 || !tau.is_finite() {
            return Err(ZenoError::invalid("tau", "kernel is singular at tau = 0"));
        }
        if source.dim() != target.dim() {
            return Err(ZenoError::GridMismatch("source and target dimensions differ".into()));
        }
        if source.len() > KERNEL_MAX_POINTS || target.len() > KERNEL_MAX_POINTS {
            return Err(ZenoError::invalid(
                "grid",
                format!("dense kernel limited to {KERNEL_MAX_POINTS} points per grid"),
            ));
        }
        let d = source.dim() as f64;
        let (hbar, m) = (units.hbar, units.mass);
        let amp = (m / (2.0 * std::f64::consts::PI * hbar * tau.abs())).powf(d / 2.0) * source.cell_volume();
        let pre = Complex64::from_polar(amp, -std::f64::consts::FRAC_PI_4 * d * tau.signum());
        let c = m / (2.0 * hbar * tau);
        let sp: Vec<[f64; 3]> = (0..source.len()).map(|i| source.point(i)).collect();
        let entries = (0..target.len())
            .into_par_iter()
            .flat_map_iter(|i| {
                let x = target.point(i);
                sp.iter().map(move |y| {
                    let r2 = (x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2) + (x[2] - y[2]).powi(2);
                    pre * Complex64::from_polar(1.0, c * r2)
                })
            })
            .collect();
        Ok(KernelMatrix { rows: target.len(), cols: source.len(), entries })
    }

    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        self.entries.par_chunks(self.cols).map(|row| row.iter().zip(v).map(|(k, x)| k * x).sum()).collect()
    }
}

/// Free evolution by direct quadrature of the propagator kernel on the same grid.
pub fn kernel_evolve(psi: &WaveFunction, tau: f64, units: PhysicalUnits) -> Result<WaveFunction> {
    let k = KernelMatrix::build(psi.grid(), psi.grid(), tau, units)?;
    WaveFunction::new(psi.grid().clone(), k.apply(psi.amps()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian(grid: &Grid, s0: f64, k0: f64) -> WaveFunction {
        WaveFunction::from_fn(grid, |p| {
            let r2 = p[0] * p[0] + p[1] * p[1] + p[2] * p[2];
            Complex64::from_polar((-r2 / (4.0 * s0 * s0)).exp(), k0 * p[0])
        })
        .unwrap()
        .normalized()
        .unwrap()
    }

    #[test]
    fn phase_table_is_unimodular_and_cached() {
        let g = Grid::line(Axis::new(-4.0, 0.05, 160).unwrap());
        let p = SpectralPropagator::new(&g, &[(-1.0, 1.0)], PhysicalUnits::default()).unwrap();
        let t = p.phases(0.01);
        let n = g.len() as f64;
        assert!(t.axes[0].iter().all(|z| (z.norm() * n - 1.0).abs() < 1e-12));
        let _ = p.phases(0.01);
        assert_eq!(p.counters().cache_hits, 1);
        assert_eq!(p.counters().cache_misses, 1);
    }

    #[test]
    fn evolution_is_unitary_and_reversible_2d() {
        let a = Axis::new(-4.0, 0.1, 80).unwrap();
        let g = Grid::new(vec![a.clone(), Axis::new(-3.0, 0.1, 60).unwrap()]).unwrap();
        let p = SpectralPropagator::new(&g, &[(-1.0, 1.0), (-1.0, 1.0)], PhysicalUnits::default()).unwrap();
        let psi = gaussian(&g, 0.3, 2.0);
        let f = p.evolve_free(&psi, 0.05).unwrap();
        assert!((f.norm() - 1.0).abs() < 1e-12);
        let back = p.evolve_free(&f, -0.05).unwrap();
        assert!(back.distance(&psi).unwrap() < 1e-12);
    }

    #[test]
    fn guard_rejects_long_steps() {
        let g = Grid::line(Axis::node_aligned(0.0, 1.0, 32, 0.2).unwrap());
        let p = SpectralPropagator::new(&g, &[(0.0, 1.0)], PhysicalUnits::default()).unwrap();
        assert!(p.check_guard(1e-4).is_ok());
        let e = p.check_guard(1.0).unwrap_err();
        assert!(matches!(e, ZenoError::GuardViolated { .. }));
        let t = p.tau_limit();
        assert!(p.check_guard(t).is_ok());
        assert!(p.check_guard(1.01 * t).is_err());
    }

    #[test]
    fn for_domain_satisfies_its_own_guard() {
        let d = Domain::Rectangle { a: 1.0, b: 2.0 };
        let p = SpectralPropagator::for_domain(&d, 20, 0.05, PhysicalUnits::default()).unwrap();
        assert!(p.check_guard(0.05).is_ok());
        assert_eq!(p.grid().dim(), 2);
    }

    #[test]
    fn kernel_singular_at_zero() {
        let g = Grid::line(Axis::new(0.0, 0.1, 8).unwrap());
        assert!(KernelMatrix::build(&g, &g, 0.0, PhysicalUnits::default()).is_err());
    }

    #[test]
    fn kernel_matches_spectral_on_gaussian() {
        let g = Grid::line(Axis::new(-2.0, 4.0 / 512.0, 512).unwrap());
        let psi = gaussian(&g, 0.25, 0.0);
        let p = SpectralPropagator::new(&g, &[(-1.0, 1.0)], PhysicalUnits::default()).unwrap();
        let a = p.evolve_free(&psi, 0.01).unwrap();
        let b = kernel_evolve(&psi, 0.01, PhysicalUnits::default()).unwrap();
        assert!(a.distance(&b).unwrap() / a.norm() < 1e-3);
        assert!((b.norm() - 1.0).abs() < 1e-3);
    }
}
