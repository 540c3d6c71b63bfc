//! The projected product A * B = A P B and related checks.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::domain::{characteristic_mask, Domain, Mask};
use crate::error::{Result, ZenoError};
use crate::fit::{fit_power_law, PowerLawFit};
use crate::grid::{Grid, PhysicalUnits};
use crate::propagator::SpectralPropagator;
use crate::spectra::basis::QuantumNumberLabel;

#[derive(Clone, Debug)]
pub enum BasisDescriptor {
    Grid(Grid),
    Modes(Vec<QuantumNumberLabel>),
    Abstract,
}

/// Square complex matrix with finite entries.
#[derive(Clone, Debug)]
pub struct OperatorMatrix {
    pub data: DMatrix<Complex64>,
    pub basis: BasisDescriptor,
    pub hermitian: bool,
}

impl OperatorMatrix {
    pub fn new(data: DMatrix<Complex64>, basis: BasisDescriptor, hermitian: bool) -> Result<Self> {
        if data.nrows() != data.ncols() {
            return Err(ZenoError::invalid("operator", "matrix must be square"));
        }
        if data.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(ZenoError::invalid("operator", "non-finite entry"));
        }
        if hermitian {
            let dev = (&data - data.adjoint()).norm();
            if dev > 1e-12 * data.norm().max(1.0) {
                return Err(ZenoError::invalid("operator", format!("claimed Hermitian but deviates by {dev:e}")));
            }
        }
        Ok(OperatorMatrix { data, basis, hermitian })
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    /// Diagonal 0/1 projector.
    pub fn projector(inside: &[bool], basis: BasisDescriptor) -> Self {
        let n = inside.len();
        let data = DMatrix::from_fn(n, n, |i, j| {
            if i == j && inside[i] {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        OperatorMatrix { data, basis, hermitian: true }
    }

    pub fn is_projector(&self, tol: f64) -> bool {
        (&self.data * &self.data - &self.data).norm() <= tol && (&self.data - self.data.adjoint()).norm() <= tol
    }
}

fn same_dim(a: &OperatorMatrix, b: &OperatorMatrix) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(ZenoError::GridMismatch(format!("operator dimensions {} and {}", a.dim(), b.dim())));
    }
    Ok(())
}

/// A * B = A P B.
pub fn star_product(a: &OperatorMatrix, b: &OperatorMatrix, p: &OperatorMatrix) -> Result<OperatorMatrix> {
    same_dim(a, b)?;
    same_dim(a, p)?;
    Ok(OperatorMatrix { data: &a.data * &p.data * &b.data, basis: a.basis.clone(), hermitian: false })
}

/// Largest singular value by power iteration on M^H M, to 1e-10 relative.
pub fn operator_norm(m: &DMatrix<Complex64>) -> f64 {
    let n = m.ncols();
    if n == 0 {
        return 0.0;
    }
    let mh = m.adjoint();
    let mut v = nalgebra::DVector::from_fn(n, |i, _| Complex64::new(1.0 + 0.37 * ((i * 31) % 17) as f64, 0.1 * (i % 5) as f64));
    let nv = v.norm();
    v /= Complex64::new(nv, 0.0);
    let mut est = 0.0;
    for _ in 0..10000 {
        let w = &mh * (m * &v);
        let lam = w.norm();
        if lam == 0.0 {
            return 0.0;
        }
        v = w / Complex64::new(lam, 0.0);
        if (lam - est).abs() <= 1e-10 * lam {
            return lam.sqrt();
        }
        est = lam;
    }
    est.sqrt()
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct HomomorphismDefects {
    /// ||P (A B) P - (P A P)(P B P)||
    pub plain: f64,
    /// ||P (A * B) P - (P A P) * (P B P)||
    pub star: f64,
    /// Both divided by ||P A P|| ||P B P||.
    pub plain_relative: f64,
    pub star_relative: f64,
}

/// Compression X -> P X P against the ordinary and the projected product.
pub fn homomorphism_check(a: &OperatorMatrix, b: &OperatorMatrix, p: &OperatorMatrix) -> Result<HomomorphismDefects> {
    same_dim(a, b)?;
    same_dim(a, p)?;
    let pp = &p.data;
    let pa = pp * &a.data * pp;
    let pb = pp * &b.data * pp;
    let scale = (operator_norm(&pa) * operator_norm(&pb)).max(f64::MIN_POSITIVE);
    let plain = operator_norm(&(pp * (&a.data * &b.data) * pp - &pa * &pb));
    let star = operator_norm(&(pp * (&a.data * pp * &b.data) * pp - &pa * pp * &pb));
    Ok(HomomorphismDefects { plain, star, plain_relative: plain / scale, star_relative: star / scale })
}

/// ||(A * B) * C - A * (B * C)|| / (||A|| ||B|| ||C||)
pub fn associativity_defect(a: &OperatorMatrix, b: &OperatorMatrix, c: &OperatorMatrix, p: &OperatorMatrix) -> Result<f64> {
    let left = star_product(&star_product(a, b, p)?, c, p)?;
    let right = star_product(a, &star_product(b, c, p)?, p)?;
    let scale = operator_norm(&a.data) * operator_norm(&b.data) * operator_norm(&c.data);
    Ok(operator_norm(&(left.data - right.data)) / scale.max(f64::MIN_POSITIVE))
}

/// ||alpha(A * B) - alpha(A) * alpha(B)|| for alpha(X) = U X U^H.
pub fn star_automorphism_defect(a: &OperatorMatrix, b: &OperatorMatrix, p: &OperatorMatrix, u: &DMatrix<Complex64>) -> Result<f64> {
    same_dim(a, b)?;
    let ud = u.adjoint();
    let alpha = |x: &DMatrix<Complex64>| u * x * &ud;
    let lhs = alpha(&(&a.data * &p.data * &b.data));
    let rhs = alpha(&a.data) * &p.data * alpha(&b.data);
    Ok(operator_norm(&(lhs - rhs)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RampProfile {
    Linear,
    RaisedCosine,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "law")]
pub enum WidthSchedule {
    /// w = w0 / N
    InverseN { w0: f64 },
    /// w = w0 / N^2
    InverseNSquared { w0: f64 },
}

impl WidthSchedule {
    pub fn width(&self, n: usize) -> f64 {
        match *self {
            WidthSchedule::InverseN { w0 } => w0 / n as f64,
            WidthSchedule::InverseNSquared { w0 } => w0 / (n as f64 * n as f64),
        }
    }
}

/// Multiplication operator equal to one on the domain and ramping to zero
/// over a width w outside it.
#[derive(Clone, Debug)]
pub struct SmoothedProjector {
    pub grid: Grid,
    pub values: Vec<f64>,
    pub width: f64,
    /// The ramp is thinner than a grid cell, so the hard mask is used.
    pub saturated: bool,
}

pub fn smoothed_projector(
    domain: &Domain,
    grid: &Grid,
    n: usize,
    profile: RampProfile,
    schedule: WidthSchedule,
) -> Result<SmoothedProjector> {
    if n == 0 {
        return Err(ZenoError::invalid("n", "must be at least 1"));
    }
    let mask = characteristic_mask(domain, grid)?;
    let width = schedule.width(n);
    if !(width.is_finite() && width > 0.0) {
        return Err(ZenoError::invalid("w0", "ramp width must be positive"));
    }
    let h = grid.axes().iter().map(|a| a.spacing).fold(f64::INFINITY, f64::min);
    if width < h {
        return Ok(SmoothedProjector { grid: grid.clone(), values: mask.as_field(), width, saturated: true });
    }
    let values = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            if mask.inside()[i] {
                return 1.0;
            }
            let d = domain
                .distance_outside(&grid.point(i))
                .unwrap_or_else(|| raster_distance(&mask, i, width));
            if d >= width {
                0.0
            } else {
                match profile {
                    RampProfile::Linear => 1.0 - d / width,
                    RampProfile::RaisedCosine => 0.5 * (1.0 + (std::f64::consts::PI * d / width).cos()),
                }
            }
        })
        .collect();
    Ok(SmoothedProjector { grid: grid.clone(), values, width, saturated: false })
}

/// Distance from an outside cell to the nearest inside cell center, searched within `reach`.
fn raster_distance(mask: &Mask, i: usize, reach: f64) -> f64 {
    let g = mask.grid();
    let p = g.point(i);
    let idx = g.unravel(i);
    let mut best = f64::INFINITY;
    let r: Vec<usize> = g.axes().iter().map(|a| (reach / a.spacing).ceil() as usize + 1).collect();
    let lo: Vec<usize> = (0..g.dim()).map(|k| idx[k].saturating_sub(r[k])).collect();
    let hi: Vec<usize> = (0..g.dim()).map(|k| (idx[k] + r[k]).min(g.axis(k).points - 1)).collect();
    let mut cur = lo.clone();
    loop {
        let f = g.ravel(&cur);
        if mask.inside()[f] {
            let q = g.point(f);
            let d = ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt();
            best = best.min(d);
        }
        let mut k = g.dim();
        loop {
            if k == 0 {
                return best;
            }
            k -= 1;
            if cur[k] < hi[k] {
                cur[k] += 1;
                break;
            }
            cur[k] = lo[k];
        }
    }
}

/// ||(P_N - P) psi|| along an N ladder, with a log-log fit against N.
pub fn smoothed_projector_errors(
    domain: &Domain,
    grid: &Grid,
    psi: &[Complex64],
    ladder: &[usize],
    profile: RampProfile,
    schedule: WidthSchedule,
) -> Result<(Vec<(usize, f64)>, Option<PowerLawFit>)> {
    if psi.len() != grid.len() {
        return Err(ZenoError::GridMismatch("field and grid differ".into()));
    }
    let mask = characteristic_mask(domain, grid)?;
    let vol = grid.cell_volume();
    let mut out = Vec::new();
    for &n in ladder {
        let sp = smoothed_projector(domain, grid, n, profile, schedule)?;
        let s: f64 = sp
            .values
            .iter()
            .zip(mask.inside())
            .zip(psi)
            .map(|((v, &b), z)| {
                let d = v - if b { 1.0 } else { 0.0 };
                d * d * z.norm_sqr()
            })
            .sum();
        out.push((n, (s * vol).sqrt()));
    }
    let xs: Vec<f64> = out.iter().map(|p| p.0 as f64).collect();
    let ys: Vec<f64> = out.iter().map(|p| p.1).collect();
    Ok((out, fit_power_law(&xs, &ys).ok()))
}

/// Uniform polar grid: rings at r_j = (j + 1/2) dr, angles at 2 pi k / n_theta.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolarGrid {
    pub r_max: f64,
    pub r_points: usize,
    pub theta_points: usize,
}

impl PolarGrid {
    pub fn radius(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.r_max / self.r_points as f64
    }
}

/// ||[U_ang(t), P]|| on a polar grid, where U_ang = exp(-i t L_z^2 / (2 M r^2 hbar))
/// acts ring by ring and P is the radial indicator of [r1, r2].
pub fn angular_commutator_defect(r1: f64, r2: f64, t: f64, polar: PolarGrid, units: PhysicalUnits) -> Result<f64> {
    Domain::Annulus { r1, r2 }.validate()?;
    if polar.r_points < 2 || polar.theta_points < 2 || !(polar.r_max > r2) {
        return Err(ZenoError::invalid("polar", "grid must extend past r2 with at least two points per axis"));
    }
    let nt = polar.theta_points;
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(nt);
    let inv = planner.plan_fft_inverse(nt);
    let inside: Vec<bool> = (0..polar.r_points).map(|j| {
        let r = polar.radius(j);
        r > r1 && r < r2
    }).collect();
    let phases: Vec<Vec<Complex64>> = (0..polar.r_points)
        .map(|j| {
            let r = polar.radius(j);
            (0..nt)
                .map(|k| {
                    let l = if k <= (nt - 1) / 2 { k as f64 } else { k as f64 - nt as f64 };
                    Complex64::from_polar(1.0 / nt as f64, -units.hbar * l * l * t / (2.0 * units.mass * r * r))
                })
                .collect()
        })
        .collect();
    let apply_u = |v: &mut [Complex64], sign: f64| {
        for (j, ring) in v.chunks_mut(nt).enumerate() {
            fwd.process(ring);
            for (z, p) in ring.iter_mut().zip(&phases[j]) {
                *z *= if sign > 0.0 { *p } else { p.conj() };
            }
            inv.process(ring);
        }
    };
    let apply_p = |v: &mut [Complex64]| {
        for (j, ring) in v.chunks_mut(nt).enumerate() {
            if !inside[j] {
                ring.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
            }
        }
    };
    // C = U P - P U
    let apply_c = |v: &[Complex64], adjoint: bool| -> Vec<Complex64> {
        let s = if adjoint { -1.0 } else { 1.0 };
        let mut a = v.to_vec();
        let mut b = v.to_vec();
        if adjoint {
            // C^H = P U^H - U^H P
            apply_u(&mut a, s);
            apply_p(&mut a);
            apply_p(&mut b);
            apply_u(&mut b, s);
        } else {
            apply_p(&mut a);
            apply_u(&mut a, s);
            apply_u(&mut b, s);
            apply_p(&mut b);
        }
        a.iter().zip(&b).map(|(x, y)| x - y).collect()
    };
    power_norm(polar.r_points * nt, |v| apply_c(&apply_c(v, false), true))
}

/// Square root of the top eigenvalue of a positive operator, by power iteration.
fn power_norm(n: usize, op: impl Fn(&[Complex64]) -> Vec<Complex64>) -> Result<f64> {
    let mut v: Vec<Complex64> = (0..n).map(|i| Complex64::new(1.0 + 0.3 * ((i * 7) % 11) as f64, 0.05 * (i % 3) as f64)).collect();
    let nrm = |v: &[Complex64]| v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let n0 = nrm(&v);
    v.iter_mut().for_each(|z| *z /= n0);
    let mut est = 0.0;
    for _ in 0..20000 {
        let w = op(&v);
        let lam = nrm(&w);
        if lam == 0.0 || lam < 1e-300 {
            return Ok(0.0);
        }
        v = w.into_iter().map(|z| z / lam).collect();
        if (lam - est).abs() <= 1e-10 * lam {
            return Ok(lam.sqrt());
        }
        est = lam;
    }
    Err(ZenoError::EigenSolver("power iteration did not converge".into()))
}

/// ||[U(t), P]|| for the full Cartesian free evolution.
pub fn free_commutator_defect(prop: &SpectralPropagator, mask: &Mask, t: f64) -> Result<f64> {
    prop.grid().check_same(mask.grid())?;
    prop.check_guard(t)?;
    let fwd = prop.phases(t);
    let back = prop.phases(-t);
    let inside = mask.inside();
    let project = |v: &mut [Complex64]| {
        for (z, &b) in v.iter_mut().zip(inside) {
            if !b {
                *z = Complex64::new(0.0, 0.0);
            }
        }
    };
    let apply_c = |v: &[Complex64], adjoint: bool| -> Vec<Complex64> {
        let table = if adjoint { &back } else { &fwd };
        let mut a = v.to_vec();
        let mut b = v.to_vec();
        if adjoint {
            prop.apply(&mut a, table);
            project(&mut a);
            project(&mut b);
            prop.apply(&mut b, table);
        } else {
            project(&mut a);
            prop.apply(&mut a, table);
            prop.apply(&mut b, table);
            project(&mut b);
        }
        a.iter().zip(&b).map(|(x, y)| x - y).collect()
    };
    power_norm(prop.grid().len(), |v| apply_c(&apply_c(v, false), true))
}

/// Free-evolution commutator defects over a time ladder with a slope fit.
pub fn commutator_contrast(prop: &Arc<SpectralPropagator>, mask: &Mask, times: &[f64]) -> Result<(Vec<(f64, f64)>, Option<PowerLawFit>)> {
    let pts = times
        .iter()
        .map(|&t| Ok((t, free_commutator_defect(prop, mask, t)?)))
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
    Ok((pts, fit_power_law(&xs, &ys).ok()))
}
