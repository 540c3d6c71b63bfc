//! Dense-matrix oracles on small 1D grids.
//!
//! The free propagator is assembled as a circulant matrix by direct
//! summation over plane waves, without any FFT.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::domain::Mask;
use crate::error::{Result, ZenoError};
use crate::grid::{Grid, PhysicalUnits};

/// Largest grid handled by the dense oracle.
pub const DENSE_MAX_POINTS: usize = 1024;

fn check_line(grid: &Grid) -> Result<usize> {
    if grid.dim() != 1 {
        return Err(ZenoError::GridMismatch("dense oracle is one-dimensional".into()));
    }
    let n = grid.len();
    if n > DENSE_MAX_POINTS {
        return Err(ZenoError::invalid("grid", format!("dense oracle limited to {DENSE_MAX_POINTS} points")));
    }
    Ok(n)
}

/// Circulant matrix with first column `c`.
fn circulant<T: nalgebra::Scalar + Copy>(c: &[T]) -> DMatrix<T> {
    let n = c.len();
    DMatrix::from_fn(n, n, |j, l| c[(j + n - l) % n])
}

/// U(tau) on a periodic 1D grid.
pub fn dense_free_propagator(grid: &Grid, tau: f64, units: PhysicalUnits) -> Result<DMatrix<Complex64>> {
    let n = check_line(grid)?;
    let ks = grid.axis(0).wavenumbers();
    let h = grid.axis(0).spacing;
    let c: Vec<Complex64> = (0..n)
        .map(|d| {
            ks.iter()
                .map(|&k| Complex64::from_polar(1.0, k * d as f64 * h - units.omega_of_k2(k * k) * tau))
                .sum::<Complex64>()
                / n as f64
        })
        .collect();
    Ok(circulant(&c))
}

/// Kinetic matrix hbar^2 k^2 / 2M, real symmetric.
pub fn dense_kinetic(grid: &Grid, units: PhysicalUnits) -> Result<DMatrix<f64>> {
    let n = check_line(grid)?;
    let ks = grid.axis(0).wavenumbers();
    let h = grid.axis(0).spacing;
    let c: Vec<f64> = (0..n)
        .map(|d| ks.iter().map(|&k| units.energy_of_k2(k * k) * (k * d as f64 * h).cos()).sum::<f64>() / n as f64)
        .collect();
    Ok(circulant(&c))
}

fn projector(mask: &Mask) -> DMatrix<Complex64> {
    let n = mask.inside().len();
    DMatrix::from_fn(n, n, |i, j| {
        if i == j && mask.inside()[i] {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

/// (P U(tau) P)^n as an explicit matrix power.
pub fn dense_zeno_product(mask: &Mask, tau: f64, n: usize, units: PhysicalUnits) -> Result<DMatrix<Complex64>> {
    let u = dense_free_propagator(mask.grid(), tau, units)?;
    let p = projector(mask);
    let step = &p * &u * &p;
    let mut out = p.clone();
    for _ in 0..n {
        out = &step * &out;
    }
    Ok(out)
}

/// Grid-level Zeno limit exp(-i t P K P / hbar) restricted to the mask.
pub fn dense_zeno_limit(mask: &Mask, t: f64, units: PhysicalUnits) -> Result<DMatrix<Complex64>> {
    let k = dense_kinetic(mask.grid(), units)?;
    let idx: Vec<usize> = (0..mask.inside().len()).filter(|&i| mask.inside()[i]).collect();
    let m = idx.len();
    let pkp = DMatrix::from_fn(m, m, |a, b| k[(idx[a], idx[b])]);
    let eig = SymmetricEigen::new(pkp);
    let v = eig.eigenvectors.map(|x| Complex64::new(x, 0.0));
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|e| Complex64::from_polar(1.0, -e * t / units.hbar)));
    let small = &v * d * v.adjoint();
    let n = mask.inside().len();
    let mut out = DMatrix::zeros(n, n);
    for (a, &i) in idx.iter().enumerate() {
        for (b, &j) in idx.iter().enumerate() {
            out[(i, j)] = small[(a, b)];
        }
    }
    Ok(out)
}

pub fn apply(m: &DMatrix<Complex64>, v: &[Complex64]) -> Vec<Complex64> {
    let x = nalgebra::DVector::from_column_slice(v);
    (m * x).iter().copied().collect()
}
