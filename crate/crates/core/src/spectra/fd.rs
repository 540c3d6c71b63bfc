//! Finite-difference Dirichlet Laplacian on a masked grid.
//!
//! Interior cells carry the standard (2d+1)-point stencil. Where an arm leaves
//! an analytic domain, the symmetric ghost-point rule scales that arm's
//! diagonal contribution by 1/theta, with theta the fractional distance to
//! the boundary. Raster masks keep theta = 1.

use std::sync::Arc;

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};
use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::domain::{characteristic_mask, Domain};
use crate::error::{Result, ZenoError};
use crate::grid::{Grid, PhysicalUnits};
use crate::spectra::basis::{BasisEntry, QuantumNumberLabel, Representation, SpectralBasis, SpectrumSource};
use crate::wavefunction::WaveFunction;

#[derive(Clone, Debug)]
pub struct FdOptions {
    pub count: usize,
    /// Relative residual target for the shift-inverted operator.
    pub tol: f64,
    pub block: usize,
    /// Interior sizes up to this use a dense eigensolver.
    pub dense_limit: usize,
    pub max_restarts: usize,
    pub seed: u64,
}

impl FdOptions {
    pub fn new(count: usize) -> Self {
        FdOptions { count, tol: 1e-10, block: 4, dense_limit: 2000, max_restarts: 60, seed: 0x5eed }
    }
}

/// Sparse symmetric matrix of minus the discrete Laplacian on interior cells.
#[derive(Clone, Debug)]
pub struct FdOperator {
    pub grid: Grid,
    /// Flat grid index of every unknown.
    pub cells: Vec<usize>,
    pub triplets: Vec<(usize, usize, f64)>,
}

impl FdOperator {
    pub fn assemble(domain: &Domain, grid: &Grid) -> Result<Self> {
        let mask = characteristic_mask(domain, grid)?;
        let inside = mask.inside();
        let cells: Vec<usize> = (0..grid.len()).filter(|&f| inside[f]).collect();
        let mut slot = vec![usize::MAX; grid.len()];
        for (i, &f) in cells.iter().enumerate() {
            slot[f] = i;
        }
        let strides = grid.strides();
        let shape = grid.shape();
        let mut triplets = Vec::with_capacity(cells.len() * (2 * grid.dim() + 1));
        for (i, &f) in cells.iter().enumerate() {
            let idx = grid.unravel(f);
            let p = grid.point(f);
            let mut diag = 0.0;
            for k in 0..grid.dim() {
                let h = grid.axis(k).spacing;
                let h2 = 1.0 / (h * h);
                for dir in [-1.0, 1.0] {
                    let nb = if dir < 0.0 {
                        (idx[k] > 0).then(|| f - strides[k])
                    } else {
                        (idx[k] + 1 < shape[k]).then(|| f + strides[k])
                    };
                    match nb {
                        Some(g) if inside[g] => {
                            diag += h2;
                            triplets.push((i, slot[g], -h2));
                        }
                        _ => {
                            let theta = domain.boundary_fraction(&p, k, dir, h).unwrap_or(1.0);
                            diag += h2 / theta;
                        }
                    }
                }
            }
            triplets.push((i, i, diag));
        }
        Ok(FdOperator { grid: grid.clone(), cells, triplets })
    }

    pub fn size(&self) -> usize {
        self.cells.len()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; x.len()];
        for &(i, j, v) in &self.triplets {
            y[i] += v * x[j];
        }
        y
    }

    fn dense(&self) -> DMatrix<f64> {
        let n = self.size();
        let mut a = DMatrix::zeros(n, n);
        for &(i, j, v) in &self.triplets {
            a[(i, j)] += v;
        }
        a
    }
}

/// Lowest eigenpairs of an [`FdOperator`], eigenvalues of minus the Laplacian.
#[derive(Clone, Debug)]
pub struct FdEigen {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    pub block_steps: usize,
}

pub fn smallest_eigenpairs(op: &FdOperator, opts: &FdOptions) -> Result<FdEigen> {
    let n = op.size();
    let k = opts.count;
    if k == 0 {
        return Err(ZenoError::invalid("count", "must be at least 1"));
    }
    if 4 * k > n {
        return Err(ZenoError::invalid(
            "count",
            format!("{k} eigenpairs requested but only {n} interior cells (limit n/4)"),
        ));
    }
    if n <= opts.dense_limit {
        let eig = SymmetricEigen::new(op.dense());
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order[..k].iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors = order[..k].iter().map(|&i| eig.eigenvectors.column(i).iter().copied().collect()).collect();
        return Ok(FdEigen { values, vectors, block_steps: 0 });
    }
    let trip: Vec<Triplet<usize, usize, f64>> = op.triplets.iter().map(|&(i, j, v)| Triplet::new(i, j, v)).collect();
    let a = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &trip)
        .map_err(|e| ZenoError::EigenSolver(format!("sparse assembly failed: {e:?}")))?;
    let llt = a
        .sp_cholesky(Side::Lower)
        .map_err(|e| ZenoError::EigenSolver(format!("Cholesky factorisation failed: {e:?}")))?;
    let solve = |cols: &mut [Vec<f64>]| {
        let b = cols.len();
        let mut rhs = Mat::<f64>::from_fn(n, b, |i, j| cols[j][i]);
        llt.solve_in_place(rhs.as_mut());
        for (j, c) in cols.iter_mut().enumerate() {
            for (i, v) in c.iter_mut().enumerate() {
                *v = rhs[(i, j)];
            }
        }
    };
    let (vectors, block_steps) = block_krylov(solve, n, k, opts)?;
    let mut pairs: Vec<(f64, Vec<f64>)> = vectors
        .into_iter()
        .map(|v| {
            let av = op.apply(&v);
            (dot(&v, &av) / dot(&v, &v), v)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (values, vectors) = pairs.into_iter().unzip();
    Ok(FdEigen { values, vectors, block_steps })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.par_iter().zip(b.par_iter()).map(|(x, y)| x * y).sum()
}

/// `c[i][j] = q_i . z_j`
fn project(q: &[Vec<f64>], z: &[Vec<f64>]) -> Vec<Vec<f64>> {
    q.par_iter().map(|qi| z.iter().map(|zj| dot(qi, zj)).collect()).collect()
}

/// `z_j -= sum_i c[i][j] q_i`
fn subtract(q: &[Vec<f64>], c: &[Vec<f64>], z: &mut [Vec<f64>]) {
    for (j, zj) in z.iter_mut().enumerate() {
        zj.par_chunks_mut(4096).enumerate().for_each(|(ci, chunk)| {
            let off = ci * 4096;
            for (i, qi) in q.iter().enumerate() {
                let cij = c[i][j];
                if cij != 0.0 {
                    for (r, v) in chunk.iter_mut().enumerate() {
                        *v -= cij * qi[off + r];
                    }
                }
            }
        });
    }
}

/// `sum_i s[i][a] q_i` for each requested column `a`.
fn combine(q: &[Vec<f64>], s: &DMatrix<f64>, cols: &[usize]) -> Vec<Vec<f64>> {
    let n = q[0].len();
    cols.par_iter()
        .map(|&a| {
            let mut y = vec![0.0; n];
            for (i, qi) in q.iter().enumerate() {
                let w = s[(i, a)];
                if w != 0.0 {
                    y.iter_mut().zip(qi).for_each(|(v, x)| *v += w * x);
                }
            }
            y
        })
        .collect()
}

fn orthonormalize(q: &[Vec<f64>], w: &mut Vec<Vec<f64>>, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    for _ in 0..2 {
        let c = project(q, w);
        subtract(q, &c, w);
    }
    let b = w.len();
    let mut r = DMatrix::zeros(b, b);
    for j in 0..b {
        let before = dot(&w[j], &w[j]).sqrt();
        for i in 0..j {
            let c = dot(&w[i], &w[j]);
            r[(i, j)] += c;
            let wi = w[i].clone();
            w[j].iter_mut().zip(&wi).for_each(|(v, x)| *v -= c * x);
        }
        let mut nrm = dot(&w[j], &w[j]).sqrt();
        if nrm <= 1e-10 * before.max(f64::MIN_POSITIVE) {
            // breakdown: continue with a fresh random direction
            let mut v: Vec<f64> = (0..w[j].len()).map(|_| rng.gen::<f64>() - 0.5).collect();
            for _ in 0..2 {
                for qi in q.iter().chain(w[..j].iter()) {
                    let c = dot(qi, &v);
                    v.iter_mut().zip(qi).for_each(|(a, x)| *a -= c * x);
                }
            }
            w[j] = v;
            nrm = dot(&w[j], &w[j]).sqrt();
        } else {
            r[(j, j)] = nrm;
        }
        w[j].iter_mut().for_each(|v| *v /= nrm);
    }
    r
}

/// Largest `k` eigenpairs of a symmetric positive operator given by `apply`,
/// by block Krylov iteration with full reorthogonalisation and thick restarts.
fn block_krylov(
    apply: impl Fn(&mut [Vec<f64>]),
    n: usize,
    k: usize,
    opts: &FdOptions,
) -> Result<(Vec<Vec<f64>>, usize)> {
    let b = opts.block.max(1);
    let cap = (2 * k + 4 * b + 20).min(n);
    let keep = (k + (cap - k) / 2).max(k + b).min(cap - b);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(cap);
    let mut h = DMatrix::<f64>::zeros(0, 0);
    let mut x: Vec<Vec<f64>> = (0..b).map(|_| (0..n).map(|_| rng.gen::<f64>() - 0.5).collect()).collect();
    orthonormalize(&q, &mut x, &mut rng);
    let mut steps = 0;
    let mut restarts = 0;
    loop {
        steps += 1;
        let mut z = x.clone();
        apply(&mut z);
        let m0 = q.len();
        q.append(&mut x);
        let m = q.len();
        let c = project(&q, &z);
        let mut hn = DMatrix::zeros(m, m);
        hn.view_mut((0, 0), (m0, m0)).copy_from(&h);
        for i in 0..m {
            for j in 0..b {
                hn[(i, m0 + j)] = c[i][j];
                hn[(m0 + j, i)] = c[i][j];
            }
        }
        for i in 0..b {
            for j in 0..b {
                let s = 0.5 * (c[m0 + i][j] + c[m0 + j][i]);
                hn[(m0 + i, m0 + j)] = s;
            }
        }
        h = hn;
        subtract(&q, &c, &mut z);
        let bmat = orthonormalize(&q, &mut z, &mut rng);

        let eig = SymmetricEigen::new(h.clone());
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &c| eig.eigenvalues[c].total_cmp(&eig.eigenvalues[a]));
        let s = &eig.eigenvectors;
        let mut worst: f64 = 0.0;
        let mut done = 0;
        if m >= k {
            for &a in &order[..k] {
                let theta = eig.eigenvalues[a];
                let mut r2 = 0.0;
                for i in 0..b {
                    let mut acc = 0.0;
                    for j in 0..b {
                        acc += bmat[(i, j)] * s[(m - b + j, a)];
                    }
                    r2 += acc * acc;
                }
                let rel = r2.sqrt() / theta.abs();
                worst = worst.max(rel);
                if rel <= opts.tol {
                    done += 1;
                }
            }
        }
        if done == k {
            return Ok((combine(&q, s, &order[..k]), steps));
        }
        if m + b > cap || m + b > n {
            restarts += 1;
            if restarts > opts.max_restarts {
                return Err(ZenoError::EigenSolver(format!(
                    "{done}/{k} pairs converged after {steps} block steps and {} restarts; worst relative residual {worst:e}",
                    restarts - 1
                )));
            }
            let p = keep.min(m);
            let cols: Vec<usize> = order[..p].to_vec();
            q = combine(&q, s, &cols);
            h = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(p, cols.iter().map(|&a| eig.eigenvalues[a])));
        }
        x = z;
    }
}

/// Dominant angular index of a 2D field about the origin, scanning l <= l_max.
/// Power is accumulated ring by ring so radial nodes do not cancel it.
pub fn dominant_angular_index(grid: &Grid, field: &[f64], l_max: u32) -> u32 {
    let h = grid.axis(0).spacing;
    let lm = l_max as usize;
    let mut rings: std::collections::BTreeMap<i64, (Vec<Complex64>, usize)> = Default::default();
    for (i, &v) in field.iter().enumerate() {
        if v == 0.0 {
            continue;
        }
        let p = grid.point(i);
        let ring = (p[0].hypot(p[1]) / h).floor() as i64;
        let th = p[1].atan2(p[0]);
        let e = rings.entry(ring).or_insert_with(|| (vec![Complex64::new(0.0, 0.0); lm + 1], 0));
        for l in 0..=lm {
            e.0[l] += v * Complex64::from_polar(1.0, -(l as f64) * th);
        }
        e.1 += 1;
    }
    let mut power = vec![0.0; lm + 1];
    for (coef, count) in rings.values() {
        for l in 0..=lm {
            let w = if l == 0 { 1.0 } else { 2.0 };
            power[l] += w * coef[l].norm_sqr() / *count as f64;
        }
    }
    (0..=lm).max_by(|&a, &b| power[a].total_cmp(&power[b])).unwrap_or(0) as u32
}

/// Lowest `count` Dirichlet eigenpairs by finite differences on `grid`.
pub fn fd_dirichlet_eigs(domain: &Domain, grid: &Grid, count: usize, units: PhysicalUnits) -> Result<SpectralBasis> {
    fd_dirichlet_eigs_with(domain, grid, &FdOptions::new(count), units)
}

pub fn fd_dirichlet_eigs_with(
    domain: &Domain,
    grid: &Grid,
    opts: &FdOptions,
    units: PhysicalUnits,
) -> Result<SpectralBasis> {
    units.validate()?;
    let op = FdOperator::assemble(domain, grid)?;
    let eig = smallest_eigenpairs(&op, opts)?;
    let vol = grid.cell_volume();
    let planar = matches!(domain, Domain::Annulus { .. });
    let entries = eig
        .values
        .iter()
        .zip(&eig.vectors)
        .enumerate()
        .map(|(i, (&lam, v))| {
            let nrm = (v.iter().map(|x| x * x).sum::<f64>() * vol).sqrt();
            let mut full = vec![0.0; grid.len()];
            for (&f, &x) in op.cells.iter().zip(v) {
                full[f] = x / nrm;
            }
            let angular = planar.then(|| dominant_angular_index(grid, &full, 20));
            let amps = full.into_iter().map(|x| Complex64::new(x, 0.0)).collect();
            Ok(BasisEntry {
                label: QuantumNumberLabel::Fd { index: i as u32, angular },
                energy: units.energy_of_k2(lam),
                field: Arc::new(WaveFunction::new(grid.clone(), amps)?),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    SpectralBasis::new(domain.clone(), SpectrumSource::FdOracle, Representation::Cartesian, grid.clone(), entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Axis;
    use std::f64::consts::PI;

    fn square(cells: usize) -> Grid {
        let a = Axis::node_aligned(0.0, PI, cells, 0.0).unwrap();
        Grid::new(vec![a.clone(), a]).unwrap()
    }

    #[test]
    fn dense_and_krylov_paths_agree() {
        let d = Domain::Rectangle { a: PI, b: PI };
        let g = square(40);
        let op = FdOperator::assemble(&d, &g).unwrap();
        let mut o = FdOptions::new(10);
        o.dense_limit = 100;
        let k = smallest_eigenpairs(&op, &o).unwrap();
        o.dense_limit = usize::MAX;
        let dn = smallest_eigenpairs(&op, &o).unwrap();
        for (a, b) in k.values.iter().zip(&dn.values) {
            assert!((a - b).abs() < 1e-9 * b, "{a} {b}");
        }
        // the 2.5 pair is exactly degenerate and both partners must appear
        let near = k.values.iter().filter(|&&v| (v - 5.0).abs() < 0.05).count();
        assert_eq!(near, 2);
    }

    #[test]
    fn too_many_modes_rejected() {
        let d = Domain::Rectangle { a: PI, b: PI };
        let op = FdOperator::assemble(&d, &square(8)).unwrap();
        assert!(smallest_eigenpairs(&op, &FdOptions::new(20)).is_err());
    }

    #[test]
    fn rectangle_fd_lies_below_exact() {
        let d = Domain::Rectangle { a: PI, b: PI };
        let b = fd_dirichlet_eigs(&d, &square(32), 4, PhysicalUnits::default()).unwrap();
        let exact = [1.0, 2.5, 2.5, 4.0];
        for (e, x) in b.energies().iter().zip(exact) {
            assert!(*e < x && *e > 0.99 * x);
        }
    }
}
