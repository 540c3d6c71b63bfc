use num_complex::Complex64;
use serde::Serialize;

use crate::domain::Mask;
use crate::error::{Result, ZenoError};
use crate::fit::{fit_power_law, PowerLawFit};
use crate::propagator::SpectralPropagator;
use crate::spectra::basis::{QuantumNumberLabel, SpectralBasis};

/// Orthonormality required of a basis before matrix elements are formed.
pub const GRAM_TOL: f64 = 1e-8;

/// G_mn(tau) = <Psi_m, P U(tau) P Psi_n> over a tau ladder.
#[derive(Clone, Debug, Serialize)]
pub struct MatrixElementTable {
    pub labels: Vec<QuantumNumberLabel>,
    pub energies: Vec<f64>,
    pub hbar: f64,
    pub taus: Vec<f64>,
    /// `g[t][m][n]`
    pub g: Vec<Vec<Vec<Complex64>>>,
}

impl MatrixElementTable {
    /// G_mn - delta_mn (1 - i E_n tau / hbar)
    pub fn remainder(&self, t: usize, m: usize, n: usize) -> Complex64 {
        let g = self.g[t][m][n];
        if m == n {
            g - Complex64::new(1.0, -self.energies[n] * self.taus[t] / self.hbar)
        } else {
            g
        }
    }

    pub fn remainder_series(&self, m: usize, n: usize) -> Vec<f64> {
        (0..self.taus.len()).map(|t| self.remainder(t, m, n).norm()).collect()
    }

    pub fn index_of(&self, label: &QuantumNumberLabel) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn fit_remainder(&self, m: usize, n: usize) -> Result<PowerLawFit> {
        fit_power_law(&self.taus, &self.remainder_series(m, n))
    }
}

pub fn matrix_elements(
    basis: &SpectralBasis,
    taus: &[f64],
    mask: &Mask,
    prop: &SpectralPropagator,
) -> Result<MatrixElementTable> {
    basis.require_orthonormal(GRAM_TOL)?;
    prop.grid().check_same(&basis.grid)?;
    prop.grid().check_same(mask.grid())?;
    if taus.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(ZenoError::invalid("taus", "steps must be finite and non-negative"));
    }
    for &t in taus {
        prop.check_guard(t)?;
    }
    let k = basis.len();
    let mut g = Vec::with_capacity(taus.len());
    for &tau in taus {
        let mut gt = vec![vec![Complex64::new(0.0, 0.0); k]; k];
        for n in 0..k {
            let mut phi = (*basis.entries[n].field).clone();
            phi.project(mask)?;
            if tau != 0.0 {
                let table = prop.phases(tau);
                prop.apply_projected(phi.amps_mut(), &table, mask);
            }
            for m in 0..k {
                gt[m][n] = basis.entries[m].field.inner(&phi)?;
            }
        }
        g.push(gt);
    }
    Ok(MatrixElementTable {
        labels: basis.entries.iter().map(|e| e.label.clone()).collect(),
        energies: basis.energies(),
        hbar: prop.units().hbar,
        taus: taus.to_vec(),
        g,
    })
}
