use num_complex::Complex64;

use crate::domain::Mask;
use crate::error::{Result, ZenoError};
use crate::propagator::SpectralPropagator;
use crate::wavefunction::WaveFunction;

/// ||Q U(tau) P psi|| for psi already inside the mask.
pub fn leakage(psi: &WaveFunction, tau: f64, mask: &Mask, prop: &SpectralPropagator) -> Result<f64> {
    let outside = psi.outside_norm(mask)?;
    if outside > 1e-12 * psi.norm().max(f64::MIN_POSITIVE) {
        return Err(ZenoError::invalid("psi", format!("field has norm {outside:e} outside the domain")));
    }
    let evolved = prop.evolve_free(psi, tau)?;
    evolved.outside_norm(mask)
}

/// Operator norm ||Q U(tau) P|| on the grid, by power iteration on P U(-tau) Q U(tau) P.
pub fn operator_leakage_norm(prop: &SpectralPropagator, mask: &Mask, tau: f64) -> Result<f64> {
    prop.grid().check_same(mask.grid())?;
    prop.check_guard(tau)?;
    let fwd = prop.phases(tau);
    let back = prop.phases(-tau);
    let inside = mask.inside();
    let mut v: Vec<Complex64> = (0..prop.grid().len())
        .map(|i| if inside[i] { Complex64::new(1.0 + 0.1 * ((i * 7919) % 13) as f64, 0.0) } else { Complex64::new(0.0, 0.0) })
        .collect();
    let norm = |v: &[Complex64]| v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let n0 = norm(&v);
    v.iter_mut().for_each(|z| *z /= n0);
    let mut est = 0.0;
    for _ in 0..20000 {
        prop.apply(&mut v, &fwd);
        for (z, &b) in v.iter_mut().zip(inside) {
            if b {
                *z = Complex64::new(0.0, 0.0);
            }
        }
        prop.apply(&mut v, &back);
        for (z, &b) in v.iter_mut().zip(inside) {
            if !b {
                *z = Complex64::new(0.0, 0.0);
            }
        }
        let lam = norm(&v);
        if lam == 0.0 {
            return Ok(0.0);
        }
        v.iter_mut().for_each(|z| *z /= lam);
        if (lam - est).abs() <= 1e-10 * lam {
            return Ok(lam.sqrt());
        }
        est = lam;
    }
    Err(ZenoError::EigenSolver("power iteration for the leakage norm did not converge".into()))
}
