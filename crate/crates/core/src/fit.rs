//! Log-log slope fits and low-order polynomial extrapolation.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Result, ZenoError};

/// Values at or below this are dropped before taking logarithms.
pub const FIT_FLOOR: f64 = 1e-10;
/// Fits with a smaller coefficient of determination are rejected.
pub const R2_GATE: f64 = 0.98;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PowerLawFit {
    /// y ~ prefactor * x^exponent
    pub exponent: f64,
    pub prefactor: f64,
    pub r2: f64,
    pub points: usize,
    pub accepted: bool,
}

/// Least-squares line through (ln x, ln y), ignoring y <= `FIT_FLOOR`.
pub fn fit_power_law(xs: &[f64], ys: &[f64]) -> Result<PowerLawFit> {
    if xs.len() != ys.len() {
        return Err(ZenoError::invalid("fit", "x and y lengths differ"));
    }
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && y.is_finite() && **y > FIT_FLOOR)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(ZenoError::invalid(
            "fit",
            format!("need at least three points above {FIT_FLOOR:e}, have {}", pts.len()),
        ));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(ZenoError::invalid("fit", "all abscissae coincide"));
    }
    let slope = sxy / sxx;
    let icept = my - slope * mx;
    let ss_res: f64 = pts.iter().map(|p| (p.1 - icept - slope * p.0).powi(2)).sum();
    let r2 = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    Ok(PowerLawFit { exponent: slope, prefactor: icept.exp(), r2, points: pts.len(), accepted: r2 >= R2_GATE })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PolyFit {
    /// c0 + c1 x + c2 x^2 + ...
    pub coefficients: Vec<f64>,
    pub rms_residual: f64,
    /// max(rms residual, |c0 - c0 of the next-lower-order fit on the finest points|)
    pub uncertainty: f64,
}

fn lstsq(xs: &[f64], ys: &[f64], degree: usize) -> Vec<f64> {
    let a = DMatrix::from_fn(xs.len(), degree + 1, |i, j| xs[i].powi(j as i32));
    let b = DVector::from_column_slice(ys);
    let svd = a.svd(true, true);
    let c = svd.solve(&b, 1e-14).expect("svd with u and v");
    c.iter().copied().collect()
}

/// Least-squares polynomial of `degree` in x, used to extrapolate to x = 0.
pub fn fit_polynomial(xs: &[f64], ys: &[f64], degree: usize) -> Result<PolyFit> {
    if xs.len() != ys.len() || xs.len() < degree + 1 {
        return Err(ZenoError::invalid(
            "ladder",
            format!("degree {degree} needs at least {} points, have {}", degree + 1, xs.len()),
        ));
    }
    let c = lstsq(xs, ys, degree);
    let rms = (xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - c.iter().rev().fold(0.0, |acc, ci| acc * x + ci)).powi(2))
        .sum::<f64>()
        / xs.len() as f64)
        .sqrt();
    let mut unc = rms;
    if degree > 0 {
        // finest points: smallest |x|
        let mut idx: Vec<usize> = (0..xs.len()).collect();
        idx.sort_by(|&a, &b| xs[a].abs().total_cmp(&xs[b].abs()));
        let take = degree.max(1);
        let fx: Vec<f64> = idx[..take].iter().map(|&i| xs[i]).collect();
        let fy: Vec<f64> = idx[..take].iter().map(|&i| ys[i]).collect();
        let lower = lstsq(&fx, &fy, degree - 1);
        unc = unc.max((lower[0] - c[0]).abs());
    }
    Ok(PolyFit { coefficients: c, rms_residual: rms, uncertainty: unc })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let xs: Vec<f64> = (1..10).map(|i| i as f64 * 0.1).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x.powf(1.5)).collect();
        let f = fit_power_law(&xs, &ys).unwrap();
        assert!((f.exponent - 1.5).abs() < 1e-12);
        assert!((f.prefactor - 3.0).abs() < 1e-12);
        assert!(f.accepted);
    }

    #[test]
    fn floor_points_are_dropped() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys = [1.0, 4.0, 9.0, 1e-12];
        let f = fit_power_law(&xs, &ys).unwrap();
        assert_eq!(f.points, 3);
        assert!((f.exponent - 2.0).abs() < 1e-12);
    }

    #[test]
    fn noisy_data_rejected() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        let ys = [1.0, 0.1, 5.0, 0.2, 3.0];
        assert!(!fit_power_law(&xs, &ys).unwrap().accepted);
    }

    #[test]
    fn quadratic_extrapolation_is_exact_on_quadratics() {
        let xs = [0.1, 0.05, 0.02];
        let ys: Vec<f64> = xs.iter().map(|x| -0.125 + 0.3 * x - 2.0 * x * x).collect();
        let f = fit_polynomial(&xs, &ys, 2).unwrap();
        assert!((f.coefficients[0] + 0.125).abs() < 1e-12);
        assert!(f.rms_residual < 1e-14);
    }
}
