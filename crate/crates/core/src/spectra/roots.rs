//! Bracketing root finder for the radial cross products.

use crate::error::{Result, ZenoError};
use crate::spectra::bessel::{cylinder_cross, spherical_cross};

/// First `count` positive zeros of `f`, scanning with step `step` up to
/// `k_max` and bisecting each sign change to full precision.
pub fn scan_roots(f: impl Fn(f64) -> f64, step: f64, count: usize, k_max: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(count);
    let mut a = 0.5 * step;
    let mut fa = f(a);
    while out.len() < count && a < k_max {
        let b = a + step;
        let fb = f(b);
        if fa == 0.0 {
            out.push(a);
        } else if fa.signum() != fb.signum() {
            out.push(bisect(&f, a, b, fa));
        }
        a = b;
        fa = fb;
    }
    out
}

fn bisect(f: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, mut flo: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= 2.0 * f64::EPSILON * hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn check_radii(r1: f64, r2: f64) -> Result<()> {
    if !(r1.is_finite() && r1 > 0.0) {
        return Err(ZenoError::invalid(
            "r1",
            "the cross-product form needs r1 > 0; the disk (r1 = 0) uses J alone",
        ));
    }
    if !(r2.is_finite() && r2 > r1) {
        return Err(ZenoError::invalid("r2", format!("need r2 > r1, got r1 = {r1}, r2 = {r2}")));
    }
    Ok(())
}

fn scan_limit(nu: f64, count: usize, dr: f64, r1: f64) -> f64 {
    // Generous bound: radial quantum plus the centrifugal contribution.
    ((count as f64 + 2.0) * std::f64::consts::PI / dr) + 4.0 * (nu + 1.0) / r1 + 10.0
}

/// Radial wavenumbers k_n (n = 1..=count) of the annulus for order `nu`.
pub fn annulus_roots(nu: f64, r1: f64, r2: f64, count: usize) -> Result<Vec<f64>> {
    check_radii(r1, r2)?;
    let dr = r2 - r1;
    let step = std::f64::consts::PI / (4.0 * dr);
    let k_max = scan_limit(nu, count, dr, r1);
    let roots = scan_roots(|k| cylinder_cross(nu, k, r1, r2), step, count, k_max);
    if roots.len() < count {
        return Err(ZenoError::RootNotBracketed { order: nu, k_max });
    }
    Ok(roots)
}

/// Radial wavenumbers of the spherical shell for angular momentum `l`.
pub fn shell_roots(l: u32, r1: f64, r2: f64, count: usize) -> Result<Vec<f64>> {
    check_radii(r1, r2)?;
    let dr = r2 - r1;
    let step = std::f64::consts::PI / (4.0 * dr);
    let k_max = scan_limit(l as f64 + 0.5, count, dr, r1);
    let roots = scan_roots(|k| spherical_cross(l, k, r1, r2), step, count, k_max);
    if roots.len() < count {
        return Err(ZenoError::RootNotBracketed { order: l as f64, k_max });
    }
    Ok(roots)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disk_limit_is_rejected() {
        assert!(annulus_roots(0.0, 0.0, 1.0, 2).is_err());
        assert!(shell_roots(0, 2.0, 1.0, 2).is_err());
    }

    #[test]
    fn shell_s_wave_is_a_box() {
        let r = shell_roots(0, 1.0, 1.7, 6).unwrap();
        for (n, k) in r.iter().enumerate() {
            let exact = (n + 1) as f64 * std::f64::consts::PI / 0.7;
            assert!((k - exact).abs() <= 1e-10 * exact);
        }
    }

    #[test]
    fn roots_increase_with_order_and_interlace() {
        let a = annulus_roots(0.0, 1.0, 2.0, 5).unwrap();
        for l in 1..=4 {
            let b = annulus_roots(l as f64, 1.0, 2.0, 5).unwrap();
            let prev = annulus_roots((l - 1) as f64, 1.0, 2.0, 5).unwrap();
            for n in 0..5 {
                assert!(b[n] > prev[n]);
                if n + 1 < 5 {
                    assert!(b[n] < prev[n + 1]);
                }
            }
            let _ = &a;
        }
    }
}
