//! Cylinder and spherical Bessel functions of real order and argument.
//!
//! Cylinder functions come from `puruspe` (Temme series and Steed's continued
//! fractions). Spherical ones use closed forms for l = 0, 1 and three-term
//! recurrences above.


/// J_nu(x) and Y_nu(x) for real nu >= 0 and x > 0.
pub fn bessel_jy(nu: f64, x: f64) -> (f64, f64) {
    assert!(nu >= 0.0 && x > 0.0, "bessel_jy needs nu >= 0 and x > 0");
    puruspe::Jnu_Ynu(nu, x)
}

pub fn bessel_j(nu: f64, x: f64) -> f64 {
    if x == 0.0 {
        return if nu == 0.0 { 1.0 } else { 0.0 };
    }
    bessel_jy(nu, x).0
}

pub fn bessel_y(nu: f64, x: f64) -> f64 {
    bessel_jy(nu, x).1
}

fn sph_j_series(l: u32, x: f64) -> f64 {
    let mut pre = 1.0;
    for i in 0..l {
        pre *= x / (2 * i + 3) as f64;
    }
    // pre = x^l / (2l+1)!!
    let q = -0.5 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..300 {
        let kf = k as f64;
        term *= q / (kf * (2.0 * (l as f64 + kf) + 1.0));
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    pre * sum
}

/// Spherical Bessel functions j_l(x), y_l(x) for x > 0.
pub fn spherical_jy(l: u32, x: f64) -> (f64, f64) {
    assert!(x > 0.0, "spherical_jy needs x > 0");
    let (s, c) = x.sin_cos();
    let y0 = -c / x;
    let y1 = -c / (x * x) - s / x;
    let (mut ym, mut y) = (y0, y1);
    if l == 0 {
        y = y0;
    } else {
        for m in 1..l {
            let next = (2 * m + 1) as f64 / x * y - ym;
            ym = y;
            y = next;
        }
    }
    let j = if l == 0 {
        s / x
    } else if x > l as f64 + 1.0 {
        let (mut jm, mut jc) = (s / x, s / (x * x) - c / x);
        for m in 1..l {
            let next = (2 * m + 1) as f64 / x * jc - jm;
            jm = jc;
            jc = next;
        }
        jc
    } else {
        sph_j_series(l, x)
    };
    (j, y)
}

/// Radial cross product for the annulus, J_nu(k r1) Y_nu(k r2) - J_nu(k r2) Y_nu(k r1).
pub fn cylinder_cross(nu: f64, k: f64, r1: f64, r2: f64) -> f64 {
    let (ja, ya) = bessel_jy(nu, k * r1);
    let (jb, yb) = bessel_jy(nu, k * r2);
    ja * yb - jb * ya
}

/// Radial cross product for the shell.
pub fn spherical_cross(l: u32, k: f64, r1: f64, r2: f64) -> f64 {
    let (ja, ya) = spherical_jy(l, k * r1);
    let (jb, yb) = spherical_jy(l, k * r2);
    ja * yb - jb * ya
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn wronskian() {
        for &x in &[0.3, 2.0, 9.0, 13.9, 14.1, 40.0] {
            for n in 0..6u32 {
                let (jn, yn) = bessel_jy(n as f64, x);
                let (jn1, yn1) = bessel_jy(n as f64 + 1.0, x);
                let w = jn1 * yn - jn * yn1;
                assert!((w - 2.0 / (PI * x)).abs() < 1e-10 * (2.0 / (PI * x)).max(1.0), "n={n} x={x} w={w}");
            }
        }
    }

    #[test]
    fn half_order_matches_spherical() {
        for &x in &[0.7, 3.0, 8.0, 20.0] {
            let (j, y) = bessel_jy(1.5, x);
            let (sj, sy) = spherical_jy(1, x);
            let f = (2.0 * x / PI).sqrt();
            assert!((j - f * sj).abs() < 1e-12);
            assert!((y - f * sy).abs() < 1e-11);
        }
    }
}
