//! Eigenfunctions of the angular Laplacian on the circle and sphere.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Result, ZenoError};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AngularFamily {
    Circle,
    Sphere,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AngularMode {
    pub l: i32,
    pub m: i32,
    /// Eigenvalue of minus the angular Laplacian: l^2 or l(l+1).
    pub eigenvalue: f64,
}

impl AngularMode {
    pub fn eval(&self, family: AngularFamily, theta: f64, phi: f64) -> Complex64 {
        match family {
            AngularFamily::Circle => circle_mode(self.l, theta),
            AngularFamily::Sphere => sphere_mode(self.l as u32, self.m, theta, phi),
        }
    }
}

/// All modes with |l| <= l_max (circle) or l <= l_max, |m| <= l (sphere).
pub fn angular_modes(family: AngularFamily, l_max: u32) -> Vec<AngularMode> {
    let l_max = l_max as i32;
    match family {
        AngularFamily::Circle => (-l_max..=l_max)
            .map(|l| AngularMode { l, m: 0, eigenvalue: (l * l) as f64 })
            .collect(),
        AngularFamily::Sphere => (0..=l_max)
            .flat_map(|l| (-l..=l).map(move |m| AngularMode { l, m, eigenvalue: (l * (l + 1)) as f64 }))
            .collect(),
    }
}

pub fn circle_mode(l: i32, theta: f64) -> Complex64 {
    Complex64::from_polar(1.0 / (2.0 * PI).sqrt(), l as f64 * theta)
}

/// Normalised polar factor: integral of theta_part^2 sin(theta) dtheta is one.
pub fn theta_part(l: u32, m: i32, theta: f64) -> Result<f64> {
    let ma = m.unsigned_abs();
    if ma > l {
        return Err(ZenoError::invalid("m", format!("|m| = {ma} exceeds l = {l}")));
    }
    let x = theta.cos();
    let s = theta.sin().abs();
    // normalised P_m^m
    let mut pmm = (1.0 / 2.0f64).sqrt();
    for i in 1..=ma {
        pmm *= -((2 * i + 1) as f64 / (2 * i) as f64).sqrt() * s;
    }
    let value = if l == ma {
        pmm
    } else {
        let mut p_prev = pmm;
        let mut p = x * ((2 * ma + 3) as f64).sqrt() * pmm;
        for ll in (ma + 2)..=l {
            let (lf, mf) = (ll as f64, ma as f64);
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0).powi(2) - mf * mf) / (4.0 * (lf - 1.0).powi(2) - 1.0)).sqrt();
            let next = a * (x * p - b * p_prev);
            p_prev = p;
            p = next;
        }
        p
    };
    Ok(if m < 0 && ma % 2 == 1 { -value } else { value })
}

pub fn sphere_mode(l: u32, m: i32, theta: f64, phi: f64) -> Complex64 {
    let t = theta_part(l, m, theta).unwrap_or(0.0);
    Complex64::from_polar(t / (2.0 * PI).sqrt(), m as f64 * phi)
}
