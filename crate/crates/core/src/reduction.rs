//! Thin-domain reductions: Zeno limit first, then the thin limit.
//!
//! For each width on a ladder the divergent transverse energy is removed
//! from the reduced propagator by the phase e^{+i E_div t}; the remaining
//! phase gives a regularised energy, which is extrapolated to zero width.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::domain::{characteristic_mask, Domain};
use crate::error::{Result, ZenoError};
use crate::fit::{fit_polynomial, PolyFit};
use crate::grid::{Axis, Grid, PhysicalUnits};
use crate::propagator::SpectralPropagator;
use crate::spectra::basis::QuantumNumberLabel;
use crate::spectra::rectangle::{interval_energy, interval_modes};
use crate::spectra::roots::{annulus_roots, shell_roots};
use crate::zeno::engine::zeno_product;

/// Default bound on dt * E_transverse / hbar.
pub const GUARD_RATIO: f64 = 0.02;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ReductionFamily {
    /// [0,a] x [0,b] with the transverse sector m fixed, b -> 0.
    RectangleToInterval { a: f64, m: u32, n_max: u32 },
    /// Annulus of mean radius R and width dr -> 0.
    AnnulusToCircle { radius: f64, l_set: Vec<u32> },
    /// Shell of mean radius R and width dr -> 0.
    ShellToSphere { radius: f64, l_set: Vec<u32> },
}

/// Transverse Zeno run used as a diagnostic at each ladder point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticSettings {
    pub cells: usize,
    pub steps: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReductionPlan {
    pub family: ReductionFamily,
    /// Widths (b or dr), any order.
    pub ladder: Vec<f64>,
    pub time: f64,
    pub step_budget: u64,
    pub guard_ratio: f64,
    pub units: PhysicalUnits,
    pub diagnostics: Option<DiagnosticSettings>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TransverseDiagnostics {
    pub width: f64,
    pub steps: u64,
    pub guard_ratio: f64,
    pub final_norm: f64,
    /// max |<phi_m', V_N phi_m>| over m' != m, m' <= m + 2
    pub cross_sector: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct LadderPoint {
    pub width: f64,
    pub steps: u64,
    pub dt: f64,
    pub guard_ratio: f64,
    pub divergent_energy: f64,
    pub regularized: Vec<(QuantumNumberLabel, f64)>,
    pub diagnostics: Option<TransverseDiagnostics>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExtrapolatedLevel {
    pub label: QuantumNumberLabel,
    pub fit: PolyFit,
    pub limit: f64,
    /// Closed-form reduced energy the limit is compared with.
    pub reduced: f64,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct OffsetEstimate {
    pub value: f64,
    pub expected: f64,
    pub uncertainty: f64,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SectorGap {
    pub width: f64,
    pub m: u32,
    pub m_next: u32,
    pub gap: f64,
    pub expected: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ReductionResult {
    pub plan: ReductionPlan,
    pub points: Vec<LadderPoint>,
    pub levels: Vec<ExtrapolatedLevel>,
    pub offset: Option<OffsetEstimate>,
    pub gaps: Vec<SectorGap>,
}

impl ReductionPlan {
    pub fn validate(&self) -> Result<()> {
        self.units.validate()?;
        if self.ladder.len() < 3 {
            return Err(ZenoError::invalid("ladder", "quadratic extrapolation needs at least three widths"));
        }
        if self.ladder.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(ZenoError::invalid("ladder", "widths must be positive"));
        }
        if !(self.time.is_finite() && self.time > 0.0) {
            return Err(ZenoError::invalid("time", "must be positive"));
        }
        if !(self.guard_ratio > 0.0 && self.guard_ratio.is_finite()) {
            return Err(ZenoError::invalid("guard_ratio", "must be positive"));
        }
        match &self.family {
            ReductionFamily::RectangleToInterval { a, m, n_max } => {
                if !(*a > 0.0) || *m == 0 || *n_max == 0 {
                    return Err(ZenoError::invalid("family", "need a > 0, m >= 1, n_max >= 1"));
                }
            }
            ReductionFamily::AnnulusToCircle { radius, l_set } | ReductionFamily::ShellToSphere { radius, l_set } => {
                if !(*radius > 0.0) || l_set.is_empty() {
                    return Err(ZenoError::invalid("family", "need radius > 0 and a non-empty l set"));
                }
                if let Some(w) = self.ladder.iter().find(|w| **w >= 2.0 * radius) {
                    return Err(ZenoError::invalid("ladder", format!("width {w} leaves no hole at radius {radius}")));
                }
            }
        }
        Ok(())
    }

    fn transverse_energy(&self, width: f64) -> f64 {
        let m = match &self.family {
            ReductionFamily::RectangleToInterval { m, .. } => *m,
            _ => 1,
        };
        interval_energy(width, m, self.units)
    }

    /// Smallest N with dt E_tr / hbar within the guard ratio.
    pub fn required_steps(&self, width: f64) -> u64 {
        let e = self.transverse_energy(width);
        (self.time * e / (self.guard_ratio * self.units.hbar) * (1.0 - 1e-12)).ceil().max(1.0) as u64
    }
}

/// -hbar * (unwrapped phase of f(t)) / t, following the phase along [0, t].
pub fn regularized_energy(f: impl Fn(f64) -> Complex64, t: f64, hbar: f64) -> f64 {
    const SAMPLES: usize = 256;
    let mut prev = 0.0;
    let mut acc = 0.0;
    for j in 1..=SAMPLES {
        let ph = f(t * j as f64 / SAMPLES as f64).arg();
        let mut d = ph - prev;
        while d > PI {
            d -= 2.0 * PI;
        }
        while d <= -PI {
            d += 2.0 * PI;
        }
        acc += d;
        prev = ph;
    }
    -hbar * acc / t
}

/// Transverse factor of the rectangle product run on its own: the product on
/// [0,a] x [0,b] factorises exactly into interval products.
pub fn transverse_diagnostics(
    width: f64,
    m: u32,
    time: f64,
    steps: u64,
    cells: usize,
    units: PhysicalUnits,
) -> Result<TransverseDiagnostics> {
    if steps == 0 {
        return Err(ZenoError::invalid("steps", "must be at least 1"));
    }
    let domain = Domain::Interval { x0: 0.0, x1: width };
    let dt = time / steps as f64;
    let prop = SpectralPropagator::for_domain(&domain, cells, dt, units)?;
    let mask = characteristic_mask(&domain, prop.grid())?;
    let basis = interval_modes(0.0, width, m + 2, prop.grid(), units)?;
    let phi = &basis.entries[(m - 1) as usize].field;
    let (out, norms) = zeno_product(phi, dt, steps as usize, &mask, &prop)?;
    let mut cross: f64 = 0.0;
    for e in &basis.entries {
        if e.label != (QuantumNumberLabel::Interval { n: m }) {
            cross = cross.max(e.field.inner(&out)?.norm());
        }
    }
    Ok(TransverseDiagnostics {
        width,
        steps,
        guard_ratio: dt * interval_energy(width, m, units) / units.hbar,
        final_norm: *norms.last().expect("steps >= 1"),
        cross_sector: cross,
    })
}

/// The same transverse run with the limit order reversed (width far too
/// small for the step), which must not preserve the norm.
pub fn limit_order_control(
    width: f64,
    m: u32,
    time: f64,
    steps: u64,
    cells: usize,
    units: PhysicalUnits,
) -> Result<TransverseDiagnostics> {
    transverse_diagnostics(width, m, time, steps, cells, units)
}

fn line_grid(x0: f64, x1: f64, cells: usize) -> Result<Grid> {
    Ok(Grid::line(Axis::node_aligned(x0, x1, cells, 0.0)?))
}

pub fn reduce(plan: &ReductionPlan) -> Result<ReductionResult> {
    plan.validate()?;
    let hbar = plan.units.hbar;
    let t = plan.time;
    let mut points = Vec::new();
    let mut gaps = Vec::new();
    for &w in &plan.ladder {
        let required = plan.required_steps(w);
        let steps = match plan.diagnostics {
            Some(d) => d.steps.max(required),
            None => required,
        };
        if required > plan.step_budget || steps > plan.step_budget {
            return Err(ZenoError::LimitOrder {
                constraint: format!("dt * E_transverse / hbar <= {} at width {w}", plan.guard_ratio),
                required: required.max(steps),
                budget: plan.step_budget,
            });
        }
        let e_div = plan.transverse_energy(w);
        let dt = t / steps as f64;
        let mut regularized = Vec::new();
        let mut diagnostics = None;
        match &plan.family {
            ReductionFamily::RectangleToInterval { a, m, n_max } => {
                // Reduced propagator <m| U_Z(t) |m> on the longitudinal factor,
                // assembled from the Zeno-limit spectrum E_{n,m}.
                let grid = line_grid(0.0, *a, 256.max(8 * *n_max as usize))?;
                let basis = interval_modes(0.0, *a, *n_max + 4, &grid, plan.units)?;
                let e2 = |n: u32| crate::spectra::rectangle_energy(*a, w, n, *m, plan.units);
                for n in 1..=*n_max {
                    let psi = &basis.entries[(n - 1) as usize].field;
                    let f = |s: f64| -> Complex64 {
                        let mut acc = Complex64::new(0.0, 0.0);
                        for e in &basis.entries {
                            let np = match e.label {
                                QuantumNumberLabel::Interval { n } => n,
                                _ => unreachable!(),
                            };
                            let ov = e.field.inner(psi).expect("same grid");
                            acc += ov.norm_sqr() * Complex64::from_polar(1.0, -(e2(np) - e_div) * s / hbar);
                        }
                        acc
                    };
                    regularized.push((QuantumNumberLabel::Interval { n }, regularized_energy(f, t, hbar)));
                }
                gaps.push(SectorGap {
                    width: w,
                    m: *m,
                    m_next: m + 1,
                    gap: e2_gap(*a, w, *m, plan.units),
                    expected: plan.units.kinetic() * PI * PI * (2 * m + 1) as f64 / (w * w),
                });
                if let Some(d) = plan.diagnostics {
                    diagnostics = Some(transverse_diagnostics(w, *m, t, steps, d.cells, plan.units)?);
                }
            }
            ReductionFamily::AnnulusToCircle { radius, l_set } => {
                let (r1, r2) = (radius - 0.5 * w, radius + 0.5 * w);
                for &l in l_set {
                    let k = annulus_roots(l as f64, r1, r2, 1)?[0];
                    let e = plan.units.energy_of_k2(k * k);
                    let f = |s: f64| Complex64::from_polar(1.0, -(e - e_div) * s / hbar);
                    regularized.push((QuantumNumberLabel::Circle { l: l as i32 }, regularized_energy(f, t, hbar)));
                }
            }
            ReductionFamily::ShellToSphere { radius, l_set } => {
                let (r1, r2) = (radius - 0.5 * w, radius + 0.5 * w);
                for &l in l_set {
                    let k = shell_roots(l, r1, r2, 1)?[0];
                    let e = plan.units.energy_of_k2(k * k);
                    let f = |s: f64| Complex64::from_polar(1.0, -(e - e_div) * s / hbar);
                    regularized.push((QuantumNumberLabel::Sphere { l, m: 0 }, regularized_energy(f, t, hbar)));
                }
            }
        }
        points.push(LadderPoint {
            width: w,
            steps,
            dt,
            guard_ratio: dt * e_div / hbar,
            divergent_energy: e_div,
            regularized,
            diagnostics,
        });
    }

    let widths: Vec<f64> = points.iter().map(|p| p.width).collect();
    let mut levels = Vec::new();
    for (i, (label, _)) in points[0].regularized.iter().enumerate() {
        let ys: Vec<f64> = points.iter().map(|p| p.regularized[i].1).collect();
        let fit = fit_polynomial(&widths, &ys, 2)?;
        let reduced = reduced_energy(&plan.family, label, plan.units);
        levels.push(ExtrapolatedLevel { label: label.clone(), limit: fit.coefficients[0], fit, reduced });
    }
    let offset = match &plan.family {
        ReductionFamily::RectangleToInterval { .. } => None,
        ReductionFamily::AnnulusToCircle { radius, .. } => Some(offset_of(&levels, -plan.units.kinetic() / (4.0 * radius * radius))),
        ReductionFamily::ShellToSphere { .. } => Some(offset_of(&levels, 0.0)),
    };
    Ok(ReductionResult { plan: plan.clone(), points, levels, offset, gaps })
}

fn e2_gap(a: f64, b: f64, m: u32, units: PhysicalUnits) -> f64 {
    crate::spectra::rectangle_energy(a, b, 1, m + 1, units) - crate::spectra::rectangle_energy(a, b, 1, m, units)
}

/// Reduced-model energy without any curvature correction.
fn reduced_energy(family: &ReductionFamily, label: &QuantumNumberLabel, units: PhysicalUnits) -> f64 {
    match (family, label) {
        (ReductionFamily::RectangleToInterval { a, .. }, QuantumNumberLabel::Interval { n }) => interval_energy(*a, *n, units),
        (ReductionFamily::AnnulusToCircle { radius, .. }, QuantumNumberLabel::Circle { l }) => {
            units.kinetic() * (l * l) as f64 / (radius * radius)
        }
        (ReductionFamily::ShellToSphere { radius, .. }, QuantumNumberLabel::Sphere { l, .. }) => {
            units.kinetic() * (l * (l + 1)) as f64 / (radius * radius)
        }
        _ => f64::NAN,
    }
}

fn offset_of(levels: &[ExtrapolatedLevel], expected: f64) -> OffsetEstimate {
    let offs: Vec<f64> = levels.iter().map(|l| l.limit - l.reduced).collect();
    let mean = offs.iter().sum::<f64>() / offs.len() as f64;
    let spread = offs.iter().map(|o| (o - mean).abs()).fold(0.0, f64::max);
    let fit_unc = levels.iter().map(|l| l.fit.uncertainty).fold(0.0, f64::max);
    OffsetEstimate { value: mean, expected, uncertainty: spread.max(fit_unc) }
}
