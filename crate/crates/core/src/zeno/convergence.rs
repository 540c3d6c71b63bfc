use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::fit::{fit_power_law, PowerLawFit};
use crate::zeno::engine::{InitialState, ZenoRunConfig, ZenoSession};

#[derive(Clone, Debug, Serialize)]
pub struct ConvergencePoint {
    pub n: usize,
    pub tau: f64,
    /// |<Psi_ref(t), V_N psi0>|
    pub fidelity: f64,
    /// ||V_N psi0 - Psi_ref(t)||
    pub residual: f64,
    pub norm: f64,
    /// arg <psi0, V_N psi0>
    pub phase: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceReport {
    pub points: Vec<ConvergencePoint>,
    /// Residual against N.
    pub residual_fit: Option<PowerLawFit>,
    /// 1 - norm against N.
    pub norm_loss_fit: Option<PowerLawFit>,
    pub projection_deficit: f64,
    pub reference_modes_used: usize,
    /// -E t / hbar wrapped to (-pi, pi] when psi0 is an eigenmode.
    pub expected_phase: Option<f64>,
}

pub fn wrap_phase(x: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut y = x % two_pi;
    if y > std::f64::consts::PI {
        y -= two_pi;
    } else if y <= -std::f64::consts::PI {
        y += two_pi;
    }
    y
}

pub fn convergence_experiment(config: &ZenoRunConfig) -> Result<ConvergenceReport> {
    let session = ZenoSession::new(config.clone())?;
    report_for(&session)
}

pub fn report_for(session: &ZenoSession) -> Result<ConvergenceReport> {
    let config = &session.config;
    let t = config.total_time;
    let reference = session.reference_state(t);
    let mut ladder = config.n_ladder.clone();
    ladder.sort_unstable();
    ladder.dedup();
    // ladder entries are independent; results come back in ladder order
    let points = ladder
        .par_iter()
        .map(|&n| {
            let tr = session.evolve(n)?;
            let fidelity = reference.inner(&tr.psi)?.norm();
            let residual = tr.psi.distance(&reference)?;
            let phase = session.psi0.inner(&tr.psi)?.arg();
            let norm = *tr.step_norms.last().expect("n >= 1");
            Ok(ConvergencePoint { n, tau: tr.tau, fidelity, residual, norm, phase })
        })
        .collect::<Result<Vec<_>>>()?;
    let ns: Vec<f64> = points.iter().map(|p| p.n as f64).collect();
    let res: Vec<f64> = points.iter().map(|p| p.residual).collect();
    let loss: Vec<f64> = points.iter().map(|p| 1.0 - p.norm).collect();
    let expected_phase = match &config.initial {
        InitialState::Mode(label) => session
            .basis
            .find(label)
            .map(|e| wrap_phase(-e.energy * t / config.units.hbar)),
        InitialState::Ground => session.basis.entries.first().map(|e| wrap_phase(-e.energy * t / config.units.hbar)),
        InitialState::Field(_) => None,
    };
    Ok(ConvergenceReport {
        residual_fit: fit_power_law(&ns, &res).ok(),
        norm_loss_fit: fit_power_law(&ns, &loss).ok(),
        points,
        projection_deficit: session.projection_deficit,
        reference_modes_used: session.coefficients.len(),
        expected_phase,
    })
}
