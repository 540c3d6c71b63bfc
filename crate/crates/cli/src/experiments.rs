//! One function per experiment kind: config in, payload and tables out.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use zeno_core::algebra::{
    angular_commutator_defect, associativity_defect, homomorphism_check, operator_norm, smoothed_projector_errors,
    BasisDescriptor, OperatorMatrix, PolarGrid,
};
use zeno_core::fit::{fit_power_law, PowerLawFit};
use zeno_core::reduction::reduce;
use zeno_core::spectra::rectangle::interval_energy;
use zeno_core::spectra::{
    annulus_spectrum, fd_dirichlet_eigs, rectangle_energy, shell_spectrum, QuantumNumberLabel, SpectralBasis,
};
use zeno_core::zeno::convergence::report_for;
use zeno_core::zeno::{
    build_reference_basis, leakage, matrix_elements, operator_leakage_norm, InitialState, ZenoRunConfig, ZenoSession,
};
use zeno_core::{characteristic_mask, Axis, Complex64, Domain, Grid, SpectralPropagator, ZenoError};

use crate::config::{
    AlgebraParams, ExperimentConfig, LeakageParams, Params, ReduceParams, ShortTimeParams, SpectrumParams,
    SpectrumSourceSpec, ZenoRunParams,
};
use crate::output::{Artifact, Cell, Table};
use crate::Failure;

/// Projection deficit above which a run is flagged.
const DEFICIT_FLAG: f64 = 1e-6;

pub fn run(cfg: &ExperimentConfig, base: &Path) -> Result<Artifact, Failure> {
    let domain = match &cfg.domain {
        Some(d) => Some(d.to_domain(base)?),
        None => None,
    };
    let domain = domain.as_ref();
    let art = match &cfg.params {
        Params::Spectrum(p) => spectrum(cfg, domain.expect("validated"), p)?,
        Params::ZenoRun(p) => zeno_run(cfg, domain.expect("validated"), p)?,
        Params::ShortTime(p) => short_time(cfg, domain.expect("validated"), p)?,
        Params::Leakage(p) => leakage_run(cfg, domain.expect("validated"), p)?,
        Params::Reduce(p) => reduction(cfg, p)?,
        Params::AlgebraCheck(p) => algebra(cfg, p)?,
    };
    Ok(art)
}

/// Grid for the finite-difference oracle: the raster itself, or the bounding
/// box split into `cells` cells per axis.
fn fd_grid(domain: &Domain, cells: usize) -> Result<Grid, ZenoError> {
    if let Domain::Mask(m) = domain {
        return Ok(m.grid.clone());
    }
    let axes = domain
        .bounding_box()
        .into_iter()
        .map(|(lo, hi)| Axis::node_aligned(lo, hi, cells, 0.0))
        .collect::<Result<Vec<_>, _>>()?;
    Grid::new(axes)
}

fn spectrum(cfg: &ExperimentConfig, domain: &Domain, p: &SpectrumParams) -> Result<Artifact, Failure> {
    let u = cfg.units();
    let mut art = Artifact::default();
    if p.source == SpectrumSourceSpec::Fd {
        let grid = fd_grid(domain, cfg.grid.cells)?;
        let basis = fd_dirichlet_eigs(domain, &grid, p.count, u)?;
        let mut t = Table::new("spectrum", &["index", "angular", "energy"]);
        let mut levels = Vec::new();
        for e in &basis.entries {
            let (index, angular) = match e.label {
                QuantumNumberLabel::Fd { index, angular } => (index, angular),
                _ => unreachable!("fd basis carries fd labels"),
            };
            t.push(vec![index.into(), angular.into(), e.energy.into()]);
            levels.push(json!({ "label": e.label, "energy": e.energy }));
        }
        art.payload = json!({ "source": "fd", "grid_points": grid.len(), "levels": levels });
        art.tables.push(t);
        return Ok(art);
    }
    // (sort key, row, json)
    let mut rows: Vec<(f64, Vec<Cell>, Value)> = Vec::new();
    let columns: &[&'static str] = match domain {
        Domain::Interval { x0, x1 } => {
            for n in 1..=p.n_max {
                let e = interval_energy(x1 - x0, n, u);
                rows.push((e, vec![n.into(), e.into()], json!({ "n": n, "energy": e })));
            }
            &["n", "energy"]
        }
        Domain::Rectangle { a, b } => {
            for n in 1..=p.n_max {
                for m in 1..=p.m_max {
                    let e = rectangle_energy(*a, *b, n, m, u);
                    rows.push((e, vec![n.into(), m.into(), e.into()], json!({ "n": n, "m": m, "energy": e })));
                }
            }
            &["n", "m", "energy"]
        }
        Domain::Annulus { r1, r2 } => {
            for mode in annulus_spectrum(*r1, *r2, p.l_max, p.n_max, u)? {
                let l = mode.order as u32;
                rows.push((
                    mode.energy,
                    vec![l.into(), mode.n.into(), mode.k.into(), mode.energy.into()],
                    json!({ "l": l, "n": mode.n, "k": mode.k, "energy": mode.energy }),
                ));
            }
            &["l", "n", "k", "energy"]
        }
        Domain::Shell { r1, r2 } => {
            for mode in shell_spectrum(*r1, *r2, p.l_max, p.n_max, u)? {
                let l = mode.order as u32;
                rows.push((
                    mode.energy,
                    vec![l.into(), mode.n.into(), (2 * l + 1).into(), mode.k.into(), mode.energy.into()],
                    json!({ "l": l, "n": mode.n, "degeneracy": 2 * l + 1, "k": mode.k, "energy": mode.energy }),
                ));
            }
            &["l", "n", "degeneracy", "k", "energy"]
        }
        Domain::Mask(_) => unreachable!("rejected during validation"),
    };
    // stable sort keeps the generation order among exact ties
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut t = Table::new("spectrum", columns);
    let mut levels = Vec::new();
    for (_, row, v) in rows {
        t.push(row);
        levels.push(v);
    }
    art.payload = json!({ "source": "analytic", "levels": levels });
    art.tables.push(t);
    Ok(art)
}

fn fit_json(fit: &Option<PowerLawFit>) -> Value {
    serde_json::to_value(fit).expect("fit serialises")
}

fn fit_row(t: &mut Table, name: String, fit: Option<&PowerLawFit>) {
    match fit {
        Some(f) => t.push(vec![
            name.into(),
            f.exponent.into(),
            f.prefactor.into(),
            f.r2.into(),
            f.points.into(),
            f.accepted.into(),
        ]),
        None => t.push(vec![name.into(), Cell::Empty, Cell::Empty, Cell::Empty, Cell::Empty, false.into()]),
    }
}

const FIT_COLUMNS: &[&str] = &["quantity", "exponent", "prefactor", "r2", "points", "accepted"];

fn zeno_run(cfg: &ExperimentConfig, domain: &Domain, p: &ZenoRunParams) -> Result<Artifact, Failure> {
    let config = ZenoRunConfig {
        domain: domain.clone(),
        units: cfg.units(),
        total_time: p.t,
        n_ladder: p.n_ladder.clone(),
        cells: cfg.grid.cells,
        initial: p.initial.clone().map(InitialState::Mode).unwrap_or(InitialState::Ground),
        reference: p.reference,
        reference_modes: p.reference_modes,
    };
    let session = ZenoSession::new(config)?;
    let report = report_for(&session)?;
    let mut art = Artifact::default();
    let mut t = Table::new("convergence", &["n", "tau", "fidelity", "residual", "norm", "phase"]);
    let mut points = report.points.clone();
    points.sort_by_key(|q| q.n);
    for q in &points {
        t.push(vec![q.n.into(), q.tau.into(), q.fidelity.into(), q.residual.into(), q.norm.into(), q.phase.into()]);
    }
    let mut fits = Table::new("fits", FIT_COLUMNS);
    fit_row(&mut fits, "residual".into(), report.residual_fit.as_ref());
    fit_row(&mut fits, "norm_loss".into(), report.norm_loss_fit.as_ref());
    if !report.residual_fit.is_some_and(|f| f.accepted) {
        art.flags.push("residual_fit_rejected".into());
    }
    if report.projection_deficit > DEFICIT_FLAG {
        art.flags.push(format!("projection_deficit {:.3e}", report.projection_deficit));
    }
    if points.windows(2).any(|w| w[1].residual >= w[0].residual) {
        art.flags.push("residual_not_monotone".into());
    }
    let initial = match &p.initial {
        Some(label) => session.basis.find(label),
        None => session.basis.entries.first(),
    };
    art.payload = json!({
        "initial": initial.map(|e| e.label.clone()),
        "initial_energy": initial.map(|e| e.energy),
        "grid_points": session.propagator.grid().len(),
        "report": report,
        "residual_fit": fit_json(&report.residual_fit),
    });
    art.counters = Some(session.propagator.counters());
    art.tables.push(t);
    art.tables.push(fits);
    Ok(art)
}

/// Lowest `count` entries of `basis`.
fn truncate(basis: SpectralBasis, count: usize) -> Result<SpectralBasis, ZenoError> {
    if basis.len() <= count {
        return Ok(basis);
    }
    let entries = basis.entries[..count].to_vec();
    SpectralBasis::new(basis.domain, basis.source, basis.representation, basis.grid, entries)
}

fn short_time(cfg: &ExperimentConfig, domain: &Domain, p: &ShortTimeParams) -> Result<Artifact, Failure> {
    let u = cfg.units();
    let taus = p.taus.values();
    let tau_max = taus.iter().cloned().fold(0.0, f64::max);
    let prop = SpectralPropagator::for_domain(domain, cfg.grid.cells, tau_max, u)?;
    let mask = characteristic_mask(domain, prop.grid())?;
    let basis = truncate(build_reference_basis(domain, prop.grid(), p.reference, p.modes, u)?, p.modes)?;
    let table = matrix_elements(&basis, &taus, &mask, &prop)?;
    let mut g = Table::new(
        "matrix_elements",
        &["tau", "m", "n", "m_label", "n_label", "g_re", "g_im", "remainder_re", "remainder_im", "remainder_abs"],
    );
    for (ti, &tau) in table.taus.iter().enumerate() {
        for m in 0..table.labels.len() {
            for n in 0..table.labels.len() {
                let z = table.g[ti][m][n];
                let r = table.remainder(ti, m, n);
                g.push(vec![
                    tau.into(),
                    m.into(),
                    n.into(),
                    table.labels[m].describe().into(),
                    table.labels[n].describe().into(),
                    z.re.into(),
                    z.im.into(),
                    r.re.into(),
                    r.im.into(),
                    r.norm().into(),
                ]);
            }
        }
    }
    let mut fits = Table::new("remainder_fits", FIT_COLUMNS);
    let mut fit_values = Vec::new();
    let mut flags = Vec::new();
    for m in 0..table.labels.len() {
        for n in 0..table.labels.len() {
            let name = format!("R[{}][{}]", table.labels[m].describe(), table.labels[n].describe());
            let fit = table.fit_remainder(m, n).ok();
            fit_row(&mut fits, name.clone(), fit.as_ref());
            if fit.is_none() {
                flags.push(format!("no_fit {name}"));
            }
            fit_values.push(json!({ "m": m, "n": n, "quantity": name, "fit": fit }));
        }
    }
    let mut art = Artifact { flags, ..Artifact::default() };
    art.payload = json!({
        "labels": table.labels,
        "energies": table.energies,
        "taus": table.taus,
        "gram_deviation": basis.gram_deviation(),
        "fits": fit_values,
    });
    art.counters = Some(prop.counters());
    art.tables.push(g);
    art.tables.push(fits);
    Ok(art)
}

fn leakage_run(cfg: &ExperimentConfig, domain: &Domain, p: &LeakageParams) -> Result<Artifact, Failure> {
    let u = cfg.units();
    let taus = p.taus.values();
    let tau_max = taus.iter().cloned().fold(0.0, f64::max);
    let prop = SpectralPropagator::for_domain(domain, cfg.grid.cells, tau_max, u)?;
    let mask = characteristic_mask(domain, prop.grid())?;
    let basis = build_reference_basis(domain, prop.grid(), p.reference, p.reference_modes, u)?;
    let entry = match &p.state {
        Some(label) => basis.find(label).ok_or_else(|| {
            Failure::from(crate::config::ConfigError::new(
                "params.state",
                format!("mode {} not in the reference basis", label.describe()),
            ))
        })?,
        None => basis.entries.first().ok_or_else(|| ZenoError::invalid("state", "empty reference basis"))?,
    };
    let values = taus
        .par_iter()
        .map(|&tau| {
            let l = leakage(&entry.field, tau, &mask, &prop)?;
            let op = if p.operator_norm { Some(operator_leakage_norm(&prop, &mask, tau)?) } else { None };
            Ok((tau, l, op))
        })
        .collect::<Result<Vec<_>, ZenoError>>()?;
    let mut t = Table::new("leakage", &["tau", "leakage", "operator_norm"]);
    for &(tau, l, op) in &values {
        t.push(vec![tau.into(), l.into(), op.into()]);
    }
    let xs: Vec<f64> = values.iter().map(|v| v.0).collect();
    let ys: Vec<f64> = values.iter().map(|v| v.1).collect();
    let fit = fit_power_law(&xs, &ys).ok();
    let op_fit = if p.operator_norm {
        let ys: Vec<f64> = values.iter().map(|v| v.2.unwrap_or(f64::NAN)).collect();
        fit_power_law(&xs, &ys).ok()
    } else {
        None
    };
    let mut fits = Table::new("fits", FIT_COLUMNS);
    fit_row(&mut fits, "leakage".into(), fit.as_ref());
    if p.operator_norm {
        fit_row(&mut fits, "operator_norm".into(), op_fit.as_ref());
    }
    let mut art = Artifact::default();
    if !fit.is_some_and(|f| f.accepted) {
        art.flags.push("leakage_fit_rejected".into());
    }
    art.payload = json!({
        "state": entry.label,
        "energy": entry.energy,
        "points": values.iter().map(|v| json!({ "tau": v.0, "leakage": v.1, "operator_norm": v.2 })).collect::<Vec<_>>(),
        "leakage_fit": fit_json(&fit),
        "operator_norm_fit": fit_json(&op_fit),
    });
    art.counters = Some(prop.counters());
    art.tables.push(t);
    art.tables.push(fits);
    Ok(art)
}

fn reduction(cfg: &ExperimentConfig, p: &ReduceParams) -> Result<Artifact, Failure> {
    let plan = cfg.reduction_plan(p);
    let result = reduce(&plan)?;
    let family = match &plan.family {
        zeno_core::reduction::ReductionFamily::RectangleToInterval { .. } => "rectangle_to_interval",
        zeno_core::reduction::ReductionFamily::AnnulusToCircle { .. } => "annulus_to_circle",
        zeno_core::reduction::ReductionFamily::ShellToSphere { .. } => "shell_to_sphere",
    };
    let mut points = Table::new(
        "reduction_points",
        &["family", "width", "steps", "dt", "guard_ratio", "divergent_energy", "label", "regularized_energy"],
    );
    let mut diag = Table::new("transverse_diagnostics", &["width", "steps", "guard_ratio", "final_norm", "cross_sector"]);
    for q in &result.points {
        for (label, e) in &q.regularized {
            points.push(vec![
                family.into(),
                q.width.into(),
                q.steps.into(),
                q.dt.into(),
                q.guard_ratio.into(),
                q.divergent_energy.into(),
                label.describe().into(),
                (*e).into(),
            ]);
        }
        if let Some(d) = &q.diagnostics {
            diag.push(vec![d.width.into(), d.steps.into(), d.guard_ratio.into(), d.final_norm.into(), d.cross_sector.into()]);
        }
    }
    let mut levels = Table::new(
        "extrapolation",
        &["family", "label", "c0", "c1", "c2", "rms_residual", "uncertainty", "limit", "reduced", "deviation"],
    );
    for l in &result.levels {
        let c = |i: usize| Cell::from(l.fit.coefficients.get(i).copied());
        levels.push(vec![
            family.into(),
            l.label.describe().into(),
            c(0),
            c(1),
            c(2),
            l.fit.rms_residual.into(),
            l.fit.uncertainty.into(),
            l.limit.into(),
            l.reduced.into(),
            (l.limit - l.reduced).into(),
        ]);
    }
    let mut art = Artifact::default();
    if let Some(o) = &result.offset {
        let mut t = Table::new("offset", &["family", "value", "expected", "uncertainty"]);
        t.push(vec![family.into(), o.value.into(), o.expected.into(), o.uncertainty.into()]);
        art.tables.push(t);
        if (o.value - o.expected).abs() > 3.0 * o.uncertainty.max(1e-12) {
            art.flags.push("offset_outside_three_sigma".into());
        }
    }
    if !result.gaps.is_empty() {
        let mut t = Table::new("sector_gaps", &["width", "m", "m_next", "gap", "expected"]);
        for g in &result.gaps {
            t.push(vec![g.width.into(), g.m.into(), g.m_next.into(), g.gap.into(), g.expected.into()]);
        }
        art.tables.push(t);
    }
    if result.points.iter().any(|q| q.guard_ratio > plan.guard_ratio) {
        art.flags.push("guard_ratio_exceeded".into());
    }
    art.payload = serde_json::to_value(&result).expect("result serialises");
    art.tables.insert(0, points);
    art.tables.insert(1, levels);
    if !diag.rows.is_empty() {
        art.tables.push(diag);
    }
    Ok(art)
}

fn random_operator(rng: &mut ChaCha8Rng, n: usize) -> OperatorMatrix {
    let m = DMatrix::from_fn(n, n, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    OperatorMatrix::new(m, BasisDescriptor::Abstract, false).expect("finite entries")
}

/// Spectral momentum on a periodic line of `n` points and length 2 pi.
fn momentum(n: usize) -> DMatrix<Complex64> {
    let h = 2.0 * PI / n as f64;
    DMatrix::from_fn(n, n, |j, l| {
        let mut s = Complex64::new(0.0, 0.0);
        for q in 0..n {
            // the Nyquist mode is dropped to keep the matrix Hermitian
            let k = if q == n / 2 {
                0.0
            } else if q < n / 2 {
                q as f64
            } else {
                q as f64 - n as f64
            };
            s += Complex64::from_polar(k / n as f64, k * (j as f64 - l as f64) * h);
        }
        s
    })
}

fn algebra(cfg: &ExperimentConfig, p: &AlgebraParams) -> Result<Artifact, Failure> {
    let n = p.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    // draw everything up front so results do not depend on the thread count
    let cases: Vec<_> = (0..p.trials)
        .map(|_| {
            let bits: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
            let a = random_operator(&mut rng, n);
            let b = random_operator(&mut rng, n);
            let c = random_operator(&mut rng, n);
            (OperatorMatrix::projector(&bits, BasisDescriptor::Abstract), a, b, c)
        })
        .collect();
    let per_case = cases
        .par_iter()
        .map(|(proj, a, b, c)| {
            let h = homomorphism_check(a, b, proj)?;
            Ok((associativity_defect(a, b, c, proj)?, h.star_relative, h.plain_relative))
        })
        .collect::<Result<Vec<_>, ZenoError>>()?;
    let max = |f: fn(&(f64, f64, f64)) -> f64| per_case.iter().map(f).fold(0.0, f64::max);
    let assoc = max(|c| c.0);
    let star = max(|c| c.1);
    let plain_mean = per_case.iter().map(|c| c.2).sum::<f64>() / per_case.len().max(1) as f64;

    // documented pair: momentum with itself against the middle-half projector
    let mom = OperatorMatrix::new(momentum(n), BasisDescriptor::Abstract, true)?;
    let middle: Vec<bool> = (0..n).map(|i| (n / 4..3 * n / 4).contains(&i)).collect();
    let proj = OperatorMatrix::projector(&middle, BasisDescriptor::Abstract);
    let pp = homomorphism_check(&mom, &mom, &proj)?;
    let scale = operator_norm(&(&proj.data * &mom.data * &mom.data * &proj.data));

    let polar = PolarGrid { r_max: 1.5 * p.radii[1], r_points: 96, theta_points: 64 };
    let angular = angular_commutator_defect(p.radii[0], p.radii[1], p.angular_time, polar, cfg.units())?;

    let domain = Domain::Interval { x0: 0.0, x1: 1.0 };
    let grid = Grid::line(Axis::node_aligned(0.0, 1.0, p.projector_cells, 0.25)?);
    // Gaussian centred on the right wall, nonzero at the boundary
    let psi: Vec<Complex64> =
        (0..grid.len()).map(|i| Complex64::new((-(grid.point(i)[0] - 1.0).powi(2) / 0.08).exp(), 0.0)).collect();
    let (errors, fit) = smoothed_projector_errors(&domain, &grid, &psi, &p.projector_ladder, p.profile, p.schedule)?;

    let mut defects = Table::new("algebra_defects", &["check", "value"]);
    for (name, v) in [
        ("associativity_max", assoc),
        ("star_homomorphism_max_relative", star),
        ("plain_homomorphism_mean_relative", plain_mean),
        ("momentum_plain_defect", pp.plain),
        ("momentum_plain_defect_relative", pp.plain / scale),
        ("momentum_star_defect", pp.star),
        ("angular_commutator", angular),
    ] {
        defects.push(vec![name.into(), v.into()]);
    }
    let mut proj_t = Table::new("smoothed_projector", &["n", "width", "error"]);
    for &(k, e) in &errors {
        proj_t.push(vec![k.into(), p.schedule.width(k).into(), e.into()]);
    }
    let mut fits = Table::new("fits", FIT_COLUMNS);
    fit_row(&mut fits, "smoothed_projector_error".into(), fit.as_ref());
    let mut art = Artifact::default();
    if !fit.is_some_and(|f| f.accepted) {
        art.flags.push("projector_fit_rejected".into());
    }
    art.payload = json!({
        "trials": p.trials,
        "dim": n,
        "associativity_max": assoc,
        "star_homomorphism_max_relative": star,
        "plain_homomorphism_mean_relative": plain_mean,
        "momentum_pair": pp,
        "momentum_plain_relative": pp.plain / scale,
        "angular_commutator": angular,
        "smoothed_projector": errors.iter().map(|&(k, e)| json!({ "n": k, "error": e })).collect::<Vec<_>>(),
        "smoothed_projector_fit": fit_json(&fit),
    });
    art.tables.push(defects);
    art.tables.push(proj_t);
    art.tables.push(fits);
    Ok(art)
}
