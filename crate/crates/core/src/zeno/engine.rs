use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::domain::{characteristic_mask, Domain, Mask};
use crate::error::{Result, ZenoError};
use crate::grid::{Grid, PhysicalUnits};
use crate::propagator::SpectralPropagator;
use crate::spectra::basis::{QuantumNumberLabel, SpectralBasis};
use crate::spectra::{annulus_modes, fd_dirichlet_eigs, interval_modes, rectangle_modes};
use crate::wavefunction::WaveFunction;

/// P U(tau) P psi.
pub fn zeno_step(psi: &WaveFunction, tau: f64, mask: &Mask, prop: &SpectralPropagator) -> Result<WaveFunction> {
    prop.grid().check_same(psi.grid())?;
    prop.grid().check_same(mask.grid())?;
    prop.check_guard(tau)?;
    let mut out = psi.clone();
    out.project(mask)?;
    let table = prop.phases(tau);
    prop.apply_projected(out.amps_mut(), &table, mask);
    Ok(out)
}

/// Squared norms below this count as zero.
const NORM_FLOOR: f64 = 1e-200;

/// (P U(tau) P)^n psi, returning the final field and the norm after every step.
pub fn zeno_product(
    psi: &WaveFunction,
    tau: f64,
    n: usize,
    mask: &Mask,
    prop: &SpectralPropagator,
) -> Result<(WaveFunction, Vec<f64>)> {
    prop.grid().check_same(psi.grid())?;
    prop.grid().check_same(mask.grid())?;
    prop.check_guard(tau)?;
    let vol = prop.grid().cell_volume();
    let mut out = psi.clone();
    out.project(mask)?;
    let table = prop.phases(tau);
    let mut norms = Vec::with_capacity(n);
    for step in 1..=n {
        prop.apply_projected(out.amps_mut(), &table, mask);
        let s: f64 = out.amps().iter().map(|z| z.norm_sqr()).sum::<f64>() * vol;
        if !s.is_finite() {
            return Err(ZenoError::NumericalFailure { step, reason: "norm is not finite".into() });
        }
        if s < NORM_FLOOR {
            // fully drained; stop before the field turns subnormal
            out.amps_mut().iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
            norms.push(0.0);
            norms.resize(n, 0.0);
            break;
        }
        norms.push(s.sqrt());
    }
    Ok((out, norms))
}

#[derive(Clone, Debug)]
pub enum InitialState {
    /// Lowest mode of the reference basis.
    Ground,
    /// An eigenmode of the reference basis.
    Mode(QuantumNumberLabel),
    /// An arbitrary field on the run grid.
    Field(WaveFunction),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceSource {
    Analytic,
    FdOracle,
}

#[derive(Clone, Debug)]
pub struct ZenoRunConfig {
    pub domain: Domain,
    pub units: PhysicalUnits,
    pub total_time: f64,
    pub n_ladder: Vec<usize>,
    /// Cells across each side of the domain's bounding box.
    pub cells: usize,
    pub initial: InitialState,
    pub reference: ReferenceSource,
    /// Number of reference modes to build.
    pub reference_modes: usize,
}

impl ZenoRunConfig {
    pub fn validate(&self) -> Result<()> {
        self.domain.validate()?;
        self.units.validate()?;
        if !(self.total_time.is_finite() && self.total_time > 0.0) {
            return Err(ZenoError::invalid("total_time", "must be positive"));
        }
        if self.n_ladder.is_empty() || self.n_ladder.contains(&0) {
            return Err(ZenoError::invalid("n_ladder", "needs at least one entry, all >= 1"));
        }
        if self.cells < 4 {
            return Err(ZenoError::invalid("cells", "need at least four cells"));
        }
        if self.reference_modes == 0 {
            return Err(ZenoError::invalid("reference_modes", "must be at least 1"));
        }
        Ok(())
    }

    pub fn tau_max(&self) -> f64 {
        self.total_time / *self.n_ladder.iter().min().expect("validated ladder") as f64
    }
}

/// Reference Dirichlet basis for a domain on a given grid.
pub fn build_reference_basis(
    domain: &Domain,
    grid: &Grid,
    source: ReferenceSource,
    modes: usize,
    units: PhysicalUnits,
) -> Result<SpectralBasis> {
    match (source, domain) {
        (ReferenceSource::Analytic, Domain::Interval { x0, x1 }) => {
            interval_modes(*x0, *x1, modes as u32, grid, units)
        }
        (ReferenceSource::Analytic, Domain::Rectangle { a, b }) => {
            let side = (modes as f64).sqrt().ceil() as u32;
            rectangle_modes(*a, *b, side, side, grid, units)
        }
        (ReferenceSource::Analytic, Domain::Annulus { r1, r2 }) => {
            let side = ((modes as f64) / 2.0).sqrt().ceil() as u32;
            annulus_modes(*r1, *r2, side, side, grid, units)
        }
        (ReferenceSource::Analytic, _) => Err(ZenoError::invalid(
            "reference",
            "no analytic Cartesian basis for this domain; use the fd oracle",
        )),
        (ReferenceSource::FdOracle, _) => fd_dirichlet_eigs(domain, grid, modes, units),
    }
}

#[derive(Clone, Debug)]
pub struct ZenoTrajectory {
    pub n: usize,
    pub tau: f64,
    pub psi: WaveFunction,
    pub step_norms: Vec<f64>,
}

/// Everything a Zeno run needs, built once and reused across the N ladder.
pub struct ZenoSession {
    pub config: ZenoRunConfig,
    pub propagator: SpectralPropagator,
    pub mask: Mask,
    pub psi0: WaveFunction,
    pub basis: SpectralBasis,
    /// (index into basis, <Psi_n, psi0>) for the retained modes.
    pub coefficients: Vec<(usize, Complex64)>,
    pub projection_deficit: f64,
}

/// Modes are kept until the initial state is captured to this deficit.
pub const DEFICIT_TARGET: f64 = 1e-6;
/// Larger deficits mean the reference basis is unusable.
pub const DEFICIT_LIMIT: f64 = 1e-3;

impl ZenoSession {
    pub fn new(config: ZenoRunConfig) -> Result<Self> {
        config.validate()?;
        let propagator = SpectralPropagator::for_domain(&config.domain, config.cells, config.tau_max(), config.units)?;
        let grid = propagator.grid().clone();
        let mask = characteristic_mask(&config.domain, &grid)?;
        let basis = build_reference_basis(&config.domain, &grid, config.reference, config.reference_modes, config.units)?;
        let psi0 = match &config.initial {
            InitialState::Ground => {
                let e = basis.entries.first().ok_or_else(|| ZenoError::invalid("initial", "empty reference basis"))?;
                (*e.field).clone()
            }
            InitialState::Mode(label) => {
                let e = basis.find(label).ok_or_else(|| {
                    ZenoError::invalid("initial", format!("mode {} not in the reference basis", label.describe()))
                })?;
                (*e.field).clone()
            }
            InitialState::Field(f) => {
                grid.check_same(f.grid())?;
                let mut f = f.clone();
                f.project(&mask)?;
                f.normalized()?
            }
        };
        let total = psi0.norm_sqr();
        let mut captured = 0.0;
        let mut coefficients = Vec::new();
        for (i, e) in basis.entries.iter().enumerate() {
            let c = e.field.inner(&psi0)?;
            captured += c.norm_sqr();
            coefficients.push((i, c));
            if 1.0 - captured / total < DEFICIT_TARGET {
                break;
            }
        }
        let projection_deficit = (1.0 - captured / total).max(0.0);
        if projection_deficit > DEFICIT_LIMIT {
            return Err(ZenoError::BasisTooSmall {
                deficit: projection_deficit,
                limit: DEFICIT_LIMIT,
                suggested: 2 * basis.len(),
            });
        }
        Ok(ZenoSession { config, propagator, mask, psi0, basis, coefficients, projection_deficit })
    }

    pub fn evolve(&self, n: usize) -> Result<ZenoTrajectory> {
        if n == 0 {
            return Err(ZenoError::invalid("n", "must be at least 1"));
        }
        let tau = self.config.total_time / n as f64;
        let (psi, step_norms) = zeno_product(&self.psi0, tau, n, &self.mask, &self.propagator)?;
        Ok(ZenoTrajectory { n, tau, psi, step_norms })
    }

    /// Dirichlet evolution of psi0 to `t` through the retained modes.
    pub fn reference_state(&self, t: f64) -> WaveFunction {
        let mut out = WaveFunction::zeros(self.propagator.grid());
        let hbar = self.config.units.hbar;
        for &(i, c) in &self.coefficients {
            let e = &self.basis.entries[i];
            let ph = Complex64::from_polar(1.0, -e.energy * t / hbar);
            out.axpy(c * ph, &e.field).expect("same grid");
        }
        out
    }
}

pub fn zeno_evolve(config: &ZenoRunConfig, n: usize) -> Result<ZenoTrajectory> {
    ZenoSession::new(config.clone())?.evolve(n)
}
