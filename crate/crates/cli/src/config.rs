//! Experiment configuration: one JSON document, validated before any compute.
//!
//! ```json
//! {
//!   "kind": "zeno-run",
//!   "domain": { "type": "rectangle", "a": 3.14159, "b": 3.14159 },
//!   "grid": { "cells": 256 },
//!   "units": { "hbar": 1.0, "mass": 1.0 },
//!   "params": { "t": 1.0, "n_ladder": [1, 2, 4, 8] },
//!   "output_dir": "out",
//!   "seed": 7
//! }
//! ```
//!
//! Unknown keys are rejected at every level. `params` depends on `kind`; see
//! the `*Params` types below for the accepted fields and their defaults.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use zeno_core::algebra::{RampProfile, WidthSchedule};
use zeno_core::pgm::Pgm;
use zeno_core::reduction::{DiagnosticSettings, ReductionFamily, ReductionPlan, GUARD_RATIO};
use zeno_core::spectra::QuantumNumberLabel;
use zeno_core::zeno::ReferenceSource;
use zeno_core::{Domain, PhysicalUnits, ZenoError};

pub const CONFIG_SCHEMA: &str = "zeno.experiment/1";

/// A configuration problem, located by a JSON path such as `domain.r1`.
#[derive(Debug)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError { path: path.into(), message: message.into() }
    }

    /// RFC 6901 pointer for `path`.
    pub fn pointer(&self) -> String {
        if self.path.is_empty() || self.path == "." {
            return String::new();
        }
        let mut out = String::new();
        for part in self.path.split('.') {
            // serde_path_to_error writes sequence indices as `name[3]`
            let mut rest = part;
            while let Some(open) = rest.find('[') {
                let (head, tail) = rest.split_at(open);
                if !head.is_empty() {
                    out.push('/');
                    out.push_str(&head.replace('~', "~0").replace('/', "~1"));
                }
                let close = tail.find(']').unwrap_or(tail.len());
                out.push('/');
                out.push_str(&tail[1..close]);
                rest = &tail[(close + 1).min(tail.len())..];
            }
            if !rest.is_empty() {
                out.push('/');
                out.push_str(&rest.replace('~', "~0").replace('/', "~1"));
            }
        }
        out
    }
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.path.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Spectrum,
    ZenoRun,
    ShortTime,
    Leakage,
    Reduce,
    AlgebraCheck,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Spectrum => "spectrum",
            Kind::ZenoRun => "zeno-run",
            Kind::ShortTime => "short-time",
            Kind::Leakage => "leakage",
            Kind::Reduce => "reduce",
            Kind::AlgebraCheck => "algebra-check",
        }
    }
}

/// Domain as written in a config. Raster masks are read from a PGM file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainSpec {
    Interval { x0: f64, x1: f64 },
    Rectangle { a: f64, b: f64 },
    Annulus { r1: f64, r2: f64 },
    Shell { r1: f64, r2: f64 },
    Mask { path: PathBuf, origin: [f64; 2], spacing: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Cells across each side of the domain's bounding box.
    #[serde(default = "default_cells")]
    pub cells: usize,
}

fn default_cells() -> usize {
    128
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { cells: default_cells() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitsSpec {
    #[serde(default = "one")]
    pub hbar: f64,
    #[serde(default = "one")]
    pub mass: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for UnitsSpec {
    fn default() -> Self {
        UnitsSpec { hbar: 1.0, mass: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    schema: Option<String>,
    kind: Kind,
    #[serde(default)]
    domain: Option<DomainSpec>,
    #[serde(default)]
    grid: GridSpec,
    #[serde(default)]
    units: UnitsSpec,
    #[serde(default)]
    params: Option<Value>,
    #[serde(default)]
    output_dir: Option<PathBuf>,
    #[serde(default)]
    seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumSourceSpec {
    Analytic,
    Fd,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumParams {
    #[serde(default = "analytic")]
    pub source: SpectrumSourceSpec,
    /// Radial (or first-axis) quantum number bound.
    #[serde(default = "five")]
    pub n_max: u32,
    /// Second-axis bound for rectangles.
    #[serde(default = "five")]
    pub m_max: u32,
    /// Angular bound for annuli and shells.
    #[serde(default = "three")]
    pub l_max: u32,
    /// Number of finite-difference modes.
    #[serde(default = "ten")]
    pub count: usize,
}

fn analytic() -> SpectrumSourceSpec {
    SpectrumSourceSpec::Analytic
}
fn three() -> u32 {
    3
}
fn five() -> u32 {
    5
}
fn ten() -> usize {
    10
}

/// A geometric ladder `{min, max, count}` or an explicit list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Ladder {
    List(Vec<f64>),
    Geometric { min: f64, max: f64, count: usize },
}

impl Ladder {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Ladder::List(v) => v.clone(),
            Ladder::Geometric { min, max, count } => {
                if *count == 1 {
                    return vec![*min];
                }
                let (a, b) = (min.ln(), max.ln());
                (0..*count).map(|i| (a + (b - a) * i as f64 / (*count - 1) as f64).exp()).collect()
            }
        }
    }

    fn check(&self, path: &str) -> Result<(), ConfigError> {
        if let Ladder::Geometric { min, max, count } = self {
            if *count == 0 || !(*min > 0.0 && max >= min && max.is_finite()) {
                return Err(ConfigError::new(path, "geometric ladder needs 0 < min <= max and count >= 1"));
            }
        }
        let v = self.values();
        if v.is_empty() || v.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
            return Err(ConfigError::new(path, "ladder entries must be positive and finite"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZenoRunParams {
    pub t: f64,
    #[serde(default = "default_n_ladder")]
    pub n_ladder: Vec<usize>,
    /// Initial eigenmode; defaults to the ground state.
    #[serde(default)]
    pub initial: Option<QuantumNumberLabel>,
    #[serde(default = "analytic_ref")]
    pub reference: ReferenceSource,
    #[serde(default = "sixteen")]
    pub reference_modes: usize,
}

fn default_n_ladder() -> Vec<usize> {
    (0..=8).map(|k| 1 << k).collect()
}
fn analytic_ref() -> ReferenceSource {
    ReferenceSource::Analytic
}
fn sixteen() -> usize {
    16
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShortTimeParams {
    #[serde(default = "default_taus")]
    pub taus: Ladder,
    /// Number of lowest modes entering the table.
    #[serde(default = "four")]
    pub modes: usize,
    #[serde(default = "analytic_ref")]
    pub reference: ReferenceSource,
}

fn default_taus() -> Ladder {
    Ladder::Geometric { min: 1e-4, max: 1e-2, count: 9 }
}
fn four() -> usize {
    4
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeakageParams {
    #[serde(default = "default_taus")]
    pub taus: Ladder,
    /// Mode whose leakage is measured; defaults to the ground state.
    #[serde(default)]
    pub state: Option<QuantumNumberLabel>,
    #[serde(default = "analytic_ref")]
    pub reference: ReferenceSource,
    #[serde(default = "sixteen")]
    pub reference_modes: usize,
    /// Also compute the grid operator norm ||Q U P|| (slow on large grids).
    #[serde(default)]
    pub operator_norm: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReduceParams {
    pub family: ReductionFamily,
    pub ladder: Vec<f64>,
    pub t: f64,
    pub step_budget: u64,
    #[serde(default = "guard_ratio")]
    pub guard_ratio: f64,
    #[serde(default)]
    pub diagnostics: Option<DiagnosticSettings>,
}

fn guard_ratio() -> f64 {
    GUARD_RATIO
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgebraParams {
    #[serde(default = "sixty_four")]
    pub dim: usize,
    #[serde(default = "hundred")]
    pub trials: usize,
    /// Smoothed-projector ladder.
    #[serde(default = "default_projector_ladder")]
    pub projector_ladder: Vec<usize>,
    #[serde(default = "default_schedule")]
    pub schedule: WidthSchedule,
    #[serde(default = "linear")]
    pub profile: RampProfile,
    #[serde(default = "default_projector_cells")]
    pub projector_cells: usize,
    /// Annulus radii for the commuting angular check.
    #[serde(default = "default_radii")]
    pub radii: [f64; 2],
    #[serde(default = "default_angular_time")]
    pub angular_time: f64,
}

fn sixty_four() -> usize {
    64
}
fn hundred() -> usize {
    100
}
fn default_projector_ladder() -> Vec<usize> {
    (2..=8).map(|k| 1 << k).collect()
}
fn default_schedule() -> WidthSchedule {
    WidthSchedule::InverseNSquared { w0: 1.0 }
}
fn linear() -> RampProfile {
    RampProfile::Linear
}
fn default_projector_cells() -> usize {
    1 << 19
}
fn default_radii() -> [f64; 2] {
    [1.0, 2.0]
}
fn default_angular_time() -> f64 {
    0.3
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", content = "params", rename_all = "kebab-case")]
pub enum Params {
    Spectrum(SpectrumParams),
    ZenoRun(ZenoRunParams),
    ShortTime(ShortTimeParams),
    Leakage(LeakageParams),
    Reduce(ReduceParams),
    AlgebraCheck(AlgebraParams),
}

/// A parsed and validated configuration.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub schema: &'static str,
    pub kind: Kind,
    pub domain: Option<DomainSpec>,
    pub grid: GridSpec,
    pub units: UnitsSpec,
    pub params: Params,
    #[serde(skip)]
    pub output_dir: Option<PathBuf>,
    pub seed: u64,
}

fn parse_at<T: DeserializeOwned>(value: Value, prefix: &str) -> Result<T, ConfigError> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let inner = e.path().to_string();
        let path = match (prefix.is_empty(), inner == ".") {
            (true, _) => inner,
            (false, true) => prefix.to_string(),
            (false, false) => format!("{prefix}.{inner}"),
        };
        ConfigError::new(path, e.into_inner().to_string())
    })
}

fn positive(path: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(ConfigError::new(path, format!("must be positive, got {v}")))
    }
}

/// Map a core validation error onto a config path under `prefix`.
pub fn locate(err: ZenoError, prefix: &str) -> ConfigError {
    match err {
        ZenoError::InvalidParameter { field, reason } => ConfigError::new(format!("{prefix}.{field}"), reason),
        other => ConfigError::new(prefix, other.to_string()),
    }
}

impl DomainSpec {
    /// Core domain; PGM paths are resolved against `base`.
    pub fn to_domain(&self, base: &Path) -> Result<Domain, ConfigError> {
        let d = match self {
            DomainSpec::Interval { x0, x1 } => Domain::Interval { x0: *x0, x1: *x1 },
            DomainSpec::Rectangle { a, b } => Domain::Rectangle { a: *a, b: *b },
            DomainSpec::Annulus { r1, r2 } => Domain::Annulus { r1: *r1, r2: *r2 },
            DomainSpec::Shell { r1, r2 } => Domain::Shell { r1: *r1, r2: *r2 },
            DomainSpec::Mask { path, origin, spacing } => {
                positive("domain.spacing", *spacing)?;
                let full = if path.is_absolute() { path.clone() } else { base.join(path) };
                let bytes = std::fs::read(&full)
                    .map_err(|e| ConfigError::new("domain.path", format!("cannot read {}: {e}", full.display())))?;
                let pgm = Pgm::parse(&bytes).map_err(|e| ConfigError::new("domain.path", e.to_string()))?;
                Domain::Mask(pgm.to_mask(*origin, *spacing).map_err(|e| locate(e, "domain"))?)
            }
        };
        d.validate().map_err(|e| locate(e, "domain"))?;
        Ok(d)
    }
}

impl ExperimentConfig {
    /// Parse and validate a JSON document.
    pub fn from_value(value: Value) -> Result<Self, ConfigError> {
        let raw: RawConfig = parse_at(value, "")?;
        if let Some(s) = &raw.schema {
            if s != CONFIG_SCHEMA {
                return Err(ConfigError::new("schema", format!("expected {CONFIG_SCHEMA}, got {s}")));
            }
        }
        let params_value = raw.params.clone().unwrap_or_else(|| Value::Object(Default::default()));
        let params = match raw.kind {
            Kind::Spectrum => Params::Spectrum(parse_at(params_value, "params")?),
            Kind::ZenoRun => Params::ZenoRun(parse_at(params_value, "params")?),
            Kind::ShortTime => Params::ShortTime(parse_at(params_value, "params")?),
            Kind::Leakage => Params::Leakage(parse_at(params_value, "params")?),
            Kind::Reduce => Params::Reduce(parse_at(params_value, "params")?),
            Kind::AlgebraCheck => Params::AlgebraCheck(parse_at(params_value, "params")?),
        };
        let cfg = ExperimentConfig {
            schema: CONFIG_SCHEMA,
            kind: raw.kind,
            domain: raw.domain,
            grid: raw.grid,
            units: raw.units,
            params,
            output_dir: raw.output_dir,
            seed: raw.seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn units(&self) -> PhysicalUnits {
        PhysicalUnits { hbar: self.units.hbar, mass: self.units.mass }
    }

    fn validate(&self) -> Result<(), ConfigError> {
        positive("units.hbar", self.units.hbar)?;
        positive("units.mass", self.units.mass)?;
        if self.grid.cells < 4 {
            return Err(ConfigError::new("grid.cells", "need at least four cells"));
        }
        let needs_domain = !matches!(self.kind, Kind::Reduce | Kind::AlgebraCheck);
        match &self.domain {
            None if needs_domain => return Err(ConfigError::new("domain", "this experiment needs a domain")),
            Some(_) if !needs_domain => {
                return Err(ConfigError::new("domain", format!("{} takes no domain", self.kind.name())))
            }
            // PGM files are checked when the domain is built
            Some(DomainSpec::Mask { .. }) | None => {}
            Some(d) => {
                d.to_domain(Path::new("."))?;
            }
        }
        match &self.params {
            Params::Spectrum(p) => {
                if p.n_max == 0 {
                    return Err(ConfigError::new("params.n_max", "must be at least 1"));
                }
                if p.count == 0 {
                    return Err(ConfigError::new("params.count", "must be at least 1"));
                }
                if p.source == SpectrumSourceSpec::Analytic && matches!(self.domain, Some(DomainSpec::Mask { .. })) {
                    return Err(ConfigError::new("params.source", "raster masks have no analytic spectrum; use fd"));
                }
            }
            Params::ZenoRun(p) => {
                positive("params.t", p.t)?;
                if p.n_ladder.is_empty() {
                    return Err(ConfigError::new("params.n_ladder", "needs at least one entry"));
                }
                if let Some(i) = p.n_ladder.iter().position(|&n| n == 0) {
                    return Err(ConfigError::new(format!("params.n_ladder[{i}]"), "N must be at least 1"));
                }
                if p.reference_modes == 0 {
                    return Err(ConfigError::new("params.reference_modes", "must be at least 1"));
                }
            }
            Params::ShortTime(p) => {
                p.taus.check("params.taus")?;
                if p.modes == 0 {
                    return Err(ConfigError::new("params.modes", "must be at least 1"));
                }
            }
            Params::Leakage(p) => {
                p.taus.check("params.taus")?;
                if p.reference_modes == 0 {
                    return Err(ConfigError::new("params.reference_modes", "must be at least 1"));
                }
            }
            Params::Reduce(p) => {
                self.reduction_plan(p).validate().map_err(|e| locate(e, "params"))?;
            }
            Params::AlgebraCheck(p) => {
                if p.dim < 2 {
                    return Err(ConfigError::new("params.dim", "must be at least 2"));
                }
                if p.projector_ladder.contains(&0) {
                    return Err(ConfigError::new("params.projector_ladder", "N must be at least 1"));
                }
                let w0 = match p.schedule {
                    WidthSchedule::InverseN { w0 } | WidthSchedule::InverseNSquared { w0 } => w0,
                };
                positive("params.schedule.w0", w0)?;
                positive("params.angular_time", p.angular_time)?;
                Domain::Annulus { r1: p.radii[0], r2: p.radii[1] }
                    .validate()
                    .map_err(|_| ConfigError::new("params.radii", "need 0 <= r1 < r2"))?;
            }
        }
        Ok(())
    }

    pub fn reduction_plan(&self, p: &ReduceParams) -> ReductionPlan {
        ReductionPlan {
            family: p.family.clone(),
            ladder: p.ladder.clone(),
            time: p.t,
            step_budget: p.step_budget,
            guard_ratio: p.guard_ratio,
            units: self.units(),
            diagnostics: p.diagnostics,
        }
    }

    /// Canonical JSON used for hashing; independent of key order in the input.
    pub fn canonical(&self) -> String {
        serde_json::to_string(self).expect("config serialises")
    }

    /// Same as `canonical` with the N ladder removed, so runs that only differ
    /// in their ladder share a series.
    pub fn series_canonical(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serialises");
        if let Some(p) = v.pointer_mut("/params/params").and_then(Value::as_object_mut) {
            p.remove("n_ladder");
        }
        serde_json::to_string(&v).expect("value serialises")
    }
}

/// Set `path` (dot separated) in a JSON object tree, creating objects on the way.
pub fn set_path(root: &mut Value, path: &str, value: Value) {
    let mut cur = root;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if !cur.is_object() {
            *cur = Value::Object(Default::default());
        }
        let map = cur.as_object_mut().expect("object");
        if i + 1 == parts.len() {
            map.insert(part.to_string(), value);
            return;
        }
        cur = map.entry(part.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
}
