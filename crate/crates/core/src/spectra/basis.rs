use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::domain::Domain;
use crate::error::{Result, ZenoError};
use crate::grid::Grid;
use crate::wavefunction::WaveFunction;

/// Quantum numbers of one eigenmode.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum QuantumNumberLabel {
    Interval { n: u32 },
    Rectangle { n: u32, m: u32 },
    Annulus { n: u32, l: i32 },
    Shell { n: u32, l: u32, m: i32 },
    Sector { n: u32, m: u32 },
    Circle { l: i32 },
    Sphere { l: u32, m: i32 },
    /// Finite-difference mode by energy rank, with a detected angular index when available.
    Fd { index: u32, angular: Option<u32> },
}

impl QuantumNumberLabel {
    /// Angular sector used by radial representations; modes in different
    /// sectors are orthogonal through their angular parts.
    pub fn sector(&self) -> Option<(i64, i64)> {
        match self {
            QuantumNumberLabel::Shell { l, m, .. } => Some((*l as i64, *m as i64)),
            QuantumNumberLabel::Annulus { l, .. } => Some((*l as i64, 0)),
            _ => None,
        }
    }

    pub fn describe(&self) -> String {
        match self {
            QuantumNumberLabel::Interval { n } => format!("n={n}"),
            QuantumNumberLabel::Rectangle { n, m } => format!("n={n},m={m}"),
            QuantumNumberLabel::Annulus { n, l } => format!("n={n},l={l}"),
            QuantumNumberLabel::Shell { n, l, m } => format!("n={n},l={l},m={m}"),
            QuantumNumberLabel::Sector { n, m } => format!("n={n},m={m}"),
            QuantumNumberLabel::Circle { l } => format!("l={l}"),
            QuantumNumberLabel::Sphere { l, m } => format!("l={l},m={m}"),
            QuantumNumberLabel::Fd { index, angular: Some(l) } => format!("fd={index},l={l}"),
            QuantumNumberLabel::Fd { index, angular: None } => format!("fd={index}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumSource {
    Analytic,
    FdOracle,
}

/// How eigenfields are stored.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Representation {
    /// Full field on a Cartesian grid.
    Cartesian,
    /// Reduced radial function `u(r) = r R(r)` on a 1D radial grid with measure dr.
    RadialShell,
}

#[derive(Clone, Debug)]
pub struct BasisEntry {
    pub label: QuantumNumberLabel,
    pub energy: f64,
    pub field: Arc<WaveFunction>,
}

/// Quadrature diagnostics recorded when a basis is built.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NormalizationRecord {
    pub max_gram_deviation: f64,
    pub max_boundary_sample: f64,
}

/// Eigenpairs sorted by energy, sharing one grid.
#[derive(Clone, Debug)]
pub struct SpectralBasis {
    pub domain: Domain,
    pub source: SpectrumSource,
    pub representation: Representation,
    pub grid: Grid,
    pub entries: Vec<BasisEntry>,
    pub normalization: NormalizationRecord,
}

/// Gram matrices are formed exactly only up to this many entries.
const GRAM_LIMIT: usize = 400;

impl SpectralBasis {
    pub fn new(
        domain: Domain,
        source: SpectrumSource,
        representation: Representation,
        grid: Grid,
        mut entries: Vec<BasisEntry>,
    ) -> Result<Self> {
        for e in &entries {
            grid.check_same(e.field.grid())?;
            if !e.energy.is_finite() {
                return Err(ZenoError::invalid("energy", "non-finite eigenvalue"));
            }
        }
        entries.sort_by(|a, b| a.energy.total_cmp(&b.energy));
        let mut b = SpectralBasis {
            domain,
            source,
            representation,
            grid,
            entries,
            normalization: NormalizationRecord::default(),
        };
        b.normalization = b.measure_normalization();
        Ok(b)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn energies(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.energy).collect()
    }

    pub fn find(&self, label: &QuantumNumberLabel) -> Option<&BasisEntry> {
        self.entries.iter().find(|e| &e.label == label)
    }

    /// Largest |<i|j> - delta_ij| among entries that share an angular sector.
    pub fn gram_deviation(&self) -> f64 {
        let n = self.entries.len().min(GRAM_LIMIT);
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                let (a, b) = (&self.entries[i], &self.entries[j]);
                if self.representation == Representation::RadialShell && a.label.sector() != b.label.sector() {
                    continue;
                }
                let ip = a.field.inner(&b.field).expect("basis fields share a grid");
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((ip - target).norm());
            }
        }
        worst
    }

    fn measure_normalization(&self) -> NormalizationRecord {
        let h = self.grid.axes().iter().map(|a| a.spacing).fold(f64::INFINITY, f64::min);
        let mut edge: f64 = 0.0;
        if self.representation == Representation::Cartesian {
            for e in &self.entries {
                for (i, z) in e.field.amps().iter().enumerate() {
                    let p = self.grid.point(i);
                    if !self.domain.contains(&p, h) {
                        edge = edge.max(z.norm());
                    }
                }
            }
        }
        NormalizationRecord { max_gram_deviation: self.gram_deviation(), max_boundary_sample: edge }
    }

    /// Error unless the basis is orthonormal to `tol`.
    pub fn require_orthonormal(&self, tol: f64) -> Result<()> {
        let d = self.normalization.max_gram_deviation;
        if d > tol {
            Err(ZenoError::NonOrthonormalBasis(d))
        } else {
            Ok(())
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let file = BasisFile {
            schema: BASIS_SCHEMA.to_string(),
            domain: self.domain.clone(),
            source: self.source,
            representation: self.representation,
            grid: self.grid.clone(),
            normalization: self.normalization,
            entries: self
                .entries
                .iter()
                .map(|e| BasisFileEntry {
                    label: e.label.clone(),
                    energy: e.energy,
                    re: e.field.amps().iter().map(|z| z.re).collect(),
                    im: e.field.amps().iter().map(|z| z.im).collect(),
                })
                .collect(),
        };
        serde_json::to_value(file).expect("basis serialises")
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let file: BasisFile = serde_json::from_value(v.clone())
            .map_err(|e| ZenoError::invalid("basis", format!("malformed basis file: {e}")))?;
        if file.schema != BASIS_SCHEMA {
            return Err(ZenoError::invalid("schema", format!("expected {BASIS_SCHEMA}, found {}", file.schema)));
        }
        let entries = file
            .entries
            .into_iter()
            .map(|e| {
                if e.re.len() != e.im.len() {
                    return Err(ZenoError::invalid("entries", "re/im lengths differ"));
                }
                let amps = e.re.iter().zip(&e.im).map(|(&r, &i)| Complex64::new(r, i)).collect();
                Ok(BasisEntry {
                    label: e.label,
                    energy: e.energy,
                    field: Arc::new(WaveFunction::new(file.grid.clone(), amps)?),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        SpectralBasis::new(file.domain, file.source, file.representation, file.grid, entries)
    }
}

pub const BASIS_SCHEMA: &str = "zeno.spectral-basis/1";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BasisFile {
    schema: String,
    domain: Domain,
    source: SpectrumSource,
    representation: Representation,
    grid: Grid,
    normalization: NormalizationRecord,
    entries: Vec<BasisFileEntry>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BasisFileEntry {
    label: QuantumNumberLabel,
    energy: f64,
    re: Vec<f64>,
    im: Vec<f64>,
}
