use num_complex::Complex64;

use crate::domain::Mask;
use crate::error::{Result, ZenoError};
use crate::grid::Grid;

/// Complex field sampled on a grid. All entries are finite.
#[derive(Clone, Debug)]
pub struct WaveFunction {
    grid: Grid,
    amps: Vec<Complex64>,
}

impl WaveFunction {
    pub fn new(grid: Grid, amps: Vec<Complex64>) -> Result<Self> {
        if amps.len() != grid.len() {
            return Err(ZenoError::GridMismatch(format!(
                "{} amplitudes for a grid of {} points",
                amps.len(),
                grid.len()
            )));
        }
        if let Some(i) = amps.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(ZenoError::invalid("amplitudes", format!("non-finite entry at index {i}")));
        }
        Ok(WaveFunction { grid, amps })
    }

    pub fn zeros(grid: &Grid) -> Self {
        WaveFunction { grid: grid.clone(), amps: vec![Complex64::new(0.0, 0.0); grid.len()] }
    }

    /// Sample `f` at every grid point. Trailing coordinates beyond the grid dimension are zero.
    pub fn from_fn(grid: &Grid, f: impl Fn(&[f64; 3]) -> Complex64) -> Result<Self> {
        let amps = (0..grid.len()).map(|i| f(&grid.point(i))).collect();
        WaveFunction::new(grid.clone(), amps)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn amps(&self) -> &[Complex64] {
        &self.amps
    }

    /// Mutable access for in-place kernels. Callers keep entries finite.
    pub fn amps_mut(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    pub fn into_amps(self) -> Vec<Complex64> {
        self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.cell_volume()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Quadrature inner product, antilinear in `self`.
    pub fn inner(&self, other: &WaveFunction) -> Result<Complex64> {
        self.grid.check_same(&other.grid)?;
        let s: Complex64 = self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum();
        Ok(s * self.grid.cell_volume())
    }

    pub fn normalized(mut self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 {
            return Err(ZenoError::invalid("wavefunction", "cannot normalize the zero field"));
        }
        self.scale(Complex64::new(1.0 / n, 0.0));
        Ok(self)
    }

    pub fn scale(&mut self, c: Complex64) {
        self.amps.iter_mut().for_each(|z| *z *= c);
    }

    /// `self += c * other`.
    pub fn axpy(&mut self, c: Complex64, other: &WaveFunction) -> Result<()> {
        self.grid.check_same(&other.grid)?;
        self.amps.iter_mut().zip(&other.amps).for_each(|(a, b)| *a += c * b);
        Ok(())
    }

    pub fn distance(&self, other: &WaveFunction) -> Result<f64> {
        self.grid.check_same(&other.grid)?;
        let s: f64 = self.amps.iter().zip(&other.amps).map(|(a, b)| (a - b).norm_sqr()).sum();
        Ok((s * self.grid.cell_volume()).sqrt())
    }

    pub fn project(&mut self, mask: &Mask) -> Result<()> {
        self.grid.check_same(mask.grid())?;
        for (z, &b) in self.amps.iter_mut().zip(mask.inside()) {
            if !b {
                *z = Complex64::new(0.0, 0.0);
            }
        }
        Ok(())
    }

    /// Norm of the part of the field outside the mask.
    pub fn outside_norm(&self, mask: &Mask) -> Result<f64> {
        self.grid.check_same(mask.grid())?;
        let s: f64 = self
            .amps
            .iter()
            .zip(mask.inside())
            .filter(|(_, &b)| !b)
            .map(|(z, _)| z.norm_sqr())
            .sum();
        Ok((s * self.grid.cell_volume()).sqrt())
    }

    pub fn is_finite(&self) -> bool {
        self.amps.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}
