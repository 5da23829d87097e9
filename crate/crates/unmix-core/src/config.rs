//! Experiment configuration: TOML with dotted sections and unit-suffixed key
//! names (e.g. `freq_min_hz`, `cell_size_m`), plus the derived simulation
//! grid/geometry and a content hash for stage caching.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::forward::{ArrayGeometry, Grid2D, SPEED_OF_LIGHT};
use crate::model::TissueModel;
use crate::phantom::PhantomSpec;
use crate::solver::SolverOptions;
use crate::{Result, UnmixError};

/// Which measurement norm the delta fractions refer to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaReference {
    /// ||y_hat||_2, the adjusted measurements (default).
    YHat,
    /// ||y||_2, the raw measurements.
    Y,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeltaConfig {
    /// Residual bounds as fractions of the reference norm.
    pub fractions: Vec<f64>,
    pub reference: DeltaReference,
}

impl Default for DeltaConfig {
    fn default() -> Self {
        DeltaConfig { fractions: vec![1e-4, 1e-2, 5e-2], reference: DeltaReference::YHat }
    }
}

/// Antennas evenly spaced on a circle, with a linearly spaced frequency band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayConfig {
    pub n_antennas: usize,
    pub arc_radius_m: f64,
    pub freq_min_hz: f64,
    pub freq_max_hz: f64,
    pub n_freq: usize,
}

impl ArrayConfig {
    pub fn frequencies(&self) -> Vec<f64> {
        if self.n_freq == 1 {
            return vec![self.freq_min_hz];
        }
        let step = (self.freq_max_hz - self.freq_min_hz) / (self.n_freq - 1) as f64;
        (0..self.n_freq).map(|i| self.freq_min_hz + step * i as f64).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridConfig {
    pub pml_cells: usize,
    /// Clear cells kept between the antenna ring and the PML.
    pub margin_cells: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { pml_cells: 10, margin_cells: 6 }
    }
}

/// Optional additive complex Gaussian measurement noise, relative to ||y||_2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseConfig {
    pub relative: f64,
    pub seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig { relative: 0.0, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub phantom: PhantomSpec,
    pub array: ArrayConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub tissues: TissueModel,
    #[serde(default)]
    pub delta: DeltaConfig,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| UnmixError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    /// Canonical serialized form; the basis of the config hash.
    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| UnmixError::Config(e.to_string()))
    }

    /// SHA-256 of the canonical TOML, hex-encoded. Stage caches key on this.
    pub fn hash(&self) -> Result<String> {
        let mut hasher = Sha256::new();
        hasher.update(self.to_toml_string()?.as_bytes());
        Ok(format!("{:x}", hasher.finalize()))
    }

    pub fn validate(&self) -> Result<()> {
        self.phantom.validate()?;
        self.solver.validate()?;
        if self.array.n_antennas == 0 {
            return Err(UnmixError::Config("array needs at least one antenna".into()));
        }
        if !(self.array.arc_radius_m > 0.0) {
            return Err(UnmixError::Config("arc radius must be positive".into()));
        }
        if self.array.n_freq == 0 || !(self.array.freq_min_hz > 0.0) {
            return Err(UnmixError::Config("frequency band must be positive".into()));
        }
        if self.array.n_freq > 1 && !(self.array.freq_max_hz > self.array.freq_min_hz) {
            return Err(UnmixError::Config("freq_max_hz must exceed freq_min_hz".into()));
        }
        let frequencies = self.array.frequencies();
        self.tissues.validate(&frequencies)?;
        if self.delta.fractions.is_empty() {
            return Err(UnmixError::Config("delta fraction list is empty".into()));
        }
        if self.delta.fractions.iter().any(|&f| !(f > 0.0) || !f.is_finite()) {
            return Err(UnmixError::Config("delta fractions must be positive".into()));
        }
        if !(self.noise.relative >= 0.0) {
            return Err(UnmixError::Config("noise level must be nonnegative".into()));
        }
        // Simulator validity: at least 10 cells per wavelength in the densest
        // tissue at the highest frequency.
        let eps_max = frequencies
            .iter()
            .flat_map(|&f| self.tissues.permittivities(f))
            .map(|e| e.re)
            .fold(1.0, f64::max);
        let lambda_min = SPEED_OF_LIGHT / (self.array.freq_max_hz * eps_max.sqrt());
        if self.phantom.cell_size_m > lambda_min / 10.0 {
            return Err(UnmixError::Config(format!(
                "cell size {} m is coarser than 10 cells/wavelength ({} m minimum wavelength)",
                self.phantom.cell_size_m, lambda_min
            )));
        }
        // The antenna ring must clear the imaging rectangle.
        let half_diag = 0.5
            * ((self.phantom.nx as f64).hypot(self.phantom.ny as f64))
            * self.phantom.cell_size_m;
        if self.array.arc_radius_m <= half_diag {
            return Err(UnmixError::Config(format!(
                "arc radius {} m is inside the imaging region (half-diagonal {half_diag} m)",
                self.array.arc_radius_m
            )));
        }
        Ok(())
    }

    /// Simulation grid: the phantom rectangle centered in a larger domain
    /// whose padding accommodates the antenna ring, the margin, and the PML.
    /// Imaging-mask cells enumerate in phantom pixel order.
    pub fn simulation_grid(&self) -> Result<Grid2D> {
        self.validate()?;
        let cell = self.phantom.cell_size_m;
        let ring_cells = (self.array.arc_radius_m / cell).ceil() as usize;
        let clearance = self.grid.pml_cells + self.grid.margin_cells;
        let pad = |n_phantom: usize| -> usize {
            clearance.max((ring_cells + clearance).saturating_sub(n_phantom / 2))
        };
        let pad_x = pad(self.phantom.nx);
        let pad_y = pad(self.phantom.ny);
        let nx = self.phantom.nx + 2 * pad_x;
        let ny = self.phantom.ny + 2 * pad_y;
        let mut mask = vec![false; nx * ny];
        for iy in pad_y..pad_y + self.phantom.ny {
            for ix in pad_x..pad_x + self.phantom.nx {
                mask[iy * nx + ix] = true;
            }
        }
        Grid2D::new(nx, ny, cell, self.grid.pml_cells, mask)
    }

    pub fn geometry(&self) -> ArrayGeometry {
        ArrayGeometry::circular(
            self.array.n_antennas,
            self.array.arc_radius_m,
            self.array.frequencies(),
        )
    }
}
