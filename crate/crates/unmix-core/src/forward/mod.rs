//! 2D scalar frequency-domain Helmholtz (FDFD) simulation with PML absorbing
//! boundaries, producing synthetic multistatic measurements and the background
//! fields consumed by the Born Jacobian assembly.
//!
//! Time convention is e^{+j w t} throughout: lossy media carry a negative
//! imaginary permittivity and outgoing waves follow the second-kind Hankel
//! function.

pub mod banded;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Result, UnmixError};
use banded::{BandedLu, BandedMatrix};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Simulation grid: a full rectangular domain (including PML cells) with a
/// boolean mask selecting the N imaging pixels.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Grid2D {
    pub nx: usize,
    pub ny: usize,
    /// Cell edge length in meters.
    pub cell_size: f64,
    /// PML thickness in cells on each of the four sides.
    pub pml_cells: usize,
    /// Per-cell flag selecting the imaging pixels (length nx * ny).
    pub imaging_mask: Vec<bool>,
}

impl Grid2D {
    pub fn new(
        nx: usize,
        ny: usize,
        cell_size: f64,
        pml_cells: usize,
        imaging_mask: Vec<bool>,
    ) -> Result<Self> {
        if nx == 0 || ny == 0 || !(cell_size > 0.0) {
            return Err(UnmixError::InvalidArgument("grid dims and cell_size must be positive".into()));
        }
        if imaging_mask.len() != nx * ny {
            return Err(UnmixError::InvalidArgument(format!(
                "imaging mask length {} != {}x{}",
                imaging_mask.len(),
                nx,
                ny
            )));
        }
        if 2 * pml_cells + 2 >= nx.min(ny) {
            return Err(UnmixError::InvalidArgument("PML leaves no interior".into()));
        }
        Ok(Self { nx, ny, cell_size, pml_cells, imaging_mask })
    }

    pub fn n_cells(&self) -> usize {
        self.nx * self.ny
    }

    /// Number of imaging pixels N.
    pub fn n_imaging(&self) -> usize {
        self.imaging_mask.iter().filter(|&&m| m).count()
    }

    /// Cell indices of the imaging pixels in stacked order.
    pub fn imaging_cells(&self) -> Vec<usize> {
        (0..self.n_cells()).filter(|&c| self.imaging_mask[c]).collect()
    }

    #[inline]
    pub fn cell_index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }

    /// Center coordinate of a cell, origin at the domain center.
    pub fn cell_center(&self, ix: usize, iy: usize) -> [f64; 2] {
        [
            (ix as f64 + 0.5 - self.nx as f64 / 2.0) * self.cell_size,
            (iy as f64 + 0.5 - self.ny as f64 / 2.0) * self.cell_size,
        ]
    }

    /// Nearest cell to a physical position; errors if outside the domain.
    pub fn nearest_cell(&self, pos: [f64; 2]) -> Result<(usize, usize)> {
        let fx = pos[0] / self.cell_size + self.nx as f64 / 2.0 - 0.5;
        let fy = pos[1] / self.cell_size + self.ny as f64 / 2.0 - 0.5;
        let ix = fx.round();
        let iy = fy.round();
        if ix < 0.0 || iy < 0.0 || ix >= self.nx as f64 || iy >= self.ny as f64 {
            return Err(UnmixError::InvalidArgument(format!(
                "position ({}, {}) outside grid",
                pos[0], pos[1]
            )));
        }
        Ok((ix as usize, iy as usize))
    }

    /// True if the cell lies strictly inside the non-PML region.
    pub fn is_interior(&self, ix: usize, iy: usize) -> bool {
        ix >= self.pml_cells
            && iy >= self.pml_cells
            && ix < self.nx - self.pml_cells
            && iy < self.ny - self.pml_cells
    }
}

/// Multistatic acquisition: antenna positions in meters and a strictly
/// increasing frequency list in Hz.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArrayGeometry {
    pub transmitters: Vec<[f64; 2]>,
    pub receivers: Vec<[f64; 2]>,
    pub frequencies: Vec<f64>,
}

impl ArrayGeometry {
    pub fn validate(&self, grid: &Grid2D) -> Result<()> {
        if self.transmitters.is_empty() || self.receivers.is_empty() {
            return Err(UnmixError::InvalidArgument("geometry needs antennas".into()));
        }
        if self.frequencies.is_empty() {
            return Err(UnmixError::InvalidArgument("geometry needs frequencies".into()));
        }
        if !self.frequencies.windows(2).all(|w| w[0] < w[1]) {
            return Err(UnmixError::InvalidArgument("frequencies must be strictly increasing".into()));
        }
        if self.frequencies[0] <= 0.0 {
            return Err(UnmixError::InvalidArgument("frequencies must be positive".into()));
        }
        for pos in self.transmitters.iter().chain(&self.receivers) {
            let (ix, iy) = grid.nearest_cell(*pos)?;
            if !grid.is_interior(ix, iy) {
                return Err(UnmixError::InvalidArgument(format!(
                    "antenna at ({}, {}) lies in the PML region",
                    pos[0], pos[1]
                )));
            }
        }
        Ok(())
    }

    /// Total measurement count M = n_tx * n_rx * n_freq.
    pub fn n_measurements(&self) -> usize {
        self.transmitters.len() * self.receivers.len() * self.frequencies.len()
    }

    /// Evenly spaced antennas on a circle of the given radius, shared between
    /// transmit and receive.
    pub fn circular(n_antennas: usize, radius: f64, frequencies: Vec<f64>) -> Self {
        let positions: Vec<[f64; 2]> = (0..n_antennas)
            .map(|i| {
                let theta = 2.0 * std::f64::consts::PI * i as f64 / n_antennas as f64;
                [radius * theta.cos(), radius * theta.sin()]
            })
            .collect();
        ArrayGeometry { transmitters: positions.clone(), receivers: positions, frequencies }
    }
}

/// Complex field on the full grid for one (source, frequency) pair.
#[derive(Debug, Clone)]
pub struct FieldSolution {
    pub freq: f64,
    /// Field values per cell, volts/meter.
    pub values: Vec<Complex64>,
}

/// Complex measurements indexed (tx, rx, freq); flattening is freq-major,
/// then tx, then rx.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSet {
    pub n_tx: usize,
    pub n_rx: usize,
    pub n_freq: usize,
    pub values: Vec<Complex64>,
}

impl MeasurementSet {
    pub fn index(&self, tx: usize, rx: usize, f: usize) -> usize {
        f * self.n_tx * self.n_rx + tx * self.n_rx + rx
    }

    pub fn get(&self, tx: usize, rx: usize, f: usize) -> Complex64 {
        self.values[self.index(tx, rx, f)]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// An assembled discrete Helmholtz operator (del^2 + k0^2 eps_r) with
/// quadratic-profile complex-coordinate-stretching PML on all four sides.
pub struct HelmholtzSystem {
    pub freq: f64,
    nx: usize,
    ny: usize,
    cell_size: f64,
    matrix: Option<BandedMatrix>,
    factor: Option<BandedLu>,
}

/// PML stretch factor at fractional cell coordinate `q` along an axis with
/// `n` cells: 1 - j * sigma_max * depth^2 with depth the normalized
/// penetration into the layer.
fn stretch(q: f64, n: usize, pml: usize, sigma_max: f64) -> Complex64 {
    let depth_lo = pml as f64 - q;
    let depth_hi = q - (n as f64 - pml as f64);
    let d = (depth_lo.max(depth_hi) / pml as f64).max(0.0);
    Complex64::new(1.0, -sigma_max * d * d)
}

/// Assemble the 5-point-stencil FDFD system for one frequency.
///
/// `eps_cells` holds the complex relative permittivity of every grid cell.
pub fn assemble_helmholtz(
    grid: &Grid2D,
    eps_cells: &[Complex64],
    freq: f64,
) -> Result<HelmholtzSystem> {
    if !(freq > 0.0) {
        return Err(UnmixError::InvalidArgument(format!("frequency must be positive, got {freq}")));
    }
    if eps_cells.len() != grid.n_cells() {
        return Err(UnmixError::InvalidArgument(format!(
            "permittivity entries {} != grid cells {}",
            eps_cells.len(),
            grid.n_cells()
        )));
    }
    let nx = grid.nx;
    let ny = grid.ny;
    let h = grid.cell_size;
    let k0 = 2.0 * std::f64::consts::PI * freq / SPEED_OF_LIGHT;
    let k0_sqr = Complex64::new(k0 * k0, 0.0);
    // Quadratic profile, amplitude 0.8*(m+1)/(k0*h) with m = 2.
    let sigma_max = 2.4 / (k0 * h);
    let pml = grid.pml_cells;
    let inv_h2 = 1.0 / (h * h);

    let n = grid.n_cells();
    let mut a = BandedMatrix::zeros(n, nx, nx);
    for iy in 0..ny {
        let sy = stretch(iy as f64 + 0.5, ny, pml, sigma_max);
        let sy_lo = stretch(iy as f64, ny, pml, sigma_max);
        let sy_hi = stretch(iy as f64 + 1.0, ny, pml, sigma_max);
        for ix in 0..nx {
            let sx = stretch(ix as f64 + 0.5, nx, pml, sigma_max);
            let sx_lo = stretch(ix as f64, nx, pml, sigma_max);
            let sx_hi = stretch(ix as f64 + 1.0, nx, pml, sigma_max);
            let c = grid.cell_index(ix, iy);

            let cx_lo = inv_h2 / (sx * sx_lo);
            let cx_hi = inv_h2 / (sx * sx_hi);
            let cy_lo = inv_h2 / (sy * sy_lo);
            let cy_hi = inv_h2 / (sy * sy_hi);

            let mut center = -(cx_lo + cx_hi + cy_lo + cy_hi) + k0_sqr * eps_cells[c];
            // Dirichlet zero outside the domain; the PML has absorbed the
            // field well before it reaches the edge.
            if ix > 0 {
                a.set(c, c - 1, cx_lo);
            }
            if ix + 1 < nx {
                a.set(c, c + 1, cx_hi);
            }
            if iy > 0 {
                a.set(c, c - nx, cy_lo);
            }
            if iy + 1 < ny {
                a.set(c, c + nx, cy_hi);
            }
            center += Complex64::new(0.0, 0.0);
            a.set(c, c, center);
        }
    }
    Ok(HelmholtzSystem { freq, nx, ny, cell_size: h, matrix: Some(a), factor: None })
}

/// A point source: physical position, snapped to the nearest grid cell.
#[derive(Debug, Clone, Copy)]
pub struct PointSource {
    pub position: [f64; 2],
    pub amplitude: Complex64,
}

impl PointSource {
    pub fn unit(position: [f64; 2]) -> Self {
        PointSource { position, amplitude: Complex64::new(1.0, 0.0) }
    }
}

impl HelmholtzSystem {
    /// Residual ||A x - b|| / ||b|| of a candidate solution against the
    /// assembled (unfactorized) operator.
    pub fn relative_residual(&self, x: &[Complex64], b: &[Complex64]) -> f64 {
        let a = self.matrix.as_ref().expect("residual requires the assembled matrix");
        let ax = a.apply(x);
        let num: f64 = ax.iter().zip(b).map(|(p, q)| (p - q).norm_sqr()).sum::<f64>().sqrt();
        let den: f64 = b.iter().map(|q| q.norm_sqr()).sum::<f64>().sqrt();
        num / den.max(1e-300)
    }

    fn ensure_factorized(&mut self) -> Result<&BandedLu> {
        if self.factor.is_none() {
            let matrix = self
                .matrix
                .clone()
                .ok_or_else(|| UnmixError::InvalidState("matrix already consumed".into()))?;
            let lu = matrix.factorize().map_err(|_| {
                UnmixError::NumericalFailure(format!(
                    "singular Helmholtz factorization at {} Hz",
                    self.freq
                ))
            })?;
            self.factor = Some(lu);
        }
        Ok(self.factor.as_ref().unwrap())
    }

    /// Right-hand side for a point source: a discrete delta of weight
    /// -1/cell_area, matching (del^2 + k^2) G = -delta.
    pub fn source_rhs(&self, grid: &Grid2D, source: &PointSource) -> Result<Vec<Complex64>> {
        let (ix, iy) = grid.nearest_cell(source.position)?;
        if !grid.is_interior(ix, iy) {
            return Err(UnmixError::InvalidArgument("source inside PML region".into()));
        }
        let mut b = vec![Complex64::new(0.0, 0.0); self.nx * self.ny];
        let area = self.cell_size * self.cell_size;
        b[grid.cell_index(ix, iy)] = -source.amplitude / area;
        Ok(b)
    }
}

/// Solve one assembled system for a list of point sources, reusing a single
/// factorization.
pub fn solve_forward(
    system: &mut HelmholtzSystem,
    grid: &Grid2D,
    sources: &[PointSource],
) -> Result<Vec<FieldSolution>> {
    let rhs: Vec<Vec<Complex64>> =
        sources.iter().map(|s| system.source_rhs(grid, s)).collect::<Result<_>>()?;
    let freq = system.freq;
    let lu = system.ensure_factorized()?;
    Ok(rhs
        .iter()
        .map(|b| FieldSolution { freq, values: lu.solve(b) })
        .collect())
}

/// Synthetic multistatic measurements: the total field at each receiver for
/// every transmitter and frequency, redundant (monostatic and reciprocal)
/// entries included.
pub fn simulate_measurements(
    grid: &Grid2D,
    geometry: &ArrayGeometry,
    eps_per_freq: &[Vec<Complex64>],
) -> Result<MeasurementSet> {
    geometry.validate(grid)?;
    if eps_per_freq.len() != geometry.frequencies.len() {
        return Err(UnmixError::InvalidArgument(format!(
            "need one permittivity map per frequency: {} != {}",
            eps_per_freq.len(),
            geometry.frequencies.len()
        )));
    }
    let n_tx = geometry.transmitters.len();
    let n_rx = geometry.receivers.len();
    let rx_cells: Vec<usize> = geometry
        .receivers
        .iter()
        .map(|&p| grid.nearest_cell(p).map(|(ix, iy)| grid.cell_index(ix, iy)))
        .collect::<Result<_>>()?;

    let per_freq: Vec<Vec<Complex64>> = geometry
        .frequencies
        .par_iter()
        .zip(eps_per_freq.par_iter())
        .map(|(&freq, eps)| -> Result<Vec<Complex64>> {
            let mut system = assemble_helmholtz(grid, eps, freq)?;
            let sources: Vec<PointSource> =
                geometry.transmitters.iter().map(|&p| PointSource::unit(p)).collect();
            let fields = solve_forward(&mut system, grid, &sources)?;
            let mut block = Vec::with_capacity(n_tx * n_rx);
            for field in &fields {
                for &rc in &rx_cells {
                    block.push(field.values[rc]);
                }
            }
            Ok(block)
        })
        .collect::<Result<_>>()?;

    let values = per_freq.into_iter().flatten().collect();
    Ok(MeasurementSet { n_tx, n_rx, n_freq: geometry.frequencies.len(), values })
}

/// Background fields for Jacobian assembly: one solve per transmitter and one
/// per receiver (treated as a source, by reciprocity), per frequency.
pub struct BackgroundFields {
    /// tx_fields[f][t]: field from transmitter t at frequency index f.
    pub tx_fields: Vec<Vec<FieldSolution>>,
    /// rx_fields[f][r]: field from receiver r used as a source.
    pub rx_fields: Vec<Vec<FieldSolution>>,
}

impl BackgroundFields {
    /// Total cached entries: (n_tx + n_rx) * n_freq.
    pub fn n_entries(&self) -> usize {
        self.tx_fields.iter().map(Vec::len).sum::<usize>()
            + self.rx_fields.iter().map(Vec::len).sum::<usize>()
    }
}

pub fn background_fields(
    grid: &Grid2D,
    geometry: &ArrayGeometry,
    eps_per_freq: &[Vec<Complex64>],
) -> Result<BackgroundFields> {
    geometry.validate(grid)?;
    if eps_per_freq.len() != geometry.frequencies.len() {
        return Err(UnmixError::InvalidArgument(
            "need one background permittivity map per frequency".into(),
        ));
    }
    let results: Vec<(Vec<FieldSolution>, Vec<FieldSolution>)> = geometry
        .frequencies
        .par_iter()
        .zip(eps_per_freq.par_iter())
        .map(|(&freq, eps)| -> Result<(Vec<FieldSolution>, Vec<FieldSolution>)> {
            let mut system = assemble_helmholtz(grid, eps, freq)?;
            let tx_sources: Vec<PointSource> =
                geometry.transmitters.iter().map(|&p| PointSource::unit(p)).collect();
            let rx_sources: Vec<PointSource> =
                geometry.receivers.iter().map(|&p| PointSource::unit(p)).collect();
            let tx = solve_forward(&mut system, grid, &tx_sources)?;
            let rx = solve_forward(&mut system, grid, &rx_sources)?;
            Ok((tx, rx))
        })
        .collect::<Result<_>>()?;

    let mut tx_fields = Vec::with_capacity(results.len());
    let mut rx_fields = Vec::with_capacity(results.len());
    for (tx, rx) in results {
        tx_fields.push(tx);
        rx_fields.push(rx);
    }
    Ok(BackgroundFields { tx_fields, rx_fields })
}
