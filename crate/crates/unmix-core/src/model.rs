//! Tissue mixture-to-permittivity map and its Born linearization: the stacked
//! Jacobian A = (A_1, A_2, A_3) and the adjusted measurements
//! y_hat = y - y_prior + A v.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::forward::{ArrayGeometry, BackgroundFields, Grid2D, MeasurementSet, SPEED_OF_LIGHT};
use crate::operator::{DenseOperator, SensingOperator};
use crate::prox::l2_norm_complex;
use crate::stack::StackShape;
use crate::{Result, UnmixError};

pub const EPSILON_0: f64 = 8.854_187_812_8e-12;

/// Number of tissue classes: HWC, LWC, cancer.
pub const N_MATERIALS: usize = 3;

/// Single-pole Debye dispersion with a static-conductivity term:
/// eps(w) = eps_inf + delta_eps / (1 + j w tau) + sigma_s / (j w eps0).
/// Under the e^{+jwt} convention a lossy medium has Im(eps) < 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DebyeParams {
    pub eps_inf: f64,
    pub delta_eps: f64,
    pub tau_s: f64,
    pub sigma_s: f64,
}

impl DebyeParams {
    pub fn permittivity(&self, freq: f64) -> Complex64 {
        let omega = 2.0 * std::f64::consts::PI * freq;
        let relax = Complex64::new(self.delta_eps, 0.0)
            / Complex64::new(1.0, omega * self.tau_s);
        let conduct = Complex64::new(0.0, -self.sigma_s / (omega * EPSILON_0));
        Complex64::new(self.eps_inf, 0.0) + relax + conduct
    }

    fn validate(&self, label: &str) -> Result<()> {
        if self.eps_inf < 1.0 || self.delta_eps < 0.0 || !(self.tau_s > 0.0) || self.sigma_s < 0.0 {
            return Err(UnmixError::InvalidArgument(format!(
                "{label}: Debye parameters out of range: {self:?}"
            )));
        }
        Ok(())
    }
}

/// Per-class dispersion models for the three tissue types.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TissueModel {
    pub hwc: DebyeParams,
    pub lwc: DebyeParams,
    pub cancer: DebyeParams,
}

impl Default for TissueModel {
    /// Defaults tuned so the cancer/HWC contrast is on the order of 10%
    /// across the 0.5-1.5 GHz band; overridable from the experiment config.
    fn default() -> Self {
        TissueModel {
            hwc: DebyeParams { eps_inf: 6.7, delta_eps: 43.0, tau_s: 10.5e-12, sigma_s: 0.8 },
            lwc: DebyeParams { eps_inf: 3.1, delta_eps: 1.6, tau_s: 14.2e-12, sigma_s: 0.05 },
            cancer: DebyeParams { eps_inf: 7.2, delta_eps: 48.0, tau_s: 10.6e-12, sigma_s: 0.9 },
        }
    }
}

impl TissueModel {
    pub fn materials(&self) -> [&DebyeParams; N_MATERIALS] {
        [&self.hwc, &self.lwc, &self.cancer]
    }

    /// Permittivity of each class at one frequency, ordered (HWC, LWC, cancer).
    pub fn permittivities(&self, freq: f64) -> [Complex64; N_MATERIALS] {
        [
            self.hwc.permittivity(freq),
            self.lwc.permittivity(freq),
            self.cancer.permittivity(freq),
        ]
    }

    /// Parameter ranges plus the in-band contrast requirement
    /// Re(eps_cancer) > Re(eps_LWC) at every band frequency.
    pub fn validate(&self, frequencies: &[f64]) -> Result<()> {
        self.hwc.validate("hwc")?;
        self.lwc.validate("lwc")?;
        self.cancer.validate("cancer")?;
        for &f in frequencies {
            let [_, lwc, cancer] = self.permittivities(f);
            if cancer.re <= lwc.re {
                return Err(UnmixError::InvalidArgument(format!(
                    "no cancer/LWC contrast at {f} Hz: {} <= {}",
                    cancer.re, lwc.re
                )));
            }
        }
        Ok(())
    }
}

/// Per-pixel mixture proportions, pixel-major: values[n * R + r].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureField {
    pub n_pixels: usize,
    pub n_materials: usize,
    pub values: Vec<f64>,
}

impl MixtureField {
    pub fn new(n_pixels: usize, n_materials: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_pixels * n_materials {
            return Err(UnmixError::InvalidArgument("mixture field length mismatch".into()));
        }
        let field = MixtureField { n_pixels, n_materials, values };
        field.validate()?;
        Ok(field)
    }

    pub fn validate(&self) -> Result<()> {
        for n in 0..self.n_pixels {
            let row = &self.values[n * self.n_materials..(n + 1) * self.n_materials];
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(UnmixError::InvalidArgument(format!(
                    "pixel {n}: proportions sum to {sum}"
                )));
            }
            if row.iter().any(|&v| !(-1e-9..=1.0 + 1e-9).contains(&v)) {
                return Err(UnmixError::InvalidArgument(format!(
                    "pixel {n}: proportion outside [0, 1]: {row:?}"
                )));
            }
        }
        Ok(())
    }

    pub fn get(&self, pixel: usize, material: usize) -> f64 {
        self.values[pixel * self.n_materials + material]
    }

    pub fn set(&mut self, pixel: usize, material: usize, value: f64) {
        self.values[pixel * self.n_materials + material] = value;
    }

    pub fn shape(&self) -> Result<StackShape> {
        StackShape::new(self.n_pixels, self.n_materials)
    }

    /// Material-major stacked vector z = (z_1^T, ..., z_R^T)^T.
    pub fn stacked(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.values.len()];
        for n in 0..self.n_pixels {
            for r in 0..self.n_materials {
                out[r * self.n_pixels + n] = self.get(n, r);
            }
        }
        out
    }

    pub fn from_stacked(stacked: &[f64], shape: StackShape) -> Result<Self> {
        if stacked.len() != shape.len() {
            return Err(UnmixError::InvalidArgument("stacked length mismatch".into()));
        }
        let mut values = vec![0.0; stacked.len()];
        for n in 0..shape.n_pixels {
            for r in 0..shape.n_materials {
                values[n * shape.n_materials + r] = stacked[r * shape.n_pixels + n];
            }
        }
        Ok(MixtureField { n_pixels: shape.n_pixels, n_materials: shape.n_materials, values })
    }
}

/// Complex relative permittivity of the imaging pixels at one frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermittivityMap {
    pub freq: f64,
    pub values: Vec<Complex64>,
}

impl PermittivityMap {
    /// Passivity: the imaginary part has a uniform (nonpositive) sign.
    pub fn validate(&self) -> Result<()> {
        if self.values.iter().any(|e| e.im > 1e-12) {
            return Err(UnmixError::InvalidState(
                "active medium: positive imaginary permittivity under e^{+jwt}".into(),
            ));
        }
        Ok(())
    }
}

/// Per-pixel linear combination eps = sum_r z_r eps_r at one frequency.
pub fn mixture_permittivity(
    z: &MixtureField,
    tissues: &TissueModel,
    freq: f64,
) -> Result<PermittivityMap> {
    z.validate()?;
    if z.n_materials != N_MATERIALS {
        return Err(UnmixError::InvalidArgument(format!(
            "tissue model has {N_MATERIALS} classes, mixture has {}",
            z.n_materials
        )));
    }
    let eps_r = tissues.permittivities(freq);
    let values = (0..z.n_pixels)
        .map(|n| {
            (0..N_MATERIALS)
                .map(|r| eps_r[r] * z.get(n, r))
                .sum()
        })
        .collect();
    Ok(PermittivityMap { freq, values })
}

/// Full-grid permittivity: air outside the imaging mask, the pixel map inside.
pub fn eps_on_grid(grid: &Grid2D, pixels: &PermittivityMap) -> Result<Vec<Complex64>> {
    let cells = grid.imaging_cells();
    if cells.len() != pixels.values.len() {
        return Err(UnmixError::InvalidArgument(format!(
            "permittivity map has {} pixels, mask selects {}",
            pixels.values.len(),
            cells.len()
        )));
    }
    let mut eps = vec![Complex64::new(1.0, 0.0); grid.n_cells()];
    for (cell, &value) in cells.iter().zip(&pixels.values) {
        eps[*cell] = value;
    }
    Ok(eps)
}

/// Full-grid permittivity maps for every band frequency.
pub fn eps_per_freq(
    grid: &Grid2D,
    z: &MixtureField,
    tissues: &TissueModel,
    frequencies: &[f64],
) -> Result<Vec<Vec<Complex64>>> {
    frequencies
        .iter()
        .map(|&f| eps_on_grid(grid, &mixture_permittivity(z, tissues, f)?))
        .collect()
}

/// Matrix-free Born Jacobian. Entry for measurement (tx, rx, f) and unknown
/// (pixel n, material r) is k0^2(f) * E_bg(tx -> n) * E_bg(rx -> n) *
/// cell_area * eps_r(f): the field sensitivity F (in adjoint/reciprocity
/// form) times the constant mixture derivative H_r = eps_r(f) I.
pub struct BornOperator {
    n_pixels: usize,
    n_tx: usize,
    n_rx: usize,
    frequencies: Vec<f64>,
    cell_area: f64,
    /// tx_fields[f][t][n], restricted to imaging pixels.
    tx_fields: Vec<Vec<Vec<Complex64>>>,
    rx_fields: Vec<Vec<Vec<Complex64>>>,
    /// eps_r(f) per frequency, ordered (HWC, LWC, cancer).
    material_eps: Vec<[Complex64; N_MATERIALS]>,
}

impl BornOperator {
    /// Build from background fields already restricted to the imaging pixels
    /// (tx_fields[f][t][pixel]); used when reloading cached fields.
    pub fn new(
        n_pixels: usize,
        frequencies: Vec<f64>,
        cell_area: f64,
        tx_fields: Vec<Vec<Vec<Complex64>>>,
        rx_fields: Vec<Vec<Vec<Complex64>>>,
        tissues: &TissueModel,
    ) -> Result<Self> {
        let n_freq = frequencies.len();
        if tx_fields.len() != n_freq || rx_fields.len() != n_freq || n_freq == 0 {
            return Err(UnmixError::InvalidArgument(
                "need one tx/rx field table per frequency".into(),
            ));
        }
        let n_tx = tx_fields[0].len();
        let n_rx = rx_fields[0].len();
        for f in 0..n_freq {
            if tx_fields[f].len() != n_tx
                || rx_fields[f].len() != n_rx
                || tx_fields[f].iter().chain(&rx_fields[f]).any(|v| v.len() != n_pixels)
            {
                return Err(UnmixError::InvalidArgument("ragged background field table".into()));
            }
        }
        if n_tx == 0 || n_rx == 0 || n_pixels == 0 || !(cell_area > 0.0) {
            return Err(UnmixError::InvalidArgument("empty Born operator".into()));
        }
        let material_eps = frequencies.iter().map(|&f| tissues.permittivities(f)).collect();
        Ok(BornOperator {
            n_pixels,
            n_tx,
            n_rx,
            frequencies,
            cell_area,
            tx_fields,
            rx_fields,
            material_eps,
        })
    }

    pub fn shape(&self) -> StackShape {
        StackShape { n_pixels: self.n_pixels, n_materials: N_MATERIALS }
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn cell_area(&self) -> f64 {
        self.cell_area
    }

    /// Imaging-pixel-restricted background fields, indexed [freq][tx][pixel].
    pub fn tx_fields(&self) -> &[Vec<Vec<Complex64>>] {
        &self.tx_fields
    }

    pub fn rx_fields(&self) -> &[Vec<Vec<Complex64>>] {
        &self.rx_fields
    }

    fn k0_sqr(&self, f_idx: usize) -> f64 {
        let k0 = 2.0 * std::f64::consts::PI * self.frequencies[f_idx] / SPEED_OF_LIGHT;
        k0 * k0
    }

    /// Materialize the dense M x 3N matrix (row-major, measurement flattening
    /// freq-major then tx then rx; columns material-major).
    pub fn to_dense(&self) -> Result<DenseOperator> {
        let rows = self.rows();
        let cols = self.cols();
        let mut entries = vec![Complex64::new(0.0, 0.0); rows * cols];
        let n = self.n_pixels;
        let mut row = 0;
        for f in 0..self.frequencies.len() {
            let scale = self.k0_sqr(f) * self.cell_area;
            let eps = &self.material_eps[f];
            for t in 0..self.n_tx {
                for r in 0..self.n_rx {
                    let et = &self.tx_fields[f][t];
                    let er = &self.rx_fields[f][r];
                    let base = row * cols;
                    for pix in 0..n {
                        let sens = et[pix] * er[pix] * scale;
                        for m in 0..N_MATERIALS {
                            entries[base + m * n + pix] = sens * eps[m];
                        }
                    }
                    row += 1;
                }
            }
        }
        DenseOperator::new(rows, cols, entries)
    }
}

impl SensingOperator for BornOperator {
    fn rows(&self) -> usize {
        self.n_tx * self.n_rx * self.frequencies.len()
    }

    fn cols(&self) -> usize {
        self.n_pixels * N_MATERIALS
    }

    fn apply(&self, x: &[f64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.cols());
        let n = self.n_pixels;
        let mut out = Vec::with_capacity(self.rows());
        for f in 0..self.frequencies.len() {
            let scale = self.k0_sqr(f) * self.cell_area;
            let eps = &self.material_eps[f];
            // s[n] = sum_r eps_r x[r N + n]
            let mut s = vec![Complex64::new(0.0, 0.0); n];
            for m in 0..N_MATERIALS {
                let block = &x[m * n..(m + 1) * n];
                for (acc, &xv) in s.iter_mut().zip(block) {
                    *acc += eps[m] * xv;
                }
            }
            for t in 0..self.n_tx {
                let et = &self.tx_fields[f][t];
                for r in 0..self.n_rx {
                    let er = &self.rx_fields[f][r];
                    let mut acc = Complex64::new(0.0, 0.0);
                    for pix in 0..n {
                        acc += et[pix] * er[pix] * s[pix];
                    }
                    out.push(acc * scale);
                }
            }
        }
        out
    }

    fn adjoint(&self, y: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(y.len(), self.rows());
        let n = self.n_pixels;
        let mut out = vec![Complex64::new(0.0, 0.0); self.cols()];
        let mut row = 0;
        for f in 0..self.frequencies.len() {
            let scale = self.k0_sqr(f) * self.cell_area;
            let eps = &self.material_eps[f];
            let mut acc = vec![Complex64::new(0.0, 0.0); n];
            for t in 0..self.n_tx {
                let et = &self.tx_fields[f][t];
                for r in 0..self.n_rx {
                    let er = &self.rx_fields[f][r];
                    let yv = y[row];
                    for pix in 0..n {
                        acc[pix] += (et[pix] * er[pix] * scale).conj() * yv;
                    }
                    row += 1;
                }
            }
            for m in 0..N_MATERIALS {
                let e_conj = eps[m].conj();
                let block = &mut out[m * n..(m + 1) * n];
                for (o, a) in block.iter_mut().zip(&acc) {
                    *o += e_conj * a;
                }
            }
        }
        out
    }
}

/// Assemble the matrix-free Born Jacobian from cached background fields.
pub fn assemble_jacobian(
    background: &BackgroundFields,
    tissues: &TissueModel,
    grid: &Grid2D,
    geometry: &ArrayGeometry,
) -> Result<BornOperator> {
    let n_freq = geometry.frequencies.len();
    if background.tx_fields.len() != n_freq || background.rx_fields.len() != n_freq {
        return Err(UnmixError::InvalidState(
            "background field table does not cover every frequency".into(),
        ));
    }
    let cells = grid.imaging_cells();
    let restrict = |field: &crate::forward::FieldSolution| -> Vec<Complex64> {
        cells.iter().map(|&c| field.values[c]).collect()
    };
    let mut tx_fields = Vec::with_capacity(n_freq);
    let mut rx_fields = Vec::with_capacity(n_freq);
    for f in 0..n_freq {
        if background.tx_fields[f].len() != geometry.transmitters.len()
            || background.rx_fields[f].len() != geometry.receivers.len()
        {
            return Err(UnmixError::InvalidState("missing background field entries".into()));
        }
        tx_fields.push(background.tx_fields[f].iter().map(&restrict).collect());
        rx_fields.push(background.rx_fields[f].iter().map(&restrict).collect());
    }
    let material_eps =
        geometry.frequencies.iter().map(|&f| tissues.permittivities(f)).collect();
    Ok(BornOperator {
        n_pixels: cells.len(),
        n_tx: geometry.transmitters.len(),
        n_rx: geometry.receivers.len(),
        frequencies: geometry.frequencies.clone(),
        cell_area: grid.cell_size * grid.cell_size,
        tx_fields,
        rx_fields,
        material_eps,
    })
}

/// Adjusted measurements y_hat = y - y_prior + A v.
pub fn adjusted_measurements(
    y: &MeasurementSet,
    y_prior: &MeasurementSet,
    a: &dyn SensingOperator,
    v: &[f64],
) -> Result<Vec<Complex64>> {
    if y.len() != y_prior.len() || y.len() != a.rows() || v.len() != a.cols() {
        return Err(UnmixError::InvalidArgument(format!(
            "adjusted_measurements dimensions: y {}, y_prior {}, A {}x{}, v {}",
            y.len(),
            y_prior.len(),
            a.rows(),
            a.cols(),
            v.len()
        )));
    }
    let av = a.apply(v);
    Ok(y
        .values
        .iter()
        .zip(&y_prior.values)
        .zip(&av)
        .map(|((y, yp), av)| y - yp + av)
        .collect())
}

/// Linearization-noise fraction ||y - (y_prior + A (z_true - v))||_2 / ||y_hat||_2.
pub fn born_error(
    y: &MeasurementSet,
    y_prior: &MeasurementSet,
    a: &dyn SensingOperator,
    v: &[f64],
    z_true: &[f64],
) -> Result<f64> {
    let y_hat = adjusted_measurements(y, y_prior, a, v)?;
    let norm = l2_norm_complex(&y_hat);
    if norm == 0.0 {
        return Err(UnmixError::UndefinedRatio("adjusted measurements have zero norm".into()));
    }
    if z_true.len() != a.cols() {
        return Err(UnmixError::InvalidArgument("z_true length mismatch".into()));
    }
    let dz: Vec<f64> = z_true.iter().zip(v).map(|(z, v)| z - v).collect();
    let adz = a.apply(&dz);
    let num: f64 = y
        .values
        .iter()
        .zip(&y_prior.values)
        .zip(&adz)
        .map(|((y, yp), a)| (y - (yp + a)).norm_sqr())
        .sum::<f64>()
        .sqrt();
    Ok(num / norm)
}

/// Provenance recorded alongside a linearized problem.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinearizedMeta {
    pub frequencies: Vec<f64>,
    pub geometry_hash: String,
    pub n_pixels: usize,
}

/// The simplified unmixing problem after Born linearization.
pub struct LinearizedProblem {
    pub operator: BornOperator,
    pub y_hat: Vec<Complex64>,
    pub prior: Vec<f64>,
    pub delta: f64,
    pub meta: LinearizedMeta,
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn debye_defaults_are_lossy_with_cancer_contrast() {
        let tissues = TissueModel::default();
        let freqs: Vec<f64> = (0..11).map(|i| 500e6 + 100e6 * i as f64).collect();
        tissues.validate(&freqs).unwrap();
        for &f in &freqs {
            for eps in tissues.permittivities(f) {
                assert!(eps.im < 0.0, "lossless tissue at {f}: {eps}");
            }
            let [hwc, _, cancer] = tissues.permittivities(f);
            let contrast = (cancer.re - hwc.re) / hwc.re;
            assert!(contrast > 0.02 && contrast < 0.3, "contrast {contrast} at {f}");
        }
    }

    #[test]
    fn pure_mixture_returns_tissue_curve() {
        let tissues = TissueModel::default();
        let z = MixtureField::new(2, 3, vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
        let map = mixture_permittivity(&z, &tissues, 1.0e9).unwrap();
        assert_eq!(map.values[0], tissues.hwc.permittivity(1.0e9));
    }

    #[test]
    fn half_mixture_is_arithmetic_mean() {
        let tissues = TissueModel::default();
        let z = MixtureField::new(1, 3, vec![0.5, 0.5, 0.0]).unwrap();
        let map = mixture_permittivity(&z, &tissues, 1.0e9).unwrap();
        let want = (tissues.hwc.permittivity(1.0e9) + tissues.lwc.permittivity(1.0e9)) * 0.5;
        assert!((map.values[0] - want).norm() < 1e-14);
    }

    #[test]
    fn random_mixture_matches_reference_sum_and_convex_hull() {
        let tissues = TissueModel::default();
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        for _ in 0..100 {
            let a: f64 = rng.gen_range(0.0..1.0);
            let b: f64 = rng.gen_range(0.0..(1.0 - a));
            let z = MixtureField::new(1, 3, vec![a, b, 1.0 - a - b]).unwrap();
            let freq = rng.gen_range(0.5e9..1.5e9);
            let map = mixture_permittivity(&z, &tissues, freq).unwrap();
            map.validate().unwrap();
            let eps = tissues.permittivities(freq);
            let want = eps[0] * a + eps[1] * b + eps[2] * (1.0 - a - b);
            assert!((map.values[0] - want).norm() < 1e-12);
            // Convex combination: bounded by the extreme real/imag parts.
            let re_min = eps.iter().map(|e| e.re).fold(f64::MAX, f64::min);
            let re_max = eps.iter().map(|e| e.re).fold(f64::MIN, f64::max);
            assert!(map.values[0].re >= re_min - 1e-12 && map.values[0].re <= re_max + 1e-12);
        }
    }

    #[test]
    fn rejects_infeasible_mixture() {
        assert!(MixtureField::new(1, 3, vec![0.7, 0.5, 0.0]).is_err());
        assert!(MixtureField::new(1, 3, vec![1.3, -0.3, 0.0]).is_err());
    }

    #[test]
    fn stacking_round_trips() {
        let z = MixtureField::new(2, 3, vec![0.2, 0.3, 0.5, 0.6, 0.4, 0.0]).unwrap();
        let shape = z.shape().unwrap();
        let stacked = z.stacked();
        assert_eq!(stacked, vec![0.2, 0.6, 0.3, 0.4, 0.5, 0.0]);
        let back = MixtureField::from_stacked(&stacked, shape).unwrap();
        assert_eq!(back, z);
    }
}
