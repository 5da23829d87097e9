//! Synthetic paired healthy/lesioned 2D phantoms: a smooth correlated HWC
//! texture inside an elliptical outline, plus a disk lesion with
//! area-weighted partial-volume edges.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::model::{MixtureField, N_MATERIALS};
use crate::{Result, UnmixError};

/// Correlated random texture for the HWC fraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextureSpec {
    /// Gaussian correlation length in meters (0 disables smoothing).
    pub correlation_length_m: f64,
    /// Mean HWC fraction inside the outline.
    pub mean_hwc: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LesionSpec {
    /// Center in meters, origin at the grid center.
    pub center_m: [f64; 2],
    pub radius_m: f64,
    /// Cancer proportion inside the disk; 0 degenerates to no lesion.
    pub proportion: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub nx: usize,
    pub ny: usize,
    pub cell_size_m: f64,
    /// Breast outline ellipse semi-axes in meters, centered on the grid.
    pub outline_semi_axes_m: [f64; 2],
    pub texture: TextureSpec,
    pub lesion: LesionSpec,
    pub seed: u64,
}

impl PhantomSpec {
    pub fn n_pixels(&self) -> usize {
        self.nx * self.ny
    }

    fn cell_center(&self, ix: usize, iy: usize) -> [f64; 2] {
        [
            (ix as f64 + 0.5 - self.nx as f64 / 2.0) * self.cell_size_m,
            (iy as f64 + 0.5 - self.ny as f64 / 2.0) * self.cell_size_m,
        ]
    }

    fn inside_outline(&self, p: [f64; 2]) -> bool {
        let [a, b] = self.outline_semi_axes_m;
        (p[0] / a).powi(2) + (p[1] / b).powi(2) <= 1.0
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx == 0 || self.ny == 0 || !(self.cell_size_m > 0.0) {
            return Err(UnmixError::InvalidArgument("phantom grid must be non-empty".into()));
        }
        let [a, b] = self.outline_semi_axes_m;
        if !(a > 0.0) || !(b > 0.0) {
            return Err(UnmixError::InvalidArgument("outline semi-axes must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.texture.mean_hwc) {
            return Err(UnmixError::InvalidArgument("mean HWC fraction outside [0, 1]".into()));
        }
        if self.texture.correlation_length_m < 0.0 {
            return Err(UnmixError::InvalidArgument("negative correlation length".into()));
        }
        if !(0.0..=1.0).contains(&self.lesion.proportion) {
            return Err(UnmixError::InvalidArgument("lesion proportion outside [0, 1]".into()));
        }
        if self.lesion.radius_m < self.cell_size_m {
            return Err(UnmixError::InvalidArgument("lesion radius below one cell".into()));
        }
        // Lesion disk inside the outline: sample the disk boundary.
        let [cx, cy] = self.lesion.center_m;
        for i in 0..64 {
            let t = 2.0 * std::f64::consts::PI * i as f64 / 64.0;
            let p = [cx + self.lesion.radius_m * t.cos(), cy + self.lesion.radius_m * t.sin()];
            if !self.inside_outline(p) {
                return Err(UnmixError::InvalidArgument("lesion extends past the outline".into()));
            }
        }
        Ok(())
    }
}

/// Healthy/lesioned phantom pair sharing tissue everywhere outside the lesion.
#[derive(Debug, Clone, PartialEq)]
pub struct PhantomPair {
    pub spec: PhantomSpec,
    pub healthy: MixtureField,
    pub unhealthy: MixtureField,
    /// True where the lesion disk overlaps the pixel at all.
    pub lesion_mask: Vec<bool>,
}

/// Separable Gaussian blur with sigma in cells, kernel truncated at 3 sigma.
fn gaussian_blur(field: &mut Vec<f64>, nx: usize, ny: usize, sigma: f64) {
    if sigma <= 0.0 {
        return;
    }
    let half = (3.0 * sigma).ceil() as isize;
    let kernel: Vec<f64> = (-half..=half)
        .map(|k| (-(k as f64).powi(2) / (2.0 * sigma * sigma)).exp())
        .collect();
    let norm: f64 = kernel.iter().sum();
    let mut tmp = vec![0.0; field.len()];
    for iy in 0..ny {
        for ix in 0..nx {
            let mut acc = 0.0;
            for (ki, w) in kernel.iter().enumerate() {
                let x = (ix as isize + ki as isize - half).clamp(0, nx as isize - 1) as usize;
                acc += w * field[iy * nx + x];
            }
            tmp[iy * nx + ix] = acc / norm;
        }
    }
    for iy in 0..ny {
        for ix in 0..nx {
            let mut acc = 0.0;
            for (ki, w) in kernel.iter().enumerate() {
                let y = (iy as isize + ki as isize - half).clamp(0, ny as isize - 1) as usize;
                acc += w * tmp[y * nx + ix];
            }
            field[iy * nx + ix] = acc / norm;
        }
    }
}

/// Fraction of the cell covered by the lesion disk, by 4x4 supersampling.
fn disk_coverage(spec: &PhantomSpec, ix: usize, iy: usize) -> f64 {
    let [cx, cy] = spec.lesion.center_m;
    let r2 = spec.lesion.radius_m * spec.lesion.radius_m;
    let center = spec.cell_center(ix, iy);
    let mut hits = 0;
    for sy in 0..4 {
        for sx in 0..4 {
            let x = center[0] + (sx as f64 + 0.5 - 2.0) / 4.0 * spec.cell_size_m;
            let y = center[1] + (sy as f64 + 0.5 - 2.0) / 4.0 * spec.cell_size_m;
            if (x - cx).powi(2) + (y - cy).powi(2) <= r2 {
                hits += 1;
            }
        }
    }
    hits as f64 / 16.0
}

/// Generate the paired phantom: correlated HWC texture clipped to [0, 1] with
/// v2 = 1 - v1 and v3 = 0, then a lesion copy with z3 = p * coverage and the
/// healthy proportions scaled by (1 - z3).
pub fn generate(spec: &PhantomSpec) -> Result<PhantomPair> {
    spec.validate()?;
    let n = spec.n_pixels();

    // White noise, smoothed to the requested correlation length, then
    // rescaled back to unit standard deviation before clipping.
    let mut rng = ChaCha8Rng::seed_from_u64(spec.texture.seed);
    let mut noise: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    gaussian_blur(&mut noise, spec.nx, spec.ny, spec.texture.correlation_length_m / spec.cell_size_m);
    let mean = noise.iter().sum::<f64>() / n as f64;
    let var = noise.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    let scale = if var > 0.0 { 1.0 / var.sqrt() } else { 0.0 };
    // Texture amplitude: +/- 0.15 HWC fraction per standard deviation.
    const AMPLITUDE: f64 = 0.15;

    let mut healthy_values = vec![0.0; n * N_MATERIALS];
    for iy in 0..spec.ny {
        for ix in 0..spec.nx {
            let pix = iy * spec.nx + ix;
            let v1 = if spec.inside_outline(spec.cell_center(ix, iy)) {
                (spec.texture.mean_hwc + AMPLITUDE * scale * (noise[pix] - mean)).clamp(0.0, 1.0)
            } else {
                0.0 // outside the breast: pure low-water-content filler
            };
            healthy_values[pix * N_MATERIALS] = v1;
            healthy_values[pix * N_MATERIALS + 1] = 1.0 - v1;
        }
    }
    let healthy = MixtureField::new(n, N_MATERIALS, healthy_values)?;

    let mut unhealthy = healthy.clone();
    let mut lesion_mask = vec![false; n];
    for iy in 0..spec.ny {
        for ix in 0..spec.nx {
            let coverage = disk_coverage(spec, ix, iy);
            if coverage == 0.0 {
                continue;
            }
            let pix = iy * spec.nx + ix;
            lesion_mask[pix] = true;
            let z3 = spec.lesion.proportion * coverage;
            unhealthy.set(pix, 0, healthy.get(pix, 0) * (1.0 - z3));
            unhealthy.set(pix, 1, healthy.get(pix, 1) * (1.0 - z3));
            unhealthy.set(pix, 2, z3);
        }
    }
    unhealthy.validate()?;
    Ok(PhantomPair { spec: spec.clone(), healthy, unhealthy, lesion_mask })
}

/// Stacked prior v = (v1^T, v2^T, v3^T)^T taken from the healthy segmentation.
pub fn prior_from_healthy(pair: &PhantomPair) -> Vec<f64> {
    pair.healthy.stacked()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stack::StackShape;

    fn base_spec() -> PhantomSpec {
        PhantomSpec {
            nx: 24,
            ny: 24,
            cell_size_m: 0.002,
            outline_semi_axes_m: [0.022, 0.018],
            texture: TextureSpec { correlation_length_m: 0.004, mean_hwc: 0.4, seed: 5 },
            lesion: LesionSpec { center_m: [0.004, -0.002], radius_m: 0.004, proportion: 0.8 },
            seed: 9,
        }
    }

    #[test]
    fn full_proportion_replaces_interior_lesion_cells() {
        let mut spec = base_spec();
        spec.lesion.proportion = 1.0;
        let pair = generate(&spec).unwrap();
        let (cx, cy) = (
            (spec.lesion.center_m[0] / spec.cell_size_m + spec.nx as f64 / 2.0 - 0.5).round()
                as usize,
            (spec.lesion.center_m[1] / spec.cell_size_m + spec.ny as f64 / 2.0 - 0.5).round()
                as usize,
        );
        let pix = cy * spec.nx + cx;
        assert_eq!(pair.unhealthy.get(pix, 0), 0.0);
        assert_eq!(pair.unhealthy.get(pix, 1), 0.0);
        assert_eq!(pair.unhealthy.get(pix, 2), 1.0);
    }

    #[test]
    fn zero_proportion_leaves_phantom_healthy() {
        let mut spec = base_spec();
        spec.lesion.proportion = 0.0;
        let pair = generate(&spec).unwrap();
        assert_eq!(pair.healthy, pair.unhealthy);
    }

    #[test]
    fn generated_rows_stay_on_the_simplex_over_random_specs() {
        // MixtureField::new re-validates on every construction, so the sweep
        // just needs generate() to succeed; tiny grids keep 10^5 rows cheap.
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut rows = 0usize;
        while rows < 100_000 {
            let nx = rng.gen_range(8..16);
            let ny = rng.gen_range(8..16);
            let spec = PhantomSpec {
                nx,
                ny,
                cell_size_m: 0.002,
                outline_semi_axes_m: [
                    nx as f64 * 0.002 * rng.gen_range(0.3..0.49),
                    ny as f64 * 0.002 * rng.gen_range(0.3..0.49),
                ],
                texture: TextureSpec {
                    correlation_length_m: rng.gen_range(0.0..0.006),
                    mean_hwc: rng.gen_range(0.0..1.0),
                    seed: rng.gen(),
                },
                lesion: LesionSpec {
                    center_m: [0.0, 0.0],
                    radius_m: 0.002,
                    proportion: rng.gen_range(0.0..=1.0),
                },
                seed: rng.gen(),
            };
            let pair = generate(&spec).unwrap();
            pair.healthy.validate().unwrap();
            pair.unhealthy.validate().unwrap();
            rows += 2 * spec.n_pixels();
        }
    }

    #[test]
    fn identical_specs_generate_identical_phantoms() {
        let spec = base_spec();
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(a.healthy.values, b.healthy.values);
        assert_eq!(a.unhealthy.values, b.unhealthy.values);
        assert_eq!(a.lesion_mask, b.lesion_mask);
    }

    #[test]
    fn support_of_the_difference_equals_the_lesion_mask() {
        let pair = generate(&base_spec()).unwrap();
        for pix in 0..pair.spec.n_pixels() {
            let differs = (0..N_MATERIALS)
                .any(|m| pair.healthy.get(pix, m) != pair.unhealthy.get(pix, m));
            assert_eq!(differs, pair.lesion_mask[pix], "pixel {pix}");
        }
        assert!(pair.lesion_mask.iter().any(|&m| m));
    }

    #[test]
    fn prior_matches_healthy_and_round_trips() {
        let pair = generate(&base_spec()).unwrap();
        let v = prior_from_healthy(&pair);
        let n = pair.spec.n_pixels();
        assert_eq!(v.len(), 3 * n);
        assert!(v[2 * n..].iter().all(|&z| z == 0.0));
        let shape = StackShape::new(n, N_MATERIALS).unwrap();
        let back = MixtureField::from_stacked(&v, shape).unwrap();
        assert_eq!(back, pair.healthy);
    }

    #[test]
    fn rejects_invalid_specs() {
        let mut s = base_spec();
        s.lesion.radius_m = 0.0005; // below one cell
        assert!(generate(&s).is_err());
        let mut s = base_spec();
        s.lesion.center_m = [0.020, 0.0]; // disk pokes through the outline
        assert!(generate(&s).is_err());
        let mut s = base_spec();
        s.lesion.proportion = 1.5;
        assert!(generate(&s).is_err());
    }
}
