//! Stacked-variable bookkeeping for the single-variable recast of the
//! unmixing program: z = (z_1^T, ..., z_R^T)^T with N pixels and R materials.

use serde::{Deserialize, Serialize};

use crate::{Result, UnmixError};

/// Shape of the stacked unknown vector: `n_materials * n_pixels` entries,
/// material-major (all pixels of material 0, then material 1, ...).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StackShape {
    pub n_pixels: usize,
    pub n_materials: usize,
}

impl StackShape {
    pub fn new(n_pixels: usize, n_materials: usize) -> Result<Self> {
        if n_pixels == 0 {
            return Err(UnmixError::InvalidArgument("n_pixels must be positive".into()));
        }
        if n_materials < 2 {
            return Err(UnmixError::InvalidArgument("n_materials must be >= 2".into()));
        }
        Ok(Self { n_pixels, n_materials })
    }

    /// Total stacked length R*N.
    pub fn len(&self) -> usize {
        self.n_pixels * self.n_materials
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Index of (pixel, material) in the stacked vector.
    pub fn idx(&self, pixel: usize, material: usize) -> usize {
        debug_assert!(pixel < self.n_pixels && material < self.n_materials);
        material * self.n_pixels + pixel
    }

    /// Per-pixel sums across materials: the map D = 1_R^T (x) I_N.
    pub fn pixel_sums(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.len());
        let mut sums = vec![0.0; self.n_pixels];
        for r in 0..self.n_materials {
            let block = &x[r * self.n_pixels..(r + 1) * self.n_pixels];
            for (s, v) in sums.iter_mut().zip(block) {
                *s += v;
            }
        }
        sums
    }
}
