//! Closed-form proximal operators and projections used by the augmented
//! Lagrangian / FISTA solver.
//!
//! All four act on raw stacked arrays; the solver works in z-space and passes
//! a [`StackShape`] where pixel structure matters. Every operator is a pure
//! function of its inputs.

use num_complex::Complex64;

use crate::stack::StackShape;
use crate::{Result, UnmixError};

/// Soft-thresholding, the prox of `lambda * ||.||_1`.
///
/// Callers fold any quadratic scaling into `lambda` (the solver passes the
/// step size t as the effective threshold).
pub fn soft_threshold(x: &[f64], lambda: f64) -> Result<Vec<f64>> {
    if lambda < 0.0 || !lambda.is_finite() {
        return Err(UnmixError::InvalidArgument(format!(
            "soft_threshold lambda must be finite and >= 0, got {lambda}"
        )));
    }
    Ok(x.iter()
        .map(|&v| {
            if v > lambda {
                v - lambda
            } else if v < -lambda {
                v + lambda
            } else {
                0.0
            }
        })
        .collect())
}

/// Euclidean projection onto the l2 ball of radius `delta`.
///
/// `delta = 0` returns the zero vector (limit of the scaling formula).
pub fn project_l2_ball(x: &[Complex64], delta: f64) -> Result<Vec<Complex64>> {
    if delta < 0.0 || !delta.is_finite() {
        return Err(UnmixError::InvalidArgument(format!(
            "project_l2_ball delta must be finite and >= 0, got {delta}"
        )));
    }
    let norm = l2_norm_complex(x);
    if norm <= delta {
        Ok(x.to_vec())
    } else if norm == 0.0 {
        Ok(vec![Complex64::new(0.0, 0.0); x.len()])
    } else {
        let scale = delta / norm;
        Ok(x.iter().map(|&v| v * scale).collect())
    }
}

/// Euclidean projection onto the nonnegative orthant.
pub fn project_nonneg(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| v.max(0.0)).collect()
}

/// Euclidean projection onto the affine set { z : D z = 1_N }, where D sums
/// the R material blocks per pixel: x* = x + (1/R)(1 - D^T D x).
pub fn project_sum_one(x: &[f64], shape: StackShape) -> Result<Vec<f64>> {
    if x.len() != shape.len() {
        return Err(UnmixError::InvalidArgument(format!(
            "project_sum_one: length {} does not match shape {}x{}",
            x.len(),
            shape.n_pixels,
            shape.n_materials
        )));
    }
    let sums = shape.pixel_sums(x);
    let r_inv = 1.0 / shape.n_materials as f64;
    let mut out = x.to_vec();
    for m in 0..shape.n_materials {
        let block = &mut out[m * shape.n_pixels..(m + 1) * shape.n_pixels];
        for (v, s) in block.iter_mut().zip(&sums) {
            *v += r_inv * (1.0 - s);
        }
    }
    Ok(out)
}

/// Euclidean projection of one pixel's material proportions onto the
/// probability simplex { p : p >= 0, sum p = 1 }. Used as the final
/// feasibility polish on solver output; sort-based exact algorithm.
pub fn project_simplex(p: &[f64]) -> Vec<f64> {
    let mut sorted = p.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (k, &v) in sorted.iter().enumerate() {
        cumsum += v;
        let candidate = (cumsum - 1.0) / (k + 1) as f64;
        if v - candidate > 0.0 {
            theta = candidate;
        }
    }
    p.iter().map(|&v| (v - theta).max(0.0)).collect()
}

pub fn l2_norm_complex(x: &[Complex64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

pub(crate) fn l2_norm_real(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}
