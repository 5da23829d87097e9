//! Born Jacobian validation: adjoint consistency, agreement between the
//! matrix-free and dense forms, the reciprocity-based entry formula, and a
//! finite-difference check against the full FDFD forward map.

use num_complex::Complex64;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use unmix_core::forward::{
    background_fields, simulate_measurements, ArrayGeometry, Grid2D, MeasurementSet,
    SPEED_OF_LIGHT,
};
use unmix_core::model::{
    adjusted_measurements, assemble_jacobian, born_error, eps_per_freq, BornOperator,
    MixtureField, TissueModel, N_MATERIALS,
};
use unmix_core::operator::SensingOperator;

struct Scene {
    grid: Grid2D,
    geometry: ArrayGeometry,
    tissues: TissueModel,
    prior: MixtureField,
}

fn scene() -> Scene {
    let n = 48;
    let cell = 0.002;
    // Central 8x8 imaging block.
    let mut mask = vec![false; n * n];
    for iy in 20..28 {
        for ix in 20..28 {
            mask[iy * n + ix] = true;
        }
    }
    let grid = Grid2D::new(n, n, cell, 10, mask).unwrap();
    let geometry = ArrayGeometry::circular(4, 0.026, vec![0.8e9, 1.2e9]);
    let tissues = TissueModel::default();
    let n_pix = grid.n_imaging();
    let prior =
        MixtureField::new(n_pix, N_MATERIALS, [0.7, 0.2, 0.1].repeat(n_pix)).unwrap();
    Scene { grid, geometry, tissues, prior }
}

fn jacobian(s: &Scene) -> BornOperator {
    let eps = eps_per_freq(&s.grid, &s.prior, &s.tissues, &s.geometry.frequencies).unwrap();
    let bg = background_fields(&s.grid, &s.geometry, &eps).unwrap();
    assemble_jacobian(&bg, &s.tissues, &s.grid, &s.geometry).unwrap()
}

#[test]
fn adjoint_identity_holds_to_1e10() {
    let s = scene();
    let a = jacobian(&s);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..5 {
        let x: Vec<f64> = (0..a.cols()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y: Vec<Complex64> = (0..a.rows())
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let ax = a.apply(&x);
        let aty = a.adjoint(&y);
        let lhs: Complex64 = ax.iter().zip(&y).map(|(p, q)| p * q.conj()).sum();
        let rhs: Complex64 = aty.iter().zip(&x).map(|(p, &q)| p.conj() * q).sum();
        assert!(
            (lhs - rhs).norm() <= 1e-10 * lhs.norm().max(rhs.norm()),
            "<Ax,y> = {lhs}, <x, A^H y> = {rhs}"
        );
    }
}

#[test]
fn dense_form_matches_matrix_free() {
    let s = scene();
    let a = jacobian(&s);
    let dense = a.to_dense().unwrap();
    assert_eq!(dense.rows(), a.rows());
    assert_eq!(dense.cols(), a.cols());
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let x: Vec<f64> = (0..a.cols()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let y: Vec<Complex64> = (0..a.rows())
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let scale: f64 = a.apply(&x).iter().map(|v| v.norm()).fold(0.0, f64::max);
    for (p, q) in a.apply(&x).iter().zip(dense.apply(&x)) {
        assert!((p - q).norm() <= 1e-12 * scale);
    }
    let ascale: f64 = a.adjoint(&y).iter().map(|v| v.norm()).fold(0.0, f64::max);
    for (p, q) in a.adjoint(&y).iter().zip(dense.adjoint(&y)) {
        assert!((p - q).norm() <= 1e-12 * ascale);
    }
}

#[test]
fn entries_follow_the_reciprocity_formula() {
    // Column (pixel, material) of the dense matrix must equal
    // k0^2 * E_bg(tx -> pixel) * E_bg(rx -> pixel) * cell_area * eps_r(f)
    // recomputed here from the raw background field tables.
    let s = scene();
    let eps = eps_per_freq(&s.grid, &s.prior, &s.tissues, &s.geometry.frequencies).unwrap();
    let bg = background_fields(&s.grid, &s.geometry, &eps).unwrap();
    let dense = assemble_jacobian(&bg, &s.tissues, &s.grid, &s.geometry)
        .unwrap()
        .to_dense()
        .unwrap();
    let cells = s.grid.imaging_cells();
    let n_pix = cells.len();
    let area = s.grid.cell_size * s.grid.cell_size;
    let n_rx = s.geometry.receivers.len();
    let n_tx = s.geometry.transmitters.len();
    for (f, &freq) in s.geometry.frequencies.iter().enumerate() {
        let k0 = 2.0 * std::f64::consts::PI * freq / SPEED_OF_LIGHT;
        let eps_mat = s.tissues.permittivities(freq);
        for (pix, &cell) in cells.iter().enumerate().step_by(13) {
            for material in 0..N_MATERIALS {
                let col = material * n_pix + pix;
                for tx in 0..n_tx {
                    for rx in 0..n_rx {
                        let row = f * n_tx * n_rx + tx * n_rx + rx;
                        let want = k0 * k0
                            * bg.tx_fields[f][tx].values[cell]
                            * bg.rx_fields[f][rx].values[cell]
                            * area
                            * eps_mat[material];
                        let got = dense.entry(row, col);
                        assert!(
                            (got - want).norm() <= 1e-12 * want.norm(),
                            "row {row} col {col}: {got} vs {want}"
                        );
                    }
                }
            }
        }
    }
}

#[test]
fn material_blocks_scale_by_permittivity_ratio() {
    // At a fixed frequency, A_r = A_1 * (eps_r / eps_1): the field sensitivity
    // is shared and only the mixture derivative differs per material.
    let s = scene();
    let dense = jacobian(&s).to_dense().unwrap();
    let n_pix = s.grid.n_imaging();
    let n_pairs = s.geometry.transmitters.len() * s.geometry.receivers.len();
    for (f, &freq) in s.geometry.frequencies.iter().enumerate() {
        let eps_mat = s.tissues.permittivities(freq);
        for material in 1..N_MATERIALS {
            let ratio = eps_mat[material] / eps_mat[0];
            for row in f * n_pairs..(f + 1) * n_pairs {
                for pix in 0..n_pix {
                    let base = dense.entry(row, pix);
                    let got = dense.entry(row, material * n_pix + pix);
                    assert!((got - base * ratio).norm() <= 1e-12 * base.norm());
                }
            }
        }
    }
}

#[test]
fn jacobian_matches_full_fdfd_finite_difference() {
    // The reciprocity-assembled Jacobian is the exact derivative of the
    // discrete forward map, so a central difference of the full solver along
    // a simplex-preserving direction must agree to well under 1%.
    let s = scene();
    let a = jacobian(&s);
    let n_pix = s.grid.n_imaging();

    // Direction: move mass from HWC to cancer in a handful of pixels.
    let mut direction = vec![0.0; N_MATERIALS * n_pix];
    for &pix in &[3, 17, 30, 44, 58] {
        direction[pix] = -1.0; // HWC block
        direction[2 * n_pix + pix] = 1.0; // cancer block
    }
    let a_d = a.apply(&direction);

    let h = 1e-3;
    let shifted = |sign: f64| -> MeasurementSet {
        let mut z = s.prior.clone();
        for pix in 0..n_pix {
            for m in 0..N_MATERIALS {
                let v = z.get(pix, m) + sign * h * direction[m * n_pix + pix];
                z.set(pix, m, v);
            }
        }
        z.validate().unwrap();
        let eps = eps_per_freq(&s.grid, &z, &s.tissues, &s.geometry.frequencies).unwrap();
        simulate_measurements(&s.grid, &s.geometry, &eps).unwrap()
    };
    let y_plus = shifted(1.0);
    let y_minus = shifted(-1.0);

    let fd: Vec<Complex64> = y_plus
        .values
        .iter()
        .zip(&y_minus.values)
        .map(|(p, m)| (p - m) / (2.0 * h))
        .collect();
    let num: f64 = fd.iter().zip(&a_d).map(|(f, a)| (f - a).norm_sqr()).sum::<f64>().sqrt();
    let den: f64 = fd.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    assert!(num / den < 0.01, "relative Jacobian error {:.4}", num / den);
}

#[test]
fn adjusted_measurements_reduce_to_av_when_y_equals_prior() {
    let s = scene();
    let a = jacobian(&s);
    let eps = eps_per_freq(&s.grid, &s.prior, &s.tissues, &s.geometry.frequencies).unwrap();
    let y_prior = simulate_measurements(&s.grid, &s.geometry, &eps).unwrap();
    let v = s.prior.stacked();
    let y_hat = adjusted_measurements(&y_prior, &y_prior, &a, &v).unwrap();
    let av = a.apply(&v);
    let scale: f64 = av.iter().map(|v| v.norm()).fold(0.0, f64::max);
    for (p, q) in y_hat.iter().zip(&av) {
        assert!((p - q).norm() <= 1e-14 * scale);
    }
}

#[test]
fn born_error_vanishes_on_exactly_linear_data() {
    let s = scene();
    let a = jacobian(&s);
    let eps = eps_per_freq(&s.grid, &s.prior, &s.tissues, &s.geometry.frequencies).unwrap();
    let y_prior = simulate_measurements(&s.grid, &s.geometry, &eps).unwrap();
    let v = s.prior.stacked();
    let mut z_true = s.prior.clone();
    z_true.set(12, 0, 0.6);
    z_true.set(12, 2, 0.2);
    let z = z_true.stacked();
    let dz: Vec<f64> = z.iter().zip(&v).map(|(a, b)| a - b).collect();
    let a_dz = a.apply(&dz);
    let y = MeasurementSet {
        n_tx: y_prior.n_tx,
        n_rx: y_prior.n_rx,
        n_freq: y_prior.n_freq,
        values: y_prior.values.iter().zip(&a_dz).map(|(p, d)| p + d).collect(),
    };
    let err = born_error(&y, &y_prior, &a, &v, &z).unwrap();
    assert!(err < 1e-12, "Born error on synthetic linear data: {err}");
    // And the real nonlinear data carries a small but nonzero mismatch.
    let eps_true = eps_per_freq(&s.grid, &z_true, &s.tissues, &s.geometry.frequencies).unwrap();
    let y_full = simulate_measurements(&s.grid, &s.geometry, &eps_true).unwrap();
    let err_full = born_error(&y_full, &y_prior, &a, &v, &z).unwrap();
    assert!(err_full > 0.0 && err_full < 1.0, "full-solver Born error {err_full}");
}
