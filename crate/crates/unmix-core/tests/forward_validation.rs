//! FDFD validation against analytic oracles: the free-space Green's function,
//! the dispersion relation, reciprocity, PML self-convergence, and grid
//! refinement.

mod common;

use common::green_2d;
use num_complex::Complex64;
use unmix_core::forward::{
    assemble_helmholtz, simulate_measurements, solve_forward, ArrayGeometry, Grid2D, PointSource,
    SPEED_OF_LIGHT,
};

fn homogeneous_grid(n: usize, cell: f64, pml: usize) -> (Grid2D, Vec<Complex64>) {
    let grid = Grid2D::new(n, n, cell, pml, vec![false; n * n]).unwrap();
    let eps = vec![Complex64::new(1.0, 0.0); n * n];
    (grid, eps)
}

#[test]
fn homogeneous_field_matches_hankel_oracle() {
    let cell = 0.002;
    let n = 120;
    let pml = 10;
    let (grid, eps) = homogeneous_grid(n, cell, pml);
    let freq = 1.0e9;
    let k = 2.0 * std::f64::consts::PI * freq / SPEED_OF_LIGHT;

    let mut system = assemble_helmholtz(&grid, &eps, freq).unwrap();
    let src = PointSource::unit([0.0, 0.0]);
    let field = &solve_forward(&mut system, &grid, &[src]).unwrap()[0];
    let (sx, sy) = grid.nearest_cell([0.0, 0.0]).unwrap();

    let r_min = 3.0 * cell;
    let r_max = (n as f64 / 2.0 - pml as f64) * cell;
    let mut checked = 0;
    for iy in pml..n - pml {
        for ix in pml..n - pml {
            let dx = (ix as f64 - sx as f64) * cell;
            let dy = (iy as f64 - sy as f64) * cell;
            let r = (dx * dx + dy * dy).sqrt();
            if r < r_min || r > r_max {
                continue;
            }
            let sim = field.values[grid.cell_index(ix, iy)];
            let exact = green_2d(k, r);
            let amp_err = (sim.norm() - exact.norm()).abs() / exact.norm();
            let mut phase_err = (sim.arg() - exact.arg()).abs();
            if phase_err > std::f64::consts::PI {
                phase_err = 2.0 * std::f64::consts::PI - phase_err;
            }
            assert!(
                amp_err < 0.05,
                "amplitude error {amp_err:.4} at r = {:.1} cells",
                r / cell
            );
            assert!(
                phase_err < 5.0_f64.to_radians(),
                "phase error {:.2} deg at r = {:.1} cells",
                phase_err.to_degrees(),
                r / cell
            );
            checked += 1;
        }
    }
    assert!(checked > 1000, "annulus too small: {checked} samples");
}

#[test]
fn quadrupling_permittivity_halves_the_wavelength() {
    // First zero crossing of Re(E) along a ray sits at the first zero of
    // Y0(k sqrt(eps) r); quadrupling eps doubles the wavenumber and halves it.
    let cell = 0.002;
    let n = 140;
    let (grid, _) = homogeneous_grid(n, cell, 10);
    let freq = 1.5e9;

    let first_recrossing = |eps_val: f64| -> f64 {
        let eps = vec![Complex64::new(eps_val, 0.0); n * n];
        let mut system = assemble_helmholtz(&grid, &eps, freq).unwrap();
        let field = &solve_forward(&mut system, &grid, &[PointSource::unit([0.0, 0.0])]).unwrap()[0];
        let (sx, sy) = grid.nearest_cell([0.0, 0.0]).unwrap();
        let mut prev = f64::NAN;
        for step in 1..(n / 2 - 12) {
            let v = field.values[grid.cell_index(sx + step, sy)].re;
            if !prev.is_nan() && prev.signum() != v.signum() {
                // Linear interpolation of the crossing.
                let frac = prev / (prev - v);
                return (step as f64 - 1.0 + frac) * cell;
            }
            prev = v;
        }
        panic!("no zero crossing of Re(E) found");
    };

    let r1 = first_recrossing(1.0);
    let r4 = first_recrossing(4.0);
    let ratio = r1 / r4;
    assert!((ratio - 2.0).abs() < 0.2, "crossing ratio {ratio} (r1={r1}, r4={r4})");
}

#[test]
fn reciprocity_in_homogeneous_and_heterogeneous_media() {
    let cell = 0.002;
    let n = 80;
    let (grid, mut eps) = homogeneous_grid(n, cell, 10);
    let geom = ArrayGeometry::circular(4, 0.04, vec![1.0e9]);

    let check = |eps: &Vec<Complex64>| {
        let ms = simulate_measurements(&grid, &geom, std::slice::from_ref(eps)).unwrap();
        for tx in 0..4 {
            for rx in 0..4 {
                let a = ms.get(tx, rx, 0);
                let b = ms.get(rx, tx, 0);
                assert!(
                    (a - b).norm() <= 1e-8 * a.norm().max(b.norm()),
                    "tx={tx} rx={rx}: {a} vs {b}"
                );
            }
        }
    };
    check(&eps);

    // Lossy heterogeneous blob off-center.
    for iy in 30..50 {
        for ix in 25..45 {
            eps[grid.cell_index(ix, iy)] = Complex64::new(35.0, -8.0);
        }
    }
    check(&eps);
}

#[test]
fn doubling_pml_thickness_changes_interior_by_less_than_one_percent() {
    let cell = 0.002;
    let freq = 0.9e9;
    // Same physical interior; the thicker-PML grid adds 10 cells per side.
    let (grid_a, eps_a) = homogeneous_grid(80, cell, 10);
    let (grid_b, eps_b) = homogeneous_grid(100, cell, 20);

    let mut sys_a = assemble_helmholtz(&grid_a, &eps_a, freq).unwrap();
    let mut sys_b = assemble_helmholtz(&grid_b, &eps_b, freq).unwrap();
    let src = PointSource::unit([0.004, -0.002]);
    let fa = &solve_forward(&mut sys_a, &grid_a, &[src]).unwrap()[0];
    let fb = &solve_forward(&mut sys_b, &grid_b, &[src]).unwrap()[0];

    let mut max_rel = 0.0f64;
    for iy in 15..65usize {
        for ix in 15..65usize {
            let pa = grid_a.cell_center(ix, iy);
            let (bx, by) = grid_b.nearest_cell(pa).unwrap();
            let va = fa.values[grid_a.cell_index(ix, iy)];
            let vb = fb.values[grid_b.cell_index(bx, by)];
            let rel = (va - vb).norm() / vb.norm().max(1e-30);
            // Skip the source cell singularity neighborhood.
            let d = ((pa[0] - src.position[0]).powi(2) + (pa[1] - src.position[1]).powi(2)).sqrt();
            if d > 3.0 * cell {
                max_rel = max_rel.max(rel);
            }
        }
    }
    assert!(max_rel < 0.01, "max interior change {max_rel:.4}");
}

#[test]
fn halving_cell_size_changes_received_fields_by_less_than_five_percent() {
    let freq = 1.5e9;
    // Dense tissue blob eps ~ 36: wavelength ~33 mm, 16 cells/wavelength coarse.
    let build = |n: usize, cell: f64| -> (Grid2D, Vec<Complex64>) {
        let grid = Grid2D::new(n, n, cell, 10, vec![false; n * n]).unwrap();
        let mut eps = vec![Complex64::new(1.0, 0.0); n * n];
        for iy in 0..n {
            for ix in 0..n {
                let [x, y] = grid.cell_center(ix, iy);
                let r = (x * x + y * y).sqrt();
                // Smooth edge over 4 mm so both resolutions sample the same
                // medium; a staircased boundary would change the scatterer
                // itself between grids.
                let w = ((0.015 - r) / 0.004).clamp(0.0, 1.0);
                let t = w * w * (3.0 - 2.0 * w);
                // Peak eps 25: 20 cells per wavelength at 1.5 GHz on the
                // coarse grid, comfortably past the 10-cell validity floor.
                eps[grid.cell_index(ix, iy)] =
                    Complex64::new(1.0 + 24.0 * t, -5.0 * t);
            }
        }
        (grid, eps)
    };
    let (grid_c, eps_c) = build(80, 0.002);
    // Odd fine dimension puts fine cell centers at integer millimeters, which
    // include the coarse centers; antennas then sit on exact cell centers of
    // both grids and no snapping offset pollutes the comparison.
    let (grid_f, eps_f) = build(161, 0.001);
    let positions = vec![
        [0.049, 0.001],
        [-0.049, 0.001],
        [0.001, 0.049],
        [0.001, -0.049],
    ];
    let geom = ArrayGeometry {
        transmitters: positions.clone(),
        receivers: positions,
        frequencies: vec![freq],
    };

    let coarse = simulate_measurements(&grid_c, &geom, &[eps_c]).unwrap();
    let fine = simulate_measurements(&grid_f, &geom, &[eps_f]).unwrap();
    // Monostatic (tx == rx) entries sample the log-singular self-field at the
    // source cell and cannot converge under refinement; compare bistatic ones.
    for tx in 0..4 {
        for rx in 0..4 {
            if tx == rx {
                continue;
            }
            let a = coarse.get(tx, rx, 0);
            let b = fine.get(tx, rx, 0);
            let rel = (a - b).norm() / b.norm();
            assert!(rel < 0.05, "refinement change {rel:.4} ({a} vs {b})");
        }
    }
}
