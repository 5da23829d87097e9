//! End-to-end experiment harness: phantom -> FDFD simulation -> Born
//! linearization -> delta-sweep solve -> detection metrics -> artifacts
//! (per-material PGM heatmaps, metrics CSV, JSON report).

use std::path::Path;
use std::time::Instant;

use num_complex::Complex64;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{DeltaReference, ExperimentConfig};
use crate::forward::{background_fields, simulate_measurements, ArrayGeometry, Grid2D, MeasurementSet};
use crate::io::{load_array, save_array, save_pgm, Array};
use crate::model::{
    adjusted_measurements, assemble_jacobian, born_error, eps_per_freq, BornOperator, N_MATERIALS,
};
use crate::operator::SensingOperator;
use crate::phantom::{generate, prior_from_healthy, PhantomPair};
use crate::prox::l2_norm_complex;
use crate::solver::{solve, SolveReport, UnmixProblem};
use crate::stack::StackShape;
use crate::{Result, UnmixError};

/// Lesion-detection metrics for one reconstructed mixture.
#[derive(Debug, Clone, Serialize)]
pub struct DetectionMetrics {
    /// Largest cancer proportion over pixels inside the lesion mask.
    pub peak_z3_in_lesion: f64,
    pub peak_z3_outside: f64,
    /// Distance in cells between the z3-weighted centroid (restricted to
    /// z3 >= 0.1) and the true lesion center; absent when nothing crosses
    /// the threshold.
    pub centroid_error_cells: Option<f64>,
    /// F1 of {z3 >= 0.1} against {true z3 >= 0.1}.
    pub support_f1: f64,
    /// Peak inside at least twice the peak outside.
    pub detected: bool,
}

pub const SUPPORT_THRESHOLD: f64 = 0.1;

/// Metrics for a stacked solution against the phantom ground truth.
pub fn detection_metrics(z: &[f64], pair: &PhantomPair) -> Result<DetectionMetrics> {
    let n = pair.spec.n_pixels();
    if z.len() != N_MATERIALS * n {
        return Err(UnmixError::InvalidArgument(format!(
            "solution length {} != 3 * {n}",
            z.len()
        )));
    }
    let z3 = &z[2 * n..];
    let mut peak_in = 0.0f64;
    let mut peak_out = 0.0f64;
    for (pix, &v) in z3.iter().enumerate() {
        if pair.lesion_mask[pix] {
            peak_in = peak_in.max(v);
        } else {
            peak_out = peak_out.max(v);
        }
    }

    let nx = pair.spec.nx;
    let cell = pair.spec.cell_size_m;
    let (mut wx, mut wy, mut wsum) = (0.0, 0.0, 0.0);
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    for pix in 0..n {
        let predicted = z3[pix] >= SUPPORT_THRESHOLD;
        let truth = pair.unhealthy.get(pix, 2) >= SUPPORT_THRESHOLD;
        match (predicted, truth) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
        if predicted {
            wx += z3[pix] * (pix % nx) as f64;
            wy += z3[pix] * (pix / nx) as f64;
            wsum += z3[pix];
        }
    }
    let centroid_error_cells = if wsum > 0.0 {
        // True center in fractional pixel coordinates.
        let cx = pair.spec.lesion.center_m[0] / cell + nx as f64 / 2.0 - 0.5;
        let cy = pair.spec.lesion.center_m[1] / cell + pair.spec.ny as f64 / 2.0 - 0.5;
        Some(((wx / wsum - cx).powi(2) + (wy / wsum - cy).powi(2)).sqrt())
    } else {
        None
    };
    let support_f1 = if 2 * tp + fp + fn_ == 0 {
        1.0 // no lesion anywhere and none predicted
    } else {
        2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
    };
    Ok(DetectionMetrics {
        peak_z3_in_lesion: peak_in,
        peak_z3_outside: peak_out,
        centroid_error_cells,
        support_f1,
        detected: peak_in > 0.0 && peak_in >= 2.0 * peak_out,
    })
}

/// Per-delta summary recorded in the report and the CSV.
#[derive(Debug, Clone, Serialize)]
pub struct DeltaSummary {
    pub delta_fraction: f64,
    pub delta_abs: f64,
    pub residual_norm: f64,
    pub objective_l1: f64,
    pub outer_iterations: usize,
    pub total_inner_iterations: usize,
    pub converged: bool,
    pub infeasible_suspected: bool,
    pub max_prior_deviation: f64,
    pub metrics: DetectionMetrics,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub config_hash: String,
    /// ||y - y_prior||_2 / ||y_hat||_2: the measured healthy/unhealthy
    /// discrepancy fraction.
    pub discrepancy_fraction: f64,
    /// Linearization error fraction (independent of delta).
    pub born_error: f64,
    pub reference_norm: f64,
    pub results: Vec<DeltaSummary>,
    pub simulation_cached: bool,
    pub timings_s: Timings,
}

#[derive(Debug, Clone, Serialize)]
pub struct Timings {
    pub simulate: f64,
    pub solve_total: f64,
}

/// Simulation products: measurements for both phantoms plus the Born
/// operator built from the healthy background fields.
pub struct SimulatedData {
    pub y: MeasurementSet,
    pub y_prior: MeasurementSet,
    pub operator: BornOperator,
    pub from_cache: bool,
}

/// Hash of everything the simulation stage depends on.
fn simulation_hash(config: &ExperimentConfig) -> Result<String> {
    #[derive(Serialize)]
    struct SimKey<'a> {
        phantom: &'a crate::phantom::PhantomSpec,
        array: &'a crate::config::ArrayConfig,
        grid: &'a crate::config::GridConfig,
        tissues: &'a crate::model::TissueModel,
        noise: &'a crate::config::NoiseConfig,
    }
    let key = SimKey {
        phantom: &config.phantom,
        array: &config.array,
        grid: &config.grid,
        tissues: &config.tissues,
        noise: &config.noise,
    };
    let text = toml::to_string(&key).map_err(|e| UnmixError::Config(e.to_string()))?;
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    Ok(format!("{:x}", hasher.finalize()))
}

fn measurement_array(ms: &MeasurementSet) -> Array {
    Array::Complex64 {
        dims: vec![ms.n_freq as u64, ms.n_tx as u64, ms.n_rx as u64],
        data: ms.values.clone(),
    }
}

fn measurement_from_array(array: &Array) -> Result<MeasurementSet> {
    let dims = array.dims();
    if dims.len() != 3 {
        return Err(UnmixError::InvalidState("measurement dump must be rank 3".into()));
    }
    Ok(MeasurementSet {
        n_tx: dims[1] as usize,
        n_rx: dims[2] as usize,
        n_freq: dims[0] as usize,
        values: array.as_complex()?.to_vec(),
    })
}

fn fields_array(fields: &[Vec<Vec<Complex64>>]) -> Array {
    let n_freq = fields.len();
    let n_ant = fields[0].len();
    let n_pix = fields[0][0].len();
    let data = fields.iter().flatten().flatten().copied().collect();
    Array::Complex64 { dims: vec![n_freq as u64, n_ant as u64, n_pix as u64], data }
}

fn fields_from_array(array: &Array) -> Result<Vec<Vec<Vec<Complex64>>>> {
    let dims = array.dims();
    if dims.len() != 3 {
        return Err(UnmixError::InvalidState("field dump must be rank 3".into()));
    }
    let (n_freq, n_ant, n_pix) = (dims[0] as usize, dims[1] as usize, dims[2] as usize);
    let data = array.as_complex()?;
    let mut out = Vec::with_capacity(n_freq);
    for f in 0..n_freq {
        let mut per_ant = Vec::with_capacity(n_ant);
        for a in 0..n_ant {
            let start = (f * n_ant + a) * n_pix;
            per_ant.push(data[start..start + n_pix].to_vec());
        }
        out.push(per_ant);
    }
    Ok(out)
}

fn try_load_cached(
    config: &ExperimentConfig,
    dir: &Path,
    hash: &str,
) -> Option<SimulatedData> {
    let stored = std::fs::read_to_string(dir.join("sim.hash")).ok()?;
    if stored.trim() != hash {
        return None;
    }
    let y = measurement_from_array(&load_array(&dir.join("y.umxa")).ok()?).ok()?;
    let y_prior = measurement_from_array(&load_array(&dir.join("y_prior.umxa")).ok()?).ok()?;
    let tx = fields_from_array(&load_array(&dir.join("bg_tx.umxa")).ok()?).ok()?;
    let rx = fields_from_array(&load_array(&dir.join("bg_rx.umxa")).ok()?).ok()?;
    let cell = config.phantom.cell_size_m;
    let operator = BornOperator::new(
        config.phantom.n_pixels(),
        config.array.frequencies(),
        cell * cell,
        tx,
        rx,
        &config.tissues,
    )
    .ok()?;
    if operator.rows() != y.len() || y.len() != y_prior.len() {
        return None;
    }
    Some(SimulatedData { y, y_prior, operator, from_cache: true })
}

/// Run (or reload) the simulation stage: full FDFD measurements of both
/// phantoms, background fields of the healthy one, optional measurement
/// noise. Results are cached in the output directory keyed on the hash of
/// the upstream config sections.
pub fn simulate_stage(
    config: &ExperimentConfig,
    grid: &Grid2D,
    geometry: &ArrayGeometry,
    pair: &PhantomPair,
    out_dir: &Path,
) -> Result<SimulatedData> {
    let hash = simulation_hash(config)?;
    if let Some(cached) = try_load_cached(config, out_dir, &hash) {
        return Ok(cached);
    }

    let frequencies = &geometry.frequencies;
    let eps_healthy = eps_per_freq(grid, &pair.healthy, &config.tissues, frequencies)?;
    let eps_unhealthy = eps_per_freq(grid, &pair.unhealthy, &config.tissues, frequencies)?;
    let y_prior = simulate_measurements(grid, geometry, &eps_healthy)?;
    let mut y = simulate_measurements(grid, geometry, &eps_unhealthy)?;
    if config.noise.relative > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(config.noise.seed);
        let norm = l2_norm_complex(&y.values);
        // E[||noise||_2] = relative * ||y||_2.
        let sigma = config.noise.relative * norm / (2.0 * y.len() as f64).sqrt();
        for v in &mut y.values {
            *v += Complex64::new(
                sigma * rng.sample::<f64, _>(StandardNormal),
                sigma * rng.sample::<f64, _>(StandardNormal),
            );
        }
    }
    let bg = background_fields(grid, geometry, &eps_healthy)?;
    let operator = assemble_jacobian(&bg, &config.tissues, grid, geometry)?;

    std::fs::create_dir_all(out_dir)?;
    save_array(&out_dir.join("y.umxa"), &measurement_array(&y))?;
    save_array(&out_dir.join("y_prior.umxa"), &measurement_array(&y_prior))?;
    save_array(&out_dir.join("bg_tx.umxa"), &fields_array(operator.tx_fields()))?;
    save_array(&out_dir.join("bg_rx.umxa"), &fields_array(operator.rx_fields()))?;
    std::fs::write(out_dir.join("sim.hash"), &hash)?;
    Ok(SimulatedData { y, y_prior, operator, from_cache: false })
}

fn write_metrics_csv(path: &Path, rows: &[DeltaSummary]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| UnmixError::Config(e.to_string()))?;
    w.write_record([
        "delta_fraction",
        "delta_abs",
        "residual_norm",
        "objective_l1",
        "outer_iterations",
        "converged",
        "peak_z3_in_lesion",
        "peak_z3_outside",
        "centroid_error_cells",
        "support_f1",
        "detected",
        "max_prior_deviation",
    ])
    .map_err(|e| UnmixError::Config(e.to_string()))?;
    for r in rows {
        let centroid = r
            .metrics
            .centroid_error_cells
            .map(|c| c.to_string())
            .unwrap_or_default();
        w.write_record([
            r.delta_fraction.to_string(),
            r.delta_abs.to_string(),
            r.residual_norm.to_string(),
            r.objective_l1.to_string(),
            r.outer_iterations.to_string(),
            r.converged.to_string(),
            r.metrics.peak_z3_in_lesion.to_string(),
            r.metrics.peak_z3_outside.to_string(),
            centroid,
            r.metrics.support_f1.to_string(),
            r.metrics.detected.to_string(),
            r.max_prior_deviation.to_string(),
        ])
        .map_err(|e| UnmixError::Config(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

fn stage<T>(name: &str, result: Result<T>) -> Result<T> {
    result.map_err(|e| match e {
        UnmixError::Config(msg) => UnmixError::Config(format!("{name}: {msg}")),
        UnmixError::InvalidArgument(msg) => UnmixError::InvalidArgument(format!("{name}: {msg}")),
        other => other,
    })
}

/// Full pipeline over the config's delta list.
pub fn run(config: &ExperimentConfig) -> Result<ExperimentReport> {
    run_with_deltas(config, &config.delta.fractions)
}

/// Delta sweep over an explicit list; the phantom, simulation, and Jacobian
/// are shared across all deltas and the solves run in parallel.
pub fn sweep_delta(config: &ExperimentConfig, deltas: &[f64]) -> Result<ExperimentReport> {
    if deltas.len() < 2 {
        return Err(UnmixError::InvalidArgument("a sweep needs at least 2 deltas".into()));
    }
    let mut sorted = deltas.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(UnmixError::InvalidArgument("sweep deltas must be distinct".into()));
    }
    run_with_deltas(config, deltas)
}

fn run_with_deltas(config: &ExperimentConfig, fractions: &[f64]) -> Result<ExperimentReport> {
    stage("config", config.validate())?;
    if fractions.is_empty() || fractions.iter().any(|&f| !(f > 0.0)) {
        return Err(UnmixError::InvalidArgument("delta fractions must be positive".into()));
    }
    let out_dir = config.output_dir.clone();
    std::fs::create_dir_all(&out_dir)?;
    std::fs::write(out_dir.join("config.toml"), config.to_toml_string()?)?;

    let grid = stage("grid", config.simulation_grid())?;
    let geometry = config.geometry();
    let pair = stage("phantom", generate(&config.phantom))?;
    let v = prior_from_healthy(&pair);
    let z_true = pair.unhealthy.stacked();
    let n = config.phantom.n_pixels();
    let shape = StackShape::new(n, N_MATERIALS)?;

    let t0 = Instant::now();
    let sim = stage("simulate", simulate_stage(config, &grid, &geometry, &pair, &out_dir))?;
    let simulate_s = t0.elapsed().as_secs_f64();

    let y_hat = stage(
        "linearize",
        adjusted_measurements(&sim.y, &sim.y_prior, &sim.operator, &v),
    )?;
    let y_hat_norm = l2_norm_complex(&y_hat);
    let reference_norm = match config.delta.reference {
        DeltaReference::YHat => y_hat_norm,
        DeltaReference::Y => l2_norm_complex(&sim.y.values),
    };
    let born = stage("linearize", born_error(&sim.y, &sim.y_prior, &sim.operator, &v, &z_true))?;
    let discrepancy = {
        let num: f64 = sim
            .y
            .values
            .iter()
            .zip(&sim.y_prior.values)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        num / y_hat_norm.max(f64::MIN_POSITIVE)
    };

    let t1 = Instant::now();
    let results: Vec<DeltaSummary> = fractions
        .par_iter()
        .enumerate()
        .map(|(i, &fraction)| -> Result<DeltaSummary> {
            let delta = fraction * reference_norm;
            let problem = UnmixProblem {
                operator: &sim.operator,
                y_hat: y_hat.clone(),
                prior: v.clone(),
                delta,
                shape,
            };
            let report = solve(&problem, &config.solver)?;
            let metrics = detection_metrics(&report.z_final, &pair)?;
            write_delta_artifacts(&out_dir, i, config, &report)?;
            let max_prior_deviation = report
                .z_final
                .iter()
                .zip(&v)
                .map(|(z, v)| (z - v).abs())
                .fold(0.0, f64::max);
            Ok(DeltaSummary {
                delta_fraction: fraction,
                delta_abs: delta,
                residual_norm: report.residual_norm,
                objective_l1: report.objective_l1,
                outer_iterations: report.outer_iterations,
                total_inner_iterations: report.total_inner_iterations,
                converged: report.converged,
                infeasible_suspected: report.infeasible_suspected,
                max_prior_deviation,
                metrics,
            })
        })
        .collect::<Result<_>>()?;
    let solve_s = t1.elapsed().as_secs_f64();

    write_metrics_csv(&out_dir.join("metrics.csv"), &results)?;
    let report = ExperimentReport {
        config_hash: config.hash()?,
        discrepancy_fraction: discrepancy,
        born_error: born,
        reference_norm,
        results,
        simulation_cached: sim.from_cache,
        timings_s: Timings { simulate: simulate_s, solve_total: solve_s },
    };
    let json =
        serde_json::to_string_pretty(&report).map_err(|e| UnmixError::Config(e.to_string()))?;
    std::fs::write(out_dir.join("report.json"), json)?;
    Ok(report)
}

fn write_delta_artifacts(
    out_dir: &Path,
    index: usize,
    config: &ExperimentConfig,
    report: &SolveReport,
) -> Result<()> {
    let n = config.phantom.n_pixels();
    save_array(
        &out_dir.join(format!("z_delta_{index:02}.umxa")),
        &Array::F64 {
            dims: vec![N_MATERIALS as u64, config.phantom.ny as u64, config.phantom.nx as u64],
            data: report.z_final.clone(),
        },
    )?;
    for material in 0..N_MATERIALS {
        let block = &report.z_final[material * n..(material + 1) * n];
        save_pgm(
            &out_dir.join(format!("material_{material}_delta_{index:02}.pgm")),
            config.phantom.nx,
            config.phantom.ny,
            block,
        )?;
    }
    Ok(())
}
