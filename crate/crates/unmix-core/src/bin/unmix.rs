//! Command-line pipeline driver: phantom generation, FDFD simulation, Born
//! linearization, constrained solves, and delta sweeps, configured from a
//! TOML file. Exit codes: 0 success, 2 validation/config error, 3 numerical
//! or I/O failure.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use unmix_core::config::{DeltaReference, ExperimentConfig};
use unmix_core::experiment::{
    detection_metrics, simulate_stage, sweep_delta, ExperimentReport,
};
use unmix_core::io::{save_array, save_pgm, Array};
use unmix_core::model::{adjusted_measurements, born_error, N_MATERIALS};
use unmix_core::operator::SensingOperator;
use unmix_core::phantom::{generate, prior_from_healthy};
use unmix_core::prox::l2_norm_complex;
use unmix_core::solver::{solve, UnmixProblem};
use unmix_core::stack::StackShape;
use unmix_core::{Result, UnmixError};

#[derive(Parser)]
#[command(name = "unmix", about = "Constrained sparse unmixing of microwave measurements")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the configured output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the phantom seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl CommonArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        if let Some(seed) = self.seed {
            cfg.phantom.seed = seed;
            cfg.phantom.texture.seed = seed.wrapping_add(1);
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Comma-separated residual bounds as fractions of the reference norm;
    /// defaults to the config's delta list.
    #[arg(long, value_delimiter = ',')]
    delta_frac: Option<Vec<f64>>,
    /// Materialize the Jacobian as a dense matrix before solving.
    #[arg(long, conflicts_with = "matrix_free")]
    dense: bool,
    /// Keep the Jacobian matrix-free (the default).
    #[arg(long)]
    matrix_free: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the phantom pair and write mixture heatmaps.
    Generate(CommonArgs),
    /// Simulate (or reload) the FDFD measurements and background fields.
    Simulate(CommonArgs),
    /// Form the adjusted measurements and report the linearization error.
    Linearize(CommonArgs),
    /// Solve the unmixing program at one delta.
    Solve(SolveArgs),
    /// Run the full delta sweep.
    Sweep(SolveArgs),
    /// Summarize an existing report.json.
    Report {
        /// Output directory of a previous run.
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(args) => cmd_generate(&args.load()?),
        Command::Simulate(args) => cmd_simulate(&args.load()?),
        Command::Linearize(args) => cmd_linearize(&args.load()?),
        Command::Solve(args) => {
            let cfg = args.common.load()?;
            cmd_solve(&cfg, &args)
        }
        Command::Sweep(args) => {
            let cfg = args.common.load()?;
            let fractions =
                args.delta_frac.clone().unwrap_or_else(|| cfg.delta.fractions.clone());
            let report = sweep_delta(&cfg, &fractions)?;
            print_report(&report);
            Ok(())
        }
        Command::Report { out } => cmd_report(&out),
    }
}

fn cmd_generate(cfg: &ExperimentConfig) -> Result<()> {
    let pair = generate(&cfg.phantom)?;
    let out = &cfg.output_dir;
    std::fs::create_dir_all(out)?;
    let n = cfg.phantom.n_pixels();
    for (name, field) in [("healthy", &pair.healthy), ("unhealthy", &pair.unhealthy)] {
        let stacked = field.stacked();
        save_array(
            &out.join(format!("phantom_{name}.umxa")),
            &Array::F64 {
                dims: vec![N_MATERIALS as u64, cfg.phantom.ny as u64, cfg.phantom.nx as u64],
                data: stacked.clone(),
            },
        )?;
        for material in 0..N_MATERIALS {
            save_pgm(
                &out.join(format!("phantom_{name}_material_{material}.pgm")),
                cfg.phantom.nx,
                cfg.phantom.ny,
                &stacked[material * n..(material + 1) * n],
            )?;
        }
    }
    save_array(
        &out.join("lesion_mask.umxa"),
        &Array::U8 {
            dims: vec![cfg.phantom.ny as u64, cfg.phantom.nx as u64],
            data: pair.lesion_mask.iter().map(|&m| m as u8).collect(),
        },
    )?;
    println!(
        "phantom: {} pixels, lesion covers {} cells",
        n,
        pair.lesion_mask.iter().filter(|&&m| m).count()
    );
    Ok(())
}

fn cmd_simulate(cfg: &ExperimentConfig) -> Result<()> {
    let grid = cfg.simulation_grid()?;
    let geometry = cfg.geometry();
    let pair = generate(&cfg.phantom)?;
    let sim = simulate_stage(cfg, &grid, &geometry, &pair, &cfg.output_dir)?;
    println!(
        "measurements: {} ({} tx x {} rx x {} freq){}",
        sim.y.len(),
        sim.y.n_tx,
        sim.y.n_rx,
        sim.y.n_freq,
        if sim.from_cache { " [cached]" } else { "" }
    );
    Ok(())
}

fn cmd_linearize(cfg: &ExperimentConfig) -> Result<()> {
    let grid = cfg.simulation_grid()?;
    let geometry = cfg.geometry();
    let pair = generate(&cfg.phantom)?;
    let sim = simulate_stage(cfg, &grid, &geometry, &pair, &cfg.output_dir)?;
    let v = prior_from_healthy(&pair);
    let y_hat = adjusted_measurements(&sim.y, &sim.y_prior, &sim.operator, &v)?;
    save_array(
        &cfg.output_dir.join("y_hat.umxa"),
        &Array::Complex64 { dims: vec![y_hat.len() as u64], data: y_hat.clone() },
    )?;
    let err = born_error(&sim.y, &sim.y_prior, &sim.operator, &v, &pair.unhealthy.stacked())?;
    println!("||y_hat||_2 = {:.6e}", l2_norm_complex(&y_hat));
    println!("born_error  = {err:.4}");
    Ok(())
}

fn cmd_solve(cfg: &ExperimentConfig, args: &SolveArgs) -> Result<()> {
    let fraction = args
        .delta_frac
        .as_ref()
        .and_then(|f| f.first().copied())
        .unwrap_or(cfg.delta.fractions[0]);
    if !(fraction > 0.0) {
        return Err(UnmixError::InvalidArgument("delta fraction must be positive".into()));
    }
    let grid = cfg.simulation_grid()?;
    let geometry = cfg.geometry();
    let pair = generate(&cfg.phantom)?;
    let sim = simulate_stage(cfg, &grid, &geometry, &pair, &cfg.output_dir)?;
    let v = prior_from_healthy(&pair);
    let y_hat = adjusted_measurements(&sim.y, &sim.y_prior, &sim.operator, &v)?;
    let reference = match cfg.delta.reference {
        DeltaReference::YHat => l2_norm_complex(&y_hat),
        DeltaReference::Y => l2_norm_complex(&sim.y.values),
    };
    let delta = fraction * reference;
    let n = cfg.phantom.n_pixels();
    let shape = StackShape::new(n, N_MATERIALS)?;
    let dense_op;
    let operator: &dyn SensingOperator = if args.dense {
        dense_op = sim.operator.to_dense()?;
        &dense_op
    } else {
        &sim.operator
    };
    let problem = UnmixProblem { operator, y_hat, prior: v, delta, shape };
    let report = solve(&problem, &cfg.solver)?;
    save_array(
        &cfg.output_dir.join("z_solve.umxa"),
        &Array::F64 {
            dims: vec![N_MATERIALS as u64, cfg.phantom.ny as u64, cfg.phantom.nx as u64],
            data: report.z_final.clone(),
        },
    )?;
    for material in 0..N_MATERIALS {
        save_pgm(
            &cfg.output_dir.join(format!("z_solve_material_{material}.pgm")),
            cfg.phantom.nx,
            cfg.phantom.ny,
            &report.z_final[material * n..(material + 1) * n],
        )?;
    }
    let metrics = detection_metrics(&report.z_final, &pair)?;
    println!(
        "solve: delta = {delta:.3e} ({fraction:.1e} of reference), residual = {:.3e}, \
         objective = {:.3e}, outer = {}, converged = {}",
        report.residual_norm, report.objective_l1, report.outer_iterations, report.converged
    );
    println!(
        "detection: peak z3 in lesion = {:.3}, outside = {:.3}, F1 = {:.2}, detected = {}",
        metrics.peak_z3_in_lesion,
        metrics.peak_z3_outside,
        metrics.support_f1,
        metrics.detected
    );
    Ok(())
}

fn cmd_report(out: &std::path::Path) -> Result<()> {
    let text = std::fs::read_to_string(out.join("report.json"))?;
    let report: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| UnmixError::Config(e.to_string()))?;
    let results = report["results"]
        .as_array()
        .ok_or_else(|| UnmixError::Config("report.json has no results".into()))?;
    println!("config hash: {}", report["config_hash"].as_str().unwrap_or("?"));
    println!(
        "discrepancy fraction: {:.4}, born error: {:.4}",
        report["discrepancy_fraction"].as_f64().unwrap_or(f64::NAN),
        report["born_error"].as_f64().unwrap_or(f64::NAN)
    );
    println!("delta_fraction  peak_in  peak_out  F1    detected");
    for r in results {
        println!(
            "{:<15.3e} {:<8.3} {:<9.3} {:<5.2} {}",
            r["delta_fraction"].as_f64().unwrap_or(f64::NAN),
            r["metrics"]["peak_z3_in_lesion"].as_f64().unwrap_or(f64::NAN),
            r["metrics"]["peak_z3_outside"].as_f64().unwrap_or(f64::NAN),
            r["metrics"]["support_f1"].as_f64().unwrap_or(f64::NAN),
            r["metrics"]["detected"].as_bool().unwrap_or(false)
        );
    }
    Ok(())
}

fn print_report(report: &ExperimentReport) {
    println!(
        "sweep: {} deltas, discrepancy = {:.4}, born error = {:.4}{}",
        report.results.len(),
        report.discrepancy_fraction,
        report.born_error,
        if report.simulation_cached { " [simulation cached]" } else { "" }
    );
    for r in &report.results {
        println!(
            "  delta {:.3e}: peak in/out = {:.3}/{:.3}, F1 = {:.2}, detected = {}, \
             max |z - v| = {:.3e}",
            r.delta_fraction,
            r.metrics.peak_z3_in_lesion,
            r.metrics.peak_z3_outside,
            r.metrics.support_f1,
            r.metrics.detected,
            r.max_prior_deviation
        );
    }
}
