//! CLI smoke tests: verbs run end to end and exit codes follow the
//! 0/2/3 contract.

use std::path::Path;
use std::process::Command;

fn write_config(dir: &Path, out_dir: &Path) -> std::path::PathBuf {
    let text = format!(
        r#"
        output_dir = "{}"

        [phantom]
        nx = 10
        ny = 10
        cell_size_m = 0.002
        outline_semi_axes_m = [0.009, 0.009]
        seed = 4

        [phantom.texture]
        correlation_length_m = 0.003
        mean_hwc = 0.5
        seed = 6

        [phantom.lesion]
        center_m = [0.002, 0.0]
        radius_m = 0.003
        proportion = 0.9

        [array]
        n_antennas = 4
        arc_radius_m = 0.028
        freq_min_hz = 8e8
        freq_max_hz = 1.2e9
        n_freq = 2

        [delta]
        fractions = [1e-3, 2e-2]

        [solver]
        max_outer = 40
        "#,
        out_dir.display()
    );
    let path = dir.join("config.toml");
    std::fs::write(&path, text).unwrap();
    path
}

fn unmix() -> Command {
    Command::new(env!("CARGO_BIN_EXE_unmix"))
}

#[test]
fn pipeline_verbs_succeed_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let config = write_config(dir.path(), &out);

    let generate = unmix().args(["generate", "--config"]).arg(&config).output().unwrap();
    assert!(generate.status.success(), "{}", String::from_utf8_lossy(&generate.stderr));
    assert!(out.join("phantom_unhealthy_material_2.pgm").exists());
    assert!(out.join("lesion_mask.umxa").exists());

    let simulate = unmix().args(["simulate", "--config"]).arg(&config).output().unwrap();
    assert!(simulate.status.success(), "{}", String::from_utf8_lossy(&simulate.stderr));
    assert!(out.join("y.umxa").exists());

    let linearize = unmix().args(["linearize", "--config"]).arg(&config).output().unwrap();
    assert!(linearize.status.success());
    let text = String::from_utf8_lossy(&linearize.stdout);
    assert!(text.contains("born_error"), "stdout: {text}");
    // The simulation stage should have been reloaded, not recomputed.
    assert!(String::from_utf8_lossy(&simulate.stdout).contains("measurements: 32"));

    let solve = unmix()
        .args(["solve", "--delta-frac", "1e-3", "--dense", "--config"])
        .arg(&config)
        .output()
        .unwrap();
    assert!(solve.status.success(), "{}", String::from_utf8_lossy(&solve.stderr));
    assert!(out.join("z_solve.umxa").exists());

    let sweep = unmix()
        .args(["sweep", "--delta-frac", "1e-3,2e-2", "--config"])
        .arg(&config)
        .output()
        .unwrap();
    assert!(sweep.status.success(), "{}", String::from_utf8_lossy(&sweep.stderr));
    assert!(out.join("report.json").exists());

    let report = unmix().args(["report", "--out"]).arg(&out).output().unwrap();
    assert!(report.status.success());
    assert!(String::from_utf8_lossy(&report.stdout).contains("delta_fraction"));
}

#[test]
fn validation_errors_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "this is not [ valid toml").unwrap();
    let status = unmix().args(["generate", "--config"]).arg(&bad).output().unwrap();
    assert_eq!(status.status.code(), Some(2));

    // Valid TOML, invalid physics: antenna ring inside the imaging region.
    let out = dir.path().join("out");
    let config = write_config(dir.path(), &out);
    let text = std::fs::read_to_string(&config).unwrap().replace("0.028", "0.005");
    std::fs::write(&config, text).unwrap();
    let status = unmix().args(["simulate", "--config"]).arg(&config).output().unwrap();
    assert_eq!(status.status.code(), Some(2));
}

#[test]
fn missing_inputs_exit_with_code_3() {
    let dir = tempfile::tempdir().unwrap();
    let status = unmix()
        .args(["report", "--out"])
        .arg(dir.path().join("nowhere"))
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(3));
}
