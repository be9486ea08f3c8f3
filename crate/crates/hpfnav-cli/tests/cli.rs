//! Integration tests for the command-line interface: exit-code contract,
//! file outputs, overrides, and deterministic SVG rendering.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hpfnav"))
}

fn scenario_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("hpfnav-cli-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().unwrap();
    assert!(
        out.status.success(),
        "command failed: {}\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn strip_env_json(dir: &Path) -> PathBuf {
    let path = dir.join("strip.json");
    std::fs::write(
        &path,
        r#"{
            "schema_version": 1,
            "shape": [5, 1],
            "spacing": 1.0,
            "cells": [1, 0, 0, 0, 2]
        }"#,
    )
    .unwrap();
    path
}

#[test]
fn solve_strip_writes_expected_values() {
    let dir = temp_dir("strip");
    let env = strip_env_json(&dir);
    run_ok(bin()
        .args(["solve", "--variant", "laplace", "--name", "strip"])
        .arg("--env")
        .arg(&env)
        .arg("--out")
        .arg(&dir));
    let values: Vec<f64> = std::fs::read_to_string(dir.join("strip.values.csv"))
        .unwrap()
        .lines()
        .map(|l| l.parse().unwrap())
        .collect();
    let expected = [1.0, 0.75, 0.5, 0.25, 0.0];
    for (v, e) in values.iter().zip(expected) {
        assert!((v - e).abs() < 1e-7, "{v} vs {e}");
    }
    let header: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("strip.field.json")).unwrap())
            .unwrap();
    assert_eq!(header["variant"], "laplace");
    assert_eq!(header["shape"][0], 5);
}

#[test]
fn solve_weighted_without_start_exits_one() {
    let dir = temp_dir("nostart");
    let env = strip_env_json(&dir); // has target but no start
    let out = bin()
        .args(["solve", "--variant", "weighted"])
        .arg("--env")
        .arg(&env)
        .arg("--out")
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1), "{out:?}");
    assert!(String::from_utf8_lossy(&out.stderr).contains("start"));
}

#[test]
fn solve_weighted_intensity_map_avoids_dark_regions() {
    let dir = temp_dir("gmap");
    run_ok(bin()
        .args(["solve", "--variant", "weighted", "--name", "gmap"])
        .arg("--env")
        .arg(scenario_dir().join("maps/fitness.pgm"))
        .arg("--out")
        .arg(&dir));
    // Independent check on the same inputs: the descent path from the start
    // stays out of low-fitness terrain.
    let env = hpfnav_core::io::load_env(&scenario_dir().join("maps/fitness.pgm"), None).unwrap();
    let field =
        hpfnav_core::solve_weighted(env, &hpfnav_core::SolverParams::default()).unwrap();
    let opts = hpfnav_core::DescentOptions::for_field(&field);
    let start = field
        .env()
        .cell_center(field.env().start_cell().unwrap());
    let path = field.descend(start, &opts).unwrap();
    assert_eq!(
        path.termination,
        hpfnav_core::DescentTermination::ReachedTarget
    );
    let mut min_beta = f64::INFINITY;
    for p in &path.points {
        let cell = field.env().cell_at(*p).unwrap();
        min_beta = min_beta.min(field.env().beta(cell));
    }
    assert!(
        min_beta > 0.15,
        "descent path entered low-fitness terrain (min beta {min_beta})"
    );
}

#[test]
fn simulate_bundled_line_scenario() {
    let dir = temp_dir("simline");
    let out = run_ok(bin()
        .arg("simulate")
        .arg("--scenario")
        .arg(scenario_dir().join("fixedwing_line.json"))
        .arg("--out")
        .arg(&dir));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("v settling time"), "{stdout}");
    let summary: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.join("trajectory.summary.json")).unwrap(),
    )
    .unwrap();
    assert!(
        summary["v_settling_time"].as_f64().is_some(),
        "settling flag missing: {summary}"
    );
    assert!(dir.join("trajectory.csv").exists());
}

#[test]
fn simulate_rejects_zero_gain_override() {
    let out = bin()
        .arg("simulate")
        .arg("--scenario")
        .arg(scenario_dir().join("fixedwing_line.json"))
        .args(["--set", "gains.k_u=0"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("k_u"));
}

#[test]
fn simulate_rejects_unknown_override_path() {
    let out = bin()
        .arg("simulate")
        .arg("--scenario")
        .arg(scenario_dir().join("fixedwing_line.json"))
        .args(["--set", "gains.k_missing=1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("k_missing"));
}

#[test]
fn simulate_constrained_scenario_respects_box() {
    let dir = temp_dir("simbox");
    run_ok(bin()
        .arg("simulate")
        .arg("--scenario")
        .arg(scenario_dir().join("spherical_constrained.json"))
        .arg("--out")
        .arg(&dir));
    let summary: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.join("trajectory.summary.json")).unwrap(),
    )
    .unwrap();
    let max_u = summary["max_control"].as_f64().unwrap();
    assert!(max_u <= 0.4, "max |u| = {max_u}");
    assert_eq!(summary["termination"]["kind"], "captured");
}

#[test]
fn non_convergence_exits_two() {
    let dir = temp_dir("noconv");
    let env = strip_env_json(&dir);
    let out = bin()
        .args(["solve", "--variant", "laplace", "--max-iterations", "1"])
        .args(["--tolerance", "1e-14"])
        .arg("--env")
        .arg(&env)
        .arg("--out")
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{out:?}");
    assert!(String::from_utf8_lossy(&out.stderr).contains("convergence"));
}

#[test]
fn unknown_subcommand_usage_exits_one() {
    let out = bin().arg("fly").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn plot_is_deterministic_and_handles_single_row() {
    let dir = temp_dir("plot");
    run_ok(bin()
        .arg("simulate")
        .arg("--scenario")
        .arg(scenario_dir().join("spherical_noise.json"))
        .arg("--out")
        .arg(&dir));
    let svg1 = dir.join("v1.svg");
    let svg2 = dir.join("v2.svg");
    for out in [&svg1, &svg2] {
        run_ok(bin()
            .args(["plot", "--kind", "radial_speed"])
            .arg("--log")
            .arg(dir.join("trajectory.csv"))
            .arg("--out")
            .arg(out));
    }
    assert_eq!(
        std::fs::read(&svg1).unwrap(),
        std::fs::read(&svg2).unwrap(),
        "plots differ across runs"
    );

    // A single-row log still renders a valid document with a point marker.
    let text = std::fs::read_to_string(dir.join("trajectory.csv")).unwrap();
    let mut lines = text.lines();
    let single = format!(
        "{}\n{}\n",
        lines.next().unwrap(),
        lines.next().unwrap()
    );
    let single_path = dir.join("single.csv");
    std::fs::write(&single_path, single).unwrap();
    let single_svg = dir.join("single.svg");
    run_ok(bin()
        .args(["plot", "--kind", "xyz_vs_t"])
        .arg("--log")
        .arg(&single_path)
        .arg("--out")
        .arg(&single_svg));
    let body = std::fs::read_to_string(&single_svg).unwrap();
    assert!(body.starts_with("<?xml"));
    assert!(body.contains("circle"), "no point marker in degenerate plot");
    assert!(body.ends_with("</svg>\n"));
}

#[test]
fn plot_rejects_unknown_kind() {
    let out = bin()
        .args(["plot", "--kind", "pie"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn compliance_writes_overlayable_outputs() {
    let dir = temp_dir("compliance");
    run_ok(bin()
        .arg("compliance")
        .arg("--scenario")
        .arg(scenario_dir().join("compliance_gmap.json"))
        .arg("--out")
        .arg(&dir));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("compliance.json")).unwrap())
            .unwrap();
    assert!(report["max_deviation"].as_f64().unwrap() <= 0.5);
    assert_eq!(report["matched_initial"], true);
    assert_eq!(report["kinematic_reached_target"], true);

    // Solve the same map so the overlay has a field to draw on, then render
    // the kinematic (dotted) and dynamic (solid) paths over it.
    run_ok(bin()
        .args(["solve", "--variant", "weighted", "--name", "gmap"])
        .arg("--env")
        .arg(scenario_dir().join("maps/fitness.pgm"))
        .arg("--out")
        .arg(&dir));
    let svg_path = dir.join("overlay.svg");
    run_ok(bin()
        .args(["plot", "--kind", "heatmap_path"])
        .arg("--field")
        .arg(dir.join("gmap.field.json"))
        .arg("--overlay")
        .arg(format!("kinematic={}", dir.join("kinematic.csv").display()))
        .arg("--overlay")
        .arg(format!("dynamic={}", dir.join("dynamic.csv").display()))
        .arg("--out")
        .arg(&svg_path));
    let body = std::fs::read_to_string(&svg_path).unwrap();
    assert!(body.contains("stroke-dasharray"), "kinematic path not dotted");
    assert!(body.contains("kinematic (dotted)"));
    assert!(body.contains("dynamic (solid)"));
}

#[test]
fn multi_command_runs_and_ablates() {
    let dir = temp_dir("multi");
    run_ok(bin()
        .arg("multi")
        .arg("--scenario")
        .arg(scenario_dir().join("multi_antipodal.json"))
        .arg("--out")
        .arg(&dir));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("multi.json")).unwrap()).unwrap();
    let with = report["min_inter_distance"].as_f64().unwrap();
    assert!(report["all_captured"].as_bool().unwrap());
    assert!(dir.join("agent0.csv").exists());
    assert!(dir.join("inter_distance.csv").exists());

    let dir2 = temp_dir("multi-ablate");
    run_ok(bin()
        .arg("multi")
        .arg("--scenario")
        .arg(scenario_dir().join("multi_antipodal.json"))
        .arg("--no-resolve")
        .arg("--out")
        .arg(&dir2));
    let ablated: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir2.join("multi.json")).unwrap()).unwrap();
    assert!(ablated["min_inter_distance"].as_f64().unwrap() < with);

    // Render the inter-distance series.
    run_ok(bin()
        .args(["plot", "--kind", "inter_distance"])
        .arg("--distances")
        .arg(dir.join("inter_distance.csv"))
        .arg("--out")
        .arg(dir.join("inter.svg")));
    assert!(dir.join("inter.svg").exists());
}

#[test]
fn verify_command_passes_and_writes_report() {
    let dir = temp_dir("verify");
    let out = run_ok(bin().arg("verify").arg("--out").arg(&dir));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("PASS fd_jacobian_fixed_wing"), "{stdout}");
    assert!(!stdout.contains("FAIL"), "{stdout}");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("verify.json")).unwrap()).unwrap();
    assert!(report.as_array().unwrap().iter().all(|c| c["pass"] == true));
}

#[test]
fn out_dir_env_var_is_honored() {
    let dir = temp_dir("envvar");
    let env_path = strip_env_json(&dir);
    run_ok(bin()
        .args(["solve", "--variant", "laplace", "--name", "viaenv"])
        .arg("--env")
        .arg(&env_path)
        .env("HPFNAV_OUT_DIR", &dir));
    assert!(dir.join("viaenv.field.json").exists());
}
