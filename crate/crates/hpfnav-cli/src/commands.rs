//! Command implementations and the exit-code contract: 0 success, 1 for
//! usage/schema problems, 2 for numerical failures.

use crate::args::{ComplianceArgs, MultiArgs, PlotArgs, SimulateArgs, SolveArgs, VerifyArgs};
use crate::plot::{plot_heatmap, plot_inter_distance, plot_log, OverlayPath, PlotKind};
use crate::verify;
use hpfnav_core::field::{
    solve_anisotropic, solve_laplace, solve_weighted, SigmaParams, SolveError, SolverParams,
};
use hpfnav_core::io::{load_env, read_field, write_field, IoError};
use hpfnav_core::sim::scenario::{apply_override, Built, BuildError};
use hpfnav_core::sim::{
    run, run_compliance, run_multi, ScenarioSpec, SimError, TrajectoryLog,
};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Debug)]
pub enum CliError {
    /// Bad usage or malformed inputs; exit status 1.
    Schema(String),
    /// The numerics failed; exit status 2.
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Schema(_) => 1,
            CliError::Numeric(_) => 2,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Schema(m) | CliError::Numeric(m) => m,
        }
    }
}

fn solve_error(e: SolveError) -> CliError {
    match e {
        SolveError::NonConvergence { .. } | SolveError::SigmaOscillation { .. } => {
            CliError::Numeric(e.to_string())
        }
        other => CliError::Schema(other.to_string()),
    }
}

fn build_error(e: BuildError) -> CliError {
    match e {
        BuildError::Solve(se) => solve_error(se),
        other => CliError::Schema(other.to_string()),
    }
}

fn sim_error(e: SimError) -> CliError {
    match e {
        SimError::BadScenario(m) => CliError::Schema(m),
        SimError::Controller(c) => CliError::Schema(c.to_string()),
        SimError::Solve(se) => solve_error(se),
        other => CliError::Numeric(other.to_string()),
    }
}

fn io_error(e: IoError) -> CliError {
    CliError::Schema(e.to_string())
}

/// Output directory resolution: explicit flag, then HPFNAV_OUT_DIR, then cwd.
fn out_dir(flag: &Option<PathBuf>) -> Result<PathBuf, CliError> {
    let dir = flag
        .clone()
        .or_else(|| std::env::var_os("HPFNAV_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir)
        .map_err(|e| CliError::Schema(format!("{}: {e}", dir.display())))?;
    Ok(dir)
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Schema(format!("{}: {e}", path.display())))
}

fn parse_overrides(raw: &[String]) -> Result<Vec<(String, String)>, CliError> {
    raw.iter()
        .map(|s| {
            s.split_once('=')
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .ok_or_else(|| CliError::Schema(format!("override {s:?} must be KEY=VALUE")))
        })
        .collect()
}

fn load_spec(path: &Path, overrides: &[String]) -> Result<(ScenarioSpec, PathBuf), CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Schema(format!("{}: {e}", path.display())))?;
    let overrides = parse_overrides(overrides)?;
    let spec = ScenarioSpec::from_json_with_overrides(&text, &overrides).map_err(build_error)?;
    let base = path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    Ok((spec, base))
}

pub fn solve_cmd(args: &SolveArgs) -> Result<(), CliError> {
    let env = load_env(&args.env, args.sidecar.as_deref()).map_err(io_error)?;
    let mut params = SolverParams::default();
    if let Some(t) = args.tolerance {
        params.tolerance = t;
    }
    if let Some(n) = args.max_iterations {
        params.max_iterations = n;
    }
    if let Some(w) = args.omega {
        params.relaxation_factor = w;
    }
    let field = match args.variant.as_str() {
        "laplace" => solve_laplace(env, &params).map_err(solve_error)?,
        "weighted" => solve_weighted(env, &params).map_err(solve_error)?,
        "anisotropic" => {
            let (Some(f), Some(b)) = (args.sigma_f, args.sigma_b) else {
                return Err(CliError::Schema(
                    "anisotropic solves need --sigma-f and --sigma-b".into(),
                ));
            };
            solve_anisotropic(
                env,
                &params,
                SigmaParams {
                    sigma_f: f,
                    sigma_b: b,
                },
            )
            .map_err(solve_error)?
        }
        other => {
            return Err(CliError::Schema(format!(
                "unknown variant {other:?}; expected laplace, anisotropic, or weighted"
            )))
        }
    };
    let dir = out_dir(&args.out)?;
    let (header_path, values_path) =
        write_field(&field, &dir, &args.name, args.binary).map_err(io_error)?;
    println!(
        "solved {} field: residual {:e} after {} sweeps",
        args.variant,
        field.residual(),
        field.iterations()
    );
    println!("wrote {}", header_path.display());
    println!("wrote {}", values_path.display());
    Ok(())
}

fn write_log(dir: &Path, stem: &str, log: &TrajectoryLog) -> Result<PathBuf, CliError> {
    let csv_path = dir.join(format!("{stem}.csv"));
    write_text(&csv_path, &log.to_csv())?;
    let summary_path = dir.join(format!("{stem}.summary.json"));
    let summary = serde_json::to_string_pretty(&log.summary)
        .map_err(|e| CliError::Schema(e.to_string()))?;
    write_text(&summary_path, &summary)?;
    Ok(csv_path)
}

fn print_summary(log: &TrajectoryLog) {
    let s = &log.summary;
    println!("termination:        {:?}", s.termination);
    println!("steps:              {}", s.steps);
    if let Some(d) = s.final_target_distance {
        println!("final target dist:  {d:.6}");
    }
    match s.v_settling_time {
        Some(t) => println!("v settling time:    {t:.2} s"),
        None => println!("v settling time:    (not settled)"),
    }
    println!("max |u|:            {:.6}", s.max_control);
    if let Some(d) = s.min_inter_distance {
        println!("min inter distance: {d:.6}");
    }
}

pub fn simulate_cmd(args: &SimulateArgs) -> Result<(), CliError> {
    let (spec, base) = load_spec(&args.scenario, &args.overrides)?;
    let built = spec.build(&base).map_err(build_error)?;
    let scenario = match built {
        Built::Single(s) => s,
        Built::Multi(_) => {
            return Err(CliError::Schema(
                "scenario declares agents; use the multi command".into(),
            ))
        }
    };
    let log = run(scenario).map_err(sim_error)?;
    let dir = out_dir(&args.out)?;
    let csv = write_log(&dir, "trajectory", &log)?;
    print_summary(&log);
    println!("wrote {}", csv.display());
    Ok(())
}

pub fn compliance_cmd(args: &ComplianceArgs) -> Result<(), CliError> {
    let (spec, base) = load_spec(&args.scenario, &args.overrides)?;
    let built = spec.build(&base).map_err(build_error)?;
    let scenario = match built {
        Built::Single(s) => s,
        Built::Multi(_) => {
            return Err(CliError::Schema("compliance runs take a single vehicle".into()))
        }
    };
    let report = run_compliance(scenario, !args.mismatched).map_err(sim_error)?;
    let dir = out_dir(&args.out)?;
    let mut kin = String::from("x,y,z\n");
    for p in &report.kinematic.points {
        let _ = writeln!(kin, "{},{},{}", p[0], p[1], p[2]);
    }
    write_text(&dir.join("kinematic.csv"), &kin)?;
    write_log(&dir, "dynamic", &report.dynamic)?;
    let summary = serde_json::json!({
        "matched_initial": !args.mismatched,
        "max_deviation": report.max_deviation,
        "kinematic_points": report.kinematic.points.len(),
        "kinematic_reached_target":
            report.kinematic.termination == hpfnav_core::DescentTermination::ReachedTarget,
        "dynamic_termination": report.dynamic.summary.termination,
    });
    write_text(
        &dir.join("compliance.json"),
        &serde_json::to_string_pretty(&summary).unwrap(),
    )?;
    println!("max kinematic-dynamic deviation: {:.6}", report.max_deviation);
    print_summary(&report.dynamic);
    Ok(())
}

pub fn multi_cmd(args: &MultiArgs) -> Result<(), CliError> {
    let (spec, base) = load_spec(&args.scenario, &args.overrides)?;
    let built = spec.build(&base).map_err(build_error)?;
    let mut ms = match built {
        Built::Multi(m) => m,
        Built::Single(_) => {
            return Err(CliError::Schema("scenario declares no agents".into()))
        }
    };
    if args.no_resolve {
        ms.resolve_period = None;
    }
    let report = run_multi(ms).map_err(sim_error)?;
    let dir = out_dir(&args.out)?;
    for (i, log) in report.logs.iter().enumerate() {
        write_log(&dir, &format!("agent{i}"), log)?;
    }
    let mut inter = String::from("t,distance\n");
    for (t, d) in &report.inter_distance {
        let _ = writeln!(inter, "{t},{d}");
    }
    write_text(&dir.join("inter_distance.csv"), &inter)?;
    let summary = serde_json::json!({
        "min_inter_distance": report.min_inter_distance,
        "all_captured": report.all_captured,
        "agents": report.logs.iter().map(|l| &l.summary).collect::<Vec<_>>(),
    });
    write_text(
        &dir.join("multi.json"),
        &serde_json::to_string_pretty(&summary).unwrap(),
    )?;
    println!("min inter-vehicle distance: {:.6}", report.min_inter_distance);
    println!("all captured: {}", report.all_captured);
    Ok(())
}

pub fn verify_cmd(args: &VerifyArgs) -> Result<(), CliError> {
    let results = verify::battery();
    let mut failed = 0usize;
    for r in &results {
        println!("{} {} — {}", if r.pass { "PASS" } else { "FAIL" }, r.name, r.detail);
        if !r.pass {
            failed += 1;
        }
    }
    let dir = out_dir(&args.out)?;
    write_text(
        &dir.join("verify.json"),
        &serde_json::to_string_pretty(&results).unwrap(),
    )?;
    if failed > 0 {
        return Err(CliError::Numeric(format!("{failed} verification checks failed")));
    }
    println!("all {} checks passed", results.len());
    Ok(())
}

pub fn plot_cmd(args: &PlotArgs) -> Result<(), CliError> {
    let kind = PlotKind::parse(&args.kind).ok_or_else(|| {
        CliError::Schema(format!(
            "unknown plot kind {:?}; expected one of {}",
            args.kind,
            PlotKind::NAMES.join(", ")
        ))
    })?;
    let read_log = |path: &PathBuf| -> Result<TrajectoryLog, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Schema(format!("{}: {e}", path.display())))?;
        TrajectoryLog::from_csv(&text).map_err(|e| CliError::Schema(e.to_string()))
    };
    let svg = match kind {
        PlotKind::InterDistance => {
            let path = args.distances.as_ref().or(args.log.as_ref()).ok_or_else(|| {
                CliError::Schema("inter_distance plots need --distances".into())
            })?;
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Schema(format!("{}: {e}", path.display())))?;
            let mut series = Vec::new();
            for (i, line) in text.lines().enumerate() {
                if i == 0 || line.trim().is_empty() {
                    continue;
                }
                let mut parts = line.split(',');
                let t: f64 = parts
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| CliError::Schema(format!("bad line {} in {}", i + 1, path.display())))?;
                let d: f64 = parts
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| CliError::Schema(format!("bad line {} in {}", i + 1, path.display())))?;
                series.push((t, d));
            }
            plot_inter_distance(&series)
        }
        PlotKind::HeatmapPath => {
            let field_path = args
                .field
                .as_ref()
                .ok_or_else(|| CliError::Schema("heatmap_path plots need --field".into()))?;
            let (header, values) = read_field(field_path).map_err(io_error)?;
            let mut overlays = Vec::new();
            for raw in &args.overlays {
                let (label, path) = raw
                    .split_once('=')
                    .ok_or_else(|| CliError::Schema(format!("overlay {raw:?} must be LABEL=CSV")))?;
                overlays.push(load_overlay(label, Path::new(path))?);
            }
            if let Some(log_path) = &args.log {
                let log = read_log(log_path)?;
                overlays.push(OverlayPath {
                    label: "trajectory".into(),
                    points: log.rows.iter().map(|r| (r.p[0], r.p[1])).collect(),
                    dashed: false,
                });
            }
            plot_heatmap(&header, &values, &overlays)
        }
        other => {
            let log_path = args
                .log
                .as_ref()
                .ok_or_else(|| CliError::Schema("this plot kind needs --log".into()))?;
            let log = read_log(log_path)?;
            plot_log(other, &log)
        }
    };
    let out = match &args.out {
        Some(p) => p.clone(),
        None => out_dir(&None)?.join(format!("{}.svg", args.kind)),
    };
    write_text(&out, &svg)?;
    println!("wrote {}", out.display());
    Ok(())
}

/// Overlay CSV: either a trajectory log or a bare x,y,z path. Labels
/// containing "kinematic" render dotted.
fn load_overlay(label: &str, path: &Path) -> Result<OverlayPath, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Schema(format!("{}: {e}", path.display())))?;
    let points = if text.starts_with("x,y,z") {
        let mut pts = Vec::new();
        for line in text.lines().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let vals: Vec<f64> = line.split(',').filter_map(|s| s.parse().ok()).collect();
            if vals.len() >= 2 {
                pts.push((vals[0], vals[1]));
            }
        }
        pts
    } else {
        let log =
            TrajectoryLog::from_csv(&text).map_err(|e| CliError::Schema(e.to_string()))?;
        log.rows.iter().map(|r| (r.p[0], r.p[1])).collect()
    };
    Ok(OverlayPath {
        label: label.to_string(),
        points,
        dashed: label.contains("kinematic"),
    })
}

/// Re-exported so integration tests can exercise override parsing.
pub fn apply_override_to_value(
    value: &mut serde_json::Value,
    key: &str,
    raw: &str,
) -> Result<(), CliError> {
    apply_override(value, key, raw).map_err(build_error)
}
