//! Command-line surface.

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "hpfnav",
    about = "Harmonic-potential-field planning and velocity-attractor UAV control",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Solve a potential-field boundary value problem over an environment file.
    Solve(SolveArgs),
    /// Integrate a closed-loop scenario and write its trajectory log.
    Simulate(SimulateArgs),
    /// Compare the closed-loop trajectory against pure gradient descent.
    Compliance(ComplianceArgs),
    /// Run a two-vehicle scenario with dynamic avoidance.
    Multi(MultiArgs),
    /// Run the verification battery and report pass/fail per check.
    Verify(VerifyArgs),
    /// Render a trajectory log or solved field as SVG.
    Plot(PlotArgs),
}

#[derive(Args)]
pub struct SolveArgs {
    /// Environment file: .pgm (with JSON sidecar) or .json.
    #[arg(long)]
    pub env: PathBuf,
    /// Sidecar path for PGM environments; defaults to the .json next to it.
    #[arg(long)]
    pub sidecar: Option<PathBuf>,
    /// laplace | anisotropic | weighted
    #[arg(long)]
    pub variant: String,
    #[arg(long)]
    pub sigma_f: Option<f64>,
    #[arg(long)]
    pub sigma_b: Option<f64>,
    #[arg(long)]
    pub tolerance: Option<f64>,
    #[arg(long)]
    pub max_iterations: Option<usize>,
    /// SOR relaxation factor in (0, 2).
    #[arg(long)]
    pub omega: Option<f64>,
    /// Write values as flat little-endian binary instead of CSV.
    #[arg(long)]
    pub binary: bool,
    /// Output file stem.
    #[arg(long, default_value = "field")]
    pub name: String,
    /// Output directory; defaults to $HPFNAV_OUT_DIR or the current directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    /// Dotted-key overrides applied to the scenario JSON, e.g. gains.k_u=2.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct ComplianceArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    /// Keep the scenario's own initial state instead of solving the matched one.
    #[arg(long)]
    pub mismatched: bool,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct MultiArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    /// Disable the periodic field re-solve (the avoidance ablation).
    #[arg(long)]
    pub no_resolve: bool,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct PlotArgs {
    /// xyz_vs_t | radial_speed | orientation | controls | inter_distance |
    /// heatmap_path | xy | yz
    #[arg(long)]
    pub kind: String,
    /// Trajectory CSV (for log-based kinds).
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Field header JSON (for heatmap_path).
    #[arg(long)]
    pub field: Option<PathBuf>,
    /// Extra paths to overlay on the heatmap: trajectory CSVs (solid) or
    /// x,y,z path CSVs (dotted when named kinematic).
    #[arg(long = "overlay", value_name = "LABEL=CSV")]
    pub overlays: Vec<String>,
    /// Inter-distance CSV (for inter_distance).
    #[arg(long)]
    pub distances: Option<PathBuf>,
    /// Output SVG path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
