//! Scenario files: the JSON schema describing a run and its translation into
//! runtime objects.
//!
//! The schema is versioned through `schema_version`. Dotted-key overrides
//! (`gains.k_u=2`) edit the parsed JSON before validation; a key must
//! resolve to an existing path.

use super::multi::{AgentRuntime, HpfResolve, MultiScenario};
use super::{CaptureRule, FreezeMode, JointState, NoiseSpec, Scenario};
use crate::controller::{
    barrier_gain_bound, BarrierMode, BarrierSample, ControlBox, ControllerGains,
};
use crate::field::{solve_anisotropic, solve_laplace, solve_weighted, SigmaParams, SolverParams};
use crate::guidance::{AltitudeHold, ReferenceField, ReferenceKind};
use crate::io::{load_env, IoError};
use crate::models::{FixedWing, SphericalRedundant, SphericalUnderactuated, VehicleModel};
use nalgebra::{DVector, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::sync::Arc;
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum BuildError {
    #[error("schema: {0}")]
    Schema(String),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("field solve: {0}")]
    Solve(#[from] crate::field::SolveError),
}

fn schema<T>(message: impl Into<String>) -> Result<T, BuildError> {
    Err(BuildError::Schema(message.into()))
}

// ---------------------------------------------------------------------------
// Schema structs

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelSpec {
    pub name: String,
    #[serde(default = "one")]
    pub mass: f64,
    #[serde(default = "default_gravity")]
    pub gravity: f64,
    #[serde(default = "default_v_floor")]
    pub v_floor: f64,
    #[serde(default = "default_gamma_margin")]
    pub gamma_margin: f64,
    #[serde(default)]
    pub c_drag: f64,
    #[serde(default)]
    pub c_lift: f64,
    #[serde(default = "default_air_density")]
    pub air_density: f64,
    #[serde(default)]
    pub legacy_kinematics: bool,
}

fn one() -> f64 {
    1.0
}
fn default_gravity() -> f64 {
    9.81
}
fn default_v_floor() -> f64 {
    0.1
}
fn default_gamma_margin() -> f64 {
    0.01
}
fn default_air_density() -> f64 {
    1.225
}

impl ModelSpec {
    pub fn build(&self) -> Result<Arc<dyn VehicleModel>, BuildError> {
        match self.name.as_str() {
            "fixed_wing" => Ok(Arc::new(FixedWing {
                mass: self.mass,
                gravity: self.gravity,
                v_floor: self.v_floor,
                gamma_margin: self.gamma_margin,
                c_drag: self.c_drag,
                c_lift: self.c_lift,
                air_density: self.air_density,
            })),
            "spherical_redundant" => Ok(Arc::new(SphericalRedundant {
                legacy_kinematics: self.legacy_kinematics,
            })),
            "spherical_underactuated" => Ok(Arc::new(SphericalUnderactuated {
                legacy_kinematics: self.legacy_kinematics,
            })),
            other => schema(format!(
                "model.name: unknown model {other:?}; expected fixed_wing, \
                 spherical_redundant, or spherical_underactuated"
            )),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GainsSpec {
    pub k_lambda: f64,
    pub k_u: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BarrierGainSpec {
    Auto(String),
    Fixed(f64),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ControlBoxSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    #[serde(default = "default_mode")]
    pub mode: String,
    #[serde(default = "default_gain")]
    pub gain: BarrierGainSpec,
    /// Sample count for resolving an "auto" gain.
    #[serde(default = "default_auto_samples")]
    pub auto_samples: usize,
    #[serde(default = "one_u64")]
    pub auto_seed: u64,
}

fn default_mode() -> String {
    "projection".into()
}
fn default_gain() -> BarrierGainSpec {
    BarrierGainSpec::Auto("auto".into())
}
fn default_auto_samples() -> usize {
    64
}
fn one_u64() -> u64 {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AltitudeSpec {
    pub altitude: f64,
    #[serde(default = "one")]
    pub gain: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverSpec {
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_relaxation")]
    pub relaxation_factor: f64,
    #[serde(default = "default_outer")]
    pub anisotropic_outer_iterations: usize,
    #[serde(default = "default_damping")]
    pub anisotropic_damping: f64,
}

fn default_tolerance() -> f64 {
    1e-8
}
fn default_max_iterations() -> usize {
    200_000
}
fn default_relaxation() -> f64 {
    1.8
}
fn default_outer() -> usize {
    50
}
fn default_damping() -> f64 {
    0.5
}

impl Default for SolverSpec {
    fn default() -> Self {
        Self {
            tolerance: default_tolerance(),
            max_iterations: default_max_iterations(),
            relaxation_factor: default_relaxation(),
            anisotropic_outer_iterations: default_outer(),
            anisotropic_damping: default_damping(),
        }
    }
}

impl SolverSpec {
    pub fn to_params(&self) -> SolverParams {
        SolverParams {
            tolerance: self.tolerance,
            max_iterations: self.max_iterations,
            relaxation_factor: self.relaxation_factor,
            anisotropic_outer_iterations: self.anisotropic_outer_iterations,
            anisotropic_damping: self.anisotropic_damping,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ReferenceSpec {
    Line {
        v_ref: f64,
        direction: [f64; 3],
        anchor: [f64; 3],
        #[serde(default = "one")]
        capture_gain: f64,
    },
    Spiral {
        v_ref: f64,
        center: [f64; 2],
        growth_rate: f64,
        altitude: f64,
        #[serde(default = "one")]
        capture_gain: f64,
    },
    Point {
        v_ref: f64,
        target: [f64; 3],
        #[serde(default)]
        taper_radius: Option<f64>,
    },
    Hpf {
        v_ref: f64,
        /// Environment file: `.pgm` (with sidecar) or `.json`.
        env: String,
        #[serde(default)]
        sidecar: Option<String>,
        /// "laplace", "anisotropic", or "weighted".
        variant: String,
        #[serde(default)]
        sigma_f: Option<f64>,
        #[serde(default)]
        sigma_b: Option<f64>,
        #[serde(default)]
        solver: Option<SolverSpec>,
        #[serde(default)]
        altitude: Option<AltitudeSpec>,
        #[serde(default)]
        taper_radius: Option<f64>,
    },
}

impl ReferenceSpec {
    pub fn build(&self, base_dir: &Path) -> Result<ReferenceField, BuildError> {
        let field = match self {
            ReferenceSpec::Line {
                v_ref,
                direction,
                anchor,
                capture_gain,
            } => ReferenceField::new(
                ReferenceKind::Line {
                    direction: Vector3::from_row_slice(direction),
                    anchor: Vector3::from_row_slice(anchor),
                    capture_gain: *capture_gain,
                },
                *v_ref,
            ),
            ReferenceSpec::Spiral {
                v_ref,
                center,
                growth_rate,
                altitude,
                capture_gain,
            } => ReferenceField::new(
                ReferenceKind::Spiral {
                    center: *center,
                    growth_rate: *growth_rate,
                    altitude: *altitude,
                    capture_gain: *capture_gain,
                },
                *v_ref,
            ),
            ReferenceSpec::Point {
                v_ref,
                target,
                taper_radius,
            } => ReferenceField::new(
                ReferenceKind::Point {
                    target: Vector3::from_row_slice(target),
                    taper_radius: taper_radius.unwrap_or(super::CAPTURE_RADIUS_ANALYTIC),
                },
                *v_ref,
            ),
            ReferenceSpec::Hpf {
                v_ref,
                env,
                sidecar,
                variant,
                sigma_f,
                sigma_b,
                solver,
                altitude,
                taper_radius,
            } => {
                let env_path = base_dir.join(env);
                let sidecar_path = sidecar.as_ref().map(|s| base_dir.join(s));
                let environment = load_env(&env_path, sidecar_path.as_deref())?;
                let params = solver.clone().unwrap_or_default().to_params();
                let field = match variant.as_str() {
                    "laplace" => solve_laplace(environment, &params)?,
                    "weighted" => solve_weighted(environment, &params)?,
                    "anisotropic" => {
                        let (Some(f), Some(b)) = (sigma_f, sigma_b) else {
                            return schema(
                                "reference: anisotropic variant needs sigma_f and sigma_b",
                            );
                        };
                        solve_anisotropic(
                            environment,
                            &params,
                            SigmaParams {
                                sigma_f: *f,
                                sigma_b: *b,
                            },
                        )?
                    }
                    other => {
                        return schema(format!(
                            "reference.variant: unknown variant {other:?}"
                        ))
                    }
                };
                let taper = taper_radius.unwrap_or_else(|| field.env().spacing());
                ReferenceField::new(
                    ReferenceKind::Hpf {
                        field: Arc::new(field),
                        altitude: altitude.as_ref().map(|a| AltitudeHold {
                            altitude: a.altitude,
                            gain: a.gain,
                        }),
                        taper_radius: taper,
                    },
                    *v_ref,
                )
            }
        };
        field.map_err(|e| BuildError::Schema(e.to_string()))
    }

    /// Environment and solver settings when this is a potential-field
    /// reference (used for the multi-vehicle re-solve).
    fn hpf_parts(&self, base_dir: &Path) -> Option<(String, Option<String>, SolverSpec)> {
        match self {
            ReferenceSpec::Hpf {
                env,
                sidecar,
                solver,
                ..
            } => Some((
                base_dir.join(env).to_string_lossy().into_owned(),
                sidecar
                    .as_ref()
                    .map(|s| base_dir.join(s).to_string_lossy().into_owned()),
                solver.clone().unwrap_or_default(),
            )),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InitialSpec {
    pub position: [f64; 3],
    pub lambda: [f64; 3],
    #[serde(default)]
    pub u: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NoiseJson {
    pub amplitude: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CaptureSpec {
    #[serde(default)]
    pub radius: Option<f64>,
    #[serde(default)]
    pub v_stop: Option<f64>,
    #[serde(default)]
    pub inner_radius: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResolveSpec {
    #[serde(default = "default_resolve_period")]
    pub period: f64,
    #[serde(default = "default_true")]
    pub enabled: bool,
}

fn default_resolve_period() -> f64 {
    0.5
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AgentSpec {
    pub model: ModelSpec,
    pub gains: GainsSpec,
    #[serde(default)]
    pub control_box: Option<ControlBoxSpec>,
    pub reference: ReferenceSpec,
    pub initial: InitialSpec,
    #[serde(default)]
    pub capture: Option<CaptureSpec>,
    #[serde(default = "default_true")]
    pub cooperative: bool,
    /// Radius of the obstacle disc this vehicle casts into the other
    /// vehicle's field, in cells.
    #[serde(default = "default_obstacle_radius")]
    pub obstacle_radius_cells: f64,
}

fn default_obstacle_radius() -> f64 {
    3.0
}

/// Top-level scenario document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub schema_version: u32,
    #[serde(default)]
    pub model: Option<ModelSpec>,
    #[serde(default)]
    pub gains: Option<GainsSpec>,
    #[serde(default)]
    pub control_box: Option<ControlBoxSpec>,
    #[serde(default)]
    pub reference: Option<ReferenceSpec>,
    #[serde(default)]
    pub initial: Option<InitialSpec>,
    #[serde(default = "default_dt")]
    pub dt: f64,
    pub t_final: f64,
    #[serde(default)]
    pub freeze: Option<String>,
    #[serde(default)]
    pub noise: Option<NoiseJson>,
    #[serde(default)]
    pub capture: Option<CaptureSpec>,
    #[serde(default = "default_band")]
    pub settling_band: f64,
    #[serde(default)]
    pub agents: Vec<AgentSpec>,
    #[serde(default)]
    pub resolve: Option<ResolveSpec>,
}

fn default_dt() -> f64 {
    0.01
}
fn default_band() -> f64 {
    0.02
}

/// A scenario after building: one vehicle or a coupled pair.
#[allow(clippy::large_enum_variant)]
pub enum Built {
    Single(Scenario),
    Multi(MultiScenario),
}

impl ScenarioSpec {
    pub fn from_json(text: &str) -> Result<Self, BuildError> {
        let spec: ScenarioSpec =
            serde_json::from_str(text).map_err(|e| BuildError::Schema(e.to_string()))?;
        if spec.schema_version != SCHEMA_VERSION {
            return schema(format!(
                "schema_version {} unsupported; this build reads {SCHEMA_VERSION}",
                spec.schema_version
            ));
        }
        Ok(spec)
    }

    /// Parse with dotted-key overrides applied to the raw JSON first.
    pub fn from_json_with_overrides(
        text: &str,
        overrides: &[(String, String)],
    ) -> Result<Self, BuildError> {
        let mut value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| BuildError::Schema(e.to_string()))?;
        for (key, raw) in overrides {
            apply_override(&mut value, key, raw)?;
        }
        Self::from_json(&value.to_string())
    }

    pub fn build(&self, base_dir: &Path) -> Result<Built, BuildError> {
        if self.agents.is_empty() {
            Ok(Built::Single(self.build_single(base_dir)?))
        } else {
            Ok(Built::Multi(self.build_multi(base_dir)?))
        }
    }

    fn build_single(&self, base_dir: &Path) -> Result<Scenario, BuildError> {
        let model_spec = self
            .model
            .as_ref()
            .ok_or_else(|| BuildError::Schema("model: missing".into()))?;
        let gains_spec = self
            .gains
            .as_ref()
            .ok_or_else(|| BuildError::Schema("gains: missing".into()))?;
        let reference_spec = self
            .reference
            .as_ref()
            .ok_or_else(|| BuildError::Schema("reference: missing".into()))?;
        let initial_spec = self
            .initial
            .as_ref()
            .ok_or_else(|| BuildError::Schema("initial: missing".into()))?;
        build_scenario(
            model_spec,
            gains_spec,
            self.control_box.as_ref(),
            reference_spec,
            initial_spec,
            self.capture.as_ref(),
            self,
            base_dir,
        )
    }

    fn build_multi(&self, base_dir: &Path) -> Result<MultiScenario, BuildError> {
        if self.agents.len() != 2 {
            return schema(format!(
                "agents: exactly 2 agents supported, got {}",
                self.agents.len()
            ));
        }
        let mut runtimes = Vec::new();
        for (i, agent) in self.agents.iter().enumerate() {
            let scenario = build_scenario(
                &agent.model,
                &agent.gains,
                agent.control_box.as_ref(),
                &agent.reference,
                &agent.initial,
                agent.capture.as_ref(),
                self,
                base_dir,
            )
            .map_err(|e| BuildError::Schema(format!("agents[{i}]: {e}")))?;
            // The disc stamped into this agent's field has the radius the
            // *other* agent declares for itself.
            let other = &self.agents[1 - i];
            let resolve = match agent.reference.hpf_parts(base_dir) {
                Some((env, sidecar, solver)) if agent.cooperative => {
                    let environment = load_env(
                        Path::new(&env),
                        sidecar.as_deref().map(Path::new),
                    )?;
                    let (altitude, taper_radius) = match scenario.reference.kind() {
                        ReferenceKind::Hpf {
                            altitude,
                            taper_radius,
                            ..
                        } => (*altitude, *taper_radius),
                        _ => (None, 1.0),
                    };
                    Some(HpfResolve {
                        base_env: Arc::new(environment),
                        params: solver.to_params(),
                        stamp_radius_cells: other.obstacle_radius_cells,
                        altitude,
                        taper_radius,
                    })
                }
                _ => None,
            };
            runtimes.push(AgentRuntime {
                scenario,
                cooperative: agent.cooperative,
                resolve,
            });
        }
        let resolve_period = match &self.resolve {
            Some(r) if r.enabled => Some(r.period),
            Some(_) => None,
            None => Some(default_resolve_period()),
        };
        Ok(MultiScenario {
            agents: runtimes,
            resolve_period,
        })
    }
}

#[allow(clippy::too_many_arguments)]
fn build_scenario(
    model_spec: &ModelSpec,
    gains_spec: &GainsSpec,
    box_spec: Option<&ControlBoxSpec>,
    reference_spec: &ReferenceSpec,
    initial_spec: &InitialSpec,
    capture_spec: Option<&CaptureSpec>,
    top: &ScenarioSpec,
    base_dir: &Path,
) -> Result<Scenario, BuildError> {
    let model = model_spec.build()?;
    let gains = ControllerGains::new(gains_spec.k_lambda, gains_spec.k_u)
        .map_err(|e| BuildError::Schema(format!("gains: {e}")))?;
    let reference = reference_spec.build(base_dir)?;
    let u0 = match &initial_spec.u {
        Some(u) => {
            if u.len() != model.control_dim() {
                return schema(format!(
                    "initial.u: {} components, model wants {}",
                    u.len(),
                    model.control_dim()
                ));
            }
            DVector::from_vec(u.clone())
        }
        None => DVector::zeros(model.control_dim()),
    };
    let initial = JointState {
        t: 0.0,
        p: Vector3::from_row_slice(&initial_spec.position),
        lambda: Vector3::from_row_slice(&initial_spec.lambda),
        u: u0,
    };
    let mut scenario = Scenario::new(model, gains, reference, initial, top.dt, top.t_final)
        .map_err(|e| BuildError::Schema(e.to_string()))?;
    scenario.settling_band = top.settling_band;

    if let Some(spec) = box_spec {
        let mode = match spec.mode.as_str() {
            "projection" => BarrierMode::Projection,
            "bang_bang" => BarrierMode::BangBang,
            other => return schema(format!("control_box.mode: unknown mode {other:?}")),
        };
        let gain = match &spec.gain {
            BarrierGainSpec::Fixed(k) => {
                if !(*k > 0.0) {
                    return schema(format!("control_box.gain must be > 0, got {k}"));
                }
                *k
            }
            BarrierGainSpec::Auto(word) if word == "auto" => resolve_auto_gain(&scenario, spec)?,
            BarrierGainSpec::Auto(other) => {
                return schema(format!(
                    "control_box.gain: expected a number or \"auto\", got {other:?}"
                ))
            }
        };
        let cbox = ControlBox::new(
            DVector::from_vec(spec.lower.clone()),
            DVector::from_vec(spec.upper.clone()),
            mode,
            gain,
        )
        .map_err(|e| BuildError::Schema(format!("control_box: {e}")))?;
        scenario = scenario
            .with_control_box(cbox)
            .map_err(|e| BuildError::Schema(e.to_string()))?;
    }
    if let Some(noise) = &top.noise {
        if !(noise.amplitude >= 0.0) {
            return schema("noise.amplitude must be >= 0".to_string());
        }
        scenario = scenario.with_noise(NoiseSpec {
            amplitude: noise.amplitude,
            seed: noise.seed,
        });
    }
    if let Some(freeze) = &top.freeze {
        let mode = match freeze.as_str() {
            "lambda" => FreezeMode::LambdaLevel,
            "p" => FreezeMode::PLevel,
            other => return schema(format!("freeze: expected \"lambda\" or \"p\", got {other:?}")),
        };
        scenario = scenario.with_freeze(mode);
    }
    if let Some(c) = capture_spec {
        let rule = apply_capture_overrides(&scenario.capture, c);
        scenario = scenario.with_capture(rule);
    }
    Ok(scenario)
}

fn apply_capture_overrides(base: &CaptureRule, spec: &CaptureSpec) -> CaptureRule {
    match base.clone() {
        CaptureRule::None => CaptureRule::None,
        CaptureRule::Point { target, radius } => CaptureRule::Point {
            target,
            radius: spec.radius.unwrap_or(radius),
        },
        CaptureRule::Hpf {
            target,
            planar,
            radius,
            v_stop,
            inner_radius,
        } => CaptureRule::Hpf {
            target,
            planar,
            radius: spec.radius.unwrap_or(radius),
            v_stop: spec.v_stop.unwrap_or(v_stop),
            inner_radius: spec.inner_radius.unwrap_or(inner_radius),
        },
    }
}

/// Resolve an "auto" barrier gain by sampling control rates over plausible
/// states around the run and bounding their magnitude, times a safety
/// factor of two.
fn resolve_auto_gain(scenario: &Scenario, spec: &ControlBoxSpec) -> Result<f64, BuildError> {
    if spec.auto_samples == 0 {
        return schema("control_box.auto_samples must be > 0".to_string());
    }
    if spec.lower.len() != spec.upper.len() || spec.lower.len() != scenario.model.control_dim() {
        return schema(format!(
            "control_box: bounds must have {} components",
            scenario.model.control_dim()
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.auto_seed);
    let v_ref = scenario.reference.v_ref();
    let span = scenario
        .reference
        .target_point()
        .map(|t| t - scenario.initial.p)
        .unwrap_or_else(|| Vector3::new(1.0, 1.0, 1.0) * v_ref * scenario.t_final * 0.1);
    let mut samples = Vec::with_capacity(spec.auto_samples);
    let mut guard = 0usize;
    while samples.len() < spec.auto_samples && guard < spec.auto_samples * 20 {
        guard += 1;
        let s: f64 = rng.gen_range(0.0..1.0);
        let jitter = Vector3::new(
            rng.gen_range(-0.5..0.5),
            rng.gen_range(-0.5..0.5),
            rng.gen_range(-0.5..0.5),
        );
        let p = scenario.initial.p + span * s + jitter;
        let Ok(p_dot_r) = scenario.reference.velocity(&p) else {
            continue; // outside a gridded reference: resample
        };
        let lambda = Vector3::new(
            rng.gen_range(0.0..2.0 * v_ref),
            rng.gen_range(-1.2..1.2),
            rng.gen_range(-3.0..3.0),
        );
        let u = DVector::from_fn(spec.lower.len(), |i, _| {
            rng.gen_range(spec.lower[i]..=spec.upper[i])
        });
        samples.push(BarrierSample {
            lambda,
            u,
            p_dot_r,
        });
    }
    if samples.is_empty() {
        return schema("control_box: auto gain sampling found no valid states".to_string());
    }
    barrier_gain_bound(scenario.model.as_ref(), &scenario.gains, &samples, 2.0)
        .map_err(|e| BuildError::Schema(e.to_string()))
}

/// Apply one `key.path=value` override to parsed JSON. Array elements are
/// addressed by numeric segments. The path must already exist.
pub fn apply_override(
    root: &mut serde_json::Value,
    dotted_key: &str,
    raw_value: &str,
) -> Result<(), BuildError> {
    let mut cursor = root;
    let segments: Vec<&str> = dotted_key.split('.').collect();
    for (depth, segment) in segments.iter().enumerate() {
        let here = || segments[..=depth].join(".");
        let next = match cursor {
            serde_json::Value::Object(map) => map.get_mut(*segment),
            serde_json::Value::Array(items) => segment
                .parse::<usize>()
                .ok()
                .and_then(|i| items.get_mut(i)),
            _ => None,
        };
        match next {
            Some(v) => cursor = v,
            None => {
                return schema(format!(
                    "override key {dotted_key:?} does not resolve: no {:?}",
                    here()
                ))
            }
        }
    }
    *cursor = serde_json::from_str(raw_value)
        .unwrap_or_else(|_| serde_json::Value::String(raw_value.to_string()));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_line_json() -> String {
        r#"{
            "schema_version": 1,
            "model": {"name": "fixed_wing", "gravity": 0.0},
            "gains": {"k_lambda": 2.0, "k_u": 1.0},
            "reference": {"type": "line", "v_ref": 1.0,
                          "direction": [1, 0, 0], "anchor": [0, 2, 2]},
            "initial": {"position": [0, 0, 0], "lambda": [0, 0, 0.7853981633974483]},
            "t_final": 1.0
        }"#
        .to_string()
    }

    #[test]
    fn minimal_scenario_builds() {
        let spec = ScenarioSpec::from_json(&minimal_line_json()).unwrap();
        let built = spec.build(Path::new(".")).unwrap();
        match built {
            Built::Single(s) => {
                assert_eq!(s.model.name(), "fixed_wing");
                assert_eq!(s.dt, 0.01);
            }
            Built::Multi(_) => panic!("expected single"),
        }
    }

    #[test]
    fn override_edits_nested_keys() {
        let spec = ScenarioSpec::from_json_with_overrides(
            &minimal_line_json(),
            &[
                ("gains.k_u".into(), "3.5".into()),
                ("initial.lambda.2".into(), "0".into()),
            ],
        )
        .unwrap();
        assert_eq!(spec.gains.as_ref().unwrap().k_u, 3.5);
        assert_eq!(spec.initial.as_ref().unwrap().lambda[2], 0.0);
    }

    #[test]
    fn override_requires_existing_path() {
        let err = ScenarioSpec::from_json_with_overrides(
            &minimal_line_json(),
            &[("gains.k_w".into(), "1".into())],
        )
        .unwrap_err();
        assert!(err.to_string().contains("gains.k_w"), "{err}");
    }

    #[test]
    fn zero_gain_is_rejected() {
        let spec = ScenarioSpec::from_json_with_overrides(
            &minimal_line_json(),
            &[("gains.k_u".into(), "0".into())],
        )
        .unwrap();
        let err = match spec.build(Path::new(".")) {
            Err(e) => e,
            Ok(_) => panic!("zero gain accepted"),
        };
        assert!(err.to_string().contains("k_u"), "{err}");
    }

    #[test]
    fn unknown_schema_version_is_rejected() {
        let json = minimal_line_json().replace("\"schema_version\": 1", "\"schema_version\": 9");
        assert!(ScenarioSpec::from_json(&json).is_err());
    }
}
