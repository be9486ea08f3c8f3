//! Potential fields on grids: boundary-value solves, gradient queries, and
//! gradient descent.
//!
//! Three problems are supported: the isotropic harmonic field (obstacles
//! pinned high, target pinned low), the directionally-switched anisotropic
//! variant, and the fitness-weighted divergence-form variant pinned at the
//! start and target only.

mod solve;

pub use solve::{
    solve_anisotropic, solve_laplace, solve_weighted, SigmaParams, SolveError, SolverParams,
};

use crate::grid::{CellClass, GridEnvironment};
use std::sync::Arc;
use thiserror::Error;

/// Which boundary-value problem produced a field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldVariant {
    Laplace,
    Anisotropic,
    Weighted,
}

/// Floor applied to the gradient norm when normalizing descent directions.
pub const GRADIENT_NORM_FLOOR: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum QueryError {
    #[error("position ({0}, {1}, {2}) outside grid bounds", position[0], position[1], position[2])]
    OutOfBounds { position: [f64; 3] },
    #[error("position ({0}, {1}, {2}) inside an impassable cell", position[0], position[1], position[2])]
    Impassable { position: [f64; 3] },
}

/// A solved potential field over a grid environment.
///
/// `values` holds V with V = 1 on obstacle pins. Queries differentiate the
/// complement `w = 1 - V` instead, which retains relative resolution in
/// regions where V is within machine epsilon of 1 (deep pockets behind
/// obstacles would otherwise quantize to a zero gradient).
#[derive(Debug, Clone)]
pub struct PotentialField {
    env: Arc<GridEnvironment>,
    values: Vec<f64>,
    complement: Vec<f64>,
    /// Dirichlet-pinned or solve-excluded cells; gradient queries difference
    /// one-sided toward these so the boundary layer is not smeared.
    query_pinned: Vec<bool>,
    /// Cells that were unknowns in the solve.
    solvable: Vec<bool>,
    target: usize,
    residual: f64,
    iterations: usize,
    variant: FieldVariant,
    sigma: Option<SigmaParams>,
}

impl PotentialField {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn from_solution(
        env: Arc<GridEnvironment>,
        complement: Vec<f64>,
        solvable: Vec<bool>,
        pinned: Vec<bool>,
        target: usize,
        residual: f64,
        iterations: usize,
        variant: FieldVariant,
        sigma: Option<SigmaParams>,
    ) -> Self {
        let values = complement.iter().map(|w| 1.0 - w).collect();
        let query_pinned = (0..env.cell_count())
            .map(|i| pinned[i] || !solvable[i])
            .collect();
        Self {
            env,
            values,
            complement,
            query_pinned,
            solvable,
            target,
            residual,
            iterations,
            variant,
            sigma,
        }
    }

    pub fn env(&self) -> &GridEnvironment {
        &self.env
    }

    pub fn env_arc(&self) -> Arc<GridEnvironment> {
        self.env.clone()
    }

    /// Potential V per cell, row-major.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Complement 1 - V per cell; full relative resolution near V = 1.
    pub fn complement(&self) -> &[f64] {
        &self.complement
    }

    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn variant(&self) -> FieldVariant {
        self.variant
    }

    pub fn sigma(&self) -> Option<SigmaParams> {
        self.sigma
    }

    pub fn target_cell(&self) -> usize {
        self.target
    }

    /// World-space center of the target cell.
    pub fn target_center(&self) -> [f64; 3] {
        self.env.cell_center(self.target)
    }

    /// Cells reachable from the target through solved cells.
    pub fn reachable_mask(&self) -> Vec<bool> {
        let solvable = &self.solvable;
        let target = self.target;
        self.env
            .flood_fill(target, |c| c == target || solvable[c])
    }

    pub fn is_solvable(&self, index: usize) -> bool {
        self.solvable[index]
    }

    fn axis_extent(&self, axis: usize) -> usize {
        self.env.shape()[axis]
    }

    /// True when a query position must be rejected (obstacle, or zero-fitness
    /// cell in a weighted field).
    fn cell_impassable(&self, index: usize) -> bool {
        match self.env.class(index) {
            CellClass::Obstacle => true,
            _ => self.variant == FieldVariant::Weighted && self.env.beta(index) == 0.0,
        }
    }

    /// Finite-difference gradient of the complement at a grid node.
    ///
    /// Central differences between free cells; one-sided toward pinned
    /// neighbors so obstacle pins repel at full strength.
    fn node_gradient_w(&self, index: usize) -> [f64; 3] {
        let shape = self.env.shape();
        let coords = self.env.coords(index);
        let h = self.env.spacing();
        let w = &self.complement;
        let mut grad = [0.0; 3];
        for axis in 0..3 {
            if shape[axis] == 1 {
                continue;
            }
            let plus = if coords[axis] + 1 < shape[axis] {
                let mut c = coords;
                c[axis] += 1;
                Some(self.env.index(c[0], c[1], c[2]))
            } else {
                None
            };
            let minus = if coords[axis] > 0 {
                let mut c = coords;
                c[axis] -= 1;
                Some(self.env.index(c[0], c[1], c[2]))
            } else {
                None
            };
            grad[axis] = match (plus, minus) {
                (Some(p), Some(m)) => {
                    let p_pinned = self.query_pinned[p];
                    let m_pinned = self.query_pinned[m];
                    if p_pinned && !m_pinned {
                        (w[p] - w[index]) / h
                    } else if m_pinned && !p_pinned {
                        (w[index] - w[m]) / h
                    } else {
                        (w[p] - w[m]) / (2.0 * h)
                    }
                }
                (Some(p), None) => (w[p] - w[index]) / h,
                (None, Some(m)) => (w[index] - w[m]) / h,
                (None, None) => 0.0,
            };
        }
        grad
    }

    /// Potential V at a continuous position, by multilinear interpolation
    /// over passable corner nodes.
    pub fn value_at(&self, p: [f64; 3]) -> Result<f64, QueryError> {
        Ok(1.0 - self.complement_at(p)?)
    }

    /// Complement 1 - V at a continuous position; retains resolution where V
    /// rounds to 1.
    pub fn complement_at(&self, p: [f64; 3]) -> Result<f64, QueryError> {
        let cell = self
            .env
            .cell_at(p)
            .ok_or(QueryError::OutOfBounds { position: p })?;
        if self.cell_impassable(cell) {
            return Err(QueryError::Impassable { position: p });
        }
        let mut acc = 0.0;
        let mut total = 0.0;
        self.for_corners(p, |node, weight| {
            acc += weight * self.complement[node];
            total += weight;
        });
        Ok(if total > 1e-12 {
            acc / total
        } else {
            self.complement[cell]
        })
    }

    /// Visit the passable interpolation corners around `p` with their
    /// multilinear weights.
    fn for_corners(&self, p: [f64; 3], mut visit: impl FnMut(usize, f64)) {
        let h = self.env.spacing();
        let mut base = [0usize; 3];
        let mut frac = [0.0f64; 3];
        for axis in 0..3 {
            let n = self.axis_extent(axis);
            if n == 1 {
                continue;
            }
            let s = (p[axis] / h - 0.5).clamp(0.0, (n - 1) as f64);
            let i0 = (s.floor() as usize).min(n - 2);
            base[axis] = i0;
            frac[axis] = s - i0 as f64;
        }
        for dz in 0..2 {
            if self.axis_extent(2) == 1 && dz == 1 {
                continue;
            }
            for dy in 0..2 {
                if self.axis_extent(1) == 1 && dy == 1 {
                    continue;
                }
                for dx in 0..2 {
                    if self.axis_extent(0) == 1 && dx == 1 {
                        continue;
                    }
                    let axis_weight = |axis: usize, d: usize| {
                        if self.axis_extent(axis) == 1 {
                            1.0
                        } else if d == 0 {
                            1.0 - frac[axis]
                        } else {
                            frac[axis]
                        }
                    };
                    let weight = axis_weight(0, dx) * axis_weight(1, dy) * axis_weight(2, dz);
                    if weight == 0.0 {
                        continue;
                    }
                    let node = self.env.index(base[0] + dx, base[1] + dy, base[2] + dz);
                    if self.cell_impassable(node) {
                        continue;
                    }
                    visit(node, weight);
                }
            }
        }
    }

    /// Gradient of V at a continuous position, by multilinear interpolation
    /// of per-node gradients. Units: potential per length.
    pub fn gradient_at(&self, p: [f64; 3]) -> Result<[f64; 3], QueryError> {
        let cell = self
            .env
            .cell_at(p)
            .ok_or(QueryError::OutOfBounds { position: p })?;
        if self.cell_impassable(cell) {
            return Err(QueryError::Impassable { position: p });
        }
        // Impassable corner nodes are excluded and the weights renormalized:
        // wall cells already repel through the one-sided differences of their
        // free neighbors, and their own node values carry no field
        // information.
        let mut grad_w = [0.0f64; 3];
        let mut total_weight = 0.0f64;
        self.for_corners(p, |node, weight| {
            let g = self.node_gradient_w(node);
            for (acc, component) in grad_w.iter_mut().zip(g) {
                *acc += weight * component;
            }
            total_weight += weight;
        });
        if total_weight > 1e-12 {
            for component in &mut grad_w {
                *component /= total_weight;
            }
        } else {
            // Query pressed against a wall face: fall back on the owning
            // cell's node gradient.
            grad_w = self.node_gradient_w(cell);
        }
        // V = 1 - w.
        Ok([-grad_w[0], -grad_w[1], -grad_w[2]])
    }
}

/// Integration scheme for gradient descent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DescentScheme {
    Euler,
    Rk4,
}

#[derive(Debug, Clone)]
pub struct DescentOptions {
    /// Spatial step per move, in length units.
    pub step: f64,
    pub max_steps: usize,
    pub scheme: DescentScheme,
}

impl DescentOptions {
    pub fn for_field(field: &PotentialField) -> Self {
        let shape = field.env().shape();
        let cells: usize = shape.iter().product();
        Self {
            step: field.env().spacing() * 0.5,
            // Generous bound: a serpentine path visits each cell a few times.
            max_steps: 8 * cells.max(64),
            scheme: DescentScheme::Euler,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DescentTermination {
    /// Came within one cell spacing of the target center.
    ReachedTarget,
    /// Step budget exhausted or progress blocked (stagnation).
    StepLimit,
}

/// Polyline produced by gradient descent.
#[derive(Debug, Clone)]
pub struct DescentPath {
    pub points: Vec<[f64; 3]>,
    pub termination: DescentTermination,
    /// Total arc length of the polyline.
    pub length: f64,
}

impl PotentialField {
    /// Follow the normalized negative gradient from `start` until within one
    /// cell spacing of the target.
    pub fn descend(
        &self,
        start: [f64; 3],
        opts: &DescentOptions,
    ) -> Result<DescentPath, QueryError> {
        let cell = self
            .env
            .cell_at(start)
            .ok_or(QueryError::OutOfBounds { position: start })?;
        if self.cell_impassable(cell) {
            return Err(QueryError::Impassable { position: start });
        }
        let target = self.target_center();
        let capture = self.env.spacing();
        // Termination distance over live axes only; a planar field should
        // capture regardless of the query's coordinate on a degenerate axis.
        let shape = self.env.shape();
        let grid_distance = |a: [f64; 3], b: [f64; 3]| {
            let mut acc = 0.0;
            for axis in 0..3 {
                if shape[axis] > 1 {
                    acc += (a[axis] - b[axis]).powi(2);
                }
            }
            acc.sqrt()
        };
        let mut points = vec![start];
        let mut p = start;
        let mut length = 0.0;
        let mut termination = DescentTermination::StepLimit;
        // Anti-stall mode: the discrete complement strictly increases toward
        // the target along face neighbors (no spurious extrema), so whenever
        // the interpolated flow stops making headway — wall layers can bend
        // it into shallow cycles near corners — the walk follows discrete
        // uphill neighbors until it has climbed well out of the stall basin,
        // then hands back to the field.
        let mut best_w = self.complement[self.env.cell_at(p).unwrap()];
        let mut stalled = 0usize;
        let mut assist_until: Option<f64> = None;
        for _ in 0..opts.max_steps {
            if grid_distance(p, target) < capture {
                termination = DescentTermination::ReachedTarget;
                break;
            }
            let here = self.complement[self.env.cell_at(p).unwrap()];
            if let Some(threshold) = assist_until {
                if here >= threshold {
                    assist_until = None;
                    stalled = 0;
                }
            }
            if assist_until.is_none() && stalled >= 24 {
                assist_until = Some(best_w * 4.0);
            }
            let next = if assist_until.is_some() {
                self.assist_step(p, opts.step)
            } else {
                self.try_step(p, opts)
                    .or_else(|| self.assist_step(p, opts.step))
            };
            let Some(next) = next else {
                break; // genuine stagnation
            };
            length += distance(p, next);
            p = next;
            points.push(p);
            let here = self.complement[self.env.cell_at(p).unwrap()];
            if here > best_w {
                best_w = here;
                stalled = 0;
            } else {
                stalled += 1;
            }
        }
        if termination != DescentTermination::ReachedTarget && grid_distance(p, target) < capture {
            termination = DescentTermination::ReachedTarget;
        }
        Ok(DescentPath {
            points,
            termination,
            length,
        })
    }

    /// Normalized descent direction, or None when the position is invalid.
    fn direction_at(&self, p: [f64; 3]) -> Option<[f64; 3]> {
        let g = self.gradient_at(p).ok()?;
        let d = [-g[0], -g[1], -g[2]];
        let norm = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        let scale = 1.0 / norm.max(GRADIENT_NORM_FLOOR);
        Some([d[0] * scale, d[1] * scale, d[2] * scale])
    }

    /// One step aimed at the face neighbor with the largest complement:
    /// strictly uphill toward the target on the discrete field.
    fn assist_step(&self, p: [f64; 3], step: f64) -> Option<[f64; 3]> {
        let cell = self.env.cell_at(p)?;
        let here = self.complement[cell];
        let mut best: Option<(usize, f64)> = None;
        for nb in self.env.neighbors(cell) {
            if self.cell_impassable(nb) {
                continue;
            }
            let w = self.complement[nb];
            if w > here && best.is_none_or(|(_, b)| w > b) {
                best = Some((nb, w));
            }
        }
        let (nb, _) = best?;
        let c = self.env.cell_center(nb);
        let d = [c[0] - p[0], c[1] - p[1], c[2] - p[2]];
        let norm = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        if norm < GRADIENT_NORM_FLOOR {
            return None;
        }
        let scale = step.min(norm) / norm;
        let candidate = offset(p, d, scale);
        self.passable_at(candidate).then_some(candidate)
    }

    fn passable_at(&self, p: [f64; 3]) -> bool {
        match self.env.cell_at(p) {
            Some(cell) => !self.cell_impassable(cell),
            None => false,
        }
    }

    /// One descent move. A candidate landing in an impassable cell first
    /// retries at halved steps, then slides: the motion component pointing
    /// into a blocked face is dropped and the tangential remainder taken,
    /// mirroring the wall-parallel flow of the continuous field. Returns
    /// None when no progress is possible.
    fn try_step(&self, p: [f64; 3], opts: &DescentOptions) -> Option<[f64; 3]> {
        let direction = match opts.scheme {
            DescentScheme::Euler => self.direction_at(p)?,
            DescentScheme::Rk4 => {
                let step = opts.step;
                let k1 = self.direction_at(p)?;
                let mid1 = offset(p, k1, step * 0.5);
                let k2 = self.direction_at(mid1).unwrap_or(k1);
                let mid2 = offset(p, k2, step * 0.5);
                let k3 = self.direction_at(mid2).unwrap_or(k2);
                let end = offset(p, k3, step);
                let k4 = self.direction_at(end).unwrap_or(k3);
                let mut d = [0.0; 3];
                for (a, out) in d.iter_mut().enumerate() {
                    *out = (k1[a] + 2.0 * k2[a] + 2.0 * k3[a] + k4[a]) / 6.0;
                }
                d
            }
        };
        let speed = (direction[0] * direction[0]
            + direction[1] * direction[1]
            + direction[2] * direction[2])
            .sqrt();
        if speed < GRADIENT_NORM_FLOOR {
            return None; // stagnation
        }
        let mut step = opts.step;
        for _ in 0..4 {
            let candidate = offset(p, direction, step);
            if self.passable_at(candidate) {
                return Some(candidate);
            }
            step *= 0.5;
        }
        // Slide: drop every axis component whose own motion is blocked.
        let mut slid = direction;
        for axis in 0..3 {
            if slid[axis] == 0.0 {
                continue;
            }
            let mut probe = p;
            probe[axis] += opts.step * slid[axis].signum() * 0.75;
            if !self.passable_at(probe) {
                slid[axis] = 0.0;
            }
        }
        let tangential = (slid[0] * slid[0] + slid[1] * slid[1] + slid[2] * slid[2]).sqrt();
        if tangential < GRADIENT_NORM_FLOOR * opts.step {
            return None;
        }
        let mut step = opts.step;
        for _ in 0..4 {
            let candidate = offset(p, slid, step / tangential.max(1.0));
            if self.passable_at(candidate) {
                return Some(candidate);
            }
            step *= 0.5;
        }
        None
    }
}

fn offset(p: [f64; 3], d: [f64; 3], s: f64) -> [f64; 3] {
    [p[0] + s * d[0], p[1] + s * d[1], p[2] + s * d[2]]
}

fn distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{CellClass, GridEnvironment};

    /// 5-node strip: node0 obstacle, node4 target, interior free.
    pub(crate) fn strip_env(n: usize, spacing: f64) -> GridEnvironment {
        let mut env = GridEnvironment::new_2d(n, 1, spacing).unwrap();
        env.set_class(0, CellClass::Obstacle);
        env.set_class(n - 1, CellClass::Target);
        env
    }

    #[test]
    fn strip_gradient_is_constant() {
        let env = strip_env(5, 1.0);
        let field = solve_laplace(env, &SolverParams::default()).unwrap();
        // V = 1 - x/L with L = 4 cell spacings.
        let expected = -0.25;
        for p in [[1.5, 0.5, 0.0], [2.0, 0.5, 0.0], [3.25, 0.5, 0.0]] {
            let g = field.gradient_at(p).unwrap();
            assert!((g[0] - expected).abs() < 1e-7, "grad {:?} at {:?}", g, p);
            assert_eq!(g[1], 0.0);
            assert_eq!(g[2], 0.0);
        }
    }

    #[test]
    fn face_midpoint_matches_node_gradient() {
        let env = strip_env(5, 0.5);
        let field = solve_laplace(env, &SolverParams::default()).unwrap();
        // Finite-difference oracle from the two flanking nodes.
        let v = field.values();
        let oracle = (v[2] - v[1]) / 0.5;
        let g = field.gradient_at([1.0, 0.25, 0.0]).unwrap(); // face between nodes 1 and 2
        assert!((g[0] - oracle).abs() < 1e-7);
        assert!((g[0] + 0.5).abs() < 1e-6); // same constant slope as at the nodes
    }

    #[test]
    fn gradient_rejects_obstacle_and_out_of_bounds() {
        let env = strip_env(5, 1.0);
        let field = solve_laplace(env, &SolverParams::default()).unwrap();
        assert!(matches!(
            field.gradient_at([0.2, 0.5, 0.0]),
            Err(QueryError::Impassable { .. })
        ));
        assert!(matches!(
            field.gradient_at([9.0, 0.5, 0.0]),
            Err(QueryError::OutOfBounds { .. })
        ));
    }

    #[test]
    fn symmetric_field_gradient_vanishes_at_target() {
        let mut env = GridEnvironment::new_2d(5, 5, 1.0).unwrap();
        env.set_border_obstacles();
        env.set_class(env.index(2, 2, 0), CellClass::Target);
        let field = solve_laplace(env, &SolverParams::default()).unwrap();
        let g = field.gradient_at([2.5, 2.5, 0.0]).unwrap();
        let norm = (g[0] * g[0] + g[1] * g[1]).sqrt();
        assert!(norm < 1e-7, "norm {norm}");
    }

    #[test]
    fn descend_from_target_is_immediate() {
        let env = strip_env(5, 1.0);
        let field = solve_laplace(env, &SolverParams::default()).unwrap();
        let opts = DescentOptions::for_field(&field);
        let path = field.descend(field.target_center(), &opts).unwrap();
        assert_eq!(path.termination, DescentTermination::ReachedTarget);
        assert_eq!(path.points.len(), 1);
        assert_eq!(path.length, 0.0);
    }

    #[test]
    fn descend_runs_the_strip() {
        let env = strip_env(9, 1.0);
        let field = solve_laplace(env, &SolverParams::default()).unwrap();
        let opts = DescentOptions::for_field(&field);
        let path = field.descend([1.5, 0.5, 0.0], &opts).unwrap();
        assert_eq!(path.termination, DescentTermination::ReachedTarget);
        // Straight run: start to one-cell capture around node 8 center.
        let expected = (8.5 - 1.5) - 1.0;
        assert!(
            (path.length - expected).abs() <= opts.step + 1e-9,
            "length {}",
            path.length
        );
    }

    #[test]
    fn descend_reaches_target_from_every_free_cell() {
        let mut env = GridEnvironment::new_2d(5, 5, 1.0).unwrap();
        env.set_border_obstacles();
        env.set_class(env.index(2, 2, 0), CellClass::Target);
        let field = solve_laplace(env, &SolverParams::default()).unwrap();
        let opts = DescentOptions::for_field(&field);
        for idx in 0..field.env().cell_count() {
            if field.env().class(idx) != CellClass::Free {
                continue;
            }
            let path = field.descend(field.env().cell_center(idx), &opts).unwrap();
            assert_eq!(
                path.termination,
                DescentTermination::ReachedTarget,
                "stuck from cell {idx}"
            );
        }
    }
}
