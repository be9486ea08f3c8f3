//! Gridded workspace representation: cell classes, motion fitness, and
//! directional-constraint annotations.
//!
//! Grids are uniform Cartesian, 2-D or 3-D, stored row-major with the x
//! index fastest. A 2-D grid is a 3-D grid with a single z layer; axes of
//! extent 1 are degenerate and drop out of every stencil. Cell `(i, j, k)`
//! has its center at `((i + 0.5) h, (j + 0.5) h, (k + 0.5) h)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Classification of a single grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CellClass {
    /// Traversable workspace.
    Free,
    /// Forbidden region; potential pinned high.
    Obstacle,
    /// The goal cell; potential pinned to zero.
    Target,
    /// Trajectory origin; pinned only in the weighted problem.
    Start,
}

impl CellClass {
    pub fn code(self) -> u8 {
        match self {
            CellClass::Free => 0,
            CellClass::Obstacle => 1,
            CellClass::Target => 2,
            CellClass::Start => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(CellClass::Free),
            1 => Some(CellClass::Obstacle),
            2 => Some(CellClass::Target),
            3 => Some(CellClass::Start),
            _ => None,
        }
    }
}

/// Directional-constraint annotation: the subregion where constraints apply
/// and the preferred unit direction per constrained cell.
#[derive(Debug, Clone, Default)]
pub struct DirectionalConstraints {
    /// Per-cell membership mask for the constrained region.
    pub mask: Vec<bool>,
    /// Unit direction per cell; meaningful only where `mask` is set.
    pub vectors: Vec<[f64; 3]>,
}

#[derive(Debug, Error)]
pub enum GridError {
    #[error("axis {axis} has extent {extent}; each axis must be 1 or >= 3")]
    BadAxisExtent { axis: usize, extent: usize },
    #[error("spacing must be > 0, got {0}")]
    BadSpacing(f64),
    #[error("beta[{index}] = {value} outside [0, 1]")]
    BetaOutOfRange { index: usize, value: f64 },
    #[error("directional vector at cell {index} has norm {norm}; must be unit within 1e-9")]
    NonUnitDirection { index: usize, norm: f64 },
    #[error("cell index {index} out of range for {cells} cells")]
    IndexOutOfRange { index: usize, cells: usize },
}

/// A discretized workspace: cell classes, fitness values, and optional
/// directional constraints on a uniform grid.
#[derive(Debug, Clone)]
pub struct GridEnvironment {
    shape: [usize; 3],
    spacing: f64,
    classes: Vec<CellClass>,
    beta: Vec<f64>,
    directional: Option<DirectionalConstraints>,
}

impl GridEnvironment {
    /// New 2-D grid, all cells free with beta = 1.
    pub fn new_2d(nx: usize, ny: usize, spacing: f64) -> Result<Self, GridError> {
        Self::new([nx, ny, 1], spacing)
    }

    /// New 3-D grid, all cells free with beta = 1.
    pub fn new_3d(nx: usize, ny: usize, nz: usize, spacing: f64) -> Result<Self, GridError> {
        Self::new([nx, ny, nz], spacing)
    }

    pub fn new(shape: [usize; 3], spacing: f64) -> Result<Self, GridError> {
        for (axis, &extent) in shape.iter().enumerate() {
            if extent == 0 || extent == 2 {
                return Err(GridError::BadAxisExtent { axis, extent });
            }
        }
        if !(spacing > 0.0) {
            return Err(GridError::BadSpacing(spacing));
        }
        let n = shape[0] * shape[1] * shape[2];
        Ok(Self {
            shape,
            spacing,
            classes: vec![CellClass::Free; n],
            beta: vec![1.0; n],
            directional: None,
        })
    }

    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }

    /// 2 when the z axis is degenerate, else 3.
    pub fn dims(&self) -> usize {
        if self.shape[2] == 1 {
            2
        } else {
            3
        }
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn cell_count(&self) -> usize {
        self.classes.len()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.shape[1] + j) * self.shape[0] + i
    }

    #[inline]
    pub fn coords(&self, index: usize) -> [usize; 3] {
        let i = index % self.shape[0];
        let rest = index / self.shape[0];
        [i, rest % self.shape[1], rest / self.shape[1]]
    }

    /// World-space center of a cell.
    pub fn cell_center(&self, index: usize) -> [f64; 3] {
        let c = self.coords(index);
        [
            (c[0] as f64 + 0.5) * self.spacing,
            (c[1] as f64 + 0.5) * self.spacing,
            (c[2] as f64 + 0.5) * self.spacing,
        ]
    }

    /// Cell containing a world position, or None if out of bounds.
    pub fn cell_at(&self, p: [f64; 3]) -> Option<usize> {
        let mut idx = [0usize; 3];
        for a in 0..3 {
            let extent = self.shape[a] as f64 * self.spacing;
            if self.shape[a] == 1 {
                // Degenerate axis: accept any coordinate.
                idx[a] = 0;
                continue;
            }
            if p[a] < 0.0 || p[a] > extent {
                return None;
            }
            idx[a] = ((p[a] / self.spacing) as usize).min(self.shape[a] - 1);
        }
        Some(self.index(idx[0], idx[1], idx[2]))
    }

    pub fn class(&self, index: usize) -> CellClass {
        self.classes[index]
    }

    pub fn classes(&self) -> &[CellClass] {
        &self.classes
    }

    pub fn set_class(&mut self, index: usize, class: CellClass) {
        // Keep beta consistent with the common case; callers may override after.
        if class == CellClass::Obstacle {
            self.beta[index] = 0.0;
        } else if self.beta[index] == 0.0 {
            self.beta[index] = 1.0;
        }
        self.classes[index] = class;
    }

    pub fn beta(&self, index: usize) -> f64 {
        self.beta[index]
    }

    pub fn betas(&self) -> &[f64] {
        &self.beta
    }

    pub fn set_beta(&mut self, index: usize, value: f64) -> Result<(), GridError> {
        if !(0.0..=1.0).contains(&value) {
            return Err(GridError::BetaOutOfRange { index, value });
        }
        self.beta[index] = value;
        Ok(())
    }

    /// Mark every cell on the outer border (along non-degenerate axes) as an obstacle.
    pub fn set_border_obstacles(&mut self) {
        for index in 0..self.cell_count() {
            if self.is_border(index) {
                self.set_class(index, CellClass::Obstacle);
            }
        }
    }

    pub fn is_border(&self, index: usize) -> bool {
        let c = self.coords(index);
        (0..3).any(|a| self.shape[a] > 1 && (c[a] == 0 || c[a] == self.shape[a] - 1))
    }

    /// Set the directional-constraint direction of one cell; the vector must be unit.
    pub fn set_direction(&mut self, index: usize, dir: [f64; 3]) -> Result<(), GridError> {
        if index >= self.cell_count() {
            return Err(GridError::IndexOutOfRange {
                index,
                cells: self.cell_count(),
            });
        }
        let norm = (dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]).sqrt();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(GridError::NonUnitDirection { index, norm });
        }
        let n = self.cell_count();
        let d = self.directional.get_or_insert_with(|| DirectionalConstraints {
            mask: vec![false; n],
            vectors: vec![[0.0; 3]; n],
        });
        d.mask[index] = true;
        d.vectors[index] = dir;
        Ok(())
    }

    pub fn directional(&self) -> Option<&DirectionalConstraints> {
        self.directional.as_ref()
    }

    /// Sole target cell, if exactly one exists.
    pub fn target_cell(&self) -> Option<usize> {
        let mut found = None;
        for (i, &c) in self.classes.iter().enumerate() {
            if c == CellClass::Target {
                if found.is_some() {
                    return None;
                }
                found = Some(i);
            }
        }
        found
    }

    /// Sole start cell, if exactly one exists.
    pub fn start_cell(&self) -> Option<usize> {
        let mut found = None;
        for (i, &c) in self.classes.iter().enumerate() {
            if c == CellClass::Start {
                if found.is_some() {
                    return None;
                }
                found = Some(i);
            }
        }
        found
    }

    /// Face neighbors of a cell along non-degenerate axes.
    pub fn neighbors(&self, index: usize) -> NeighborIter<'_> {
        NeighborIter {
            grid: self,
            coords: self.coords(index),
            axis: 0,
            side: 0,
        }
    }

    /// Flood fill over cells accepted by `passable`, starting from `seed`.
    /// Returns the membership mask.
    pub fn flood_fill<F: Fn(usize) -> bool>(&self, seed: usize, passable: F) -> Vec<bool> {
        let mut mask = vec![false; self.cell_count()];
        if !passable(seed) {
            return mask;
        }
        let mut stack = vec![seed];
        mask[seed] = true;
        while let Some(cell) = stack.pop() {
            for nb in self.neighbors(cell) {
                if !mask[nb] && passable(nb) {
                    mask[nb] = true;
                    stack.push(nb);
                }
            }
        }
        mask
    }
}

/// Iterator over the 2/4/6 face neighbors of a cell.
pub struct NeighborIter<'a> {
    grid: &'a GridEnvironment,
    coords: [usize; 3],
    axis: usize,
    side: u8,
}

impl Iterator for NeighborIter<'_> {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        while self.axis < 3 {
            let a = self.axis;
            let side = self.side;
            if self.side == 0 {
                self.side = 1;
            } else {
                self.side = 0;
                self.axis += 1;
            }
            if self.grid.shape[a] == 1 {
                self.axis = a + 1;
                self.side = 0;
                continue;
            }
            let c = self.coords;
            if side == 0 {
                if c[a] > 0 {
                    let mut n = c;
                    n[a] -= 1;
                    return Some(self.grid.index(n[0], n[1], n[2]));
                }
            } else if c[a] + 1 < self.grid.shape[a] {
                let mut n = c;
                n[a] += 1;
                return Some(self.grid.index(n[0], n[1], n[2]));
            }
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indexing_round_trips() {
        let g = GridEnvironment::new_3d(4, 5, 3, 0.5).unwrap();
        for idx in 0..g.cell_count() {
            let c = g.coords(idx);
            assert_eq!(g.index(c[0], c[1], c[2]), idx);
        }
    }

    #[test]
    fn degenerate_axis_has_no_neighbors() {
        let g = GridEnvironment::new_2d(5, 1, 1.0).unwrap();
        let nbs: Vec<usize> = g.neighbors(g.index(2, 0, 0)).collect();
        assert_eq!(nbs, vec![1, 3]);
    }

    #[test]
    fn extent_two_rejected() {
        assert!(GridEnvironment::new_2d(5, 2, 1.0).is_err());
        assert!(GridEnvironment::new_2d(5, 1, 1.0).is_ok());
        assert!(GridEnvironment::new_2d(5, 3, 1.0).is_ok());
    }

    #[test]
    fn cell_at_maps_centers_back() {
        let g = GridEnvironment::new_2d(5, 4, 0.25).unwrap();
        for idx in 0..g.cell_count() {
            let c = g.cell_center(idx);
            assert_eq!(g.cell_at(c), Some(idx));
        }
        assert_eq!(g.cell_at([-0.1, 0.0, 0.0]), None);
        assert_eq!(g.cell_at([2.0, 0.5, 0.0]), None);
    }

    #[test]
    fn border_marking() {
        let mut g = GridEnvironment::new_2d(4, 4, 1.0).unwrap();
        g.set_border_obstacles();
        let obstacles = g
            .classes()
            .iter()
            .filter(|&&c| c == CellClass::Obstacle)
            .count();
        assert_eq!(obstacles, 12); // 16 cells, 4 interior
    }

    #[test]
    fn unit_direction_enforced() {
        let mut g = GridEnvironment::new_2d(5, 5, 1.0).unwrap();
        assert!(g.set_direction(7, [1.0, 0.0, 0.0]).is_ok());
        assert!(g.set_direction(7, [1.0, 1.0, 0.0]).is_err());
    }
}
