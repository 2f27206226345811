use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Boundary-condition family carried by a field.
///
/// `U` and `V` share the velocity closure: Robin at the surface, homogeneous
/// Dirichlet at the bottom and the lateral walls. `Theta` uses Robin at the
/// surface and homogeneous Neumann on the bottom and walls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BcClass {
    U { alpha: f64 },
    V { alpha: f64 },
    Theta { alpha: f64 },
    Free,
}

impl BcClass {
    pub fn alpha(&self) -> Option<f64> {
        match *self {
            BcClass::U { alpha } | BcClass::V { alpha } | BcClass::Theta { alpha } => Some(alpha),
            BcClass::Free => None,
        }
    }

    /// Dirichlet on the bottom and lateral walls.
    pub fn is_velocity(&self) -> bool {
        matches!(self, BcClass::U { .. } | BcClass::V { .. })
    }

    pub fn is_free(&self) -> bool {
        matches!(self, BcClass::Free)
    }
}

/// Values at every lattice node of a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    bc: BcClass,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: &Grid, bc: BcClass) -> Self {
        Self { grid: *grid, bc, values: vec![0.0; grid.len()] }
    }

    pub fn from_values(grid: &Grid, bc: BcClass, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(Self { grid: *grid, bc, values })
    }

    /// Samples `f(x, z)` at every node.
    pub fn from_fn(grid: &Grid, bc: BcClass, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for k in 0..grid.pz() {
            let z = grid.z(k);
            for i in 0..grid.px() {
                values.push(f(grid.x(i), z));
            }
        }
        Self { grid: *grid, bc, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn bc(&self) -> BcClass {
        self.bc
    }

    pub fn with_bc(mut self, bc: BcClass) -> Self {
        self.bc = bc;
        self
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn at(&self, i: usize, k: usize) -> f64 {
        self.values[self.grid.idx(i, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, k: usize, v: f64) {
        let n = self.grid.idx(i, k);
        self.values[n] = v;
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn check_same_grid(&self, other: &ScalarField) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch("fields live on different grids".into()));
        }
        Ok(())
    }

    /// Pointwise map producing a `Free` field.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField { grid: self.grid, bc: BcClass::Free, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    /// Pointwise combination producing a `Free` field.
    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Result<ScalarField> {
        self.check_same_grid(other)?;
        Ok(ScalarField {
            grid: self.grid,
            bc: BcClass::Free,
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    /// `self + s * other`, keeping `self`'s boundary class.
    pub fn axpy(&mut self, s: f64, other: &ScalarField) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += s * b;
        }
    }

    /// Zeros the nodes where a velocity-class field carries Dirichlet data.
    pub fn enforce_dirichlet(&mut self) {
        if !self.bc.is_velocity() {
            return;
        }
        let g = self.grid;
        for k in 0..g.pz() {
            self.values[g.idx(0, k)] = 0.0;
            self.values[g.idx(g.nx(), k)] = 0.0;
        }
        for i in 0..g.px() {
            self.values[g.idx(i, 0)] = 0.0;
        }
    }

    /// Surface values `f(., 0)`.
    pub fn surface_trace(&self) -> ProfileField {
        let g = self.grid;
        let k = g.nz();
        ProfileField { grid: g, values: (0..g.px()).map(|i| self.at(i, k)).collect() }
    }

    /// Bottom values `f(., -h)`.
    pub fn bottom_trace(&self) -> ProfileField {
        let g = self.grid;
        ProfileField { grid: g, values: (0..g.px()).map(|i| self.at(i, 0)).collect() }
    }

    /// Column `i`, bottom to surface.
    pub fn column(&self, i: usize) -> Vec<f64> {
        (0..self.grid.pz()).map(|k| self.at(i, k)).collect()
    }
}

impl Index<(usize, usize)> for ScalarField {
    type Output = f64;
    fn index(&self, (i, k): (usize, usize)) -> &f64 {
        &self.values[self.grid.idx(i, k)]
    }
}

impl IndexMut<(usize, usize)> for ScalarField {
    fn index_mut(&mut self, (i, k): (usize, usize)) -> &mut f64 {
        let n = self.grid.idx(i, k);
        &mut self.values[n]
    }
}

/// Function of `x` alone, sampled at the `nx + 1` lattice columns.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileField {
    grid: Grid,
    values: Vec<f64>,
}

impl ProfileField {
    pub fn zeros(grid: &Grid) -> Self {
        Self { grid: *grid, values: vec![0.0; grid.px()] }
    }

    pub fn from_values(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.px() {
            return Err(Error::GridMismatch(format!(
                "expected {} profile values, got {}",
                grid.px(),
                values.len()
            )));
        }
        Ok(Self { grid: *grid, values })
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64) -> f64) -> Self {
        Self { grid: *grid, values: (0..grid.px()).map(|i| f(grid.x(i))).collect() }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Trapezoid `L2(0,1)` norm.
    pub fn norm_l2(&self) -> f64 {
        self.values
            .iter()
            .enumerate()
            .map(|(i, v)| self.grid.wx(i) * v * v)
            .sum::<f64>()
            .sqrt()
    }
}
