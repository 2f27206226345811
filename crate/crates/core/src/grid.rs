//! Rectangular domain `(0,1) x (-h,0)`, its node lattice, and the boundary
//! partition into surface, bottom and lateral pieces.
//!
//! Unknowns live on the `(nx+1) x (nz+1)` vertex lattice `x_i = i dx`,
//! `z_k = -h + k dz`, so the surface `z = 0` (`k = nz`), the bottom `z = -h`
//! (`k = 0`) and the lateral walls (`i = 0`, `i = nx`) all carry stored
//! values. Storage is row-major with `x` fastest.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest admissible cell count per direction.
pub const MIN_CELLS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    h: f64,
}

impl Domain {
    pub fn new(h: f64) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::InvalidGrid("nonpositive depth".into()));
        }
        Ok(Self { h })
    }

    pub fn depth(&self) -> f64 {
        self.h
    }

    /// Horizontal extent, always 1.
    pub fn width(&self) -> f64 {
        1.0
    }
}

/// Surface, bottom and lateral Robin coefficients for `u`, `v` and `theta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobinParams {
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
}

impl RobinParams {
    pub fn new(alpha1: f64, alpha2: f64, alpha3: f64) -> Result<Self> {
        let p = Self { alpha1, alpha2, alpha3 };
        p.validate()?;
        Ok(p)
    }

    pub fn zero() -> Self {
        Self { alpha1: 0.0, alpha2: 0.0, alpha3: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, a) in [("alpha1", self.alpha1), ("alpha2", self.alpha2), ("alpha3", self.alpha3)] {
            if !(a.is_finite() && a >= 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be a nonnegative real, got {a}")));
            }
        }
        Ok(())
    }
}

impl Default for RobinParams {
    fn default() -> Self {
        Self::zero()
    }
}

/// Which piece of the closed domain a lattice node belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryPiece {
    Interior,
    /// Surface `z = 0`, excluding the two corners.
    Surface,
    /// Bottom `z = -h`, excluding the two corners.
    Bottom,
    /// Lateral walls `x = 0` and `x = 1`, corners included.
    Lateral,
}

/// Lattice position: `i` counts along `x`, `k` counts upward from the bottom.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeIndex {
    pub i: usize,
    pub k: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    domain: Domain,
    nx: usize,
    nz: usize,
    dx: f64,
    dz: f64,
}

/// Builds the lattice for depth `h` with `nx` by `nz` cells.
pub fn build_grid(h: f64, nx: usize, nz: usize) -> Result<Grid> {
    Grid::new(h, nx, nz)
}

impl Grid {
    pub fn new(h: f64, nx: usize, nz: usize) -> Result<Self> {
        let domain = Domain::new(h)?;
        if nx < MIN_CELLS || nz < MIN_CELLS {
            return Err(Error::InvalidGrid(format!(
                "cell counts must be at least {MIN_CELLS}, got nx={nx}, nz={nz}"
            )));
        }
        Ok(Self { domain, nx, nz, dx: 1.0 / nx as f64, dz: h / nz as f64 })
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn h(&self) -> f64 {
        self.domain.h
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn nz(&self) -> usize {
        self.nz
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn dz(&self) -> f64 {
        self.dz
    }

    /// Number of nodes along `x` (`nx + 1`).
    pub fn px(&self) -> usize {
        self.nx + 1
    }

    /// Number of nodes along `z` (`nz + 1`).
    pub fn pz(&self) -> usize {
        self.nz + 1
    }

    pub fn len(&self) -> usize {
        self.px() * self.pz()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn idx(&self, i: usize, k: usize) -> usize {
        k * (self.nx + 1) + i
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        if i == self.nx {
            1.0
        } else {
            i as f64 * self.dx
        }
    }

    #[inline]
    pub fn z(&self, k: usize) -> f64 {
        if k == self.nz {
            0.0
        } else {
            -self.domain.h + k as f64 * self.dz
        }
    }

    /// Trapezoid weight of node `i` along `x`.
    #[inline]
    pub fn wx(&self, i: usize) -> f64 {
        if i == 0 || i == self.nx {
            0.5 * self.dx
        } else {
            self.dx
        }
    }

    /// Trapezoid weight of node `k` along `z`.
    #[inline]
    pub fn wz(&self, k: usize) -> f64 {
        if k == 0 || k == self.nz {
            0.5 * self.dz
        } else {
            self.dz
        }
    }

    pub fn node(&self, flat: usize) -> Result<NodeIndex> {
        if flat >= self.len() {
            return Err(Error::OutOfBounds(format!("flat index {flat} >= {}", self.len())));
        }
        Ok(NodeIndex { i: flat % self.px(), k: flat / self.px() })
    }

    /// Nearest lattice node to a physical point of the closed domain.
    pub fn node_at(&self, x: f64, z: f64) -> Result<NodeIndex> {
        let h = self.domain.h;
        let tol = 1e-12;
        if !(x >= -tol && x <= 1.0 + tol && z >= -h - tol && z <= tol) {
            return Err(Error::OutOfBounds(format!("point ({x}, {z}) outside the closed domain")));
        }
        let i = ((x / self.dx).round() as usize).min(self.nx);
        let k = (((z + h) / self.dz).round() as usize).min(self.nz);
        Ok(NodeIndex { i, k })
    }

    /// Corners resolve to the lateral piece, where the velocity carries
    /// Dirichlet data.
    pub fn classify_boundary(&self, node: NodeIndex) -> Result<BoundaryPiece> {
        if node.i > self.nx || node.k > self.nz {
            return Err(Error::OutOfBounds(format!(
                "node ({}, {}) outside {}x{} lattice",
                node.i,
                node.k,
                self.px(),
                self.pz()
            )));
        }
        Ok(if node.i == 0 || node.i == self.nx {
            BoundaryPiece::Lateral
        } else if node.k == self.nz {
            BoundaryPiece::Surface
        } else if node.k == 0 {
            BoundaryPiece::Bottom
        } else {
            BoundaryPiece::Interior
        })
    }

    pub fn same_as(&self, other: &Grid) -> bool {
        self == other
    }
}

/// Free-function form of [`Grid::classify_boundary`].
pub fn classify_boundary(grid: &Grid, node: NodeIndex) -> Result<BoundaryPiece> {
    grid.classify_boundary(node)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacings() {
        let g = build_grid(1.0, 4, 4).unwrap();
        assert_eq!(g.dx(), 0.25);
        assert_eq!(g.dz(), 0.25);
        let g = build_grid(2.0, 8, 16).unwrap();
        assert_eq!(g.dx(), 0.125);
        assert_eq!(g.dz(), 0.125);
        assert!((g.dz() * g.nz() as f64 - 2.0).abs() <= f64::EPSILON * 2.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let err = build_grid(0.0, 8, 8).unwrap_err();
        assert!(err.to_string().contains("nonpositive depth"));
        assert!(build_grid(-1.0, 8, 8).is_err());
        assert!(build_grid(1.0, 3, 8).is_err());
        assert!(build_grid(1.0, 8, 2).is_err());
    }

    #[test]
    fn idempotent() {
        assert_eq!(build_grid(1.5, 12, 9).unwrap(), build_grid(1.5, 12, 9).unwrap());
    }

    #[test]
    fn classification_examples() {
        let g = build_grid(1.0, 8, 8).unwrap();
        let at = |x, z| g.classify_boundary(g.node_at(x, z).unwrap()).unwrap();
        assert_eq!(at(0.5, 0.0), BoundaryPiece::Surface);
        assert_eq!(at(0.0, -0.5), BoundaryPiece::Lateral);
        assert_eq!(at(0.0, 0.0), BoundaryPiece::Lateral);
        assert_eq!(at(1.0, -1.0), BoundaryPiece::Lateral);
        assert_eq!(at(0.5, -1.0), BoundaryPiece::Bottom);
        assert_eq!(at(0.5, -0.5), BoundaryPiece::Interior);
        assert!(g.classify_boundary(NodeIndex { i: 9, k: 0 }).is_err());
        assert!(g.node(g.len()).is_err());
    }

    #[test]
    fn classification_partitions_lattice() {
        let g = build_grid(1.0, 6, 5).unwrap();
        let mut counts = std::collections::HashMap::new();
        for flat in 0..g.len() {
            *counts.entry(g.classify_boundary(g.node(flat).unwrap()).unwrap()).or_insert(0) += 1;
        }
        assert_eq!(counts[&BoundaryPiece::Lateral], 2 * g.pz());
        assert_eq!(counts[&BoundaryPiece::Surface], g.px() - 2);
        assert_eq!(counts[&BoundaryPiece::Bottom], g.px() - 2);
        assert_eq!(counts.values().sum::<usize>(), g.len());
        // interior nodes have four in-lattice neighbours
        for flat in 0..g.len() {
            let n = g.node(flat).unwrap();
            if g.classify_boundary(n).unwrap() == BoundaryPiece::Interior {
                assert!(n.i >= 1 && n.i < g.nx() && n.k >= 1 && n.k < g.nz());
            }
        }
    }

    #[test]
    fn refinement_keeps_boundary_coordinates() {
        let g = build_grid(1.3, 5, 7).unwrap();
        let f = build_grid(1.3, 10, 14).unwrap();
        for i in 0..g.px() {
            assert_eq!(g.x(i), f.x(2 * i));
        }
        for k in 0..g.pz() {
            assert!((g.z(k) - f.z(2 * k)).abs() < 1e-15);
        }
        assert_eq!(f.z(f.nz()), 0.0);
        assert_eq!(f.x(f.nx()), 1.0);
    }
}
