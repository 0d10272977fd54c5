//! Finite embedded diamond lattices and exact sums over their spin configurations.
//!
//! Spin sites sit at `(i, j)` for `i < cols`, `j < rows` with embedded position
//! `z = 2 cos(theta/2) i + 2 i sin(theta/2) j`. Horizontal edges `(i,j)-(i+1,j)`
//! carry `W_rs(a_left - a_right)` and vertical edges `(i,j)-(i,j+1)` carry
//! `Wbar_rs(a_top - a_bottom)`. Dual sites (cells) are indexed by the spin at
//! their lower-left corner and run over `-1..cols` by `-1..rows`, so the
//! exterior ring of cells is included.

mod chain;
mod engine;
mod insertion;
mod spec;
mod transfer;

pub use chain::{
    check_hermiticity, check_kw_duality, hamiltonian, kw_scale, sector_basis, spectrum_in_sector, KwReport,
};
pub use engine::{
    check_path_independence, evaluate, expectation, partition_function, Engine, Evaluator, ENUMERATION_CAP,
    STATE_CAP,
};
pub use insertion::{EdgeId, InsertionSet, TailCrossing, TailPath};
pub use spec::{Boundary, InsertionSpec, LatticeSpec};
pub use transfer::{
    finite_difference_hamiltonian, transfer_matrix, translation_operator, FiniteDifferenceReport, DENSE_CAP,
};

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::curve::{C64, I};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Site {
    pub i: usize,
    pub j: usize,
}

/// A dual site, labelled by the spin at its lower-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub ci: i64,
    pub cj: i64,
}

impl Cell {
    pub const ANCHOR: Cell = Cell { ci: -1, cj: -1 };

    pub fn new(ci: i64, cj: i64) -> Self {
        Cell { ci, cj }
    }
}

/// A mid-edge of the medial lattice: a spin site and an adjacent dual site.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MidEdge {
    pub site: Site,
    pub cell: Cell,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EdgeKind {
    W,
    Wbar,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiamondLattice {
    pub rows: usize,
    pub cols: usize,
    pub theta: f64,
    fixed: Vec<Option<u32>>,
}

impl DiamondLattice {
    /// Free boundary on every site.
    pub fn new(rows: usize, cols: usize, theta: f64) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Lattice("lattice needs at least one row and one column".into()));
        }
        if !theta.is_finite() {
            return Err(Error::Lattice("embedding angle must be finite".into()));
        }
        Ok(DiamondLattice { rows, cols, theta, fixed: vec![None; rows * cols] })
    }

    pub fn fix(mut self, site: Site, spin: u32) -> Result<Self> {
        if !self.contains(site) {
            return Err(Error::Lattice(format!("site {site:?} outside the lattice")));
        }
        let idx = self.index(site);
        self.fixed[idx] = Some(spin);
        Ok(self)
    }

    /// Fix every spin in one column.
    pub fn with_fixed_column(mut self, col: usize, spin: u32) -> Result<Self> {
        for j in 0..self.rows {
            self = self.fix(Site { i: col, j }, spin)?;
        }
        Ok(self)
    }

    /// The layout used for current expectations: the rightmost column fixed to spin 0.
    ///
    /// With every boundary spin summed freely the global `Z_N` symmetry makes all
    /// single-current expectations vanish, so one column is pinned.
    pub fn with_fixed_right_column(self) -> Result<Self> {
        let c = self.cols - 1;
        self.with_fixed_column(c, 0)
    }

    pub fn fixed_spin(&self, site: Site) -> Option<u32> {
        self.fixed[self.index(site)]
    }

    pub fn index(&self, site: Site) -> usize {
        site.j * self.cols + site.i
    }

    pub fn site_count(&self) -> usize {
        self.rows * self.cols
    }

    pub fn free_site_count(&self) -> usize {
        self.fixed.iter().filter(|f| f.is_none()).count()
    }

    pub fn contains(&self, s: Site) -> bool {
        s.i < self.cols && s.j < self.rows
    }

    pub fn site_at(&self, i: i64, j: i64) -> Option<Site> {
        if i >= 0 && j >= 0 && (i as usize) < self.cols && (j as usize) < self.rows {
            Some(Site { i: i as usize, j: j as usize })
        } else {
            None
        }
    }

    pub fn contains_cell(&self, c: Cell) -> bool {
        c.ci >= -1 && c.cj >= -1 && c.ci < self.cols as i64 && c.cj < self.rows as i64
    }

    pub fn sites(&self) -> impl Iterator<Item = Site> + '_ {
        (0..self.rows).flat_map(move |j| (0..self.cols).map(move |i| Site { i, j }))
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        let (r, c) = (self.rows as i64, self.cols as i64);
        (-1..r).flat_map(move |cj| (-1..c).map(move |ci| Cell { ci, cj }))
    }

    /// `(cos(theta/2), sin(theta/2))`.
    fn half_angle(&self) -> (f64, f64) {
        ((self.theta / 2.0).cos(), (self.theta / 2.0).sin())
    }

    pub fn spin_z(&self, i: i64, j: i64) -> C64 {
        let (c, s) = self.half_angle();
        C64::new(2.0 * c * i as f64, 2.0 * s * j as f64)
    }

    pub fn dual_z(&self, cell: Cell) -> C64 {
        let (c, s) = self.half_angle();
        self.spin_z(cell.ci, cell.cj) + C64::new(c, s)
    }

    /// All edges of the lattice, horizontal `W` edges first.
    pub fn edges(&self) -> Vec<EdgeId> {
        let mut out = Vec::new();
        for j in 0..self.rows {
            for i in 0..self.cols.saturating_sub(1) {
                out.push(EdgeId::W { i, j });
            }
        }
        for j in 0..self.rows.saturating_sub(1) {
            for i in 0..self.cols {
                out.push(EdgeId::Wbar { i, j });
            }
        }
        out
    }

    /// The rhombus of an edge as `(spin, dual, spin, dual)` positions in counter-clockwise order.
    ///
    /// For a `W` edge: left spin, lower cell, right spin, upper cell. For a
    /// `Wbar` edge: lower spin, right cell, upper spin, left cell.
    pub fn rhombus(&self, e: EdgeId) -> [C64; 4] {
        match e {
            EdgeId::W { i, j } => {
                let (i, j) = (i as i64, j as i64);
                [
                    self.spin_z(i, j),
                    self.dual_z(Cell::new(i, j - 1)),
                    self.spin_z(i + 1, j),
                    self.dual_z(Cell::new(i, j)),
                ]
            }
            EdgeId::Wbar { i, j } => {
                let (i, j) = (i as i64, j as i64);
                [
                    self.spin_z(i, j),
                    self.dual_z(Cell::new(i, j)),
                    self.spin_z(i, j + 1),
                    self.dual_z(Cell::new(i - 1, j)),
                ]
            }
        }
    }

    /// Cells adjacent to a site, in the order NE, NW, SW, SE.
    pub fn cells_around(site: Site) -> [Cell; 4] {
        let (i, j) = (site.i as i64, site.j as i64);
        [Cell::new(i, j), Cell::new(i - 1, j), Cell::new(i - 1, j - 1), Cell::new(i, j - 1)]
    }

    pub fn is_midedge(&self, m: MidEdge) -> bool {
        self.contains(m.site) && self.contains_cell(m.cell) && Self::cells_around(m.site).contains(&m.cell)
    }

    pub fn midedge_z(&self, m: MidEdge) -> C64 {
        (self.spin_z(m.site.i as i64, m.site.j as i64) + self.dual_z(m.cell)) / 2.0
    }

    /// Principal argument in `(-pi, pi]` of `z_sigma - z_mu`.
    pub fn alpha(&self, m: MidEdge) -> f64 {
        let d = self.spin_z(m.site.i as i64, m.site.j as i64) - self.dual_z(m.cell);
        let a = d.arg();
        if a <= -PI {
            a + 2.0 * PI
        } else {
            a
        }
    }

    /// `e^{i alpha}` for a mid-edge, read from the geometry.
    pub fn edge_direction(&self, m: MidEdge) -> C64 {
        (I * self.alpha(m)).exp()
    }
}
