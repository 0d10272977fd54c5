//! Diagonal insertions and disorder tails.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Cell, DiamondLattice, Site};
use crate::curve::C64;
use crate::error::{Error, Result};
use crate::weights::{Crossing, DisorderFactor};

/// A lattice edge. `W { i, j }` joins `(i,j)` and `(i+1,j)`; `Wbar { i, j }` joins `(i,j)` and `(i,j+1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EdgeId {
    W { i: usize, j: usize },
    Wbar { i: usize, j: usize },
}

/// One step of a tail across an edge. `edge` is `None` when the step runs
/// outside the lattice and meets no spin pair; only its factor survives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailCrossing {
    pub edge: Option<EdgeId>,
    pub crossing: Crossing,
    pub factor: DisorderFactor,
}

/// A dual-lattice path of adjacent cells starting at [`Cell::ANCHOR`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TailPath(pub Vec<Cell>);

impl TailPath {
    /// Up the exterior column `-1` to the target row, then right along that row.
    pub fn straight(target: Cell) -> Self {
        let mut cells = vec![Cell::ANCHOR];
        let mut cur = Cell::ANCHOR;
        while cur.cj < target.cj {
            cur.cj += 1;
            cells.push(cur);
        }
        while cur.ci < target.ci {
            cur.ci += 1;
            cells.push(cur);
        }
        TailPath(cells)
    }

    /// Right along the exterior row `-1` to the target column, then up.
    pub fn right_then_up(target: Cell) -> Self {
        let mut cells = vec![Cell::ANCHOR];
        let mut cur = Cell::ANCHOR;
        while cur.ci < target.ci {
            cur.ci += 1;
            cells.push(cur);
        }
        while cur.cj < target.cj {
            cur.cj += 1;
            cells.push(cur);
        }
        TailPath(cells)
    }

    pub fn end(&self) -> Cell {
        *self.0.last().expect("paths are never empty")
    }

    /// This path followed by the given steps.
    pub fn extended(&self, more: &[Cell]) -> Self {
        let mut v = self.0.clone();
        v.extend_from_slice(more);
        TailPath(v)
    }

    pub fn validate(&self, lat: &DiamondLattice) -> Result<()> {
        let first = self.0.first().ok_or_else(|| Error::Lattice("empty tail path".into()))?;
        if *first != Cell::ANCHOR {
            return Err(Error::Lattice(format!("tail must start at the anchor cell, starts at {first:?}")));
        }
        for w in self.0.windows(2) {
            let d = (w[1].ci - w[0].ci).abs() + (w[1].cj - w[0].cj).abs();
            if d != 1 {
                return Err(Error::Lattice(format!("tail cells {:?} and {:?} are not adjacent", w[0], w[1])));
            }
        }
        if let Some(c) = self.0.iter().find(|c| !lat.contains_cell(**c)) {
            return Err(Error::Lattice(format!("tail cell {c:?} outside the lattice")));
        }
        Ok(())
    }

    /// The edge crossed by each step, with its orientation.
    pub fn crossings(&self, lat: &DiamondLattice) -> Result<Vec<(Option<EdgeId>, Crossing)>> {
        self.validate(lat)?;
        Ok(self
            .0
            .windows(2)
            .map(|w| {
                let (a, b) = (w[0], w[1]);
                if b.cj != a.cj {
                    let top = a.cj.max(b.cj);
                    let edge = match (lat.site_at(a.ci, top), lat.site_at(a.ci + 1, top)) {
                        (Some(l), Some(_)) => Some(EdgeId::W { i: l.i, j: l.j }),
                        _ => None,
                    };
                    (edge, if b.cj > a.cj { Crossing::WUp } else { Crossing::WDown })
                } else {
                    let col = a.ci.max(b.ci);
                    let edge = match (lat.site_at(col, a.cj), lat.site_at(col, a.cj + 1)) {
                        (Some(lo), Some(_)) => Some(EdgeId::Wbar { i: lo.i, j: lo.j }),
                        _ => None,
                    };
                    (edge, if b.ci > a.ci { Crossing::WbarRight } else { Crossing::WbarLeft })
                }
            })
            .collect())
    }
}

/// Insertions for an expectation value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InsertionSet {
    /// `(site, p)` multiplies each configuration by `omega^(p a_site)`.
    pub diagonal: Vec<(Site, i64)>,
    pub crossings: Vec<TailCrossing>,
}

/// Accumulated modification of one edge: the weight becomes `factor * W(a - b + shift)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct EdgeMod {
    pub shift: i64,
    pub factor: C64,
}

impl InsertionSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_x(mut self, site: Site, power: i64) -> Self {
        self.diagonal.push((site, power));
        self
    }

    pub fn add_tail(&mut self, lat: &DiamondLattice, path: &TailPath, factor: &DisorderFactor) -> Result<()> {
        for (edge, crossing) in path.crossings(lat)? {
            self.crossings.push(TailCrossing { edge, crossing, factor: *factor });
        }
        Ok(())
    }

    pub fn with_tail(mut self, lat: &DiamondLattice, path: &TailPath, factor: &DisorderFactor) -> Result<Self> {
        self.add_tail(lat, path, factor)?;
        Ok(self)
    }

    /// Total `X` power, the `Z_N` charge of the diagonal part.
    pub fn charge(&self, n: usize) -> i64 {
        self.diagonal.iter().map(|(_, p)| p).sum::<i64>().rem_euclid(n as i64)
    }

    /// Fold crossings into per-edge modifications and an overall constant.
    pub(crate) fn compile(&self) -> (BTreeMap<EdgeId, EdgeMod>, C64) {
        let mut mods: BTreeMap<EdgeId, EdgeMod> = BTreeMap::new();
        let mut constant = C64::new(1.0, 0.0);
        for c in &self.crossings {
            let (d, g) = c.factor.crossing(c.crossing);
            match c.edge {
                Some(e) => {
                    let m = mods.entry(e).or_insert(EdgeMod { shift: 0, factor: C64::new(1.0, 0.0) });
                    m.shift += d;
                    m.factor *= g;
                }
                None => constant *= g,
            }
        }
        (mods, constant)
    }
}
