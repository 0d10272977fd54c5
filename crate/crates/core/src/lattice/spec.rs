//! TOML description of a lattice and its current insertions.
//!
//! ```toml
//! rows = 3
//! cols = 4
//! theta = 1.2
//!
//! [boundary]
//! kind = "fixed-right-column"
//! spin = 0
//!
//! [[insertions]]
//! variant = "ebar0"
//! site = [1, 1]
//! cell = [1, 0]
//! # optional; defaults to the straight tail from the anchor cell (-1, -1)
//! path = [[-1, -1], [-1, 0], [0, 0], [1, 0]]
//! ```
//!
//! `boundary.kind` is one of `free`, `fixed-right-column` (with `spin`) or
//! `fixed-sites` (with `sites = [[i, j, spin], ...]`).

use serde::{Deserialize, Serialize};

use super::{Cell, DiamondLattice, MidEdge, Site, TailPath};
use crate::error::{Error, Result};
use crate::weights::Variant;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Boundary {
    Free,
    FixedRightColumn { spin: u32 },
    FixedSites { sites: Vec<[usize; 3]> },
}

impl Default for Boundary {
    fn default() -> Self {
        Boundary::FixedRightColumn { spin: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InsertionSpec {
    pub variant: Variant,
    pub site: [usize; 2],
    pub cell: [i64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<Vec<[i64; 2]>>,
}

impl InsertionSpec {
    pub fn midedge(&self) -> MidEdge {
        MidEdge { site: Site { i: self.site[0], j: self.site[1] }, cell: Cell::new(self.cell[0], self.cell[1]) }
    }

    pub fn tail(&self) -> TailPath {
        match &self.path {
            Some(p) => TailPath(p.iter().map(|c| Cell::new(c[0], c[1])).collect()),
            None => TailPath::straight(Cell::new(self.cell[0], self.cell[1])),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub rows: usize,
    pub cols: usize,
    pub theta: f64,
    #[serde(default)]
    pub boundary: Boundary,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub insertions: Vec<InsertionSpec>,
}

impl LatticeSpec {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Lattice(e.to_string()))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Lattice(e.to_string()))
    }

    pub fn build(&self) -> Result<DiamondLattice> {
        let lat = DiamondLattice::new(self.rows, self.cols, self.theta)?;
        let lat = match &self.boundary {
            Boundary::Free => lat,
            Boundary::FixedRightColumn { spin } => {
                let c = lat.cols - 1;
                lat.with_fixed_column(c, *spin)?
            }
            Boundary::FixedSites { sites } => {
                let mut l = lat;
                for [i, j, spin] in sites {
                    l = l.fix(Site { i: *i, j: *j }, *spin as u32)?;
                }
                l
            }
        };
        for ins in &self.insertions {
            if !lat.is_midedge(ins.midedge()) {
                return Err(Error::Lattice(format!("{:?} is not a mid-edge of the lattice", ins.midedge())));
            }
            let path = ins.tail();
            path.validate(&lat)?;
            if path.end() != ins.midedge().cell {
                return Err(Error::Lattice("insertion path does not end at its dual site".into()));
            }
        }
        Ok(lat)
    }
}
