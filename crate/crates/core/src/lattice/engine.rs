//! Exact weighted sums: raw enumeration and column-by-column contraction.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::insertion::{EdgeId, EdgeMod, InsertionSet, TailPath};
use super::{DiamondLattice, Site};
use crate::curve::C64;
use crate::error::{Error, Result};
use crate::weights::{DisorderFactor, WeightTable};

/// Most free spins summed by raw enumeration.
pub const ENUMERATION_CAP: usize = 10;
/// Largest column state vector (`N^rows`) for contraction.
pub const STATE_CAP: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Engine {
    Enumerate,
    #[default]
    Contract,
}

/// Per-edge weight tables after insertions are folded in.
struct Compiled {
    n: usize,
    /// `[i][j]` horizontal edge `(i,j)-(i+1,j)`, indexed by `(a_left - a_right) mod N`.
    w: Vec<Vec<Vec<C64>>>,
    /// `[i][j]` vertical edge `(i,j)-(i,j+1)`, indexed by `(a_top - a_bottom) mod N`.
    wbar: Vec<Vec<Vec<C64>>>,
    /// `[site][a]` diagonal factor, zero where a fixed spin forbids `a`.
    diag: Vec<Vec<C64>>,
    constant: C64,
}

fn shifted(base: impl Fn(i64) -> C64, n: usize, m: Option<&EdgeMod>) -> Vec<C64> {
    let (shift, factor) = m.map_or((0, C64::new(1.0, 0.0)), |m| (m.shift, m.factor));
    (0..n as i64).map(|d| factor * base(d + shift)).collect()
}

fn compile(lat: &DiamondLattice, table: &WeightTable, ins: &InsertionSet) -> Result<Compiled> {
    let n = table.n();
    for (s, _) in &ins.diagonal {
        if !lat.contains(*s) {
            return Err(Error::Lattice(format!("insertion site {s:?} outside the lattice")));
        }
    }
    let (mods, constant): (BTreeMap<EdgeId, EdgeMod>, C64) = ins.compile();
    let w = (0..lat.cols.saturating_sub(1))
        .map(|i| (0..lat.rows).map(|j| shifted(|d| table.w_at(d), n, mods.get(&EdgeId::W { i, j }))).collect())
        .collect();
    let wbar = (0..lat.cols)
        .map(|i| {
            (0..lat.rows.saturating_sub(1))
                .map(|j| shifted(|d| table.wbar_at(d), n, mods.get(&EdgeId::Wbar { i, j })))
                .collect()
        })
        .collect();
    let p = table.r.params;
    let mut power = vec![0i64; lat.site_count()];
    for (s, k) in &ins.diagonal {
        power[lat.index(*s)] += k;
    }
    let diag = lat
        .sites()
        .map(|s| {
            let k = power[lat.index(s)];
            (0..n)
                .map(|a| match lat.fixed_spin(s) {
                    Some(f) if f as usize % n != a => C64::new(0.0, 0.0),
                    _ => p.omega_pow(k * a as i64),
                })
                .collect()
        })
        .collect();
    Ok(Compiled { n, w, wbar, diag, constant })
}

fn diff(a: usize, b: usize, n: usize) -> usize {
    (a + n - b) % n
}

fn enumerate(lat: &DiamondLattice, c: &Compiled) -> Result<C64> {
    let n = c.n;
    let free: Vec<Site> = lat.sites().filter(|s| lat.fixed_spin(*s).is_none()).collect();
    if free.len() > ENUMERATION_CAP {
        return Err(Error::DimensionOverflow { dim: free.len(), cap: ENUMERATION_CAP });
    }
    let mut spins: Vec<usize> = lat.sites().map(|s| lat.fixed_spin(s).map_or(0, |f| f as usize % n)).collect();
    let total = n.pow(free.len() as u32);
    let mut sum = C64::new(0.0, 0.0);
    for cfg in 0..total {
        let mut rest = cfg;
        for s in &free {
            spins[lat.index(*s)] = rest % n;
            rest /= n;
        }
        let mut v = C64::new(1.0, 0.0);
        for s in lat.sites() {
            v *= c.diag[lat.index(s)][spins[lat.index(s)]];
        }
        for j in 0..lat.rows {
            for i in 0..lat.cols.saturating_sub(1) {
                let a = spins[lat.index(Site { i, j })];
                let b = spins[lat.index(Site { i: i + 1, j })];
                v *= c.w[i][j][diff(a, b, n)];
            }
        }
        for i in 0..lat.cols {
            for j in 0..lat.rows.saturating_sub(1) {
                let bottom = spins[lat.index(Site { i, j })];
                let top = spins[lat.index(Site { i, j: j + 1 })];
                v *= c.wbar[i][j][diff(top, bottom, n)];
            }
        }
        sum += v;
    }
    Ok(sum * c.constant)
}

/// Multiply a column state by the diagonal and vertical-edge factors of column `i`.
fn column_factors(lat: &DiamondLattice, c: &Compiled, i: usize, state: &mut [C64]) {
    let n = c.n;
    for (idx, v) in state.iter_mut().enumerate() {
        let mut rest = idx;
        let mut prev = 0;
        let mut f = C64::new(1.0, 0.0);
        for j in 0..lat.rows {
            let a = rest % n;
            rest /= n;
            f *= c.diag[lat.index(Site { i, j })][a];
            if j > 0 {
                f *= c.wbar[i][j - 1][diff(a, prev, n)];
            }
            prev = a;
        }
        *v *= f;
    }
}

fn contract(lat: &DiamondLattice, c: &Compiled) -> Result<C64> {
    let n = c.n;
    let dim = n.checked_pow(lat.rows as u32).filter(|d| *d <= STATE_CAP);
    let dim = dim.ok_or(Error::DimensionOverflow { dim: usize::MAX, cap: STATE_CAP })?;
    let mut state = vec![C64::new(1.0, 0.0); dim];
    column_factors(lat, c, 0, &mut state);
    let mut next = vec![C64::new(0.0, 0.0); dim];
    for i in 1..lat.cols {
        // Horizontal edges between column i-1 and i, one row digit at a time.
        let mut stride = 1;
        for j in 0..lat.rows {
            let m = &c.w[i - 1][j];
            next.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
            for (idx, v) in state.iter().enumerate() {
                if *v == C64::new(0.0, 0.0) {
                    continue;
                }
                let a = (idx / stride) % n;
                let base = idx - a * stride;
                for b in 0..n {
                    next[base + b * stride] += v * m[diff(a, b, n)];
                }
            }
            std::mem::swap(&mut state, &mut next);
            stride *= n;
        }
        column_factors(lat, c, i, &mut state);
    }
    Ok(state.iter().sum::<C64>() * c.constant)
}

/// Unnormalized sum of the weights times the insertions.
pub fn evaluate(lat: &DiamondLattice, table: &WeightTable, ins: &InsertionSet, engine: Engine) -> Result<C64> {
    let c = compile(lat, table, ins)?;
    match engine {
        Engine::Enumerate => enumerate(lat, &c),
        Engine::Contract => contract(lat, &c),
    }
}

pub fn partition_function(lat: &DiamondLattice, table: &WeightTable, engine: Engine) -> Result<C64> {
    evaluate(lat, table, &InsertionSet::new(), engine)
}

pub fn expectation(lat: &DiamondLattice, table: &WeightTable, ins: &InsertionSet, engine: Engine) -> Result<C64> {
    Evaluator::new(lat, table, engine)?.expectation(ins)
}

/// Expectation values on one lattice with the partition function computed once.
#[derive(Debug, Clone)]
pub struct Evaluator<'a> {
    pub lat: &'a DiamondLattice,
    pub table: &'a WeightTable,
    pub engine: Engine,
    pub z: C64,
}

impl<'a> Evaluator<'a> {
    pub fn new(lat: &'a DiamondLattice, table: &'a WeightTable, engine: Engine) -> Result<Self> {
        let z = partition_function(lat, table, engine)?;
        if !(z.norm() > 1e-300) || !z.is_finite() {
            return Err(Error::DegeneratePartition);
        }
        Ok(Evaluator { lat, table, engine, z })
    }

    pub fn expectation(&self, ins: &InsertionSet) -> Result<C64> {
        Ok(evaluate(self.lat, self.table, ins, self.engine)? / self.z)
    }
}

/// `|<O>_1 - <O>_2| / max(|<O>_1|, eps)` for the same diagonal insertions with two tails.
pub fn check_path_independence(
    lat: &DiamondLattice,
    table: &WeightTable,
    base: &InsertionSet,
    factor: &DisorderFactor,
    path: &TailPath,
    alt_path: &TailPath,
) -> Result<f64> {
    if path.end() != alt_path.end() {
        return Err(Error::Lattice("paths end at different dual sites".into()));
    }
    let ev = Evaluator::new(lat, table, Engine::Contract)?;
    let a = ev.expectation(&base.clone().with_tail(lat, path, factor)?)?;
    let b = ev.expectation(&base.clone().with_tail(lat, alt_path, factor)?)?;
    Ok((a - b).norm() / a.norm().max(1e-300))
}
