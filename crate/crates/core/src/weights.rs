//! Boltzmann weights `W_rs`, `Wbar_rs`, their crossing and star-triangle
//! relations, the Ising couplings and the disorder-modified weights used by tails.

use serde::{Deserialize, Serialize};

use crate::curve::{crossing_conjugate, CurvePoint, C64};
use crate::elliptic::{jacobi_sn_cn_dn, IsingPoint};
use crate::error::{Error, Result};

/// `W_rs(a)` and `Wbar_rs(a)` for `a = 0..N-1`, normalized so that `W(0) = Wbar(0) = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightTable {
    pub r: CurvePoint,
    pub s: CurvePoint,
    pub w: Vec<C64>,
    pub wbar: Vec<C64>,
}

fn singular(den: C64, a: C64, b: C64) -> bool {
    den.norm() <= 16.0 * f64::EPSILON * (a.norm() + b.norm())
}

fn w_ratio(r: &CurvePoint, s: &CurvePoint, l: i64) -> Result<C64> {
    let om = r.params.omega_pow(l);
    let den = r.y - s.x * om;
    if singular(den, r.y, s.x) {
        return Err(Error::SingularWeight { which: "W", l: l.rem_euclid(r.n() as i64) as usize });
    }
    Ok(r.mu / s.mu * (s.y - r.x * om) / den)
}

fn wbar_ratio(r: &CurvePoint, s: &CurvePoint, l: i64) -> Result<C64> {
    let p = r.params;
    let om = p.omega_pow(l);
    let den = s.y - r.y * om;
    if singular(den, s.y, r.y) {
        return Err(Error::SingularWeight { which: "Wbar", l: l.rem_euclid(r.n() as i64) as usize });
    }
    Ok(r.mu * s.mu * (r.x * p.omega - s.x * om) / den)
}

/// Build both tables by the product recursion over `l = 1..a`.
pub fn build_weights(r: &CurvePoint, s: &CurvePoint) -> Result<WeightTable> {
    if r.n() != s.n() {
        return Err(Error::InvalidParams("points carry different N".into()));
    }
    let n = r.n();
    let mut w = vec![C64::new(1.0, 0.0); n];
    let mut wbar = vec![C64::new(1.0, 0.0); n];
    for a in 1..n {
        w[a] = w[a - 1] * w_ratio(r, s, a as i64)?;
        wbar[a] = wbar[a - 1] * wbar_ratio(r, s, a as i64)?;
    }
    Ok(WeightTable { r: *r, s: *s, w, wbar })
}

impl WeightTable {
    pub fn n(&self) -> usize {
        self.w.len()
    }

    /// `W_rs(a)` with `a` read modulo `N`.
    pub fn w_at(&self, a: i64) -> C64 {
        self.w[a.rem_euclid(self.n() as i64) as usize]
    }

    pub fn wbar_at(&self, a: i64) -> C64 {
        self.wbar[a.rem_euclid(self.n() as i64) as usize]
    }

    /// `|W(N-1) ratio(N) - 1|` for both tables: the recursion must close on the curve.
    pub fn closure_residuals(&self) -> Result<(f64, f64)> {
        let n = self.n();
        let w = self.w[n - 1] * w_ratio(&self.r, &self.s, n as i64)?;
        let wb = self.wbar[n - 1] * wbar_ratio(&self.r, &self.s, n as i64)?;
        Ok(((w - 1.0).norm(), (wb - 1.0).norm()))
    }

    /// Multiply every `W` entry by `cw` and every `Wbar` entry by `cwb`.
    pub fn rescaled(&self, cw: C64, cwb: C64) -> Self {
        WeightTable {
            r: self.r,
            s: self.s,
            w: self.w.iter().map(|v| v * cw).collect(),
            wbar: self.wbar.iter().map(|v| v * cwb).collect(),
        }
    }

    /// Multiply the entry `W(a)` (or `Wbar(a)`) by `factor`.
    pub fn perturbed(&self, bar: bool, a: usize, factor: C64) -> Self {
        let mut t = self.clone();
        if bar {
            t.wbar[a] *= factor;
        } else {
            t.w[a] *= factor;
        }
        t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossingReport {
    /// `max_a |W_rs(a) - Wbar_{s* r}(a)|`.
    pub w: f64,
    /// `max_a |Wbar_rs(a) - W_{s* r}(-a)|`.
    pub wbar: f64,
}

impl CrossingReport {
    pub fn max(&self) -> f64 {
        self.w.max(self.wbar)
    }
}

/// Residuals of `W_rs(a) = Wbar_{s* r}(a)` and `Wbar_rs(a) = W_{s* r}(-a)`, relative to `max(1, |lhs|)`.
pub fn check_crossing(r: &CurvePoint, s: &CurvePoint) -> Result<CrossingReport> {
    let t = build_weights(r, s)?;
    let sc = crossing_conjugate(s)?;
    let u = build_weights(&sc, r)?;
    let mut rep = CrossingReport { w: 0.0, wbar: 0.0 };
    for a in 0..t.n() as i64 {
        let lw = t.w_at(a);
        rep.w = rep.w.max((lw - u.wbar_at(a)).norm() / lw.norm().max(1.0));
        let lb = t.wbar_at(a);
        rep.wbar = rep.wbar.max((lb - u.w_at(-a)).norm() / lb.norm().max(1.0));
    }
    Ok(rep)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StarTriangleReport {
    pub rho: C64,
    pub max_rel_dev: f64,
    /// The spin triple at which `rho` was read off.
    pub anchor: [usize; 3],
}

/// `sum_d Wbar_rs(a-d) W_rt(d-b) Wbar_st(d-c) = rho W_rs(c-b) Wbar_rt(a-c) W_st(a-b)` over all `N^3` triples.
pub fn check_star_triangle(r: &CurvePoint, s: &CurvePoint, t: &CurvePoint) -> Result<StarTriangleReport> {
    let rs = build_weights(r, s)?;
    let rt = build_weights(r, t)?;
    let st = build_weights(s, t)?;
    let n = rs.n();
    let ni = n as i64;
    let mut lhs = Vec::with_capacity(n * n * n);
    let mut rhs = Vec::with_capacity(n * n * n);
    for a in 0..ni {
        for b in 0..ni {
            for c in 0..ni {
                let l: C64 = (0..ni).map(|d| rs.wbar_at(a - d) * rt.w_at(d - b) * st.wbar_at(d - c)).sum();
                lhs.push(l);
                rhs.push(rs.w_at(c - b) * rt.wbar_at(a - c) * st.w_at(a - b));
            }
        }
    }
    let scale = rhs.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let idx = (0..rhs.len())
        .find(|&i| rhs[i].norm() > 1e-8 * scale)
        .ok_or(Error::Domain("every star-triangle anchor vanishes".into()))?;
    let rho = lhs[idx] / rhs[idx];
    let max_rel_dev = lhs
        .iter()
        .zip(&rhs)
        .map(|(l, r)| (l - rho * r).norm() / (rho * r).norm().max(1e-300))
        .fold(0.0, f64::max);
    Ok(StarTriangleReport { rho, max_rel_dev, anchor: [idx / (n * n), (idx / n) % n, idx % n] })
}

/// `scd(u) = sn(u/2) / (cn(u/2) dn(u/2))` for real `u`.
fn scd(u: f64, ctx: &crate::elliptic::EllipticContext) -> Result<f64> {
    let (sn, cn, dn) = jacobi_sn_cn_dn(C64::new(u / 2.0, 0.0), ctx)?;
    Ok((sn / (cn * dn)).re)
}

/// Ising couplings `(K1, K2)` from `e^{-2K1} = k' scd(K - beta_s + beta_r)` and `e^{-2K2} = k' scd(beta_s - beta_r)`.
pub fn ising_couplings(r: &IsingPoint, s: &IsingPoint) -> Result<(f64, f64)> {
    if r.point.n() != 2 || s.point.n() != 2 {
        return Err(Error::Domain("Ising couplings need N = 2".into()));
    }
    let ctx = &r.ctx;
    if ctx != &s.ctx {
        return Err(Error::Domain("points come from different elliptic contexts".into()));
    }
    let d = 2.0 * ctx.big_k / std::f64::consts::PI * (s.beta_prime - r.beta_prime);
    let e1 = ctx.kprime * scd(ctx.big_k - d, ctx)?;
    let e2 = ctx.kprime * scd(d, ctx)?;
    if e2 == 0.0 || e1 == 0.0 {
        return Err(Error::SingularWeight { which: "Ising coupling", l: if e2 == 0.0 { 2 } else { 1 } });
    }
    if e1 < 0.0 || e2 < 0.0 {
        return Err(Error::Domain("couplings are complex for this rapidity ordering".into()));
    }
    Ok((-0.5 * e1.ln(), -0.5 * e2.ln()))
}

/// The four quantum-group currents carried by tails.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    EBar0,
    E0,
    EBar1,
    E1,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::EBar0, Variant::E0, Variant::EBar1, Variant::E1];

    /// Power of `X` inserted at the spin end.
    pub fn x_power(self) -> i64 {
        match self {
            Variant::EBar0 | Variant::E1 => 1,
            Variant::E0 | Variant::EBar1 => -1,
        }
    }

    /// `ebar` currents carry holomorphic dressing.
    pub fn is_bar(self) -> bool {
        matches!(self, Variant::EBar0 | Variant::EBar1)
    }

    pub fn direction(self) -> Direction {
        match self {
            Variant::EBar0 | Variant::E0 => Direction::IntoDualSite,
            Variant::EBar1 | Variant::E1 => Direction::OutOfDualSite,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::EBar0 => "ebar0",
            Variant::E0 => "e0",
            Variant::EBar1 => "ebar1",
            Variant::E1 => "e1",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::InvalidParams(format!("unknown current variant {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    IntoDualSite,
    OutOfDualSite,
}

impl Direction {
    pub fn sign(self) -> i64 {
        match self {
            Direction::IntoDualSite => 1,
            Direction::OutOfDualSite => -1,
        }
    }
}

/// How a tail step crosses an edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Crossing {
    /// Horizontal `W` edge crossed upward.
    WUp,
    WDown,
    /// Vertical `Wbar` edge crossed rightward.
    WbarRight,
    WbarLeft,
}

impl Crossing {
    pub fn is_bar(self) -> bool {
        matches!(self, Crossing::WbarRight | Crossing::WbarLeft)
    }

    fn sign(self) -> i64 {
        match self {
            Crossing::WUp | Crossing::WbarRight => 1,
            Crossing::WDown | Crossing::WbarLeft => -1,
        }
    }
}

/// Per-point disorder factors `f = y / (-q x mu)` (or `1/mu` for `e` currents).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisorderFactor {
    pub fr: C64,
    pub fs: C64,
    pub variant: Variant,
    pub direction: Direction,
}

/// `f_r = y_r / (-q x_r mu_r)`.
pub fn f_factor(r: &CurvePoint) -> C64 {
    r.y / (-r.params.q * r.x * r.mu)
}

impl DisorderFactor {
    pub fn new(table: &WeightTable, variant: Variant) -> Self {
        let (fr, fs) = if variant.is_bar() {
            (f_factor(&table.r), f_factor(&table.s))
        } else {
            (1.0 / table.r.mu, 1.0 / table.s.mu)
        };
        DisorderFactor { fr, fs, variant, direction: variant.direction() }
    }

    /// Factors set to one: the tail only shifts spin differences.
    pub fn bare(variant: Variant) -> Self {
        let one = C64::new(1.0, 0.0);
        DisorderFactor { fr: one, fs: one, variant, direction: variant.direction() }
    }

    /// `(shift, factor)` for one crossing: the weight becomes `factor * W(a - b + shift)`.
    pub fn crossing(&self, c: Crossing) -> (i64, C64) {
        let d = c.sign() * self.direction.sign();
        let g = if c.is_bar() { self.fr * self.fs } else { self.fr / self.fs };
        (d, g.powi(d as i32))
    }
}

/// The weight of a crossed edge: `a` is the left (top) spin and `b` the right (bottom) spin of a `W` (`Wbar`) edge.
pub fn disorder_modified_weight(table: &WeightTable, c: Crossing, a: i64, b: i64, factor: &DisorderFactor) -> C64 {
    let (d, g) = factor.crossing(c);
    if c.is_bar() {
        g * table.wbar_at(a - b + d)
    } else {
        g * table.w_at(a - b + d)
    }
}
