//! Cyclic representations `V_rr'`, coproducts, the `S` and `T` operators and
//! the factorized intertwiner `R = S_{r's} (T_{r's'} x T_{rs}) S_{rs'}`.
//!
//! Tensor products are first-factor-major: `v_a x v_b` has index `a N + b`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::curve::{CurvePoint, C64};
use crate::error::{Error, Result};
use crate::weights::{build_weights, f_factor};

pub type CMat = DMatrix<C64>;

/// Largest number of tensor factors materialized by [`coproduct_action`].
pub const MAX_FACTORS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Generator {
    E0,
    E1,
    F0,
    F1,
    T0,
    T1,
    T0Inv,
    T1Inv,
    Z0,
    Z1,
    /// `t0 f0`.
    EBar0,
    /// `t1 f1`.
    EBar1,
    /// `t0 z0^-1`, grouplike.
    T0Z0Inv,
    T1Z1Inv,
}

impl Generator {
    /// The ten generators whose intertwining is checked.
    pub const CHECKED: [Generator; 10] = [
        Generator::E0,
        Generator::E1,
        Generator::F0,
        Generator::F1,
        Generator::T0,
        Generator::T1,
        Generator::Z0,
        Generator::Z1,
        Generator::EBar0,
        Generator::EBar1,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Generator::E0 => "e0",
            Generator::E1 => "e1",
            Generator::F0 => "f0",
            Generator::F1 => "f1",
            Generator::T0 => "t0",
            Generator::T1 => "t1",
            Generator::T0Inv => "t0^-1",
            Generator::T1Inv => "t1^-1",
            Generator::Z0 => "z0",
            Generator::Z1 => "z1",
            Generator::EBar0 => "ebar0",
            Generator::EBar1 => "ebar1",
            Generator::T0Z0Inv => "t0z0^-1",
            Generator::T1Z1Inv => "t1z1^-1",
        }
    }
}

/// Sign of `c0` relative to the principal square root of `q^2 x x' / (y y')`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum RootChoice {
    #[default]
    Principal,
    Negated,
}

/// Clock `X = diag(omega^a)` and shift `Z` with `Z[a, a+1] = 1`.
pub fn clock_shift(n: usize, omega_pow: impl Fn(i64) -> C64) -> (CMat, CMat) {
    let x = CMat::from_fn(n, n, |i, j| if i == j { omega_pow(i as i64) } else { C64::new(0.0, 0.0) });
    let z = CMat::from_fn(n, n, |i, j| if j == (i + 1) % n { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) });
    (x, z)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CyclicRep {
    pub r: CurvePoint,
    pub rprime: CurvePoint,
    pub c0: C64,
    pub x: CMat,
    pub z: CMat,
    e0: CMat,
    e1: CMat,
    f0: CMat,
    f1: CMat,
    t0: CMat,
    t1: CMat,
    t0inv: CMat,
    t1inv: CMat,
    z0: CMat,
    z1: CMat,
}

fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// Inverse of a permutation matrix (its transpose).
fn perm_inverse(m: &CMat) -> CMat {
    m.transpose()
}

pub fn build_rep(r: &CurvePoint, rp: &CurvePoint, root: RootChoice) -> Result<CyclicRep> {
    let p = r.params;
    let n = p.n;
    let zero = C64::new(0.0, 0.0);
    if r.x == zero || r.y == zero || rp.x == zero || rp.y == zero {
        return Err(Error::Domain("c0 needs nonzero x, y at both points".into()));
    }
    let q = p.q;
    let (xm, zm) = clock_shift(n, |a| p.omega_pow(a));
    let xi = xm.map(|v| v.conj());
    let zi = perm_inverse(&zm);
    let id = identity(n);
    let (x, y, mu) = (r.x, r.y, r.mu);
    let (xp, yp, mup) = (rp.x, rp.y, rp.mu);
    let mut c0 = (q * q * x * xp / (y * yp)).sqrt();
    if root == RootChoice::Negated {
        c0 = -c0;
    }
    let mm = mu * mup;
    let pre = q / ((q * q - 1.0) * (q * q - 1.0));
    let e1 = (&zm * (x * mm) - &id * yp) * &xm * pre;
    let f1 = &xi * (&zi * y - &id * (xp * mm)) * (c0 / (x * xp * mm));
    let t1 = &zm * (c0 * mm);
    let t1inv = &zi / (c0 * mm);
    let z1 = &id / c0;
    let e0 = &xi * (&zi * (y / mm) - &id * xp) * pre;
    let f0 = (&zm * (c0 * mm / xp) - &id * (q * q / (c0 * y))) * &xm;
    let t0 = &zi / (c0 * mm);
    let t0inv = &zm * (c0 * mm);
    let z0 = &id * c0;
    Ok(CyclicRep { r: *r, rprime: *rp, c0, x: xm, z: zm, e0, e1, f0, f1, t0, t1, t0inv, t1inv, z0, z1 })
}

impl CyclicRep {
    pub fn dim(&self) -> usize {
        self.x.nrows()
    }

    pub fn matrix(&self, g: Generator) -> CMat {
        match g {
            Generator::E0 => self.e0.clone(),
            Generator::E1 => self.e1.clone(),
            Generator::F0 => self.f0.clone(),
            Generator::F1 => self.f1.clone(),
            Generator::T0 => self.t0.clone(),
            Generator::T1 => self.t1.clone(),
            Generator::T0Inv => self.t0inv.clone(),
            Generator::T1Inv => self.t1inv.clone(),
            Generator::Z0 => self.z0.clone(),
            Generator::Z1 => self.z1.clone(),
            Generator::EBar0 => &self.t0 * &self.f0,
            Generator::EBar1 => &self.t1 * &self.f1,
            Generator::T0Z0Inv => &self.t0 / self.c0,
            Generator::T1Z1Inv => &self.t1 * self.c0,
        }
    }

    /// `c0^2 - q^2 x x' / (y y')`.
    pub fn c0_residual(&self) -> f64 {
        let q = self.r.params.q;
        (self.c0 * self.c0 - q * q * self.r.x * self.rprime.x / (self.r.y * self.rprime.y)).norm()
    }
}

enum Coproduct {
    Grouplike,
    /// `Delta(x) = x (x) right + left (x) x`.
    Skew { left: Generator2, right: Generator2 },
}

/// Products of generators appearing in the coproduct legs.
#[derive(Clone, Copy)]
enum Generator2 {
    One,
    Single(Generator),
    Product(Generator, Generator),
    ZInvOf(Generator),
}

fn coproduct_form(g: Generator) -> Coproduct {
    use Generator::*;
    use Generator2::*;
    match g {
        E0 => Coproduct::Skew { left: Product(Z0, T0), right: One },
        E1 => Coproduct::Skew { left: Product(Z1, T1), right: One },
        F0 => Coproduct::Skew { left: ZInvOf(Z0), right: Single(T0Inv) },
        F1 => Coproduct::Skew { left: ZInvOf(Z1), right: Single(T1Inv) },
        EBar0 => Coproduct::Skew { left: Single(T0Z0Inv), right: One },
        EBar1 => Coproduct::Skew { left: Single(T1Z1Inv), right: One },
        T0 | T1 | T0Inv | T1Inv | Z0 | Z1 | T0Z0Inv | T1Z1Inv => Coproduct::Grouplike,
    }
}

fn leg(rep: &CyclicRep, g: Generator2) -> CMat {
    match g {
        Generator2::One => identity(rep.dim()),
        Generator2::Single(a) => rep.matrix(a),
        Generator2::Product(a, b) => rep.matrix(a) * rep.matrix(b),
        Generator2::ZInvOf(a) => {
            let m = rep.matrix(a);
            &identity(rep.dim()) / m[(0, 0)]
        }
    }
}

fn kron_all(ms: &[CMat]) -> CMat {
    let mut it = ms.iter();
    let first = it.next().expect("at least one factor").clone();
    it.fold(first, |acc, m| acc.kronecker(m))
}

/// Matrix of `Delta^(L)(g)` on `reps[0] (x) ... (x) reps[L-1]`.
///
/// Grouplike generators give `g (x) ... (x) g`; the others give
/// `sum_j left^(j-1) (x) g (x) right^(L-j)`, which is what the recursion
/// `Delta^(m+1) = (Delta (x) 1 ...) Delta^(m)` produces.
pub fn coproduct_action(g: Generator, reps: &[CyclicRep]) -> Result<CMat> {
    if reps.is_empty() {
        return Err(Error::InvalidParams("coproduct needs at least one factor".into()));
    }
    if reps.len() > MAX_FACTORS {
        let n = reps[0].dim();
        return Err(Error::DimensionOverflow { dim: n.pow(reps.len() as u32), cap: n.pow(MAX_FACTORS as u32) });
    }
    match coproduct_form(g) {
        Coproduct::Grouplike => Ok(kron_all(&reps.iter().map(|r| r.matrix(g)).collect::<Vec<_>>())),
        Coproduct::Skew { left, right } => {
            let l = reps.len();
            let mut total: Option<CMat> = None;
            for j in 0..l {
                let factors: Vec<CMat> = (0..l)
                    .map(|m| match m.cmp(&j) {
                        std::cmp::Ordering::Less => leg(&reps[m], left),
                        std::cmp::Ordering::Equal => reps[m].matrix(g),
                        std::cmp::Ordering::Greater => leg(&reps[m], right),
                    })
                    .collect();
                let term = kron_all(&factors);
                total = Some(match total {
                    None => term,
                    Some(t) => t + term,
                });
            }
            Ok(total.expect("nonempty"))
        }
    }
}

/// `S_rs (v_a (x) v_b) = W_rs(a - b) v_b (x) v_a`, as a diagonal matrix in the ordered tensor basis.
pub fn build_s(r: &CurvePoint, s: &CurvePoint) -> Result<CMat> {
    let t = build_weights(r, s)?;
    let n = t.n();
    let mut m = CMat::zeros(n * n, n * n);
    for a in 0..n {
        for b in 0..n {
            m[(a * n + b, a * n + b)] = t.w_at(a as i64 - b as i64);
        }
    }
    Ok(m)
}

/// `T_rs v_e = sum_a Wbar_rs(a) v_{e-a}`.
pub fn build_t(r: &CurvePoint, s: &CurvePoint) -> Result<CMat> {
    let t = build_weights(r, s)?;
    let n = t.n();
    let mut m = CMat::zeros(n, n);
    for e in 0..n {
        for a in 0..n {
            m[((e + n - a) % n, e)] += t.wbar[a];
        }
    }
    Ok(m)
}

pub fn build_s_t(r: &CurvePoint, s: &CurvePoint) -> Result<(CMat, CMat)> {
    Ok((build_s(r, s)?, build_t(r, s)?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RMatrixCP {
    pub points: [CurvePoint; 4],
    /// The factorized product.
    pub matrix: CMat,
    /// Largest componentwise deviation of the closed form, relative to the largest entry.
    pub closed_form_deviation: f64,
}

impl RMatrixCP {
    pub fn n(&self) -> usize {
        self.points[0].n()
    }

    /// `R^{ab}_{cd}`, the coefficient of `v_d (x) v_c` in `R (v_a (x) v_b)`.
    pub fn component(&self, a: usize, b: usize, c: usize, d: usize) -> C64 {
        let n = self.n();
        self.matrix[(d * n + c, a * n + b)]
    }
}

/// Closed form `W_{r's}(d-c) Wbar_{r's'}(a-d) Wbar_{rs}(b-c) W_{rs'}(a-b)` at row `d N + c`, column `a N + b`.
pub fn closed_form_r(r: &CurvePoint, rp: &CurvePoint, s: &CurvePoint, sp: &CurvePoint) -> Result<CMat> {
    let w1 = build_weights(rp, s)?;
    let w2 = build_weights(rp, sp)?;
    let w3 = build_weights(r, s)?;
    let w4 = build_weights(r, sp)?;
    let n = w1.n();
    let mut m = CMat::zeros(n * n, n * n);
    for a in 0..n as i64 {
        for b in 0..n as i64 {
            for c in 0..n as i64 {
                for d in 0..n as i64 {
                    let v = w1.w_at(d - c) * w2.wbar_at(a - d) * w3.wbar_at(b - c) * w4.w_at(a - b);
                    m[((d as usize) * n + c as usize, (a as usize) * n + b as usize)] = v;
                }
            }
        }
    }
    Ok(m)
}

pub fn build_r(r: &CurvePoint, rp: &CurvePoint, s: &CurvePoint, sp: &CurvePoint) -> Result<RMatrixCP> {
    build_r_with_tol(r, rp, s, sp, 1e-10)
}

pub fn build_r_with_tol(r: &CurvePoint, rp: &CurvePoint, s: &CurvePoint, sp: &CurvePoint, tol: f64) -> Result<RMatrixCP> {
    let n = r.n();
    let fact = build_s(rp, s)? * build_t(rp, sp)?.kronecker(&build_t(r, s)?) * build_s(r, sp)?;
    let closed = closed_form_r(r, rp, s, sp)?;
    let scale = fact.iter().map(|v| v.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut worst = (0.0, [0usize; 4]);
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    let (i, j) = (d * n + c, a * n + b);
                    let dev = (fact[(i, j)] - closed[(i, j)]).norm() / scale;
                    if dev > worst.0 {
                        worst = (dev, [a, b, c, d]);
                    }
                }
            }
        }
    }
    if !(worst.0 <= tol) {
        return Err(Error::FactorizationMismatch { deviation: worst.0, at: worst.1 });
    }
    Ok(RMatrixCP { points: [*r, *rp, *s, *sp], matrix: fact, closed_form_deviation: worst.0 })
}

/// Largest singular value.
pub fn op_norm(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

/// `||lhs - rhs|| / (||a|| ||b||)` in the operator norm.
fn normalized(lhs: &CMat, rhs: &CMat, a: &CMat, b: &CMat) -> f64 {
    let den = op_norm(a) * op_norm(b);
    if den == 0.0 {
        return op_norm(&(lhs - rhs));
    }
    op_norm(&(lhs - rhs)) / den
}

/// Residual of `R Delta_{rr',ss'}(g) = Delta_{ss',rr'}(g) R`, normalized by `||R|| ||Delta(g)||`.
pub fn check_intertwiner(rm: &RMatrixCP, g: Generator, root: RootChoice) -> Result<f64> {
    let [r, rp, s, sp] = rm.points;
    let a = build_rep(&r, &rp, root)?;
    let b = build_rep(&s, &sp, root)?;
    let d_ab = coproduct_action(g, &[a.clone(), b.clone()])?;
    let d_ba = coproduct_action(g, &[b, a])?;
    Ok(normalized(&(&rm.matrix * &d_ab), &(&d_ba * &rm.matrix), &rm.matrix, &d_ab))
}

/// Residuals of the four separate `S` and `T` intertwining identities whose product gives the `R` relation.
pub fn check_sufficiency(
    r: &CurvePoint,
    rp: &CurvePoint,
    s: &CurvePoint,
    sp: &CurvePoint,
    g: Generator,
    root: RootChoice,
) -> Result<[f64; 4]> {
    let rep = |a: &CurvePoint, b: &CurvePoint| build_rep(a, b, root);
    let delta = |a: &CyclicRep, b: &CyclicRep| coproduct_action(g, &[a.clone(), b.clone()]);
    let n = r.n();
    let id = identity(n);

    let s1 = build_s(r, sp)?;
    let in1 = delta(&rep(r, rp)?, &rep(s, sp)?)?;
    let out1 = delta(&rep(sp, rp)?, &rep(s, r)?)?;
    let c1 = normalized(&(&s1 * &in1), &(&out1 * &s1), &s1, &in1);

    let t2 = build_t(rp, sp)?.kronecker(&id);
    let out2 = delta(&rep(rp, sp)?, &rep(s, r)?)?;
    let c2 = normalized(&(&t2 * &out1), &(&out2 * &t2), &t2, &out1);

    let t3 = id.kronecker(&build_t(r, s)?);
    let out3 = delta(&rep(rp, sp)?, &rep(r, s)?)?;
    let c3 = normalized(&(&t3 * &out2), &(&out3 * &t3), &t3, &out2);

    let s4 = build_s(rp, s)?;
    let out4 = delta(&rep(s, sp)?, &rep(r, rp)?)?;
    let c4 = normalized(&(&s4 * &out3), &(&out4 * &s4), &s4, &out3);

    Ok([c1, c2, c3, c4])
}

/// The four-term relation left after `S_rs` commutes past `Delta(ebar0)` with equal primed and unprimed points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourTermReport {
    /// `S (-y_r^-1 X G_rr (x) 1 + x_s^-1 G_rr (x) X) = (-q^2 y_s^-1 G_sr X (x) 1 + x_r^-1 G_sr (x) X) S`.
    pub four_term: f64,
    /// `x_r^-1 S (X (x) 1) = x_r^-1 (X (x) 1) S`.
    pub cancelled_x: f64,
    /// `y_s^-1 S (G_rr (x) X G_ss) = y_s^-1 (G_sr (x) X G_sr) S`.
    pub cancelled_g: f64,
}

/// Checks the four-term relation with `G_ab = pi_ab(t0 z0^-1) = f_a f_b Z^-1`.
pub fn four_term_check(r: &CurvePoint, s: &CurvePoint) -> Result<FourTermReport> {
    let p = r.params;
    let n = p.n;
    let q = p.q;
    let id = identity(n);
    let (xm, zm) = clock_shift(n, |a| p.omega_pow(a));
    let zi = perm_inverse(&zm);
    let (fr, fs) = (f_factor(r), f_factor(s));
    let g_rr = &zi * (fr * fr);
    let g_sr = &zi * (fs * fr);
    let g_ss = &zi * (fs * fs);
    let sm = build_s(r, s)?;
    let rel = |l: &CMat, rr: &CMat| op_norm(&(l - rr)) / op_norm(l).max(f64::MIN_POSITIVE);

    let lhs = &sm * ((&xm * &g_rr).kronecker(&id) * (-1.0 / r.y) + g_rr.kronecker(&xm) / s.x);
    let rhs = ((&g_sr * &xm).kronecker(&id) * (-q * q / s.y) + g_sr.kronecker(&xm) / r.x) * &sm;
    let x1 = xm.kronecker(&id);
    let cx = rel(&(&sm * &x1), &(&x1 * &sm));
    let gl = g_rr.kronecker(&(&xm * &g_ss));
    let gr = g_sr.kronecker(&(&xm * &g_sr));
    let cg = rel(&(&sm * &gl), &(&gr * &sm));
    Ok(FourTermReport { four_term: rel(&lhs, &rhs), cancelled_x: cx, cancelled_g: cg })
}
