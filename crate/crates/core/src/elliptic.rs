//! Jacobi elliptic and theta functions for the `N = 2` parameterisation.
//!
//! Theta functions use Baxter's names: `H = theta_1`, `H1 = theta_2`,
//! `Theta = theta_4`, `Theta1 = theta_3`, all at argument `v = pi beta / (2K)`
//! and nome `p`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::curve::{make_point_xyz, CurvePoint, ModelParams, C64, I};
use crate::error::{Error, Result};

const SERIES_CAP: usize = 64;
const SERIES_EPS: f64 = 1e-16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipticContext {
    pub k: f64,
    pub kprime: f64,
    pub big_k: f64,
    /// `K'`, infinite at `k = 0`.
    pub big_kp: f64,
    /// Nome `exp(-pi K'/K)`.
    pub p: f64,
}

fn agm(mut a: f64, mut b: f64) -> f64 {
    for _ in 0..64 {
        let (an, bn) = ((a + b) / 2.0, (a * b).sqrt());
        if (an - bn).abs() <= 1e-16 * an {
            return an;
        }
        a = an;
        b = bn;
    }
    (a + b) / 2.0
}

/// Complete elliptic integral of the first kind, `K(k) = pi / (2 agm(1, k'))`.
pub fn complete_k(k: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&k) {
        return Err(Error::Domain(format!("modulus {k} outside [0, 1)")));
    }
    Ok(PI / (2.0 * agm(1.0, (1.0 - k * k).sqrt())))
}

impl EllipticContext {
    pub fn from_modulus(k: f64) -> Result<Self> {
        let big_k = complete_k(k)?;
        let kprime = (1.0 - k * k).sqrt();
        if k == 0.0 {
            return Ok(EllipticContext { k, kprime, big_k, big_kp: f64::INFINITY, p: 0.0 });
        }
        // K' = K(k') = pi / (2 agm(1, k)), which stays accurate when k' rounds to 1.
        let big_kp = PI / (2.0 * agm(1.0, k));
        let p = (-PI * big_kp / big_k).exp();
        Ok(EllipticContext { k, kprime, big_k, big_kp, p })
    }

    /// Context fixed by the nome, with `k`, `k'` and `K` from theta constants.
    pub fn from_nome(p: f64) -> Result<Self> {
        check_nome(p)?;
        let t2 = reduced_theta2(C64::new(0.0, 0.0), p).re * p.powf(0.25);
        let t3 = theta3(C64::new(0.0, 0.0), p).re;
        let t4 = theta4(C64::new(0.0, 0.0), p).re;
        let k = (t2 / t3).powi(2);
        let kprime = (t4 / t3).powi(2);
        let big_k = PI / 2.0 * t3 * t3;
        let big_kp = if p == 0.0 { f64::INFINITY } else { -big_k * p.ln() / PI };
        Ok(EllipticContext { k, kprime, big_k, big_kp, p })
    }

    /// `v = pi beta / (2K)`.
    pub fn theta_argument(&self, beta: C64) -> C64 {
        beta * PI / (2.0 * self.big_k)
    }

    /// `beta = (K/pi) ((i/2) log p + 2 beta')`. Requires `p > 0`.
    pub fn scaled_beta(&self, beta_prime: f64) -> C64 {
        self.big_k / PI * (I * 0.5 * self.p.ln() + 2.0 * beta_prime)
    }
}

fn check_nome(p: f64) -> Result<()> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::Domain(format!("nome {p} outside [0, 1)")));
    }
    Ok(())
}

fn sum_series(mut term: impl FnMut(usize) -> C64, start: C64) -> C64 {
    let mut sum = start;
    for n in 0..SERIES_CAP {
        let t = term(n);
        sum += t;
        if n > 0 && t.norm() <= SERIES_EPS * sum.norm().max(f64::MIN_POSITIVE) {
            break;
        }
    }
    sum
}

fn pow_nome(p: f64, e: f64) -> f64 {
    if p == 0.0 {
        if e == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        (e * p.ln()).exp()
    }
}

/// `theta_1 / p^(1/4) = 2 sum (-1)^n p^(n^2+n) sin((2n+1) v)`.
fn reduced_theta1(v: C64, p: f64) -> C64 {
    sum_series(
        |n| {
            let nf = n as f64;
            let sign = if n % 2 == 0 { 2.0 } else { -2.0 };
            sign * pow_nome(p, nf * nf + nf) * ((2.0 * nf + 1.0) * v).sin()
        },
        C64::new(0.0, 0.0),
    )
}

/// `theta_2 / p^(1/4) = 2 sum p^(n^2+n) cos((2n+1) v)`.
fn reduced_theta2(v: C64, p: f64) -> C64 {
    sum_series(
        |n| {
            let nf = n as f64;
            2.0 * pow_nome(p, nf * nf + nf) * ((2.0 * nf + 1.0) * v).cos()
        },
        C64::new(0.0, 0.0),
    )
}

fn theta3(v: C64, p: f64) -> C64 {
    sum_series(
        |n| {
            let m = (n + 1) as f64;
            2.0 * pow_nome(p, m * m) * (2.0 * m * v).cos()
        },
        C64::new(1.0, 0.0),
    )
}

fn theta4(v: C64, p: f64) -> C64 {
    sum_series(
        |n| {
            let m = (n + 1) as f64;
            let sign = if (n + 1) % 2 == 0 { 2.0 } else { -2.0 };
            sign * pow_nome(p, m * m) * (2.0 * m * v).cos()
        },
        C64::new(1.0, 0.0),
    )
}

/// Jacobi `theta_1..theta_4` at argument `v` and nome `p`.
pub fn jacobi_theta(v: C64, p: f64) -> Result<[C64; 4]> {
    check_nome(p)?;
    let quarter = pow_nome(p, 0.25);
    Ok([reduced_theta1(v, p) * quarter, reduced_theta2(v, p) * quarter, theta3(v, p), theta4(v, p)])
}

/// `(sn, cn, dn)` from theta quotients.
pub fn jacobi_sn_cn_dn(beta: C64, ctx: &EllipticContext) -> Result<(C64, C64, C64)> {
    let p = ctx.p;
    check_nome(p)?;
    let v = ctx.theta_argument(beta);
    let zero = C64::new(0.0, 0.0);
    let t2z = reduced_theta2(zero, p);
    let t3z = theta3(zero, p);
    let t4z = theta4(zero, p);
    let t4 = theta4(v, p);
    if t4.norm() == 0.0 {
        return Err(Error::DivisionByZero("theta_4 at a pole of sn"));
    }
    let sn = t3z / t2z * reduced_theta1(v, p) / t4;
    let cn = t4z / t2z * reduced_theta2(v, p) / t4;
    let dn = t4z / t3z * theta3(v, p) / t4;
    Ok((sn, cn, dn))
}

/// `(H, H1, Theta, Theta1)` at `beta`.
pub fn theta_h_h1_theta_theta1(beta: C64, ctx: &EllipticContext) -> Result<[C64; 4]> {
    let [t1, t2, t3, t4] = jacobi_theta(ctx.theta_argument(beta), ctx.p)?;
    Ok([t1, t2, t4, t3])
}

/// `(H, H1, Theta, Theta1)` at the scaled argument `v = (i/4) log p + beta'`.
///
/// At `p = 0` the finite limit `(-i e^{i beta'}, e^{i beta'}, 1, 1)` is returned.
pub fn scaled_thetas(beta_prime: f64, p: f64) -> Result<[C64; 4]> {
    check_nome(p)?;
    if p == 0.0 {
        let e = C64::from_polar(1.0, beta_prime);
        return Ok([-I * e, e, C64::new(1.0, 0.0), C64::new(1.0, 0.0)]);
    }
    let v = I * 0.25 * p.ln() + beta_prime;
    let [t1, t2, t3, t4] = jacobi_theta(v, p)?;
    Ok([t1, t2, t4, t3])
}

/// Two-term small-`p` forms of `(H, H1, Theta, Theta1)` at the scaled argument.
pub fn scaled_theta_expansions(beta_prime: f64, p: f64) -> [C64; 4] {
    let e = C64::from_polar(1.0, beta_prime);
    let h = p.sqrt();
    [
        -I * e + I * e.conj() * h,
        e + e.conj() * h,
        1.0 - e * e * h,
        1.0 + e * e * h,
    ]
}

/// An `N = 2` curve point on the elliptic chart, with its scaled argument `beta'`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsingPoint {
    pub point: CurvePoint,
    pub beta_prime: f64,
    pub ctx: EllipticContext,
}

/// `x = -sqrt(k) sn`, `y = -sqrt(k) cn/dn`, `mu = sqrt(k')/dn`, written as
/// `x = -H/Theta`, `y = -H1/Theta1`, `mu = Theta/Theta1` so that the scaled
/// argument stays finite as `p -> 0`.
pub fn ising_point(ctx: &EllipticContext, beta_prime: f64) -> Result<IsingPoint> {
    let [h, h1, th, th1] = scaled_thetas(beta_prime, ctx.p)?;
    let mut params = ModelParams::new(2, ctx.kprime)?.with_tol(1e-9);
    params.k = C64::new(ctx.k, 0.0);
    let point = make_point_xyz(&params, -h / th, -h1 / th1, th / th1)?;
    Ok(IsingPoint { point, beta_prime, ctx: *ctx })
}

/// Embedding angle `theta_k = pi (beta_s - beta_r) / K = 2 (beta'_s - beta'_r)`.
pub fn ising_theta(r: &IsingPoint, s: &IsingPoint) -> f64 {
    2.0 * (s.beta_prime - r.beta_prime)
}
