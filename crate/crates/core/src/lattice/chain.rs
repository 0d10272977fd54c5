//! The quantum chain, its `Z_N` charge sectors and Kramers-Wannier duality.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::transfer::{dense_dim, digits};
use crate::curve::{C64, I};
use crate::error::{Error, Result};

pub type CMat = DMatrix<C64>;

fn omega_pow(n: usize, a: i64) -> C64 {
    C64::from_polar(1.0, 2.0 * PI * a.rem_euclid(n as i64) as f64 / n as f64)
}

/// `H = 1/(N cos phibar) sum_j sum_n [abar_n Z_j^n + a_n (X_j X_{j+1}^dag)^n]` with
/// `a_n = e^{i(2n-N) phi/N} / sin(pi n/N)`, `abar_n = k' e^{i(2n-N) phibar/N} / sin(pi n/N)`
/// and the twisted closure `X_{L+1} = omega^twist X_1`.
pub fn hamiltonian(n: usize, phi: C64, phibar: C64, kprime: f64, l: usize, twist: i64) -> Result<CMat> {
    if l < 2 {
        return Err(Error::InvalidParams("the chain needs at least two sites".into()));
    }
    let pref = 1.0 / (n as f64 * phibar.cos());
    if !pref.is_finite() {
        return Err(Error::Domain("cos(phibar) vanishes".into()));
    }
    let dim = dense_dim(n, l)?;
    let nf = n as f64;
    let alpha: Vec<C64> = (0..n).map(|m| (I * (2.0 * m as f64 - nf) * phi / nf).exp() / (PI * m as f64 / nf).sin()).collect();
    let alpha_bar: Vec<C64> =
        (0..n).map(|m| kprime * (I * (2.0 * m as f64 - nf) * phibar / nf).exp() / (PI * m as f64 / nf).sin()).collect();
    let confs: Vec<Vec<usize>> = (0..dim).map(|i| digits(i, n, l)).collect();
    let stride = |j: usize| n.pow((l - 1 - j) as u32);
    let mut h = CMat::zeros(dim, dim);
    for (idx, c) in confs.iter().enumerate() {
        // Diagonal bond part.
        let mut diag = C64::new(0.0, 0.0);
        for j in 0..l {
            let k = (j + 1) % l;
            let mut d = c[j] as i64 - c[k] as i64;
            if j == l - 1 {
                d -= twist;
            }
            for m in 1..n {
                diag += alpha[m] * omega_pow(n, m as i64 * d);
            }
        }
        h[(idx, idx)] += diag;
        // Z_j^m maps v_b to v_{b-m} at site j.
        for j in 0..l {
            for m in 1..n {
                let b = (c[j] + n - m) % n;
                let to = idx - c[j] * stride(j) + b * stride(j);
                h[(to, idx)] += alpha_bar[m];
            }
        }
    }
    Ok(h * pref)
}

/// `||H - H^dag|| / ||H||`.
pub fn check_hermiticity(h: &CMat) -> f64 {
    (h - h.adjoint()).norm() / h.norm().max(f64::MIN_POSITIVE)
}

/// Orthonormal basis (as columns) of the sector where `R = prod_j Z_j` has eigenvalue `omega^{-m}`.
///
/// `R` shifts every spin down by one, so each orbit has exactly `N` elements
/// and contributes one vector `N^{-1/2} sum_k omega^{mk} R^k v`.
pub fn sector_basis(n: usize, l: usize, m: i64) -> Result<CMat> {
    let dim = dense_dim(n, l)?;
    let stride = |j: usize| n.pow((l - 1 - j) as u32);
    let shift = |idx: usize| -> usize {
        digits(idx, n, l).iter().enumerate().map(|(j, a)| ((a + n - 1) % n) * stride(j)).sum()
    };
    let mut seen = vec![false; dim];
    let mut cols = Vec::new();
    let norm = 1.0 / (n as f64).sqrt();
    for start in 0..dim {
        if seen[start] {
            continue;
        }
        let mut v = nalgebra::DVector::<C64>::zeros(dim);
        let mut idx = start;
        for k in 0..n {
            seen[idx] = true;
            v[idx] += omega_pow(n, m * k as i64) * norm;
            idx = shift(idx);
        }
        cols.push(v);
    }
    Ok(CMat::from_columns(&cols))
}

/// Sorted eigenvalues of a Hermitian `H` restricted to charge sector `m`.
pub fn spectrum_in_sector(h: &CMat, n: usize, l: usize, m: i64) -> Result<Vec<f64>> {
    let b = sector_basis(n, l, m)?;
    let hs = b.adjoint() * h * &b;
    let hs = (&hs + hs.adjoint()) * C64::new(0.5, 0.0);
    let mut ev: Vec<f64> = SymmetricEigen::new(hs).eigenvalues.iter().cloned().collect();
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

/// `cos(phibar) / (k' cos(phi))`: `H(phibar, phi, 1/k')` equals this times the dual of `H(phi, phibar, k')`.
pub fn kw_scale(phi: f64, phibar: f64, kprime: f64) -> f64 {
    phibar.cos() / (kprime * phi.cos())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KwReport {
    pub scale: f64,
    /// `[m][mbar]` largest eigenvalue deviation, relative to the spectral radius.
    pub deviations: Vec<Vec<f64>>,
    pub max_deviation: f64,
}

/// Compare the spectrum of `scale * H(phi, phibar, k')` in sector `m` with twist `mbar` against
/// that of `H(phibar, phi, 1/k')` in sector `mbar` with twist `m`, for every `(m, mbar)`.
pub fn check_kw_duality(n: usize, phi: f64, phibar: f64, kprime: f64, l: usize) -> Result<KwReport> {
    if kprime <= 0.0 {
        return Err(Error::InvalidParams("KW duality needs k' > 0".into()));
    }
    let scale = kw_scale(phi, phibar, kprime);
    if !scale.is_finite() {
        return Err(Error::Domain("cos(phi) vanishes".into()));
    }
    let c = |v: f64| C64::new(v, 0.0);
    let mut devs = vec![vec![0.0; n]; n];
    let mut worst: f64 = 0.0;
    for mbar in 0..n as i64 {
        let h = hamiltonian(n, c(phi), c(phibar), kprime, l, mbar)?;
        for m in 0..n as i64 {
            let hd = hamiltonian(n, c(phibar), c(phi), 1.0 / kprime, l, m)?;
            let a = spectrum_in_sector(&h, n, l, m)?;
            let b = spectrum_in_sector(&hd, n, l, mbar)?;
            let radius = b.iter().fold(0.0f64, |acc, v| acc.max(v.abs())).max(f64::MIN_POSITIVE);
            let d = a.iter().zip(&b).map(|(x, y)| (scale * x - y).abs()).fold(0.0, f64::max) / radius;
            devs[m as usize][mbar as usize] = d;
            worst = worst.max(d);
        }
    }
    Ok(KwReport { scale, deviations: devs, max_deviation: worst })
}
