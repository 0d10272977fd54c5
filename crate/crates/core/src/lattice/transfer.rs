//! Row-to-row transfer matrix and its anisotropic limit.
//!
//! Configurations of a row of `L` spins are indexed with site 0 as the most
//! significant base-`N` digit, matching the tensor order of the chain operators.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::chain::hamiltonian;
use crate::curve::{make_point_from_chart, Branch, CurvePoint, C64};
use crate::error::{Error, Result};
use crate::weights::build_weights;

pub type CMat = DMatrix<C64>;

/// Largest dense transfer-matrix dimension `N^L`.
pub const DENSE_CAP: usize = 729;

pub(crate) fn digits(mut idx: usize, n: usize, l: usize) -> Vec<usize> {
    let mut d = vec![0; l];
    for k in (0..l).rev() {
        d[k] = idx % n;
        idx /= n;
    }
    d
}

pub(crate) fn dense_dim(n: usize, l: usize) -> Result<usize> {
    match n.checked_pow(l as u32) {
        Some(d) if d <= DENSE_CAP => Ok(d),
        Some(d) => Err(Error::DimensionOverflow { dim: d, cap: DENSE_CAP }),
        None => Err(Error::DimensionOverflow { dim: usize::MAX, cap: DENSE_CAP }),
    }
}

/// `T_rs = A B` with periodic rows
/// `A(s, s') = prod_l W(s_l - s'_l) Wbar(s'_l - s_{l+1})` and
/// `B(s', s'') = prod_l Wbar(s''_l - s'_l) W(s'_l - s''_{l+1})`.
pub fn transfer_matrix(r: &CurvePoint, s: &CurvePoint, l: usize) -> Result<CMat> {
    if l == 0 {
        return Err(Error::InvalidParams("chain length must be positive".into()));
    }
    let t = build_weights(r, s)?;
    let n = t.n();
    let dim = dense_dim(n, l)?;
    let confs: Vec<Vec<i64>> = (0..dim).map(|i| digits(i, n, l).into_iter().map(|d| d as i64).collect()).collect();
    let a = CMat::from_fn(dim, dim, |i, j| {
        let (s0, s1) = (&confs[i], &confs[j]);
        (0..l).map(|k| t.w_at(s0[k] - s1[k]) * t.wbar_at(s1[k] - s0[(k + 1) % l])).product()
    });
    let b = CMat::from_fn(dim, dim, |i, j| {
        let (s1, s2) = (&confs[i], &confs[j]);
        (0..l).map(|k| t.wbar_at(s2[k] - s1[k]) * t.w_at(s1[k] - s2[(k + 1) % l])).product()
    });
    Ok(a * b)
}

/// The cyclic translation `e^{-iP}`: entry 1 where `s''_l = s_{l+1}`.
pub fn translation_operator(n: usize, l: usize) -> Result<CMat> {
    let dim = dense_dim(n, l)?;
    let confs: Vec<Vec<usize>> = (0..dim).map(|i| digits(i, n, l)).collect();
    Ok(CMat::from_fn(dim, dim, |i, j| {
        if (0..l).all(|k| confs[j][k] == confs[i][(k + 1) % l]) {
            C64::new(1.0, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteDifferenceReport {
    pub eps: Vec<f64>,
    /// `||H_fd - lambda H - c|| / ||lambda H||` at each `eps`.
    pub deviations: Vec<f64>,
    /// Successive `deviation(eps) / deviation(eps/2)`, close to 2 for a first-order error.
    pub halving_ratios: Vec<f64>,
    /// `cos(phibar_s) / cos(phi_s)`, the scale relating the generator to the chain operator.
    pub expected_scale: C64,
    /// Least-squares scale of the traceless parts at the smallest `eps`.
    pub fitted_scale: C64,
    /// Identity component at the smallest `eps`.
    pub offset: C64,
}

/// A point at `u_s + du` on the branch whose `phi` is closest to that of `s`.
pub(crate) fn nearby_point(s: &CurvePoint, du: C64) -> Result<CurvePoint> {
    let c = s.chart.ok_or_else(|| Error::Domain("finite difference needs a charted point".into()))?;
    let cands: Vec<CurvePoint> = [Branch::Principal, Branch::Reflected]
        .into_iter()
        .filter_map(|b| make_point_from_chart(&s.params, c.u + du, b).ok())
        .collect();
    cands
        .into_iter()
        .min_by(|a, b| {
            let da = (a.chart.unwrap().phi - c.phi).norm() + (a.chart.unwrap().phibar - c.phibar).norm();
            let db = (b.chart.unwrap().phi - c.phi).norm() + (b.chart.unwrap().phibar - c.phibar).norm();
            da.total_cmp(&db)
        })
        .ok_or(Error::BranchFailure(f64::NAN))
}

fn frob(m: &CMat) -> f64 {
    m.norm()
}

/// Extract the generator `(1 - e^{iP} T(u_s + eps, u_s)) / eps` and compare it
/// with the chain operator at `s`, for `eps`, `eps/2`, ... (`levels` values).
pub fn finite_difference_hamiltonian(s: &CurvePoint, l: usize, eps: f64, levels: usize) -> Result<FiniteDifferenceReport> {
    let c = s.chart.ok_or_else(|| Error::Domain("finite difference needs a charted point".into()))?;
    let n = s.n();
    let t0 = transfer_matrix(s, s, l)?;
    let t0_inv = t0.transpose();
    let h = hamiltonian(n, c.phi, c.phibar, s.params.kprime, l, 0)?;
    let dim = h.nrows();
    let id = CMat::identity(dim, dim);
    let scale = c.phibar.cos() / c.phi.cos();
    let h_traceless = &h - &id * (h.trace() / dim as f64);
    let mut rep = FiniteDifferenceReport {
        eps: Vec::new(),
        deviations: Vec::new(),
        halving_ratios: Vec::new(),
        expected_scale: scale,
        fitted_scale: C64::new(0.0, 0.0),
        offset: C64::new(0.0, 0.0),
    };
    let mut e = eps;
    for _ in 0..levels.max(2) {
        let r = nearby_point(s, C64::new(e, 0.0))?;
        let t = transfer_matrix(&r, s, l)?;
        let hfd = (&id - &t0_inv * t) / C64::new(e, 0.0);
        let diff = &hfd - &h * scale;
        let offset = diff.trace() / dim as f64;
        let dev = frob(&(&diff - &id * offset)) / frob(&(&h * scale));
        let fd_traceless = &hfd - &id * (hfd.trace() / dim as f64);
        rep.fitted_scale = h_traceless.dotc(&fd_traceless) / h_traceless.dotc(&h_traceless);
        rep.offset = offset;
        rep.eps.push(e);
        rep.deviations.push(dev);
        e /= 2.0;
    }
    rep.halving_ratios = rep.deviations.windows(2).map(|w| w[0] / w[1]).collect();
    Ok(rep)
}
