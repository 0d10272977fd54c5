use std::collections::BTreeMap;

use cplab::curve::{sample_point, SampleBox};
use cplab::elliptic::{ising_point, ising_theta, EllipticContext};
use cplab::lattice::{
    check_hermiticity, check_kw_duality, finite_difference_hamiltonian, hamiltonian, spectrum_in_sector, transfer_matrix,
    translation_operator, DiamondLattice, Engine,
};
use cplab::parafermion::{
    all_plaquettes, dh_contour, dh_residual, ising_dirac_check, near_fz_expansion_check, near_fz_points, stencil,
    CurrentField, NearFzOrder, Plaquette,
};
use cplab::qgroup::{build_r_with_tol, check_intertwiner, check_sufficiency, Generator, RootChoice};
use cplab::weights::{check_crossing, check_star_triangle};
use cplab::{build_weights, make_point_from_chart, Branch, CurvePoint, Error, ModelParams, Result, Variant, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{RunConfig, Target};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub residual: f64,
    pub tol: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Outcome {
    pub checks: Vec<Check>,
    pub values: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

impl Outcome {
    pub fn check(&mut self, name: impl Into<String>, residual: f64, tol: f64) {
        self.checks.push(Check { name: name.into(), residual, tol, pass: residual <= tol });
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    /// The failing check with the largest residual/tol, or the closest call if all pass.
    pub fn worst(&self) -> Option<&Check> {
        let key = |c: &Check| if c.residual.is_nan() { f64::INFINITY } else { c.residual / c.tol };
        self.checks.iter().max_by(|a, b| key(a).total_cmp(&key(b)))
    }
}

const DEFAULT_KPRIME: f64 = 0.7;
const DEFAULT_U: f64 = 0.2;

fn rng(cfg: &RunConfig) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(cfg.seed)
}

fn params(cfg: &RunConfig, rng: &mut ChaCha8Rng) -> Result<ModelParams> {
    let kp = cfg.kprime.unwrap_or_else(|| rng.gen_range(0.4..1.6));
    ModelParams::new(cfg.n, kp)
}

fn random_points<const K: usize>(cfg: &RunConfig, rng: &mut ChaCha8Rng) -> Result<Vec<[CurvePoint; K]>> {
    let bx = SampleBox::default();
    (0..cfg.samples)
        .map(|_| {
            let p = params(cfg, rng)?;
            let mut out = Vec::with_capacity(K);
            for _ in 0..K {
                out.push(sample_point(&p, rng, &bx)?);
            }
            Ok(out.try_into().expect("K points"))
        })
        .collect()
}

/// The branch at `u` whose `phi` is nearest `target`.
fn nearest(params: &ModelParams, u: C64, target: C64) -> Result<CurvePoint> {
    [Branch::Principal, Branch::Reflected]
        .into_iter()
        .filter_map(|b| make_point_from_chart(params, u, b).ok())
        .min_by(|a, b| {
            let d = |p: &CurvePoint| (p.chart.unwrap().phi - target).norm();
            d(a).total_cmp(&d(b))
        })
        .ok_or(Error::BranchFailure(f64::NAN))
}

pub fn pinned_pair(cfg: &RunConfig) -> Result<(CurvePoint, CurvePoint)> {
    let n = cfg.n;
    let theta = cfg.theta_or_default();
    let Some(phi) = cfg.phi else {
        let p = ModelParams::new(n, cfg.kprime.unwrap_or(DEFAULT_KPRIME))?;
        let u = C64::new(cfg.u.unwrap_or(DEFAULT_U), 0.0);
        let r = make_point_from_chart(&p, u, Branch::Principal)?;
        let s = nearest(&p, u + theta, r.chart.unwrap().phi)?;
        return Ok((r, s));
    };
    if let Some(phibar) = cfg.phibar {
        let implied = phi.cos() / phibar.cos();
        if let Some(kp) = cfg.kprime {
            if (kp - implied).abs() > 1e-9 * implied.abs().max(1.0) {
                return Err(Error::InvalidParams(format!(
                    "--kprime {kp} contradicts cos(phi)/cos(phibar) = {implied}"
                )));
            }
        }
        return near_fz_points(n, theta, (phi + phibar) / 2.0, (phi - phibar) / 2.0);
    }
    let p = ModelParams::new(n, cfg.kprime.unwrap_or(DEFAULT_KPRIME))?;
    if p.k.norm() < 1e-14 {
        if phi != 0.0 {
            return Err(Error::InvalidParams("k' = 1 forces phi = 0".into()));
        }
        let u = C64::new(cfg.u.unwrap_or(DEFAULT_U), 0.0);
        return Ok((make_point_from_chart(&p, u, Branch::Principal)?, make_point_from_chart(&p, u + theta, Branch::Principal)?));
    }
    // sin(phi) = -k sin(u).
    let us = (-C64::new(phi.sin(), 0.0) / p.k).asin();
    let s = nearest(&p, us, C64::new(phi, 0.0))?;
    let miss = (s.chart.unwrap().phi - phi).norm();
    if miss > 1e-8 {
        return Err(Error::BranchFailure(miss));
    }
    let r = nearest(&p, us - theta, s.chart.unwrap().phi)?;
    Ok((r, s))
}

fn pairs(cfg: &RunConfig, rng: &mut ChaCha8Rng) -> Result<Vec<(CurvePoint, CurvePoint)>> {
    if cfg.pinned() {
        return Ok(vec![pinned_pair(cfg)?]);
    }
    Ok(random_points::<2>(cfg, rng)?.into_iter().map(|[r, s]| (r, s)).collect())
}

pub fn lattice_for(cfg: &RunConfig, theta: f64) -> Result<DiamondLattice> {
    let lat = DiamondLattice::new(cfg.rows, cfg.cols, theta)?;
    lat.with_fixed_right_column()
}

fn spectral_angle(r: &CurvePoint, s: &CurvePoint) -> f64 {
    (s.chart.unwrap().u - r.chart.unwrap().u).re
}

fn is_fz(r: &CurvePoint, s: &CurvePoint) -> bool {
    let flat = |p: &CurvePoint| {
        let c = p.chart.unwrap();
        c.phi.norm() < 1e-14 && c.phibar.norm() < 1e-14
    };
    r.params.kprime == 1.0 && flat(r) && flat(s)
}

pub fn run(cfg: &RunConfig) -> Result<Outcome> {
    match cfg.target {
        Target::StarTriangle => star_triangle(cfg),
        Target::Crossing => crossing(cfg),
        Target::Rmatrix => rmatrix(cfg),
        Target::Sufficiency => sufficiency(cfg),
        Target::Dh => dh(cfg),
        Target::Contour => contour(cfg),
        Target::Transfer => transfer(cfg),
        Target::Hamiltonian => chain_hermiticity(cfg),
        Target::Kw => kw(cfg),
        Target::Ising => ising(cfg),
        Target::NearFz => near_fz(cfg),
    }
}

fn star_triangle(cfg: &RunConfig) -> Result<Outcome> {
    let mut out = Outcome::default();
    let tol = cfg.tol_or(1e-9);
    let mut worst: f64 = 0.0;
    for (i, [r, s, t]) in random_points::<3>(cfg, &mut rng(cfg))?.into_iter().enumerate() {
        let rep = check_star_triangle(&r, &s, &t)?;
        worst = worst.max(rep.max_rel_dev);
        out.check(format!("sample {i}"), rep.max_rel_dev, tol);
    }
    out.values.insert("max_rel_dev".into(), worst);
    Ok(out)
}

fn crossing(cfg: &RunConfig) -> Result<Outcome> {
    let mut out = Outcome::default();
    let tol = cfg.tol_or(1e-10);
    for (i, (r, s)) in pairs(cfg, &mut rng(cfg))?.into_iter().enumerate() {
        out.check(format!("pair {i}"), check_crossing(&r, &s)?.max(), tol);
    }
    Ok(out)
}

fn rmatrix(cfg: &RunConfig) -> Result<Outcome> {
    let mut out = Outcome::default();
    let (tf, ti) = (cfg.tol_or(1e-10), cfg.tol_or(1e-9));
    for (i, pts) in random_points::<4>(cfg, &mut rng(cfg))?.into_iter().enumerate() {
        let rm = build_r_with_tol(&pts[0], &pts[1], &pts[2], &pts[3], f64::INFINITY)?;
        out.check(format!("sample {i} factorization"), rm.closed_form_deviation, tf);
        for g in Generator::CHECKED {
            let mut worst: f64 = 0.0;
            for root in [RootChoice::Principal, RootChoice::Negated] {
                worst = worst.max(check_intertwiner(&rm, g, root)?);
            }
            out.check(format!("sample {i} intertwiner {}", g.name()), worst, ti);
        }
    }
    Ok(out)
}

fn sufficiency(cfg: &RunConfig) -> Result<Outcome> {
    let mut out = Outcome::default();
    let tol = cfg.tol_or(1e-9);
    for (i, pts) in random_points::<4>(cfg, &mut rng(cfg))?.into_iter().enumerate() {
        let mut worst = [0.0f64; 4];
        for g in Generator::CHECKED {
            let c = check_sufficiency(&pts[0], &pts[1], &pts[2], &pts[3], g, RootChoice::Principal)?;
            for k in 0..4 {
                worst[k] = worst[k].max(c[k]);
            }
        }
        for (k, w) in worst.iter().enumerate() {
            out.check(format!("sample {i} condition {}", k + 1), *w, tol);
        }
    }
    Ok(out)
}

fn dh(cfg: &RunConfig) -> Result<Outcome> {
    let mut out = Outcome::default();
    let tol = cfg.tol_or(1e-9);
    let mut worst: f64 = 0.0;
    for (i, (r, s)) in pairs(cfg, &mut rng(cfg))?.into_iter().enumerate() {
        let lat = lattice_for(cfg, spectral_angle(&r, &s))?;
        let table = build_weights(&r, &s)?;
        let fz = is_fz(&r, &s);
        let mut plain: f64 = 0.0;
        let mut phases: f64 = 0.0;
        for v in Variant::ALL {
            let mut f = CurrentField::new(&lat, &table, v, Engine::Contract)?;
            let mut w: f64 = 0.0;
            for pl in all_plaquettes(&lat) {
                let res = dh_residual(&mut f, &pl)?;
                w = w.max(res.relative);
                if fz {
                    let st = stencil(&lat, &table, v, &pl)?;
                    phases = st.phases.iter().fold(phases, |a, c| a.max((c - 1.0).norm()));
                    let spin = (1.0 - 1.0 / cfg.n as f64) * if v.is_bar() { 1.0 } else { -1.0 };
                    let mut sum = C64::new(0.0, 0.0);
                    let mut scale: f64 = 0.0;
                    for k in 0..4 {
                        let d = if v.is_bar() { st.dz[k] } else { st.dzbar[k] };
                        let t = d * (-C64::i() * spin * st.alpha[k]).exp() * res.currents[k];
                        sum += t;
                        scale = scale.max(t.norm());
                    }
                    plain = plain.max(sum.norm() / scale);
                }
            }
            worst = worst.max(w);
            out.check(format!("pair {i} {}", v.name()), w, tol);
        }
        if fz {
            out.check(format!("pair {i} unit phases"), phases, 1e-14);
            out.check(format!("pair {i} plain relation"), plain, cfg.tol_or(1e-10));
        }
    }
    out.values.insert("max_relative_residual".into(), worst);
    Ok(out)
}

fn contour(cfg: &RunConfig) -> Result<Outcome> {
    let mut out = Outcome::default();
    let tol = cfg.tol_or(1e-9);
    for (i, (r, s)) in pairs(cfg, &mut rng(cfg))?.into_iter().enumerate() {
        let lat = lattice_for(cfg, spectral_angle(&r, &s))?;
        let table = build_weights(&r, &s)?;
        let region = all_plaquettes(&lat);
        for v in Variant::ALL {
            let mut f = CurrentField::new(&lat, &table, v, Engine::Contract)?;
            let c = dh_contour(&mut f, &region)?;
            out.check(format!("pair {i} {} boundary", v.name()), c.boundary_sum.norm() / c.scale, tol);
            out.check(format!("pair {i} {} interior", v.name()), c.interior_cancellation, tol);
        }
    }
    Ok(out)
}

fn transfer(cfg: &RunConfig) -> Result<Outcome> {
    let mut out = Outcome::default();
    let l = cfg.cols;
    for (i, [s, r1, r2]) in random_points::<3>(cfg, &mut rng(cfg))?.into_iter().enumerate() {
        let a = transfer_matrix(&r1, &s, l)?;
        let b = transfer_matrix(&r2, &s, l)?;
        let ab = &a * &b;
        out.check(format!("sample {i} commutator"), (&ab - &b * &a).norm() / ab.norm(), cfg.tol_or(1e-9));
    }
    let p = ModelParams::new(cfg.n, cfg.kprime.unwrap_or(0.8))?;
    let s = make_point_from_chart(&p, C64::new(cfg.u.unwrap_or(0.3), 0.0), Branch::Principal)?;
    let t = transfer_matrix(&s, &s, l)?;
    let perm = translation_operator(cfg.n, l)?;
    let scale = t.iter().zip(perm.iter()).find(|(_, q)| q.re == 1.0).map(|(v, _)| *v).unwrap_or_default();
    out.check("equal points give the translation", (&t - &perm * scale).norm() / t.norm(), 1e-12);
    let fd = finite_difference_hamiltonian(&s, l, 1e-3, 3)?;
    for (k, r) in fd.halving_ratios.iter().enumerate() {
        out.check(format!("finite difference halving {k}"), (r - 2.0).abs(), 0.2);
        out.values.insert(format!("halving_ratio_{k}"), *r);
    }
    out.check("finite difference deviation", fd.deviations[0], 1e-2);
    let scale_err = (fd.fitted_scale - fd.expected_scale).norm() / fd.expected_scale.norm();
    out.check("finite difference scale", scale_err, 1e-2);
    out.values.insert("fitted_scale_re".into(), fd.fitted_scale.re);
    out.values.insert("expected_scale_re".into(), fd.expected_scale.re);
    Ok(out)
}

fn chain_params(cfg: &RunConfig, rng: &mut ChaCha8Rng) -> Vec<(f64, f64, f64)> {
    let pinned = cfg.phi.is_some() || cfg.kprime.is_some();
    let count = if pinned { 1 } else { cfg.samples };
    (0..count)
        .map(|_| {
            let phi = cfg.phi.unwrap_or_else(|| rng.gen_range(-0.6..0.6));
            let phibar = cfg.phibar.unwrap_or_else(|| if cfg.phi.is_some() { phi } else { rng.gen_range(-0.6..0.6) });
            let kp = cfg.kprime.unwrap_or_else(|| rng.gen_range(0.4..1.6));
            (phi, phibar, kp)
        })
        .collect()
}

fn chain_hermiticity(cfg: &RunConfig) -> Result<Outcome> {
    let mut out = Outcome::default();
    let tol = cfg.tol_or(1e-12);
    let (n, l) = (cfg.n, cfg.cols);
    for (i, (phi, phibar, kp)) in chain_params(cfg, &mut rng(cfg)).into_iter().enumerate() {
        for twist in 0..n as i64 {
            let h = hamiltonian(n, C64::new(phi, 0.0), C64::new(phibar, 0.0), kp, l, twist)?;
            out.check(format!("sample {i} twist {twist}"), check_hermiticity(&h), tol);
            if i == 0 && twist == 0 {
                let e = spectrum_in_sector(&h, n, l, 0)?;
                out.values.insert("ground_energy_sector_0".into(), e[0]);
            }
        }
    }
    Ok(out)
}

fn kw(cfg: &RunConfig) -> Result<Outcome> {
    let mut out = Outcome::default();
    let tol = cfg.tol_or(1e-8);
    for (i, (phi, phibar, kp)) in chain_params(cfg, &mut rng(cfg)).into_iter().enumerate() {
        let rep = check_kw_duality(cfg.n, phi, phibar, kp, cfg.cols)?;
        out.check(format!("sample {i}"), rep.max_deviation, tol);
        if i == 0 {
            out.values.insert("scale".into(), rep.scale);
        }
    }
    Ok(out)
}

fn fmt_p(p: f64) -> String {
    format!("p={p:.3e}")
}

fn ising(cfg: &RunConfig) -> Result<Outcome> {
    let mut out = Outcome::default();
    let ps = match cfg.p {
        Some(p) => vec![p],
        None => vec![1e-5, 3e-5, 1e-4, 3e-4, 1e-3],
    };
    let br = cfg.u.unwrap_or(0.1);
    let bs = br + cfg.theta_or_default() / 2.0;
    let pl = Plaquette::w(0, 1);
    for p in ps {
        let ctx = EllipticContext::from_nome(p)?;
        let theta = ising_theta(&ising_point(&ctx, br)?, &ising_point(&ctx, bs)?);
        let lat = lattice_for(cfg, theta)?;
        if !pl.inside(&lat) {
            return Err(Error::InvalidParams("the Ising suite needs at least 2 rows and 3 columns".into()));
        }
        let rep = ising_dirac_check(&lat, &ctx, br, bs, &pl)?;
        let tag = fmt_p(p);
        let bare = rep.bare_residuals.iter().cloned().fold(0.0, f64::max);
        out.check(format!("{tag} bare relations"), bare, cfg.tol_or(1e-9));
        let ratio = rep.mass_ratio.unwrap_or(f64::NAN);
        out.check(format!("{tag} mass"), (ratio - 1.0).abs(), 1e-3);
        out.check(format!("{tag} coefficient sum"), rep.analytic_sum_error, 1e-12);
        let exact = rep.conjugate_exact.iter().cloned().fold(0.0, f64::max);
        out.check(format!("{tag} e relations"), exact, cfg.tol_or(1e-9));
        let cratio = rep.conjugate_mass_ratio.unwrap_or(f64::NAN);
        out.check(format!("{tag} conjugate mass"), (cratio - 1.0).abs(), 1e-3);
        out.values.insert("mass".into(), rep.mass);
        out.values.insert("mass_over_4p".into(), ratio);
        out.values.insert("conjugate_mass_over_4p".into(), cratio);
    }
    Ok(out)
}

fn near_fz(cfg: &RunConfig) -> Result<Outcome> {
    let mut out = Outcome::default();
    let phi = cfg.phi.unwrap_or(0.07);
    let phibar = cfg.phibar.unwrap_or(0.03);
    let theta = cfg.theta_or_default();
    let lat = lattice_for(cfg, theta)?;
    let pl = Plaquette::w(0, 1);
    if !pl.inside(&lat) {
        return Err(Error::InvalidParams("the near-critical suite needs at least 2 rows and 3 columns".into()));
    }
    let rep = near_fz_expansion_check(&lat, &pl, cfg.n, (phi + phibar) / 2.0, (phi - phibar) / 2.0, NearFzOrder::Second)?;
    let degenerate = rep.remainders.iter().all(|d| *d < 1e-13);
    for (k, r) in rep.halving_ratios.iter().enumerate() {
        out.values.insert(format!("halving_ratio_{k}"), *r);
        if !degenerate {
            out.check(format!("halving ratio {k}"), (r - 8.0).abs(), 2.0);
        }
    }
    for (k, d) in rep.remainders.iter().enumerate() {
        out.values.insert(format!("remainder_{k}"), *d);
    }
    out.check("bracket sums", rep.bracket_sum_error, 1e-12);
    out.check("exact relation", rep.exact_relative, cfg.tol_or(1e-9));
    out.values.insert("kprime".into(), rep.kprime);
    if degenerate {
        out.notes.push("remainder vanishes identically at the critical point; halving ratios not checked".into());
    }
    if let Some(w) = rep.warning {
        out.notes.push(w);
    }
    Ok(out)
}
