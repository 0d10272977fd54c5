//! Points on the spectral curve `x^N + y^N = k (1 + x^N y^N)`, `mu^N (1 - k x^N) = k'`.
//!
//! A point can be built from the angular chart `(u, phi, phibar)` or given
//! directly as a triple `(x, y, mu)`. Every constructor validates both curve
//! residuals against the tolerance carried by [`ModelParams`].

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const I: C64 = C64::new(0.0, 1.0);

/// Model constants shared by every point of a computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub n: usize,
    pub kprime: f64,
    /// `sqrt(1 - k'^2)`, purely imaginary once `k' > 1`.
    pub k: C64,
    pub omega: C64,
    pub q: C64,
    pub tol: f64,
}

impl ModelParams {
    pub fn new(n: usize, kprime: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParams(format!("N must be at least 2, got {n}")));
        }
        if !kprime.is_finite() || kprime < 0.0 {
            return Err(Error::InvalidParams(format!("k' must be finite and non-negative, got {kprime}")));
        }
        let k = C64::new(1.0 - kprime * kprime, 0.0).sqrt();
        let nf = n as f64;
        Ok(ModelParams {
            n,
            kprime,
            k,
            omega: C64::from_polar(1.0, 2.0 * PI / nf),
            q: -C64::from_polar(1.0, PI / nf),
            tol: 1e-10,
        })
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    /// The Fateev-Zamolodchikov curve `k' = 1`.
    pub fn fz(n: usize) -> Result<Self> {
        Self::new(n, 1.0)
    }

    /// `omega^a` evaluated from the reduced exponent, so that equal residues give bitwise equal values.
    pub fn omega_pow(&self, a: i64) -> C64 {
        let n = self.n as i64;
        let r = a.rem_euclid(n);
        C64::from_polar(1.0, 2.0 * PI * r as f64 / n as f64)
    }

    /// Residuals of `k^2 + k'^2 = 1`, `omega^N = 1` and `q^2 = omega`.
    pub fn invariant_residuals(&self) -> [f64; 3] {
        [
            (self.k * self.k + self.kprime * self.kprime - 1.0).norm(),
            (self.omega.powu(self.n as u32) - 1.0).norm(),
            (self.q * self.q - self.omega).norm(),
        ]
    }
}

/// Which arcsin solution is used for `phi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Branch {
    #[default]
    Principal,
    /// `phi -> pi - phi`.
    Reflected,
}

/// The angular chart of a curve point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Chart {
    pub u: C64,
    pub phi: C64,
    pub phibar: C64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub x: C64,
    pub y: C64,
    pub mu: C64,
    pub chart: Option<Chart>,
    pub params: ModelParams,
}

/// Both curve residuals, each normalized as in the point invariants.
pub fn curve_residuals(params: &ModelParams, x: C64, y: C64, mu: C64) -> (f64, f64) {
    let n = params.n as u32;
    let xn = x.powu(n);
    let yn = y.powu(n);
    let mun = mu.powu(n);
    let first = (xn + yn - params.k * (1.0 + xn * yn)).norm() / (1.0 + (xn * yn).norm());
    let second = (mun * (1.0 - params.k * xn) - params.kprime).norm();
    (first, second)
}

fn chart_coordinates(n: usize, chart: &Chart) -> (C64, C64, C64) {
    let nf = n as f64;
    let x = (I * (chart.u + chart.phi) / nf).exp();
    let y = (I * (chart.u - chart.phi + PI) / nf).exp();
    let mu = (I * (chart.phibar - chart.phi) / nf).exp();
    (x, y, mu)
}

/// Build a point from the chart parameter `u`.
///
/// `phi` solves `sin phi = -k sin u` on the requested branch and `phibar`
/// solves `sin phibar = -(i k / k') cos u`, with the arcsin solution chosen
/// so that `k' cos phibar = cos phi`.
pub fn make_point_from_chart(params: &ModelParams, u: C64, branch: Branch) -> Result<CurvePoint> {
    if params.kprime == 0.0 {
        return Err(Error::InvalidParams("k' = 0 makes the phibar relation singular".into()));
    }
    let k = params.k;
    let kp = params.kprime;
    let mut phi = (-k * u.sin()).asin();
    if branch == Branch::Reflected {
        phi = PI - phi;
    }
    let s = -(I * k / kp) * u.cos();
    let p0 = s.asin();
    let cos_phi = phi.cos();
    let mismatch = |pb: C64| (kp * pb.cos() - cos_phi).norm();
    let (phibar, best) = [p0, PI - p0]
        .into_iter()
        .map(|pb| (pb, mismatch(pb)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("two candidates");
    if best > params.tol * (1.0 + cos_phi.norm()) {
        return Err(Error::BranchFailure(best));
    }
    let chart = Chart { u, phi, phibar };
    let (x, y, mu) = chart_coordinates(params.n, &chart);
    let point = CurvePoint { x, y, mu, chart: Some(chart), params: *params };
    point.validate()?;
    Ok(point)
}

/// Build a point from explicit coordinates after checking both curve residuals.
pub fn make_point_xyz(params: &ModelParams, x: C64, y: C64, mu: C64) -> Result<CurvePoint> {
    let point = CurvePoint { x, y, mu, chart: None, params: *params };
    point.validate()?;
    Ok(point)
}

/// `(x, y, mu)* = (omega^-1 y, x, 1/mu)`. The chart, when present, maps to `(u - pi, -phi, -phibar)`.
pub fn crossing_conjugate(r: &CurvePoint) -> Result<CurvePoint> {
    if r.mu == C64::new(0.0, 0.0) {
        return Err(Error::DivisionByZero("crossing conjugate (mu = 0)"));
    }
    let p = r.params;
    let chart = r.chart.map(|c| Chart { u: c.u - PI, phi: -c.phi, phibar: -c.phibar });
    let point = CurvePoint { x: p.omega_pow(-1) * r.y, y: r.x, mu: 1.0 / r.mu, chart, params: p };
    point.validate()?;
    Ok(point)
}

impl CurvePoint {
    /// A point that skips validation. Used for negative controls off the curve.
    pub fn unchecked(params: &ModelParams, x: C64, y: C64, mu: C64, chart: Option<Chart>) -> Self {
        CurvePoint { x, y, mu, chart, params: *params }
    }

    pub fn n(&self) -> usize {
        self.params.n
    }

    pub fn residuals(&self) -> (f64, f64) {
        curve_residuals(&self.params, self.x, self.y, self.mu)
    }

    /// Residuals of the chart: coordinate mismatch, `sin phi + k sin u` and `k' cos phibar - cos phi`.
    pub fn chart_residuals(&self) -> Option<[f64; 3]> {
        let c = self.chart?;
        let (x, y, mu) = chart_coordinates(self.params.n, &c);
        let coord = (x - self.x).norm().max((y - self.y).norm()).max((mu - self.mu).norm());
        let s = (c.phi.sin() + self.params.k * c.u.sin()).norm();
        let t = (self.params.kprime * c.phibar.cos() - c.phi.cos()).norm();
        Some([coord, s, t])
    }

    pub fn validate(&self) -> Result<()> {
        let tol = self.params.tol;
        let (first, second) = self.residuals();
        if !(first <= tol && second <= tol) {
            return Err(Error::CurveViolation { first, second });
        }
        if let Some(res) = self.chart_residuals() {
            let worst = res.iter().cloned().fold(0.0, f64::max);
            if !(worst <= tol * 10.0) {
                return Err(Error::Domain(format!("chart inconsistent with coordinates ({worst:.3e})")));
            }
        }
        Ok(())
    }

    /// Recover a chart from the coordinates with principal logarithms.
    ///
    /// The result reproduces `(x, y, mu)` exactly but `u` and `phi` are only fixed modulo `2 pi`.
    pub fn inferred_chart(&self) -> Chart {
        let nf = self.params.n as f64;
        let a = -I * nf * self.x.ln();
        let b = -I * nf * self.y.ln() - PI;
        let u = (a + b) / 2.0;
        let phi = (a - b) / 2.0;
        let phibar = phi - I * nf * self.mu.ln();
        Chart { u, phi, phibar }
    }

    /// The same point with the chart replaced by the one recovered from the coordinates.
    pub fn with_inferred_chart(&self) -> Self {
        CurvePoint { chart: Some(self.inferred_chart()), ..*self }
    }
}

/// Rectangle of the complex `u` plane used for random sampling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleBox {
    pub re: (f64, f64),
    pub im: (f64, f64),
}

impl Default for SampleBox {
    fn default() -> Self {
        SampleBox { re: (-1.0, 1.0), im: (-0.5, 0.5) }
    }
}

impl SampleBox {
    pub fn real(lo: f64, hi: f64) -> Self {
        SampleBox { re: (lo, hi), im: (0.0, 0.0) }
    }

    pub fn draw<R: Rng>(&self, rng: &mut R) -> C64 {
        let re = draw_interval(rng, self.re);
        let im = draw_interval(rng, self.im);
        C64::new(re, im)
    }
}

fn draw_interval<R: Rng>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.gen_range(lo..hi)
    } else {
        lo
    }
}

/// Draw `u` from the box and project onto the curve on the principal branch.
///
/// Draws that land on a branch failure are retried; after 64 failures the last error is returned.
pub fn sample_point<R: Rng>(params: &ModelParams, rng: &mut R, bx: &SampleBox) -> Result<CurvePoint> {
    let mut last = Error::BranchFailure(f64::NAN);
    for _ in 0..64 {
        match make_point_from_chart(params, bx.draw(rng), Branch::Principal) {
            Ok(p) => return Ok(p),
            Err(e) => last = e,
        }
    }
    Err(last)
}
