//! Quasi-local currents, their dressed parafermions and the twisted discrete
//! Cauchy-Riemann relations on `W` and `Wbar` plaquettes.
//!
//! A current at mid-edge `(sigma, mu)` is `X^{+-1}` at `sigma` together with a
//! disorder tail from the anchor cell `(-1, -1)` to `mu`. The tail runs up the
//! exterior column and then right along the row of `mu`.
//!
//! Plaquette labels: for the `W` edge `(i,j)-(i+1,j)` the mid-edges are
//! `r1 = ((i,j), (i,j))`, `r2 = ((i,j), (i,j-1))`, `r3 = ((i+1,j), (i,j-1))`,
//! `r4 = ((i+1,j), (i,j))`; for the `Wbar` edge `(i,j)-(i,j+1)` they are
//! `r1 = ((i,j+1), (i-1,j))`, `r2 = ((i,j), (i-1,j))`, `r3 = ((i,j), (i,j))`,
//! `r4 = ((i,j+1), (i,j))`. `dz_k` is the rhombus side through `r_k`, oriented
//! counter-clockwise.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::curve::{make_point_from_chart, Branch, CurvePoint, ModelParams, C64, I};
use crate::elliptic::{ising_point, ising_theta, scaled_thetas, EllipticContext};
use crate::error::{Error, Result};
use crate::lattice::{
    Cell, DiamondLattice, EdgeId, Engine, Evaluator, InsertionSet, MidEdge, Site, TailPath,
};
use crate::weights::{build_weights, DisorderFactor, Variant, WeightTable};

/// Where a cell sits relative to a spin site.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Corner {
    NE,
    NW,
    SW,
    SE,
}

pub fn corner(m: MidEdge) -> Result<Corner> {
    let (i, j) = (m.site.i as i64, m.site.j as i64);
    match (m.cell.ci - i, m.cell.cj - j) {
        (0, 0) => Ok(Corner::NE),
        (-1, 0) => Ok(Corner::NW),
        (-1, -1) => Ok(Corner::SW),
        (0, -1) => Ok(Corner::SE),
        _ => Err(Error::Lattice(format!("{m:?} is not a mid-edge"))),
    }
}

/// `alpha = arg(z_sigma - z_mu)` as an analytic function of the embedding angle.
pub fn alpha_of(c: Corner, theta: C64) -> C64 {
    match c {
        Corner::NE => theta / 2.0 - PI,
        Corner::NW => -theta / 2.0,
        Corner::SW => theta / 2.0,
        Corner::SE => PI - theta / 2.0,
    }
}

/// The multiple of `pi` in `alpha`.
fn pi_multiple(c: Corner) -> i64 {
    match c {
        Corner::NE => -1,
        Corner::SE => 1,
        Corner::NW | Corner::SW => 0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TailOrdering {
    Above,
    Below,
}

/// The tail sits locally above `r_sigma` iff `Im z_mu <= Im z_sigma`.
pub fn tail_ordering(lat: &DiamondLattice, m: MidEdge) -> TailOrdering {
    let zs = lat.spin_z(m.site.i as i64, m.site.j as i64);
    if lat.dual_z(m.cell).im <= zs.im {
        TailOrdering::Above
    } else {
        TailOrdering::Below
    }
}

/// A current dressed by `exp(-i spin alpha)`, with `spin = 1 - 1/N` for `ebar` currents and `-(1 - 1/N)` for `e` currents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DressedCurrent {
    pub variant: Variant,
    pub spin: f64,
}

impl DressedCurrent {
    pub fn new(variant: Variant, n: usize) -> Self {
        let s = 1.0 - 1.0 / n as f64;
        DressedCurrent { variant, spin: if variant.is_bar() { s } else { -s } }
    }

    pub fn dressing(&self, alpha: C64) -> C64 {
        (-I * self.spin * alpha).exp()
    }

    /// `X^{+-1}` at the spin site and the straight tail to the cell.
    pub fn insertion(&self, lat: &DiamondLattice, factor: &DisorderFactor, m: MidEdge) -> Result<InsertionSet> {
        if !lat.is_midedge(m) {
            return Err(Error::Lattice(format!("{m:?} is not a mid-edge of the lattice")));
        }
        InsertionSet::new().with_x(m.site, self.variant.x_power()).with_tail(lat, &TailPath::straight(m.cell), factor)
    }
}

/// Current expectations on one lattice, cached per mid-edge.
pub struct CurrentField<'a> {
    pub ev: Evaluator<'a>,
    pub current: DressedCurrent,
    pub factor: DisorderFactor,
    cache: HashMap<MidEdge, C64>,
}

impl<'a> CurrentField<'a> {
    pub fn new(lat: &'a DiamondLattice, table: &'a WeightTable, variant: Variant, engine: Engine) -> Result<Self> {
        let factor = DisorderFactor::new(table, variant);
        Self::with_factor(lat, table, variant, factor, engine)
    }

    /// Tails that only shift spin differences, with unit factors.
    pub fn bare(lat: &'a DiamondLattice, table: &'a WeightTable, variant: Variant, engine: Engine) -> Result<Self> {
        Self::with_factor(lat, table, variant, DisorderFactor::bare(variant), engine)
    }

    fn with_factor(
        lat: &'a DiamondLattice,
        table: &'a WeightTable,
        variant: Variant,
        factor: DisorderFactor,
        engine: Engine,
    ) -> Result<Self> {
        Ok(CurrentField {
            ev: Evaluator::new(lat, table, engine)?,
            current: DressedCurrent::new(variant, table.n()),
            factor,
            cache: HashMap::new(),
        })
    }

    pub fn variant(&self) -> Variant {
        self.current.variant
    }

    pub fn get(&mut self, m: MidEdge) -> Result<C64> {
        if let Some(v) = self.cache.get(&m) {
            return Ok(*v);
        }
        let ins = self.current.insertion(self.ev.lat, &self.factor, m)?;
        let v = self.ev.expectation(&ins)?;
        self.cache.insert(m, v);
        Ok(v)
    }
}

/// `<j_variant(r)>` normalized by the partition function.
pub fn current_expectation(lat: &DiamondLattice, table: &WeightTable, variant: Variant, m: MidEdge) -> Result<C64> {
    CurrentField::new(lat, table, variant, Engine::Contract)?.get(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PlaquetteKind {
    W,
    Wbar,
}

/// The rhombus around one edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Plaquette {
    pub kind: PlaquetteKind,
    pub i: usize,
    pub j: usize,
}

impl Plaquette {
    pub fn w(i: usize, j: usize) -> Self {
        Plaquette { kind: PlaquetteKind::W, i, j }
    }

    pub fn wbar(i: usize, j: usize) -> Self {
        Plaquette { kind: PlaquetteKind::Wbar, i, j }
    }

    pub fn edge(&self) -> EdgeId {
        match self.kind {
            PlaquetteKind::W => EdgeId::W { i: self.i, j: self.j },
            PlaquetteKind::Wbar => EdgeId::Wbar { i: self.i, j: self.j },
        }
    }

    pub fn inside(&self, lat: &DiamondLattice) -> bool {
        match self.kind {
            PlaquetteKind::W => self.i + 1 < lat.cols && self.j < lat.rows,
            PlaquetteKind::Wbar => self.i < lat.cols && self.j + 1 < lat.rows,
        }
    }

    pub fn midedges(&self) -> [MidEdge; 4] {
        let (i, j) = (self.i, self.j);
        let (ci, cj) = (i as i64, j as i64);
        let me = |si: usize, sj: usize, a: i64, b: i64| MidEdge { site: Site { i: si, j: sj }, cell: Cell::new(a, b) };
        match self.kind {
            PlaquetteKind::W => [me(i, j, ci, cj), me(i, j, ci, cj - 1), me(i + 1, j, ci, cj - 1), me(i + 1, j, ci, cj)],
            PlaquetteKind::Wbar => {
                [me(i, j + 1, ci - 1, cj), me(i, j, ci - 1, cj), me(i, j, ci, cj), me(i, j + 1, ci, cj)]
            }
        }
    }

    /// Counter-clockwise orientation signs of the four sides relative to `e^{i alpha_k}`.
    pub fn orientation(&self) -> [f64; 4] {
        match self.kind {
            PlaquetteKind::W => [1.0, -1.0, 1.0, -1.0],
            PlaquetteKind::Wbar => [-1.0, 1.0, -1.0, 1.0],
        }
    }
}

/// Sign of the `phi` pattern `(phi_r, phi_s, -phi_r, -phi_s)` for each current and plaquette type.
pub fn phase_flip(variant: Variant, kind: PlaquetteKind) -> f64 {
    let base = match variant {
        Variant::EBar0 | Variant::E1 => 1.0,
        Variant::EBar1 | Variant::E0 => -1.0,
    };
    match kind {
        PlaquetteKind::W => base,
        PlaquetteKind::Wbar => -base,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CoefficientForm {
    /// Phases `e^{+-i phi/N}` times `dz` (or `dzbar`) times the dressing, from the `(u, phi)` charts.
    Chart,
    /// The same relation rescaled by `e^{-+i (u_r + u_s)/(2N)}` and written in `x`, `y` only.
    Coordinates,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaquetteStencil {
    pub plaquette: Plaquette,
    pub variant: Variant,
    pub midedges: [MidEdge; 4],
    pub alpha: [C64; 4],
    pub dz: [C64; 4],
    pub dzbar: [C64; 4],
    /// `e^{i flip (phi_r, phi_s, -phi_r, -phi_s)/N}`; all ones in coordinate form.
    pub phases: [C64; 4],
    /// The four numbers multiplying the bare current expectations.
    pub coefficients: [C64; 4],
    pub form: CoefficientForm,
}

fn embedding_angle(r: &CurvePoint, s: &CurvePoint) -> Option<C64> {
    Some(s.chart?.u - r.chart?.u)
}

/// Coefficients in `x`, `y` only: `eps_k e^{i l b_k pi/N}` times `x_p^{-l}` or `(y_p e^{-i pi/N})^{-l}`,
/// with `l = +1` for `ebar` currents and `-1` for `e` currents and `p = r` on `r1, r3`, `s` on `r2, r4`.
pub fn coordinate_coefficients(r: &CurvePoint, s: &CurvePoint, variant: Variant, plaq: &Plaquette) -> Result<[C64; 4]> {
    let n = r.n() as f64;
    let lam: i32 = if variant.is_bar() { 1 } else { -1 };
    let flip = phase_flip(variant, plaq.kind);
    let pattern = [1.0, 1.0, -1.0, -1.0];
    let eps = plaq.orientation();
    let ms = plaq.midedges();
    let mut out = [C64::new(0.0, 0.0); 4];
    for k in 0..4 {
        let p = if k % 2 == 0 { r } else { s };
        let sigma = flip * pattern[k];
        let c = corner(ms[k])?;
        let val = if sigma == -(lam as f64) {
            p.x.powi(-lam)
        } else {
            (p.y * (-I * PI / n).exp()).powi(-lam)
        };
        out[k] = eps[k] * (I * lam as f64 * pi_multiple(c) as f64 * PI / n).exp() * val;
    }
    Ok(out)
}

pub fn stencil(lat: &DiamondLattice, table: &WeightTable, variant: Variant, plaq: &Plaquette) -> Result<PlaquetteStencil> {
    if !plaq.inside(lat) {
        return Err(Error::Lattice(format!("{plaq:?} lies outside the lattice")));
    }
    let n = table.n();
    let ms = plaq.midedges();
    let eps = plaq.orientation();
    let current = DressedCurrent::new(variant, n);
    let (theta, form) = match embedding_angle(&table.r, &table.s) {
        Some(t) => (t, CoefficientForm::Chart),
        None => (C64::new(lat.theta, 0.0), CoefficientForm::Coordinates),
    };
    let mut alpha = [C64::new(0.0, 0.0); 4];
    let mut dz = alpha;
    let mut dzbar = alpha;
    for k in 0..4 {
        alpha[k] = alpha_of(corner(ms[k])?, theta);
        dz[k] = eps[k] * (I * alpha[k]).exp();
        dzbar[k] = eps[k] * (-I * alpha[k]).exp();
    }
    let (phases, coefficients) = match form {
        CoefficientForm::Chart => {
            let (pr, ps) = (table.r.chart.unwrap().phi, table.s.chart.unwrap().phi);
            let flip = phase_flip(variant, plaq.kind);
            let pat = [pr, ps, -pr, -ps];
            let mut ph = [C64::new(0.0, 0.0); 4];
            let mut co = ph;
            for k in 0..4 {
                ph[k] = (I * flip * pat[k] / n as f64).exp();
                let d = if variant.is_bar() { dz[k] } else { dzbar[k] };
                co[k] = ph[k] * d * current.dressing(alpha[k]);
            }
            (ph, co)
        }
        CoefficientForm::Coordinates => {
            ([C64::new(1.0, 0.0); 4], coordinate_coefficients(&table.r, &table.s, variant, plaq)?)
        }
    };
    Ok(PlaquetteStencil { plaquette: *plaq, variant, midedges: ms, alpha, dz, dzbar, phases, coefficients, form })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DhResidual {
    pub value: C64,
    /// `max_k |c_k j_k|`.
    pub scale: f64,
    pub relative: f64,
    pub currents: [C64; 4],
    pub coefficients: [C64; 4],
}

fn weighted_sum(coef: &[C64; 4], j: &[C64; 4]) -> (C64, f64) {
    let mut v = C64::new(0.0, 0.0);
    let mut scale: f64 = 0.0;
    for k in 0..4 {
        let t = coef[k] * j[k];
        v += t;
        scale = scale.max(t.norm());
    }
    (v, scale)
}

/// The four-term twisted Cauchy-Riemann sum on one plaquette.
pub fn dh_residual(field: &mut CurrentField<'_>, plaq: &Plaquette) -> Result<DhResidual> {
    let st = stencil(field.ev.lat, field.ev.table, field.variant(), plaq)?;
    let mut j = [C64::new(0.0, 0.0); 4];
    for k in 0..4 {
        j[k] = field.get(st.midedges[k])?;
    }
    let (value, scale) = weighted_sum(&st.coefficients, &j);
    Ok(DhResidual { value, scale, relative: value.norm() / scale.max(f64::MIN_POSITIVE), currents: j, coefficients: st.coefficients })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourReport {
    pub plaquettes: usize,
    pub boundary_midedges: usize,
    pub interior_midedges: usize,
    /// Sum over boundary mid-edges only.
    pub boundary_sum: C64,
    /// Sum of the individual plaquette residuals.
    pub plaquette_sum: C64,
    /// Largest `|c_a + c_b|` over interior mid-edges, relative to the largest coefficient.
    pub interior_cancellation: f64,
    /// Largest `|c_k j_k|` over the region.
    pub scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Vertex {
    Spin(Site),
    Dual(Cell),
}

/// `V - E + F` of the union of rhombi, and whether the rhombi are connected through shared sides.
fn region_topology(region: &[Plaquette]) -> (i64, bool) {
    let mut verts = BTreeSet::new();
    let mut sides: BTreeMap<MidEdge, Vec<usize>> = BTreeMap::new();
    for (idx, p) in region.iter().enumerate() {
        for m in p.midedges() {
            verts.insert(Vertex::Spin(m.site));
            verts.insert(Vertex::Dual(m.cell));
            sides.entry(m).or_default().push(idx);
        }
    }
    let chi = verts.len() as i64 - sides.len() as i64 + region.len() as i64;
    let mut seen = vec![false; region.len()];
    let mut stack = vec![0usize];
    seen[0] = true;
    while let Some(a) = stack.pop() {
        for m in region[a].midedges() {
            for &b in &sides[&m] {
                if !seen[b] {
                    seen[b] = true;
                    stack.push(b);
                }
            }
        }
    }
    (chi, seen.iter().all(|s| *s))
}

/// Assemble the relation over a region: interior mid-edge coefficients cancel, leaving a boundary sum.
pub fn dh_contour(field: &mut CurrentField<'_>, region: &[Plaquette]) -> Result<ContourReport> {
    if region.is_empty() {
        return Err(Error::Domain("empty region".into()));
    }
    let distinct: BTreeSet<_> = region.iter().collect();
    if distinct.len() != region.len() {
        return Err(Error::Domain("region lists a plaquette twice".into()));
    }
    let (chi, connected) = region_topology(region);
    if !connected || chi != 1 {
        return Err(Error::Domain(format!("region is not simply connected (Euler characteristic {chi})")));
    }
    let mut totals: BTreeMap<MidEdge, (C64, usize, f64)> = BTreeMap::new();
    let mut plaquette_sum = C64::new(0.0, 0.0);
    let mut scale: f64 = 0.0;
    let mut coef_scale: f64 = 0.0;
    for p in region {
        let res = dh_residual(field, p)?;
        plaquette_sum += res.value;
        scale = scale.max(res.scale);
        for (k, m) in p.midedges().into_iter().enumerate() {
            let c = res.coefficients[k];
            coef_scale = coef_scale.max(c.norm());
            let e = totals.entry(m).or_insert((C64::new(0.0, 0.0), 0, 0.0));
            e.0 += c;
            e.1 += 1;
        }
    }
    let mut boundary_sum = C64::new(0.0, 0.0);
    let mut cancellation: f64 = 0.0;
    let (mut nb, mut ni) = (0, 0);
    for (m, (c, count, _)) in &totals {
        if *count == 1 {
            boundary_sum += c * field.get(*m)?;
            nb += 1;
        } else {
            cancellation = cancellation.max(c.norm() / coef_scale);
            ni += 1;
        }
    }
    Ok(ContourReport {
        plaquettes: region.len(),
        boundary_midedges: nb,
        interior_midedges: ni,
        boundary_sum,
        plaquette_sum,
        interior_cancellation: cancellation,
        scale,
    })
}

/// Every plaquette of the given kinds lying entirely inside the lattice.
pub fn all_plaquettes(lat: &DiamondLattice) -> Vec<Plaquette> {
    let mut out = Vec::new();
    for j in 0..lat.rows {
        for i in 0..lat.cols {
            for p in [Plaquette::w(i, j), Plaquette::wbar(i, j)] {
                if p.inside(lat) {
                    out.push(p);
                }
            }
        }
    }
    out
}

/// Truncation of the near-critical expansion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum NearFzOrder {
    First,
    /// Second order with the quadratic coefficient `1/2` of the exponential series.
    #[default]
    Second,
    /// Second order with a unit quadratic coefficient.
    SecondUnitCoefficient,
}

impl NearFzOrder {
    fn quadratic(self) -> f64 {
        match self {
            NearFzOrder::First => 0.0,
            NearFzOrder::Second => 0.5,
            NearFzOrder::SecondUnitCoefficient => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NearFzReport {
    pub n: usize,
    pub theta: f64,
    pub phi_plus: f64,
    pub phi_minus: f64,
    pub kprime: f64,
    /// `|D| / scale` at `phi`, `phi/2`, `phi/4`.
    pub remainders: [f64; 3],
    /// `D(phi)/D(phi/2)` and `D(phi/2)/D(phi/4)`.
    pub halving_ratios: [f64; 2],
    /// The same ratios with a unit quadratic coefficient.
    pub unit_coefficient_ratios: [f64; 2],
    /// The exact twisted relation at the first point, relative to its scale.
    pub exact_relative: f64,
    /// Sums of the `t`-weighted brackets, each `4 sin(theta)`.
    pub bracket_sums: [C64; 2],
    pub bracket_sum_error: f64,
    pub warning: Option<String>,
}

/// Points `(r, s)` with `phi_s = phi+ + phi-`, `phibar_s = phi+ - phi-`, `k' = cos(phi_s) / cos(phibar_s)` and `u_s - u_r = theta`.
pub fn near_fz_points(n: usize, theta: f64, phi_plus: f64, phi_minus: f64) -> Result<(CurvePoint, CurvePoint)> {
    let phi = phi_plus + phi_minus;
    let phibar = phi_plus - phi_minus;
    let kprime = phi.cos() / phibar.cos();
    let params = ModelParams::new(n, kprime)?;
    if phi_plus == 0.0 && phi_minus == 0.0 {
        let s = make_point_from_chart(&params, C64::new(theta, 0.0), Branch::Principal)?;
        let r = make_point_from_chart(&params, C64::new(0.0, 0.0), Branch::Principal)?;
        return Ok((r, s));
    }
    let k = params.k;
    if k.norm() < 1e-14 {
        return Err(Error::Domain("phi+ phi- = 0 with one of them nonzero has no finite chart".into()));
    }
    let sin_u = -C64::new(phi.sin(), 0.0) / k;
    let cos_u = I * kprime / k * phibar.sin();
    let u = -I * (cos_u + I * sin_u).ln();
    let target = |p: &CurvePoint| {
        let c = p.chart.unwrap();
        (c.phi - phi).norm() + (c.phibar - phibar).norm()
    };
    let s = [Branch::Principal, Branch::Reflected]
        .into_iter()
        .filter_map(|b| make_point_from_chart(&params, u, b).ok())
        .min_by(|a, b| target(a).total_cmp(&target(b)))
        .ok_or(Error::BranchFailure(f64::NAN))?;
    if target(&s) > 1e-8 {
        return Err(Error::BranchFailure(target(&s)));
    }
    let sc = s.chart.unwrap();
    let r = [Branch::Principal, Branch::Reflected]
        .into_iter()
        .filter_map(|b| make_point_from_chart(&params, u - theta, b).ok())
        .min_by(|a, b| {
            let d = |p: &CurvePoint| (p.chart.unwrap().phi - sc.phi).norm();
            d(a).total_cmp(&d(b))
        })
        .ok_or(Error::BranchFailure(f64::NAN))?;
    Ok((r, s))
}

fn near_fz_remainder(
    lat: &DiamondLattice,
    plaq: &Plaquette,
    n: usize,
    phi_plus: f64,
    phi_minus: f64,
    quadratic: &[f64],
) -> Result<(Vec<f64>, f64)> {
    let theta = lat.theta;
    let (r, s) = near_fz_points(n, theta, phi_plus, phi_minus)?;
    let table = build_weights(&r, &s)?;
    let mut field = CurrentField::new(lat, &table, Variant::EBar0, Engine::Contract)?;
    let exact = dh_residual(&mut field, plaq)?;
    let ms = plaq.midedges();
    let eps = plaq.orientation();
    let th = C64::new(theta, 0.0);
    let sp = 1.0 - 1.0 / n as f64;
    let mut alpha = [C64::new(0.0, 0.0); 4];
    let mut j = [C64::new(0.0, 0.0); 4];
    for k in 0..4 {
        alpha[k] = alpha_of(corner(ms[k])?, th);
        j[k] = field.get(ms[k])?;
    }
    let o = |spin: f64, k: usize| (-I * spin * alpha[k]).exp() * j[k];
    let t = -I * (I * theta).exp();
    let a = [t, 1.0 / t, t, 1.0 / t];
    let b = [1.0 / t, t, 1.0 / t, t];
    let ap = (I * theta / 2.0).exp() * phi_plus / n as f64;
    let am = (-I * theta / 2.0).exp() * phi_minus / n as f64;
    let mut lhs = C64::new(0.0, 0.0);
    let mut scale: f64 = 0.0;
    for k in 0..4 {
        let d = eps[k] * (I * alpha[k]).exp() * o(sp, k);
        lhs += d;
        scale = scale.max(d.norm());
    }
    let mut out = Vec::new();
    for &c2 in quadratic {
        let mut rhs = C64::new(0.0, 0.0);
        for k in 0..4 {
            rhs += -ap * a[k] * o(sp, k) + am * b[k] * o(sp - 2.0, k) + c2 * I * ap * ap * a[k] * o(sp - 1.0, k)
                - c2 * I * am * am * b[k] * o(sp - 1.0, k);
        }
        out.push((lhs - rhs).norm() / scale);
    }
    Ok((out, exact.relative))
}

/// Third-order scaling of the near-critical expansion of the `ebar0` relation on a `W` plaquette.
pub fn near_fz_expansion_check(
    lat: &DiamondLattice,
    plaq: &Plaquette,
    n: usize,
    phi_plus: f64,
    phi_minus: f64,
    order: NearFzOrder,
) -> Result<NearFzReport> {
    if plaq.kind != PlaquetteKind::W {
        return Err(Error::Domain("the expansion is written for W plaquettes".into()));
    }
    let theta = lat.theta;
    if !(theta > 0.0 && theta < PI) {
        return Err(Error::Domain(format!("theta = {theta} outside (0, pi)")));
    }
    let coeffs = [order.quadratic(), NearFzOrder::SecondUnitCoefficient.quadratic()];
    let mut rem = [0.0; 3];
    let mut unit = [0.0; 3];
    let mut exact_relative = 0.0;
    for (lvl, f) in [1.0, 0.5, 0.25].into_iter().enumerate() {
        let (d, ex) = near_fz_remainder(lat, plaq, n, phi_plus * f, phi_minus * f, &coeffs)?;
        rem[lvl] = d[0];
        unit[lvl] = d[1];
        if lvl == 0 {
            exact_relative = ex;
        }
    }
    let t = -I * (I * theta).exp();
    let sums = [t + 1.0 / t + t + 1.0 / t, 1.0 / t + t + 1.0 / t + t];
    let target = 4.0 * theta.sin();
    let err = sums.iter().map(|s| (s - target).norm()).fold(0.0, f64::max);
    let warning = if phi_plus.abs().max(phi_minus.abs()) > 0.1 {
        Some("phi+- above 0.1: outside the asymptotic regime".to_string())
    } else {
        None
    };
    Ok(NearFzReport {
        n,
        theta,
        phi_plus,
        phi_minus,
        kprime: ((phi_plus + phi_minus).cos() / (phi_plus - phi_minus).cos()),
        remainders: rem,
        halving_ratios: [rem[0] / rem[1], rem[1] / rem[2]],
        unit_coefficient_ratios: [unit[0] / unit[1], unit[1] / unit[2]],
        exact_relative,
        bracket_sums: sums,
        bracket_sum_error: err,
        warning,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsingReport {
    pub p: f64,
    pub theta: f64,
    /// Relative residuals of the two bare theta-function relations.
    pub bare_residuals: [f64; 2],
    /// `max_k |a_k/A - v_k|`, which vanishes at order `p^(1/2)` and is `O(p)`.
    pub half_order_residual: f64,
    /// Coefficients of `psibar` in the relation `sum dz psi + sum c psibar = 0`.
    pub psibar_coefficients: [C64; 4],
    /// `-sum_k c_k`, the right-hand side coefficient sum.
    pub rhs_sum: C64,
    /// `rhs_sum / (-i sin theta)`.
    pub mass: f64,
    /// `mass / 4p`; `None` at `p = 0`.
    pub mass_ratio: Option<f64>,
    /// `-i p (t^-1 + t + t^-1 + t)` against `-4 i p sin(theta)`.
    pub analytic_sum_error: f64,
    /// `t = -i e^{i theta}`.
    pub t: C64,
    /// Exact relations of the `e0` and `e1` currents on the same plaquette.
    pub conjugate_exact: [f64; 2],
    /// Least-squares residual of `dzbar psibar` in the span of the two `e` relations.
    pub conjugate_fit_residual: f64,
    /// Mass read off the conjugate relation `dbar psibar = i m psi`.
    pub conjugate_mass: f64,
    pub conjugate_mass_ratio: Option<f64>,
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Solve the 2x2 least-squares problem `min |c0 u + c1 v - w|`.
fn project2(u: &[C64; 4], v: &[C64; 4], w: &[C64; 4]) -> Result<[C64; 4]> {
    let (uu, uv, vv) = (dot(u, u), dot(u, v), dot(v, v));
    let (uw, vw) = (dot(u, w), dot(v, w));
    let det = uu * vv - uv * uv.conj();
    if uu.re < 1e-300 {
        return Err(Error::Domain("degenerate conjugate relations".into()));
    }
    let mut out = [C64::new(0.0, 0.0); 4];
    // Parallel relations (the massless point): project on one of them.
    if det.norm() <= 1e-24 * uu.re * vv.re {
        for k in 0..4 {
            out[k] = uw / uu * u[k];
        }
        return Ok(out);
    }
    let c0 = (vv * uw - uv * vw) / det;
    let c1 = (uu * vw - uv.conj() * uw) / det;
    for k in 0..4 {
        out[k] = c0 * u[k] + c1 * v[k];
    }
    Ok(out)
}

/// Massive Dirac relations of the `N = 2` model on a `W` plaquette.
///
/// The bare currents `J` (tails with unit factors) satisfy two exact relations
/// with theta-function coefficients. Their combination `(1) - i (2)` is written
/// as `sum dz psi + sum c psibar = 0` with `psi = e^{-i alpha/2} J`; the sum of
/// the `c` gives the mass. The conjugate relation comes from the `e0` and `e1`
/// currents rewritten in terms of `J`.
pub fn ising_dirac_check(
    lat: &DiamondLattice,
    ctx: &EllipticContext,
    beta_r: f64,
    beta_s: f64,
    plaq: &Plaquette,
) -> Result<IsingReport> {
    if plaq.kind != PlaquetteKind::W {
        return Err(Error::Domain("the Dirac relations are written for W plaquettes".into()));
    }
    let r = ising_point(ctx, beta_r)?;
    let s = ising_point(ctx, beta_s)?;
    let theta = ising_theta(&r, &s);
    if (lat.theta - theta).abs() > 1e-9 {
        return Err(Error::Domain(format!("lattice angle {} differs from theta_k = {theta}", lat.theta)));
    }
    let table = build_weights(&r.point, &s.point)?;
    let ms = plaq.midedges();
    let eps = plaq.orientation();
    let mut bare = CurrentField::bare(lat, &table, Variant::EBar0, Engine::Contract)?;
    let mut j = [C64::new(0.0, 0.0); 4];
    for k in 0..4 {
        j[k] = bare.get(ms[k])?;
    }
    let [hr, h1r, thr, th1r] = scaled_thetas(beta_r, ctx.p)?;
    let [hs, h1s, ths, th1s] = scaled_thetas(beta_s, ctx.p)?;
    let c1 = [th1r * hs, th1s * hr, thr * h1s, -ths * h1r];
    let c2 = [thr * h1s, ths * h1r, -th1r * hs, th1s * hr];
    let rel = |c: &[C64; 4]| {
        let (v, sc) = weighted_sum(c, &j);
        v.norm() / sc
    };
    let bare_residuals = [rel(&c1), rel(&c2)];

    let th = C64::new(theta, 0.0);
    let alpha: Vec<C64> = ms.iter().map(|m| corner(*m).map(|c| alpha_of(c, th))).collect::<Result<_>>()?;
    let a: Vec<C64> = (0..4).map(|k| c1[k] - I * c2[k]).collect();
    let v: Vec<C64> = (0..4).map(|k| eps[k] * (I * alpha[k]).exp() * (-I * alpha[k] / 2.0).exp()).collect();
    let amp = dot(&v, &a) / dot(&v, &v);
    let mut half: f64 = 0.0;
    let mut cbar = [C64::new(0.0, 0.0); 4];
    for k in 0..4 {
        let rem = a[k] / amp - v[k];
        half = half.max(rem.norm());
        cbar[k] = rem * (-I * alpha[k] / 2.0).exp();
    }
    let rhs_sum: C64 = -cbar.iter().sum::<C64>();
    let sin = theta.sin();
    let mass = (rhs_sum / (-I * sin)).re;
    let p = ctx.p;
    let t = -I * (I * theta).exp();
    let analytic = -I * p * (1.0 / t + t + 1.0 / t + t);
    let analytic_sum_error = (analytic - (-4.0 * I * p * sin)).norm();

    // Conjugate relation from the e currents.
    let mut vecs = Vec::new();
    let mut conjugate_exact = [0.0; 2];
    for (idx, var) in [Variant::E0, Variant::E1].into_iter().enumerate() {
        let mut f = CurrentField::new(lat, &table, var, Engine::Contract)?;
        let mut je = [C64::new(0.0, 0.0); 4];
        for k in 0..4 {
            je[k] = f.get(ms[k])?;
        }
        let b = coordinate_coefficients(&r.point, &s.point, var, plaq)?;
        conjugate_exact[idx] = rel_sum(&b, &je);
        let mut vec = [C64::new(0.0, 0.0); 4];
        for k in 0..4 {
            vec[k] = b[k] * je[k] / j[k];
        }
        vecs.push(vec);
    }
    let mut w = [C64::new(0.0, 0.0); 4];
    for k in 0..4 {
        w[k] = eps[k] * (-I * alpha[k] / 2.0).exp();
    }
    let c = project2(&vecs[0], &vecs[1], &w)?;
    let fit: f64 = (0..4).map(|k| (c[k] - w[k]).norm_sqr()).sum::<f64>().sqrt();
    let amp2 = dot(&w, &c) / dot(&w, &w);
    let mut s_conj = C64::new(0.0, 0.0);
    for k in 0..4 {
        s_conj += (c[k] / amp2 - w[k]) * (I * alpha[k] / 2.0).exp();
    }
    let conjugate_mass = (-s_conj / (I * sin)).re;
    let ratio = |m: f64| if p > 0.0 { Some(m / (4.0 * p)) } else { None };
    Ok(IsingReport {
        p,
        theta,
        bare_residuals,
        half_order_residual: half,
        psibar_coefficients: cbar,
        rhs_sum,
        mass,
        mass_ratio: ratio(mass),
        analytic_sum_error,
        t,
        conjugate_exact,
        conjugate_fit_residual: fit,
        conjugate_mass,
        conjugate_mass_ratio: ratio(conjugate_mass),
    })
}

fn rel_sum(c: &[C64; 4], j: &[C64; 4]) -> f64 {
    let (v, sc) = weighted_sum(c, j);
    v.norm() / sc.max(f64::MIN_POSITIVE)
}
