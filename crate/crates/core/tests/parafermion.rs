use std::f64::consts::PI;

use cplab::curve::{make_point_from_chart, sample_point, Branch, CurvePoint, ModelParams, SampleBox, C64};
use cplab::elliptic::EllipticContext;
use cplab::lattice::{Cell, DiamondLattice, Engine, MidEdge, Site};
use cplab::parafermion::{
    all_plaquettes, alpha_of, coordinate_coefficients, corner, current_expectation, dh_contour, dh_residual,
    ising_dirac_check, near_fz_expansion_check, phase_flip, stencil, tail_ordering, CoefficientForm, Corner,
    CurrentField, DressedCurrent, NearFzOrder, Plaquette, PlaquetteKind, TailOrdering,
};
use cplab::weights::{build_weights, Variant, WeightTable};
use cplab::Error;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn chart_pair(n: usize, kp: f64, ur: C64, us: C64) -> (CurvePoint, CurvePoint) {
    let p = ModelParams::new(n, kp).unwrap();
    (
        make_point_from_chart(&p, ur, Branch::Principal).unwrap(),
        make_point_from_chart(&p, us, Branch::Principal).unwrap(),
    )
}

fn lattice_for(r: &CurvePoint, s: &CurvePoint, rows: usize, cols: usize) -> DiamondLattice {
    let theta = (s.chart.unwrap().u - r.chart.unwrap().u).re;
    DiamondLattice::new(rows, cols, theta).unwrap().with_fixed_right_column().unwrap()
}

fn worst(lat: &DiamondLattice, t: &WeightTable) -> f64 {
    let mut w: f64 = 0.0;
    for v in Variant::ALL {
        let mut f = CurrentField::new(lat, t, v, Engine::Contract).unwrap();
        for p in all_plaquettes(lat) {
            w = w.max(dh_residual(&mut f, &p).unwrap().relative);
        }
    }
    w
}

#[test]
fn plaquette_labels() {
    let w = Plaquette::w(1, 2).midedges();
    let me = |i, j, a, b| MidEdge { site: Site { i, j }, cell: Cell::new(a, b) };
    assert_eq!(w, [me(1, 2, 1, 2), me(1, 2, 1, 1), me(2, 2, 1, 1), me(2, 2, 1, 2)]);
    let wb = Plaquette::wbar(1, 2).midedges();
    assert_eq!(wb, [me(1, 3, 0, 2), me(1, 2, 0, 2), me(1, 2, 1, 2), me(1, 3, 1, 2)]);
    assert_eq!(corner(w[0]).unwrap(), Corner::NE);
    assert_eq!(corner(w[1]).unwrap(), Corner::SE);
    assert_eq!(corner(w[2]).unwrap(), Corner::SW);
    assert_eq!(corner(w[3]).unwrap(), Corner::NW);
    assert!(corner(me(1, 1, 3, 3)).is_err());
}

#[test]
fn alpha_matches_geometry() {
    let lat = DiamondLattice::new(3, 3, 1.1).unwrap();
    for p in all_plaquettes(&lat) {
        for m in p.midedges() {
            let a = alpha_of(corner(m).unwrap(), C64::new(1.1, 0.0));
            assert!((a.re - lat.alpha(m)).abs() < 1e-14);
        }
    }
}

#[test]
fn tail_ordering_rule() {
    let lat = DiamondLattice::new(3, 3, 1.0).unwrap();
    let above = MidEdge { site: Site { i: 1, j: 1 }, cell: Cell::new(0, 0) };
    let below = MidEdge { site: Site { i: 1, j: 1 }, cell: Cell::new(1, 1) };
    assert_eq!(tail_ordering(&lat, above), TailOrdering::Above);
    assert_eq!(tail_ordering(&lat, below), TailOrdering::Below);
}

#[test]
fn dressing_spins() {
    let a = DressedCurrent::new(Variant::EBar1, 4);
    let b = DressedCurrent::new(Variant::E0, 4);
    assert!((a.spin - 0.75).abs() < 1e-15 && (b.spin + 0.75).abs() < 1e-15);
    let al = C64::new(0.4, 0.0);
    assert!((b.dressing(al) - (C64::i() * 0.75 * al).exp()).norm() < 1e-15);
}

#[test]
fn fz_currents_have_unit_factors_and_conjugate_pairs() {
    let p = ModelParams::fz(3).unwrap();
    let r = make_point_from_chart(&p, C64::new(0.2, 0.0), Branch::Principal).unwrap();
    let s = make_point_from_chart(&p, C64::new(1.2, 0.0), Branch::Principal).unwrap();
    let t = build_weights(&r, &s).unwrap();
    let lat = DiamondLattice::new(3, 3, 1.0).unwrap().with_fixed_right_column().unwrap();
    for m in [
        MidEdge { site: Site { i: 1, j: 1 }, cell: Cell::new(0, 1) },
        MidEdge { site: Site { i: 0, j: 2 }, cell: Cell::new(0, 1) },
    ] {
        let eb0 = current_expectation(&lat, &t, Variant::EBar0, m).unwrap();
        let e0 = current_expectation(&lat, &t, Variant::E0, m).unwrap();
        assert!((eb0 - e0.conj()).norm() < 1e-13, "{eb0} {e0}");
        let mut bare = CurrentField::bare(&lat, &t, Variant::EBar0, Engine::Contract).unwrap();
        assert!((bare.get(m).unwrap() - eb0).norm() < 1e-13);
    }
}

#[test]
fn zero_length_tail_is_a_pure_order_insertion() {
    let (r, s) = chart_pair(3, 0.7, C64::new(0.1, 0.1), C64::new(0.8, 0.0));
    let t = build_weights(&r, &s).unwrap();
    let lat = DiamondLattice::new(3, 3, 0.7).unwrap().with_fixed_right_column().unwrap();
    let m = MidEdge { site: Site { i: 0, j: 0 }, cell: Cell::ANCHOR };
    let j = current_expectation(&lat, &t, Variant::EBar0, m).unwrap();
    let x = cplab::lattice::expectation(
        &lat,
        &t,
        &cplab::lattice::InsertionSet::new().with_x(Site { i: 0, j: 0 }, 1),
        Engine::Contract,
    )
    .unwrap();
    assert!((j - x).norm() < 1e-14);
}

#[test]
fn fz_coefficients_are_trivial() {
    let p = ModelParams::fz(4).unwrap();
    let r = make_point_from_chart(&p, C64::new(0.0, 0.0), Branch::Principal).unwrap();
    let s = make_point_from_chart(&p, C64::new(1.0, 0.0), Branch::Principal).unwrap();
    let t = build_weights(&r, &s).unwrap();
    let lat = DiamondLattice::new(3, 3, 1.0).unwrap();
    for v in Variant::ALL {
        for pl in all_plaquettes(&lat) {
            let st = stencil(&lat, &t, v, &pl).unwrap();
            assert_eq!(st.form, CoefficientForm::Chart);
            assert!(st.phases.iter().all(|c| (c - 1.0).norm() < 1e-15));
        }
    }
}

#[test]
fn chiral_point_relations() {
    let (r, s) = chart_pair(3, 0.5, C64::new(-0.2, 0.1), C64::new(0.6, -0.1));
    assert!(r.chart.unwrap().phi.norm() > 0.1);
    let t = build_weights(&r, &s).unwrap();
    let lat = lattice_for(&r, &s, 3, 4);
    assert!(worst(&lat, &t) < 1e-10);
    // A single weight off by one percent breaks the relations.
    assert!(worst(&lat, &t.perturbed(false, 1, C64::new(1.01, 0.0))) > 1e-4);
    assert!(worst(&lat, &t.perturbed(true, 2, C64::new(1.01, 0.0))) > 1e-4);
}

#[test]
fn relative_residual_is_scale_invariant() {
    let (r, s) = chart_pair(2, 1.3, C64::new(0.3, 0.0), C64::new(0.9, 0.2));
    let t = build_weights(&r, &s).unwrap();
    let lat = lattice_for(&r, &s, 3, 3);
    let scaled = t.rescaled(C64::new(2.5, 0.7), C64::new(0.3, -1.1));
    let pl = Plaquette::wbar(1, 0);
    for v in Variant::ALL {
        let mut a = CurrentField::new(&lat, &t, v, Engine::Contract).unwrap();
        let mut b = CurrentField::new(&lat, &scaled, v, Engine::Contract).unwrap();
        let (x, y) = (dh_residual(&mut a, &pl).unwrap(), dh_residual(&mut b, &pl).unwrap());
        assert!((x.relative - y.relative).abs() < 1e-12);
    }
}

#[test]
fn coordinate_form_matches_chart_form() {
    // The chart form times e^{-i l (u_r + u_s)/(2N)} is the coordinate form.
    let (r, s) = chart_pair(4, 0.8, C64::new(0.2, 0.1), C64::new(1.0, -0.2));
    let t = build_weights(&r, &s).unwrap();
    let lat = lattice_for(&r, &s, 3, 3);
    let (ur, us) = (r.chart.unwrap().u, s.chart.unwrap().u);
    for v in Variant::ALL {
        let lam = if v.is_bar() { 1.0 } else { -1.0 };
        let k = (-C64::i() * lam * (ur + us) / 8.0).exp();
        for pl in [Plaquette::w(0, 1), Plaquette::wbar(1, 0)] {
            let chart = stencil(&lat, &t, v, &pl).unwrap().coefficients;
            let xy = coordinate_coefficients(&r, &s, v, &pl).unwrap();
            for j in 0..4 {
                assert!((chart[j] * k - xy[j]).norm() < 1e-12, "{v:?} {pl:?}");
            }
        }
    }
}

#[test]
fn phase_patterns() {
    assert_eq!(phase_flip(Variant::EBar0, PlaquetteKind::W), phase_flip(Variant::EBar1, PlaquetteKind::Wbar));
    assert_eq!(phase_flip(Variant::EBar0, PlaquetteKind::Wbar), phase_flip(Variant::EBar1, PlaquetteKind::W));
    assert_eq!(phase_flip(Variant::EBar0, PlaquetteKind::W), 1.0);
    assert_eq!(phase_flip(Variant::E0, PlaquetteKind::W), -1.0);
}

#[test]
fn contours() {
    let (r, s) = chart_pair(3, 0.7, C64::new(-0.1, 0.0), C64::new(0.8, 0.1));
    let t = build_weights(&r, &s).unwrap();
    let lat = lattice_for(&r, &s, 4, 4);
    let mut f = CurrentField::new(&lat, &t, Variant::EBar1, Engine::Contract).unwrap();
    let single = Plaquette::w(1, 1);
    let one = dh_contour(&mut f, &[single]).unwrap();
    assert!((one.boundary_sum - dh_residual(&mut f, &single).unwrap().value).norm() < 1e-15);
    // Four plaquettes around the spin (1, 1).
    let square = [Plaquette::w(0, 1), Plaquette::w(1, 1), Plaquette::wbar(1, 0), Plaquette::wbar(1, 1)];
    let c = dh_contour(&mut f, &square).unwrap();
    assert!(c.interior_cancellation < 1e-14, "{}", c.interior_cancellation);
    assert!(c.boundary_sum.norm() < 1e-9 * c.scale);
    assert!((c.boundary_sum - c.plaquette_sum).norm() < 1e-12 * c.scale);
    let mixed = [
        Plaquette::w(0, 1),
        Plaquette::w(1, 1),
        Plaquette::w(0, 2),
        Plaquette::wbar(1, 1),
        Plaquette::wbar(1, 0),
        Plaquette::wbar(2, 1),
    ];
    let m = dh_contour(&mut f, &mixed).unwrap();
    assert!(m.boundary_sum.norm() < 1e-9 * m.scale);
    // Disjoint plaquettes, and a ring around the spin (1, 1) with one rhombus missing.
    let apart = [Plaquette::w(0, 0), Plaquette::w(2, 3)];
    assert!(matches!(dh_contour(&mut f, &apart), Err(Error::Domain(_))));
    assert!(matches!(dh_contour(&mut f, &[single, single]), Err(Error::Domain(_))));
}

#[test]
fn ring_region_is_rejected() {
    let (r, s) = chart_pair(2, 0.7, C64::new(-0.1, 0.0), C64::new(0.8, 0.1));
    let t = build_weights(&r, &s).unwrap();
    let lat = lattice_for(&r, &s, 4, 4);
    let mut f = CurrentField::new(&lat, &t, Variant::EBar0, Engine::Contract).unwrap();
    // The eight rhombi touching the dual cell (1, 1) from outside, minus the four meeting at it.
    let around: Vec<Plaquette> = [
        Plaquette::w(0, 1),
        Plaquette::w(0, 2),
        Plaquette::w(2, 1),
        Plaquette::w(2, 2),
        Plaquette::wbar(1, 0),
        Plaquette::wbar(2, 0),
        Plaquette::wbar(1, 2),
        Plaquette::wbar(2, 2),
        Plaquette::w(1, 0),
        Plaquette::w(1, 3),
        Plaquette::wbar(0, 1),
        Plaquette::wbar(3, 1),
    ]
    .into_iter()
    .filter(|p| p.inside(&lat))
    .collect();
    let with_hole = dh_contour(&mut f, &around);
    let filled: Vec<Plaquette> = around
        .iter()
        .cloned()
        .chain([Plaquette::w(1, 1), Plaquette::w(1, 2), Plaquette::wbar(1, 1), Plaquette::wbar(2, 1)])
        .collect();
    assert!(matches!(with_hole, Err(Error::Domain(_))), "{with_hole:?}");
    assert!(dh_contour(&mut f, &filled).is_ok());
}

#[test]
fn near_fz_cases() {
    let lat = DiamondLattice::new(3, 3, PI / 2.0).unwrap().with_fixed_right_column().unwrap();
    let pl = Plaquette::w(0, 1);
    let zero = near_fz_expansion_check(&lat, &pl, 3, 0.0, 0.0, NearFzOrder::Second).unwrap();
    assert!(zero.remainders.iter().all(|d| *d < 1e-14));
    assert!(zero.bracket_sums.iter().all(|s| (s - 4.0).norm() < 1e-15));
    let rep = near_fz_expansion_check(&lat, &pl, 3, 0.05, 0.02, NearFzOrder::Second).unwrap();
    assert!(rep.halving_ratios.iter().all(|r| (6.0..=10.0).contains(r)));
    assert!(rep.exact_relative < 1e-12 && rep.warning.is_none());
    // Without the quadratic terms the remainder is second order.
    let first = near_fz_expansion_check(&lat, &pl, 3, 0.05, 0.02, NearFzOrder::First).unwrap();
    assert!(first.halving_ratios.iter().all(|r| (3.0..=5.0).contains(r)), "{:?}", first.halving_ratios);
    // A unit quadratic coefficient leaves a second-order remainder too.
    assert!(rep.unit_coefficient_ratios.iter().all(|r| (3.0..=5.0).contains(r)));
    let big = near_fz_expansion_check(&lat, &pl, 3, 0.2, 0.05, NearFzOrder::Second).unwrap();
    assert!(big.warning.is_some());
    assert!(near_fz_expansion_check(&lat, &Plaquette::wbar(1, 0), 3, 0.05, 0.02, NearFzOrder::Second).is_err());
}

#[test]
fn ising_cases() {
    let (br, bs) = (0.1, 0.1 + PI / 4.0);
    let lat = DiamondLattice::new(3, 3, PI / 2.0).unwrap().with_fixed_right_column().unwrap();
    let massless = ising_dirac_check(&lat, &EllipticContext::from_nome(0.0).unwrap(), br, bs, &Plaquette::w(0, 1)).unwrap();
    assert!(massless.rhs_sum.norm() < 1e-14 && massless.mass_ratio.is_none());
    assert!(massless.conjugate_mass.abs() < 1e-12 && massless.conjugate_mass_ratio.is_none());
    let p = 1e-4;
    let ctx = EllipticContext::from_nome(p).unwrap();
    let rep = ising_dirac_check(&lat, &ctx, br, bs, &Plaquette::w(0, 1)).unwrap();
    assert!((rep.t - 1.0).norm() < 1e-15);
    // Each psibar coefficient is i p up to higher orders.
    for c in rep.psibar_coefficients {
        assert!((c - C64::new(0.0, p)).norm() < p.powf(1.5));
    }
    assert!((rep.mass_ratio.unwrap() - 1.0).abs() < 1e-3);
    // m = 4p ~ k^2/4 with an O(k^4) difference.
    assert!(((rep.mass - ctx.k * ctx.k / 4.0) / ctx.k.powi(4)).abs() < 1.0);
    let wrong = DiamondLattice::new(3, 3, 1.0).unwrap();
    assert!(ising_dirac_check(&wrong, &ctx, br, bs, &Plaquette::w(0, 1)).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn twisted_relations_hold(n in 2usize..=4, kp in 0.3f64..1.8, seed in 0u64..10_000) {
        let p = ModelParams::new(n, kp).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bx = SampleBox::default();
        let r = sample_point(&p, &mut rng, &bx).unwrap();
        let s = sample_point(&p, &mut rng, &bx).unwrap();
        let t = build_weights(&r, &s).unwrap();
        let lat = lattice_for(&r, &s, 3, 3);
        prop_assert!(worst(&lat, &t) < 1e-9);
    }

    #[test]
    fn ising_mass(logp in -5.0f64..-3.0, beta in -0.3f64..0.3, sep in 0.3f64..1.2) {
        let p = 10f64.powf(logp);
        let ctx = EllipticContext::from_nome(p).unwrap();
        let lat = DiamondLattice::new(3, 3, 2.0 * sep).unwrap().with_fixed_right_column().unwrap();
        let rep = ising_dirac_check(&lat, &ctx, beta, beta + sep, &Plaquette::w(0, 1)).unwrap();
        prop_assert!(rep.bare_residuals.iter().all(|v| *v < 1e-9));
        prop_assert!((rep.mass_ratio.unwrap() - 1.0).abs() < 1e-3);
        prop_assert!(rep.conjugate_exact.iter().all(|v| *v < 1e-9));
        prop_assert!((rep.conjugate_mass_ratio.unwrap() - 1.0).abs() < 1e-3);
    }
}
