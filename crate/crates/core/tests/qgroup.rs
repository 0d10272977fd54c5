use cplab::curve::{make_point_from_chart, sample_point, Branch, CurvePoint, ModelParams, SampleBox, C64};
use cplab::qgroup::{
    build_r, build_rep, build_s, build_t, check_intertwiner, check_sufficiency, closed_form_r, clock_shift,
    coproduct_action, four_term_check, Generator, RootChoice, CMat,
};
use cplab::weights::build_weights;
use cplab::Error;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn pt(p: &ModelParams, re: f64, im: f64) -> CurvePoint {
    make_point_from_chart(p, C64::new(re, im), Branch::Principal).unwrap()
}

fn quad(n: usize, kp: f64, seed: u64) -> [CurvePoint; 4] {
    let p = ModelParams::new(n, kp).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bx = SampleBox::default();
    [0, 1, 2, 3].map(|_| sample_point(&p, &mut rng, &bx).unwrap())
}

#[test]
fn t1_is_c0_mu_mu_z() {
    let p = ModelParams::new(2, 0.7).unwrap();
    let (r, rp) = (pt(&p, 0.3, 0.1), pt(&p, -0.5, 0.2));
    let rep = build_rep(&r, &rp, RootChoice::Principal).unwrap();
    let want = &rep.z * (rep.c0 * r.mu * rp.mu);
    assert!((rep.matrix(Generator::T1) - want).norm() < 1e-15);
    assert!(rep.c0_residual() < 1e-14);
    let neg = build_rep(&r, &rp, RootChoice::Negated).unwrap();
    assert!((neg.c0 + rep.c0).norm() < 1e-15);
}

#[test]
fn group_relations() {
    let p = ModelParams::new(4, 1.2).unwrap();
    let rep = build_rep(&pt(&p, 0.2, 0.0), &pt(&p, 0.7, -0.3), RootChoice::Principal).unwrap();
    let (x, z) = (&rep.x, &rep.z);
    assert!((z * x - x * z * p.omega).norm() < 1e-15);
    let id = CMat::identity(4, 4);
    assert!((rep.matrix(Generator::T0) * rep.matrix(Generator::T0Inv) - &id).norm() < 1e-13);
    assert!((rep.matrix(Generator::T1) * rep.matrix(Generator::T1Inv) - &id).norm() < 1e-13);
    for t in [Generator::T0, Generator::T1] {
        for zg in [Generator::Z0, Generator::Z1] {
            let (a, b) = (rep.matrix(t), rep.matrix(zg));
            assert!((&a * &b - &b * &a).norm() < 1e-13);
        }
    }
}

#[test]
fn ebar0_action_formula() {
    let p = ModelParams::new(3, 0.8).unwrap();
    let (r, rp) = (pt(&p, 0.3, 0.1), pt(&p, -0.4, 0.2));
    let rep = build_rep(&r, &rp, RootChoice::Principal).unwrap();
    let id = CMat::identity(3, 3);
    let want = &rep.x * (&id / rp.x - rep.matrix(Generator::T0Z0Inv) / r.y);
    assert!((rep.matrix(Generator::EBar0) - want).norm() < 1e-12);
}

#[test]
fn zero_coordinate_is_a_domain_error() {
    let p = ModelParams::new(3, 0.8).unwrap();
    let mut r = pt(&p, 0.3, 0.1);
    r.x = C64::new(0.0, 0.0);
    assert!(matches!(build_rep(&r, &r, RootChoice::Principal), Err(Error::Domain(_))));
}

#[test]
fn two_factor_coproducts() {
    let p = ModelParams::new(3, 0.6).unwrap();
    let a = build_rep(&pt(&p, 0.3, 0.1), &pt(&p, -0.2, 0.0), RootChoice::Principal).unwrap();
    let b = build_rep(&pt(&p, 0.6, -0.1), &pt(&p, 0.1, 0.3), RootChoice::Principal).unwrap();
    let reps = [a.clone(), b.clone()];
    let g = coproduct_action(Generator::T0Z0Inv, &reps).unwrap();
    assert!((g - a.matrix(Generator::T0Z0Inv).kronecker(&b.matrix(Generator::T0Z0Inv))).norm() < 1e-14);
    let e = coproduct_action(Generator::EBar0, &reps).unwrap();
    let id = CMat::identity(3, 3);
    let want = a.matrix(Generator::EBar0).kronecker(&id) + a.matrix(Generator::T0Z0Inv).kronecker(&b.matrix(Generator::EBar0));
    assert!((e - want).norm() < 1e-13);
}

#[test]
fn s_and_t_structure() {
    let p = ModelParams::new(3, 0.6).unwrap();
    let (r, s) = (pt(&p, 0.3, 0.1), pt(&p, -0.2, 0.0));
    let w = build_weights(&r, &s).unwrap();
    let sm = build_s(&r, &s).unwrap();
    // (eps1, eps2) = (1, 0) carries W(1).
    assert!((sm[(3, 3)] - w.w[1]).norm() < 1e-15);
    let t = build_t(&r, &s).unwrap();
    let total: C64 = w.wbar.iter().sum();
    for e in 0..3 {
        let col: C64 = t.column(e).iter().sum();
        assert!((col - total).norm() < 1e-14);
    }
    // Equal points: Wbar_rr(a) = delta_a0, so T is the identity.
    let t0 = build_t(&r, &r).unwrap();
    assert!((t0 - CMat::identity(3, 3)).norm() < 1e-14);
}

#[test]
fn r_matrix_at_equal_points_is_identity() {
    let p = ModelParams::new(3, 0.9).unwrap();
    let r = pt(&p, 0.2, 0.1);
    let rm = build_r(&r, &r, &r, &r).unwrap();
    assert!((rm.matrix - CMat::identity(9, 9)).norm() < 1e-13);
}

#[test]
fn closed_form_components() {
    let [r, rp, s, sp] = quad(3, 0.7, 3);
    let rm = build_r(&r, &rp, &s, &sp).unwrap();
    assert!(rm.closed_form_deviation < 1e-12);
    let w = |a: &CurvePoint, b: &CurvePoint| build_weights(a, b).unwrap();
    let (w_rps, w_rpsp, w_rs, w_rsp) = (w(&rp, &s), w(&rp, &sp), w(&r, &s), w(&r, &sp));
    let (a, b, c, d) = (2i64, 0, 1, 2);
    let want = w_rps.w_at(d - c) * w_rpsp.wbar_at(a - d) * w_rs.wbar_at(b - c) * w_rsp.w_at(a - b);
    let got = rm.component(a as usize, b as usize, c as usize, d as usize);
    assert!((got - want).norm() < 1e-12 * want.norm().max(1.0));
    let cf = closed_form_r(&r, &rp, &s, &sp).unwrap();
    assert!((cf - &rm.matrix).norm() < 1e-12 * rm.matrix.norm());
}

#[test]
fn fz_intertwiner() {
    let p = ModelParams::fz(3).unwrap();
    let pts = [pt(&p, 0.1, 0.0), pt(&p, 0.5, 0.0), pt(&p, 0.9, 0.0), pt(&p, 1.3, 0.0)];
    let rm = build_r(&pts[0], &pts[1], &pts[2], &pts[3]).unwrap();
    for g in Generator::CHECKED {
        assert!(check_intertwiner(&rm, g, RootChoice::Principal).unwrap() < 1e-10, "{}", g.name());
    }
}

#[test]
fn central_and_grouplike_cases() {
    let [r, rp, s, sp] = quad(4, 1.1, 9);
    let rm = build_r(&r, &rp, &s, &sp).unwrap();
    assert!(check_intertwiner(&rm, Generator::Z0, RootChoice::Principal).unwrap() < 1e-14);
    assert!(check_intertwiner(&rm, Generator::EBar0, RootChoice::Principal).unwrap() < 1e-10);
    let g = check_sufficiency(&r, &rp, &s, &sp, Generator::T0Z0Inv, RootChoice::Principal).unwrap();
    assert!(g.iter().all(|v| *v < 1e-12));
    let z = check_sufficiency(&r, &rp, &s, &sp, Generator::Z1, RootChoice::Principal).unwrap();
    assert!(z.iter().all(|v| *v < 1e-14));
}

#[test]
fn four_term_relation() {
    for n in 2..=5 {
        let [r, s, _, _] = quad(n, 0.8, 21 + n as u64);
        let rep = four_term_check(&r, &s).unwrap();
        assert!(rep.four_term < 1e-10 && rep.cancelled_x < 1e-12 && rep.cancelled_g < 1e-10, "{rep:?}");
    }
}

#[test]
fn clock_and_shift_have_order_n() {
    let p = ModelParams::new(5, 0.5).unwrap();
    let (x, z) = clock_shift(5, |a| p.omega_pow(a));
    let id = CMat::identity(5, 5);
    assert!((x.pow(5) - &id).norm() < 1e-14 && (z.pow(5) - &id).norm() < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn intertwiner_and_sufficiency(n in 2usize..=4, kp in 0.3f64..1.8, seed in 0u64..10_000, negated in any::<bool>()) {
        let [r, rp, s, sp] = quad(n, kp, seed);
        let root = if negated { RootChoice::Negated } else { RootChoice::Principal };
        let rm = build_r(&r, &rp, &s, &sp).unwrap();
        prop_assert!(rm.closed_form_deviation < 1e-10);
        for g in Generator::CHECKED {
            prop_assert!(check_intertwiner(&rm, g, root).unwrap() < 1e-9);
            let c = check_sufficiency(&r, &rp, &s, &sp, g, root).unwrap();
            prop_assert!(c.iter().all(|v| *v < 1e-9), "{} {:?}", g.name(), c);
        }
    }
}
