//! One PASS/FAIL line per acceptance criterion. Exits non-zero if any fails.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use cplab::curve::{make_point_from_chart, sample_point, Branch, CurvePoint, ModelParams, SampleBox, C64};
use cplab::elliptic::{jacobi_sn_cn_dn, scaled_theta_expansions, scaled_thetas, EllipticContext};
use cplab::lattice::{
    check_hermiticity, check_kw_duality, check_path_independence, finite_difference_hamiltonian,
    hamiltonian, transfer_matrix, translation_operator, Cell, DiamondLattice, Engine, InsertionSet, Site,
    TailPath,
};
use cplab::parafermion::{
    all_plaquettes, dh_contour, dh_residual, ising_dirac_check, near_fz_expansion_check, stencil, CurrentField,
    NearFzOrder, Plaquette,
};
use cplab::qgroup::{build_r, check_intertwiner, check_sufficiency, Generator, RootChoice};
use cplab::weights::{build_weights, check_crossing, check_star_triangle, DisorderFactor, Variant};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn random_kprime(rng: &mut ChaCha8Rng) -> f64 {
    rng.gen_range(0.4..1.6)
}

fn triples(n: usize, count: usize, seed: u64) -> Vec<[CurvePoint; 3]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bx = SampleBox::default();
    (0..count)
        .map(|_| {
            let p = ModelParams::new(n, random_kprime(&mut rng)).unwrap();
            [0, 1, 2].map(|_| sample_point(&p, &mut rng, &bx).unwrap())
        })
        .collect()
}

fn star_triangle() -> Outcome {
    let mut worst: f64 = 0.0;
    for n in 2..=5 {
        for [r, s, t] in triples(n, 20, 100 + n as u64) {
            worst = worst.max(check_star_triangle(&r, &s, &t).unwrap().max_rel_dev);
        }
    }
    outcome(worst <= 1e-9, format!("max relative deviation {worst:.2e}"))
}

fn crossing() -> Outcome {
    let mut worst: f64 = 0.0;
    for n in 2..=5 {
        for [r, s, t] in triples(n, 20, 100 + n as u64) {
            for (a, b) in [(r, s), (s, t), (r, t)] {
                worst = worst.max(check_crossing(&a, &b).unwrap().max());
            }
        }
    }
    outcome(worst <= 1e-10, format!("max residual {worst:.2e}"))
}

fn rmatrix() -> Outcome {
    let (mut fact, mut inter, mut suff): (f64, f64, f64) = (0.0, 0.0, 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let bx = SampleBox::default();
    for n in 2..=4 {
        for _ in 0..20 {
            let p = ModelParams::new(n, random_kprime(&mut rng)).unwrap();
            let pts: Vec<CurvePoint> = (0..4).map(|_| sample_point(&p, &mut rng, &bx).unwrap()).collect();
            let rm = build_r(&pts[0], &pts[1], &pts[2], &pts[3]).unwrap();
            fact = fact.max(rm.closed_form_deviation);
            for g in Generator::CHECKED {
                for root in [RootChoice::Principal, RootChoice::Negated] {
                    inter = inter.max(check_intertwiner(&rm, g, root).unwrap());
                }
                let s = check_sufficiency(&pts[0], &pts[1], &pts[2], &pts[3], g, RootChoice::Principal).unwrap();
                suff = s.iter().fold(suff, |a, b| a.max(*b));
            }
        }
    }
    outcome(
        fact <= 1e-10 && inter <= 1e-9 && suff <= 1e-9,
        format!("factorization {fact:.2e}, intertwiner {inter:.2e}, sufficiency {suff:.2e}"),
    )
}

fn random_pair(n: usize, rng: &mut ChaCha8Rng) -> (CurvePoint, CurvePoint) {
    let p = ModelParams::new(n, random_kprime(rng)).unwrap();
    let bx = SampleBox::default();
    (sample_point(&p, rng, &bx).unwrap(), sample_point(&p, rng, &bx).unwrap())
}

fn worst_dh(lat: &DiamondLattice, r: &CurvePoint, s: &CurvePoint, engine: Engine) -> f64 {
    let table = build_weights(r, s).unwrap();
    let mut worst: f64 = 0.0;
    for v in Variant::ALL {
        let mut f = CurrentField::new(lat, &table, v, engine).unwrap();
        for p in all_plaquettes(lat) {
            worst = worst.max(dh_residual(&mut f, &p).unwrap().relative);
        }
    }
    worst
}

fn twisted_dh() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    let mut engines: f64 = 0.0;
    let mut control = f64::INFINITY;
    let mut contour: f64 = 0.0;
    for n in 2..=4 {
        for sample in 0..10 {
            let (r, s) = random_pair(n, &mut rng);
            let theta = (s.chart.unwrap().u - r.chart.unwrap().u).re;
            let big = DiamondLattice::new(4, 4, theta).unwrap().with_fixed_right_column().unwrap();
            worst = worst.max(worst_dh(&big, &r, &s, Engine::Contract));
            let table = build_weights(&r, &s).unwrap();
            let region = all_plaquettes(&big);
            for v in Variant::ALL {
                let mut f = CurrentField::new(&big, &table, v, Engine::Contract).unwrap();
                let c = dh_contour(&mut f, &region).unwrap();
                contour = contour.max(c.boundary_sum.norm() / c.scale).max(c.interior_cancellation);
            }
            if sample < 2 {
                let small = DiamondLattice::new(3, 3, theta).unwrap().with_fixed_right_column().unwrap();
                let table = build_weights(&r, &s).unwrap();
                for v in Variant::ALL {
                    let mut a = CurrentField::new(&small, &table, v, Engine::Contract).unwrap();
                    let mut b = CurrentField::new(&small, &table, v, Engine::Enumerate).unwrap();
                    for p in all_plaquettes(&small) {
                        for m in p.midedges() {
                            let (x, y) = (a.get(m).unwrap(), b.get(m).unwrap());
                            engines = engines.max((x - y).norm() / x.norm().max(1e-300));
                        }
                    }
                }
                // Off-curve control: move x of r by 1e-2 while keeping its chart.
                let mut off = r;
                off.x *= 1.0 + 1e-2;
                control = control.min(worst_dh(&big, &off, &s, Engine::Contract));
            }
        }
    }
    outcome(
        worst <= 1e-9 && contour <= 1e-9 && engines <= 1e-10 && control > 1e-4,
        format!(
            "max residual/scale {worst:.2e}, whole-lattice contour {contour:.2e}, engine agreement {engines:.2e}, off-curve control min {control:.2e}"
        ),
    )
}

fn path_independence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut worst: f64 = 0.0;
    for n in 2..=4 {
        for _ in 0..3 {
            let (r, s) = random_pair(n, &mut rng);
            let lat = DiamondLattice::new(4, 4, 1.0).unwrap().with_fixed_right_column().unwrap();
            let table = build_weights(&r, &s).unwrap();
            for v in Variant::ALL {
                let factor = DisorderFactor::new(&table, v);
                // Pairs of homotopic paths whose enclosed region avoids the insertion site.
                for (site, cell, detour) in [((1, 1), (1, 1), true), ((2, 2), (1, 2), false), ((2, 2), (1, 1), true), ((2, 0), (1, 0), false)] {
                    let target = Cell::new(cell.0, cell.1);
                    let base = InsertionSet::new().with_x(Site { i: site.0, j: site.1 }, v.x_power());
                    let a = TailPath::straight(target);
                    let b = if detour {
                        TailPath::straight(Cell::new(cell.0, cell.1 + 1)).extended(&[target])
                    } else {
                        TailPath::right_then_up(target)
                    };
                    worst = worst.max(check_path_independence(&lat, &table, &base, &factor, &a, &b).unwrap());
                }
            }
        }
    }
    outcome(worst <= 1e-10, format!("max relative difference {worst:.2e}"))
}

fn fz_reduction() -> Outcome {
    let mut ones: f64 = 0.0;
    let mut cr: f64 = 0.0;
    for n in 2..=4 {
        let p = ModelParams::fz(n).unwrap();
        let theta = 1.1;
        let r = make_point_from_chart(&p, C64::new(0.2, 0.0), Branch::Principal).unwrap();
        let s = make_point_from_chart(&p, C64::new(0.2 + theta, 0.0), Branch::Principal).unwrap();
        let lat = DiamondLattice::new(3, 4, theta).unwrap().with_fixed_right_column().unwrap();
        let table = build_weights(&r, &s).unwrap();
        for v in Variant::ALL {
            let mut f = CurrentField::new(&lat, &table, v, Engine::Contract).unwrap();
            for pl in all_plaquettes(&lat) {
                let st = stencil(&lat, &table, v, &pl).unwrap();
                ones = st.phases.iter().fold(ones, |a, c| a.max((c - 1.0).norm()));
                // Plain relation: dz (or dzbar) times the dressed current, no phases.
                let res = dh_residual(&mut f, &pl).unwrap();
                let mut sum = C64::new(0.0, 0.0);
                let mut scale: f64 = 0.0;
                for k in 0..4 {
                    let d = if v.is_bar() { st.dz[k] } else { st.dzbar[k] };
                    let spin = if v.is_bar() { 1.0 - 1.0 / n as f64 } else { -(1.0 - 1.0 / n as f64) };
                    let t = d * (-C64::i() * spin * st.alpha[k]).exp() * res.currents[k];
                    sum += t;
                    scale = scale.max(t.norm());
                }
                cr = cr.max(sum.norm() / scale);
            }
        }
    }
    outcome(ones <= 1e-14 && cr <= 1e-10, format!("phase deviation from 1 {ones:.2e}, plain relation {cr:.2e}"))
}

fn near_fz() -> Outcome {
    let lat = DiamondLattice::new(3, 3, PI / 2.0).unwrap().with_fixed_right_column().unwrap();
    let rep = near_fz_expansion_check(&lat, &Plaquette::w(0, 1), 3, 0.05, 0.02, NearFzOrder::Second).unwrap();
    let ok = rep.halving_ratios.iter().all(|r| (6.0..=10.0).contains(r)) && rep.bracket_sum_error <= 1e-12;
    outcome(
        ok,
        format!(
            "halving ratios {:.3}, {:.3}; bracket sum error {:.1e}; exact relation {:.1e}",
            rep.halving_ratios[0], rep.halving_ratios[1], rep.bracket_sum_error, rep.exact_relative
        ),
    )
}

fn ising() -> Outcome {
    let (br, bs) = (0.1, 0.1 + PI / 4.0);
    let mut bare: f64 = 0.0;
    let mut mass: f64 = 0.0;
    let mut conj: f64 = 0.0;
    let mut conj_exact: f64 = 0.0;
    let mut sum_err: f64 = 0.0;
    for p in [1e-5, 3e-5, 1e-4, 3e-4, 1e-3] {
        let ctx = EllipticContext::from_nome(p).unwrap();
        let theta = 2.0 * (bs - br);
        let lat = DiamondLattice::new(3, 3, theta).unwrap().with_fixed_right_column().unwrap();
        let rep = ising_dirac_check(&lat, &ctx, br, bs, &Plaquette::w(0, 1)).unwrap();
        bare = rep.bare_residuals.iter().fold(bare, |a, b| a.max(*b));
        mass = mass.max((rep.mass_ratio.unwrap() - 1.0).abs());
        conj = conj.max((rep.conjugate_mass_ratio.unwrap() - 1.0).abs());
        conj_exact = rep.conjugate_exact.iter().fold(conj_exact, |a, b| a.max(*b));
        sum_err = sum_err.max(rep.analytic_sum_error);
    }
    outcome(
        bare <= 1e-9 && mass <= 1e-3 && sum_err <= 1e-12 && conj_exact <= 1e-9 && conj <= 1e-3,
        format!(
            "bare {bare:.1e}, |m/4p - 1| {mass:.1e}, coefficient sum {sum_err:.1e}, e-relations {conj_exact:.1e}, conjugate |m/4p - 1| {conj:.1e}"
        ),
    )
}

fn transfer() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut comm: f64 = 0.0;
    for n in [2, 3] {
        let l = 3;
        for _ in 0..10 {
            let p = ModelParams::new(n, random_kprime(&mut rng)).unwrap();
            let bx = SampleBox::default();
            let s = sample_point(&p, &mut rng, &bx).unwrap();
            let r1 = sample_point(&p, &mut rng, &bx).unwrap();
            let r2 = sample_point(&p, &mut rng, &bx).unwrap();
            let a = transfer_matrix(&r1, &s, l).unwrap();
            let b = transfer_matrix(&r2, &s, l).unwrap();
            let ab = &a * &b;
            comm = comm.max((&ab - &b * &a).norm() / ab.norm());
        }
    }
    let p = ModelParams::new(3, 0.8).unwrap();
    let s = make_point_from_chart(&p, C64::new(0.3, 0.0), Branch::Principal).unwrap();
    let t = transfer_matrix(&s, &s, 3).unwrap();
    let perm = translation_operator(3, 3).unwrap();
    let scale = t.iter().zip(perm.iter()).find(|(_, q)| q.re == 1.0).map(|(v, _)| *v).unwrap();
    let transl = (&t - &perm * scale).norm() / t.norm();
    let fd = finite_difference_hamiltonian(&s, 3, 1e-3, 3).unwrap();
    let ratios_ok = fd.halving_ratios.iter().all(|r| (1.8..=2.2).contains(r));
    let scale_err = (fd.fitted_scale - fd.expected_scale).norm() / fd.expected_scale.norm();
    outcome(
        comm <= 1e-9 && transl <= 1e-12 && ratios_ok && fd.deviations[0] < 1e-2 && scale_err < 1e-2,
        format!(
            "commutator {comm:.1e}, r=s vs translation {transl:.1e}, fd deviations {:.1e} -> {:.1e} (halving {:.2?}), scale error {scale_err:.1e}",
            fd.deviations[0],
            fd.deviations.last().unwrap(),
            fd.halving_ratios
        ),
    )
}

fn chain() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let mut herm: f64 = 0.0;
    let mut kw: f64 = 0.0;
    for n in [2, 3] {
        for _ in 0..5 {
            let phi = rng.gen_range(-0.6..0.6);
            let phibar = rng.gen_range(-0.6..0.6);
            let kp = rng.gen_range(0.4..1.6);
            for twist in 0..n as i64 {
                let h = hamiltonian(n, C64::new(phi, 0.0), C64::new(phibar, 0.0), kp, 3, twist).unwrap();
                herm = herm.max(check_hermiticity(&h));
            }
            kw = kw.max(check_kw_duality(n, phi, phibar, kp, 3).unwrap().max_deviation);
        }
    }
    outcome(herm <= 1e-12 && kw <= 1e-8, format!("hermiticity {herm:.1e}, KW spectra {kw:.1e}"))
}

fn elliptic() -> Outcome {
    let mut ident: f64 = 0.0;
    for k in [0.1, 0.5, 0.9, 0.99] {
        let ctx = EllipticContext::from_modulus(k).unwrap();
        for beta in [C64::new(0.3, 0.0), C64::new(1.2, 0.4), C64::new(-0.7, 0.2)] {
            let (sn, cn, dn) = jacobi_sn_cn_dn(beta, &ctx).unwrap();
            ident = ident.max((sn * sn + cn * cn - 1.0).norm());
            ident = ident.max((dn * dn + k * k * sn * sn - 1.0).norm());
        }
    }
    // Error of the two-term forms over p^{3/2}, at p and p/4.
    let err = |p: f64| {
        let a = scaled_thetas(0.4, p).unwrap();
        let b = scaled_theta_expansions(0.4, p);
        a.iter().zip(&b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    };
    let (e1, e2) = (err(1e-4), err(2.5e-5));
    let bounded = e1 / 1e-4f64.powf(1.5);
    let ratio = e1 / e2;
    outcome(
        ident <= 1e-12 && bounded < 10.0 && (6.0..=10.0).contains(&ratio),
        format!("sn/cn/dn identities {ident:.1e}, expansion error / p^1.5 {bounded:.2}, quartering ratio {ratio:.2}"),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome, Duration); 11] = [
        ("star-triangle", star_triangle, Duration::from_secs(10)),
        ("crossing", crossing, Duration::from_secs(10)),
        ("R-matrix", rmatrix, Duration::from_secs(60)),
        ("twisted DH", twisted_dh, Duration::from_secs(300)),
        ("tail path independence", path_independence, Duration::from_secs(60)),
        ("FZ reduction", fz_reduction, Duration::from_secs(60)),
        ("near-FZ scaling", near_fz, Duration::from_secs(60)),
        ("Ising Dirac", ising, Duration::from_secs(60)),
        ("transfer matrix", transfer, Duration::from_secs(60)),
        ("Hamiltonian and KW", chain, Duration::from_secs(60)),
        ("elliptic", elliptic, Duration::from_secs(60)),
    ];
    let mut failed = 0;
    for (idx, (name, f, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = f();
        let dt = start.elapsed();
        let pass = o.pass && dt <= *budget;
        if !pass {
            failed += 1;
        }
        println!(
            "[{}] {:>2} {}: {} ({:.2}s)",
            if pass { "PASS" } else { "FAIL" },
            idx + 1,
            name,
            o.detail,
            dt.as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
