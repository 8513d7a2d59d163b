//! End-to-end acceptance checks. Each test prints one `PASS`/`FAIL` line
//! and then asserts, so `cargo test -- --nocapture` shows the full table.

use std::sync::Arc;

use hessian_core::barriers::{
    barrier_envelope, choose_k, lipschitz_envelope_bounds, msh_barrier, msh_cone_check, BarrierKind, BarrierParams,
    BoundarySample,
};
use hessian_core::capacity::{
    capacity_ladder, default_tau, hypothesis_constant, iteration_bound_check, s_infinity, stability_ratio,
    sublevel_capacity_check, volume_capacity_check, volume_capacity_radial,
};
use hessian_core::data::DensitySpec;
use hessian_core::domain::{make_domain, sample_boundary, DefiningFunction, LatticeDomain};
use hessian_core::grid::GridFunction;
use hessian_core::math::hessian_operator_value;
use hessian_core::regularity::{
    ball_average, default_deltas, fit_power_law, predictions, radial_holder_fit, sup_convolution, ExponentInputs,
};
use hessian_core::solver::{
    dirichlet_solve, dirichlet_solve_detailed, energy_comparison, omega_delta, perron_envelope, radial_solve,
    SolveConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn verdict(id: u32, name: &str, pass: bool, detail: &str) {
    println!(
        "criterion {id:>2} {name:<28} {} {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
}

fn ball(n: usize, r: f64, h: f64) -> Arc<LatticeDomain> {
    make_domain(&DefiningFunction::ball(n, r).unwrap(), h).unwrap()
}

fn abs2(z: &[f64]) -> f64 {
    z.iter().map(|x| x * x).sum()
}

fn sup_over(dom: &LatticeDomain, mut f: impl FnMut(usize) -> f64) -> f64 {
    dom.masked().iter().map(|&i| f(i)).fold(f64::NEG_INFINITY, f64::max)
}

/// `max(0, 1 − 4|z|²)²`, supported in the ball of radius 1/2.
fn bump(z: &[f64]) -> f64 {
    let b = (1.0 - 4.0 * abs2(z)).max(0.0);
    b * b
}

#[test]
fn c01_normalization_anchor() {
    let mut worst: f64 = 0.0;
    for (n, m) in [(2, 1), (2, 2), (3, 1), (3, 2), (3, 3)] {
        let dom = ball(n, 1.0, 0.25);
        let u = GridFunction::from_fn(&dom, abs2);
        for &i in dom.interior() {
            worst = worst.max((hessian_operator_value(&u, i, m).unwrap() - 1.0).abs());
        }
    }
    let pass = worst <= 1e-10;
    verdict(1, "normalization anchor", pass, &format!("max error {worst:.2e}"));
    assert!(pass);
}

#[test]
fn c02_discretization_order() {
    let hs = [0.2, 0.1, 0.05];
    // Errors are compared on the coarse interior nodes, which all lattices share.
    let coarse = ball(2, 1.0, hs[0]);
    let probes: Vec<Vec<f64>> = coarse.interior().iter().map(|&i| coarse.coords(i)).collect();
    let mut pass = true;
    let mut detail = String::new();
    for m in [1, 2] {
        let errors: Vec<f64> = hs
            .iter()
            .map(|&h| {
                let dom = ball(2, 1.0, h);
                let u = GridFunction::from_fn(&dom, |z| abs2(&z[0..2]).powi(2) + abs2(&z[2..4]).powi(2));
                probes
                    .iter()
                    .map(|z| {
                        let i = dom.locate(z).unwrap();
                        let (a, b) = (4.0 * abs2(&z[0..2]), 4.0 * abs2(&z[2..4]));
                        let exact = if m == 1 { (a + b) / 2.0 } else { a * b };
                        (hessian_operator_value(&u, i, m).unwrap() - exact).abs()
                    })
                    .fold(0.0, f64::max)
            })
            .collect();
        let slope = fit_power_law(&hs, &errors).unwrap().exponent;
        pass &= (slope - 2.0).abs() <= 0.2;
        detail.push_str(&format!("m={m} slope {slope:.3}; "));
    }
    verdict(2, "discretization order", pass, &detail);
    assert!(pass);
}

#[test]
fn c03_exact_solutions() {
    let mut detail = String::new();
    let mut pass = true;
    for h in [0.25, 0.125] {
        let dom = ball(2, 1.0, h);
        let u = dirichlet_solve(&dom, &GridFunction::constant(&dom, 1.0), &|_| 0.0, &SolveConfig::new(2)).unwrap();
        let err = sup_over(&dom, |i| (u.get(i) - (abs2(&dom.coords(i)) - 1.0)).abs());
        pass &= err <= 10.0 * h * h;
        detail.push_str(&format!("grid h={h} err {err:.2e}; "));
    }
    let p = radial_solve(3, 2, 1.0, &|t| 20.0 / 3.0 * t * t, 1.0, 200).unwrap();
    let err = p
        .knots
        .iter()
        .zip(&p.g)
        .map(|(t, g)| (g - t * t).abs())
        .fold(0.0, f64::max);
    pass &= err <= 5e-3;
    detail.push_str(&format!("radial err {err:.2e}"));
    verdict(3, "exact-solution regression", pass, &detail);
    assert!(pass);
}

#[test]
fn c04_comparison_principle() {
    let h = 0.125;
    let dom = ball(2, 1.0, h);
    let cfg = SolveConfig::new(2);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..5 {
        let c: [f64; 6] = std::array::from_fn(|_| rng.gen_range(0.0..1.0));
        let (a, b) = (rng.gen_range(-1.0..1.0), rng.gen_range(0.0..1.0));
        let f1 = GridFunction::from_fn(&dom, |z| 0.2 + c[0] + c[1] * abs2(z) + c[2] * z[0] * z[0]);
        let f2 = GridFunction::from_fn(&dom, |z| {
            0.2 + c[0] + c[1] * abs2(z) + c[2] * z[0] * z[0] + c[3] + c[4] * z[3] * z[3] + c[5] * z[1].abs()
        });
        let phi = move |z: &[f64]| a * z[0] + b * (z[2] * z[2] + z[3] * z[3]);
        let u1 = dirichlet_solve(&dom, &f1, &phi, &cfg).unwrap();
        let u2 = dirichlet_solve(&dom, &f2, &phi, &cfg).unwrap();
        worst = worst.max(sup_over(&dom, |i| u2.get(i) - u1.get(i)));
    }
    let pass = worst <= 10.0 * h * h;
    verdict(4, "comparison principle", pass, &format!("max(u2 - u1) {worst:.2e}"));
    assert!(pass);
}

#[test]
fn c05_energy_monotonicity() {
    let dom = ball(2, 1.0, 0.125);
    let cfg = SolveConfig::new(2);
    let phi = |z: &[f64]| z[0] * z[0] + z[1] * z[1];
    let u = dirichlet_solve(&dom, &GridFunction::constant(&dom, 1.0), &phi, &cfg).unwrap();
    let v = perron_envelope(&dom, &phi, &cfg).unwrap();
    let r = energy_comparison(&u, &v).unwrap();
    let pass = r.mass_v <= r.mass_u * 1.05 && r.grad_v <= r.grad_u * 1.05;
    verdict(
        5,
        "energy monotonicity",
        pass,
        &format!(
            "mass {:.4} <= {:.4}, grad {:.4} <= {:.4}",
            r.mass_v, r.mass_u, r.grad_v, r.grad_u
        ),
    );
    assert!(pass);
}

#[test]
fn c06_barrier_certification() {
    let domains = [
        DefiningFunction::ball(2, 1.0).unwrap(),
        DefiningFunction::ball(3, 1.0).unwrap(),
        DefiningFunction::ellipsoid(vec![1.0, 2.0, 3.0]).unwrap(),
    ];
    let data: [(&str, f64, fn(&[f64]) -> f64); 2] = [("re_z1", 1.0, |z| z[0]), ("kink", 0.5, |z| z[0].abs().sqrt())];
    let mut pass = true;
    let mut detail = String::new();
    for spec in &domains {
        let dom = make_domain(spec, 0.25).unwrap();
        let m = 2;
        let points = sample_boundary(spec, 200);
        for (name, two_alpha, phi) in &data {
            let samples = BoundarySample::new(spec, points.clone(), phi).unwrap();
            let mut params = BarrierParams {
                m_norm: samples.holder_norm(*two_alpha),
                k: 1.0,
                alpha: two_alpha / 2.0,
                tau: 0.0,
                kind: BarrierKind::MshB,
            };
            params.k = choose_k(&dom, &samples, &params).unwrap();
            let mut cone_ok = 0;
            let mut cone_total = 0;
            let mut above: f64 = f64::NEG_INFINITY;
            let mut pinned = true;
            for xi in points.iter().step_by(25) {
                let b = msh_barrier(spec, phi, xi, &params).unwrap();
                let cc = msh_cone_check(&b, &dom, m).unwrap();
                cone_ok += cc.passed;
                cone_total += cc.nodes;
                pinned &= b.value(xi) == phi(xi);
                for (p, v) in samples.points.iter().zip(&samples.values) {
                    above = above.max(b.value(p) - v);
                }
            }
            let ok = cone_ok == cone_total && pinned && above <= 1e-6;
            pass &= ok;
            detail.push_str(&format!(
                "{:?}/{name}: cone {cone_ok}/{cone_total}, max(b-phi) {above:.1e}; ",
                spec.kind()
            ));
        }
    }
    verdict(6, "barrier certification", pass, &detail);
    assert!(pass);
}

#[test]
fn c07_envelope_sandwich() {
    let h = 0.125;
    let tol = 10.0 * h * h;
    let dom = ball(2, 1.0, h);
    let phi = |z: &[f64]| z[0] * z[0] + z[1] * z[1];
    let out = dirichlet_solve_detailed(&dom, &GridFunction::zeros(&dom), &phi, &SolveConfig::new(2)).unwrap();
    let h_m = out.u;
    let (lower, upper) = lipschitz_envelope_bounds(&GridFunction::from_fn(&dom, phi), out.init_constant);
    let lip = sup_over(&dom, |i| (lower.get(i) - h_m.get(i)).max(h_m.get(i) - upper.get(i)));

    let h_1 = perron_envelope(&dom, &phi, &SolveConfig::new(1)).unwrap();
    let samples = BoundarySample::from_lattice(&dom, &phi, 400).unwrap();
    let mut params = BarrierParams {
        m_norm: samples.holder_norm(1.0),
        k: 1.0,
        alpha: 0.5,
        tau: 0.0,
        kind: BarrierKind::MshB,
    };
    params.k = choose_k(&dom, &samples, &params).unwrap();
    let (b, _) = barrier_envelope(&dom, &samples, &params).unwrap();
    let chain = sup_over(&dom, |i| (b.get(i) - h_m.get(i)).max(h_m.get(i) - h_1.get(i)));
    let pass = lip <= tol && chain <= tol;
    verdict(
        7,
        "envelope sandwich",
        pass,
        &format!("lipschitz excess {lip:.2e}, chain excess {chain:.2e}, tol {tol:.2e}"),
    );
    assert!(pass);
}

#[test]
fn c08_holder_prediction() {
    let deltas: Vec<f64> = (0..6).map(|k| 0.02 * 1.6f64.powi(k)).collect();
    let a_in = ExponentInputs::new(3, 2, 3.0, 1.0, 0.0).unwrap();
    let pa = radial_solve(3, 2, 1.0, &|_| 1.0, 0.0, 400).unwrap();
    let ra = radial_holder_fit(&pa, &deltas, Some(&a_in)).unwrap();
    let need_a = 0.9 * predictions(&a_in).unwrap().case_a;

    let b_in = ExponentInputs::new(3, 2, 3.0, 1.0, 0.4).unwrap();
    let f = DensitySpec::BoundarySingular { nu: 0.4, clamp: 1e6 };
    let fb = f.radial(2, 1.0);
    let pb = radial_solve(3, 2, 1.0, &fb, 0.0, 400).unwrap();
    let rb = radial_holder_fit(&pb, &deltas, Some(&b_in)).unwrap();
    let need_b = 0.9 * predictions(&b_in).unwrap().case_b;

    let pass = ra.fitted_alpha >= need_a && ra.r2 >= 0.9 && rb.fitted_alpha >= need_b;
    verdict(
        8,
        "holder prediction",
        pass,
        &format!(
            "(a) alpha {:.3} >= {need_a:.3}, r2 {:.3}; (b) alpha {:.3} >= {need_b:.3}",
            ra.fitted_alpha, ra.r2, rb.fitted_alpha
        ),
    );
    assert!(pass);
}

#[test]
fn c09_volume_capacity() {
    let radii = [0.15, 0.2, 0.25, 0.3];
    let dom = ball(2, 1.0, 0.125);
    let grid = volume_capacity_check(&dom, &radii, &SolveConfig::new(2)).unwrap();
    let radial = volume_capacity_radial(3, 2, 1.0, &radii).unwrap();
    let spread = |r: &[f64]| {
        r.iter().cloned().fold(f64::NEG_INFINITY, f64::max) / r.iter().cloned().fold(f64::INFINITY, f64::min)
    };
    let pass = grid.bounded && radial.bounded;
    verdict(
        9,
        "volume-capacity",
        pass,
        &format!(
            "grid tau {:.2} spread {:.2}; radial tau {:.2} spread {:.2}",
            grid.tau,
            spread(&grid.ratios),
            radial.tau,
            spread(&radial.ratios)
        ),
    );
    assert_eq!(radial.tau, default_tau(3, 2));
    assert!(pass);
}

#[test]
fn c10_sublevel_and_stability() {
    let dom = ball(2, 1.0, 0.125);
    let cfg = SolveConfig::new(2);
    let f = GridFunction::constant(&dom, 1.0);
    let phi = dirichlet_solve(&dom, &f, &|_| 0.0, &cfg).unwrap();
    let b = GridFunction::from_fn(&dom, bump);
    let inputs = ExponentInputs::new(2, 2, 4.0, 1.0, 0.0).unwrap();

    let mut sublevel_ok = true;
    let mut worst: f64 = 0.0;
    let mut ratios = Vec::new();
    for eps in [0.1, 0.05, 0.025] {
        let psi = phi.zip_with(&b, |p, q| p + eps * q).unwrap();
        for s in [0.0, 0.25 * eps, 0.5 * eps] {
            for t in [0.25 * eps, 0.5 * eps] {
                let r = sublevel_capacity_check(&phi, &psi, &f, s, t, &cfg).unwrap();
                sublevel_ok &= r.holds(0.1);
                if r.rhs > 0.0 {
                    worst = worst.max(r.lhs / r.rhs);
                }
            }
        }
        ratios.push(stability_ratio(&phi, &psi, &inputs, 0.9).unwrap().ratio);
    }
    let mut sorted = ratios.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[1];
    let stable = ratios.iter().all(|&r| r <= 10.0 * median);
    let pass = sublevel_ok && stable;
    verdict(
        10,
        "sublevel and stability",
        pass,
        &format!("max lhs/rhs {worst:.3}; stability ratios {ratios:.3?}"),
    );
    assert!(pass);
}

#[test]
fn c11_iteration_bound() {
    let exact = s_infinity(1.0, 1.0, 1.0).unwrap() == 4.0
        && (s_infinity(1.0, 1.0, 2.0).unwrap() - 8.0 / 3.0).abs() <= 1e-15
        && s_infinity(0.0, 0.7, 1.5).unwrap() == 0.0;

    let dom = ball(2, 1.0, 0.125);
    let cfg = SolveConfig::new(2);
    let phi = dirichlet_solve(&dom, &GridFunction::constant(&dom, 1.0), &|_| 0.0, &cfg).unwrap();
    let psi = GridFunction::from_fn(&dom, |z| 0.3 * bump(z))
        .zip_with(&phi, |a, b| a + b)
        .unwrap();
    let eps = 0.05;
    let s: Vec<f64> = (0..48).map(|k| 0.025 * k as f64).collect();
    let g = capacity_ladder(&phi, &psi, eps, &s, &cfg).unwrap();
    let alpha = 0.5;
    let b = hypothesis_constant(&s, &g, alpha);
    let r = iteration_bound_check(&s, &g, b, alpha).unwrap();
    let pass = exact && r.vanishes && r.samples_beyond > 0;
    verdict(
        11,
        "iteration bound",
        pass,
        &format!(
            "s_inf {:.3}, {} samples beyond, max {:.1e}",
            r.s_infinity, r.samples_beyond, r.max_beyond
        ),
    );
    assert!(pass);
}

#[test]
fn c12_regularization_identities() {
    let h = 0.0625;
    let tol = 10.0 * h * h;
    let dom = ball(2, 1.0, h);
    let delta = 4.0 * h;
    let cases: [(&str, fn(&[f64]) -> f64, fn(&[f64], f64) -> f64, fn(&[f64], f64) -> f64); 3] = [
        ("constant", |_| 3.0, |_, _| 3.0, |_, _| 3.0),
        (
            "linear",
            |z| z[0] - 2.0 * z[3],
            |z, d| z[0] - 2.0 * z[3] + 5f64.sqrt() * d,
            |z, _| z[0] - 2.0 * z[3],
        ),
        (
            "abs2",
            abs2,
            |z, d| (abs2(z).sqrt() + d).powi(2),
            // Mean of |w|² over the 4-ball of radius d around z.
            |z, d| abs2(z) + 2.0 * d * d / 3.0,
        ),
    ];
    let omega = omega_delta(&dom, delta);
    let mut pass = true;
    let mut detail = String::new();
    for (name, u0, sup_exact, avg_exact) in cases {
        let u = GridFunction::from_fn(&dom, u0);
        let s = sup_convolution(&u, delta).unwrap();
        let a = ball_average(&u, delta).unwrap();
        let (mut es, mut ea): (f64, f64) = (0.0, 0.0);
        for &i in &omega {
            let z = dom.coords(i);
            es = es.max((s.get(i) - sup_exact(&z, delta)).abs());
            ea = ea.max((a.get(i) - avg_exact(&z, delta)).abs());
        }
        pass &= es <= tol && ea <= tol;
        detail.push_str(&format!("{name} {es:.1e}/{ea:.1e}; "));
    }

    let u = GridFunction::from_fn(&dom, |z| z[0].abs().sqrt() + abs2(z) - z[2]);
    let mut ordered = 0;
    let mut total = 0;
    for d in default_deltas(h, dom.spec().inradius()) {
        let s = sup_convolution(&u, d).unwrap();
        let a = ball_average(&u, d).unwrap();
        for i in omega_delta(&dom, d) {
            total += 1;
            ordered += usize::from(a.get(i) <= s.get(i));
        }
    }
    pass &= ordered == total;
    detail.push_str(&format!("avg <= sup at {ordered}/{total}"));
    verdict(12, "regularization identities", pass, &detail);
    assert!(pass);
}
