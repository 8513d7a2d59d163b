//! Sup-convolutions, ball averages, exponent formulas and the collar and
//! L² slope diagnostics.

use std::sync::Arc;

use hessian_core::domain::{make_domain, DefiningFunction, LatticeDomain};
use hessian_core::grid::GridFunction;
use hessian_core::regularity::{
    ball_average, boundary_collar_check, default_deltas, gamma_r, holder_fit, lemma_hele2_check, sup_convolution,
    ExponentInputs,
};
use hessian_core::solver::{dirichlet_solve, SolveConfig};
use proptest::prelude::*;

fn ball(n: usize, h: f64) -> Arc<LatticeDomain> {
    make_domain(&DefiningFunction::ball(n, 1.0).unwrap(), h).unwrap()
}

fn abs2(z: &[f64]) -> f64 {
    z.iter().map(|x| x * x).sum()
}

fn gamma(n: usize, m: usize, p: f64, r: f64) -> f64 {
    gamma_r(&ExponentInputs::new(n, m, p, r, 0.0).unwrap()).unwrap()
}

/// `(n, m, p)` with `p` above `n/m`.
fn exponent_inputs() -> impl Strategy<Value = (usize, usize, f64)> {
    (2usize..=6)
        .prop_flat_map(|n| (Just(n), 1usize..=n))
        .prop_flat_map(|(n, m)| {
            (
                Just(n),
                Just(m),
                (n as f64 / m as f64 + 1e-3)..(n as f64 / m as f64 + 50.0),
            )
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn regularizations_are_ordered(
        a in -1.0f64..1.0,
        b in -1.0f64..1.0,
        c in 0.0f64..1.0,
        w in 0.5f64..4.0,
    ) {
        let h = 0.125;
        let dom = ball(2, h);
        let u = GridFunction::from_fn(&dom, |z| a * z[0] + b * abs2(z) + c * z[1].abs().sqrt() + (w * z[2]).sin());
        let deltas = [0.25, 0.3125, 0.375];
        let sups: Vec<GridFunction> = deltas.iter().map(|&d| sup_convolution(&u, d).unwrap()).collect();
        for (k, &d) in deltas.iter().enumerate() {
            let avg = ball_average(&u, d).unwrap();
            for i in sups[k].support() {
                prop_assert!(sups[k].get(i) >= u.get(i));
                prop_assert!(avg.get(i) <= sups[k].get(i));
            }
        }
        for i in sups[2].support() {
            prop_assert!(sups[0].get(i) <= sups[1].get(i) + 10.0 * h * h);
            prop_assert!(sups[1].get(i) <= sups[2].get(i) + 10.0 * h * h);
        }
    }

    #[test]
    fn gamma_is_increasing_in_r_and_p((n, m, p) in exponent_inputs(), r in 1.0f64..5.0, dr in 0.01f64..2.0, dp in 0.01f64..5.0) {
        prop_assert!(gamma(n, m, p, r + dr) > gamma(n, m, p, r));
        if m < n {
            prop_assert!(gamma(n, m, p + dp, r) > gamma(n, m, p, r));
        }
    }

    #[test]
    fn gamma_exponent_ordering((n, m, p) in exponent_inputs()) {
        let (g1, g2) = (gamma(n, m, p, 1.0), gamma(n, m, p, 2.0));
        prop_assert!(g2 < 0.5);
        prop_assert!(g2 < 2.0 * g1);
    }
}

#[test]
fn gamma_has_the_large_p_limit() {
    for n in 2..=6 {
        for m in 1..=n {
            for r in [1.0, 2.0, 3.5] {
                let g = gamma(n, m, 1e6, r);
                assert!((g - r / (r + n as f64)).abs() < 1e-4, "n = {n}, m = {m}, r = {r}: {g}");
            }
        }
    }
}

#[test]
fn average_slope_tracks_sup_slope() {
    // |z|^{1/2}: both differences peak at the origin, of order δ^{1/2}.
    let dom = ball(2, 0.0625);
    let u = GridFunction::from_fn(&dom, |z| abs2(z).powf(0.25));
    let deltas = [0.125, 0.1875, 0.25, 0.3125];
    let rep = holder_fit(&u, &deltas, None).unwrap();
    for (s, a) in rep.sup_diff_maxu.iter().zip(&rep.sup_diff_avg) {
        assert!(a <= s);
    }
    let avg = rep.alpha_avg.unwrap();
    assert!((rep.fitted_alpha - avg).abs() <= 0.1, "{} vs {avg}", rep.fitted_alpha);
    assert!((rep.fitted_alpha - 0.5).abs() <= 0.02, "{}", rep.fitted_alpha);
}

#[test]
fn l2_slopes_for_a_solution() {
    let h = 0.0625;
    let dom = ball(2, h);
    let u = dirichlet_solve(&dom, &GridFunction::constant(&dom, 1.0), &|_| 0.0, &SolveConfig::new(2)).unwrap();
    let rep = lemma_hele2_check(&u, &default_deltas(h, 1.0)).unwrap();
    assert!(rep.slope_l2 >= 1.9, "{rep:?}");
    assert!(!rep.l1_skipped && rep.slope_l1.unwrap() >= 1.9, "{rep:?}");
}

#[test]
fn collar_check_examples() {
    let dom = ball(2, 0.125);
    let deltas = [0.25, 0.375];
    let lin = GridFunction::from_fn(&dom, |z| z[0]);
    let rep = boundary_collar_check(&lin, &lin, &lin, &deltas, 0.99).unwrap();
    assert!(rep.bounded && rep.ratios.iter().all(|&r| r <= rep.c0), "{rep:?}");

    let b = GridFunction::from_fn(&dom, |z| abs2(z) - 1.0 + z[1]);
    let h_env = GridFunction::from_fn(&dom, |z| z[1]);
    let rep = boundary_collar_check(&b, &h_env, &b, &deltas, 0.5).unwrap();
    assert!(rep.ratios.iter().all(|&r| r <= rep.c0), "{rep:?}");

    let above = b.map(|v| v + 1.0);
    assert!(boundary_collar_check(&b, &h_env, &above, &deltas, 0.5).is_err());
}
