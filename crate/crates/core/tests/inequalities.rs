//! Randomized checks of the discrete functional inequalities and the
//! logarithmic-mean facts behind them.

use metastab::discrete::{
    coarse_entropy_bound, rothaus_linearization, split_entropy, split_variance, two_point_lsi_constant,
    weighted_lsi_merged, weighted_lsi_rhs, ComponentStats, DiscreteMeasure, GridFunction,
};
use metastab::means::{h_p, log_mean, log_mean_bounds, upper_bound_check};
use metastab::transport::adaptive_simpson;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngSeed};

const CASES: u32 = 2000;

fn config() -> Config {
    Config { cases: CASES, rng_seed: RngSeed::Fixed(0x5eed_1e55), failure_persistence: None, ..Config::default() }
}

/// Flat simplex sample via normalized exponentials.
fn simplex(m: usize) -> impl Strategy<Value = DiscreteMeasure> {
    prop::collection::vec(1e-6f64..1.0, m).prop_map(|u| {
        let e: Vec<f64> = u.iter().map(|v| -v.ln() + 1e-9).collect();
        DiscreteMeasure::from_masses(&e).unwrap()
    })
}

/// |N(0,1)| samples by Box–Muller.
fn half_normal(m: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec((1e-12f64..1.0, 0.0f64..1.0), m).prop_map(|v| {
        v.iter().map(|(u1, u2)| ((-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()).abs()).collect()
    })
}

fn sized_pair() -> impl Strategy<Value = (DiscreteMeasure, Vec<f64>)> {
    (2usize..=6).prop_flat_map(|m| (simplex(m), half_normal(m)))
}

fn grid_function() -> impl Strategy<Value = GridFunction> {
    (2usize..=4, 8usize..40).prop_flat_map(|(k, nodes)| {
        (prop::collection::vec(0.01f64..1.0, nodes), half_normal(nodes), Just(k), Just(nodes)).prop_map(
            |(masses, values, k, nodes)| {
                // Every component gets at least one node.
                let labels = (0..nodes).map(|i| (i * 7 + i / k) % k).collect();
                GridFunction { values, masses, labels, components: k }
            },
        )
    })
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn weighted_lsi_and_merged_chain((z, f) in sized_pair()) {
        let (lhs, rhs) = weighted_lsi_rhs(&z, &f).unwrap();
        let merged = weighted_lsi_merged(&z, &f).unwrap();
        let slack = 1e-12 * rhs.max(1e-300);
        prop_assert!(lhs <= merged + slack, "lhs {lhs} merged {merged}");
        prop_assert!(merged <= rhs + slack, "merged {merged} rhs {rhs}");
    }

    #[test]
    fn two_component_rhs_is_bernoulli(z in simplex(2), f in half_normal(2)) {
        let (_, rhs) = weighted_lsi_rhs(&z, &f).unwrap();
        let c = two_point_lsi_constant(z.weights()[1]).unwrap();
        prop_assert!(rel_close(rhs, c * (f[0] - f[1]).powi(2), 1e-13));
    }

    #[test]
    fn coarse_entropy_estimate(
        z in simplex(3),
        mean in half_normal(3),
        var in prop::collection::vec(0.0f64..1.0, 3),
    ) {
        let s = ComponentStats {
            second_moment: mean.iter().zip(&var).map(|(m, v)| v + m * m).collect(),
            mean,
            local_variance: var,
            local_entropy: vec![0.0; 3],
        };
        let (lhs, rhs) = coarse_entropy_bound(&z, &s).unwrap();
        prop_assert!(lhs <= rhs * (1.0 + 1e-12) + 1e-15, "{lhs} > {rhs}");
    }

    #[test]
    fn splitting_identities(gf in grid_function()) {
        let z = gf.measure().unwrap();
        let s = gf.stats().unwrap();
        let v = split_variance(&z, &s, Some(&gf)).unwrap();
        prop_assert!((v.total - v.direct.unwrap()).abs() <= 1e-10);
        let e = split_entropy(&z, &s, Some(&gf)).unwrap();
        prop_assert!((e.total - e.direct.unwrap()).abs() <= 1e-10);
    }

    #[test]
    fn two_point_sharpness(p in 0.02f64..0.98) {
        let c = two_point_lsi_constant(p).unwrap();
        let z = DiscreteMeasure::new(vec![1.0 - p, p]).unwrap();
        let mut best: f64 = 0.0;
        for k in 0..=4000 {
            let t = (-6.0 + 12.0 * k as f64 / 4000.0).exp();
            if (t - 1.0).abs() < 1e-6 {
                continue;
            }
            let (lhs, rhs) = weighted_lsi_rhs(&z, &[1.0, t]).unwrap();
            prop_assert!(lhs <= rhs * (1.0 + 1e-12));
            best = best.max(lhs / (1.0 - t).powi(2));
        }
        prop_assert!((best - c).abs() <= 1e-4 * c, "sup {best} vs {c}");
    }

    #[test]
    fn log_mean_ordering(a in 1e-8f64..1e8, b in 1e-8f64..1e8, s in 1e-3f64..1e3) {
        let (g, l, m) = log_mean_bounds(a, b).unwrap();
        prop_assert!(g <= l * (1.0 + 1e-14) && l <= m * (1.0 + 1e-14));
        prop_assert_eq!(log_mean(a, b).unwrap(), log_mean(b, a).unwrap());
        prop_assert!(rel_close(log_mean(s * a, s * b).unwrap(), s * l, 1e-12));
    }

    #[test]
    fn h_p_minimum_at_complement(p in 0.02f64..0.98) {
        let q = 1.0 - p;
        let at = h_p(p, q).unwrap();
        prop_assert!(rel_close(at, log_mean(p, q).unwrap() / (p * q), 1e-10));
        for k in 1..400 {
            let t = k as f64 / 400.0;
            prop_assert!(h_p(p, t).unwrap() >= at * (1.0 - 1e-9), "h_p({p}, {t}) below the value at 1 − p");
        }
        prop_assert!(upper_bound_check(p).unwrap());
    }

    #[test]
    fn rothaus_limit(p in 0.02f64..0.98, g0 in -3.0f64..3.0, g1 in -3.0f64..3.0) {
        let z = DiscreteMeasure::new(vec![1.0 - p, p]).unwrap();
        let (var, extrapolated) = rothaus_linearization(&z, &[g0, g1], (1e-2, 1e-3)).unwrap();
        prop_assert!((var - extrapolated).abs() <= 1e-4 * var.max(1.0), "{var} vs {extrapolated}");
    }

    #[test]
    fn log_mean_integral_representations(a in 1e-3f64..1e3, b in 1e-3f64..1e3) {
        let l = log_mean(a, b).unwrap();
        // Λ(a, b) = ∫₀¹ a^s b^{1−s} ds and 1/Λ(a, b) = ∫₀¹ dt/(ta + (1−t)b).
        let direct = adaptive_simpson(|s| a.powf(s) * b.powf(1.0 - s), 0.0, 1.0, 1e-13 * l);
        let inverse = adaptive_simpson(|t| 1.0 / (t * a + (1.0 - t) * b), 0.0, 1.0, 1e-13 / l);
        prop_assert!((direct - l).abs() <= 1e-10 * l, "{direct} vs {l}");
        prop_assert!((inverse * l - 1.0).abs() <= 1e-10, "{} vs {}", inverse, 1.0 / l);
    }
}
