use proptest::prelude::*;
use staffing_core::erlang::{
    erlang_c_continuous, erlang_c_exact, erlang_c_sqrt, erlang_c_table, halfin_whitt, jvlz_bounds, jvlz_upper,
    HwQuantities,
};
use staffing_core::normal;

/// Delay probability from the stationary distribution, summed term by term
/// in log space. Independent of the recursion used by the library.
fn erlang_c_oracle(n: u64, lambda: f64) -> f64 {
    let log_term = |k: u64| k as f64 * lambda.ln() - (1..=k).map(|j| (j as f64).ln()).sum::<f64>();
    let head: Vec<f64> = (0..n).map(log_term).collect();
    let tail = log_term(n) - (1.0 - lambda / n as f64).ln();
    let m = head.iter().cloned().fold(tail, f64::max);
    let total: f64 = head.iter().map(|t| (t - m).exp()).sum::<f64>() + (tail - m).exp();
    (tail - m).exp() / total
}

#[test]
fn exact_matches_stationary_sum() {
    for (n, lambda) in [(1, 0.5), (2, 1.0), (5, 3.2), (40, 35.0), (170, 150.0), (496, 450.0)] {
        let v = erlang_c_exact(n, lambda).unwrap().value();
        let o = erlang_c_oracle(n, lambda);
        // The log-sum oracle itself loses a few digits over hundreds of terms.
        assert!((v - o).abs() <= 1e-11 * o, "n={n} lambda={lambda}: {v} vs {o}");
    }
    // 40-digit references.
    for (n, lambda, r) in [
        (496, 450.0, 0.019_799_898_801_390_050_167_855_894_454_798),
        (235, 200.0, 0.009_619_491_884_421_738_561_113_083_994_727),
    ] {
        let v = erlang_c_exact(n, lambda).unwrap().value();
        assert!(((v - r) / r).abs() <= 1e-13, "n={n}: {v}");
    }
    assert!((erlang_c_exact(2, 1.0).unwrap().value() - 1.0 / 3.0).abs() < 1e-15);
}

#[test]
fn table_matches_pointwise() {
    let table = erlang_c_table(300, 250.0).unwrap();
    for n in 251..=300 {
        assert_eq!(table[n as usize], erlang_c_exact(n, 250.0).unwrap().value());
    }
    assert!(table[..=250].iter().all(|&v| v == 1.0));
}

#[test]
fn continuous_interpolates_integers() {
    for n in 2..=200_u64 {
        let lambda = 0.9 * n as f64;
        let e = erlang_c_exact(n, lambda).unwrap().value();
        let c = erlang_c_continuous(n as f64, lambda).unwrap().value();
        assert!(((c - e) / e).abs() <= 1e-8, "n={n}: {c} vs {e}");
    }
}

#[test]
fn continuous_decreasing_in_servers() {
    let lambda: f64 = 100.0;
    let mut prev = f64::INFINITY;
    for k in 0..=200 {
        let n = lambda + (0.1 + 4.9 * k as f64 / 200.0) * lambda.sqrt();
        let v = erlang_c_continuous(n, lambda).unwrap().value();
        assert!(v < prev);
        prev = v;
    }
}

#[test]
fn halfin_whitt_reference_values() {
    assert!((halfin_whitt(1.0).unwrap().value() - 0.223_361_274_798_260_73).abs() < 1e-14);
    assert!(halfin_whitt(1e-9).unwrap().value() > 1.0 - 1e-8);
    for beta in [0.5, 1.0, 2.0] {
        let hw = halfin_whitt(beta).unwrap().value();
        let c = erlang_c_sqrt(beta, 1e6).unwrap().value();
        assert!((hw - c).abs() <= 1e-3, "beta={beta}: {hw} vs {c}");
    }
}

#[test]
fn upper_bound_tends_to_one_at_zero() {
    for lambda in [10.0, 1e3, 1e5] {
        assert!(jvlz_upper(1e-9, lambda).unwrap().value() > 1.0 - 1e-6);
    }
    assert!(erlang_c_sqrt(1e-9, 100.0).unwrap().value() > 1.0 - 1e-6);
}

#[test]
fn bound_width_shrinks_with_lambda() {
    let width = |lambda: f64| {
        (1..=100)
            .map(|k| jvlz_bounds(0.05 * k as f64, lambda).unwrap().width())
            .fold(0.0, f64::max)
    };
    assert!(width(1e4) < width(1e2));
}

#[test]
fn gamma_over_twelve_n_vanishes() {
    let sup = |lambda: f64| {
        (1..=200)
            .map(|k| {
                let q = HwQuantities::new(0.05 * k as f64, lambda).unwrap();
                q.gamma / (12.0 * q.n - 1.0)
            })
            .fold(0.0, f64::max)
    };
    assert!(sup(1e4) < sup(1e2));
    assert!(sup(1e4) < 1e-3);
}

/// `ρφ(a) + γΦ(a)`, increasing in `β` for large `λ`.
fn phi_mix(beta: f64, lambda: f64) -> f64 {
    let q = HwQuantities::new(beta, lambda).unwrap();
    q.rho * normal::pdf(q.a) + q.gamma * normal::cdf(q.a)
}

#[test]
fn phi_mix_increasing_in_beta() {
    for lambda in [1e3, 1e4, 1e5] {
        let mut prev = phi_mix(0.01, lambda);
        for k in 2..=500 {
            let v = phi_mix(0.01 * k as f64, lambda);
            assert!(v > prev, "lambda={lambda} beta={}", 0.01 * k as f64);
            prev = v;
        }
    }
}

#[test]
fn denominator_bounded_away_from_zero() {
    let mut inf = f64::INFINITY;
    for lambda in [1e3, 1e4, 1e5, 1e6] {
        for k in 1..=400 {
            let q = HwQuantities::new(0.025 * k as f64, lambda).unwrap();
            let v = q.rho * normal::pdf(q.a)
                + q.gamma * normal::cdf(q.a)
                + 2.0 * q.gamma * normal::pdf(q.a) / (3.0 * q.n.sqrt())
                + q.gamma / (12.0 * q.n - 1.0);
            inf = inf.min(v);
        }
    }
    assert!(inf > 0.1, "{inf}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn bounds_sandwich_continuous(beta in 0.01_f64..5.0, log_lambda in 0.0_f64..5.0) {
        let lambda = 10f64.powf(log_lambda);
        let b = jvlz_bounds(beta, lambda).unwrap();
        let c = erlang_c_sqrt(beta, lambda).unwrap().value();
        let slack = 1e-12 * c;
        prop_assert!(b.lower.value() <= c + slack, "lower {} > {}", b.lower.value(), c);
        prop_assert!(c <= b.upper.value() + slack, "{} > upper {}", c, b.upper.value());
        prop_assert!(c > 0.0 && c <= 1.0);
    }

    #[test]
    fn interpolation_at_integers(n in 2_u64..400, load in 0.3_f64..0.99) {
        let lambda = load * n as f64;
        let e = erlang_c_exact(n, lambda).unwrap().value();
        let c = erlang_c_continuous(n as f64, lambda).unwrap().value();
        prop_assert!(((c - e) / e).abs() <= 1e-8);
    }

    #[test]
    fn upper_bound_decreasing_in_beta(beta in 0.01_f64..6.0, step in 1e-3_f64..0.5, log_lambda in 0.0_f64..5.0) {
        let lambda = 10f64.powf(log_lambda);
        prop_assert!(jvlz_upper(beta + step, lambda).unwrap() < jvlz_upper(beta, lambda).unwrap());
    }

    #[test]
    fn upper_bound_decreasing_in_lambda(beta in 0.1_f64..4.0, log_lambda in 0.0_f64..5.0, factor in 1.01_f64..10.0) {
        let lambda = 10f64.powf(log_lambda);
        prop_assert!(jvlz_upper(beta, lambda * factor).unwrap() < jvlz_upper(beta, lambda).unwrap());
    }

    #[test]
    fn continuous_decreasing_in_beta(beta in 0.01_f64..5.0, step in 1e-3_f64..0.5, log_lambda in 0.0_f64..4.0) {
        let lambda = 10f64.powf(log_lambda);
        prop_assert!(erlang_c_sqrt(beta + step, lambda).unwrap() < erlang_c_sqrt(beta, lambda).unwrap());
    }

    #[test]
    fn mills_ratio_consistent(x in -8.0_f64..30.0) {
        let direct = normal::cdf(x) / normal::pdf(x);
        let r = normal::cdf_over_pdf(x);
        if x < 8.0 {
            prop_assert!(((r - direct) / direct).abs() < 1e-12);
        }
        prop_assert!(r > 0.0 && r.is_finite());
    }
}
