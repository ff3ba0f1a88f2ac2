use corround::rounding::io::{format_matrix, parse_matrix};
use corround::rounding::{
    binomial_slack, check_bounds, guarantee_dilate, guarantee_force_open, mc_estimate, round, select_scheme,
    MarginalMatrix, Scheme,
};
use corround::RandomStream;
use proptest::prelude::*;

/// Rows of `k` nonnegative weights normalized to 1, with some exact zeros.
fn matrix_strategy(max_q: usize, max_k: usize) -> impl Strategy<Value = MarginalMatrix> {
    (1..=max_q, 1..=max_k)
        .prop_flat_map(|(q, k)| proptest::collection::vec(proptest::collection::vec(0u32..5, k), q))
        .prop_map(|mut rows| {
            for row in &mut rows {
                if row.iter().all(|&w| w == 0) {
                    row[0] = 1;
                }
            }
            let rows: Vec<Vec<f64>> = rows
                .iter()
                .map(|r| {
                    let s: u32 = r.iter().sum();
                    r.iter().map(|&w| w as f64 / s as f64).collect()
                })
                .collect();
            MarginalMatrix::from_rows(&rows).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn assignments_stay_in_support(m in matrix_strategy(8, 6), seed in any::<u64>()) {
        let mut rng = RandomStream::new(seed);
        for scheme in Scheme::ALL {
            let out = round(scheme, &m, &mut rng);
            prop_assert_eq!(out.z.len(), m.items());
            for (i, &k) in out.z.iter().enumerate() {
                prop_assert!(m.get(i, k) > 0.0, "{} put item {} on FC {} with u = 0", scheme, i, k);
            }
        }
    }

    #[test]
    fn same_seed_same_outcome(m in matrix_strategy(6, 5), seed in any::<u64>()) {
        for scheme in Scheme::ALL {
            let a = round(scheme, &m, &mut RandomStream::new(seed));
            let b = round(scheme, &m, &mut RandomStream::new(seed));
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn usage_bound_is_column_max(m in matrix_strategy(8, 6)) {
        for k in 0..m.fcs() {
            let col_max = (0..m.items()).map(|i| m.get(i, k)).fold(0.0, f64::max);
            prop_assert_eq!(m.usage_bounds_slice()[k], col_max);
        }
    }

    #[test]
    fn selection_takes_the_smaller_guarantee(m in matrix_strategy(10, 6)) {
        let c = select_scheme(&m);
        let d = guarantee_dilate(m.items());
        let f = guarantee_force_open(&m);
        prop_assert!((c.ratio - d.min(f).min(c.js)).abs() < 1e-12);
        prop_assert_eq!(c.scheme, if d <= f { Scheme::Dilate } else { Scheme::ForceOpen });
        prop_assert!(f >= 1.0 && f <= m.fcs() as f64 + 1e-12);
    }

    #[test]
    fn text_format_round_trips(m in matrix_strategy(6, 6)) {
        let back = parse_matrix(&format_matrix(&m)).unwrap();
        for (a, b) in back.as_slice().iter().zip(m.as_slice()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn deterministic_rows_are_followed_exactly() {
    let m = MarginalMatrix::from_rows(&[[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]).unwrap();
    for scheme in Scheme::ALL {
        let est = mc_estimate(&m, scheme, 2_000, 3);
        assert_eq!(est.max_marginal_error(&m), 0.0, "{scheme}");
        assert_eq!(est.usage, vec![1.0, 1.0, 0.0]);
    }
}

#[test]
fn independent_usage_matches_product_formula() {
    let m = MarginalMatrix::from_rows(&[[0.2, 0.5, 0.3], [0.6, 0.1, 0.3], [0.0, 0.4, 0.6]]).unwrap();
    let n = 400_000;
    let est = mc_estimate(&m, Scheme::Independent, n, 8);
    for k in 0..3 {
        let unused: f64 = (0..3).map(|i| 1.0 - m.get(i, k)).product();
        let exact = 1.0 - unused;
        assert!((est.usage[k] - exact).abs() <= binomial_slack(exact, n), "fc {k}: {} vs {exact}", est.usage[k]);
    }
}

/// With two FCs, item `i` picks FC 0 exactly when `E_0 / E_1` falls below
/// a per-item threshold, so FC 0 is used with probability
/// `r / (1 + r)` for `r = max_i u_0i / u_1i`, which is `y_0`.
#[test]
fn dilate_is_exact_on_two_fcs() {
    let m = MarginalMatrix::from_rows(&[[0.3, 0.7], [0.55, 0.45], [0.1, 0.9], [0.8, 0.2]]).unwrap();
    let n = 400_000;
    let est = mc_estimate(&m, Scheme::Dilate, n, 21);
    let r0 = (0..4).map(|i| m.get(i, 0) / m.get(i, 1)).fold(0.0, f64::max);
    let r1 = (0..4).map(|i| m.get(i, 1) / m.get(i, 0)).fold(0.0, f64::max);
    let oracle = [r0 / (1.0 + r0), r1 / (1.0 + r1)];
    for k in 0..2 {
        assert!((oracle[k] - m.usage_bounds_slice()[k]).abs() < 1e-12);
        assert!((est.usage[k] - oracle[k]).abs() <= binomial_slack(oracle[k], n), "fc {k}");
    }
}

#[test]
fn marginals_and_bounds_hold_on_a_random_battery() {
    let mut rng = RandomStream::new(5);
    for t in 0..6 {
        let q = 2 + rng.index(6);
        let k = 2 + rng.index(5);
        let rows: Vec<Vec<f64>> = (0..q)
            .map(|_| {
                let w: Vec<f64> = (0..k).map(|_| if rng.bernoulli(0.3) { 0.0 } else { rng.exponential(1.0) }).collect();
                let s: f64 = w.iter().sum();
                if s == 0.0 {
                    (0..k).map(|j| if j == 0 { 1.0 } else { 0.0 }).collect()
                } else {
                    w.iter().map(|v| v / s).collect()
                }
            })
            .collect();
        let m = MarginalMatrix::from_rows(&rows).unwrap();
        for scheme in [Scheme::Dilate, Scheme::ForceOpen] {
            let est = mc_estimate(&m, scheme, 100_000, 100 + t);
            let c = check_bounds(&m, &est);
            assert!(c.passed(), "instance {t} {scheme}: {c:?}");
        }
    }
}

#[test]
fn malformed_matrices_are_rejected() {
    assert!(MarginalMatrix::from_rows(&[[0.5, 0.4]]).is_err());
    assert!(MarginalMatrix::from_rows(&[[1.5, -0.5]]).is_err());
    assert!(parse_matrix("2 2\n0.5 0.5\n").is_err());
    assert!(parse_matrix("1 2\n0.5 x\n").is_err());
    assert!("sideways".parse::<Scheme>().is_err());
}
