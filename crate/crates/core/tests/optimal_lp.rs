use std::collections::BTreeMap;

use corround::optimal::{build_lp, solve_optimal_alpha, OptimalSchemeSolution, DEFAULT_FC_CAP};
use corround::rounding::{guarantee_dilate, guarantee_force_open, validate, MarginalMatrix};
use corround::RandomStream;

/// Exhaustive lower bound: every realization uses a set of FCs that covers
/// every item's support, so `sum_k P[k used] >= min cover size`, hence
/// `alpha >= min_cover / sum_k y_k`. Also `alpha >= 1` since `P[k used] >= y_k`.
fn cover_lower_bound(m: &MarginalMatrix) -> f64 {
    let k = m.fcs();
    let supports: Vec<u32> = m
        .rows()
        .map(|row| row.iter().enumerate().filter(|(_, &u)| u > 0.0).fold(0, |acc, (k, _)| acc | 1 << k))
        .collect();
    let min_cover = (1u32..1 << k)
        .filter(|s| supports.iter().all(|sup| sup & s != 0))
        .map(|s| s.count_ones())
        .min()
        .unwrap();
    let ysum: f64 = m.usage_bounds_slice().iter().sum();
    (f64::from(min_cover) / ysum).max(1.0)
}

fn scheme(alpha: f64, items: usize, fcs: usize, z: &[(u32, f64)], u: &[((usize, usize, u32), f64)]) -> OptimalSchemeSolution {
    OptimalSchemeSolution {
        alpha,
        items,
        fcs,
        z: z.iter().copied().collect::<BTreeMap<_, _>>(),
        u_cond: u.iter().copied().collect::<BTreeMap<_, _>>(),
    }
}

fn pairs_instance() -> MarginalMatrix {
    validate(&[[0.5, 0.5, 0.0], [0.5, 0.0, 0.5], [0.0, 0.5, 0.5]]).unwrap()
}

#[test]
fn hand_solution_two_fcs() {
    let m = validate(&[[0.6, 0.4], [0.3, 0.7]]).unwrap();
    // z({0}) = 0.3, z({1}) = 0.4, z({0,1}) = 0.3
    let hand = scheme(
        1.0,
        2,
        2,
        &[(0b01, 0.3), (0b10, 0.4), (0b11, 0.3)],
        &[
            ((0, 0, 0b01), 0.3),
            ((0, 1, 0b01), 0.3),
            ((1, 0, 0b10), 0.4),
            ((1, 1, 0b10), 0.4),
            ((0, 0, 0b11), 0.3),
            ((1, 1, 0b11), 0.3),
        ],
    );
    hand.verify(&m).unwrap();
    assert_eq!(cover_lower_bound(&m), 1.0);
    let s = solve_optimal_alpha(&m).unwrap();
    assert!((s.alpha - 1.0).abs() < 1e-9, "alpha = {}", s.alpha);
}

#[test]
fn pairs_at_half_is_four_thirds() {
    let m = pairs_instance();
    // oracle: lower bound 2 / 1.5 and a uniform scheme over the 2-subsets
    let lb = cover_lower_bound(&m);
    assert!((lb - 4.0 / 3.0).abs() < 1e-15);
    let third = 1.0 / 3.0;
    let sixth = 1.0 / 6.0;
    let hand = scheme(
        4.0 / 3.0,
        3,
        3,
        &[(0b011, third), (0b101, third), (0b110, third)],
        &[
            // item 0 lives on FCs {0,1}
            ((0, 0, 0b011), sixth),
            ((1, 0, 0b011), sixth),
            ((0, 0, 0b101), third),
            ((1, 0, 0b110), third),
            // item 1 on {0,2}
            ((0, 1, 0b101), sixth),
            ((2, 1, 0b101), sixth),
            ((0, 1, 0b011), third),
            ((2, 1, 0b110), third),
            // item 2 on {1,2}
            ((1, 2, 0b110), sixth),
            ((2, 2, 0b110), sixth),
            ((1, 2, 0b011), third),
            ((2, 2, 0b101), third),
        ],
    );
    hand.verify(&m).unwrap();

    let s = solve_optimal_alpha(&m).unwrap();
    assert!((s.alpha - 4.0 / 3.0).abs() < 1e-6, "alpha = {}", s.alpha);
}

fn random_instance(rng: &mut RandomStream, items: usize, fcs: usize, density: f64) -> MarginalMatrix {
    let rows: Vec<Vec<f64>> = (0..items)
        .map(|_| {
            let mut row: Vec<f64> = (0..fcs)
                .map(|_| if rng.bernoulli(density) { rng.exponential(1.0) } else { 0.0 })
                .collect();
            if row.iter().all(|&v| v == 0.0) {
                row[rng.index(fcs)] = 1.0;
            }
            let s: f64 = row.iter().sum();
            row.iter().map(|v| v / s).collect()
        })
        .collect();
    validate(&rows).unwrap()
}

#[test]
fn two_fcs_are_always_one_competitive() {
    let mut rng = RandomStream::new(2024);
    for _ in 0..25 {
        let q = 1 + rng.index(6);
        let m = random_instance(&mut rng, q, 2, 0.8);
        let s = solve_optimal_alpha(&m).unwrap();
        assert!((s.alpha - 1.0).abs() < 1e-7, "alpha = {} on {:?}", s.alpha, m);
    }
}

#[test]
fn optimum_beats_both_schemes() {
    let mut rng = RandomStream::new(77);
    for _ in 0..20 {
        let k = 2 + rng.index(7);
        let q = 1 + rng.index(4);
        let m = random_instance(&mut rng, q, k, 0.5);
        let s = solve_optimal_alpha(&m).unwrap();
        assert!(s.alpha >= 1.0 - 1e-9);
        assert!(s.alpha >= cover_lower_bound(&m) - 1e-7);
        assert!(s.alpha <= guarantee_dilate(q) + 1e-7, "{} > 1 + ln {q}", s.alpha);
        assert!(s.alpha <= guarantee_force_open(&m) + 1e-7);
    }
}

#[test]
fn lp_size_grows_with_subsets() {
    let m = validate(&vec![vec![0.25; 4]; 3]).unwrap();
    let (p, idx) = build_lp(&m, DEFAULT_FC_CAP).unwrap();
    // 15 subsets, sum over subsets of |S| = 4 * 8 = 32 per item
    assert_eq!(idx.z.len(), 15);
    assert_eq!(idx.u.len(), 32 * 3);
    assert_eq!(p.num_constraints(), 15 * 3 + 12 + 4 + 1);
}

#[test]
fn sampling_matches_solution() {
    let m = validate(&[[0.6, 0.4], [0.3, 0.7]]).unwrap();
    let s = solve_optimal_alpha(&m).unwrap();
    let sampler = s.sampler().unwrap();
    let mut rng = RandomStream::new(5);
    let n = 1_000_000;
    let mut counts = [[0u64; 2]; 2];
    let mut used0 = 0u64;
    for _ in 0..n {
        let (subset, out) = sampler.sample(&mut rng);
        for (i, &k) in out.z.iter().enumerate() {
            counts[i][k] += 1;
            assert!(subset & (1 << k) != 0);
        }
        used0 += u64::from(out.z.contains(&0));
    }
    for i in 0..2 {
        for k in 0..2 {
            let p = counts[i][k] as f64 / n as f64;
            assert!((p - m.get(i, k)).abs() < 0.002, "({i},{k}) {p}");
        }
    }
    let p0 = used0 as f64 / n as f64;
    assert!((p0 - s.usage(0)).abs() < 0.002);
    assert!((p0 - 0.6).abs() < 0.002, "{p0}");
}

#[test]
fn sampling_single_item() {
    let m = validate(&[[0.3, 0.7]]).unwrap();
    let s = solve_optimal_alpha(&m).unwrap();
    let sampler = s.sampler().unwrap();
    let mut rng = RandomStream::new(6);
    let n = 1_000_000;
    let ones = (0..n).filter(|_| sampler.sample(&mut rng).1.z[0] == 1).count();
    assert!((ones as f64 / n as f64 - 0.7).abs() < 0.002);
}
