//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use corround::bench::{doubling_items, max_fit_deviation, random_dense_instance, sweep, time_scheme};
use corround::experiment::{run_campaign, CampaignConfig, CampaignResult};
use corround::fulfillment::{scale, solve_dlp, Policy};
use corround::instance_gen::{generate, GeneratorConfig};
use corround::lp::{LpProblem, LpStatus, Relation};
use corround::optimal::solve_optimal_alpha;
use corround::rounding::{
    binomial_slack, check_bounds, guarantee, guarantee_dilate, guarantee_force_open, mc_estimate, validate,
    MarginalMatrix, McEstimate, Scheme,
};
use corround::set_cover::{estimate_cover, hard_instance, FractionalCover, SetCoverInstance};
use corround::RandomStream;

const MC_SAMPLES: usize = 1_000_000;
const COVER_SAMPLES: usize = 100_000;
const REPLICATIONS: usize = 30;

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

/// Rows of exponential weights with roughly `1 - density` of entries zeroed.
fn random_matrix(rng: &mut RandomStream, items: usize, fcs: usize, density: f64) -> MarginalMatrix {
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

struct Battery {
    matrices: Vec<MarginalMatrix>,
    dilate: Vec<McEstimate>,
    force_open: Vec<McEstimate>,
}

fn battery() -> Battery {
    let mut rng = RandomStream::new(1_000_001);
    let matrices: Vec<MarginalMatrix> = (0..20)
        .map(|_| {
            let q = 1 + rng.index(10);
            let k = 2 + rng.index(7);
            random_matrix(&mut rng, q, k, 0.6)
        })
        .collect();
    let run = |scheme| {
        matrices
            .iter()
            .enumerate()
            .map(|(t, m)| mc_estimate(m, scheme, MC_SAMPLES, 50 + t as u64))
            .collect::<Vec<_>>()
    };
    Battery {
        dilate: run(Scheme::Dilate),
        force_open: run(Scheme::ForceOpen),
        matrices,
    }
}

fn marginal_exactness(b: &Battery) -> Verdict {
    let mut worst = 0.0_f64;
    let mut bad = 0;
    let mut checked = 0;
    for (t, m) in b.matrices.iter().enumerate() {
        for est in [&b.dilate[t], &b.force_open[t]] {
            for (&u, &p) in m.as_slice().iter().zip(&est.marginals) {
                checked += 1;
                let slack = binomial_slack(u, MC_SAMPLES);
                if (p - u).abs() > slack {
                    bad += 1;
                }
                if slack > 0.0 {
                    worst = worst.max((p - u).abs() / slack);
                }
            }
        }
    }
    Verdict::new(
        bad == 0,
        format!("{checked} entries, {bad} outside 4 sigma, worst |err| = {:.2} of the 4-sigma band", worst),
    )
}

fn competitive_bounds(b: &Battery) -> Verdict {
    let mut violations = 0;
    let mut worst = [0.0_f64; 2];
    for (t, m) in b.matrices.iter().enumerate() {
        for (s, est) in [&b.dilate[t], &b.force_open[t]].into_iter().enumerate() {
            violations += check_bounds(m, est).usage_violations;
            let ratio = guarantee(est.scheme, m);
            for k in m.active_fcs() {
                worst[s] = worst[s].max(est.usage[k] / (ratio * m.usage_bounds_slice()[k]));
            }
        }
    }
    Verdict::new(
        violations == 0,
        format!(
            "{violations} violations; largest usage / bound: dilate {:.3}, force-open {:.3}",
            worst[0], worst[1]
        ),
    )
}

fn tail_bound(b: &Battery) -> Verdict {
    let mut violations = 0;
    let mut points = 0;
    for (m, est) in b.matrices.iter().zip(&b.dilate).take(10) {
        let slack = binomial_slack(0.5, est.samples);
        for &(t, p) in &est.tail {
            points += 1;
            if p > m.items() as f64 * (-t).exp() + slack {
                violations += 1;
            }
        }
    }
    Verdict::new(violations == 0, format!("{points} grid points on 10 instances, {violations} above q e^-t"))
}

/// Optimal ratio over all distributions on deterministic assignments,
/// written directly over the `prod_i |supp(u_i)|` assignments.
fn assignment_lp_alpha(m: &MarginalMatrix) -> f64 {
    let supports: Vec<Vec<usize>> = m
        .rows()
        .map(|row| row.iter().enumerate().filter(|(_, &u)| u > 0.0).map(|(k, _)| k).collect())
        .collect();
    let mut assignments: Vec<Vec<usize>> = vec![Vec::new()];
    for s in &supports {
        assignments = assignments
            .iter()
            .flat_map(|a| s.iter().map(move |&k| [a.as_slice(), &[k]].concat()))
            .collect();
    }
    let mut p = LpProblem::new(0);
    let alpha = p.add_var(1.0, 0.0, f64::INFINITY);
    let vars: Vec<usize> = assignments.iter().map(|_| p.add_var(0.0, 0.0, 1.0)).collect();
    for (i, s) in supports.iter().enumerate() {
        for &k in s {
            let terms = assignments
                .iter()
                .zip(&vars)
                .filter(|(a, _)| a[i] == k)
                .map(|(_, &v)| (v, 1.0))
                .collect();
            p.add_constraint(terms, Relation::Eq, m.get(i, k));
        }
    }
    for k in 0..m.fcs() {
        let mut terms: Vec<(usize, f64)> = assignments
            .iter()
            .zip(&vars)
            .filter(|(a, _)| a.contains(&k))
            .map(|(_, &v)| (v, 1.0))
            .collect();
        terms.push((alpha, -m.usage_bounds_slice()[k]));
        p.add_constraint(terms, Relation::Le, 0.0);
    }
    let sol = p.solve().unwrap();
    assert_eq!(sol.status, LpStatus::Optimal);
    sol.x[alpha]
}

/// `alpha >= (smallest set of FCs meeting every support) / sum_k y_k`.
fn cover_lower_bound(m: &MarginalMatrix) -> f64 {
    let supports: Vec<u32> = m
        .rows()
        .map(|row| row.iter().enumerate().filter(|(_, &u)| u > 0.0).fold(0, |acc, (k, _)| acc | 1 << k))
        .collect();
    let min_cover = (1u32..1 << m.fcs())
        .filter(|s| supports.iter().all(|sup| sup & s != 0))
        .map(u32::count_ones)
        .min()
        .unwrap();
    f64::from(min_cover) / m.usage_bounds_slice().iter().sum::<f64>()
}

fn optimal_lp_oracle() -> Verdict {
    let mut notes = Vec::new();
    let mut ok = true;
    let single = validate(&[[0.3, 0.7]]).unwrap();
    let a = solve_optimal_alpha(&single).unwrap().alpha;
    ok &= (a - 1.0).abs() < 1e-6;
    notes.push(format!("q=1: {a:.6}"));

    let hand = validate(&[[0.3, 0.7], [0.6, 0.4]]).unwrap();
    let a = solve_optimal_alpha(&hand).unwrap().alpha;
    ok &= (a - 1.0).abs() < 1e-6 && (assignment_lp_alpha(&hand) - 1.0).abs() < 1e-6;
    notes.push(format!("K=2,q=2: {a:.6}"));

    let pairs = validate(&[[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]]).unwrap();
    let a = solve_optimal_alpha(&pairs).unwrap().alpha;
    let brute = assignment_lp_alpha(&pairs);
    let lower = cover_lower_bound(&pairs);
    ok &= (a - 4.0 / 3.0).abs() < 1e-6 && (brute - 4.0 / 3.0).abs() < 1e-6 && (lower - 4.0 / 3.0).abs() < 1e-12;
    notes.push(format!("pairs: {a:.9} (brute force {brute:.9}, cover bound {lower:.9})"));

    let mut rng = RandomStream::new(4_000_004);
    let mut worst_gap = f64::INFINITY;
    for _ in 0..20 {
        let k = 2 + rng.index(7);
        let q = 1 + rng.index(4);
        let m = random_matrix(&mut rng, q, k, 0.5);
        let sol = solve_optimal_alpha(&m).unwrap();
        let bound = guarantee_dilate(q).min(guarantee_force_open(&m));
        ok &= sol.alpha <= bound + 1e-7 && sol.alpha >= cover_lower_bound(&m).max(1.0) - 1e-7;
        ok &= sol.verify(&m).is_ok();
        worst_gap = worst_gap.min(bound - sol.alpha);
    }
    notes.push(format!("20 random K<=8: min(guarantee) - alpha >= {worst_gap:.4}"));
    Verdict::new(ok, notes.join("; "))
}

/// Random set system with a feasible fractional cover `y_k = max_i p_ik`
/// built from a random split `p_i` of each element over its sets.
fn random_cover(elements: usize, sets: usize, density: f64, rng: &mut RandomStream) -> (SetCoverInstance, FractionalCover) {
    let mut members = vec![Vec::new(); sets];
    for e in 0..elements {
        let mut any = false;
        for m in members.iter_mut() {
            if rng.bernoulli(density) {
                m.push(e);
                any = true;
            }
        }
        if !any {
            members[rng.index(sets)].push(e);
        }
    }
    members.iter_mut().for_each(|m| m.sort_unstable());
    let sc = SetCoverInstance::new(elements, members).unwrap();
    let mut y = vec![0.0_f64; sets];
    for e in 0..elements {
        let cov = sc.covering(e);
        let w: Vec<f64> = cov.iter().map(|_| rng.exponential(1.0)).collect();
        let s: f64 = w.iter().sum();
        for (&k, wk) in cov.iter().zip(&w) {
            y[k] = y[k].max(wk / s);
        }
    }
    (sc, FractionalCover(y))
}

fn set_cover() -> Verdict {
    let mut rng = RandomStream::new(5_000_005);
    let slack = binomial_slack(0.5, COVER_SAMPLES);
    let (mut infeasible, mut violations) = (0, 0);
    let mut worst = 0.0_f64;
    for t in 0..10 {
        let q = 4 + rng.index(9);
        let k = 3 + rng.index(6);
        let (sc, y) = random_cover(q, k, 0.35, &mut rng);
        let est = estimate_cover(&sc, &y, Scheme::Dilate, COVER_SAMPLES, 500 + t).unwrap();
        infeasible += est.infeasible;
        let bound = guarantee_dilate(q);
        for (&u, &yk) in est.usage.iter().zip(&y.0) {
            if u > bound * yk + slack {
                violations += 1;
            }
            if yk > 0.0 {
                worst = worst.max(u / (bound * yk));
            }
        }
    }
    Verdict::new(
        infeasible == 0 && violations == 0,
        format!("10 x {COVER_SAMPLES} draws: {infeasible} infeasible, {violations} usage violations, largest usage / bound {worst:.3}"),
    )
}

fn hard_witness() -> Verdict {
    let d = 2;
    let mut ok = true;
    let mut notes = Vec::new();
    for k in [4, 8, 16] {
        let (sc, y) = hard_instance(d, k).unwrap();
        let witness = d as f64 * (1.0 - d as f64 / k as f64);
        // each usage has 4-sigma slack; the ratio divides it by y = 1/d
        let slack = binomial_slack(0.5, COVER_SAMPLES) * d as f64;
        for scheme in [Scheme::Dilate, Scheme::ForceOpen] {
            let est = estimate_cover(&sc, &y, scheme, COVER_SAMPLES, k as u64).unwrap();
            let ratio = est.average_ratio(&y);
            ok &= est.infeasible == 0 && ratio >= witness - slack;
            notes.push(format!("K={k} {scheme}: {ratio:.4} >= {witness:.4}"));
        }
    }
    Verdict::new(ok, notes.join("; "))
}

fn desk_campaign() -> (CampaignConfig, CampaignResult, f64) {
    let cfg = CampaignConfig::new(GeneratorConfig::small_network(5, 0), 5, REPLICATIONS, 2024);
    let t = Instant::now();
    let result = run_campaign(&cfg).expect("desk campaign runs");
    (cfg, result, t.elapsed().as_secs_f64())
}

fn dlp_soundness(cfg: &CampaignConfig, result: &CampaignResult) -> Verdict {
    let mut ok = true;
    let mut tightest = f64::INFINITY;
    for s in &result.per_instance {
        let margin = (s.mean_cost - s.dlp) / s.se_cost.max(1e-12);
        tightest = tightest.min(margin);
        ok &= s.mean_cost >= s.dlp - 3.0 * s.se_cost;
    }
    let mut worst_rel = 0.0_f64;
    for summary in &result.instances {
        let mut gen_cfg = cfg.generator.clone();
        gen_cfg.seed = cfg.instance_seed(summary.index);
        let inst = generate(&gen_cfg).unwrap().instance;
        let doubled = solve_dlp(&scale(&inst, 2.0).unwrap().instance).unwrap().objective;
        let rel = (doubled - 2.0 * summary.dlp).abs() / (2.0 * summary.dlp);
        worst_rel = worst_rel.max(rel);
    }
    ok &= worst_rel <= 1e-6;
    Verdict::new(
        ok,
        format!(
            "5 instances x {REPLICATIONS} reps x 5 policies: min (mean - DLP) / SE = {tightest:.2} (need >= -3); DLP(2θ) vs 2 DLP(θ) rel. diff {worst_rel:.1e}"
        ),
    )
}

fn directional(result: &CampaignResult, seconds: f64) -> Verdict {
    let get = |p| result.aggregate_for(p).expect("policy ran");
    let (d, i, m) = (get(Policy::Dilate), get(Policy::Independent), get(Policy::Myopic));
    let ok = d.mean_loss_pct <= i.mean_loss_pct
        && d.mean_loss_pct <= m.mean_loss_pct
        && d.fcs_per_order <= i.fcs_per_order
        && seconds <= 1800.0;
    Verdict::new(
        ok,
        format!(
            "loss: dilate {:.2}%, independent {:.2}%, myopic {:.2}%; FCs/order: dilate {:.3}, independent {:.3}; campaign {seconds:.1}s",
            d.mean_loss_pct, i.mean_loss_pct, m.mean_loss_pct, d.fcs_per_order, i.fcs_per_order
        ),
    )
}

fn sparse_regime() -> Verdict {
    let gen = GeneratorConfig {
        n: 30,
        fcs: 10,
        p_carry: 0.25,
        ..GeneratorConfig::small_network(5, 0)
    };
    let mut cfg = CampaignConfig::new(gen, 5, REPLICATIONS, 99);
    cfg.policies = vec![Policy::Dilate, Policy::ForceOpen];
    let result = run_campaign(&cfg).expect("low-carry campaign runs");
    let d = result.aggregate_for(Policy::Dilate).unwrap().mean_loss_pct;
    let f = result.aggregate_for(Policy::ForceOpen).unwrap().mean_loss_pct;
    Verdict::new(
        f <= 1.1 * d,
        format!("p_carry 0.25, 10 FCs, 5 instances: force-open {f:.2}% vs dilate {d:.2}% (ratio {:.3})", f / d),
    )
}

fn performance() -> Verdict {
    let mut ok = true;
    let mut notes = Vec::new();
    let big = random_dense_instance(1000, 100, &mut RandomStream::new(10));
    for scheme in [Scheme::Dilate, Scheme::ForceOpen] {
        let points = sweep(scheme, &doubling_items(), 16, 10);
        let dev = max_fit_deviation(&points);
        let ms = time_scheme(scheme, &big, 11, 5, 5e7) / 1e6;
        ok &= dev <= 2.0 && ms < 10.0;
        notes.push(format!("{scheme}: fit deviation {dev:.2}x, 1000x100 call {ms:.3} ms"));
    }
    Verdict::new(ok, notes.join("; "))
}

fn main() -> ExitCode {
    let start = Instant::now();
    let mut failures = 0;
    let mut report = |id: usize, name: &str, v: Verdict| {
        println!("{} [{id}] {name}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        failures += usize::from(!v.pass);
    };

    let b = battery();
    report(1, "marginal exactness", marginal_exactness(&b));
    report(2, "competitive bounds", competitive_bounds(&b));
    report(3, "tail bound", tail_bound(&b));
    drop(b);
    report(4, "instance-optimal LP", optimal_lp_oracle());
    report(5, "set cover rounding", set_cover());
    report(6, "lower-bound witness", hard_witness());
    let (cfg, result, seconds) = desk_campaign();
    report(7, "DLP soundness", dlp_soundness(&cfg, &result));
    report(8, "directional ordering", directional(&result, seconds));
    report(9, "sparse regime", sparse_regime());
    report(10, "linear-time rounding", performance());

    println!("acceptance: {} of 10 passed in {:.1}s", 10 - failures, start.elapsed().as_secs_f64());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
