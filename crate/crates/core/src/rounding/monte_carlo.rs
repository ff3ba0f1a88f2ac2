//! Plain Monte Carlo estimation of scheme marginals, FC usage, and the
//! completion-time tail.

use rayon::prelude::*;
use serde::Serialize;

use super::{guarantee, round_into, MarginalMatrix, Scheme, Workspace};
use crate::rng::RandomStream;

/// Samples per independently seeded chunk. Fixed so that results do not
/// depend on the thread count.
const CHUNK: usize = 1 << 16;

/// Grid `0, 0.5, ..., 10` on which the completion-time tail is recorded.
pub fn tail_grid() -> Vec<f64> {
    (0..=20).map(|s| s as f64 * 0.5).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct McEstimate {
    pub scheme: Scheme,
    pub samples: usize,
    pub items: usize,
    pub fcs: usize,
    /// Row-major empirical `P[Z_i = k]`.
    pub marginals: Vec<f64>,
    /// Empirical `P[FC k used]`.
    pub usage: Vec<f64>,
    /// `(t, P[some item unassigned at t])` for dilate; empty otherwise.
    pub tail: Vec<(f64, f64)>,
}

impl McEstimate {
    pub fn marginal(&self, item: usize, fc: usize) -> f64 {
        self.marginals[item * self.fcs + fc]
    }

    /// Largest `|empirical - u|` over all item/FC pairs.
    pub fn max_marginal_error(&self, m: &MarginalMatrix) -> f64 {
        self.marginals
            .iter()
            .zip(m.as_slice())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Default)]
struct Counts {
    assign: Vec<u64>,
    used: Vec<u64>,
    tail: Vec<u64>,
}

impl Counts {
    fn new(q: usize, k: usize, grid: usize) -> Self {
        Self {
            assign: vec![0; q * k],
            used: vec![0; k],
            tail: vec![0; grid],
        }
    }

    fn merge(mut self, other: Counts) -> Counts {
        for (a, b) in self.assign.iter_mut().zip(other.assign) {
            *a += b;
        }
        for (a, b) in self.used.iter_mut().zip(other.used) {
            *a += b;
        }
        for (a, b) in self.tail.iter_mut().zip(other.tail) {
            *a += b;
        }
        self
    }
}

/// Estimates marginals and FC usage of `scheme` over `samples` runs.
///
/// Chunk `c` of the sample range draws from the stream derived from
/// `(seed, c)`.
pub fn mc_estimate(m: &MarginalMatrix, scheme: Scheme, samples: usize, seed: u64) -> McEstimate {
    assert!(samples >= 1, "need at least one sample");
    let (q, fcs) = (m.items(), m.fcs());
    let grid = tail_grid();
    let track_tail = scheme == Scheme::Dilate;
    let chunks = samples.div_ceil(CHUNK);
    let counts = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let n = CHUNK.min(samples - c * CHUNK);
            let mut rng = RandomStream::derived(seed, c as u64);
            let mut ws = Workspace::new();
            let mut counts = Counts::new(q, fcs, grid.len());
            let mut seen = vec![false; fcs];
            for _ in 0..n {
                round_into(scheme, m, &mut rng, &mut ws);
                seen.iter_mut().for_each(|s| *s = false);
                for (i, &k) in ws.z.iter().enumerate() {
                    counts.assign[i * fcs + k] += 1;
                    seen[k] = true;
                }
                for (k, &s) in seen.iter().enumerate() {
                    counts.used[k] += u64::from(s);
                }
                if track_tail {
                    let done = ws.completion_time();
                    for (slot, &t) in grid.iter().enumerate() {
                        if done >= t {
                            counts.tail[slot] += 1;
                        } else {
                            break;
                        }
                    }
                }
            }
            counts
        })
        .reduce(|| Counts::new(q, fcs, grid.len()), Counts::merge);
    let n = samples as f64;
    McEstimate {
        scheme,
        samples,
        items: q,
        fcs,
        marginals: counts.assign.iter().map(|&c| c as f64 / n).collect(),
        usage: counts.used.iter().map(|&c| c as f64 / n).collect(),
        tail: if track_tail {
            grid.iter()
                .zip(&counts.tail)
                .map(|(&t, &c)| (t, c as f64 / n))
                .collect()
        } else {
            Vec::new()
        },
    }
}

/// Half-width `4 sqrt(p(1-p)/n)` used for binomial checks.
pub fn binomial_slack(p: f64, samples: usize) -> f64 {
    4.0 * (p * (1.0 - p) / samples as f64).sqrt()
}

/// Outcome of checking an estimate against the marginal and competitive
/// guarantees.
#[derive(Debug, Clone, Serialize)]
pub struct BoundCheck {
    pub marginal_violations: usize,
    pub usage_violations: usize,
    pub tail_violations: usize,
}

impl BoundCheck {
    pub fn passed(&self) -> bool {
        self.marginal_violations == 0 && self.usage_violations == 0 && self.tail_violations == 0
    }
}

/// Checks an estimate with 4-sigma binomial slack: marginals against `u`,
/// FC usage against `guarantee * y_k + 4 sqrt(0.25/N)`, and for dilate the
/// tail against `q e^{-t}`.
pub fn check_bounds(m: &MarginalMatrix, est: &McEstimate) -> BoundCheck {
    let n = est.samples;
    let marginal_violations = m
        .as_slice()
        .iter()
        .zip(&est.marginals)
        .filter(|(&u, &p)| (p - u).abs() > binomial_slack(u, n))
        .count();
    let ratio = guarantee(est.scheme, m);
    let slack = binomial_slack(0.5, n);
    let usage_violations = m
        .active_fcs()
        .filter(|&k| est.usage[k] > ratio * m.usage_bounds_slice()[k] + slack)
        .count();
    let q = m.items() as f64;
    let tail_violations = est
        .tail
        .iter()
        .filter(|(t, p)| *p > q * (-t).exp() + slack)
        .count();
    BoundCheck {
        marginal_violations,
        usage_violations,
        tail_violations,
    }
}
