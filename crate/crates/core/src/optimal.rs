//! The instance-optimal rounding LP.
//!
//! For a fixed instance, the best achievable competitive ratio is the value
//! of an LP over distributions of the *set* of FCs used. Variables are the
//! ratio `alpha`, the probability `z(S)` that exactly the FCs in `S` are
//! used, and the joint mass `u_ki(S)` of "S is used and item `i` ships from
//! `k in S`":
//!
//! ```text
//! min alpha
//!   sum_{k in S} u_ki(S) = z(S)          for every S, i
//!   sum_S u_ki(S)        = u_ki          for every k, i
//!   sum_{S containing k} z(S) <= alpha y_k  for every k
//!   sum_S z(S)           = 1
//!   z, u >= 0
//! ```
//!
//! The empty set is left out (some FC always ships), and `u_ki(S)` exists
//! only when `u_ki > 0`.

use std::collections::BTreeMap;
use std::fmt::Write;

use thiserror::Error;

use crate::lp::{self, LpError, LpProblem, LpStatus, Relation};
use crate::rng::{search_cdf, RandomStream};
use crate::rounding::{MarginalMatrix, RoundingOutcome};

pub const DEFAULT_FC_CAP: usize = 12;
/// Residual tolerance for the solution invariants.
pub const SOLUTION_TOLERANCE: f64 = 1e-7;

/// Bitmask of FCs; bit `k` set means FC `k` is in the subset.
pub type Subset = u32;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimalLpError {
    #[error("{fcs} FCs exceed the cap of {cap} (the LP has 2^K subsets)")]
    CapExceeded { fcs: usize, cap: usize },
    #[error(transparent)]
    Solver(#[from] LpError),
    #[error("rounding LP reported {0:?}")]
    Status(LpStatus),
    #[error("subset {subset:#b} has positive probability but item {item} has no mass on it")]
    DegenerateSubset { subset: Subset, item: usize },
    #[error("solution invariant violated: {0}")]
    Invariant(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Where each LP variable lives.
#[derive(Debug, Clone)]
pub struct OptimalLpIndex {
    pub alpha: usize,
    /// `(subset, variable)` in ascending subset order.
    pub z: Vec<(Subset, usize)>,
    /// `(fc, item, subset, variable)`.
    pub u: Vec<(usize, usize, Subset, usize)>,
}

/// Builds the rounding LP for `m`. Fails when `m` has more than `cap` FCs.
pub fn build_lp(m: &MarginalMatrix, cap: usize) -> Result<(LpProblem, OptimalLpIndex), OptimalLpError> {
    let (q, fcs) = (m.items(), m.fcs());
    if fcs > cap || fcs > 31 {
        return Err(OptimalLpError::CapExceeded { fcs, cap });
    }
    let mut p = LpProblem::new(0);
    let alpha = p.add_var(1.0, 0.0, f64::INFINITY);
    let subsets: Vec<Subset> = (1..(1u32 << fcs)).collect();
    let z: Vec<(Subset, usize)> = subsets
        .iter()
        .map(|&s| (s, p.add_var(0.0, 0.0, f64::INFINITY)))
        .collect();
    let mut u = Vec::new();
    // per (subset, item): variables of that item inside the subset
    let mut within: Vec<Vec<usize>> = vec![Vec::new(); subsets.len() * q];
    // per (item, fc): variables across subsets
    let mut across: Vec<Vec<usize>> = vec![Vec::new(); q * fcs];
    for (si, &s) in subsets.iter().enumerate() {
        for i in 0..q {
            for k in 0..fcs {
                if s & (1 << k) != 0 && m.get(i, k) > 0.0 {
                    let v = p.add_var(0.0, 0.0, f64::INFINITY);
                    u.push((k, i, s, v));
                    within[si * q + i].push(v);
                    across[i * fcs + k].push(v);
                }
            }
        }
    }
    // item ships from exactly one FC of the chosen subset
    for (si, &(_, zv)) in z.iter().enumerate() {
        for i in 0..q {
            let mut terms: Vec<(usize, f64)> = within[si * q + i].iter().map(|&v| (v, 1.0)).collect();
            terms.push((zv, -1.0));
            p.add_constraint(terms, Relation::Eq, 0.0);
        }
    }
    // marginals
    for i in 0..q {
        for k in 0..fcs {
            let vars = &across[i * fcs + k];
            if !vars.is_empty() {
                p.add_constraint(vars.iter().map(|&v| (v, 1.0)).collect(), Relation::Eq, m.get(i, k));
            }
        }
    }
    // usage of each FC at most alpha y_k
    let y = m.usage_bounds_slice();
    for k in 0..fcs {
        let mut terms: Vec<(usize, f64)> = z
            .iter()
            .filter(|(s, _)| s & (1 << k) != 0)
            .map(|&(_, v)| (v, 1.0))
            .collect();
        if y[k] > 0.0 {
            terms.push((alpha, -y[k]));
        }
        p.add_constraint(terms, Relation::Le, 0.0);
    }
    p.add_constraint(z.iter().map(|&(_, v)| (v, 1.0)).collect(), Relation::Eq, 1.0);
    Ok((p, OptimalLpIndex { alpha, z, u }))
}

/// Optimal competitive ratio of one instance and a scheme attaining it.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimalSchemeSolution {
    pub alpha: f64,
    pub items: usize,
    pub fcs: usize,
    /// `z(S)` for subsets with positive probability.
    pub z: BTreeMap<Subset, f64>,
    /// `u_ki(S)` keyed by `(k, i, S)`, positive entries only.
    pub u_cond: BTreeMap<(usize, usize, Subset), f64>,
}

pub fn solve_optimal_alpha(m: &MarginalMatrix) -> Result<OptimalSchemeSolution, OptimalLpError> {
    solve_optimal_alpha_capped(m, DEFAULT_FC_CAP)
}

pub fn solve_optimal_alpha_capped(
    m: &MarginalMatrix,
    cap: usize,
) -> Result<OptimalSchemeSolution, OptimalLpError> {
    let (p, index) = build_lp(m, cap)?;
    let sol = lp::solve(&p)?;
    if sol.status != LpStatus::Optimal {
        return Err(OptimalLpError::Status(sol.status));
    }
    let clamp = |v: f64| if v < -1e-9 { v } else { v.max(0.0) };
    let z = index
        .z
        .iter()
        .map(|&(s, v)| (s, clamp(sol.x[v])))
        .filter(|&(_, p)| p != 0.0)
        .collect();
    let u_cond = index
        .u
        .iter()
        .map(|&(k, i, s, v)| ((k, i, s), clamp(sol.x[v])))
        .filter(|&(_, p)| p != 0.0)
        .collect();
    let out = OptimalSchemeSolution {
        alpha: sol.x[index.alpha],
        items: m.items(),
        fcs: m.fcs(),
        z,
        u_cond,
    };
    out.verify(m)?;
    Ok(out)
}

impl OptimalSchemeSolution {
    /// Probability that FC `k` is used under this scheme.
    pub fn usage(&self, fc: usize) -> f64 {
        self.z
            .iter()
            .filter(|(s, _)| *s & (1 << fc) != 0)
            .map(|(_, p)| p)
            .sum()
    }

    /// Re-checks every LP constraint against `m`.
    pub fn verify(&self, m: &MarginalMatrix) -> Result<(), OptimalLpError> {
        let tol = SOLUTION_TOLERANCE;
        let bad = |msg: String| Err(OptimalLpError::Invariant(msg));
        let total: f64 = self.z.values().sum();
        if (total - 1.0).abs() > tol {
            return bad(format!("subset probabilities sum to {total}"));
        }
        if let Some((s, p)) = self.z.iter().find(|(_, p)| **p < -1e-9) {
            return bad(format!("z({s:#b}) = {p}"));
        }
        if let Some((key, p)) = self.u_cond.iter().find(|(_, p)| **p < -1e-9) {
            return bad(format!("u{key:?} = {p}"));
        }
        let mut within: BTreeMap<(Subset, usize), f64> = BTreeMap::new();
        let mut across = vec![0.0; self.items * self.fcs];
        for (&(k, i, s), &p) in &self.u_cond {
            if s & (1 << k) == 0 {
                return bad(format!("u({k},{i}) on subset {s:#b} not containing {k}"));
            }
            *within.entry((s, i)).or_default() += p;
            across[i * self.fcs + k] += p;
        }
        for (&s, &zs) in &self.z {
            for i in 0..self.items {
                let mass = within.get(&(s, i)).copied().unwrap_or(0.0);
                if (mass - zs).abs() > tol {
                    return bad(format!("item {i} has mass {mass} on subset {s:#b} with z = {zs}"));
                }
            }
        }
        for (&(s, i), &mass) in &within {
            if !self.z.contains_key(&s) && mass.abs() > tol {
                return bad(format!("item {i} has mass {mass} on unused subset {s:#b}"));
            }
        }
        for i in 0..self.items {
            for k in 0..self.fcs {
                let got = across[i * self.fcs + k];
                if (got - m.get(i, k)).abs() > tol {
                    return bad(format!("marginal ({i},{k}) is {got}, expected {}", m.get(i, k)));
                }
            }
        }
        for (k, &y) in m.usage_bounds_slice().iter().enumerate() {
            let used = self.usage(k);
            if used > self.alpha * y + tol {
                return bad(format!("FC {k} used w.p. {used} > alpha y = {}", self.alpha * y));
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("alpha {}\n", self.alpha);
        for (s, p) in &self.z {
            let _ = writeln!(out, "{s} {p}");
        }
        for ((k, i, s), p) in &self.u_cond {
            let _ = writeln!(out, "{k} {i} {s} {p}");
        }
        out
    }

    /// Parses [`OptimalSchemeSolution::to_text`] output for an instance
    /// with the given dimensions.
    pub fn from_text(text: &str, items: usize, fcs: usize) -> Result<Self, OptimalLpError> {
        let perr = |line: usize, message: String| OptimalLpError::Parse { line, message };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, head) = lines.next().ok_or_else(|| perr(1, "empty input".into()))?;
        let alpha = head
            .strip_prefix("alpha ")
            .and_then(|v| v.trim().parse::<f64>().ok())
            .ok_or_else(|| perr(1, "expected `alpha <value>`".into()))?;
        let mut z = BTreeMap::new();
        let mut u_cond = BTreeMap::new();
        for (n, line) in lines {
            let toks: Vec<&str> = line.split_whitespace().collect();
            let num = |t: &str| t.parse::<f64>().map_err(|_| perr(n + 1, format!("bad number `{t}`")));
            let int = |t: &str| t.parse::<usize>().map_err(|_| perr(n + 1, format!("bad index `{t}`")));
            match toks[..] {
                [s, p] => {
                    z.insert(int(s)? as Subset, num(p)?);
                }
                [k, i, s, p] => {
                    u_cond.insert((int(k)?, int(i)?, int(s)? as Subset), num(p)?);
                }
                _ => return Err(perr(n + 1, "expected 2 or 4 fields".into())),
            }
        }
        Ok(Self {
            alpha,
            items,
            fcs,
            z,
            u_cond,
        })
    }

    pub fn sampler(&self) -> Result<OptimalSampler, OptimalLpError> {
        OptimalSampler::new(self)
    }
}

/// Precomputed inverse-CDF tables for drawing from a solved scheme.
#[derive(Debug, Clone)]
pub struct OptimalSampler {
    subsets: Vec<Subset>,
    subset_cdf: Vec<f64>,
    /// Per subset, per item: candidate FCs and their conditional CDF.
    choices: Vec<Vec<(Vec<usize>, Vec<f64>)>>,
}

impl OptimalSampler {
    fn new(sol: &OptimalSchemeSolution) -> Result<Self, OptimalLpError> {
        let mut subsets = Vec::new();
        let mut subset_cdf = Vec::new();
        let mut choices = Vec::new();
        let mut acc = 0.0;
        for (&s, &p) in sol.z.iter().filter(|(_, p)| **p > 0.0) {
            let mut per_item = Vec::with_capacity(sol.items);
            for i in 0..sol.items {
                let mut ks = Vec::new();
                let mut cdf = Vec::new();
                let mut mass = 0.0;
                for k in 0..sol.fcs {
                    if let Some(&w) = sol.u_cond.get(&(k, i, s)) {
                        if w > 0.0 {
                            mass += w;
                            ks.push(k);
                            cdf.push(mass);
                        }
                    }
                }
                if ks.is_empty() {
                    return Err(OptimalLpError::DegenerateSubset { subset: s, item: i });
                }
                cdf.iter_mut().for_each(|c| *c /= mass);
                per_item.push((ks, cdf));
            }
            acc += p;
            subsets.push(s);
            subset_cdf.push(acc);
            choices.push(per_item);
        }
        subset_cdf.iter_mut().for_each(|c| *c /= acc);
        Ok(Self {
            subsets,
            subset_cdf,
            choices,
        })
    }

    /// Draws `S` with probability `z(S)`, then each item's FC within `S`
    /// proportionally to `u_ki(S)`.
    pub fn sample(&self, rng: &mut RandomStream) -> (Subset, RoundingOutcome) {
        let si = search_cdf(&self.subset_cdf, rng.uniform());
        let z = self.choices[si]
            .iter()
            .map(|(ks, cdf)| ks[search_cdf(cdf, rng.uniform())])
            .collect();
        (self.subsets[si], RoundingOutcome { z })
    }
}

/// Draws one assignment from a solved scheme.
pub fn sample_optimal(
    s: &OptimalSchemeSolution,
    rng: &mut RandomStream,
) -> Result<RoundingOutcome, OptimalLpError> {
    Ok(s.sampler()?.sample(rng).1)
}
