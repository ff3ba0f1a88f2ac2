//! Set cover through correlated rounding.
//!
//! A fractional cover `y` induces a marginal matrix by letting each element
//! draw its unit of mass from the sets containing it. Rounding that matrix
//! and opening every set some element was assigned to yields an integral
//! cover in every realization, with each set opened with probability at most
//! the scheme's guarantee times `y_k`.

use thiserror::Error;

use crate::rounding::{round, MarginalMatrix, RoundingError, Scheme};
use crate::RandomStream;

/// Largest `C(K, d)` accepted by [`hard_instance`].
pub const HARD_INSTANCE_CAP: u64 = 100_000;

/// Slack allowed when checking that a fractional cover reaches 1.
pub const COVER_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SetCoverError {
    #[error("element {element} is covered by no set")]
    Uncovered { element: usize },
    #[error("set {set} lists element {element}, outside 0..{elements}")]
    ElementOutOfRange {
        set: usize,
        element: usize,
        elements: usize,
    },
    #[error("fractional cover has {found} entries, expected {expected}")]
    Length { expected: usize, found: usize },
    #[error("y[{set}] = {value} is outside [0, 1]")]
    OutOfUnitInterval { set: usize, value: f64 },
    #[error("element {element} receives fractional mass {mass} < 1")]
    InfeasibleFractional { element: usize, mass: f64 },
    #[error("C({sets}, {d}) exceeds the cap of {cap} elements")]
    CapExceeded { d: usize, sets: usize, cap: u64 },
    #[error("need 1 <= d <= K, got d = {d}, K = {sets}")]
    BadSparsity { d: usize, sets: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Rounding(#[from] RoundingError),
}

/// Elements are `0..elements`; `sets[k]` lists the elements of set `k` in
/// ascending order.
#[derive(Debug, Clone, PartialEq)]
pub struct SetCoverInstance {
    elements: usize,
    sets: Vec<Vec<usize>>,
    costs: Vec<f64>,
    // covering[i] = sets containing element i, ascending
    covering: Vec<Vec<usize>>,
}

impl SetCoverInstance {
    /// Unit costs for every set.
    pub fn new(elements: usize, sets: Vec<Vec<usize>>) -> Result<Self, SetCoverError> {
        let costs = vec![1.0; sets.len()];
        Self::with_costs(elements, sets, costs)
    }

    pub fn with_costs(
        elements: usize,
        mut sets: Vec<Vec<usize>>,
        costs: Vec<f64>,
    ) -> Result<Self, SetCoverError> {
        if costs.len() != sets.len() {
            return Err(SetCoverError::Length {
                expected: sets.len(),
                found: costs.len(),
            });
        }
        let mut covering = vec![Vec::new(); elements];
        for (k, members) in sets.iter_mut().enumerate() {
            members.sort_unstable();
            members.dedup();
            for &e in members.iter() {
                if e >= elements {
                    return Err(SetCoverError::ElementOutOfRange {
                        set: k,
                        element: e,
                        elements,
                    });
                }
                covering[e].push(k);
            }
        }
        if let Some(element) = covering.iter().position(Vec::is_empty) {
            return Err(SetCoverError::Uncovered { element });
        }
        Ok(Self {
            elements,
            sets,
            costs,
            covering,
        })
    }

    pub fn elements(&self) -> usize {
        self.elements
    }

    pub fn num_sets(&self) -> usize {
        self.sets.len()
    }

    pub fn set(&self, k: usize) -> &[usize] {
        &self.sets[k]
    }

    pub fn cost(&self, k: usize) -> f64 {
        self.costs[k]
    }

    /// Sets containing element `i`, ascending.
    pub fn covering(&self, i: usize) -> &[usize] {
        &self.covering[i]
    }

    /// Whether the sets flagged in `chosen` cover every element.
    pub fn is_cover(&self, chosen: &[bool]) -> bool {
        self.covering.iter().all(|ks| ks.iter().any(|&k| chosen[k]))
    }

    /// Checks `y` against the cover LP: entries in `[0, 1]` and every
    /// element's covering mass at least 1.
    pub fn check_fractional(&self, y: &FractionalCover) -> Result<(), SetCoverError> {
        if y.0.len() != self.num_sets() {
            return Err(SetCoverError::Length {
                expected: self.num_sets(),
                found: y.0.len(),
            });
        }
        for (set, &value) in y.0.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(SetCoverError::OutOfUnitInterval { set, value });
            }
        }
        for (element, ks) in self.covering.iter().enumerate() {
            let mass: f64 = ks.iter().map(|&k| y.0[k]).sum();
            if mass < 1.0 - COVER_TOLERANCE {
                return Err(SetCoverError::InfeasibleFractional { element, mass });
            }
        }
        Ok(())
    }

    /// Parses `q K` followed by `K` lines `c_k n_k e_1 ... e_{n_k}` with
    /// 1-based element indices. Blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self, SetCoverError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(n, l)| (n + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let parse_err = |line: usize, message: String| SetCoverError::Parse { line, message };
        let (hline, header) = lines
            .next()
            .ok_or_else(|| parse_err(0, "empty input".into()))?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| parse_err(hline, format!("expected an integer, found `{t}`"))))
            .collect::<Result<_, _>>()?;
        let [q, k] = dims[..] else {
            return Err(parse_err(hline, "header must be `q K`".into()));
        };
        let mut sets = Vec::with_capacity(k);
        let mut costs = Vec::with_capacity(k);
        for (line, body) in lines {
            if sets.len() == k {
                return Err(parse_err(line, format!("more than {k} sets")));
            }
            let mut toks = body.split_whitespace();
            let cost: f64 = toks
                .next()
                .and_then(|t| t.parse().ok())
                .filter(|c: &f64| c.is_finite())
                .ok_or_else(|| parse_err(line, "missing or invalid set cost".into()))?;
            let n: usize = toks
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| parse_err(line, "missing or invalid member count".into()))?;
            let members: Vec<usize> = toks
                .map(|t| match t.parse::<usize>() {
                    Ok(e) if (1..=q).contains(&e) => Ok(e - 1),
                    _ => Err(parse_err(line, format!("element `{t}` is not in 1..={q}"))),
                })
                .collect::<Result<_, _>>()?;
            if members.len() != n {
                return Err(parse_err(line, format!("expected {n} elements, found {}", members.len())));
            }
            sets.push(members);
            costs.push(cost);
        }
        if sets.len() != k {
            return Err(parse_err(0, format!("expected {k} sets, found {}", sets.len())));
        }
        Self::with_costs(q, sets, costs)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.elements, self.num_sets());
        for (members, c) in self.sets.iter().zip(&self.costs) {
            out.push_str(&format!("{c} {}", members.len()));
            for e in members {
                out.push_str(&format!(" {}", e + 1));
            }
            out.push('\n');
        }
        out
    }
}

/// Fractional set weights `y_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct FractionalCover(pub Vec<f64>);

impl FractionalCover {
    /// Whitespace-separated weights, `#` comments allowed.
    pub fn parse(text: &str) -> Result<Self, SetCoverError> {
        let mut y = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let body = line.split('#').next().unwrap_or("");
            for tok in body.split_whitespace() {
                y.push(tok.parse::<f64>().map_err(|_| SetCoverError::Parse {
                    line: n + 1,
                    message: format!("expected a weight, found `{tok}`"),
                })?);
            }
        }
        Ok(Self(y))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn total_cost(&self, sc: &SetCoverInstance) -> f64 {
        self.0.iter().enumerate().map(|(k, y)| y * sc.cost(k)).sum()
    }
}

/// One realization of a randomized cover.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverOutcome {
    /// `chosen[k]` iff some element was assigned to set `k`.
    pub chosen: Vec<bool>,
    /// Set each element was assigned to.
    pub assignment: Vec<usize>,
}

impl CoverOutcome {
    pub fn num_chosen(&self) -> usize {
        self.chosen.iter().filter(|&&c| c).count()
    }

    pub fn cost(&self, sc: &SetCoverInstance) -> f64 {
        self.chosen
            .iter()
            .enumerate()
            .filter(|(_, &c)| c)
            .map(|(k, _)| sc.cost(k))
            .sum()
    }
}

/// Water-fills each element's unit of mass over its covering sets in
/// ascending index order, taking `min(y_k, remaining)` from each.
pub fn marginals_from_fractional_cover(
    sc: &SetCoverInstance,
    y: &FractionalCover,
) -> Result<MarginalMatrix, SetCoverError> {
    sc.check_fractional(y)?;
    let k = sc.num_sets();
    let mut data = vec![0.0; sc.elements() * k];
    for (i, row) in data.chunks_exact_mut(k).enumerate() {
        let mut remaining = 1.0_f64;
        for &set in sc.covering(i) {
            if remaining <= 0.0 {
                break;
            }
            let take = y.0[set].min(remaining);
            row[set] = take;
            remaining -= take;
        }
        if remaining > COVER_TOLERANCE {
            return Err(SetCoverError::InfeasibleFractional {
                element: i,
                mass: 1.0 - remaining,
            });
        }
    }
    Ok(MarginalMatrix::with_tolerance(sc.elements(), k, data, COVER_TOLERANCE)?)
}

/// Rounds a prepared marginal matrix into a cover. Use this in loops to
/// avoid rebuilding the marginals on every draw.
pub fn round_marginals(m: &MarginalMatrix, scheme: Scheme, rng: &mut RandomStream) -> CoverOutcome {
    let out = round(scheme, m, rng);
    let mut chosen = vec![false; m.fcs()];
    for &k in &out.z {
        chosen[k] = true;
    }
    CoverOutcome {
        chosen,
        assignment: out.z,
    }
}

pub fn round_cover(
    sc: &SetCoverInstance,
    y: &FractionalCover,
    scheme: Scheme,
    rng: &mut RandomStream,
) -> Result<CoverOutcome, SetCoverError> {
    let m = marginals_from_fractional_cover(sc, y)?;
    Ok(round_marginals(&m, scheme, rng))
}

/// Empirical behavior of a covering scheme over repeated draws.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverEstimate {
    pub scheme: Scheme,
    pub samples: usize,
    /// Fraction of draws in which set `k` was chosen.
    pub usage: Vec<f64>,
    /// Draws whose chosen sets failed to cover some element.
    pub infeasible: usize,
    pub mean_sets: f64,
}

impl CoverEstimate {
    /// Mean of `usage[k] / y[k]` over sets with `y[k] > 0`.
    pub fn average_ratio(&self, y: &FractionalCover) -> f64 {
        let ratios: Vec<f64> = self
            .usage
            .iter()
            .zip(&y.0)
            .filter(|(_, &yk)| yk > 0.0)
            .map(|(u, yk)| u / yk)
            .collect();
        ratios.iter().sum::<f64>() / ratios.len().max(1) as f64
    }
}

/// Rounds `samples` times, checking feasibility of every draw.
pub fn estimate_cover(
    sc: &SetCoverInstance,
    y: &FractionalCover,
    scheme: Scheme,
    samples: usize,
    seed: u64,
) -> Result<CoverEstimate, SetCoverError> {
    let m = marginals_from_fractional_cover(sc, y)?;
    let mut rng = RandomStream::new(seed);
    let mut counts = vec![0u64; sc.num_sets()];
    let mut infeasible = 0;
    let mut total_sets = 0u64;
    for _ in 0..samples {
        let out = round_marginals(&m, scheme, &mut rng);
        if !sc.is_cover(&out.chosen) {
            infeasible += 1;
        }
        for (c, &chosen) in counts.iter_mut().zip(&out.chosen) {
            *c += u64::from(chosen);
        }
        total_sets += out.num_chosen() as u64;
    }
    let n = samples.max(1) as f64;
    Ok(CoverEstimate {
        scheme,
        samples,
        usage: counts.iter().map(|&c| c as f64 / n).collect(),
        infeasible,
        mean_sets: total_sets as f64 / n,
    })
}

/// `C(n, r)`, saturating at `u64::MAX`.
pub fn binomial(n: usize, r: usize) -> u64 {
    if r > n {
        return 0;
    }
    let r = r.min(n - r);
    let mut acc: u128 = 1;
    for j in 0..r {
        acc = acc * (n - j) as u128 / (j + 1) as u128;
        if acc > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    acc as u64
}

/// One element per `d`-subset of the `K` sets, contained in exactly the
/// sets of its subset, with `y_k = 1/d`. Elements are listed in
/// lexicographic order of their subsets.
pub fn hard_instance(d: usize, sets: usize) -> Result<(SetCoverInstance, FractionalCover), SetCoverError> {
    if d == 0 || d > sets {
        return Err(SetCoverError::BadSparsity { d, sets });
    }
    let count = binomial(sets, d);
    if count > HARD_INSTANCE_CAP {
        return Err(SetCoverError::CapExceeded {
            d,
            sets,
            cap: HARD_INSTANCE_CAP,
        });
    }
    let mut members = vec![Vec::new(); sets];
    let mut combo: Vec<usize> = (0..d).collect();
    let mut element = 0;
    loop {
        for &k in &combo {
            members[k].push(element);
        }
        element += 1;
        // advance to the next combination in lexicographic order
        let Some(pos) = (0..d).rev().find(|&p| combo[p] < sets - d + p) else {
            break;
        };
        combo[pos] += 1;
        for p in pos + 1..d {
            combo[p] = combo[p - 1] + 1;
        }
    }
    let sc = SetCoverInstance::new(element, members)?;
    Ok((sc, FractionalCover(vec![1.0 / d as f64; sets])))
}
