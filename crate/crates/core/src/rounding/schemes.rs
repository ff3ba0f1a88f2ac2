use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{MarginalMatrix, RoundingError};
use crate::rng::RandomStream;

/// The rounding schemes that can actually be executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Each item draws its FC independently of the others.
    Independent,
    /// Shared exponential opening clocks, viewed by each item through a
    /// per-item dilation `y_k / u_ki`.
    Dilate,
    /// Dilated clocks plus a forced opening of each item's favorite FC,
    /// with a calibrated chance of hiding its natural opening.
    ForceOpen,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Independent, Scheme::Dilate, Scheme::ForceOpen];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Independent => "independent",
            Scheme::Dilate => "dilate",
            Scheme::ForceOpen => "force-open",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = RoundingError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "independent" | "indep" => Ok(Scheme::Independent),
            "dilate" => Ok(Scheme::Dilate),
            "force-open" | "force_open" | "forceopen" => Ok(Scheme::ForceOpen),
            _ => Err(RoundingError::UnknownScheme(s.to_string())),
        }
    }
}

/// FC assignment `Z_i` for every item (0-based FC indices).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundingOutcome {
    pub z: Vec<usize>,
}

impl RoundingOutcome {
    /// Distinct FCs used, ascending.
    pub fn used_fcs(&self) -> Vec<usize> {
        let mut used = self.z.clone();
        used.sort_unstable();
        used.dedup();
        used
    }
}

/// Internal clocks of one dilate or force-open run.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundingTrace {
    /// Opening time `E_k` of each FC; infinite for FCs no item can use.
    pub e: Vec<f64>,
    /// Row-major `q x K` matrix of the times `X_ki` at which item `i` sees
    /// FC `k` open.
    pub x: Vec<f64>,
    /// Hide flags `H_i` (force-open only).
    pub hidden: Option<Vec<bool>>,
    /// Favorite FC `m(i)` (force-open only).
    pub target: Option<Vec<usize>>,
    fcs: usize,
}

impl RoundingTrace {
    pub fn view(&self, item: usize, fc: usize) -> f64 {
        self.x[item * self.fcs + fc]
    }

    /// `min_k X_ki`: the time at which `item` gets assigned.
    pub fn assignment_time(&self, item: usize) -> f64 {
        self.x[item * self.fcs..(item + 1) * self.fcs]
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Time at which the last item gets assigned.
    pub fn completion_time(&self) -> f64 {
        let items = self.x.len() / self.fcs.max(1);
        (0..items)
            .map(|i| self.assignment_time(i))
            .fold(0.0, f64::max)
    }
}

/// Probability that the favorite FC's natural opening is hidden from an
/// item whose largest marginal is `u_max`.
///
/// Equal to `(1-u)/(1-u + u e^{1/u} - e)`, evaluated as
/// `eps / (eps (1-e) + e u expm1(eps/u))` with `eps = 1-u` to avoid the
/// cancellation near `u = 1`. At `u = 1` the value is 1 (continuity limit;
/// the item has no other FC so the flag cannot matter).
pub fn hiding_probability(u_max: f64) -> Result<f64, RoundingError> {
    if !(u_max > 0.0 && u_max <= 1.0) {
        return Err(RoundingError::DomainError(u_max));
    }
    let eps = 1.0 - u_max;
    if eps == 0.0 {
        return Ok(1.0);
    }
    let e = std::f64::consts::E;
    let denom = eps * (1.0 - e) + e * u_max * (eps / u_max).exp_m1();
    let p = eps / denom;
    // expm1 overflows to +inf for tiny u_max, giving the correct limit 0
    Ok(p.clamp(0.0, 1.0))
}

/// Scratch buffers reused across rounding calls in hot loops.
#[derive(Debug, Default, Clone)]
pub struct Workspace {
    /// Opening time of each FC in the most recent call.
    pub opening: Vec<f64>,
    /// Assignment of each item in the most recent call.
    pub z: Vec<usize>,
    /// `min_k X_ki` per item (dilate and force-open only).
    pub assigned_at: Vec<f64>,
}

impl Workspace {
    pub fn new() -> Self {
        Self::default()
    }

    /// Time at which the last item got assigned in the most recent call.
    pub fn completion_time(&self) -> f64 {
        self.assigned_at.iter().copied().fold(0.0, f64::max)
    }
}

/// Draws the shared FC opening times `E_k ~ Exp(y_k)`.
#[inline]
fn draw_openings(m: &MarginalMatrix, rng: &mut RandomStream, out: &mut Vec<f64>) {
    out.clear();
    out.extend(m.usage_bounds_slice().iter().map(|&y| {
        if y > 0.0 {
            rng.exponential(y)
        } else {
            f64::INFINITY
        }
    }));
}

/// Dilated view `(y_k / u_ki) E_k`; infinite when `u_ki = 0`.
#[inline(always)]
fn dilated(y: f64, u: f64, opening: f64) -> f64 {
    if u > 0.0 {
        y / u * opening
    } else {
        f64::INFINITY
    }
}

/// Runs `scheme` once, writing the assignment into `ws.z`.
///
/// Uses the same draw order as the traced entry points, so for a given
/// stream the assignment is identical to [`dilate_round`] and
/// [`force_open_round`].
pub fn round_into(scheme: Scheme, m: &MarginalMatrix, rng: &mut RandomStream, ws: &mut Workspace) {
    let q = m.items();
    ws.z.clear();
    ws.assigned_at.clear();
    match scheme {
        Scheme::Independent => {
            ws.opening.clear();
            for i in 0..q {
                let k = sample_row(m.row(i), rng.uniform());
                ws.z.push(k);
            }
        }
        Scheme::Dilate => {
            draw_openings(m, rng, &mut ws.opening);
            let y = m.usage_bounds_slice();
            for i in 0..q {
                let row = m.row(i);
                let mut best = usize::MAX;
                let mut best_t = f64::INFINITY;
                for (k, &u) in row.iter().enumerate() {
                    let t = dilated(y[k], u, ws.opening[k]);
                    if t < best_t {
                        best_t = t;
                        best = k;
                    }
                }
                ws.z.push(best);
                ws.assigned_at.push(best_t);
            }
        }
        Scheme::ForceOpen => {
            draw_openings(m, rng, &mut ws.opening);
            let y = m.usage_bounds_slice();
            for i in 0..q {
                let row = m.row(i);
                let target = m.target(i);
                let hidden = rng.bernoulli(m.hide_probability(i));
                let mut best = usize::MAX;
                let mut best_t = f64::INFINITY;
                for (k, &u) in row.iter().enumerate() {
                    let t = if k == target {
                        forced_view(y[k], u, ws.opening[k], hidden)
                    } else {
                        dilated(y[k], u, ws.opening[k])
                    };
                    if t < best_t {
                        best_t = t;
                        best = k;
                    }
                }
                ws.z.push(best);
                ws.assigned_at.push(best_t);
            }
        }
    }
}

/// View of the favorite FC: `(y/u) min(E/(1-H), 1/y)`.
#[inline(always)]
fn forced_view(y: f64, u: f64, opening: f64, hidden: bool) -> f64 {
    let capped = if hidden { 1.0 / y } else { opening.min(1.0 / y) };
    y / u * capped
}

/// Inverse-CDF draw from one marginal row.
#[inline]
fn sample_row(row: &[f64], target: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (k, &u) in row.iter().enumerate() {
        if u <= 0.0 {
            continue;
        }
        acc += u;
        last = k;
        if target < acc {
            return k;
        }
    }
    last
}

pub fn independent_round(m: &MarginalMatrix, rng: &mut RandomStream) -> RoundingOutcome {
    let mut ws = Workspace::new();
    round_into(Scheme::Independent, m, rng, &mut ws);
    RoundingOutcome { z: ws.z }
}

/// Dilated-clock rounding, returning the full clock trace.
pub fn dilate_round(m: &MarginalMatrix, rng: &mut RandomStream) -> (RoundingOutcome, RoundingTrace) {
    let (q, fcs) = (m.items(), m.fcs());
    let mut e = Vec::with_capacity(fcs);
    draw_openings(m, rng, &mut e);
    let y = m.usage_bounds_slice();
    let mut x = Vec::with_capacity(q * fcs);
    for i in 0..q {
        for (k, &u) in m.row(i).iter().enumerate() {
            x.push(dilated(y[k], u, e[k]));
        }
    }
    let z = argmin_rows(&x, fcs);
    (
        RoundingOutcome { z },
        RoundingTrace {
            e,
            x,
            hidden: None,
            target: None,
            fcs,
        },
    )
}

/// Forced-opening rounding, returning the full clock trace.
pub fn force_open_round(
    m: &MarginalMatrix,
    rng: &mut RandomStream,
) -> (RoundingOutcome, RoundingTrace) {
    let (q, fcs) = (m.items(), m.fcs());
    let mut e = Vec::with_capacity(fcs);
    draw_openings(m, rng, &mut e);
    let y = m.usage_bounds_slice();
    let mut x = Vec::with_capacity(q * fcs);
    let mut hidden = Vec::with_capacity(q);
    let mut targets = Vec::with_capacity(q);
    for i in 0..q {
        let target = m.target(i);
        let h = rng.bernoulli(m.hide_probability(i));
        for (k, &u) in m.row(i).iter().enumerate() {
            x.push(if k == target {
                forced_view(y[k], u, e[k], h)
            } else {
                dilated(y[k], u, e[k])
            });
        }
        hidden.push(h);
        targets.push(target);
    }
    let z = argmin_rows(&x, fcs);
    (
        RoundingOutcome { z },
        RoundingTrace {
            e,
            x,
            hidden: Some(hidden),
            target: Some(targets),
            fcs,
        },
    )
}

/// Runs any scheme, returning only the assignment.
pub fn round(scheme: Scheme, m: &MarginalMatrix, rng: &mut RandomStream) -> RoundingOutcome {
    let mut ws = Workspace::new();
    round_into(scheme, m, rng, &mut ws);
    RoundingOutcome { z: ws.z }
}

fn argmin_rows(x: &[f64], fcs: usize) -> Vec<usize> {
    x.chunks_exact(fcs)
        .map(|row| {
            let mut best = 0;
            for (k, &t) in row.iter().enumerate() {
                if t < row[best] {
                    best = k;
                }
            }
            best
        })
        .collect()
}
