use log::debug;

use super::{LpError, LpProblem, LpSolution, LpStatus, Relation, BOUND_TOLERANCE, FEASIBILITY_TOLERANCE};

#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub max_pivots: usize,
    /// Smallest magnitude accepted as a pivot element.
    pub pivot_tolerance: f64,
    /// Reduced costs above `-optimality_tolerance` times the largest cost
    /// magnitude (at least 1) count as nonnegative.
    pub optimality_tolerance: f64,
    /// Consecutive degenerate pivots after which entering/leaving choices
    /// switch to Bland's rule until the objective moves again.
    pub degenerate_switch: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_pivots: 1_000_000,
            pivot_tolerance: 1e-9,
            optimality_tolerance: 1e-9,
            degenerate_switch: 50,
        }
    }
}

/// Primal slack allowed in the first pass of the ratio test.
const HARRIS_SLACK: f64 = 1e-9;

/// Entries this small are flushed to zero after a row operation.
const DROP_TOLERANCE: f64 = 1e-13;

/// How each original variable maps onto nonnegative tableau columns.
#[derive(Debug, Clone, Copy)]
enum VarMap {
    /// `x = offset + col`
    Shifted { col: usize, offset: f64 },
    /// `x = offset - col`
    Mirrored { col: usize, offset: f64 },
    /// `x = pos - neg`
    Free { pos: usize, neg: usize },
}

struct Tableau {
    rows: usize,
    /// Columns excluding the right-hand side.
    cols: usize,
    width: usize,
    a: Vec<f64>,
    /// Objective row: reduced costs, then `-z` in the rhs slot.
    obj: Vec<f64>,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    banned: Vec<bool>,
    active: Vec<bool>,
    pivots: usize,
    scratch: Vec<(usize, f64)>,
}

enum PhaseEnd {
    Optimal,
    Unbounded,
}

impl Tableau {
    #[inline]
    fn rhs(&self, r: usize) -> f64 {
        self.a[r * self.width + self.cols]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.width;
        let row = r * w;
        let inv = 1.0 / self.a[row + c];
        self.scratch.clear();
        for j in 0..w {
            let v = self.a[row + j];
            if v != 0.0 {
                let v = if j == c { 1.0 } else { v * inv };
                self.a[row + j] = v;
                self.scratch.push((j, v));
            }
        }
        let pivot_row = std::mem::take(&mut self.scratch);
        for i in 0..self.rows {
            if i == r {
                continue;
            }
            let base = i * w;
            let f = self.a[base + c];
            if f == 0.0 {
                continue;
            }
            for &(j, v) in &pivot_row {
                let cell = &mut self.a[base + j];
                *cell -= f * v;
                if cell.abs() < DROP_TOLERANCE && j != self.cols {
                    *cell = 0.0;
                }
            }
            self.a[base + c] = 0.0;
        }
        let f = self.obj[c];
        if f != 0.0 {
            for &(j, v) in &pivot_row {
                self.obj[j] -= f * v;
            }
            self.obj[c] = 0.0;
        }
        self.scratch = pivot_row;
        self.is_basic[self.basis[r]] = false;
        self.is_basic[c] = true;
        self.basis[r] = c;
        self.pivots += 1;
    }

    fn entering(&self, bland: bool, tol: f64) -> Option<usize> {
        let mut best: Option<usize> = None;
        let mut best_d = -tol;
        for j in 0..self.cols {
            if self.is_basic[j] || self.banned[j] {
                continue;
            }
            let d = self.obj[j];
            if d < best_d {
                if bland {
                    return Some(j);
                }
                best_d = d;
                best = Some(j);
            }
        }
        best
    }

    /// Minimum-ratio row for entering column `c`. Outside Bland mode this
    /// is a two-pass Harris test: rows whose ratio is within a small
    /// feasibility slack of the minimum compete on pivot magnitude.
    fn leaving(&self, c: usize, bland: bool, piv_tol: f64) -> Option<(usize, f64)> {
        let w = self.width;
        let candidates = (0..self.rows).filter_map(|i| {
            let col = self.a[i * w + c];
            (self.active[i] && col > piv_tol).then(|| (i, col, self.rhs(i).max(0.0)))
        });
        if bland {
            let mut best: Option<(usize, f64)> = None;
            for (i, col, rhs) in candidates {
                let ratio = rhs / col;
                best = match best {
                    Some((bi, br)) => {
                        let tie = (ratio - br).abs() <= 1e-12 * br.abs().max(1.0);
                        if ratio < br && !tie || tie && self.basis[i] < self.basis[bi] {
                            Some((i, ratio))
                        } else {
                            Some((bi, br))
                        }
                    }
                    None => Some((i, ratio)),
                };
            }
            return best;
        }
        let bound = candidates
            .clone()
            .map(|(_, col, rhs)| (rhs + HARRIS_SLACK) / col)
            .fold(f64::INFINITY, f64::min);
        if !bound.is_finite() {
            return None;
        }
        candidates
            .filter(|&(_, col, rhs)| rhs / col <= bound)
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
            .map(|(i, col, rhs)| (i, rhs / col))
    }

    /// Pivots to optimality. Reduced costs are compared against the
    /// optimality tolerance times `cost_scale`.
    fn run(&mut self, opts: &SolverOptions, cost_scale: f64) -> Result<PhaseEnd, LpError> {
        let tol = opts.optimality_tolerance * cost_scale.max(1.0);
        let mut degenerate_run = 0usize;
        loop {
            if self.pivots >= opts.max_pivots {
                return Err(LpError::IterationLimit(opts.max_pivots));
            }
            let bland = degenerate_run >= opts.degenerate_switch;
            let Some(c) = self.entering(bland, tol) else {
                return Ok(PhaseEnd::Optimal);
            };
            let Some((r, step)) = self.leaving(c, bland, opts.pivot_tolerance) else {
                return Ok(PhaseEnd::Unbounded);
            };
            if step <= 1e-12 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            self.pivot(r, c);
        }
    }
}

pub(super) fn solve_with(p: &LpProblem, opts: &SolverOptions) -> Result<LpSolution, LpError> {
    p.validate()?;
    let n = p.num_vars();

    // nonnegative structural columns
    let mut maps = Vec::with_capacity(n);
    let mut ncols = 0usize;
    let mut bound_rows: Vec<(usize, f64)> = Vec::new();
    for &(lo, hi) in &p.bounds {
        let map = if lo.is_finite() {
            let col = ncols;
            ncols += 1;
            if hi.is_finite() {
                bound_rows.push((col, hi - lo));
            }
            VarMap::Shifted { col, offset: lo }
        } else if hi.is_finite() {
            let col = ncols;
            ncols += 1;
            VarMap::Mirrored { col, offset: hi }
        } else {
            let pos = ncols;
            ncols += 2;
            VarMap::Free { pos, neg: pos + 1 }
        };
        maps.push(map);
    }
    let structural = ncols;

    // rows over structural columns: (sparse terms, relation, rhs)
    let mut rows: Vec<(Vec<(usize, f64)>, Relation, f64)> =
        Vec::with_capacity(p.constraints.len() + bound_rows.len());
    for c in &p.constraints {
        let mut rhs = c.rhs;
        let mut terms = Vec::with_capacity(c.terms.len());
        for &(j, a) in &c.terms {
            if a == 0.0 {
                continue;
            }
            match maps[j] {
                VarMap::Shifted { col, offset } => {
                    rhs -= a * offset;
                    terms.push((col, a));
                }
                VarMap::Mirrored { col, offset } => {
                    rhs -= a * offset;
                    terms.push((col, -a));
                }
                VarMap::Free { pos, neg } => {
                    terms.push((pos, a));
                    terms.push((neg, -a));
                }
            }
        }
        rows.push((terms, c.relation, rhs));
    }
    for &(col, width) in &bound_rows {
        rows.push((vec![(col, 1.0)], Relation::Le, width));
    }

    // equilibrate rows, then normalize to nonnegative rhs
    for (terms, rel, rhs) in rows.iter_mut() {
        let big = terms.iter().fold(0.0, |m: f64, &(_, a)| m.max(a.abs()));
        if big > 0.0 && big != 1.0 {
            terms.iter_mut().for_each(|(_, a)| *a /= big);
            *rhs /= big;
        }
        if *rhs < 0.0 {
            *rhs = -*rhs;
            terms.iter_mut().for_each(|(_, a)| *a = -*a);
            *rel = match *rel {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            };
        }
    }

    let m = rows.len();
    let slacks = rows.iter().filter(|r| r.1 != Relation::Eq).count();
    let artificials = rows.iter().filter(|r| r.1 != Relation::Le).count();
    let cols = structural + slacks + artificials;
    let width = cols + 1;
    let mut t = Tableau {
        rows: m,
        cols,
        width,
        a: vec![0.0; m * width],
        obj: vec![0.0; width],
        basis: vec![0; m],
        is_basic: vec![false; cols],
        banned: vec![false; cols],
        active: vec![true; m],
        pivots: 0,
        scratch: Vec::new(),
    };
    let first_artificial = structural + slacks;
    let mut next_slack = structural;
    let mut next_art = first_artificial;
    for (i, (terms, rel, rhs)) in rows.iter().enumerate() {
        let base = i * width;
        for &(j, a) in terms {
            t.a[base + j] += a;
        }
        t.a[base + cols] = *rhs;
        match rel {
            Relation::Le => {
                t.a[base + next_slack] = 1.0;
                t.basis[i] = next_slack;
                next_slack += 1;
            }
            Relation::Ge => {
                t.a[base + next_slack] = -1.0;
                next_slack += 1;
                t.a[base + next_art] = 1.0;
                t.basis[i] = next_art;
                next_art += 1;
            }
            Relation::Eq => {
                t.a[base + next_art] = 1.0;
                t.basis[i] = next_art;
                next_art += 1;
            }
        }
        t.is_basic[t.basis[i]] = true;
    }
    drop(rows);

    // phase 1: minimize the sum of artificials
    if artificials > 0 {
        for i in 0..m {
            if t.basis[i] >= first_artificial {
                let base = i * width;
                for j in 0..width {
                    t.obj[j] -= t.a[base + j];
                }
            }
        }
        for j in first_artificial..cols {
            t.obj[j] = 0.0;
        }
        t.run(opts, 1.0)?;
        let infeasibility = -t.obj[cols];
        debug!("phase 1 done after {} pivots, infeasibility {infeasibility:e}", t.pivots);
        if infeasibility > FEASIBILITY_TOLERANCE {
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                objective: f64::NAN,
                x: vec![f64::NAN; n],
                pivots: t.pivots,
            });
        }
        // drive zero-level artificials out of the basis
        for r in 0..m {
            if t.basis[r] < first_artificial {
                continue;
            }
            let base = r * width;
            let mut best: Option<(usize, f64)> = None;
            for j in 0..first_artificial {
                let v = t.a[base + j].abs();
                if v > opts.pivot_tolerance && best.is_none_or(|(_, bv)| v > bv) {
                    best = Some((j, v));
                }
            }
            match best {
                Some((j, _)) => t.pivot(r, j),
                None => t.active[r] = false,
            }
        }
        for j in first_artificial..cols {
            t.banned[j] = true;
        }
    }

    // phase 2
    let mut cost = vec![0.0; cols];
    for (j, map) in maps.iter().enumerate() {
        let c = p.objective[j];
        match *map {
            VarMap::Shifted { col, .. } => cost[col] = c,
            VarMap::Mirrored { col, .. } => cost[col] = -c,
            VarMap::Free { pos, neg } => {
                cost[pos] = c;
                cost[neg] = -c;
            }
        }
    }
    t.obj[..cols].copy_from_slice(&cost);
    t.obj[cols] = 0.0;
    for i in 0..m {
        let cb = cost[t.basis[i]];
        if cb == 0.0 || !t.active[i] {
            continue;
        }
        let base = i * width;
        for j in 0..width {
            t.obj[j] -= cb * t.a[base + j];
        }
    }
    for i in 0..m {
        t.obj[t.basis[i]] = 0.0;
    }
    let cost_scale = cost.iter().fold(0.0, |m: f64, c| m.max(c.abs()));
    let end = t.run(opts, cost_scale)?;
    debug!("phase 2 done after {} pivots total", t.pivots);
    if let PhaseEnd::Unbounded = end {
        return Ok(LpSolution {
            status: LpStatus::Unbounded,
            objective: f64::NEG_INFINITY,
            x: vec![f64::NAN; n],
            pivots: t.pivots,
        });
    }

    let mut colval = vec![0.0; cols];
    for i in 0..m {
        if t.active[i] {
            colval[t.basis[i]] = t.rhs(i).max(0.0);
        }
    }
    let mut x: Vec<f64> = maps
        .iter()
        .map(|map| match *map {
            VarMap::Shifted { col, offset } => offset + colval[col],
            VarMap::Mirrored { col, offset } => offset - colval[col],
            VarMap::Free { pos, neg } => colval[pos] - colval[neg],
        })
        .collect();
    // snap values that drifted just outside their bounds
    for (v, &(lo, hi)) in x.iter_mut().zip(&p.bounds) {
        if *v < lo && *v > lo - BOUND_TOLERANCE {
            *v = lo;
        }
        if *v > hi && *v < hi + BOUND_TOLERANCE {
            *v = hi;
        }
    }
    let bound_violation = x
        .iter()
        .zip(&p.bounds)
        .map(|(&v, &(lo, hi))| (lo - v).max(v - hi).max(0.0))
        .fold(0.0, f64::max);
    let residual = p.max_violation(&x);
    if residual > FEASIBILITY_TOLERANCE || bound_violation > BOUND_TOLERANCE {
        return Err(LpError::Numerical {
            residual: residual.max(bound_violation),
        });
    }
    Ok(LpSolution {
        status: LpStatus::Optimal,
        objective: p.objective_value(&x),
        x,
        pivots: t.pivots,
    })
}
