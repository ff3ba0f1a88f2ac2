//! A self-contained dense two-phase simplex solver.
//!
//! Problems are stated as `min c'x` subject to sparse linear rows with a
//! relation and right-hand side, plus per-variable bounds (possibly
//! infinite). Optimal answers are re-checked against the original rows
//! before they are returned.

mod mps;
mod simplex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use mps::to_fixed_mps;
pub use simplex::SolverOptions;

/// Absolute residual allowed on a certified optimal solution.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-7;
/// Absolute slack allowed on variable bounds.
pub const BOUND_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    /// `(variable, coefficient)` pairs; repeated variables are summed.
    pub terms: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(j, a)| a * x[j]).sum()
    }

    /// Amount by which `x` violates this row (0 when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let lhs = self.activity(x);
        match self.relation {
            Relation::Le => (lhs - self.rhs).max(0.0),
            Relation::Ge => (self.rhs - lhs).max(0.0),
            Relation::Eq => (lhs - self.rhs).abs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpProblem {
    /// Cost vector, minimized.
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
    /// `[lower, upper]` per variable; infinities allowed.
    pub bounds: Vec<(f64, f64)>,
}

impl LpProblem {
    /// `n` variables with zero cost and bounds `[0, inf)`.
    pub fn new(n: usize) -> Self {
        Self {
            objective: vec![0.0; n],
            constraints: Vec::new(),
            bounds: vec![(0.0, f64::INFINITY); n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    /// Appends a variable and returns its index.
    pub fn add_var(&mut self, cost: f64, lower: f64, upper: f64) -> usize {
        self.objective.push(cost);
        self.bounds.push((lower, upper));
        self.objective.len() - 1
    }

    pub fn add_constraint(&mut self, terms: Vec<(usize, f64)>, relation: Relation, rhs: f64) {
        self.constraints.push(Constraint {
            terms,
            relation,
            rhs,
        });
    }

    /// Builds a problem from dense rows.
    pub fn from_dense(
        objective: Vec<f64>,
        rows: Vec<(Vec<f64>, Relation, f64)>,
        bounds: Vec<(f64, f64)>,
    ) -> Result<Self, LpError> {
        let n = objective.len();
        let mut constraints = Vec::with_capacity(rows.len());
        for (idx, (coeffs, relation, rhs)) in rows.into_iter().enumerate() {
            if coeffs.len() != n {
                return Err(LpError::DimensionMismatch(format!(
                    "row {idx} has {} coefficients, objective has {n}",
                    coeffs.len()
                )));
            }
            let terms = coeffs
                .into_iter()
                .enumerate()
                .filter(|(_, a)| *a != 0.0)
                .collect();
            constraints.push(Constraint {
                terms,
                relation,
                rhs,
            });
        }
        Ok(Self {
            objective,
            constraints,
            bounds,
        })
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        if self.bounds.len() != n {
            return Err(LpError::DimensionMismatch(format!(
                "{} bounds for {n} variables",
                self.bounds.len()
            )));
        }
        if let Some(j) = self.objective.iter().position(|c| !c.is_finite()) {
            return Err(LpError::NonFinite(format!("objective coefficient {j}")));
        }
        for (j, &(lo, hi)) in self.bounds.iter().enumerate() {
            if lo.is_nan() || hi.is_nan() || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
                return Err(LpError::NonFinite(format!("bounds of variable {j}")));
            }
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if !c.rhs.is_finite() {
                return Err(LpError::NonFinite(format!("rhs of row {i}")));
            }
            for &(j, a) in &c.terms {
                if j >= n {
                    return Err(LpError::DimensionMismatch(format!(
                        "row {i} references variable {j} of {n}"
                    )));
                }
                if !a.is_finite() {
                    return Err(LpError::NonFinite(format!("row {i}, variable {j}")));
                }
            }
        }
        Ok(())
    }

    /// Largest row violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        self.constraints
            .iter()
            .map(|c| c.violation(x))
            .fold(0.0, f64::max)
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    pub fn solve(&self) -> Result<LpSolution, LpError> {
        solve(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Objective at `x`; meaningful only when optimal.
    pub objective: f64,
    pub x: Vec<f64>,
    /// Simplex pivots performed over both phases.
    pub pivots: usize,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite data in {0}")]
    NonFinite(String),
    #[error("iteration limit of {0} pivots reached")]
    IterationLimit(usize),
    #[error("solution failed certification: residual {residual:e}")]
    Numerical { residual: f64 },
}

/// Solves `p` with default options.
pub fn solve(p: &LpProblem) -> Result<LpSolution, LpError> {
    simplex::solve_with(p, &SolverOptions::default())
}

pub fn solve_with(p: &LpProblem, opts: &SolverOptions) -> Result<LpSolution, LpError> {
    simplex::solve_with(p, opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_var(rows: Vec<(f64, Relation, f64)>, cost: f64, bounds: (f64, f64)) -> LpSolution {
        let rows = rows.into_iter().map(|(a, r, b)| (vec![a], r, b)).collect();
        LpProblem::from_dense(vec![cost], rows, vec![bounds])
            .unwrap()
            .solve()
            .unwrap()
    }

    #[test]
    fn bounded_minimum() {
        let s = one_var(
            vec![(1.0, Relation::Ge, 3.0), (1.0, Relation::Le, 10.0)],
            1.0,
            (0.0, f64::INFINITY),
        );
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective - 3.0).abs() < 1e-12);
    }

    #[test]
    fn unbounded_ray() {
        let s = one_var(vec![(1.0, Relation::Ge, 0.0)], -1.0, (0.0, f64::INFINITY));
        assert_eq!(s.status, LpStatus::Unbounded);
    }

    #[test]
    fn contradictory_rows() {
        let s = one_var(
            vec![(1.0, Relation::Le, 1.0), (1.0, Relation::Ge, 2.0)],
            0.0,
            (0.0, f64::INFINITY),
        );
        assert_eq!(s.status, LpStatus::Infeasible);
    }

    #[test]
    fn free_and_mirrored_variables() {
        // min x + y, x free with x >= -5 as a row, y <= 2 with no lower bound, x + y >= -4
        let p = LpProblem::from_dense(
            vec![1.0, 1.0],
            vec![
                (vec![1.0, 0.0], Relation::Ge, -5.0),
                (vec![1.0, 1.0], Relation::Ge, -4.0),
                (vec![0.0, 1.0], Relation::Ge, -1.0),
            ],
            vec![(f64::NEG_INFINITY, f64::INFINITY), (f64::NEG_INFINITY, 2.0)],
        )
        .unwrap();
        let s = p.solve().unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective + 4.0).abs() < 1e-9);
        assert!(p.max_violation(&s.x) < 1e-9);
    }

    #[test]
    fn boxed_variable() {
        // max x + 2y  s.t. x + y <= 3, x in [1, 2], y in [0.5, 1.5]
        let p = LpProblem::from_dense(
            vec![-1.0, -2.0],
            vec![(vec![1.0, 1.0], Relation::Le, 3.0)],
            vec![(1.0, 2.0), (0.5, 1.5)],
        )
        .unwrap();
        let s = p.solve().unwrap();
        assert!((s.objective + 4.5).abs() < 1e-9, "{s:?}");
        assert!((s.x[0] - 1.5).abs() < 1e-9 && (s.x[1] - 1.5).abs() < 1e-9);
    }

    #[test]
    fn redundant_equalities() {
        // x + y = 1 stated twice, plus 2x + 2y = 2
        let p = LpProblem::from_dense(
            vec![1.0, 2.0],
            vec![
                (vec![1.0, 1.0], Relation::Eq, 1.0),
                (vec![1.0, 1.0], Relation::Eq, 1.0),
                (vec![2.0, 2.0], Relation::Eq, 2.0),
            ],
            vec![(0.0, f64::INFINITY); 2],
        )
        .unwrap();
        let s = p.solve().unwrap();
        assert!((s.objective - 1.0).abs() < 1e-12);
        assert_eq!(s.x, vec![1.0, 0.0]);
    }

    #[test]
    fn degenerate_cycling_example() {
        // Beale's example, which cycles under the textbook rule without
        // an anti-cycling safeguard
        let p = LpProblem::from_dense(
            vec![-0.75, 150.0, -0.02, 6.0],
            vec![
                (vec![0.25, -60.0, -0.04, 9.0], Relation::Le, 0.0),
                (vec![0.5, -90.0, -0.02, 3.0], Relation::Le, 0.0),
                (vec![0.0, 0.0, 1.0, 0.0], Relation::Le, 1.0),
            ],
            vec![(0.0, f64::INFINITY); 4],
        )
        .unwrap();
        let opts = SolverOptions {
            degenerate_switch: 3,
            ..SolverOptions::default()
        };
        let s = solve_with(&p, &opts).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective + 0.05).abs() < 1e-9, "{}", s.objective);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            LpProblem::from_dense(vec![1.0], vec![(vec![1.0, 2.0], Relation::Le, 1.0)], vec![(0.0, 1.0)]),
            Err(LpError::DimensionMismatch(_))
        ));
        let mut p = LpProblem::new(1);
        p.add_constraint(vec![(3, 1.0)], Relation::Le, 1.0);
        assert!(matches!(p.solve(), Err(LpError::DimensionMismatch(_))));
        let mut p = LpProblem::new(1);
        p.add_constraint(vec![(0, 1.0)], Relation::Le, f64::INFINITY);
        assert!(matches!(p.solve(), Err(LpError::NonFinite(_))));
        let mut p = LpProblem::new(2);
        p.objective = vec![-1.0, -1.0];
        p.add_constraint(vec![(0, 1.0), (1, 2.0)], Relation::Le, 4.0);
        p.add_constraint(vec![(0, 3.0), (1, 1.0)], Relation::Le, 6.0);
        let opts = SolverOptions {
            max_pivots: 1,
            ..SolverOptions::default()
        };
        assert_eq!(solve_with(&p, &opts), Err(LpError::IterationLimit(1)));
    }

    #[test]
    fn same_problem_same_answer() {
        let mut p = LpProblem::new(3);
        p.objective = vec![-1.0, -1.0, -1.0];
        for (i, row) in [[1.0, 1.0, 0.0], [0.0, 1.0, 1.0], [1.0, 0.0, 1.0]].iter().enumerate() {
            p.add_constraint(row.iter().copied().enumerate().collect(), Relation::Le, 1.0 + i as f64);
        }
        let a = p.solve().unwrap();
        let b = p.solve().unwrap();
        assert_eq!(a, b);
    }
}
