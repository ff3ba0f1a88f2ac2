use std::fmt::Write;

use super::{LpProblem, Relation};

/// Renders `p` in fixed-format MPS for cross-checking with external
/// solvers. Rows are named `R0000001...`, columns `C0000001...`, and the
/// objective row `COST`.
pub fn to_fixed_mps(p: &LpProblem, name: &str) -> String {
    let mut out = String::new();
    let row_name = |i: usize| format!("R{:07}", i + 1);
    let col_name = |j: usize| format!("C{:07}", j + 1);
    let _ = writeln!(out, "NAME          {name}");
    out.push_str("ROWS\n N  COST\n");
    for (i, c) in p.constraints.iter().enumerate() {
        let tag = match c.relation {
            Relation::Le => 'L',
            Relation::Ge => 'G',
            Relation::Eq => 'E',
        };
        let _ = writeln!(out, " {tag}  {}", row_name(i));
    }

    // column-major entries
    let mut by_col: Vec<Vec<(usize, f64)>> = vec![Vec::new(); p.num_vars()];
    for (i, c) in p.constraints.iter().enumerate() {
        for &(j, a) in &c.terms {
            by_col[j].push((i, a));
        }
    }
    out.push_str("COLUMNS\n");
    for (j, entries) in by_col.iter().enumerate() {
        let cost = p.objective[j];
        if cost != 0.0 || entries.is_empty() {
            let _ = writeln!(out, "    {:<8}  {:<8}  {:>12}", col_name(j), "COST", num(cost));
        }
        for &(i, a) in entries {
            let _ = writeln!(out, "    {:<8}  {:<8}  {:>12}", col_name(j), row_name(i), num(a));
        }
    }
    out.push_str("RHS\n");
    for (i, c) in p.constraints.iter().enumerate() {
        if c.rhs != 0.0 {
            let _ = writeln!(out, "    {:<8}  {:<8}  {:>12}", "RHS", row_name(i), num(c.rhs));
        }
    }
    out.push_str("BOUNDS\n");
    for (j, &(lo, hi)) in p.bounds.iter().enumerate() {
        let col = col_name(j);
        match (lo.is_finite(), hi.is_finite()) {
            (false, false) => {
                let _ = writeln!(out, " FR BND       {col}");
            }
            (true, true) if lo == hi => {
                let _ = writeln!(out, " FX BND       {col}  {:>12}", num(lo));
            }
            (lo_fin, hi_fin) => {
                if !lo_fin {
                    let _ = writeln!(out, " MI BND       {col}");
                } else if lo != 0.0 {
                    let _ = writeln!(out, " LO BND       {col}  {:>12}", num(lo));
                }
                if hi_fin {
                    let _ = writeln!(out, " UP BND       {col}  {:>12}", num(hi));
                }
            }
        }
    }
    out.push_str("ENDATA\n");
    out
}

/// Shortest representation that fits the 12-character numeric field.
fn num(v: f64) -> String {
    let plain = format!("{v}");
    if plain.len() <= 12 {
        return plain;
    }
    for digits in (1..=6).rev() {
        let s = format!("{v:.digits$e}");
        if s.len() <= 12 {
            return s;
        }
    }
    format!("{v:.0e}")
}
