//! Plain-text instance format and CSV reports.
//!
//! An instance is a header line `q K` followed by `q` lines of `K`
//! whitespace-separated probabilities. Blank lines and lines starting with
//! `#` are ignored.

use std::io::{self, Write};

use super::{check_bounds, guarantee, MarginalMatrix, McEstimate, RoundingError};

pub fn parse_matrix(text: &str) -> Result<MarginalMatrix, RoundingError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(n, l)| (n + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (hline, header) = lines.next().ok_or(RoundingError::EmptyInstance)?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|tok| {
            tok.parse().map_err(|_| RoundingError::Parse {
                line: hline,
                message: format!("expected an integer, found `{tok}`"),
            })
        })
        .collect::<Result<_, _>>()?;
    let [q, k] = dims[..] else {
        return Err(RoundingError::Parse {
            line: hline,
            message: "header must be `q K`".into(),
        });
    };
    let mut data = Vec::with_capacity(q * k);
    let mut rows = 0;
    for (line, body) in lines {
        if rows == q {
            return Err(RoundingError::Parse {
                line,
                message: format!("more than {q} rows"),
            });
        }
        let before = data.len();
        for tok in body.split_whitespace() {
            data.push(tok.parse::<f64>().map_err(|_| RoundingError::Parse {
                line,
                message: format!("expected a probability, found `{tok}`"),
            })?);
        }
        if data.len() - before != k {
            return Err(RoundingError::Parse {
                line,
                message: format!("expected {k} values, found {}", data.len() - before),
            });
        }
        rows += 1;
    }
    if rows != q {
        return Err(RoundingError::Parse {
            line: 0,
            message: format!("expected {q} rows, found {rows}"),
        });
    }
    MarginalMatrix::new(q, k, data)
}

pub fn format_matrix(m: &MarginalMatrix) -> String {
    let mut out = format!("{} {}\n", m.items(), m.fcs());
    for row in m.rows() {
        let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

/// Writes `item,fc,u,empirical,abs_err`.
pub fn write_marginal_csv<W: Write>(
    m: &MarginalMatrix,
    est: &McEstimate,
    out: W,
) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["item", "fc", "u", "empirical", "abs_err"])?;
    for i in 0..m.items() {
        for k in 0..m.fcs() {
            let u = m.get(i, k);
            let p = est.marginal(i, k);
            w.write_record([
                i.to_string(),
                k.to_string(),
                u.to_string(),
                p.to_string(),
                (p - u).abs().to_string(),
            ])?;
        }
    }
    w.flush()
}

/// Writes `fc,y,usage_empirical,bound,scheme`.
pub fn write_usage_csv<W: Write>(m: &MarginalMatrix, est: &McEstimate, out: W) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["fc", "y", "usage_empirical", "bound", "scheme"])?;
    let ratio = guarantee(est.scheme, m);
    for (k, &y) in m.usage_bounds_slice().iter().enumerate() {
        w.write_record([
            k.to_string(),
            y.to_string(),
            est.usage[k].to_string(),
            (ratio * y).to_string(),
            est.scheme.to_string(),
        ])?;
    }
    w.flush()
}

/// One-line pass/fail summary of [`check_bounds`].
pub fn summary_line(m: &MarginalMatrix, est: &McEstimate) -> String {
    let c = check_bounds(m, est);
    format!(
        "{} scheme={} samples={} marginal_violations={} usage_violations={} tail_violations={}",
        if c.passed() { "PASS" } else { "FAIL" },
        est.scheme,
        est.samples,
        c.marginal_violations,
        c.usage_violations,
        c.tail_violations
    )
}
