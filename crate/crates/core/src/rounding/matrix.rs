use serde::{Deserialize, Serialize};

use super::RoundingError;
use crate::rounding::schemes::hiding_probability;

/// Row sums may deviate from one by less than this before validation fails.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

/// A validated correlated-rounding instance: `q` items, each with a marginal
/// distribution over `K` FCs.
///
/// Derived quantities used by every scheme (column maxima, per-item favorite
/// FC, hiding probabilities) are computed once at construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMatrix", into = "RawMatrix")]
pub struct MarginalMatrix {
    items: usize,
    fcs: usize,
    u: Vec<f64>,
    y: Vec<f64>,
    target: Vec<usize>,
    hide: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawMatrix {
    rows: Vec<Vec<f64>>,
}

impl TryFrom<RawMatrix> for MarginalMatrix {
    type Error = RoundingError;

    fn try_from(raw: RawMatrix) -> Result<Self, Self::Error> {
        MarginalMatrix::from_rows(&raw.rows)
    }
}

impl From<MarginalMatrix> for RawMatrix {
    fn from(m: MarginalMatrix) -> Self {
        RawMatrix { rows: m.rows().map(<[f64]>::to_vec).collect() }
    }
}

/// Column maxima `y_k = max_i u_ki`: the least probability with which any
/// scheme must use FC `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct UsageBounds(pub Vec<f64>);

impl UsageBounds {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparsityStats {
    /// Largest number of FCs any single item can be assigned to.
    pub d: usize,
    /// `1 / min_i max_k u_ki`.
    pub alpha_force: f64,
}

impl MarginalMatrix {
    /// Validates a row-major `items x fcs` array of probabilities.
    pub fn new(items: usize, fcs: usize, data: Vec<f64>) -> Result<Self, RoundingError> {
        Self::checked(items, fcs, data, ROW_SUM_TOLERANCE, 0.0)
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, RoundingError> {
        let (items, fcs, data) = flatten(rows)?;
        Self::new(items, fcs, data)
    }

    /// Like [`MarginalMatrix::new`] but accepts row-sum deviations and
    /// negative entries up to `tolerance` in magnitude, clamping and
    /// renormalizing them. Intended for rows read off an LP solution.
    pub fn with_tolerance(
        items: usize,
        fcs: usize,
        data: Vec<f64>,
        tolerance: f64,
    ) -> Result<Self, RoundingError> {
        Self::checked(items, fcs, data, tolerance.max(ROW_SUM_TOLERANCE), tolerance.max(0.0))
    }

    fn checked(
        items: usize,
        fcs: usize,
        mut data: Vec<f64>,
        sum_tolerance: f64,
        negative_tolerance: f64,
    ) -> Result<Self, RoundingError> {
        if items == 0 || fcs == 0 {
            return Err(RoundingError::EmptyInstance);
        }
        if data.len() != items * fcs {
            return Err(RoundingError::Shape {
                expected: items * fcs,
                found: data.len(),
            });
        }
        for (item, row) in data.chunks_exact_mut(fcs).enumerate() {
            for (fc, v) in row.iter_mut().enumerate() {
                if !v.is_finite() {
                    return Err(RoundingError::NonFinite { item, fc });
                }
                if *v < 0.0 {
                    if *v < -negative_tolerance || negative_tolerance == 0.0 {
                        return Err(RoundingError::NegativeEntry { item, fc, value: *v });
                    }
                    *v = 0.0;
                }
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() >= sum_tolerance {
                return Err(RoundingError::RowSumMismatch { item, sum });
            }
            if sum != 1.0 {
                row.iter_mut().for_each(|v| *v /= sum);
            }
        }
        Ok(Self::build(items, fcs, data))
    }

    fn build(items: usize, fcs: usize, u: Vec<f64>) -> Self {
        let mut y = vec![0.0_f64; fcs];
        let mut target = Vec::with_capacity(items);
        let mut hide = Vec::with_capacity(items);
        for row in u.chunks_exact(fcs) {
            let mut best = 0;
            for (k, &v) in row.iter().enumerate() {
                if v > y[k] {
                    y[k] = v;
                }
                if v > row[best] {
                    best = k;
                }
            }
            target.push(best);
            hide.push(hiding_probability(row[best]).unwrap_or(1.0));
        }
        Self {
            items,
            fcs,
            u,
            y,
            target,
            hide,
        }
    }

    pub fn items(&self) -> usize {
        self.items
    }

    pub fn fcs(&self) -> usize {
        self.fcs
    }

    #[inline]
    pub fn get(&self, item: usize, fc: usize) -> f64 {
        self.u[item * self.fcs + fc]
    }

    #[inline]
    pub fn row(&self, item: usize) -> &[f64] {
        &self.u[item * self.fcs..(item + 1) * self.fcs]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.u.chunks_exact(self.fcs)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.u
    }

    /// Column maxima `y_k`.
    #[inline]
    pub fn usage_bounds_slice(&self) -> &[f64] {
        &self.y
    }

    pub fn usage_lower_bounds(&self) -> UsageBounds {
        UsageBounds(self.y.clone())
    }

    /// Favorite FC of `item` (largest marginal, lowest index on ties).
    #[inline]
    pub fn target(&self, item: usize) -> usize {
        self.target[item]
    }

    #[inline]
    pub(crate) fn hide_probability(&self, item: usize) -> f64 {
        self.hide[item]
    }

    pub fn sparsity(&self) -> SparsityStats {
        let d = self
            .rows()
            .map(|row| row.iter().filter(|&&v| v > 0.0).count())
            .max()
            .unwrap_or(0);
        let min_max = (0..self.items)
            .map(|i| self.get(i, self.target[i]))
            .fold(f64::INFINITY, f64::min);
        SparsityStats {
            d,
            alpha_force: 1.0 / min_max,
        }
    }

    /// FCs that some item can be assigned to.
    pub fn active_fcs(&self) -> impl Iterator<Item = usize> + '_ {
        self.y.iter().enumerate().filter(|(_, &y)| y > 0.0).map(|(k, _)| k)
    }

    /// Every row puts all of its mass on a single FC.
    pub fn is_deterministic(&self) -> bool {
        self.sparsity().d == 1
    }
}

/// Column-wise maxima of a validated instance.
pub fn usage_lower_bounds(m: &MarginalMatrix) -> UsageBounds {
    m.usage_lower_bounds()
}

/// Validates raw rows into a [`MarginalMatrix`].
pub fn validate<R: AsRef<[f64]>>(rows: &[R]) -> Result<MarginalMatrix, RoundingError> {
    MarginalMatrix::from_rows(rows)
}

fn flatten<R: AsRef<[f64]>>(rows: &[R]) -> Result<(usize, usize, Vec<f64>), RoundingError> {
    let items = rows.len();
    let fcs = rows.first().map_or(0, |r| r.as_ref().len());
    if items == 0 || fcs == 0 {
        return Err(RoundingError::EmptyInstance);
    }
    let mut data = Vec::with_capacity(items * fcs);
    for (item, row) in rows.iter().enumerate() {
        let row = row.as_ref();
        if row.len() != fcs {
            return Err(RoundingError::RaggedRow {
                item,
                expected: fcs,
                found: row.len(),
            });
        }
        data.extend_from_slice(row);
    }
    Ok((items, fcs, data))
}
