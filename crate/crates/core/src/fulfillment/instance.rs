use serde::{Deserialize, Serialize};

use super::FulfillmentError;

/// Slack allowed on the total arrival probability per step.
pub const RATE_TOLERANCE: f64 = 1e-12;

/// An order for the item set `items` from `region`, arriving in any given
/// step with probability `rate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderType {
    pub items: Vec<usize>,
    pub region: usize,
    pub rate: f64,
}

/// A dynamic fulfillment instance, serialized as JSON.
///
/// * `unit_cost[k][i][j]` is the cost of shipping item `i` from FC `k` to
///   region `j`; row `k = 0` holds the shortage costs.
/// * `fixed_cost[k][j]` is charged once per package from FC `k` to `j`.
/// * `inventory[k - 1][i]` is the starting stock of item `i` at FC `k >= 1`.
///
/// The probability that no order arrives in a step is one minus the sum of
/// the order rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FulfillmentInstance {
    #[serde(default)]
    pub label: String,
    pub items: usize,
    pub fcs: usize,
    pub regions: usize,
    pub horizon: u64,
    pub orders: Vec<OrderType>,
    pub unit_cost: Vec<Vec<Vec<f64>>>,
    pub fixed_cost: Vec<Vec<f64>>,
    pub inventory: Vec<Vec<u64>>,
}

impl FulfillmentInstance {
    pub fn validate(&self) -> Result<(), FulfillmentError> {
        let bad = |msg: String| Err(FulfillmentError::Invalid(msg));
        let (n, k, j) = (self.items, self.fcs, self.regions);
        if n == 0 || j == 0 {
            return bad("need at least one item and one region".into());
        }
        if self.horizon == 0 {
            return bad("horizon must be positive".into());
        }
        if self.unit_cost.len() != k + 1
            || self.unit_cost.iter().any(|per_item| {
                per_item.len() != n || per_item.iter().any(|r| r.len() != j)
            })
        {
            return bad(format!("unit_cost must be {} x {n} x {j}", k + 1));
        }
        if self.fixed_cost.len() != k + 1 || self.fixed_cost.iter().any(|r| r.len() != j) {
            return bad(format!("fixed_cost must be {} x {j}", k + 1));
        }
        if self.inventory.len() != k || self.inventory.iter().any(|r| r.len() != n) {
            return bad(format!("inventory must be {k} x {n}"));
        }
        let costs = self
            .unit_cost
            .iter()
            .flatten()
            .flatten()
            .chain(self.fixed_cost.iter().flatten());
        for &c in costs {
            if !c.is_finite() || c < 0.0 {
                return bad(format!("cost {c} is not a finite nonnegative number"));
            }
        }
        let mut total = 0.0;
        for (o, order) in self.orders.iter().enumerate() {
            if order.items.is_empty() {
                return bad(format!("order type {o} is empty"));
            }
            if order.region >= j {
                return bad(format!("order type {o} has region {} >= {j}", order.region));
            }
            if !(order.rate.is_finite() && order.rate >= 0.0) {
                return bad(format!("order type {o} has rate {}", order.rate));
            }
            let mut seen = vec![false; n];
            for &i in &order.items {
                if i >= n {
                    return bad(format!("order type {o} has item {i} >= {n}"));
                }
                if std::mem::replace(&mut seen[i], true) {
                    return bad(format!("order type {o} repeats item {i}"));
                }
            }
            total += order.rate;
        }
        if total > 1.0 + RATE_TOLERANCE {
            return bad(format!("order rates sum to {total} > 1"));
        }
        Ok(())
    }

    #[inline]
    pub fn unit(&self, fc: usize, item: usize, region: usize) -> f64 {
        self.unit_cost[fc][item][region]
    }

    #[inline]
    pub fn fixed(&self, fc: usize, region: usize) -> f64 {
        self.fixed_cost[fc][region]
    }

    /// Starting stock of `item` at `fc`; unbounded for the null FC.
    pub fn stock(&self, fc: usize, item: usize) -> Option<u64> {
        (fc > 0).then(|| self.inventory[fc - 1][item])
    }

    /// Probability that no order arrives in a step.
    pub fn idle_rate(&self) -> f64 {
        (1.0 - self.orders.iter().map(|o| o.rate).sum::<f64>()).max(0.0)
    }

    pub fn max_order_size(&self) -> usize {
        self.orders.iter().map(|o| o.items.len()).max().unwrap_or(0)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, FulfillmentError> {
        let inst: Self =
            serde_json::from_str(text).map_err(|e| FulfillmentError::Invalid(e.to_string()))?;
        inst.validate()?;
        Ok(inst)
    }
}

/// An instance with horizon and inventories multiplied by `theta`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledInstance {
    pub theta: f64,
    pub instance: FulfillmentInstance,
}

/// Multiplies the horizon and every inventory by `theta`, rounding each to
/// the nearest integer.
pub fn scale(inst: &FulfillmentInstance, theta: f64) -> Result<ScaledInstance, FulfillmentError> {
    if !(theta.is_finite() && theta > 0.0) {
        return Err(FulfillmentError::BadScale(theta));
    }
    let mut scaled = inst.clone();
    scaled.horizon = (inst.horizon as f64 * theta).round() as u64;
    for row in &mut scaled.inventory {
        for b in row.iter_mut() {
            *b = (*b as f64 * theta).round() as u64;
        }
    }
    Ok(ScaledInstance {
        theta,
        instance: scaled,
    })
}

#[cfg(test)]
pub(crate) fn tiny_instance(stock: u64) -> FulfillmentInstance {
    // one item, one region, one FC
    FulfillmentInstance {
        label: "tiny".into(),
        items: 1,
        fcs: 1,
        regions: 1,
        horizon: 1000,
        orders: vec![OrderType {
            items: vec![0],
            region: 0,
            rate: 0.5,
        }],
        unit_cost: vec![vec![vec![5.0]], vec![vec![1.0]]],
        fixed_cost: vec![vec![0.0], vec![2.0]],
        inventory: vec![vec![stock]],
    }
}
