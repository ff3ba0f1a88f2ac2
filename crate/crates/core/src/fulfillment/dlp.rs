use serde::{Deserialize, Serialize};

use super::{FulfillmentError, FulfillmentInstance};
use crate::lp::{LpProblem, LpStatus, Relation};
use crate::rounding::{guarantee_dilate, guarantee_js};

/// Row-sum slack accepted on a solved plan.
const ASSIGNMENT_TOLERANCE: f64 = 1e-7;
/// Slack accepted on inventory rows of a solved plan.
const INVENTORY_TOLERANCE: f64 = 1e-6;

/// Variable layout of the LP built by [`build_dlp`].
#[derive(Debug, Clone, PartialEq)]
pub struct DlpIndex {
    /// `u[o][p]` lists `(fc, var)` for the `p`-th item of order type `o`.
    /// FCs other than the null FC that stock none of the item are omitted.
    pub u: Vec<Vec<Vec<(usize, usize)>>>,
    /// `y[o]` lists `(fc, var)` for every FC some item of `o` may use.
    pub y: Vec<Vec<(usize, usize)>>,
}

/// Fulfillment frequencies for one order type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderPlan {
    /// `u[p][k]`: share of the `p`-th item sent from FC `k` (0 = null).
    pub u: Vec<Vec<f64>>,
    /// `y[k] = max_p u[p][k]`.
    pub y: Vec<f64>,
}

/// A solved deterministic LP: the benchmark value and per-order frequencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DlPlan {
    pub objective: f64,
    pub orders: Vec<OrderPlan>,
}

/// Builds the deterministic LP.
///
/// Variables are `u` per (order type, item, FC) and `y` per (order type,
/// FC). Rows are: one inventory row per non-null (FC, item) that some order
/// can draw from, one assignment equality per (order type, item), and
/// linking rows `u - y <= 0`.
///
/// The LP is stated per unit of time: costs are weighted by the arrival
/// rate and inventories divided by the horizon. Its objective times the
/// horizon is the DLP value.
pub fn build_dlp(inst: &FulfillmentInstance) -> Result<(LpProblem, DlpIndex), FulfillmentError> {
    inst.validate()?;
    let k_all = inst.fcs + 1;
    let horizon = inst.horizon as f64;
    let mut p = LpProblem::new(0);
    let mut index = DlpIndex {
        u: Vec::with_capacity(inst.orders.len()),
        y: Vec::with_capacity(inst.orders.len()),
    };
    let mut inventory_terms: Vec<Vec<(usize, f64)>> = vec![Vec::new(); inst.fcs * inst.items];
    let mut links = Vec::new();

    for order in &inst.orders {
        let weight = order.rate;
        let j = order.region;
        let mut per_item = Vec::with_capacity(order.items.len());
        let mut reachable = vec![false; k_all];
        for &i in &order.items {
            let mut vars = Vec::new();
            for k in 0..k_all {
                if inst.stock(k, i) == Some(0) {
                    continue;
                }
                let var = p.add_var(weight * inst.unit(k, i, j), 0.0, f64::INFINITY);
                vars.push((k, var));
                reachable[k] = true;
                if k > 0 {
                    inventory_terms[(k - 1) * inst.items + i].push((var, weight));
                }
            }
            per_item.push(vars);
        }
        let ys: Vec<(usize, usize)> = (0..k_all)
            .filter(|&k| reachable[k])
            .map(|k| (k, p.add_var(weight * inst.fixed(k, j), 0.0, f64::INFINITY)))
            .collect();
        for vars in &per_item {
            p.add_constraint(vars.iter().map(|&(_, v)| (v, 1.0)).collect(), Relation::Eq, 1.0);
            for &(k, v) in vars {
                let yv = ys.iter().find(|&&(kk, _)| kk == k).expect("y exists").1;
                links.push((v, yv));
            }
        }
        index.u.push(per_item);
        index.y.push(ys);
    }
    for (v, yv) in links {
        p.add_constraint(vec![(v, 1.0), (yv, -1.0)], Relation::Le, 0.0);
    }
    for (slot, terms) in inventory_terms.into_iter().enumerate() {
        if terms.is_empty() {
            continue;
        }
        let (k, i) = (slot / inst.items + 1, slot % inst.items);
        p.add_constraint(terms, Relation::Le, inst.inventory[k - 1][i] as f64 / horizon);
    }
    Ok((p, index))
}

/// Solves the deterministic LP and post-processes `y = max u` per order.
pub fn solve_dlp(inst: &FulfillmentInstance) -> Result<DlPlan, FulfillmentError> {
    let (p, index) = build_dlp(inst)?;
    let sol = p.solve()?;
    if sol.status != LpStatus::Optimal {
        return Err(FulfillmentError::Status(sol.status));
    }
    let k_all = inst.fcs + 1;
    let orders = index
        .u
        .iter()
        .map(|per_item| {
            let u: Vec<Vec<f64>> = per_item
                .iter()
                .map(|vars| {
                    let mut row = vec![0.0; k_all];
                    for &(k, v) in vars {
                        row[k] = sol.x[v].max(0.0);
                    }
                    row
                })
                .collect();
            OrderPlan::from_u(u, k_all)
        })
        .collect();
    let mut plan = DlPlan {
        objective: 0.0,
        orders,
    };
    plan.objective = plan.cost(inst);
    plan.verify(inst)?;
    Ok(plan)
}

impl OrderPlan {
    pub fn from_u(u: Vec<Vec<f64>>, fcs_with_null: usize) -> Self {
        let mut y = vec![0.0_f64; fcs_with_null];
        for row in &u {
            for (yk, &v) in y.iter_mut().zip(row) {
                *yk = yk.max(v);
            }
        }
        Self { u, y }
    }
}

impl DlPlan {
    /// LP objective evaluated at this plan.
    pub fn cost(&self, inst: &FulfillmentInstance) -> f64 {
        let horizon = inst.horizon as f64;
        inst.orders
            .iter()
            .zip(&self.orders)
            .map(|(order, plan)| {
                let j = order.region;
                let unit: f64 = order
                    .items
                    .iter()
                    .zip(&plan.u)
                    .map(|(&i, row)| row.iter().enumerate().map(|(k, &v)| v * inst.unit(k, i, j)).sum::<f64>())
                    .sum();
                let fixed: f64 = plan.y.iter().enumerate().map(|(k, &y)| y * inst.fixed(k, j)).sum();
                horizon * order.rate * (unit + fixed)
            })
            .sum()
    }

    /// Checks shapes, assignment sums, `y >= u` and inventory feasibility.
    pub fn verify(&self, inst: &FulfillmentInstance) -> Result<(), FulfillmentError> {
        let k_all = inst.fcs + 1;
        if self.orders.len() != inst.orders.len() {
            return Err(FulfillmentError::PlanMismatch(format!(
                "{} order plans for {} order types",
                self.orders.len(),
                inst.orders.len()
            )));
        }
        let mut used = vec![0.0; inst.fcs * inst.items];
        for (o, (order, plan)) in inst.orders.iter().zip(&self.orders).enumerate() {
            if plan.u.len() != order.items.len()
                || plan.y.len() != k_all
                || plan.u.iter().any(|r| r.len() != k_all)
            {
                return Err(FulfillmentError::PlanMismatch(format!("order type {o} has the wrong shape")));
            }
            for (p, (&i, row)) in order.items.iter().zip(&plan.u).enumerate() {
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > ASSIGNMENT_TOLERANCE {
                    return Err(FulfillmentError::Invariant(format!(
                        "order type {o}, item {p}: frequencies sum to {sum}"
                    )));
                }
                for (k, &v) in row.iter().enumerate() {
                    if !(v >= 0.0) || v > plan.y[k] + ASSIGNMENT_TOLERANCE {
                        return Err(FulfillmentError::Invariant(format!(
                            "order type {o}, item {p}, FC {k}: u = {v}, y = {}",
                            plan.y[k]
                        )));
                    }
                    if k > 0 {
                        used[(k - 1) * inst.items + i] += inst.horizon as f64 * order.rate * v;
                    }
                }
            }
        }
        for (slot, &amount) in used.iter().enumerate() {
            let (k, i) = (slot / inst.items, slot % inst.items);
            let cap = inst.inventory[k][i] as f64;
            if amount > cap + INVENTORY_TOLERANCE.max(cap * 1e-12) {
                return Err(FulfillmentError::Invariant(format!(
                    "FC {} item {i}: planned {amount} exceeds stock {cap}",
                    k + 1
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }

    pub fn from_json(text: &str, inst: &FulfillmentInstance) -> Result<Self, FulfillmentError> {
        let plan: Self =
            serde_json::from_str(text).map_err(|e| FulfillmentError::PlanMismatch(e.to_string()))?;
        plan.verify(inst)?;
        Ok(plan)
    }
}

/// The asymptotic cost ratio of best-of dispatch over the LP benchmark.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaReport {
    /// Fixed-cost-weighted average of the per-order best guarantee.
    pub beta: f64,
    /// `1 + ln(largest order size)`, which always bounds `beta`.
    pub relaxed: f64,
}

pub fn theoretical_beta(inst: &FulfillmentInstance, plan: &DlPlan) -> BetaReport {
    let mut num = 0.0;
    let mut den = 0.0;
    for (order, op) in inst.orders.iter().zip(&plan.orders) {
        let q = order.items.len();
        let min_max = op
            .u
            .iter()
            .map(|row| row.iter().copied().fold(0.0, f64::max))
            .fold(1.0, f64::min);
        let alpha = guarantee_dilate(q).min(1.0 / min_max).min(guarantee_js(q));
        let weight: f64 = op
            .y
            .iter()
            .enumerate()
            .map(|(k, &y)| order.rate * inst.fixed(k, order.region) * y)
            .sum();
        num += weight * alpha;
        den += weight;
    }
    BetaReport {
        beta: if den > 0.0 { num / den } else { 1.0 },
        relaxed: guarantee_dilate(inst.max_order_size().max(1)),
    }
}
