use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{DlPlan, FulfillmentError, FulfillmentInstance};
use crate::rng::{mix_seed, search_cdf};
use crate::rounding::{round_into, select_scheme, MarginalMatrix, Scheme, Workspace};
use crate::RandomStream;

/// Row-sum slack accepted when turning plan rows into marginals.
const PLAN_ROW_TOLERANCE: f64 = 1e-6;

pub const REPORT_HEADER: &str =
    "instance_id,replication,policy,scheme,total_cost,fixed,unit,shortage,dlp,loss_pct,fcs_per_order,wall_ms,instance_seed,seed";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Policy {
    /// Each item from the cheapest FC that still has it in stock.
    Myopic,
    Independent,
    Dilate,
    ForceOpen,
    /// Per order type, whichever of dilate and force-open has the better
    /// guarantee.
    BestOf,
}

impl Policy {
    pub const ALL: [Policy; 5] = [
        Policy::Myopic,
        Policy::Independent,
        Policy::Dilate,
        Policy::ForceOpen,
        Policy::BestOf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Policy::Myopic => "myopic",
            Policy::Independent => "independent",
            Policy::Dilate => "dilate",
            Policy::ForceOpen => "force-open",
            Policy::BestOf => "best-of",
        }
    }

    /// Rounding scheme column of the report.
    pub fn scheme_label(self) -> &'static str {
        match self {
            Policy::Myopic => "none",
            Policy::Independent => Scheme::Independent.name(),
            Policy::Dilate => Scheme::Dilate.name(),
            Policy::ForceOpen => Scheme::ForceOpen.name(),
            Policy::BestOf => "select",
        }
    }

    fn index(self) -> u64 {
        Policy::ALL.iter().position(|&p| p == self).expect("listed") as u64
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Policy {
    type Err = FulfillmentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "myopic" => Ok(Policy::Myopic),
            "independent" | "indep" => Ok(Policy::Independent),
            "dilate" => Ok(Policy::Dilate),
            "force-open" | "force_open" | "forceopen" => Ok(Policy::ForceOpen),
            "best-of" | "best_of" | "bestof" | "best" => Ok(Policy::BestOf),
            other => Err(FulfillmentError::UnknownPolicy(other.to_string())),
        }
    }
}

/// Seed of the arrival sequence for one replication. Every policy sees the
/// same arrivals for a given `(instance_seed, replication)`.
pub fn arrival_seed(instance_seed: u64, replication: u64) -> u64 {
    mix_seed(instance_seed, 2 * replication)
}

/// Seed of a policy's own dispatch draws, independent of the arrivals.
pub fn decision_seed(instance_seed: u64, replication: u64, policy: Policy) -> u64 {
    mix_seed(mix_seed(instance_seed, 2 * replication + 1), policy.index())
}

/// Outcome of one simulated horizon under one policy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    pub instance_id: String,
    pub replication: u64,
    pub policy: Policy,
    pub total: f64,
    pub fixed: f64,
    pub unit: f64,
    pub shortage: f64,
    pub dlp: f64,
    pub loss_pct: f64,
    /// Orders that arrived over the horizon.
    pub orders: u64,
    /// Mean number of non-null FCs per arrived order.
    pub fcs_per_order: f64,
    /// Orders shipped from two or more non-null FCs.
    pub split_orders: u64,
    /// Orders with at least one unfulfilled item.
    pub short_orders: u64,
    pub wall_ms: f64,
    /// Seed the replication streams derive from; 0 for a direct [`simulate`].
    pub instance_seed: u64,
    /// Arrival stream seed.
    pub seed: u64,
    pub decision_seed: u64,
}

impl SimulationReport {
    /// One CSV row matching [`REPORT_HEADER`].
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.3},{},{}",
            self.instance_id,
            self.replication,
            self.policy,
            self.policy.scheme_label(),
            self.total,
            self.fixed,
            self.unit,
            self.shortage,
            self.dlp,
            self.loss_pct,
            self.fcs_per_order,
            self.wall_ms,
            self.instance_seed,
            self.seed
        )
    }
}

/// Percentage by which `cost` exceeds `dlp`.
pub fn loss_pct(cost: f64, dlp: f64) -> f64 {
    if dlp > 0.0 {
        100.0 * (cost - dlp) / dlp
    } else if cost == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Everything the policies need per order type, prepared once per plan.
#[derive(Debug, Clone)]
pub struct Dispatcher<'a> {
    inst: &'a FulfillmentInstance,
    dlp: f64,
    cdf: Vec<f64>,
    total_rate: f64,
    marginals: Vec<MarginalMatrix>,
    best: Vec<Scheme>,
    /// Per order type and item: stocking FCs by increasing unit cost.
    nearest: Vec<Vec<Vec<usize>>>,
}

impl<'a> Dispatcher<'a> {
    pub fn new(inst: &'a FulfillmentInstance, plan: &DlPlan) -> Result<Self, FulfillmentError> {
        inst.validate()?;
        plan.verify(inst)?;
        let k_all = inst.fcs + 1;
        let mut cdf = Vec::with_capacity(inst.orders.len());
        let mut acc = 0.0;
        for o in &inst.orders {
            acc += o.rate;
            cdf.push(acc);
        }
        let mut marginals = Vec::with_capacity(inst.orders.len());
        let mut best = Vec::with_capacity(inst.orders.len());
        let mut nearest = Vec::with_capacity(inst.orders.len());
        for (order, op) in inst.orders.iter().zip(&plan.orders) {
            let data: Vec<f64> = op.u.iter().flatten().copied().collect();
            let m = MarginalMatrix::with_tolerance(order.items.len(), k_all, data, PLAN_ROW_TOLERANCE)?;
            best.push(select_scheme(&m).scheme);
            marginals.push(m);
            nearest.push(
                order
                    .items
                    .iter()
                    .map(|&i| {
                        let mut ks: Vec<usize> = (1..k_all).filter(|&k| inst.stock(k, i) > Some(0)).collect();
                        ks.sort_by(|&a, &b| {
                            inst.unit(a, i, order.region)
                                .total_cmp(&inst.unit(b, i, order.region))
                                .then(a.cmp(&b))
                        });
                        ks
                    })
                    .collect(),
            );
        }
        Ok(Self {
            inst,
            dlp: plan.objective,
            cdf,
            total_rate: acc,
            marginals,
            best,
            nearest,
        })
    }

    pub fn instance(&self) -> &FulfillmentInstance {
        self.inst
    }

    pub fn dlp(&self) -> f64 {
        self.dlp
    }

    /// Scheme best-of dispatch uses for order type `o`.
    pub fn best_scheme(&self, o: usize) -> Scheme {
        self.best[o]
    }

    /// Draws the order type arriving in one step, or `None` when idle.
    #[inline]
    fn next_arrival(&self, arrivals: &mut RandomStream) -> Option<usize> {
        let u = arrivals.uniform();
        (u < self.total_rate).then(|| search_cdf(&self.cdf, u))
    }

    /// Simulates the full horizon. `arrivals` drives which orders arrive,
    /// `decisions` drives the rounding draws.
    pub fn run(
        &self,
        policy: Policy,
        arrivals: &mut RandomStream,
        decisions: &mut RandomStream,
    ) -> SimulationReport {
        let started = Instant::now();
        let inst = self.inst;
        let n = inst.items;
        let k_all = inst.fcs + 1;
        let mut stock: Vec<u64> = inst.inventory.iter().flatten().copied().collect();
        let mut ws = Workspace::new();
        let mut used = vec![false; k_all];
        let mut assignment: Vec<usize> = Vec::new();
        let (mut fixed, mut unit, mut shortage) = (0.0, 0.0, 0.0);
        let (mut orders, mut fc_uses, mut split, mut short) = (0u64, 0u64, 0u64, 0u64);

        for _ in 0..inst.horizon {
            let Some(o) = self.next_arrival(arrivals) else {
                continue;
            };
            let order = &inst.orders[o];
            let j = order.region;
            orders += 1;
            assignment.clear();
            match policy {
                Policy::Myopic => {
                    for (p, &i) in order.items.iter().enumerate() {
                        let k = self.nearest[o][p]
                            .iter()
                            .copied()
                            .find(|&k| stock[(k - 1) * n + i] > 0)
                            .unwrap_or(0);
                        assignment.push(k);
                    }
                }
                _ => {
                    let scheme = match policy {
                        Policy::Independent => Scheme::Independent,
                        Policy::Dilate => Scheme::Dilate,
                        Policy::ForceOpen => Scheme::ForceOpen,
                        _ => self.best[o],
                    };
                    round_into(scheme, &self.marginals[o], decisions, &mut ws);
                    assignment.extend_from_slice(&ws.z);
                }
            }

            used.iter_mut().for_each(|u| *u = false);
            for (&i, &k) in order.items.iter().zip(&assignment) {
                let mut k = k;
                if k > 0 {
                    let slot = &mut stock[(k - 1) * n + i];
                    if *slot == 0 {
                        k = 0;
                    } else {
                        *slot -= 1;
                    }
                }
                used[k] = true;
                if k == 0 {
                    shortage += inst.unit(0, i, j);
                } else {
                    unit += inst.unit(k, i, j);
                }
            }
            let mut real = 0;
            for (k, _) in used.iter().enumerate().filter(|(_, &u)| u) {
                fixed += inst.fixed(k, j);
                real += usize::from(k > 0);
            }
            fc_uses += real as u64;
            split += u64::from(real >= 2);
            short += u64::from(used[0]);
        }

        let total = fixed + unit + shortage;
        SimulationReport {
            instance_id: inst.label.clone(),
            replication: 0,
            policy,
            total,
            fixed,
            unit,
            shortage,
            dlp: self.dlp,
            loss_pct: loss_pct(total, self.dlp),
            orders,
            fcs_per_order: if orders > 0 { fc_uses as f64 / orders as f64 } else { 0.0 },
            split_orders: split,
            short_orders: short,
            wall_ms: started.elapsed().as_secs_f64() * 1e3,
            instance_seed: 0,
            seed: arrivals.seed(),
            decision_seed: decisions.seed(),
        }
    }

    /// Runs one replication with the standard seed derivation.
    pub fn replicate(&self, policy: Policy, instance_seed: u64, replication: u64) -> SimulationReport {
        let mut arrivals = RandomStream::new(arrival_seed(instance_seed, replication));
        let mut decisions = RandomStream::new(decision_seed(instance_seed, replication, policy));
        let mut report = self.run(policy, &mut arrivals, &mut decisions);
        report.replication = replication;
        report.instance_seed = instance_seed;
        report
    }
}

/// Simulates one horizon of `inst` under `policy`.
pub fn simulate(
    inst: &FulfillmentInstance,
    plan: &DlPlan,
    policy: Policy,
    arrivals: &mut RandomStream,
    decisions: &mut RandomStream,
) -> Result<SimulationReport, FulfillmentError> {
    Ok(Dispatcher::new(inst, plan)?.run(policy, arrivals, decisions))
}

#[cfg(test)]
mod tests {
    use super::super::instance::tiny_instance;
    use super::super::solve_dlp;
    use super::*;

    #[test]
    fn policy_names_round_trip() {
        for p in Policy::ALL {
            assert_eq!(p.name().parse::<Policy>().unwrap(), p);
        }
        assert!("greedy".parse::<Policy>().is_err());
    }

    #[test]
    fn seeds_are_distinct() {
        let a = arrival_seed(7, 0);
        assert_ne!(a, arrival_seed(7, 1));
        assert_ne!(a, arrival_seed(6, 1));
        assert_ne!(decision_seed(7, 0, Policy::Dilate), decision_seed(7, 0, Policy::ForceOpen));
    }

    #[test]
    fn ample_single_fc_costs_per_order() {
        let inst = tiny_instance(1_000_000);
        let plan = solve_dlp(&inst).unwrap();
        for policy in Policy::ALL {
            let r = simulate(&inst, &plan, policy, &mut RandomStream::new(3), &mut RandomStream::new(4)).unwrap();
            assert!((r.total - r.orders as f64 * 3.0).abs() < 1e-9);
            assert_eq!(r.shortage, 0.0);
            assert_eq!(r.fcs_per_order, 1.0);
        }
    }

    #[test]
    fn empty_stock_is_all_shortage() {
        let inst = tiny_instance(0);
        let plan = solve_dlp(&inst).unwrap();
        for policy in Policy::ALL {
            let r = simulate(&inst, &plan, policy, &mut RandomStream::new(3), &mut RandomStream::new(4)).unwrap();
            assert!((r.total - r.orders as f64 * 5.0).abs() < 1e-9);
            assert_eq!(r.short_orders, r.orders);
            assert_eq!(r.fcs_per_order, 0.0);
        }
    }

    #[test]
    fn stock_never_oversold() {
        let inst = tiny_instance(100);
        let plan = solve_dlp(&inst).unwrap();
        let r = simulate(&inst, &plan, Policy::Myopic, &mut RandomStream::new(9), &mut RandomStream::new(9)).unwrap();
        assert_eq!(r.orders - r.short_orders, 100);
    }

    #[test]
    fn csv_row_has_every_column() {
        let inst = tiny_instance(100);
        let plan = solve_dlp(&inst).unwrap();
        let d = Dispatcher::new(&inst, &plan).unwrap();
        let r = d.replicate(Policy::Dilate, 1, 2);
        assert_eq!(r.csv_row().split(',').count(), REPORT_HEADER.split(',').count());
        assert_eq!(r.replication, 2);
    }
}
