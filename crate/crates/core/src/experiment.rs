//! Simulation campaigns: generate instances, solve each DLP once, replay
//! shared arrival sequences under every policy, and aggregate.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fulfillment::{
    scale, solve_dlp, theoretical_beta, Dispatcher, FulfillmentError, Policy, SimulationReport,
    REPORT_HEADER,
};
use crate::instance_gen::{generate, GeneratorConfig, GeneratorError};
use crate::rng::mix_seed;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid campaign config: {0}")]
    Config(String),
    #[error("instance {instance}: {source}")]
    Generator {
        instance: usize,
        source: GeneratorError,
    },
    #[error("instance {instance}: {source}")]
    Fulfillment {
        instance: usize,
        source: FulfillmentError,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    /// Generator settings; its `seed` is overwritten per instance.
    pub generator: GeneratorConfig,
    pub instances: usize,
    pub replications: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "all_policies")]
    pub policies: Vec<Policy>,
    /// Multiplies horizon and inventories after generation.
    #[serde(default = "unit_scale")]
    pub scale: f64,
    /// Write measured wall times; disable for byte-reproducible output.
    #[serde(default = "yes")]
    pub record_timing: bool,
}

fn all_policies() -> Vec<Policy> {
    Policy::ALL.to_vec()
}

fn unit_scale() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

impl CampaignConfig {
    pub fn new(generator: GeneratorConfig, instances: usize, replications: usize, base_seed: u64) -> Self {
        Self {
            generator,
            instances,
            replications,
            base_seed,
            policies: all_policies(),
            scale: 1.0,
            record_timing: true,
        }
    }

    /// Parses TOML, or JSON when the text starts with `{`.
    pub fn parse(text: &str) -> Result<Self, ExperimentError> {
        let cfg: Self = if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))?
        } else {
            toml::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.instances == 0 || self.replications == 0 {
            return Err(ExperimentError::Config("instances and replications must be at least 1".into()));
        }
        if self.policies.is_empty() {
            return Err(ExperimentError::Config("no policies requested".into()));
        }
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(ExperimentError::Config(format!("scale {} must be positive", self.scale)));
        }
        self.generator
            .validate()
            .map_err(|e| ExperimentError::Config(e.to_string()))
    }

    /// Seed of the `index`-th generated instance.
    pub fn instance_seed(&self, index: usize) -> u64 {
        mix_seed(self.base_seed, index as u64)
    }
}

/// Per-instance facts recorded alongside the simulation rows.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstanceSummary {
    pub index: usize,
    pub seed: u64,
    pub dlp: f64,
    pub beta: f64,
    pub beta_relaxed: f64,
    pub orphans: usize,
}

/// One policy on one instance, over all replications.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstancePolicyStats {
    pub instance: usize,
    pub policy: Policy,
    pub dlp: f64,
    pub mean_cost: f64,
    /// Standard error of the mean cost across replications.
    pub se_cost: f64,
    /// Loss of the mean cost over the DLP, in percent.
    pub loss_pct: f64,
    pub fcs_per_order: f64,
    /// Total wall time across replications.
    pub wall_ms: f64,
}

/// One policy across instances: mean and standard error over instances.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolicyAggregate {
    pub policy: Policy,
    pub instances: usize,
    pub mean_loss_pct: f64,
    pub se_loss_pct: f64,
    pub fcs_per_order: f64,
    pub se_fcs_per_order: f64,
    /// Total simulation wall time per instance, averaged over instances.
    pub runtime_ms: f64,
}

#[derive(Debug, Clone)]
pub struct CampaignResult {
    pub config: CampaignConfig,
    pub instances: Vec<InstanceSummary>,
    pub rows: Vec<SimulationReport>,
    pub per_instance: Vec<InstancePolicyStats>,
    pub aggregate: Vec<PolicyAggregate>,
}

/// Sample mean and standard error of the mean.
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Runs every policy over `replications` shared arrival sequences of one
/// instance, in parallel. Rows come back in (replication, policy) order.
pub fn replay(
    dispatcher: &Dispatcher<'_>,
    instance_seed: u64,
    replications: usize,
    policies: &[Policy],
    record_timing: bool,
) -> Vec<SimulationReport> {
    let jobs: Vec<(u64, Policy)> = (0..replications as u64)
        .flat_map(|r| policies.iter().map(move |&p| (r, p)))
        .collect();
    let mut reports: Vec<SimulationReport> = jobs
        .par_iter()
        .map(|&(r, p)| dispatcher.replicate(p, instance_seed, r))
        .collect();
    if !record_timing {
        reports.iter_mut().for_each(|r| r.wall_ms = 0.0);
    }
    reports
}

/// Mean cost, its standard error, loss and FCs per order for each policy.
pub fn policy_stats(
    instance: usize,
    dlp: f64,
    reports: &[SimulationReport],
    policies: &[Policy],
) -> Vec<InstancePolicyStats> {
    policies
        .iter()
        .map(|&policy| {
            let mine: Vec<&SimulationReport> = reports.iter().filter(|r| r.policy == policy).collect();
            let costs: Vec<f64> = mine.iter().map(|r| r.total).collect();
            let (mean_cost, se_cost) = mean_se(&costs);
            let fcs: Vec<f64> = mine.iter().map(|r| r.fcs_per_order).collect();
            InstancePolicyStats {
                instance,
                policy,
                dlp,
                mean_cost,
                se_cost,
                loss_pct: crate::fulfillment::loss_pct(mean_cost, dlp),
                fcs_per_order: mean_se(&fcs).0,
                wall_ms: mine.iter().map(|r| r.wall_ms).sum(),
            }
        })
        .collect()
}

pub fn run_campaign(cfg: &CampaignConfig) -> Result<CampaignResult, ExperimentError> {
    cfg.validate()?;
    let mut instances = Vec::with_capacity(cfg.instances);
    let mut rows = Vec::new();
    let mut per_instance = Vec::new();

    for index in 0..cfg.instances {
        let seed = cfg.instance_seed(index);
        let mut gen_cfg = cfg.generator.clone();
        gen_cfg.seed = seed;
        let generated = generate(&gen_cfg).map_err(|source| ExperimentError::Generator { instance: index, source })?;
        let wrap = |source| ExperimentError::Fulfillment { instance: index, source };
        let mut inst = scale(&generated.instance, cfg.scale).map_err(wrap)?.instance;
        inst.label = format!("{}-{index}", cfg.base_seed);
        let plan = solve_dlp(&inst).map_err(wrap)?;
        let beta = theoretical_beta(&inst, &plan);
        let dispatcher = Dispatcher::new(&inst, &plan).map_err(wrap)?;
        log::info!("instance {index}: DLP {:.3}, beta {:.4}", plan.objective, beta.beta);

        let reports = replay(&dispatcher, seed, cfg.replications, &cfg.policies, cfg.record_timing);
        per_instance.extend(policy_stats(index, plan.objective, &reports, &cfg.policies));
        instances.push(InstanceSummary {
            index,
            seed,
            dlp: plan.objective,
            beta: beta.beta,
            beta_relaxed: beta.relaxed,
            orphans: generated.orphans.len(),
        });
        rows.extend(reports);
    }

    let aggregate = cfg
        .policies
        .iter()
        .map(|&policy| {
            let stats: Vec<&InstancePolicyStats> = per_instance.iter().filter(|s| s.policy == policy).collect();
            let losses: Vec<f64> = stats.iter().map(|s| s.loss_pct).collect();
            let fcs: Vec<f64> = stats.iter().map(|s| s.fcs_per_order).collect();
            let (mean_loss_pct, se_loss_pct) = mean_se(&losses);
            let (fcs_per_order, se_fcs_per_order) = mean_se(&fcs);
            PolicyAggregate {
                policy,
                instances: stats.len(),
                mean_loss_pct,
                se_loss_pct,
                fcs_per_order,
                se_fcs_per_order,
                runtime_ms: stats.iter().map(|s| s.wall_ms).sum::<f64>() / stats.len() as f64,
            }
        })
        .collect();

    Ok(CampaignResult {
        config: cfg.clone(),
        instances,
        rows,
        per_instance,
        aggregate,
    })
}

impl CampaignResult {
    pub fn aggregate_for(&self, policy: Policy) -> Option<&PolicyAggregate> {
        self.aggregate.iter().find(|a| a.policy == policy)
    }

    /// Per-replication rows with a header.
    pub fn rows_csv(&self) -> String {
        let mut out = String::with_capacity(self.rows.len() * 120);
        out.push_str(REPORT_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.csv_row());
            out.push('\n');
        }
        out
    }

    /// One row per policy.
    pub fn aggregate_csv(&self) -> String {
        let mut out = String::from("policy,instances,mean_loss_pct,se_loss_pct,fcs_per_order,se_fcs_per_order,runtime_ms\n");
        for a in &self.aggregate {
            let _ = writeln!(
                out,
                "{},{},{:.6},{:.6},{:.6},{:.6},{:.3}",
                a.policy, a.instances, a.mean_loss_pct, a.se_loss_pct, a.fcs_per_order, a.se_fcs_per_order, a.runtime_ms
            );
        }
        out
    }

    /// Policies as columns, metrics as rows.
    pub fn table(&self) -> String {
        let mut out = format!("{:<16}", "");
        for a in &self.aggregate {
            let _ = write!(out, "{:>14}", a.policy.name());
        }
        out.push('\n');
        let mut line = |label: &str, f: &dyn Fn(&PolicyAggregate) -> String| {
            let _ = write!(out, "{label:<16}");
            for a in &self.aggregate {
                let _ = write!(out, "{:>14}", f(a));
            }
            out.push('\n');
        };
        line("avg loss", &|a| format!("{:.2}%", a.mean_loss_pct));
        line("  (se)", &|a| format!("{:.2}", a.se_loss_pct));
        line("FCs per order", &|a| format!("{:.3}", a.fcs_per_order));
        line("runtime (ms)", &|a| format!("{:.1}", a.runtime_ms));
        out
    }
}
