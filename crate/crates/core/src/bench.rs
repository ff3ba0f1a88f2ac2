//! Wall-clock timing of the rounding schemes over growing instances.

use std::time::Instant;

use serde::Serialize;

use crate::rounding::{round_into, MarginalMatrix, Scheme, Workspace};
use crate::RandomStream;

/// A dense `items x fcs` instance with i.i.d. exponential weights per row.
pub fn random_dense_instance(items: usize, fcs: usize, rng: &mut RandomStream) -> MarginalMatrix {
    let mut data = Vec::with_capacity(items * fcs);
    for _ in 0..items {
        let row: Vec<f64> = (0..fcs).map(|_| rng.exponential(1.0)).collect();
        let s: f64 = row.iter().sum();
        data.extend(row.iter().map(|v| v / s));
    }
    MarginalMatrix::with_tolerance(items, fcs, data, 1e-9).expect("rows are normalized")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BenchPoint {
    pub scheme: crate::rounding::Scheme,
    pub items: usize,
    pub fcs: usize,
    /// Median over batches of the mean time per call.
    pub ns_per_call: f64,
}

impl BenchPoint {
    pub fn size(&self) -> f64 {
        (self.items * self.fcs) as f64
    }
}

/// Median time per call of `scheme` on `m`, over `batches` batches sized to
/// roughly `budget_ns` each.
pub fn time_scheme(scheme: Scheme, m: &MarginalMatrix, seed: u64, batches: usize, budget_ns: f64) -> f64 {
    let mut rng = RandomStream::new(seed);
    let mut ws = Workspace::new();
    // warm up and size the batch
    let start = Instant::now();
    let mut warm = 0usize;
    while warm < 3 || (start.elapsed().as_nanos() as f64) < budget_ns / 10.0 {
        round_into(scheme, m, &mut rng, &mut ws);
        warm += 1;
    }
    let per_call = start.elapsed().as_nanos() as f64 / warm as f64;
    let calls = ((budget_ns / per_call.max(1.0)) as usize).max(1);
    let mut samples: Vec<f64> = (0..batches.max(1))
        .map(|_| {
            let t = Instant::now();
            for _ in 0..calls {
                round_into(scheme, m, &mut rng, &mut ws);
            }
            std::hint::black_box(&ws.z);
            t.elapsed().as_nanos() as f64 / calls as f64
        })
        .collect();
    samples.sort_by(f64::total_cmp);
    samples[samples.len() / 2]
}

/// Times `scheme` at every `items` value against a fixed FC count.
pub fn sweep(scheme: Scheme, item_counts: &[usize], fcs: usize, seed: u64) -> Vec<BenchPoint> {
    let mut rng = RandomStream::new(seed);
    item_counts
        .iter()
        .map(|&items| {
            let m = random_dense_instance(items, fcs, &mut rng);
            BenchPoint {
                scheme,
                items,
                fcs,
                ns_per_call: time_scheme(scheme, &m, seed ^ items as u64, 7, 2e7),
            }
        })
        .collect()
}

/// `q = 10, 20, 40, ..., 1280`.
pub fn doubling_items() -> Vec<usize> {
    (0..8).map(|p| 10 << p).collect()
}

/// Least-squares line `t = a + b x` through the points.
pub fn linear_fit(points: &[(f64, f64)]) -> (f64, f64) {
    weighted_linear_fit(points, &vec![1.0; points.len()])
}

/// Least-squares line minimizing `sum_j w_j (t_j - a - b x_j)^2`.
pub fn weighted_linear_fit(points: &[(f64, f64)], weights: &[f64]) -> (f64, f64) {
    let w: f64 = weights.iter().sum();
    let mx = points.iter().zip(weights).map(|(p, w)| w * p.0).sum::<f64>() / w;
    let my = points.iter().zip(weights).map(|(p, w)| w * p.1).sum::<f64>() / w;
    let sxy: f64 = points.iter().zip(weights).map(|(p, w)| w * (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().zip(weights).map(|(p, w)| w * (p.0 - mx).powi(2)).sum();
    let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (my - b * mx, b)
}

/// Largest factor by which any measured time deviates from the fitted
/// line, in either direction. The line minimizes squared relative error,
/// so every size on a doubling grid counts equally.
pub fn max_fit_deviation(points: &[BenchPoint]) -> f64 {
    let xy: Vec<(f64, f64)> = points.iter().map(|p| (p.size(), p.ns_per_call)).collect();
    let weights: Vec<f64> = xy.iter().map(|p| 1.0 / (p.1 * p.1).max(f64::MIN_POSITIVE)).collect();
    let (a, b) = weighted_linear_fit(&xy, &weights);
    xy.iter()
        .map(|&(x, y)| {
            let fit = a + b * x;
            if fit <= 0.0 {
                f64::INFINITY
            } else {
                (y / fit).max(fit / y)
            }
        })
        .fold(1.0, f64::max)
}
