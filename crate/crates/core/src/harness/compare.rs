use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::run::{run_experiment_with, Metrics};
use crate::error::Result;
use crate::schemes::SchemeRegistry;

/// Seeds per Monte Carlo cell.
pub const COMPARE_SEEDS: u64 = 20;

/// One `(scheme, shots, metric)` cell summarized over seeds. Skipped cells
/// carry the reason in `note` and no statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub scheme: String,
    pub shots: u64,
    pub metric: String,
    pub median: Option<f64>,
    pub iqr: Option<f64>,
    pub discard_fraction: Option<f64>,
    pub note: Option<String>,
}

/// Median and interquartile range with linear interpolation between order
/// statistics.
pub fn median_iqr(values: &[f64]) -> (f64, f64) {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let pos = p * (v.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
    };
    (q(0.5), q(0.75) - q(0.25))
}

fn metric_values(m: &Metrics) -> Vec<(&'static str, f64)> {
    [
        ("fidelity", m.fidelity),
        ("trace_distance", m.trace_distance),
        ("element_error", m.element_error),
    ]
    .into_iter()
    .filter_map(|(k, v)| v.map(|v| (k, v)))
    .collect()
}

/// Runs every `(scheme, shots)` cell over [`COMPARE_SEEDS`] seeds starting
/// at `base.seed`, in parallel on the current pool. Rows come back in input
/// order: schemes, then shots, then metrics.
pub fn compare_schemes(
    registry: &SchemeRegistry,
    base: &ExperimentConfig,
    schemes: &[String],
    shot_grid: &[u64],
) -> Result<Vec<ComparisonRow>> {
    let cells: Vec<(usize, usize, u64)> = (0..schemes.len())
        .flat_map(|s| (0..shot_grid.len()).flat_map(move |n| (0..COMPARE_SEEDS).map(move |k| (s, n, k))))
        .collect();
    let runs: Vec<Result<Metrics>> = cells
        .par_iter()
        .map(|&(s, n, k)| {
            let mut cfg = base.clone();
            cfg.scheme = schemes[s].clone();
            cfg.shots = shot_grid[n];
            cfg.seed = base.seed.wrapping_add(k);
            run_experiment_with(registry, &cfg).map(|b| b.metrics)
        })
        .collect();
    let mut rows = Vec::new();
    for (s, scheme) in schemes.iter().enumerate() {
        for (n, &shots) in shot_grid.iter().enumerate() {
            let offset = (s * shot_grid.len() + n) * COMPARE_SEEDS as usize;
            let cell = &runs[offset..offset + COMPARE_SEEDS as usize];
            let metrics: Vec<&Metrics> = match cell.iter().find_map(|r| r.as_ref().err()) {
                Some(e) => {
                    rows.push(ComparisonRow {
                        scheme: scheme.clone(),
                        shots,
                        metric: "skipped".into(),
                        median: None,
                        iqr: None,
                        discard_fraction: None,
                        note: Some(format!("{}: {e}", e.code())),
                    });
                    continue;
                }
                None => cell.iter().map(|r| r.as_ref().unwrap()).collect(),
            };
            let discards: Vec<f64> = metrics.iter().map(|m| m.discard_fraction).collect();
            let (discard, _) = median_iqr(&discards);
            for (name, _) in metric_values(metrics[0]) {
                let values: Vec<f64> = metrics
                    .iter()
                    .map(|m| metric_values(m).into_iter().find(|(k, _)| *k == name).unwrap().1)
                    .collect();
                let (median, iqr) = median_iqr(&values);
                rows.push(ComparisonRow {
                    scheme: scheme.clone(),
                    shots,
                    metric: name.into(),
                    median: Some(median),
                    iqr: Some(iqr),
                    discard_fraction: Some(discard),
                    note: None,
                });
            }
        }
    }
    Ok(rows)
}

/// CSV with header `scheme,shots,metric,median,iqr,discard_fraction`.
/// Skipped cells put `skipped (reason)` in the metric column.
pub fn write_comparison_csv<W: Write>(out: W, rows: &[ComparisonRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["scheme", "shots", "metric", "median", "iqr", "discard_fraction"])?;
    let num = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    for r in rows {
        let metric = match &r.note {
            Some(note) => format!("{} ({note})", r.metric),
            None => r.metric.clone(),
        };
        w.write_record([
            r.scheme.clone(),
            r.shots.to_string(),
            metric,
            num(r.median),
            num(r.iqr),
            num(r.discard_fraction),
        ])?;
    }
    w.flush()?;
    Ok(())
}
