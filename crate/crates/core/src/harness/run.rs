use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::config::{DataMode, ExperimentConfig};
use crate::error::{Error, Result};
use crate::pointer::{ExperimentRecord, Sampler};
use crate::qcore::{State, C64};
use crate::schemes::{Estimate, EstimateValue, MeasurementPlan, Scheme, SchemeRegistry};
use crate::weakval::{weak_value_table_for, WeakValueTable};

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "WEAKTOMO_THREADS";

/// A rayon pool sized from `WEAKTOMO_THREADS`, defaulting to the hardware
/// parallelism. Results never depend on its size.
pub struct Workers {
    pool: rayon::ThreadPool,
}

impl Workers {
    pub fn new(threads: usize) -> Result<Self> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build()
            .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
        Ok(Workers { pool })
    }

    pub fn from_env() -> Result<Self> {
        let threads = match std::env::var(THREADS_ENV) {
            Ok(v) => v
                .trim()
                .parse::<usize>()
                .ok()
                .filter(|&n| n > 0)
                .ok_or_else(|| Error::Config(format!("{THREADS_ENV}={v:?} is not a positive integer")))?,
            Err(_) => std::thread::available_parallelism().map_or(1, |n| n.get()),
        };
        Self::new(threads)
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }

    pub fn install<T: Send>(&self, f: impl FnOnce() -> T + Send) -> T {
        self.pool.install(f)
    }
}

/// Figures of merit of one run against the known true state.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fidelity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub trace_distance: Option<f64>,
    /// `|⟨a|ρ̂|b⟩ − ⟨a|ρ|b⟩|` for element estimates.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub element_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub consistency: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub hermiticity_gap: Option<f64>,
    /// Fraction of trials the scheme ignores.
    pub discard_fraction: f64,
}

/// Everything a run produced. `wall_time` is reported but not serialized,
/// so seeded runs write identical bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultBundle {
    pub config: ExperimentConfig,
    pub estimate: Estimate,
    pub metrics: Metrics,
    pub table: WeakValueTable,
    #[serde(skip)]
    pub wall_time: Duration,
}

/// The weak-value table a scheme's plan yields for the configured state:
/// exact, or estimated from sampled records.
pub fn measure(cfg: &ExperimentConfig, truth: &State, plan: &MeasurementPlan) -> Result<WeakValueTable> {
    let exact = weak_value_table_for(&truth.to_density(), &plan.observables, &plan.post)?;
    match cfg.data_mode {
        DataMode::Exact => Ok(exact),
        DataMode::Sampled => sampler(cfg, &exact)?.accumulate().to_table(),
    }
}

fn sampler(cfg: &ExperimentConfig, exact: &WeakValueTable) -> Result<Sampler> {
    let pointer = cfg.pointer.broadcast(exact.n_obs())?;
    Sampler::new(exact, &pointer, cfg.noise, cfg.shots, cfg.seed)
}

/// Raw records of the configured sampled experiment, in trial order.
pub fn simulate_records(cfg: &ExperimentConfig) -> Result<(Sampler, usize)> {
    cfg.validate()?;
    let truth = cfg.true_state()?;
    let setup = cfg.setup()?;
    let registry = SchemeRegistry::builtin();
    let plan = registry.get(&cfg.scheme)?.plan(&setup)?;
    let exact = weak_value_table_for(&truth.to_density(), &plan.observables, &plan.post)?;
    Ok((sampler(cfg, &exact)?, plan.observables.len()))
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ResultBundle> {
    run_experiment_with(&SchemeRegistry::builtin(), cfg)
}

/// Runs `cfg` with schemes looked up in `registry`.
pub fn run_experiment_with(registry: &SchemeRegistry, cfg: &ExperimentConfig) -> Result<ResultBundle> {
    let start = Instant::now();
    cfg.validate()?;
    let truth = cfg.true_state()?;
    let setup = cfg.setup()?;
    let scheme = registry.get(&cfg.scheme)?;
    let plan = scheme.plan(&setup)?;
    let table = measure(cfg, &truth, &plan)?;
    let bundle = evaluate(scheme, cfg, &truth, table)?;
    Ok(ResultBundle {
        wall_time: start.elapsed(),
        ..bundle
    })
}

/// Reconstructs from a given table and scores the estimate.
pub fn reconstruct_table(
    registry: &SchemeRegistry,
    cfg: &ExperimentConfig,
    table: WeakValueTable,
) -> Result<ResultBundle> {
    let start = Instant::now();
    let truth = cfg.true_state()?;
    let scheme = registry.get(&cfg.scheme)?;
    let bundle = evaluate(scheme, cfg, &truth, table)?;
    Ok(ResultBundle {
        wall_time: start.elapsed(),
        ..bundle
    })
}

/// Reconstructs from a record stream; the pointer config must match the one
/// that produced the records.
pub fn reconstruct_records(
    registry: &SchemeRegistry,
    cfg: &ExperimentConfig,
    records: impl IntoIterator<Item = ExperimentRecord>,
) -> Result<ResultBundle> {
    let setup = cfg.setup()?;
    let plan = registry.get(&cfg.scheme)?.plan(&setup)?;
    let pointer = cfg.pointer.broadcast(plan.observables.len())?;
    let table = crate::pointer::estimate_weak_values(records, &pointer, cfg.dim)?;
    reconstruct_table(registry, cfg, table)
}

fn evaluate(
    scheme: &dyn Scheme,
    cfg: &ExperimentConfig,
    truth: &State,
    table: WeakValueTable,
) -> Result<ResultBundle> {
    let setup = cfg.setup()?;
    let estimate = scheme.reconstruct(&setup, &table)?;
    let mut metrics = Metrics {
        consistency: estimate.diagnostics.consistency,
        hermiticity_gap: estimate.diagnostics.hermiticity_gap,
        discard_fraction: scheme.discarded_fraction(&setup, &table),
        ..Default::default()
    };
    match (&estimate.value, estimate.state()) {
        (_, Some(est)) => {
            metrics.fidelity = Some(est.fidelity(truth)?);
            metrics.trace_distance = Some(est.trace_distance(truth)?);
        }
        (EstimateValue::Element { a_rho_b, .. }, None) => {
            let (a, b) = setup.pair.as_ref().expect("element estimates come with a pair");
            let target: C64 = truth.to_density().element(a, b);
            metrics.element_error = Some((a_rho_b - target).norm());
        }
        _ => unreachable!("state estimates always carry a state"),
    }
    Ok(ResultBundle {
        config: cfg.clone(),
        estimate,
        metrics,
        table,
        wall_time: Duration::ZERO,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::{PairSpec, StateSpec};
    use crate::qcore::{DensityMatrix, StateVector};

    fn qubit_mixed() -> ExperimentConfig {
        let rho = DensityMatrix::from_real_rows(2, &[0.75, 0.25, 0.25, 0.25]).unwrap();
        ExperimentConfig::new(2, StateSpec::Explicit { matrix: rho })
    }

    #[test]
    fn exact_mixed_a() {
        let mut cfg = qubit_mixed();
        cfg.scheme = "mixed_a".into();
        let out = run_experiment(&cfg).unwrap();
        assert!(out.metrics.trace_distance.unwrap() < 1e-10);
    }

    #[test]
    fn exact_haar_all_data() {
        let mut cfg = ExperimentConfig::new(4, StateSpec::HaarPure { seed: 2 });
        cfg.scheme = "all_data".into();
        let out = run_experiment(&cfg).unwrap();
        assert!(out.metrics.fidelity.unwrap() >= 1.0 - 1e-10);
        assert_eq!(out.metrics.discard_fraction, 0.0);
    }

    #[test]
    fn sampled_haar_all_data() {
        let mut cfg = ExperimentConfig::new(4, StateSpec::HaarPure { seed: 2 });
        cfg.data_mode = DataMode::Sampled;
        cfg.shots = 1_000_000;
        cfg.seed = 17;
        let out = run_experiment(&cfg).unwrap();
        let td = out.metrics.trace_distance.unwrap();
        assert!(td < 0.05, "{td}");
        assert!(out.table.stderr().is_some());
    }

    #[test]
    fn exact_mode_ignores_shots_and_pointer() {
        let mut cfg = qubit_mixed();
        cfg.scheme = "mixed_b".into();
        let base = run_experiment(&cfg).unwrap();
        cfg.shots = 7;
        cfg.pointer.g = vec![0.5];
        cfg.noise.systematic_offset = 3.0;
        let other = run_experiment(&cfg).unwrap();
        assert_eq!(base.metrics, other.metrics);
        assert_eq!(base.estimate, other.estimate);
    }

    #[test]
    fn element_metrics() {
        let mut cfg = qubit_mixed();
        cfg.scheme = "partial".into();
        cfg.pair = Some(PairSpec {
            a: StateVector::basis(2, 0).unwrap(),
            b: StateVector::basis(2, 1).unwrap(),
        });
        let out = run_experiment(&cfg).unwrap();
        assert!(out.metrics.element_error.unwrap() < 1e-12);
        assert!(out.metrics.fidelity.is_none());
        assert!(out.metrics.hermiticity_gap.unwrap() < 1e-12);
    }

    #[test]
    fn masked_rows_are_structured_errors() {
        // |+⟩ never post-selects onto |−⟩ in the Fourier basis
        let plus = StateVector::uniform(2).unwrap();
        let mut cfg = ExperimentConfig::new(2, StateSpec::ExplicitPure { state: plus });
        cfg.scheme = "mixed_a".into();
        assert_eq!(run_experiment(&cfg).unwrap_err().code(), "missing-data");
        cfg.data_mode = DataMode::Sampled;
        cfg.shots = 1000;
        assert_eq!(run_experiment(&cfg).unwrap_err().code(), "missing-data");
    }

    #[test]
    fn seeded_runs_are_identical_across_pools() {
        let mut cfg = ExperimentConfig::new(3, StateSpec::Ginibre { rank: 2, seed: 4 });
        cfg.scheme = "mixed_b".into();
        cfg.data_mode = DataMode::Sampled;
        cfg.shots = 30_000;
        cfg.seed = 99;
        let one = Workers::new(1).unwrap().install(|| run_experiment(&cfg).unwrap());
        let four = Workers::new(4).unwrap().install(|| run_experiment(&cfg).unwrap());
        assert_eq!(
            serde_json::to_string(&one).unwrap(),
            serde_json::to_string(&four).unwrap()
        );
    }
}
