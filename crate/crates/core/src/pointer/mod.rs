//! The measuring device: Gaussian pointers coupled through `g_i A_i ⊗ p_i`.
//!
//! Three layers live here. [`first_order_shifts`] gives the mean pointer
//! displacements to first order in the coupling. [`exact_joint_evolution`]
//! evolves the system together with discretized pointers without any
//! truncation, to bound the first-order bias. [`Sampler`] draws shot-by-shot
//! records from the first-order model and [`estimate_weak_values`] inverts
//! them.

mod exact;
mod records;
mod sampling;

use serde::{Deserialize, Serialize};

pub use exact::{
    exact_joint_evolution, exact_postselect_probability, initial_covariance, PointerGrid,
};
pub use records::{open_input, open_output, read_records_csv, write_records_csv};
pub use sampling::{
    estimate_weak_values, sample_records, NoiseModel, RecordAccumulator, Sampler, BLOCK_TRIALS,
};

use crate::error::{Error, Result};
use crate::qcore::{DensityMatrix, StateVector, C64, EXACT_TOL};

/// Gaussian pointer states, one entry per pointer (`ħ = 1`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointerConfig {
    pub g: Vec<f64>,
    pub mean_q: Vec<f64>,
    pub mean_p: Vec<f64>,
    pub sigma_q: Vec<f64>,
    pub sigma_p: Vec<f64>,
}

impl PointerConfig {
    pub fn new(
        g: Vec<f64>,
        mean_q: Vec<f64>,
        mean_p: Vec<f64>,
        sigma_q: Vec<f64>,
        sigma_p: Vec<f64>,
    ) -> Result<Self> {
        let cfg = PointerConfig {
            g,
            mean_q,
            mean_p,
            sigma_q,
            sigma_p,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// `n` identical minimum-uncertainty pointers centred at the origin.
    pub fn uniform(n: usize, g: f64, sigma_q: f64) -> Result<Self> {
        Self::new(
            vec![g; n],
            vec![0.0; n],
            vec![0.0; n],
            vec![sigma_q; n],
            vec![0.5 / sigma_q; n],
        )
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.g.len();
        if n == 0 {
            return Err(Error::Config("pointer config has no pointers".into()));
        }
        for len in [
            self.mean_q.len(),
            self.mean_p.len(),
            self.sigma_q.len(),
            self.sigma_p.len(),
        ] {
            if len != n {
                return Err(Error::Config(format!(
                    "pointer field lengths differ ({len} vs {n})"
                )));
            }
        }
        for i in 0..n {
            let (g, sq, sp) = (self.g[i], self.sigma_q[i], self.sigma_p[i]);
            if !(g.is_finite() && g >= 0.0) {
                return Err(Error::Config(format!("coupling g[{i}] = {g} must be ≥ 0")));
            }
            if !(sq > 0.0 && sp > 0.0 && sq.is_finite() && sp.is_finite()) {
                return Err(Error::Config(format!("pointer {i} spreads must be positive")));
            }
            if (sq * sp - 0.5).abs() > EXACT_TOL {
                return Err(Error::Config(format!(
                    "pointer {i} is not minimum uncertainty: Δq·Δp = {}",
                    sq * sp
                )));
            }
            if !(self.mean_q[i].is_finite() && self.mean_p[i].is_finite()) {
                return Err(Error::Config(format!("pointer {i} means must be finite")));
            }
        }
        Ok(())
    }

    pub fn n_pointers(&self) -> usize {
        self.g.len()
    }

    /// The same config for `n` pointers. A single-pointer config is repeated;
    /// any other length must already equal `n`.
    pub fn broadcast(&self, n: usize) -> Result<Self> {
        match self.n_pointers() {
            len if len == n => Ok(self.clone()),
            1 => Self::new(
                vec![self.g[0]; n],
                vec![self.mean_q[0]; n],
                vec![self.mean_p[0]; n],
                vec![self.sigma_q[0]; n],
                vec![self.sigma_p[0]; n],
            ),
            len => Err(Error::DimensionMismatch {
                expected: n,
                found: len,
            }),
        }
    }
}

/// Mean position and momentum displacements, one entry per pointer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointerShift {
    pub dq: Vec<f64>,
    pub dp: Vec<f64>,
}

/// Which pointer quadrature a record reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Quadrature {
    #[serde(rename = "q")]
    Position,
    #[serde(rename = "p")]
    Momentum,
}

impl Quadrature {
    /// Even trials read position, odd trials read momentum.
    pub fn for_trial(trial: u64) -> Self {
        if trial % 2 == 0 {
            Quadrature::Position
        } else {
            Quadrature::Momentum
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Quadrature::Position => "q",
            Quadrature::Momentum => "p",
        }
    }
}

/// One pointer readout of one shot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub trial: u64,
    pub outcome_j: usize,
    pub pointer_index: usize,
    pub quadrature: Quadrature,
    pub readout: f64,
}

/// `δq = g Re W`, `δp = 2 g Im W (Δp)²` for a single pointer.
pub fn first_order_shifts(w: C64, cfg: &PointerConfig, pointer_index: usize) -> PointerShift {
    let g = cfg.g[pointer_index];
    let sp = cfg.sigma_p[pointer_index];
    PointerShift {
        dq: vec![g * w.re],
        dp: vec![2.0 * g * w.im * sp * sp],
    }
}

/// Success probability of post-selecting `post` to first order in the
/// couplings, `Tr(Πρ)(1 + 2 Σ_i g_i Im W_i ⟨p_i⟩)`, clamped to `[0, 1]`.
pub fn postselect_probability(
    rho: &DensityMatrix,
    post: &StateVector,
    cfg: &PointerConfig,
    weak_values: &[C64],
) -> Result<f64> {
    if weak_values.len() != cfg.n_pointers() {
        return Err(Error::DimensionMismatch {
            expected: cfg.n_pointers(),
            found: weak_values.len(),
        });
    }
    if post.dim() != rho.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            found: post.dim(),
        });
    }
    let base = rho.probability(post);
    let correction: f64 = weak_values
        .iter()
        .enumerate()
        .map(|(i, w)| cfg.g[i] * w.im * cfg.mean_p[i])
        .sum();
    Ok((base * (1.0 + 2.0 * correction)).clamp(0.0, 1.0))
}
