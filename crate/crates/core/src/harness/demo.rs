use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pointer::{
    exact_joint_evolution, first_order_shifts, NoiseModel, PointerConfig, PointerGrid, Sampler,
};
use crate::qcore::{Observable, OrthonormalBasis, StateVector, C64};
use crate::weakval::{weak_value, weak_value_table_for};

/// Shot-noise part of the phase demo.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledPhase {
    pub shots: u64,
    pub seed: u64,
    /// Shots that landed on the post-selected outcome.
    pub postselected: u64,
    pub w_estimate: C64,
    pub w_stderr: C64,
    /// Mean momentum shift of the post-selected readouts.
    pub dp_shift: f64,
}

/// Phase detection by a single weak measurement of `|1⟩⟨1|` on
/// `(|0⟩ + e^{iθ}|1⟩)/√2` post-selected on `(|0⟩ − |1⟩)/√2`.
#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseReport {
    pub theta: f64,
    pub g: f64,
    pub dp: f64,
    /// `½ − (i/2) cot(θ/2)`.
    pub W_exact: C64,
    /// `sin²(θ/2)`.
    pub postselect_probability: f64,
    /// First-order position shift `g Re W`.
    pub dq: f64,
    /// First-order momentum shift `2 g Im W (Δp)²`.
    pub dp_shift: f64,
    /// Momentum shift of the exact finite-coupling evolution.
    pub dp_shift_exact_evolution: f64,
    /// Small-angle form `−2 g (Δp)² / θ`.
    pub leading_order_dp: f64,
    /// `|dp_shift − leading_order_dp| / |dp_shift|`.
    pub leading_order_rel_diff: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sampled: Option<SampledPhase>,
    /// `θ̂ = π + 2 atan(2 Im Ŵ)`, from the sampled weak value when present.
    pub theta_estimate: f64,
    pub theta_rel_error: f64,
    /// Standard error of `θ̂` relative to `θ` predicted for the shot budget.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub predicted_rel_error: Option<f64>,
    /// Set when the predicted relative error exceeds 100 %.
    pub warning: bool,
}

/// Inverts `Im W = −½ cot(θ/2)` on `(0, 2π)`.
pub fn theta_from_imag(im_w: f64) -> f64 {
    PI + 2.0 * (2.0 * im_w).atan()
}

/// Runs the phase demo. `shots = None` keeps to exact weak values.
pub fn demo_phase_detection(
    theta: f64,
    g: f64,
    dp: f64,
    shots: Option<u64>,
    seed: u64,
) -> Result<PhaseReport> {
    if !(theta > 0.0 && theta <= PI) {
        return Err(Error::Precondition(format!("theta = {theta} must lie in (0, π]")));
    }
    if !(g > 0.0 && g.is_finite()) {
        return Err(Error::Precondition(format!("g = {g} must be positive")));
    }
    if !(dp > 0.0 && dp.is_finite()) {
        return Err(Error::Precondition(format!("Δp = {dp} must be positive")));
    }
    let h = 0.5f64.sqrt();
    let psi = StateVector::from_slice(&[C64::new(h, 0.0), C64::from_polar(h, theta)])?;
    let post = StateVector::from_slice(&[C64::new(h, 0.0), C64::new(-h, 0.0)])?;
    let obs = Observable::projector(&StateVector::basis(2, 1)?)?;
    let rho = psi.to_density();
    let w = weak_value(&rho, &obs, &post)?;
    let pointer = PointerConfig::new(vec![g], vec![0.0], vec![0.0], vec![0.5 / dp], vec![dp])?;
    let shift = first_order_shifts(w, &pointer, 0);
    let (dq, dp_shift) = (shift.dq[0], shift.dp[0]);
    let grid = PointerGrid::default_for(&pointer);
    let exact = exact_joint_evolution(&rho, std::slice::from_ref(&obs), &pointer, &grid, &post)?;
    let leading_order_dp = -2.0 * g * dp * dp / theta;
    let leading_order_rel_diff = if dp_shift == 0.0 {
        f64::INFINITY
    } else {
        ((dp_shift - leading_order_dp) / dp_shift).abs()
    };
    let probability = rho.probability(&post);

    let (sampled, im_w, predicted) = match shots {
        None => (None, w.im, None),
        Some(shots) => {
            let post_basis = OrthonormalBasis::completing(&[post])?;
            let table = weak_value_table_for(&rho, std::slice::from_ref(&obs), &post_basis)?;
            let acc = Sampler::new(&table, &pointer, NoiseModel::default(), shots, seed)?.accumulate();
            let est = acc.to_table()?;
            if !est.is_defined(0) {
                return Err(Error::DegenerateData(format!(
                    "fewer than two post-selected readouts per quadrature in {shots} shots"
                )));
            }
            let se = est.stderr().expect("sampled tables carry standard errors");
            let w_hat = est.get(0, 0);
            let s = SampledPhase {
                shots,
                seed,
                postselected: acc.outcome_counts()[0],
                w_estimate: w_hat,
                w_stderr: C64::new(se.re[(0, 0)], se.im[(0, 0)]),
                dp_shift: 2.0 * g * w_hat.im * dp * dp,
            };
            // n = shots·P/2 momentum readouts, σ(Im Ŵ) = 1/(2 g Δp √n)
            let n = shots as f64 * probability / 2.0;
            let sigma_im = 1.0 / (2.0 * g * dp * n.sqrt());
            let dtheta = 4.0 * sigma_im / (1.0 + 4.0 * w.im * w.im);
            (Some(s), w_hat.im, Some(dtheta / theta))
        }
    };
    let theta_estimate = theta_from_imag(im_w);
    Ok(PhaseReport {
        theta,
        g,
        dp,
        W_exact: w,
        postselect_probability: probability,
        dq,
        dp_shift,
        dp_shift_exact_evolution: exact.dp[0],
        leading_order_dp,
        leading_order_rel_diff,
        sampled,
        theta_estimate,
        theta_rel_error: ((theta_estimate - theta) / theta).abs(),
        predicted_rel_error: predicted,
        warning: predicted.is_some_and(|p| !(p <= 1.0)),
    })
}
