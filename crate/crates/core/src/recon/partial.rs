use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qcore::{C64, ZERO_PROBABILITY};

/// `⟨a|ρ|b⟩ = (P_b / ⟨b|a⟩) W` from the weak value `W` of `|a⟩⟨a|`
/// post-selected on a non-orthogonal `|b⟩`.
pub fn estimate_element_nonorthogonal(w: C64, pb: f64, overlap_ba: C64) -> Result<C64> {
    if overlap_ba.norm() <= 1e-12 {
        return Err(Error::Precondition(
            "⟨b|a⟩ vanishes; use the orthogonal-pair estimator".into(),
        ));
    }
    if !(pb > ZERO_PROBABILITY) {
        return Err(Error::Precondition(format!(
            "post-selection probability {pb:e} is zero"
        )));
    }
    Ok(w * pb / overlap_ba)
}

/// Both off-diagonal elements of an orthogonal pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrthogonalElements {
    /// `⟨b|ρ|a⟩`
    pub element_ba: C64,
    /// `⟨a|ρ|b⟩`
    pub element_ab: C64,
    /// `|⟨b|ρ|a⟩ − conj⟨a|ρ|b⟩|`, zero for noiseless data.
    pub hermiticity_gap: f64,
}

/// Off-diagonal elements of an orthogonal pair `a ⊥ b` from the weak values
/// of `|c⟩⟨c|`, `c = (a + b)/√2`, post-selected on `a` (`W`) and `b` (`W′`):
/// `⟨b|ρ|a⟩ = P_a (2W − 1)`, `⟨a|ρ|b⟩ = P_b (2W′ − 1)`.
pub fn estimate_element_orthogonal(w: C64, wp: C64, pa: f64, pb: f64) -> Result<OrthogonalElements> {
    for (name, p) in [("P_a", pa), ("P_b", pb)] {
        if !(p > ZERO_PROBABILITY) {
            return Err(Error::Precondition(format!("{name} = {p:e} is zero")));
        }
    }
    let element_ba = (w * 2.0 - 1.0) * pa;
    let element_ab = (wp * 2.0 - 1.0) * pb;
    Ok(OrthogonalElements {
        element_ba,
        element_ab,
        hermiticity_gap: (element_ba - element_ab.conj()).norm(),
    })
}
