use super::linalg::{hermitian_apply, hermitian_eigen};
use super::state::{DensityMatrix, StateVector};
use crate::error::{Error, Result};

/// Either representation of a state, for metrics that accept both.
#[derive(Debug, Clone, PartialEq)]
pub enum State {
    Pure(StateVector),
    Mixed(DensityMatrix),
}

impl State {
    pub fn dim(&self) -> usize {
        match self {
            State::Pure(v) => v.dim(),
            State::Mixed(r) => r.dim(),
        }
    }

    pub fn to_density(&self) -> DensityMatrix {
        match self {
            State::Pure(v) => v.to_density(),
            State::Mixed(r) => r.clone(),
        }
    }

    /// Pure–pure: `|⟨x|y⟩|²`; pure–mixed: `⟨ψ|ρ|ψ⟩`; otherwise Uhlmann.
    pub fn fidelity(&self, other: &State) -> Result<f64> {
        check_dims(self.dim(), other.dim())?;
        match (self, other) {
            (State::Pure(x), State::Pure(y)) => pure_fidelity(x, y),
            (State::Pure(x), State::Mixed(r)) | (State::Mixed(r), State::Pure(x)) => {
                Ok(r.probability(x).min(1.0))
            }
            (State::Mixed(a), State::Mixed(b)) => fidelity(a, b),
        }
    }

    pub fn trace_distance(&self, other: &State) -> Result<f64> {
        check_dims(self.dim(), other.dim())?;
        match (self, other) {
            (State::Pure(x), State::Pure(y)) => {
                Ok((1.0 - pure_fidelity(x, y)?).max(0.0).sqrt())
            }
            _ => trace_distance(&self.to_density(), &other.to_density()),
        }
    }
}

fn check_dims(a: usize, b: usize) -> Result<()> {
    if a != b {
        Err(Error::DimensionMismatch { expected: a, found: b })
    } else {
        Ok(())
    }
}

pub fn pure_fidelity(x: &StateVector, y: &StateVector) -> Result<f64> {
    check_dims(x.dim(), y.dim())?;
    Ok(x.inner(y).norm_sqr().min(1.0))
}

/// Uhlmann fidelity `(Tr√(√ρ σ √ρ))² = ‖√ρ √σ‖₁²`.
pub fn fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    check_dims(rho.dim(), sigma.dim())?;
    let sqrt_rho = hermitian_apply(rho.matrix(), |v| v.max(0.0).sqrt());
    let sqrt_sigma = hermitian_apply(sigma.matrix(), |v| v.max(0.0).sqrt());
    let nuclear: f64 = (sqrt_rho * sqrt_sigma).singular_values().iter().sum();
    Ok((nuclear * nuclear).clamp(0.0, 1.0))
}

/// `½ Tr|ρ − σ|`.
pub fn trace_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    check_dims(rho.dim(), sigma.dim())?;
    let (vals, _) = hermitian_eigen(&(rho.matrix() - sigma.matrix()));
    Ok((0.5 * vals.iter().map(|v| v.abs()).sum::<f64>()).clamp(0.0, 1.0))
}
