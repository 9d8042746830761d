use serde::{Deserialize, Serialize};

use super::json::MatrixJson;
use super::linalg::{hermitian_eigen, max_abs_diff, trace, CMatrix, CVector, C64};
use super::{EIGEN_TOL, EXACT_TOL};
use crate::error::{Error, Result};

/// A normalized pure state, amplitudes against the reference basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixJson", into = "MatrixJson")]
pub struct StateVector {
    amp: CVector,
}

impl StateVector {
    /// Wraps amplitudes that are already normalized.
    pub fn new(amp: CVector) -> Result<Self> {
        check_dim(amp.len())?;
        let norm2 = amp.norm_squared();
        if (norm2 - 1.0).abs() > EXACT_TOL || !norm2.is_finite() {
            return Err(Error::InvalidState(format!(
                "squared norm {norm2} differs from 1"
            )));
        }
        Ok(StateVector { amp })
    }

    /// Normalizes arbitrary nonzero amplitudes.
    pub fn normalized(amp: CVector) -> Result<Self> {
        check_dim(amp.len())?;
        let norm = amp.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidState(format!("cannot normalize, norm {norm}")));
        }
        Ok(StateVector {
            amp: amp.unscale(norm),
        })
    }

    pub fn from_slice(amp: &[C64]) -> Result<Self> {
        Self::normalized(CVector::from_column_slice(amp))
    }

    /// Basis state `|k⟩` of the reference basis.
    pub fn basis(dim: usize, k: usize) -> Result<Self> {
        check_dim(dim)?;
        if k >= dim {
            return Err(Error::Precondition(format!("index {k} out of range for dim {dim}")));
        }
        let mut amp = CVector::zeros(dim);
        amp[k] = C64::new(1.0, 0.0);
        Ok(StateVector { amp })
    }

    /// `Σ_k |k⟩ / √d`.
    pub fn uniform(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        let a = 1.0 / (dim as f64).sqrt();
        Ok(StateVector {
            amp: CVector::from_element(dim, C64::new(a, 0.0)),
        })
    }

    pub fn dim(&self) -> usize {
        self.amp.len()
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amp
    }

    pub fn into_amplitudes(self) -> CVector {
        self.amp
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> C64 {
        self.amp.dotc(&other.amp)
    }

    /// Rotates the global phase so the largest-magnitude amplitude is real
    /// and positive. Near-ties (within 1e-10 relative) go to the lowest index.
    pub fn phase_fixed(&self) -> StateVector {
        StateVector {
            amp: fix_global_phase(&self.amp),
        }
    }

    pub fn projector(&self) -> CMatrix {
        &self.amp * self.amp.adjoint()
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix {
            elems: self.projector(),
        }
    }
}

pub(crate) fn fix_global_phase(amp: &CVector) -> CVector {
    let max = amp.iter().fold(0.0_f64, |m, z| m.max(z.norm()));
    if max == 0.0 {
        return amp.clone();
    }
    let k = amp
        .iter()
        .position(|z| z.norm() >= max * (1.0 - 1e-10))
        .unwrap_or(0);
    let phase = amp[k].conj() / amp[k].norm();
    amp * phase
}

fn check_dim(dim: usize) -> Result<()> {
    if dim < 2 {
        Err(Error::InvalidDimension(dim))
    } else {
        Ok(())
    }
}

impl TryFrom<MatrixJson> for StateVector {
    type Error = Error;

    fn try_from(value: MatrixJson) -> Result<Self> {
        StateVector::new(value.to_vector()?)
    }
}

impl From<StateVector> for MatrixJson {
    fn from(value: StateVector) -> Self {
        MatrixJson::from_vector(&value.amp)
    }
}

/// Hermitian, positive semidefinite, unit-trace operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixJson", into = "MatrixJson")]
pub struct DensityMatrix {
    elems: CMatrix,
}

impl DensityMatrix {
    /// Validates hermiticity (1e-12), unit trace (1e-12) and positivity
    /// (smallest eigenvalue ≥ −1e-10).
    pub fn new(elems: CMatrix) -> Result<Self> {
        if elems.nrows() != elems.ncols() {
            return Err(Error::DimensionMismatch {
                expected: elems.nrows(),
                found: elems.ncols(),
            });
        }
        check_dim(elems.nrows())?;
        let herm = max_abs_diff(&elems, &elems.adjoint());
        if herm > EXACT_TOL || !herm.is_finite() {
            return Err(Error::InvalidState(format!("not Hermitian (defect {herm:e})")));
        }
        let tr = trace(&elems).re;
        if (tr - 1.0).abs() > EXACT_TOL {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let (vals, _) = hermitian_eigen(&elems);
        if vals[0] < -EIGEN_TOL {
            return Err(Error::InvalidState(format!(
                "not positive semidefinite (min eigenvalue {:e})",
                vals[0]
            )));
        }
        Ok(DensityMatrix { elems })
    }

    pub(crate) fn new_unchecked(elems: CMatrix) -> Self {
        DensityMatrix { elems }
    }

    pub fn from_real_rows(dim: usize, rows: &[f64]) -> Result<Self> {
        if rows.len() != dim * dim {
            return Err(Error::Format(format!("expected {} entries", dim * dim)));
        }
        Self::new(CMatrix::from_fn(dim, dim, |r, c| {
            C64::new(rows[r * dim + c], 0.0)
        }))
    }

    pub fn maximally_mixed(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(DensityMatrix {
            elems: CMatrix::identity(dim, dim) * C64::new(1.0 / dim as f64, 0.0),
        })
    }

    pub fn diagonal(probs: &[f64]) -> Result<Self> {
        let n = probs.len();
        Self::new(CMatrix::from_fn(n, n, |r, c| {
            if r == c {
                C64::new(probs[r], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        }))
    }

    pub fn dim(&self) -> usize {
        self.elems.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.elems
    }

    /// Ascending eigenvalues with eigenvectors as columns.
    pub fn eigen(&self) -> (Vec<f64>, CMatrix) {
        hermitian_eigen(&self.elems)
    }

    pub fn purity(&self) -> f64 {
        (&self.elems * &self.elems).trace().re
    }

    /// `⟨x|ρ|y⟩`.
    pub fn element(&self, x: &StateVector, y: &StateVector) -> C64 {
        x.amplitudes().dotc(&(&self.elems * y.amplitudes()))
    }

    /// `⟨x|ρ|x⟩`, clamped to be non-negative.
    pub fn probability(&self, x: &StateVector) -> f64 {
        self.element(x, x).re.max(0.0)
    }

    /// Principal eigenvector, phase-fixed.
    pub fn principal_state(&self) -> StateVector {
        let (_, vecs) = self.eigen();
        let n = self.dim();
        let col = vecs.column(n - 1).into_owned();
        StateVector {
            amp: fix_global_phase(&col.unscale(col.norm())),
        }
    }

    /// Re-expresses the operator in another basis: `V† ρ V`.
    pub fn in_basis(&self, vectors: &CMatrix) -> CMatrix {
        vectors.adjoint() * &self.elems * vectors
    }
}

impl TryFrom<MatrixJson> for DensityMatrix {
    type Error = Error;

    fn try_from(value: MatrixJson) -> Result<Self> {
        DensityMatrix::new(value.to_matrix()?)
    }
}

impl From<DensityMatrix> for MatrixJson {
    fn from(value: DensityMatrix) -> Self {
        MatrixJson::from_matrix(&value.elems)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(
            StateVector::basis(1, 0),
            Err(Error::InvalidDimension(1))
        ));
        let unnormalized = CVector::from_element(2, C64::new(1.0, 0.0));
        assert!(StateVector::new(unnormalized.clone()).is_err());
        assert!(StateVector::normalized(unnormalized).is_ok());
        assert!(DensityMatrix::from_real_rows(2, &[0.5, 0.1, 0.0, 0.5]).is_err());
        assert!(DensityMatrix::from_real_rows(2, &[1.1, 0.0, 0.0, -0.1]).is_err());
        assert!(DensityMatrix::from_real_rows(2, &[0.6, 0.0, 0.0, 0.6]).is_err());
    }

    #[test]
    fn phase_convention_makes_largest_amplitude_positive() {
        let amp = CVector::from_vec(vec![
            C64::new(0.0, 0.6),
            C64::from_polar(0.8, 2.0),
        ]);
        let fixed = StateVector::new(amp).unwrap().phase_fixed();
        let a = fixed.amplitudes();
        assert!(a[1].im.abs() < 1e-15 && a[1].re > 0.0);
        assert!((a[0].norm() - 0.6).abs() < 1e-15);

        // tie goes to the lowest index, even with a psi_0 of ~0 elsewhere
        let tie = StateVector::from_slice(&[C64::new(0.0, -1.0), C64::new(0.0, 1.0)])
            .unwrap()
            .phase_fixed();
        assert!((tie.amplitudes()[0] - C64::new(0.5_f64.sqrt(), 0.0)).norm() < 1e-15);
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let rho = DensityMatrix::new(CMatrix::from_row_slice(
            2,
            2,
            &[
                C64::new(0.7, 0.0),
                C64::new(0.1, 0.2 / 3.0),
                C64::new(0.1, -0.2 / 3.0),
                C64::new(0.3, 0.0),
            ],
        ))
        .unwrap();
        let text = serde_json::to_string(&rho).unwrap();
        let back: DensityMatrix = serde_json::from_str(&text).unwrap();
        assert_eq!(back, rho);
        assert!(text.starts_with("{\"dim\":2,\"re\":["));
    }
}
