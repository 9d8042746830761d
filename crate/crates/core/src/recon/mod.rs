//! Reconstruction formulas: weak-value data back to states.
//!
//! Pure-state and density-matrix results are expressed in coordinates of the
//! measured basis `{|a_i⟩}`; [`crate::schemes`] maps them to the reference
//! basis. Every division is guarded: entries below `1e-12` of their matrix
//! maximum are treated as zero and raise a structured error instead of
//! amplifying noise.

mod mixed;
mod partial;
mod pure;

use serde::{Deserialize, Serialize};

pub use mixed::{reconstruct_mixed_abasis, reconstruct_mixed_bbasis};
pub use partial::{estimate_element_nonorthogonal, estimate_element_orthogonal, OrthogonalElements};
pub use pure::{
    reconstruct_pure_all_data, reconstruct_pure_postselected, reconstruct_pure_single_observable,
    reconstruct_pure_single_projector,
};

use crate::error::{Error, Result};
use crate::qcore::{
    hermitian_eigen, max_abs, max_abs_diff, CMatrix, DensityMatrix, StateVector, C64,
};

/// Relative threshold below which `β` or `W` entries count as zero.
pub const DIVISION_GUARD: f64 = 1e-12;
/// Relative threshold separating zero eigenvalues of `M†M`.
pub const KERNEL_THRESHOLD: f64 = 1e-8;

/// A pure state merged from per-post-selection candidates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PureStateEstimate {
    pub merged: StateVector,
    /// `ψ^{(j)}` for every post-selection `j`; `None` where the row was
    /// masked or unusable.
    pub per_j: Vec<Option<StateVector>>,
    /// Largest pairwise infidelity `1 − |⟨ψ^{(j)}|ψ^{(k)}⟩|²`.
    pub consistency: f64,
}

/// A density-matrix estimate before and after projection onto physical
/// states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityEstimate {
    #[serde(with = "matrix_json")]
    pub raw: CMatrix,
    pub physical: DensityMatrix,
    /// Smallest eigenvalue of the Hermitized raw matrix.
    pub min_eig_raw: f64,
    /// `max |R − R†|` of the raw matrix.
    pub hermiticity_defect: f64,
}

impl DensityEstimate {
    pub(crate) fn from_raw(raw: CMatrix) -> Result<Self> {
        let hermiticity_defect = max_abs_diff(&raw, &raw.adjoint());
        let (vals, _) = hermitian_eigen(&raw);
        let physical = project_to_physical(&raw)?;
        Ok(DensityEstimate {
            raw,
            physical,
            min_eig_raw: vals[0],
            hermiticity_defect,
        })
    }

    /// The same estimate in other coordinates: `V R V†` for a unitary `V`.
    pub(crate) fn rotated(&self, v: &CMatrix) -> Self {
        let rot = |m: &CMatrix| v * m * v.adjoint();
        let phys = rot(self.physical.matrix());
        DensityEstimate {
            raw: rot(&self.raw),
            physical: DensityMatrix::new_unchecked(hermitize(&phys)),
            min_eig_raw: self.min_eig_raw,
            hermiticity_defect: self.hermiticity_defect,
        }
    }
}

/// The linear system `M ψ⃗ = 0`, `M = βλ − wβ`, of the single-observable
/// scheme.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelProblem {
    pub lambda: Vec<f64>,
    pub w: Vec<C64>,
    #[serde(with = "matrix_json")]
    pub beta: CMatrix,
    #[serde(with = "matrix_json")]
    pub m: CMatrix,
    /// Smallest eigenvalue of `M†M`.
    pub smallest_eig: f64,
    /// Number of eigenvalues of `M†M` below `1e-8 · max|M_ij|²`.
    pub kernel_dim: usize,
}

impl KernelProblem {
    /// `βλ − wβ` rebuilt from the stored parts.
    pub fn assemble(&self) -> CMatrix {
        let d = self.lambda.len();
        CMatrix::from_fn(d, d, |j, i| self.beta[(j, i)] * (self.lambda[i] - self.w[j]))
    }
}

/// Hermitizes, clips negative eigenvalues and renormalizes to unit trace.
/// Inputs that are already physical pass through unchanged up to rounding.
pub fn project_to_physical(raw: &CMatrix) -> Result<DensityMatrix> {
    if raw.nrows() != raw.ncols() {
        return Err(Error::DimensionMismatch {
            expected: raw.nrows(),
            found: raw.ncols(),
        });
    }
    if raw.nrows() < 2 {
        return Err(Error::InvalidDimension(raw.nrows()));
    }
    if raw.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Precondition("matrix has non-finite entries".into()));
    }
    if max_abs(raw) == 0.0 {
        return Err(Error::DegenerateData("cannot project the zero matrix".into()));
    }
    let herm = hermitize(raw);
    let (vals, vecs) = hermitian_eigen(&herm);
    let clipped: Vec<f64> = vals.iter().map(|v| v.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateData(
            "no positive eigenvalues remain after clipping".into(),
        ));
    }
    let elems = if vals[0] >= 0.0 {
        herm * C64::new(1.0 / total, 0.0)
    } else {
        let mut acc = CMatrix::zeros(raw.nrows(), raw.ncols());
        for (k, &v) in clipped.iter().enumerate() {
            if v > 0.0 {
                let col = vecs.column(k);
                acc += &col * col.adjoint() * C64::new(v / total, 0.0);
            }
        }
        hermitize(&acc)
    };
    Ok(DensityMatrix::new_unchecked(elems))
}

fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// Rotates `v` by the phase that best aligns it with `reference`.
fn phase_aligned(v: &StateVector, reference: &StateVector) -> crate::qcore::CVector {
    let overlap = v.inner(reference);
    let amp = v.amplitudes();
    if overlap.norm() == 0.0 {
        amp.clone()
    } else {
        amp * (overlap / overlap.norm())
    }
}

mod matrix_json {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::qcore::{CMatrix, MatrixJson};

    pub fn serialize<S: Serializer>(m: &CMatrix, s: S) -> Result<S::Ok, S::Error> {
        MatrixJson::from_matrix(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<CMatrix, D::Error> {
        MatrixJson::deserialize(d)?
            .to_matrix()
            .map_err(serde::de::Error::custom)
    }
}
