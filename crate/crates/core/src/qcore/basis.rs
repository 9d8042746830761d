use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::json::MatrixJson;
use super::linalg::{max_abs_diff, CMatrix, CVector, C64};
use super::state::StateVector;
use super::EXACT_TOL;
use crate::error::{Error, Result};

/// Orthonormal basis; column `k` is basis state `k` in the reference basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixJson", into = "MatrixJson")]
pub struct OrthonormalBasis {
    vectors: CMatrix,
}

impl OrthonormalBasis {
    pub fn new(vectors: CMatrix) -> Result<Self> {
        let d = vectors.nrows();
        if vectors.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: vectors.ncols(),
            });
        }
        if d < 2 {
            return Err(Error::InvalidDimension(d));
        }
        let defect = max_abs_diff(&(vectors.adjoint() * &vectors), &CMatrix::identity(d, d));
        if defect > EXACT_TOL || !defect.is_finite() {
            return Err(Error::InvalidState(format!(
                "basis columns are not orthonormal (defect {defect:e})"
            )));
        }
        Ok(OrthonormalBasis { vectors })
    }

    /// The reference (computational) basis.
    pub fn computational(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidDimension(dim));
        }
        Ok(OrthonormalBasis {
            vectors: CMatrix::identity(dim, dim),
        })
    }

    /// Basis whose leading columns are the given orthonormal states, completed
    /// by Gram-Schmidt against the reference basis.
    pub fn completing(leading: &[StateVector]) -> Result<Self> {
        let d = leading
            .first()
            .map(StateVector::dim)
            .ok_or_else(|| Error::Precondition("no leading vectors".into()))?;
        let mut cols: Vec<CVector> = Vec::with_capacity(d);
        for v in leading {
            if v.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: v.dim(),
                });
            }
            for c in &cols {
                if c.dotc(v.amplitudes()).norm() > EXACT_TOL {
                    return Err(Error::Precondition(
                        "leading vectors are not orthogonal".into(),
                    ));
                }
            }
            cols.push(v.amplitudes().clone());
        }
        for k in 0..d {
            if cols.len() == d {
                break;
            }
            let mut e = CVector::zeros(d);
            e[k] = C64::new(1.0, 0.0);
            // two passes keep the result orthogonal to round-off
            for _ in 0..2 {
                for c in &cols {
                    let proj = c.dotc(&e);
                    e -= c * proj;
                }
            }
            let norm = e.norm();
            if norm > 1e-6 {
                cols.push(e.unscale(norm));
            }
        }
        Self::new(CMatrix::from_columns(&cols))
    }

    pub fn dim(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.vectors
    }

    pub fn vector(&self, k: usize) -> StateVector {
        StateVector::new(self.vectors.column(k).into_owned())
            .expect("basis columns are normalized")
    }

    pub fn vectors(&self) -> Vec<StateVector> {
        (0..self.dim()).map(|k| self.vector(k)).collect()
    }
}

impl TryFrom<MatrixJson> for OrthonormalBasis {
    type Error = Error;

    fn try_from(value: MatrixJson) -> Result<Self> {
        OrthonormalBasis::new(value.to_matrix()?)
    }
}

impl From<OrthonormalBasis> for MatrixJson {
    fn from(value: OrthonormalBasis) -> Self {
        MatrixJson::from_matrix(&value.vectors)
    }
}

/// Discrete Fourier basis: column `j` has entries `e^{2πi·ij/d}/√d`.
pub fn fourier_basis(dim: usize) -> Result<OrthonormalBasis> {
    if dim < 2 {
        return Err(Error::InvalidDimension(dim));
    }
    let scale = 1.0 / (dim as f64).sqrt();
    let vectors = CMatrix::from_fn(dim, dim, |i, j| {
        // reduce the exponent mod d before scaling to keep the phases exact
        let k = (i * j) % dim;
        C64::from_polar(scale, TAU * k as f64 / dim as f64)
    });
    OrthonormalBasis::new(vectors)
}

/// Overlaps `β_ji = ⟨b_j|a_i⟩` between two bases.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    beta: CMatrix,
    mub: bool,
}

impl TransitionMatrix {
    pub fn from_matrix(beta: CMatrix) -> Result<Self> {
        let d = beta.nrows();
        if beta.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: beta.ncols(),
            });
        }
        let defect = max_abs_diff(&(beta.adjoint() * &beta), &CMatrix::identity(d, d));
        if defect > EXACT_TOL {
            return Err(Error::InvalidState(format!(
                "transition matrix is not unitary (defect {defect:e})"
            )));
        }
        let target = 1.0 / (d as f64).sqrt();
        let mub = beta.iter().all(|z| (z.norm() - target).abs() <= EXACT_TOL);
        Ok(TransitionMatrix { beta, mub })
    }

    pub fn dim(&self) -> usize {
        self.beta.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.beta
    }

    /// `β_ji`.
    pub fn get(&self, j: usize, i: usize) -> C64 {
        self.beta[(j, i)]
    }

    pub fn row(&self, j: usize) -> Vec<C64> {
        self.beta.row(j).iter().copied().collect()
    }

    /// Whether every `|β_ji|` equals `1/√d`.
    pub fn is_mub(&self) -> bool {
        self.mub
    }

    pub(crate) fn max_abs(&self) -> f64 {
        super::linalg::max_abs(&self.beta)
    }
}

/// `β = B† A`, i.e. `β_ji = ⟨b_j|a_i⟩`.
pub fn transition_matrix(
    basis_a: &OrthonormalBasis,
    basis_b: &OrthonormalBasis,
) -> Result<TransitionMatrix> {
    if basis_a.dim() != basis_b.dim() {
        return Err(Error::DimensionMismatch {
            expected: basis_a.dim(),
            found: basis_b.dim(),
        });
    }
    TransitionMatrix::from_matrix(basis_b.matrix().adjoint() * basis_a.matrix())
}
