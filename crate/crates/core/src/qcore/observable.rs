use super::basis::OrthonormalBasis;
use super::linalg::{hermitian_eigen, max_abs_diff, CMatrix, CVector, C64};
use super::state::StateVector;
use super::{EIGEN_TOL, EXACT_TOL};
use crate::error::{Error, Result};

/// Hermitian observable `A = Σ_i λ_i |v_i⟩⟨v_i|`.
///
/// The spectrum is kept in the order it was supplied; for observables built
/// from a basis the `i`-th eigenvalue belongs to basis state `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Observable {
    matrix: CMatrix,
    eigvals: Vec<f64>,
    eigvecs: OrthonormalBasis,
    nondegenerate: bool,
}

impl Observable {
    pub fn from_spectrum(eigvals: Vec<f64>, eigvecs: OrthonormalBasis) -> Result<Self> {
        if eigvals.len() != eigvecs.dim() {
            return Err(Error::DimensionMismatch {
                expected: eigvecs.dim(),
                found: eigvals.len(),
            });
        }
        if eigvals.iter().any(|v| !v.is_finite()) {
            return Err(Error::Precondition("non-finite eigenvalue".into()));
        }
        let v = eigvecs.matrix();
        let diag = CMatrix::from_diagonal(&CVector::from_iterator(
            eigvals.len(),
            eigvals.iter().map(|&l| C64::new(l, 0.0)),
        ));
        let matrix = v * diag * v.adjoint();
        let nondegenerate = min_gap(&eigvals) > EIGEN_TOL;
        Ok(Observable {
            matrix,
            eigvals,
            eigvecs,
            nondegenerate,
        })
    }

    pub fn from_hermitian(matrix: CMatrix) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                found: matrix.ncols(),
            });
        }
        let herm = max_abs_diff(&matrix, &matrix.adjoint());
        if herm > EXACT_TOL {
            return Err(Error::Precondition(format!(
                "observable is not Hermitian (defect {herm:e})"
            )));
        }
        let (eigvals, vecs) = hermitian_eigen(&matrix);
        let eigvecs = OrthonormalBasis::new(vecs)?;
        let nondegenerate = min_gap(&eigvals) > EIGEN_TOL;
        Ok(Observable {
            matrix,
            eigvals,
            eigvecs,
            nondegenerate,
        })
    }

    /// Rank-one projector `|v⟩⟨v|`.
    pub fn projector(v: &StateVector) -> Result<Self> {
        let basis = OrthonormalBasis::completing(std::slice::from_ref(v))?;
        let mut eigvals = vec![0.0; v.dim()];
        eigvals[0] = 1.0;
        let mut obs = Self::from_spectrum(eigvals, basis)?;
        // exact outer product rather than V diag V†
        obs.matrix = v.projector();
        Ok(obs)
    }

    /// The projectors `|a_i⟩⟨a_i|` onto every state of a basis.
    pub fn basis_projectors(basis: &OrthonormalBasis) -> Result<Vec<Self>> {
        basis.vectors().iter().map(Self::projector).collect()
    }

    pub fn identity(dim: usize) -> Result<Self> {
        Self::from_spectrum(vec![1.0; dim], OrthonormalBasis::computational(dim)?)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn eigvals(&self) -> &[f64] {
        &self.eigvals
    }

    pub fn eigvecs(&self) -> &OrthonormalBasis {
        &self.eigvecs
    }

    pub fn is_nondegenerate(&self) -> bool {
        self.nondegenerate
    }

    /// `A + c·I`.
    pub fn shifted(&self, c: f64) -> Self {
        let eigvals = self.eigvals.iter().map(|l| l + c).collect();
        let mut out = Self::from_spectrum(eigvals, self.eigvecs.clone())
            .expect("shifted spectrum stays valid");
        out.matrix = &self.matrix + CMatrix::identity(self.dim(), self.dim()) * C64::new(c, 0.0);
        out
    }
}

fn min_gap(vals: &[f64]) -> f64 {
    let mut sorted = vals.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min)
}
