use serde::{Deserialize, Serialize};

use super::linalg::{CMatrix, CVector, C64};
use crate::error::{Error, Result};

/// Wire format shared by states, bases and matrices.
///
/// `re` and `im` hold `dim` entries for a vector or `dim * dim` entries in
/// row-major order for a matrix. Floats are written in shortest round-trip
/// form so a decode reproduces every bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub dim: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl MatrixJson {
    pub fn from_matrix(m: &CMatrix) -> Self {
        let dim = m.nrows();
        let mut re = Vec::with_capacity(dim * m.ncols());
        let mut im = Vec::with_capacity(dim * m.ncols());
        for r in 0..dim {
            for c in 0..m.ncols() {
                re.push(m[(r, c)].re);
                im.push(m[(r, c)].im);
            }
        }
        MatrixJson { dim, re, im }
    }

    pub fn from_vector(v: &CVector) -> Self {
        MatrixJson {
            dim: v.len(),
            re: v.iter().map(|z| z.re).collect(),
            im: v.iter().map(|z| z.im).collect(),
        }
    }

    pub fn to_matrix(&self) -> Result<CMatrix> {
        let n = self.dim * self.dim;
        if self.re.len() != n || self.im.len() != n {
            return Err(Error::Format(format!(
                "matrix of dim {} needs {} entries, found re={} im={}",
                self.dim,
                n,
                self.re.len(),
                self.im.len()
            )));
        }
        Ok(CMatrix::from_fn(self.dim, self.dim, |r, c| {
            let k = r * self.dim + c;
            C64::new(self.re[k], self.im[k])
        }))
    }

    pub fn to_vector(&self) -> Result<CVector> {
        if self.re.len() != self.dim || self.im.len() != self.dim {
            return Err(Error::Format(format!(
                "vector of dim {} has re={} im={} entries",
                self.dim,
                self.re.len(),
                self.im.len()
            )));
        }
        Ok(CVector::from_iterator(
            self.dim,
            self.re.iter().zip(&self.im).map(|(&r, &i)| C64::new(r, i)),
        ))
    }
}
