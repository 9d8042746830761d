//! Exact weak values and the tables built from them.
//!
//! A [`WeakValueTable`] is indexed by post-selection outcome `j` (rows) and
//! measured observable `i` (columns). For the standard tomography setup the
//! observables are the projectors `|a_i⟩⟨a_i|` and the table is square.

use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qcore::{
    transition_matrix, CMatrix, DensityMatrix, Observable, OrthonormalBasis, StateVector, C64,
    ZERO_PROBABILITY,
};

/// `Tr(Π A ρ) / Tr(Π ρ)` with `Π = |post⟩⟨post|`.
pub fn weak_value(rho: &DensityMatrix, obs: &Observable, post: &StateVector) -> Result<C64> {
    let d = rho.dim();
    for found in [obs.dim(), post.dim()] {
        if found != d {
            return Err(Error::DimensionMismatch { expected: d, found });
        }
    }
    let b = post.amplitudes();
    let rho_b = rho.matrix() * b;
    let denom = b.dotc(&rho_b).re;
    if denom <= ZERO_PROBABILITY {
        return Err(Error::UndefinedWeakValue { probability: denom });
    }
    let numer = b.dotc(&(obs.matrix() * rho_b));
    Ok(numer / denom)
}

/// Per-entry standard errors of an estimated table.
#[derive(Debug, Clone, PartialEq)]
pub struct StdErrors {
    pub re: DMatrix<f64>,
    pub im: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TableJson", into = "TableJson")]
pub struct WeakValueTable {
    w: CMatrix,
    p: Vec<f64>,
    defined: Vec<bool>,
    stderr: Option<StdErrors>,
}

impl WeakValueTable {
    /// Builds a table, checking shapes and that `P` is a distribution.
    /// Entries of undefined rows are zeroed.
    pub fn new(mut w: CMatrix, p: Vec<f64>, defined: Vec<bool>) -> Result<Self> {
        let rows = w.nrows();
        if p.len() != rows || defined.len() != rows {
            return Err(Error::Format(format!(
                "table has {rows} rows but {} probabilities and {} mask entries",
                p.len(),
                defined.len()
            )));
        }
        if rows < 2 || w.ncols() < 1 {
            return Err(Error::InvalidDimension(rows));
        }
        if p.iter().any(|&x| !(-0.0..=1.0).contains(&x)) {
            return Err(Error::Format("post-selection probability outside [0, 1]".into()));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Format(format!("probabilities sum to {total}")));
        }
        for (j, &ok) in defined.iter().enumerate() {
            if !ok {
                w.row_mut(j).fill(C64::new(0.0, 0.0));
            } else if w.row(j).iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::Format(format!("non-finite weak value in row {j}")));
            }
        }
        Ok(WeakValueTable {
            w,
            p,
            defined,
            stderr: None,
        })
    }

    pub fn with_stderr(mut self, stderr: StdErrors) -> Result<Self> {
        let shape = (self.w.nrows(), self.w.ncols());
        if stderr.re.shape() != shape || stderr.im.shape() != shape {
            return Err(Error::Format("standard-error shape mismatch".into()));
        }
        self.stderr = Some(stderr);
        Ok(self)
    }

    /// Number of post-selection outcomes.
    pub fn dim(&self) -> usize {
        self.w.nrows()
    }

    /// Number of measured observables (pointers).
    pub fn n_obs(&self) -> usize {
        self.w.ncols()
    }

    pub fn weak_values(&self) -> &CMatrix {
        &self.w
    }

    pub fn get(&self, j: usize, i: usize) -> C64 {
        self.w[(j, i)]
    }

    pub fn set(&mut self, j: usize, i: usize, value: C64) {
        self.w[(j, i)] = value;
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.p
    }

    pub fn probability(&self, j: usize) -> f64 {
        self.p[j]
    }

    pub fn is_defined(&self, j: usize) -> bool {
        self.defined[j]
    }

    pub fn defined_mask(&self) -> &[bool] {
        &self.defined
    }

    pub fn undefined_rows(&self) -> Vec<usize> {
        (0..self.dim()).filter(|&j| !self.defined[j]).collect()
    }

    /// Row `j`, or `None` when the row is masked.
    pub fn row(&self, j: usize) -> Option<Vec<C64>> {
        self.defined[j].then(|| self.w.row(j).iter().copied().collect())
    }

    /// Column `i` across all outcomes (masked rows read as zero).
    pub fn column(&self, i: usize) -> Vec<C64> {
        self.w.column(i).iter().copied().collect()
    }

    pub fn stderr(&self) -> Option<&StdErrors> {
        self.stderr.as_ref()
    }

    /// Writes `j,i,Re(W),Im(W),P_j` rows for defined entries, plus
    /// `stderr_re,stderr_im` when the table carries error bars.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        let mut header = vec!["j", "i", "Re(W)", "Im(W)", "P_j"];
        if self.stderr.is_some() {
            header.extend(["stderr_re", "stderr_im"]);
        }
        wtr.write_record(&header)?;
        for j in (0..self.dim()).filter(|&j| self.defined[j]) {
            for i in 0..self.n_obs() {
                let z = self.w[(j, i)];
                let mut rec = vec![
                    j.to_string(),
                    i.to_string(),
                    z.re.to_string(),
                    z.im.to_string(),
                    self.p[j].to_string(),
                ];
                if let Some(se) = &self.stderr {
                    rec.push(se.re[(j, i)].to_string());
                    rec.push(se.im[(j, i)].to_string());
                }
                wtr.write_record(&rec)?;
            }
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Square table for `A_i = |a_i⟩⟨a_i|` and post-selections `|b_j⟩`, filled
/// with `W_ji = β_ji ⟨a_i|ρ|b_j⟩ / P_j` and `P_j = ⟨b_j|ρ|b_j⟩`. Rows with
/// `P_j ≤ 1e-14` are masked.
pub fn weak_value_table(
    rho: &DensityMatrix,
    basis_a: &OrthonormalBasis,
    basis_b: &OrthonormalBasis,
) -> Result<WeakValueTable> {
    let d = rho.dim();
    for found in [basis_a.dim(), basis_b.dim()] {
        if found != d {
            return Err(Error::DimensionMismatch { expected: d, found });
        }
    }
    let beta = transition_matrix(basis_a, basis_b)?;
    // rho_ab[(i, j)] = ⟨a_i|ρ|b_j⟩
    let rho_ab = basis_a.matrix().adjoint() * rho.matrix() * basis_b.matrix();
    let rho_b = rho.in_basis(basis_b.matrix());
    let mut w = CMatrix::zeros(d, d);
    let mut p = vec![0.0; d];
    let mut defined = vec![false; d];
    for j in 0..d {
        p[j] = rho_b[(j, j)].re.max(0.0);
        if p[j] <= ZERO_PROBABILITY {
            continue;
        }
        defined[j] = true;
        for i in 0..d {
            w[(j, i)] = beta.get(j, i) * rho_ab[(i, j)] / p[j];
        }
    }
    normalize_probabilities(&mut p);
    WeakValueTable::new(w, p, defined)
}

/// Table for an arbitrary list of observables via the trace formula
/// `Tr(Π_j A_i ρ)/Tr(Π_j ρ)`.
pub fn weak_value_table_for(
    rho: &DensityMatrix,
    observables: &[Observable],
    post: &OrthonormalBasis,
) -> Result<WeakValueTable> {
    let d = rho.dim();
    if post.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: post.dim(),
        });
    }
    if observables.is_empty() {
        return Err(Error::Precondition("no observables".into()));
    }
    let mut w = CMatrix::zeros(d, observables.len());
    let mut p = vec![0.0; d];
    let mut defined = vec![false; d];
    for j in 0..d {
        let b = post.vector(j);
        p[j] = rho.probability(&b);
        if p[j] <= ZERO_PROBABILITY {
            continue;
        }
        defined[j] = true;
        for (i, obs) in observables.iter().enumerate() {
            w[(j, i)] = weak_value(rho, obs, &b)?;
        }
    }
    normalize_probabilities(&mut p);
    WeakValueTable::new(w, p, defined)
}

fn normalize_probabilities(p: &mut [f64]) {
    let total: f64 = p.iter().sum();
    if total > 0.0 {
        p.iter_mut().for_each(|x| *x /= total);
    }
}

/// Maximum deviations from the algebraic identities of a table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SumRuleReport {
    /// `max_j |Σ_i W_ji − 1|` over defined rows.
    pub row_sum: f64,
    /// `max_i |Im Σ_j P_j W_ji|`.
    pub weighted_imag: f64,
    /// `max_i |Σ_j P_j W_ji − ⟨a_i|ρ|a_i⟩|`, when the state is known.
    pub diagonal: Option<f64>,
}

impl SumRuleReport {
    pub fn max_deviation(&self) -> f64 {
        self.row_sum
            .max(self.weighted_imag)
            .max(self.diagonal.unwrap_or(0.0))
    }
}

/// Checks completeness (`Σ_i W_ji = 1`) and the `P`-weighted column sums.
///
/// `reference` supplies `ρ` and the measured basis `{|a_i⟩}` for the
/// diagonal check. Masked rows are excluded everywhere.
pub fn check_sum_rules(
    table: &WeakValueTable,
    reference: Option<(&DensityMatrix, &OrthonormalBasis)>,
) -> Result<SumRuleReport> {
    let rows = (0..table.dim()).filter(|&j| table.is_defined(j));
    let row_sum = rows
        .clone()
        .map(|j| (table.w.row(j).iter().sum::<C64>() - 1.0).norm())
        .fold(0.0, f64::max);
    let weighted: Vec<C64> = (0..table.n_obs())
        .map(|i| {
            rows.clone()
                .map(|j| table.w[(j, i)] * table.p[j])
                .sum::<C64>()
        })
        .collect();
    let weighted_imag = weighted.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    let diagonal = match reference {
        None => None,
        Some((rho, basis_a)) => {
            if basis_a.dim() != table.n_obs() || rho.dim() != basis_a.dim() {
                return Err(Error::DimensionMismatch {
                    expected: table.n_obs(),
                    found: basis_a.dim(),
                });
            }
            let rho_a = rho.in_basis(basis_a.matrix());
            Some(
                weighted
                    .iter()
                    .enumerate()
                    .map(|(i, z)| (z - rho_a[(i, i)]).norm())
                    .fold(0.0, f64::max),
            )
        }
    };
    Ok(SumRuleReport {
        row_sum,
        weighted_imag,
        diagonal,
    })
}

#[allow(non_snake_case)]
#[derive(Debug, Clone, Serialize, Deserialize)]
struct TableJson {
    dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    n_obs: Option<usize>,
    W_re: Vec<f64>,
    W_im: Vec<f64>,
    P: Vec<f64>,
    defined: Vec<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    stderr_re: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    stderr_im: Option<Vec<f64>>,
}

impl From<WeakValueTable> for TableJson {
    fn from(t: WeakValueTable) -> Self {
        let (rows, cols) = t.w.shape();
        let flat = |f: &dyn Fn(usize, usize) -> f64| -> Vec<f64> {
            (0..rows)
                .flat_map(|j| (0..cols).map(move |i| (j, i)))
                .map(|(j, i)| f(j, i))
                .collect()
        };
        TableJson {
            dim: rows,
            n_obs: (cols != rows).then_some(cols),
            W_re: flat(&|j, i| t.w[(j, i)].re),
            W_im: flat(&|j, i| t.w[(j, i)].im),
            P: t.p.clone(),
            defined: t.defined.clone(),
            stderr_re: t.stderr.as_ref().map(|s| flat(&|j, i| s.re[(j, i)])),
            stderr_im: t.stderr.as_ref().map(|s| flat(&|j, i| s.im[(j, i)])),
        }
    }
}

impl TryFrom<TableJson> for WeakValueTable {
    type Error = Error;

    fn try_from(t: TableJson) -> Result<Self> {
        let rows = t.dim;
        let cols = t.n_obs.unwrap_or(rows);
        let n = rows * cols;
        if t.W_re.len() != n || t.W_im.len() != n {
            return Err(Error::Format(format!(
                "weak-value arrays need {n} entries for a {rows}x{cols} table"
            )));
        }
        let w = CMatrix::from_fn(rows, cols, |j, i| {
            C64::new(t.W_re[j * cols + i], t.W_im[j * cols + i])
        });
        let table = WeakValueTable::new(w, t.P, t.defined)?;
        match (t.stderr_re, t.stderr_im) {
            (Some(re), Some(im)) if re.len() == n && im.len() == n => {
                table.with_stderr(StdErrors {
                    re: DMatrix::from_row_slice(rows, cols, &re),
                    im: DMatrix::from_row_slice(rows, cols, &im),
                })
            }
            (None, None) => Ok(table),
            _ => Err(Error::Format("incomplete standard errors".into())),
        }
    }
}
