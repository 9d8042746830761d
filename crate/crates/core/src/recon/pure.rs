use super::{phase_aligned, KernelProblem, PureStateEstimate, DIVISION_GUARD, KERNEL_THRESHOLD};
use crate::error::{Error, Result};
use crate::qcore::{
    hermitian_eigen, max_abs, CMatrix, CVector, Observable, OrthonormalBasis, StateVector,
    TransitionMatrix, C64,
};
use crate::weakval::WeakValueTable;

fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// `ψ_i ∝ W_ji / β_ji` for post-selection row `j`.
fn row_candidate(j: usize, row: &[C64], beta_row: &[C64], beta_max: f64) -> Result<StateVector> {
    check_len(beta_row.len(), row.len())?;
    if let Some(i) = beta_row
        .iter()
        .position(|b| b.norm() <= DIVISION_GUARD * beta_max)
    {
        return Err(Error::UnusablePostselection {
            index: j,
            reason: format!("overlap β_{j}{i} with measured state {i} vanishes"),
        });
    }
    let amp = CVector::from_iterator(row.len(), row.iter().zip(beta_row).map(|(w, b)| w / b));
    if amp.iter().all(|z| *z == C64::new(0.0, 0.0)) {
        return Err(Error::DegenerateData(format!(
            "all weak values of post-selection {j} are zero"
        )));
    }
    Ok(StateVector::normalized(amp)?.phase_fixed())
}

/// Pure state from one post-selected row: `ψ_i ∝ W_0i / β_0i`.
///
/// Coordinates are those of the measured basis `{|a_i⟩}`.
pub fn reconstruct_pure_postselected(row: &[C64], beta_row: &[C64]) -> Result<StateVector> {
    let beta_max = beta_row.iter().fold(0.0_f64, |m, b| m.max(b.norm()));
    row_candidate(0, row, beta_row, beta_max)
}

/// Pure state from every post-selection row.
///
/// Each defined row with nonvanishing overlaps yields a candidate. The
/// candidates are phase-aligned to the one with the largest `P_j`, averaged
/// with weights `P_j` and renormalized.
pub fn reconstruct_pure_all_data(
    table: &WeakValueTable,
    beta: &TransitionMatrix,
) -> Result<PureStateEstimate> {
    let d = beta.dim();
    check_len(d, table.dim())?;
    check_len(d, table.n_obs())?;
    let beta_max = beta.max_abs();
    let mut per_j = Vec::with_capacity(d);
    let mut first_failure = None;
    for j in 0..d {
        let candidate = match table.row(j) {
            Some(row) => match row_candidate(j, &row, &beta.row(j), beta_max) {
                Ok(psi) => Some(psi),
                Err(e) => {
                    first_failure.get_or_insert(e);
                    None
                }
            },
            None => None,
        };
        per_j.push(candidate);
    }
    let usable: Vec<usize> = (0..d).filter(|&j| per_j[j].is_some()).collect();
    if usable.is_empty() {
        return Err(match first_failure {
            Some(e) => Error::inapplicable("all_data", format!("no usable post-selection row ({e})")),
            None => Error::MissingData {
                rows: table.undefined_rows(),
            },
        });
    }
    let reference = usable
        .iter()
        .copied()
        .max_by(|&x, &y| table.probability(x).total_cmp(&table.probability(y)).then(y.cmp(&x)))
        .expect("nonempty");
    let reference = per_j[reference].clone().expect("usable");
    let mut acc = CVector::zeros(d);
    for &j in &usable {
        let psi = per_j[j].as_ref().expect("usable");
        acc += phase_aligned(psi, &reference) * C64::new(table.probability(j), 0.0);
    }
    let merged = StateVector::normalized(acc)?.phase_fixed();
    let mut consistency = 0.0_f64;
    for (n, &x) in usable.iter().enumerate() {
        for &y in &usable[n + 1..] {
            let (px, py) = (per_j[x].as_ref().unwrap(), per_j[y].as_ref().unwrap());
            consistency = consistency.max(1.0 - px.inner(py).norm_sqr());
        }
    }
    Ok(PureStateEstimate {
        merged,
        per_j,
        consistency: consistency.max(0.0),
    })
}

/// Pure state from weak values of a single projector `|φ⟩⟨φ|` post-selected
/// in every `|b_j⟩`: `η_j = ⟨b_j|φ⟩ / W_j`, `ψ ∝ Σ_j η_j |b_j⟩`.
///
/// `φ`, `basis_b` and the result share one coordinate system.
pub fn reconstruct_pure_single_projector(
    wj: &[C64],
    phi: &StateVector,
    basis_b: &OrthonormalBasis,
) -> Result<StateVector> {
    let d = basis_b.dim();
    check_len(d, wj.len())?;
    check_len(d, phi.dim())?;
    let b = basis_b.matrix();
    let overlaps = b.adjoint() * phi.amplitudes();
    let overlap_max = overlaps.iter().fold(0.0_f64, |m, z| m.max(z.norm()));
    let w_max = wj.iter().fold(0.0_f64, |m, z| m.max(z.norm()));
    let mut eta = CVector::zeros(d);
    for j in 0..d {
        if overlaps[j].norm() <= DIVISION_GUARD * overlap_max {
            return Err(Error::inapplicable(
                "single_projector",
                format!("⟨b_{j}|φ⟩ vanishes for post-selection j = {j}"),
            ));
        }
        if wj[j].norm() <= DIVISION_GUARD * w_max || w_max == 0.0 {
            return Err(Error::inapplicable(
                "single_projector",
                format!("weak value W_{j} vanishes for post-selection j = {j}"),
            ));
        }
        eta[j] = overlaps[j] / wj[j];
    }
    Ok(StateVector::normalized(b * eta)?.phase_fixed())
}

/// Pure state from weak values of one non-degenerate observable
/// `A = Σ λ_i |a_i⟩⟨a_i|`: the kernel of `M = βλ − wβ`, found as the
/// eigenvector of `M†M` with the smallest eigenvalue.
///
/// Coordinates are those of the eigenbasis `{|a_i⟩}`.
pub fn reconstruct_pure_single_observable(
    wj: &[C64],
    obs: &Observable,
    beta: &TransitionMatrix,
) -> Result<(StateVector, KernelProblem)> {
    let d = beta.dim();
    check_len(d, wj.len())?;
    check_len(d, obs.dim())?;
    if !obs.is_nondegenerate() {
        return Err(Error::Precondition(
            "single-observable reconstruction needs a non-degenerate observable".into(),
        ));
    }
    let problem = {
        let lambda = obs.eigvals().to_vec();
        let beta = beta.matrix().clone();
        let m = CMatrix::from_fn(d, d, |j, i| beta[(j, i)] * (lambda[i] - wj[j]));
        KernelProblem {
            lambda,
            w: wj.to_vec(),
            beta,
            m,
            smallest_eig: 0.0,
            kernel_dim: 0,
        }
    };
    let mtm = problem.m.adjoint() * &problem.m;
    let (vals, vecs) = hermitian_eigen(&mtm);
    let scale = max_abs(&problem.m).powi(2);
    let kernel_dim = if scale == 0.0 {
        d
    } else {
        vals.iter().filter(|&&v| v < KERNEL_THRESHOLD * scale).count()
    };
    let problem = KernelProblem {
        smallest_eig: vals[0].max(0.0),
        kernel_dim,
        ..problem
    };
    if kernel_dim >= 2 {
        return Err(Error::AmbiguousReconstruction { kernel_dim });
    }
    let psi = StateVector::normalized(vecs.column(0).into_owned())?.phase_fixed();
    Ok((psi, problem))
}
