use super::{DensityEstimate, DIVISION_GUARD};
use crate::error::{Error, Result};
use crate::qcore::{CMatrix, TransitionMatrix, C64};
use crate::weakval::WeakValueTable;

fn check_inputs(scheme: &str, table: &WeakValueTable, beta: &TransitionMatrix) -> Result<()> {
    let d = beta.dim();
    for found in [table.dim(), table.n_obs()] {
        if found != d {
            return Err(Error::DimensionMismatch { expected: d, found });
        }
    }
    let guard = DIVISION_GUARD * beta.max_abs();
    for j in 0..d {
        for i in 0..d {
            if beta.get(j, i).norm() <= guard {
                return Err(Error::inapplicable(
                    scheme,
                    format!("transition element β_{j}{i} = ⟨b_{j}|a_{i}⟩ vanishes"),
                ));
            }
        }
    }
    let missing = table.undefined_rows();
    if !missing.is_empty() {
        return Err(Error::MissingData { rows: missing });
    }
    Ok(())
}

/// Density matrix in the measured basis:
/// `⟨a_i|ρ|a_j⟩ = Σ_k P_k (β_kj / β_ki) W_ki`.
pub fn reconstruct_mixed_abasis(
    table: &WeakValueTable,
    beta: &TransitionMatrix,
) -> Result<DensityEstimate> {
    check_inputs("mixed_a", table, beta)?;
    let d = beta.dim();
    let raw = CMatrix::from_fn(d, d, |i, j| {
        (0..d)
            .map(|k| table.probability(k) * beta.get(k, j) / beta.get(k, i) * table.get(k, i))
            .sum::<C64>()
    });
    DensityEstimate::from_raw(raw)
}

/// Density matrix first in the post-selection basis,
/// `⟨b_i|ρ|b_j⟩ = P_j Σ_k W_jk (β_ik / β_jk)`, then rotated to the measured
/// basis by `β† ρ_b β`.
pub fn reconstruct_mixed_bbasis(
    table: &WeakValueTable,
    beta: &TransitionMatrix,
) -> Result<DensityEstimate> {
    check_inputs("mixed_b", table, beta)?;
    let d = beta.dim();
    let rho_b = CMatrix::from_fn(d, d, |i, j| {
        let s: C64 = (0..d)
            .map(|k| table.get(j, k) * beta.get(i, k) / beta.get(j, k))
            .sum();
        s * table.probability(j)
    });
    let b = beta.matrix();
    DensityEstimate::from_raw(b.adjoint() * rho_b * b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::{
        fourier_basis, haar_basis, max_abs_diff, random_density_matrix, transition_matrix,
        DensityMatrix, OrthonormalBasis,
    };
    use crate::weakval::weak_value_table;
    use proptest::prelude::*;

    fn qubit() -> (DensityMatrix, WeakValueTable, TransitionMatrix) {
        let rho = DensityMatrix::from_real_rows(2, &[0.75, 0.25, 0.25, 0.25]).unwrap();
        let a = OrthonormalBasis::computational(2).unwrap();
        let b = fourier_basis(2).unwrap();
        let table = weak_value_table(&rho, &a, &b).unwrap();
        (rho, table, transition_matrix(&a, &b).unwrap())
    }

    #[test]
    fn abasis_example() {
        let (rho, table, beta) = qubit();
        // 0.75·1·(2/3) + 0.25·(−1)·1
        assert!((table.get(0, 0).re - 2.0 / 3.0).abs() < 1e-12);
        assert!((table.get(1, 0).re - 1.0).abs() < 1e-12);
        let est = reconstruct_mixed_abasis(&table, &beta).unwrap();
        assert!((est.raw[(0, 1)] - C64::new(0.25, 0.0)).norm() < 1e-12);
        assert!(max_abs_diff(&est.raw, rho.matrix()) < 1e-10);
        assert!(max_abs_diff(est.physical.matrix(), rho.matrix()) < 1e-12);
        assert!(est.hermiticity_defect < 1e-12);
    }

    #[test]
    fn bbasis_example() {
        let (rho, table, beta) = qubit();
        let b = fourier_basis(2).unwrap();
        let direct = rho.element(&b.vector(0), &b.vector(1));
        assert!((direct - C64::new(0.25, 0.0)).norm() < 1e-12);
        let est = reconstruct_mixed_bbasis(&table, &beta).unwrap();
        assert!(max_abs_diff(&est.raw, rho.matrix()) < 1e-10);
    }

    #[test]
    fn maximally_mixed_is_exact() {
        let rho = DensityMatrix::maximally_mixed(3).unwrap();
        let a = OrthonormalBasis::computational(3).unwrap();
        let b = fourier_basis(3).unwrap();
        let table = weak_value_table(&rho, &a, &b).unwrap();
        let beta = transition_matrix(&a, &b).unwrap();
        for est in [
            reconstruct_mixed_abasis(&table, &beta).unwrap(),
            reconstruct_mixed_bbasis(&table, &beta).unwrap(),
        ] {
            assert!(max_abs_diff(est.physical.matrix(), rho.matrix()) < 1e-15);
        }
    }

    #[test]
    fn diagonal_in_b_has_no_b_coherences() {
        let b = fourier_basis(3).unwrap();
        let weights = [0.5, 0.3, 0.2];
        let m = (0..3).fold(CMatrix::zeros(3, 3), |acc, k| {
            acc + b.vector(k).projector() * C64::new(weights[k], 0.0)
        });
        let rho = DensityMatrix::new(m).unwrap();
        let a = OrthonormalBasis::computational(3).unwrap();
        let table = weak_value_table(&rho, &a, &b).unwrap();
        let beta = transition_matrix(&a, &b).unwrap();
        let est = reconstruct_mixed_bbasis(&table, &beta).unwrap();
        let in_b = b.matrix().adjoint() * &est.raw * b.matrix();
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert!(in_b[(i, j)].norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn zero_beta_is_inapplicable() {
        let a = OrthonormalBasis::computational(2).unwrap();
        let rho = DensityMatrix::from_real_rows(2, &[0.75, 0.25, 0.25, 0.25]).unwrap();
        let table = weak_value_table(&rho, &a, &a).unwrap();
        let beta = transition_matrix(&a, &a).unwrap();
        let err = reconstruct_mixed_abasis(&table, &beta).unwrap_err();
        assert_eq!(err.code(), "scheme-inapplicable");
        let err = reconstruct_mixed_bbasis(&table, &beta).unwrap_err();
        assert_eq!(err.code(), "scheme-inapplicable");
    }

    #[test]
    fn masked_rows_are_missing_data() {
        let a = OrthonormalBasis::computational(2).unwrap();
        let b = fourier_basis(2).unwrap();
        let plus = b.vector(0).to_density();
        let table = weak_value_table(&plus, &a, &b).unwrap();
        let err = reconstruct_mixed_abasis(&table, &transition_matrix(&a, &b).unwrap()).unwrap_err();
        match err {
            Error::MissingData { rows } => assert_eq!(rows, vec![1]),
            other => panic!("{other:?}"),
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn both_formulas_reproduce_ginibre_states(d in 2usize..=6, rank_frac in 0.0f64..1.0, seed in 0u64..10_000) {
            let rank = 1 + ((d as f64 - 1.0) * rank_frac).round() as usize;
            let rho = random_density_matrix(d, rank, seed).unwrap();
            let a = haar_basis(d, seed + 1).unwrap();
            let b = fourier_basis(d).unwrap();
            let table = weak_value_table(&rho, &a, &b).unwrap();
            let beta = transition_matrix(&a, &b).unwrap();
            let in_a = rho.in_basis(a.matrix());
            let ea = reconstruct_mixed_abasis(&table, &beta).unwrap();
            let eb = reconstruct_mixed_bbasis(&table, &beta).unwrap();
            prop_assert!(max_abs_diff(&ea.raw, &in_a) < 1e-10);
            prop_assert!(max_abs_diff(&eb.raw, &in_a) < 1e-10);
            prop_assert!(max_abs_diff(&ea.raw, &eb.raw) < 1e-10);
        }
    }
}
