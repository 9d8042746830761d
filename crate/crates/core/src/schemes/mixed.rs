use super::{check_table, Diagnostics, Estimate, EstimateValue, MeasurementPlan, Scheme, SchemeSetup};
use crate::error::Result;
use crate::qcore::Observable;
use crate::recon::{reconstruct_mixed_abasis, reconstruct_mixed_bbasis, DensityEstimate};
use crate::weakval::WeakValueTable;

fn mixed(name: &str, setup: &SchemeSetup, est: DensityEstimate) -> Estimate {
    let density = est.rotated(setup.basis_a.matrix());
    let diagnostics = Diagnostics {
        min_eig_raw: Some(density.min_eig_raw),
        hermiticity_gap: Some(density.hermiticity_defect),
        ..Diagnostics::named(name)
    };
    Estimate {
        value: EstimateValue::Mixed { density },
        diagnostics,
    }
}

fn plan(setup: &SchemeSetup) -> Result<MeasurementPlan> {
    Ok(MeasurementPlan {
        observables: Observable::basis_projectors(&setup.basis_a)?,
        post: setup.basis_b.clone(),
    })
}

/// Density matrix assembled directly in the measured basis.
pub struct MixedA;

impl Scheme for MixedA {
    fn name(&self) -> &'static str {
        "mixed_a"
    }

    fn summary(&self) -> &'static str {
        "density matrix from ⟨a_i|ρ|a_j⟩ = Σ_k P_k (β_kj/β_ki) W_ki"
    }

    fn plan(&self, setup: &SchemeSetup) -> Result<MeasurementPlan> {
        plan(setup)
    }

    fn reconstruct(&self, setup: &SchemeSetup, table: &WeakValueTable) -> Result<Estimate> {
        check_table(setup, table, setup.dim())?;
        let est = reconstruct_mixed_abasis(table, &setup.beta()?)?;
        Ok(mixed(self.name(), setup, est))
    }
}

/// Density matrix assembled in the post-selection basis, then rotated.
pub struct MixedB;

impl Scheme for MixedB {
    fn name(&self) -> &'static str {
        "mixed_b"
    }

    fn summary(&self) -> &'static str {
        "density matrix from ⟨b_i|ρ|b_j⟩ = P_j Σ_k W_jk β_ik/β_jk"
    }

    fn plan(&self, setup: &SchemeSetup) -> Result<MeasurementPlan> {
        plan(setup)
    }

    fn reconstruct(&self, setup: &SchemeSetup, table: &WeakValueTable) -> Result<Estimate> {
        check_table(setup, table, setup.dim())?;
        let est = reconstruct_mixed_bbasis(table, &setup.beta()?)?;
        Ok(mixed(self.name(), setup, est))
    }
}
