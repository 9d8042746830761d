use super::{
    check_table, require_rows, Diagnostics, Estimate, EstimateValue, MeasurementPlan, Scheme,
    SchemeSetup,
};
use crate::error::Result;
use crate::qcore::{Observable, StateVector, C64};
use crate::recon::{
    reconstruct_pure_all_data, reconstruct_pure_postselected, reconstruct_pure_single_observable,
    reconstruct_pure_single_projector,
};
use crate::weakval::WeakValueTable;

/// Maps `ψ` from `{|a_i⟩}` coordinates to the reference basis.
fn to_reference(setup: &SchemeSetup, psi: &StateVector) -> Result<StateVector> {
    Ok(StateVector::normalized(setup.basis_a.matrix() * psi.amplitudes())?.phase_fixed())
}

fn pure(state: StateVector, diagnostics: Diagnostics) -> Estimate {
    Estimate {
        value: EstimateValue::Pure { state },
        diagnostics,
    }
}

fn projector_plan(setup: &SchemeSetup) -> Result<MeasurementPlan> {
    Ok(MeasurementPlan {
        observables: Observable::basis_projectors(&setup.basis_a)?,
        post: setup.basis_b.clone(),
    })
}

/// Keeps only the first post-selection outcome, `ψ_i ∝ W_0i / β_0i`.
pub struct Postselected;

impl Scheme for Postselected {
    fn name(&self) -> &'static str {
        "postselected"
    }

    fn summary(&self) -> &'static str {
        "pure state from the weak values of one post-selection"
    }

    fn plan(&self, setup: &SchemeSetup) -> Result<MeasurementPlan> {
        projector_plan(setup)
    }

    fn reconstruct(&self, setup: &SchemeSetup, table: &WeakValueTable) -> Result<Estimate> {
        check_table(setup, table, setup.dim())?;
        require_rows(table, [0])?;
        let beta = setup.beta()?;
        let row = table.row(0).expect("row 0 is defined");
        let psi = reconstruct_pure_postselected(&row, &beta.row(0))?;
        Ok(pure(to_reference(setup, &psi)?, Diagnostics::named(self.name())))
    }

    fn discarded_fraction(&self, _setup: &SchemeSetup, table: &WeakValueTable) -> f64 {
        1.0 - table.probability(0)
    }
}

/// Uses every post-selection outcome and merges the per-outcome states.
pub struct AllData;

impl Scheme for AllData {
    fn name(&self) -> &'static str {
        "all_data"
    }

    fn summary(&self) -> &'static str {
        "pure state merged from the weak values of every post-selection"
    }

    fn plan(&self, setup: &SchemeSetup) -> Result<MeasurementPlan> {
        projector_plan(setup)
    }

    fn reconstruct(&self, setup: &SchemeSetup, table: &WeakValueTable) -> Result<Estimate> {
        check_table(setup, table, setup.dim())?;
        let est = reconstruct_pure_all_data(table, &setup.beta()?)?;
        let diagnostics = Diagnostics {
            consistency: Some(est.consistency),
            ..Diagnostics::named(self.name())
        };
        Ok(pure(to_reference(setup, &est.merged)?, diagnostics))
    }
}

/// Weak values of a single projector `|φ⟩⟨φ|` across all post-selections.
pub struct SingleProjector;

impl Scheme for SingleProjector {
    fn name(&self) -> &'static str {
        "single_projector"
    }

    fn summary(&self) -> &'static str {
        "pure state from one projector measured against every post-selection"
    }

    fn plan(&self, setup: &SchemeSetup) -> Result<MeasurementPlan> {
        Ok(MeasurementPlan {
            observables: vec![Observable::projector(&setup.phi())?],
            post: setup.basis_b.clone(),
        })
    }

    fn reconstruct(&self, setup: &SchemeSetup, table: &WeakValueTable) -> Result<Estimate> {
        check_table(setup, table, 1)?;
        require_rows(table, 0..setup.dim())?;
        let psi = reconstruct_pure_single_projector(&table.column(0), &setup.phi(), &setup.basis_b)?;
        Ok(pure(psi, Diagnostics::named(self.name())))
    }
}

/// Weak values of one non-degenerate observable diagonal in `{|a_i⟩}`.
pub struct SingleObservable;

impl SingleObservable {
    fn observable(setup: &SchemeSetup) -> Result<Observable> {
        Observable::from_spectrum(setup.lambda(), setup.basis_a.clone())
    }
}

impl Scheme for SingleObservable {
    fn name(&self) -> &'static str {
        "single_observable"
    }

    fn summary(&self) -> &'static str {
        "pure state from the kernel of M = βλ − wβ for one observable"
    }

    fn plan(&self, setup: &SchemeSetup) -> Result<MeasurementPlan> {
        Ok(MeasurementPlan {
            observables: vec![Self::observable(setup)?],
            post: setup.basis_b.clone(),
        })
    }

    fn reconstruct(&self, setup: &SchemeSetup, table: &WeakValueTable) -> Result<Estimate> {
        check_table(setup, table, 1)?;
        require_rows(table, 0..setup.dim())?;
        let w: Vec<C64> = table.column(0);
        let (psi, problem) =
            reconstruct_pure_single_observable(&w, &Self::observable(setup)?, &setup.beta()?)?;
        let diagnostics = Diagnostics {
            smallest_eig: Some(problem.smallest_eig),
            kernel_dim: Some(problem.kernel_dim),
            ..Diagnostics::named(self.name())
        };
        Ok(pure(to_reference(setup, &psi)?, diagnostics))
    }
}
