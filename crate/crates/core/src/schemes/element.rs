use super::{
    check_table, require_rows, Diagnostics, Estimate, EstimateValue, MeasurementPlan, Scheme,
    SchemeSetup,
};
use crate::error::{Error, Result};
use crate::qcore::{Observable, OrthonormalBasis, StateVector};
use crate::recon::{estimate_element_nonorthogonal, estimate_element_orthogonal};
use crate::weakval::WeakValueTable;

const ORTHOGONAL: f64 = 1e-12;

/// A single matrix element `⟨a|ρ|b⟩`.
///
/// Non-orthogonal pairs weakly measure `|a⟩⟨a|` and post-select `|b⟩`.
/// Orthogonal pairs weakly measure `|c⟩⟨c|`, `c = (a + b)/√2`, and
/// post-select both `|a⟩` and `|b⟩`, which yields both off-diagonal elements
/// and their hermiticity gap.
pub struct Partial;

impl Partial {
    fn pair(setup: &SchemeSetup) -> Result<(StateVector, StateVector)> {
        let (a, b) = setup
            .pair
            .clone()
            .ok_or_else(|| Error::Config("scheme partial needs a target pair (a, b)".into()))?;
        for v in [&a, &b] {
            if v.dim() != setup.dim() {
                return Err(Error::DimensionMismatch {
                    expected: setup.dim(),
                    found: v.dim(),
                });
            }
        }
        Ok((a, b))
    }

    fn orthogonal(a: &StateVector, b: &StateVector) -> bool {
        b.inner(a).norm() <= ORTHOGONAL
    }
}

impl Scheme for Partial {
    fn name(&self) -> &'static str {
        "partial"
    }

    fn summary(&self) -> &'static str {
        "single matrix element ⟨a|ρ|b⟩ without full tomography"
    }

    fn plan(&self, setup: &SchemeSetup) -> Result<MeasurementPlan> {
        let (a, b) = Self::pair(setup)?;
        if Self::orthogonal(&a, &b) {
            let c = StateVector::normalized(a.amplitudes() + b.amplitudes())?;
            Ok(MeasurementPlan {
                observables: vec![Observable::projector(&c)?],
                post: OrthonormalBasis::completing(&[a, b])?,
            })
        } else {
            Ok(MeasurementPlan {
                observables: vec![Observable::projector(&a)?],
                post: OrthonormalBasis::completing(&[b])?,
            })
        }
    }

    fn reconstruct(&self, setup: &SchemeSetup, table: &WeakValueTable) -> Result<Estimate> {
        check_table(setup, table, 1)?;
        let (a, b) = Self::pair(setup)?;
        let mut diagnostics = Diagnostics::named(self.name());
        let value = if Self::orthogonal(&a, &b) {
            require_rows(table, [0, 1])?;
            let e = estimate_element_orthogonal(
                table.get(0, 0),
                table.get(1, 0),
                table.probability(0),
                table.probability(1),
            )?;
            diagnostics.hermiticity_gap = Some(e.hermiticity_gap);
            EstimateValue::Element {
                a_rho_b: e.element_ab,
                b_rho_a: Some(e.element_ba),
            }
        } else {
            require_rows(table, [0])?;
            let a_rho_b =
                estimate_element_nonorthogonal(table.get(0, 0), table.probability(0), b.inner(&a))?;
            EstimateValue::Element {
                a_rho_b,
                b_rho_a: None,
            }
        };
        Ok(Estimate { value, diagnostics })
    }

    fn discarded_fraction(&self, setup: &SchemeSetup, table: &WeakValueTable) -> f64 {
        let kept = match Self::pair(setup) {
            Ok((a, b)) if Self::orthogonal(&a, &b) => table.probability(0) + table.probability(1),
            _ => table.probability(0),
        };
        (1.0 - kept).max(0.0)
    }
}
