//! Reconstruction schemes behind one trait, looked up by name.
//!
//! A scheme first says what to measure ([`Scheme::plan`]): which observables
//! the pointers couple to and which basis is post-selected. Given the
//! resulting weak-value table it then produces an [`Estimate`] in reference
//! coordinates. [`SchemeRegistry::builtin`] holds every scheme shipped with
//! the crate; more can be registered at runtime.

mod element;
mod mixed;
mod pure;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use element::Partial;
pub use mixed::{MixedA, MixedB};
pub use pure::{AllData, Postselected, SingleObservable, SingleProjector};

use crate::error::{Error, Result};
use crate::qcore::{
    transition_matrix, Observable, OrthonormalBasis, State, StateVector, TransitionMatrix, C64,
};
use crate::recon::DensityEstimate;
use crate::weakval::WeakValueTable;

/// Everything a scheme may need besides the data.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeSetup {
    /// Measured basis `{|a_i⟩}`.
    pub basis_a: OrthonormalBasis,
    /// Post-selection basis `{|b_j⟩}`.
    pub basis_b: OrthonormalBasis,
    /// Projector state of the single-projector scheme; `|a_0⟩` when absent.
    pub phi: Option<StateVector>,
    /// Spectrum of the single-observable scheme on `{|a_i⟩}`; `0, 1, …, d−1`
    /// when absent.
    pub lambda: Option<Vec<f64>>,
    /// Target pair `(a, b)` of the partial scheme, estimating `⟨a|ρ|b⟩`.
    pub pair: Option<(StateVector, StateVector)>,
}

impl SchemeSetup {
    pub fn new(basis_a: OrthonormalBasis, basis_b: OrthonormalBasis) -> Result<Self> {
        if basis_a.dim() != basis_b.dim() {
            return Err(Error::DimensionMismatch {
                expected: basis_a.dim(),
                found: basis_b.dim(),
            });
        }
        Ok(SchemeSetup {
            basis_a,
            basis_b,
            phi: None,
            lambda: None,
            pair: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.basis_a.dim()
    }

    pub fn beta(&self) -> Result<TransitionMatrix> {
        transition_matrix(&self.basis_a, &self.basis_b)
    }

    pub fn phi(&self) -> StateVector {
        self.phi.clone().unwrap_or_else(|| self.basis_a.vector(0))
    }

    pub fn lambda(&self) -> Vec<f64> {
        self.lambda
            .clone()
            .unwrap_or_else(|| (0..self.dim()).map(|k| k as f64).collect())
    }
}

/// What to measure: one pointer per observable, post-selected in `post`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementPlan {
    pub observables: Vec<Observable>,
    pub post: OrthonormalBasis,
}

/// Scheme-specific diagnostics; absent fields do not apply.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub scheme: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub consistency: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub min_eig_raw: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub hermiticity_gap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub smallest_eig: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub kernel_dim: Option<usize>,
}

impl Diagnostics {
    fn named(scheme: &str) -> Self {
        Diagnostics {
            scheme: scheme.to_string(),
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EstimateValue {
    Pure {
        state: StateVector,
    },
    Mixed {
        density: DensityEstimate,
    },
    /// `⟨a|ρ|b⟩`, plus `⟨b|ρ|a⟩` when measured independently.
    Element {
        a_rho_b: C64,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        b_rho_a: Option<C64>,
    },
}

/// A reconstruction in reference coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    #[serde(flatten)]
    pub value: EstimateValue,
    pub diagnostics: Diagnostics,
}

impl Estimate {
    /// The estimated state, for schemes that produce one.
    pub fn state(&self) -> Option<State> {
        match &self.value {
            EstimateValue::Pure { state } => Some(State::Pure(state.clone())),
            EstimateValue::Mixed { density } => Some(State::Mixed(density.physical.clone())),
            EstimateValue::Element { .. } => None,
        }
    }
}

pub trait Scheme: Send + Sync {
    fn name(&self) -> &'static str;

    fn summary(&self) -> &'static str;

    fn plan(&self, setup: &SchemeSetup) -> Result<MeasurementPlan>;

    fn reconstruct(&self, setup: &SchemeSetup, table: &WeakValueTable) -> Result<Estimate>;

    /// Fraction of trials whose outcome the scheme ignores.
    fn discarded_fraction(&self, _setup: &SchemeSetup, _table: &WeakValueTable) -> f64 {
        0.0
    }
}

/// Schemes keyed by name.
pub struct SchemeRegistry {
    schemes: BTreeMap<&'static str, Box<dyn Scheme>>,
}

impl SchemeRegistry {
    pub fn empty() -> Self {
        SchemeRegistry {
            schemes: BTreeMap::new(),
        }
    }

    pub fn builtin() -> Self {
        let mut reg = Self::empty();
        reg.register(Box::new(Postselected));
        reg.register(Box::new(AllData));
        reg.register(Box::new(SingleProjector));
        reg.register(Box::new(SingleObservable));
        reg.register(Box::new(MixedA));
        reg.register(Box::new(MixedB));
        reg.register(Box::new(Partial));
        reg
    }

    /// Adds a scheme, returning any previous one of the same name.
    pub fn register(&mut self, scheme: Box<dyn Scheme>) -> Option<Box<dyn Scheme>> {
        self.schemes.insert(scheme.name(), scheme)
    }

    pub fn get(&self, name: &str) -> Result<&dyn Scheme> {
        self.schemes
            .get(name)
            .map(|s| s.as_ref())
            .ok_or_else(|| Error::UnknownScheme(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.schemes.keys().copied()
    }
}

impl Default for SchemeRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

/// Fails unless the table has the shape `plan` would produce.
fn check_table(setup: &SchemeSetup, table: &WeakValueTable, n_obs: usize) -> Result<()> {
    if table.dim() != setup.dim() {
        return Err(Error::DimensionMismatch {
            expected: setup.dim(),
            found: table.dim(),
        });
    }
    if table.n_obs() != n_obs {
        return Err(Error::DimensionMismatch {
            expected: n_obs,
            found: table.n_obs(),
        });
    }
    Ok(())
}

fn require_rows(table: &WeakValueTable, rows: impl IntoIterator<Item = usize>) -> Result<()> {
    let missing: Vec<usize> = rows.into_iter().filter(|&j| !table.is_defined(j)).collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(Error::MissingData { rows: missing })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::{
        fourier_basis, haar_basis, max_abs_diff, random_density_matrix, random_pure_state,
        DensityMatrix,
    };
    use crate::weakval::weak_value_table_for;

    fn exact_estimate(name: &str, setup: &SchemeSetup, rho: &DensityMatrix) -> Result<Estimate> {
        let reg = SchemeRegistry::builtin();
        let scheme = reg.get(name)?;
        let plan = scheme.plan(setup)?;
        let table = weak_value_table_for(rho, &plan.observables, &plan.post)?;
        scheme.reconstruct(setup, &table)
    }

    #[test]
    fn registry_lists_builtins() {
        let reg = SchemeRegistry::builtin();
        let names: Vec<_> = reg.names().collect();
        assert_eq!(
            names,
            [
                "all_data",
                "mixed_a",
                "mixed_b",
                "partial",
                "postselected",
                "single_observable",
                "single_projector"
            ]
        );
        assert_eq!(reg.get("nope").err().unwrap().code(), "unknown-scheme");
    }

    #[test]
    fn pure_schemes_in_a_rotated_basis() {
        let d = 4;
        let setup = SchemeSetup::new(haar_basis(d, 3).unwrap(), fourier_basis(d).unwrap()).unwrap();
        let psi = random_pure_state(d, 5).unwrap();
        let truth = State::Pure(psi.clone());
        for name in ["postselected", "all_data", "single_projector", "single_observable"] {
            let est = exact_estimate(name, &setup, &psi.to_density()).unwrap();
            let f = est.state().unwrap().fidelity(&truth).unwrap();
            assert!(f > 1.0 - 1e-10, "{name}: {f}");
            assert_eq!(est.diagnostics.scheme, name);
        }
    }

    #[test]
    fn mixed_schemes_in_a_rotated_basis() {
        let d = 3;
        let setup = SchemeSetup::new(haar_basis(d, 7).unwrap(), fourier_basis(d).unwrap()).unwrap();
        let rho = random_density_matrix(d, 2, 11).unwrap();
        for name in ["mixed_a", "mixed_b"] {
            let est = exact_estimate(name, &setup, &rho).unwrap();
            match &est.value {
                EstimateValue::Mixed { density } => {
                    assert!(max_abs_diff(&density.raw, rho.matrix()) < 1e-10);
                    assert!(max_abs_diff(density.physical.matrix(), rho.matrix()) < 1e-10);
                }
                other => panic!("{other:?}"),
            }
            assert!(est.diagnostics.hermiticity_gap.unwrap() < 1e-10);
        }
    }

    #[test]
    fn mixed_a_principal_state_matches_all_data() {
        let d = 5;
        let setup =
            SchemeSetup::new(OrthonormalBasis::computational(d).unwrap(), fourier_basis(d).unwrap())
                .unwrap();
        let psi = random_pure_state(d, 21).unwrap();
        let mixed = exact_estimate("mixed_a", &setup, &psi.to_density()).unwrap();
        let all = exact_estimate("all_data", &setup, &psi.to_density()).unwrap();
        let principal = match mixed.value {
            EstimateValue::Mixed { density } => density.physical.principal_state(),
            _ => unreachable!(),
        };
        let f = State::Pure(principal).fidelity(&all.state().unwrap()).unwrap();
        assert!(f >= 1.0 - 1e-9);
    }

    #[test]
    fn partial_scheme_targets_the_element() {
        let rho = random_density_matrix(3, 3, 4).unwrap();
        let a = random_pure_state(3, 1).unwrap();
        let b = random_pure_state(3, 2).unwrap();
        let mut setup =
            SchemeSetup::new(OrthonormalBasis::computational(3).unwrap(), fourier_basis(3).unwrap())
                .unwrap();
        setup.pair = Some((a.clone(), b.clone()));
        let est = exact_estimate("partial", &setup, &rho).unwrap();
        match est.value {
            EstimateValue::Element { a_rho_b, b_rho_a } => {
                assert!((a_rho_b - rho.element(&a, &b)).norm() < 1e-12);
                assert!(b_rho_a.is_none());
            }
            other => panic!("{other:?}"),
        }

        let (e0, e2) = (StateVector::basis(3, 0).unwrap(), StateVector::basis(3, 2).unwrap());
        setup.pair = Some((e0.clone(), e2.clone()));
        let est = exact_estimate("partial", &setup, &rho).unwrap();
        match est.value {
            EstimateValue::Element { a_rho_b, b_rho_a } => {
                assert!((a_rho_b - rho.element(&e0, &e2)).norm() < 1e-12);
                assert!((b_rho_a.unwrap() - rho.element(&e2, &e0)).norm() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
        assert!(est.diagnostics.hermiticity_gap.unwrap() < 1e-12);
    }

    #[test]
    fn partial_without_pair_is_a_config_error() {
        let setup =
            SchemeSetup::new(OrthonormalBasis::computational(2).unwrap(), fourier_basis(2).unwrap())
                .unwrap();
        let err = SchemeRegistry::builtin().get("partial").unwrap().plan(&setup).unwrap_err();
        assert_eq!(err.code(), "config");
    }

    #[test]
    fn discarded_fractions() {
        let setup =
            SchemeSetup::new(OrthonormalBasis::computational(2).unwrap(), fourier_basis(2).unwrap())
                .unwrap();
        let psi = StateVector::from_slice(&[C64::new(3f64.sqrt() / 2.0, 0.0), C64::new(0.5, 0.0)]).unwrap();
        let reg = SchemeRegistry::builtin();
        for (name, expect) in [("postselected", 1.0 - 0.9330127018922193), ("all_data", 0.0)] {
            let scheme = reg.get(name).unwrap();
            let plan = scheme.plan(&setup).unwrap();
            let table = weak_value_table_for(&psi.to_density(), &plan.observables, &plan.post).unwrap();
            let f = scheme.discarded_fraction(&setup, &table);
            assert!((f - expect).abs() < 1e-12, "{name}: {f}");
        }
    }

    #[test]
    fn estimate_json_round_trip() {
        let setup =
            SchemeSetup::new(OrthonormalBasis::computational(2).unwrap(), fourier_basis(2).unwrap())
                .unwrap();
        let rho = DensityMatrix::from_real_rows(2, &[0.75, 0.25, 0.25, 0.25]).unwrap();
        for name in ["mixed_a", "all_data"] {
            let est = exact_estimate(name, &setup, &rho).unwrap();
            let text = serde_json::to_string(&est).unwrap();
            assert!(text.contains("\"diagnostics\""));
            let back: Estimate = serde_json::from_str(&text).unwrap();
            assert_eq!(back, est);
        }
    }
}
