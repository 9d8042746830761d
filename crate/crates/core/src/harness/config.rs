use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::pointer::{NoiseModel, PointerConfig};
use crate::qcore::{
    fourier_basis, haar_basis, random_density_matrix, random_pure_state, DensityMatrix,
    OrthonormalBasis, State, StateVector,
};
use crate::schemes::SchemeSetup;

/// The state under test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StateSpec {
    /// An explicit density matrix.
    Explicit { matrix: DensityMatrix },
    /// An explicit pure state.
    ExplicitPure { state: StateVector },
    HaarPure { seed: u64 },
    Ginibre { rank: usize, seed: u64 },
}

impl StateSpec {
    pub fn build(&self, dim: usize) -> Result<State> {
        let state = match self {
            StateSpec::Explicit { matrix } => State::Mixed(matrix.clone()),
            StateSpec::ExplicitPure { state } => State::Pure(state.clone()),
            StateSpec::HaarPure { seed } => State::Pure(random_pure_state(dim, *seed)?),
            StateSpec::Ginibre { rank, seed } => State::Mixed(random_density_matrix(dim, *rank, *seed)?),
        };
        if state.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: state.dim(),
            });
        }
        Ok(state)
    }
}

/// A basis given against the reference basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BasisSpec {
    Fourier,
    Computational,
    Haar { seed: u64 },
    /// Columns are the basis vectors.
    Explicit { matrix: OrthonormalBasis },
}

impl BasisSpec {
    pub fn build(&self, dim: usize) -> Result<OrthonormalBasis> {
        let basis = match self {
            BasisSpec::Fourier => fourier_basis(dim)?,
            BasisSpec::Computational => OrthonormalBasis::computational(dim)?,
            BasisSpec::Haar { seed } => haar_basis(dim, *seed)?,
            BasisSpec::Explicit { matrix } => matrix.clone(),
        };
        if basis.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: basis.dim(),
            });
        }
        Ok(basis)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataMode {
    /// Weak values computed from the known state.
    Exact,
    /// Weak values estimated from sampled pointer records.
    Sampled,
}

/// Target pair `(a, b)` of the partial scheme.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSpec {
    pub a: StateVector,
    pub b: StateVector,
}

/// One experiment: a state, a scheme, a measurement device and a data mode.
///
/// The measured basis `{|a_i⟩}` is the reference basis and `basis_spec`
/// sets the post-selection basis `{|b_j⟩}`. A single-pointer `pointer`
/// config is repeated for every observable the scheme couples to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dim: usize,
    pub state_spec: StateSpec,
    #[serde(default = "default_scheme")]
    pub scheme: String,
    #[serde(default = "default_basis")]
    pub basis_spec: BasisSpec,
    #[serde(default = "default_pointer")]
    pub pointer: PointerConfig,
    #[serde(default)]
    pub noise: NoiseModel,
    #[serde(default = "default_shots")]
    pub shots: u64,
    #[serde(default = "default_mode")]
    pub data_mode: DataMode,
    #[serde(default)]
    pub seed: u64,
    /// Projector state of `single_projector`; `|a_0⟩` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<StateVector>,
    /// Spectrum of `single_observable`; `0, 1, …, d−1` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Vec<f64>>,
    /// Target pair of `partial`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair: Option<PairSpec>,
}

fn default_scheme() -> String {
    "all_data".into()
}

fn default_basis() -> BasisSpec {
    BasisSpec::Fourier
}

/// `g = 0.05`, `Δq = 0.1`, `Δp = 5`.
pub fn default_pointer() -> PointerConfig {
    PointerConfig::uniform(1, 0.05, 0.1).expect("valid default pointer")
}

fn default_shots() -> u64 {
    100_000
}

fn default_mode() -> DataMode {
    DataMode::Exact
}

impl ExperimentConfig {
    pub fn new(dim: usize, state_spec: StateSpec) -> Self {
        ExperimentConfig {
            dim,
            state_spec,
            scheme: default_scheme(),
            basis_spec: default_basis(),
            pointer: default_pointer(),
            noise: NoiseModel::default(),
            shots: default_shots(),
            data_mode: default_mode(),
            seed: 0,
            phi: None,
            lambda: None,
            pair: None,
        }
    }

    /// Parses JSON text, applying dotted `key=value` overrides first.
    pub fn from_json_with_overrides(text: &str, overrides: &[String]) -> Result<Self> {
        let mut value: Value = serde_json::from_str(text)?;
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        let cfg: ExperimentConfig =
            serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 {
            return Err(Error::InvalidDimension(self.dim));
        }
        if self.data_mode == DataMode::Sampled {
            if self.shots == 0 {
                return Err(Error::Config("sampled mode needs shots ≥ 1".into()));
            }
            self.pointer.validate()?;
            self.noise.validate()?;
        }
        if self.scheme == "partial" && self.pair.is_none() {
            return Err(Error::Config("scheme partial needs `pair` {a, b}".into()));
        }
        if let Some(l) = &self.lambda {
            if l.len() != self.dim {
                return Err(Error::DimensionMismatch {
                    expected: self.dim,
                    found: l.len(),
                });
            }
        }
        Ok(())
    }

    pub fn true_state(&self) -> Result<State> {
        self.state_spec.build(self.dim)
    }

    pub fn setup(&self) -> Result<SchemeSetup> {
        let mut setup = SchemeSetup::new(
            OrthonormalBasis::computational(self.dim)?,
            self.basis_spec.build(self.dim)?,
        )?;
        setup.phi = self.phi.clone();
        setup.lambda = self.lambda.clone();
        setup.pair = self.pair.clone().map(|p| (p.a, p.b));
        Ok(setup)
    }
}

/// Applies `path.to.field=value` to a JSON document. The value is parsed as
/// JSON when possible and kept as a string otherwise; numeric path segments
/// index arrays.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {assignment:?} is not key=value")))?;
    if path.is_empty() {
        return Err(Error::Config(format!("override {assignment:?} has an empty key")));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = doc;
    let segments: Vec<&str> = path.split('.').collect();
    for (n, seg) in segments.iter().enumerate() {
        let last = n + 1 == segments.len();
        node = match node {
            Value::Object(map) => {
                if last {
                    map.insert(seg.to_string(), value);
                    return Ok(());
                }
                map.entry(seg.to_string())
                    .or_insert_with(|| Value::Object(Default::default()))
            }
            Value::Array(items) => {
                let idx: usize = seg
                    .parse()
                    .map_err(|_| Error::Config(format!("{seg:?} in {path:?} is not an index")))?;
                let len = items.len();
                let slot = items.get_mut(idx).ok_or_else(|| {
                    Error::Config(format!("index {idx} in {path:?} out of range ({len})"))
                })?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            _ => return Err(Error::Config(format!("{path:?} does not name a field"))),
        };
    }
    unreachable!("loop returns on the last segment")
}
