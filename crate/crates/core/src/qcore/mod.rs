//! Finite-dimensional states, bases, observables and distance metrics.
//!
//! All matrices are stored against the computational (reference) basis.

mod basis;
mod json;
mod linalg;
mod metrics;
mod observable;
mod random;
mod state;

pub use basis::{fourier_basis, transition_matrix, OrthonormalBasis, TransitionMatrix};
pub use json::MatrixJson;
pub use linalg::{hermitian_eigen, max_abs, max_abs_diff, CMatrix, CVector, C64};
pub use metrics::{fidelity, pure_fidelity, trace_distance, State};
pub use observable::Observable;
pub use random::{haar_basis, random_density_matrix, random_pure_state, seeded_rng};
pub use state::{DensityMatrix, StateVector};

/// Tolerance for exact-path algebra (normalization, unitarity, hermiticity).
pub const EXACT_TOL: f64 = 1e-12;
/// Tolerance for results that pass through an eigen-decomposition.
pub const EIGEN_TOL: f64 = 1e-10;
/// Probabilities at or below this are treated as zero.
pub const ZERO_PROBABILITY: f64 = 1e-14;
