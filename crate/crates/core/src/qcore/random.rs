//! Seeded Haar and Ginibre ensembles for test states.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::basis::OrthonormalBasis;
use super::linalg::{trace, CMatrix, CVector, C64};
use super::state::{DensityMatrix, StateVector};
use crate::error::{Error, Result};

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn complex_gaussian(rng: &mut ChaCha8Rng) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Haar-distributed pure state, deterministic for a given seed.
pub fn random_pure_state(dim: usize, seed: u64) -> Result<StateVector> {
    if dim < 2 {
        return Err(Error::InvalidDimension(dim));
    }
    let mut rng = seeded_rng(seed);
    let amp = CVector::from_fn(dim, |_, _| complex_gaussian(&mut rng));
    StateVector::normalized(amp)
}

/// `GG†/Tr(GG†)` with `G` a `dim × rank` complex Gaussian matrix.
pub fn random_density_matrix(dim: usize, rank: usize, seed: u64) -> Result<DensityMatrix> {
    if dim < 2 {
        return Err(Error::InvalidDimension(dim));
    }
    if rank == 0 || rank > dim {
        return Err(Error::RankOutOfRange { rank, dim });
    }
    let mut rng = seeded_rng(seed);
    let g = CMatrix::from_fn(dim, rank, |_, _| complex_gaussian(&mut rng));
    let mut rho = &g * g.adjoint();
    let tr = trace(&rho).re;
    rho.unscale_mut(tr);
    // exact hermiticity
    let rho = (&rho + rho.adjoint()) * C64::new(0.5, 0.0);
    Ok(DensityMatrix::new_unchecked(rho))
}

/// Haar-random orthonormal basis (QR of a Ginibre matrix with the phases of
/// `R`'s diagonal absorbed into `Q`).
pub fn haar_basis(dim: usize, seed: u64) -> Result<OrthonormalBasis> {
    if dim < 2 {
        return Err(Error::InvalidDimension(dim));
    }
    let mut rng = seeded_rng(seed);
    let g = CMatrix::from_fn(dim, dim, |_, _| complex_gaussian(&mut rng));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for k in 0..dim {
        let d = r[(k, k)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        let mut col = q.column_mut(k);
        col *= phase;
    }
    OrthonormalBasis::new(q)
}
