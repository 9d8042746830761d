//! Exact joint evolution of system and discretized pointers.
//!
//! Each pointer lives on `N` position points over `[−L, L)`. Its momentum
//! operator is diagonal in the conjugate grid reached by a unitary DFT, so
//! in the momentum representation `U = exp(−i Σ_i g_i A_i ⊗ p_i)` is block
//! diagonal: one `d × d` unitary per momentum multi-index.

use std::f64::consts::PI;

use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::{PointerConfig, PointerShift};
use crate::error::{Error, Result};
use crate::qcore::{hermitian_eigen, CMatrix, CVector, DensityMatrix, Observable, StateVector, C64};
use crate::qcore::ZERO_PROBABILITY;

/// Largest `d · N^n` the simulator accepts.
pub const MAX_JOINT_DIM: usize = 1 << 22;
/// Largest number of simultaneously simulated pointers.
pub const MAX_EXACT_POINTERS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointerGrid {
    pub n_points: usize,
    /// Half-width `L` in position units.
    pub extent: f64,
}

impl PointerGrid {
    pub fn new(n_points: usize, extent: f64) -> Result<Self> {
        if n_points < 64 || !n_points.is_power_of_two() {
            return Err(Error::Config(format!(
                "grid size {n_points} must be a power of two ≥ 64"
            )));
        }
        if !(extent > 0.0 && extent.is_finite()) {
            return Err(Error::Config(format!("grid extent {extent} must be positive")));
        }
        Ok(PointerGrid { n_points, extent })
    }

    /// `N = 256`, `L = 10 · max Δq`.
    pub fn default_for(cfg: &PointerConfig) -> Self {
        Self::sized_for(cfg, 256)
    }

    /// `N` points with `L = 10 · max Δq`.
    pub fn sized_for(cfg: &PointerConfig, n_points: usize) -> Self {
        let sq = cfg.sigma_q.iter().copied().fold(0.0, f64::max);
        PointerGrid {
            n_points,
            extent: 10.0 * sq,
        }
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.extent / self.n_points as f64
    }

    pub fn positions(&self) -> Vec<f64> {
        let dx = self.spacing();
        (0..self.n_points)
            .map(|m| -self.extent + m as f64 * dx)
            .collect()
    }

    /// Momentum of each DFT bin, in FFT order.
    pub fn momenta(&self) -> Vec<f64> {
        let n = self.n_points as i64;
        (0..n)
            .map(|k| {
                let kappa = if k < n / 2 { k } else { k - n };
                PI * kappa as f64 / self.extent
            })
            .collect()
    }

    fn check_covers(&self, cfg: &PointerConfig) -> Result<()> {
        let sq = cfg.sigma_q.iter().copied().fold(0.0, f64::max);
        if self.extent < 8.0 * sq {
            return Err(Error::Config(format!(
                "grid half-width {} is below 8·Δq = {}",
                self.extent,
                8.0 * sq
            )));
        }
        Ok(())
    }
}

struct Transforms {
    forward: std::sync::Arc<dyn Fft<f64>>,
    inverse: std::sync::Arc<dyn Fft<f64>>,
    scale: f64,
}

impl Transforms {
    fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Transforms {
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
            scale: 1.0 / (n as f64).sqrt(),
        }
    }

    fn to_momentum(&self, buf: &mut [C64]) {
        self.forward.process(buf);
        buf.iter_mut().for_each(|z| *z *= self.scale);
    }

    fn to_position(&self, buf: &mut [C64]) {
        self.inverse.process(buf);
        buf.iter_mut().for_each(|z| *z *= self.scale);
    }
}

/// Gaussian `∝ exp(−(x−⟨q⟩)²/(4Δq²) + i⟨p⟩x)` sampled on the grid, unit norm.
fn gaussian_position(grid: &PointerGrid, cfg: &PointerConfig, i: usize) -> Vec<C64> {
    let (q0, p0, sq) = (cfg.mean_q[i], cfg.mean_p[i], cfg.sigma_q[i]);
    let mut psi: Vec<C64> = grid
        .positions()
        .iter()
        .map(|&x| C64::from_polar((-(x - q0).powi(2) / (4.0 * sq * sq)).exp(), p0 * x))
        .collect();
    let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    psi.iter_mut().for_each(|z| *z /= norm);
    psi
}

fn position_mean(psi: &[C64], xs: &[f64]) -> f64 {
    let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
    psi.iter().zip(xs).map(|(z, x)| z.norm_sqr() * x).sum::<f64>() / norm
}

/// `⟨{p − ⟨p⟩, q − ⟨q⟩}⟩` of the initial pointer `i` on the grid. Vanishes
/// for the Gaussian pointer states used here.
pub fn initial_covariance(cfg: &PointerConfig, grid: &PointerGrid, i: usize) -> f64 {
    let fft = Transforms::new(grid.n_points);
    let xs = grid.positions();
    let ps = grid.momenta();
    let psi = gaussian_position(grid, cfg, i);
    let q_mean = position_mean(&psi, &xs);
    let mut tilde = psi.clone();
    fft.to_momentum(&mut tilde);
    let p_mean = position_mean(&tilde, &ps);
    // (p − ⟨p⟩)ψ back in position space
    let mut p_psi: Vec<C64> = tilde.iter().zip(&ps).map(|(z, p)| z * (p - p_mean)).collect();
    fft.to_position(&mut p_psi);
    let qp: C64 = psi
        .iter()
        .zip(&p_psi)
        .zip(&xs)
        .map(|((a, b), x)| a.conj() * (x - q_mean) * b)
        .sum();
    2.0 * qp.re
}

struct Evolution {
    shift: PointerShift,
    probability: f64,
}

fn evolve(
    rho: &DensityMatrix,
    observables: &[Observable],
    cfg: &PointerConfig,
    grid: &PointerGrid,
    post: &StateVector,
) -> Result<Evolution> {
    cfg.validate()?;
    let n = observables.len();
    if n == 0 || n != cfg.n_pointers() {
        return Err(Error::DimensionMismatch {
            expected: cfg.n_pointers(),
            found: n,
        });
    }
    let d = rho.dim();
    for found in observables.iter().map(Observable::dim).chain([post.dim()]) {
        if found != d {
            return Err(Error::DimensionMismatch { expected: d, found });
        }
    }
    grid.check_covers(cfg)?;
    let big_n = grid.n_points;
    let joint = (0..n).try_fold(d, |acc, _| acc.checked_mul(big_n));
    match joint {
        Some(size) if n <= MAX_EXACT_POINTERS && size <= MAX_JOINT_DIM => {}
        _ => {
            return Err(Error::ResourceLimit(format!(
                "{n} pointers on {big_n} points with d = {d} exceeds the exact simulator \
                 bound (d·N^n ≤ 2^22, at most {MAX_EXACT_POINTERS} pointers)"
            )))
        }
    }
    let n_idx = big_n.pow(n as u32);

    let fft = Transforms::new(big_n);
    let xs = grid.positions();
    let ps = grid.momenta();
    let mut pointer_tilde = Vec::with_capacity(n);
    let mut initial_q = Vec::with_capacity(n);
    let mut initial_p = Vec::with_capacity(n);
    for i in 0..n {
        let psi = gaussian_position(grid, cfg, i);
        initial_q.push(position_mean(&psi, &xs));
        let mut tilde = psi;
        fft.to_momentum(&mut tilde);
        initial_p.push(position_mean(&tilde, &ps));
        pointer_tilde.push(tilde);
    }

    // ρ = Σ_r |u_r⟩⟨u_r| with the weights folded into u_r
    let (vals, vecs) = rho.eigen();
    let components: Vec<CVector> = vals
        .iter()
        .enumerate()
        .filter(|(_, &w)| w > 0.0)
        .map(|(r, &w)| vecs.column(r) * C64::new(w.sqrt(), 0.0))
        .collect();

    let post_amp = post.amplitudes();
    let single = (n == 1).then(|| {
        let obs = &observables[0];
        let v = obs.eigvecs().matrix();
        (v.adjoint() * post_amp, v.clone(), obs.eigvals().to_vec())
    });

    let digits = |k: usize| -> Vec<usize> {
        let mut out = vec![0; n];
        let mut rest = k;
        for slot in out.iter_mut().rev() {
            *slot = rest % big_n;
            rest /= big_n;
        }
        out
    };

    // χ_r(K) = ⟨post|U_K|u_r⟩ Π_i φ̃_i(K_i)
    let mut chi: Vec<Vec<C64>> = vec![vec![C64::new(0.0, 0.0); n_idx]; components.len()];
    for k in 0..n_idx {
        let ks = digits(k);
        let envelope: C64 = ks
            .iter()
            .enumerate()
            .map(|(i, &ki)| pointer_tilde[i][ki])
            .product();
        if envelope.norm_sqr() == 0.0 {
            continue;
        }
        // ⟨post|U_K|u⟩ = Σ_l row_l u_l with U_K = V diag(e^{−iθ}) V†
        let row: CVector = match &single {
            Some((vpost, v, lambdas)) => {
                let g = cfg.g[0] * ps[ks[0]];
                let coeff = CVector::from_fn(d, |m, _| {
                    vpost[m].conj() * C64::from_polar(1.0, -g * lambdas[m])
                });
                v.conjugate() * coeff
            }
            None => {
                let mut h = CMatrix::zeros(d, d);
                for (i, obs) in observables.iter().enumerate() {
                    h += obs.matrix() * C64::new(cfg.g[i] * ps[ks[i]], 0.0);
                }
                let (lam, v) = hermitian_eigen(&h);
                let vpost = v.adjoint() * post_amp;
                let coeff = CVector::from_fn(d, |m, _| {
                    vpost[m].conj() * C64::from_polar(1.0, -lam[m])
                });
                v.conjugate() * coeff
            }
        };
        for (r, u) in components.iter().enumerate() {
            chi[r][k] = row.dot(u) * envelope;
        }
    }

    let probability: f64 = chi
        .iter()
        .map(|c| c.iter().map(|z| z.norm_sqr()).sum::<f64>())
        .sum();
    if probability <= ZERO_PROBABILITY {
        return Err(Error::UndefinedShift { probability });
    }

    let mut dq = vec![0.0; n];
    let mut dp = vec![0.0; n];
    for i in 0..n {
        let stride = big_n.pow((n - 1 - i) as u32);
        let mut p_acc = 0.0;
        let mut q_acc = 0.0;
        for c in &chi {
            for (k, z) in c.iter().enumerate() {
                p_acc += z.norm_sqr() * ps[(k / stride) % big_n];
            }
            // position marginal of pointer i: inverse DFT along axis i only
            let mut line = vec![C64::new(0.0, 0.0); big_n];
            for outer in 0..n_idx / (big_n * stride) {
                for inner in 0..stride {
                    let base = outer * big_n * stride + inner;
                    for (m, slot) in line.iter_mut().enumerate() {
                        *slot = c[base + m * stride];
                    }
                    fft.to_position(&mut line);
                    q_acc += line
                        .iter()
                        .zip(&xs)
                        .map(|(z, x)| z.norm_sqr() * x)
                        .sum::<f64>();
                }
            }
        }
        dq[i] = q_acc / probability - initial_q[i];
        dp[i] = p_acc / probability - initial_p[i];
    }

    Ok(Evolution {
        shift: PointerShift { dq, dp },
        probability,
    })
}

/// Exact conditional mean shifts of every pointer after post-selecting the
/// system on `post`, with no truncation in the couplings.
pub fn exact_joint_evolution(
    rho: &DensityMatrix,
    observables: &[Observable],
    cfg: &PointerConfig,
    grid: &PointerGrid,
    post: &StateVector,
) -> Result<PointerShift> {
    evolve(rho, observables, cfg, grid, post).map(|e| e.shift)
}

/// Exact success probability of the post-selection after the coupling.
pub fn exact_postselect_probability(
    rho: &DensityMatrix,
    observables: &[Observable],
    cfg: &PointerConfig,
    grid: &PointerGrid,
    post: &StateVector,
) -> Result<f64> {
    evolve(rho, observables, cfg, grid, post).map(|e| e.probability)
}
