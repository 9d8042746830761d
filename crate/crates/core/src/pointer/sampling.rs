//! Shot sampling from the first-order pointer model, and its inverse.
//!
//! Trials are cut into blocks of [`BLOCK_TRIALS`]. Block `b` draws from a
//! ChaCha stream selected by `(seed, b)`, so any block can be generated in
//! isolation and the merged output does not depend on how blocks are spread
//! across workers. Statistics are always reduced block by block in block
//! order, which makes the floating-point result identical too.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ExperimentRecord, PointerConfig, Quadrature};
use crate::error::{Error, Result};
use crate::qcore::{CMatrix, DensityMatrix, Observable, OrthonormalBasis, C64};
use crate::weakval::{weak_value_table_for, StdErrors, WeakValueTable};

pub const BLOCK_TRIALS: u64 = 4096;

/// Readout imperfections applied on top of the intrinsic pointer spread.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseModel {
    /// Multiplies the pointer spreads `Δq`, `Δp` of every readout.
    pub readout_sigma_scale: f64,
    /// Added to every position readout.
    pub systematic_offset: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel {
            readout_sigma_scale: 1.0,
            systematic_offset: 0.0,
        }
    }
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.readout_sigma_scale >= 0.0 && self.readout_sigma_scale.is_finite()) {
            return Err(Error::Config("readout_sigma_scale must be finite and ≥ 0".into()));
        }
        if !self.systematic_offset.is_finite() {
            return Err(Error::Config("systematic_offset must be finite".into()));
        }
        Ok(())
    }
}

/// Draws experiment records for a known weak-value table.
///
/// Each shot picks outcome `j` with probability `P_j`, then every pointer
/// reads the quadrature scheduled for the trial from a Gaussian centred on
/// its first-order shifted mean.
#[derive(Debug, Clone)]
pub struct Sampler {
    table: WeakValueTable,
    cfg: PointerConfig,
    noise: NoiseModel,
    shots: u64,
    seed: u64,
    cumulative: Vec<f64>,
}

impl Sampler {
    pub fn new(
        table: &WeakValueTable,
        cfg: &PointerConfig,
        noise: NoiseModel,
        shots: u64,
        seed: u64,
    ) -> Result<Self> {
        cfg.validate()?;
        noise.validate()?;
        if shots == 0 {
            return Err(Error::Precondition("at least one shot is required".into()));
        }
        if cfg.n_pointers() != table.n_obs() {
            return Err(Error::DimensionMismatch {
                expected: table.n_obs(),
                found: cfg.n_pointers(),
            });
        }
        let mut acc = 0.0;
        let mut cumulative: Vec<f64> = table
            .probabilities()
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        // the last reachable outcome absorbs rounding in the running sum
        if let Some(last) = (0..table.dim()).rev().find(|&j| table.probability(j) > 0.0) {
            cumulative[last..].iter_mut().for_each(|c| *c = f64::INFINITY);
        }
        Ok(Sampler {
            table: table.clone(),
            cfg: cfg.clone(),
            noise,
            shots,
            seed,
            cumulative,
        })
    }

    pub fn shots(&self) -> u64 {
        self.shots
    }

    pub fn n_blocks(&self) -> u64 {
        self.shots.div_ceil(BLOCK_TRIALS)
    }

    fn block_rng(&self, block: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(block);
        rng
    }

    /// Generates every record of block `block`, in trial then pointer order.
    pub fn generate_block(&self, block: u64, mut emit: impl FnMut(ExperimentRecord)) {
        let mut rng = self.block_rng(block);
        let start = block * BLOCK_TRIALS;
        let end = (start + BLOCK_TRIALS).min(self.shots);
        let scale = self.noise.readout_sigma_scale;
        for trial in start..end {
            let u: f64 = rng.random();
            let j = self.cumulative.iter().position(|&c| u < c).unwrap_or(0);
            let quadrature = Quadrature::for_trial(trial);
            for i in 0..self.cfg.n_pointers() {
                let z: f64 = rng.sample(StandardNormal);
                let w = self.table.get(j, i);
                let g = self.cfg.g[i];
                let readout = match quadrature {
                    Quadrature::Position => {
                        self.cfg.mean_q[i]
                            + g * w.re
                            + self.cfg.sigma_q[i] * scale * z
                            + self.noise.systematic_offset
                    }
                    Quadrature::Momentum => {
                        let sp = self.cfg.sigma_p[i];
                        self.cfg.mean_p[i] + 2.0 * g * w.im * sp * sp + sp * scale * z
                    }
                };
                emit(ExperimentRecord {
                    trial,
                    outcome_j: j,
                    pointer_index: i,
                    quadrature,
                    readout,
                });
            }
        }
    }

    /// The full record stream, generated lazily block by block.
    pub fn records(&self) -> impl Iterator<Item = ExperimentRecord> + '_ {
        (0..self.n_blocks()).flat_map(move |b| {
            let mut buf = Vec::new();
            self.generate_block(b, |r| buf.push(r));
            buf.into_iter()
        })
    }

    /// Per-cell statistics of all shots, computed in parallel on the current
    /// rayon pool. The result is independent of the pool size.
    pub fn accumulate(&self) -> RecordAccumulator {
        let partials: Vec<RecordAccumulator> = (0..self.n_blocks())
            .into_par_iter()
            .map(|b| {
                let mut acc = RecordAccumulator::new(self.table.dim(), self.cfg.clone());
                self.generate_block(b, |r| acc.push(&r).expect("sampler emits in-range records"));
                acc
            })
            .collect();
        let mut total = RecordAccumulator::new(self.table.dim(), self.cfg.clone());
        for p in &partials {
            total.merge(p);
        }
        total
    }
}

/// Records drawn for `ρ` measured with `A_i = |a_i⟩⟨a_i|` and post-selected
/// in `{|b_j⟩}`.
pub fn sample_records(
    rho: &DensityMatrix,
    basis_a: &OrthonormalBasis,
    basis_b: &OrthonormalBasis,
    cfg: &PointerConfig,
    shots: u64,
    seed: u64,
) -> Result<Vec<ExperimentRecord>> {
    let table = weak_value_table_for(rho, &Observable::basis_projectors(basis_a)?, basis_b)?;
    let sampler = Sampler::new(&table, cfg, NoiseModel::default(), shots, seed)?;
    Ok(sampler.records().collect())
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct CellStats {
    n: u64,
    mean: f64,
    m2: f64,
}

impl CellStats {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn merge(&mut self, other: &CellStats) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        let (na, nb) = (self.n as f64, other.n as f64);
        self.mean += delta * nb / n as f64;
        self.m2 += other.m2 + delta * delta * na * nb / n as f64;
        self.n = n;
    }

    fn stderr(&self) -> f64 {
        (self.m2 / (self.n - 1) as f64 / self.n as f64).sqrt()
    }
}

/// Running per-`(j, i, quadrature)` statistics of pointer readouts, relative
/// to the initial pointer means.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordAccumulator {
    dim: usize,
    cfg: PointerConfig,
    trials: u64,
    outcome_counts: Vec<u64>,
    cells: Vec<CellStats>,
}

impl RecordAccumulator {
    pub fn new(dim: usize, cfg: PointerConfig) -> Self {
        let n = cfg.n_pointers();
        RecordAccumulator {
            dim,
            cfg,
            trials: 0,
            outcome_counts: vec![0; dim],
            cells: vec![CellStats::default(); dim * n * 2],
        }
    }

    fn cell(&self, j: usize, i: usize, q: Quadrature) -> usize {
        (j * self.cfg.n_pointers() + i) * 2 + q as usize
    }

    pub fn push(&mut self, r: &ExperimentRecord) -> Result<()> {
        let n = self.cfg.n_pointers();
        if r.outcome_j >= self.dim || r.pointer_index >= n || !r.readout.is_finite() {
            return Err(Error::Format(format!(
                "record out of range: trial {} outcome {} pointer {}",
                r.trial, r.outcome_j, r.pointer_index
            )));
        }
        if r.pointer_index == 0 {
            self.trials += 1;
            self.outcome_counts[r.outcome_j] += 1;
        }
        let i = r.pointer_index;
        let x = match r.quadrature {
            Quadrature::Position => r.readout - self.cfg.mean_q[i],
            Quadrature::Momentum => r.readout - self.cfg.mean_p[i],
        };
        let c = self.cell(r.outcome_j, i, r.quadrature);
        self.cells[c].push(x);
        Ok(())
    }

    pub fn merge(&mut self, other: &RecordAccumulator) {
        self.trials += other.trials;
        for (a, b) in self.outcome_counts.iter_mut().zip(&other.outcome_counts) {
            *a += b;
        }
        for (a, b) in self.cells.iter_mut().zip(&other.cells) {
            a.merge(b);
        }
    }

    pub fn trials(&self) -> u64 {
        self.trials
    }

    pub fn outcome_counts(&self) -> &[u64] {
        &self.outcome_counts
    }

    /// Inverts the first-order shifts: `Re Ŵ = mean(q − ⟨q⟩)/g`,
    /// `Im Ŵ = mean(p − ⟨p⟩)/(2 g Δp²)`, `P̂_j` = outcome frequency.
    /// Rows with fewer than two readouts in any cell are masked.
    pub fn to_table(&self) -> Result<WeakValueTable> {
        let n = self.cfg.n_pointers();
        if self.trials == 0 {
            return Err(Error::DegenerateData("no records".into()));
        }
        if let Some(i) = self.cfg.g.iter().position(|&g| g <= 0.0) {
            return Err(Error::Precondition(format!(
                "pointer {i} has zero coupling; weak values cannot be estimated"
            )));
        }
        let mut w = CMatrix::zeros(self.dim, n);
        let mut se_re = nalgebra::DMatrix::zeros(self.dim, n);
        let mut se_im = nalgebra::DMatrix::zeros(self.dim, n);
        let mut defined = vec![false; self.dim];
        for j in 0..self.dim {
            let complete = (0..n).all(|i| {
                [Quadrature::Position, Quadrature::Momentum]
                    .iter()
                    .all(|&q| self.cells[self.cell(j, i, q)].n >= 2)
            });
            if !complete {
                continue;
            }
            defined[j] = true;
            for i in 0..n {
                let q = &self.cells[self.cell(j, i, Quadrature::Position)];
                let p = &self.cells[self.cell(j, i, Quadrature::Momentum)];
                let g = self.cfg.g[i];
                let im_scale = 2.0 * g * self.cfg.sigma_p[i].powi(2);
                w[(j, i)] = C64::new(q.mean / g, p.mean / im_scale);
                se_re[(j, i)] = q.stderr() / g;
                se_im[(j, i)] = p.stderr() / im_scale;
            }
        }
        let total = self.trials as f64;
        let p = self
            .outcome_counts
            .iter()
            .map(|&c| c as f64 / total)
            .collect();
        WeakValueTable::new(w, p, defined)?.with_stderr(StdErrors { re: se_re, im: se_im })
    }
}

/// Estimates a weak-value table (with standard errors) from a record stream.
///
/// Records must arrive grouped by trial with pointer 0 first, as produced by
/// [`Sampler`] or read back from its CSV. Statistics are reduced per block of
/// [`BLOCK_TRIALS`] so the result matches [`Sampler::accumulate`] bit for bit.
pub fn estimate_weak_values(
    records: impl IntoIterator<Item = ExperimentRecord>,
    cfg: &PointerConfig,
    dim: usize,
) -> Result<WeakValueTable> {
    cfg.validate()?;
    let mut total = RecordAccumulator::new(dim, cfg.clone());
    let mut block = RecordAccumulator::new(dim, cfg.clone());
    let mut current = None;
    for r in records {
        let b = r.trial / BLOCK_TRIALS;
        if current != Some(b) {
            if current.is_some() {
                total.merge(&block);
                block = RecordAccumulator::new(dim, cfg.clone());
            }
            current = Some(b);
        }
        block.push(&r)?;
    }
    total.merge(&block);
    total.to_table()
}
