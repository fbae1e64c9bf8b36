//! Monte Carlo engine for the reflected, doubly reflected and killed
//! diffusions.
//!
//! Paths are generated in fixed chunks of [`CHUNK`] units (a unit is a path, or
//! an antithetic pair). Each unit owns counter-based ChaCha streams keyed by
//! `(seed, unit index)`, and chunk accumulators are merged in index order, so
//! an estimate is bit-identical however the chunks are scheduled.

mod killed;
mod payoff;
mod rng;
mod step;

use alloc::vec::Vec;

pub use killed::{estimate_case_c_value, estimate_vprime_stopping, CaseCEstimator, VprimeEstimator};
pub use payoff::{estimate_payoff, simulate_double_reflection, PathAccumulators, PathRecorder, PayoffEstimator, PayoffMoments};
pub use step::{Scheme, Step, Stepper};


use crate::{Error, Result};

/// Units per chunk.
pub const CHUNK: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    /// Euler step.
    pub dt: f64,
    /// Horizon for horizon-truncated estimators and the per-phase cap of the
    /// regenerative one; `None` picks one from the discount rate.
    pub horizon: Option<f64>,
    pub n_paths: usize,
    pub seed: u64,
    pub antithetic: bool,
    pub scheme: Scheme,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt: 1e-3,
            horizon: None,
            n_paths: 100_000,
            seed: 0,
            antithetic: true,
            scheme: Scheme::BridgeExtrema,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::input("dt must be positive"));
        }
        if let Some(h) = self.horizon {
            if !(h > self.dt && h.is_finite()) {
                return Err(Error::input("horizon must exceed dt"));
            }
        }
        if self.n_paths < 2 {
            return Err(Error::input("n_paths must be at least 2"));
        }
        Ok(())
    }

    /// Number of independent units (pairs when antithetic).
    pub fn units(&self) -> usize {
        if self.antithetic {
            self.n_paths.div_ceil(2)
        } else {
            self.n_paths
        }
    }

    pub fn chunks(&self) -> usize {
        self.units().div_ceil(CHUNK)
    }

    fn unit_range(&self, chunk: usize) -> core::ops::Range<usize> {
        let start = chunk * CHUNK;
        start..(start + CHUNK).min(self.units())
    }

    /// Horizon `ln(1e4)/rate` unless set explicitly.
    pub fn horizon_for(&self, rate: f64) -> f64 {
        self.horizon.unwrap_or_else(|| libm::log(1e4) / rate)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimEstimate {
    pub mean: f64,
    pub std_error: f64,
    /// Paths simulated (twice the pairs under antithetics).
    pub n_paths: usize,
    /// Bound on the discounted payoff dropped by truncating at the horizon.
    pub tail_bound: f64,
    pub failures: usize,
    /// Paths (or phases) cut off at the horizon.
    pub truncated: usize,
    /// Steps where both barriers were touched and the scheme fell back to projection.
    pub fallback_steps: u64,
}

/// A Monte Carlo estimator split into independent, ordered chunks.
pub trait ChunkedEstimator: Sync {
    type Acc: Send;

    fn chunks(&self) -> usize;
    fn run_chunk(&self, index: usize) -> Self::Acc;
    fn finalize(&self, parts: Vec<Self::Acc>) -> Result<SimEstimate>;
}

/// Run every chunk on the current thread.
pub fn run_sequential<E: ChunkedEstimator>(est: &E) -> Result<SimEstimate> {
    let parts = (0..est.chunks()).map(|i| est.run_chunk(i)).collect();
    est.finalize(parts)
}

/// Sample moments of a `K`-vector statistic; the per-chunk accumulator.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments<const K: usize> {
    pub(crate) n: usize,
    pub(crate) sum: [f64; K],
    pub(crate) cross: [[f64; K]; K],
    pub(crate) failures: usize,
    pub(crate) truncated: usize,
    pub(crate) fallback_steps: u64,
}

impl<const K: usize> Moments<K> {
    pub(crate) fn new() -> Self {
        Moments {
            n: 0,
            sum: [0.0; K],
            cross: [[0.0; K]; K],
            failures: 0,
            truncated: 0,
            fallback_steps: 0,
        }
    }

    pub(crate) fn push(&mut self, v: [f64; K]) {
        self.n += 1;
        for i in 0..K {
            self.sum[i] += v[i];
            for j in 0..K {
                self.cross[i][j] += v[i] * v[j];
            }
        }
    }

    pub(crate) fn merge(&mut self, other: &Self) {
        self.n += other.n;
        self.failures += other.failures;
        self.truncated += other.truncated;
        self.fallback_steps += other.fallback_steps;
        for i in 0..K {
            self.sum[i] += other.sum[i];
            for j in 0..K {
                self.cross[i][j] += other.cross[i][j];
            }
        }
    }

    pub(crate) fn mean(&self) -> [f64; K] {
        let mut m = [0.0; K];
        for i in 0..K {
            m[i] = self.sum[i] / self.n as f64;
        }
        m
    }

    /// Unbiased sample covariance.
    pub(crate) fn covariance(&self) -> [[f64; K]; K] {
        let m = self.mean();
        let n = self.n as f64;
        let mut c = [[0.0; K]; K];
        for i in 0..K {
            for j in 0..K {
                c[i][j] = (self.cross[i][j] - n * m[i] * m[j]) / (n - 1.0);
            }
        }
        c
    }
}

pub(crate) fn merge_all<const K: usize>(parts: Vec<Moments<K>>) -> Moments<K> {
    let mut total = Moments::new();
    for p in &parts {
        total.merge(p);
    }
    total
}

/// Fail when more than 0.1% of paths were lost.
pub(crate) fn check_failures(failures: usize, total: usize) -> Result<()> {
    if failures * 1000 > total {
        Err(Error::Path { failures, total })
    } else {
        Ok(())
    }
}
