use alloc::vec::Vec;

use super::rng::PathRng;
use super::step::Stepper;
use super::{check_failures, merge_all, ChunkedEstimator, Moments, SimConfig, SimEstimate};
use crate::diffusion::DiffusionSpec;
use crate::math::{exp, sqrt};
use crate::reward::RewardSpec;
use crate::{Error, Result};

fn scalar_estimate(
    m: Moments<1>,
    cfg: &SimConfig,
    tail_per_truncated: f64,
) -> Result<SimEstimate> {
    let per_unit = if cfg.antithetic { 2 } else { 1 };
    let n_paths = cfg.units() * per_unit;
    check_failures(m.failures, n_paths)?;
    if m.n < 2 {
        return Err(Error::Path {
            failures: m.failures,
            total: n_paths,
        });
    }
    let var = m.covariance()[0][0];
    Ok(SimEstimate {
        mean: m.mean()[0],
        std_error: sqrt(var.max(0.0) / m.n as f64),
        n_paths,
        tail_bound: m.truncated as f64 / n_paths as f64 * tail_per_truncated,
        failures: m.failures,
        truncated: m.truncated,
        fallback_steps: m.fallback_steps,
    })
}

/// Run `path(unit, mirrored)` over a chunk, pairing antithetic members.
fn scalar_chunk<F>(cfg: &SimConfig, index: usize, mut path: F) -> Moments<1>
where
    F: FnMut(usize, bool, &mut Moments<1>) -> Option<f64>,
{
    let mut acc = Moments::new();
    for unit in cfg.unit_range(index) {
        if cfg.antithetic {
            let p = path(unit, false, &mut acc);
            let m = path(unit, true, &mut acc);
            match (p, m) {
                (Some(p), Some(m)) => acc.push([0.5 * (p + m)]),
                (p, m) => acc.failures += p.is_none() as usize + m.is_none() as usize,
            }
        } else {
            match path(unit, false, &mut acc) {
                Some(v) => acc.push([v]),
                None => acc.failures += 1,
            }
        }
    }
    acc
}

/// `−κ ∫ e^{-rt} dL` for the process reflected at 0 with no upper control,
/// truncated at the horizon `ln(1e4)/r` unless one is set.
pub struct CaseCEstimator<'a> {
    spec: &'a DiffusionSpec,
    reward: &'a RewardSpec,
    x: f64,
    cfg: SimConfig,
    horizon: f64,
}

impl<'a> CaseCEstimator<'a> {
    pub fn new(spec: &'a DiffusionSpec, reward: &'a RewardSpec, x: f64, cfg: SimConfig) -> Result<Self> {
        cfg.validate()?;
        if !(x >= 0.0 && x.is_finite()) {
            return Err(Error::input("starting point must be finite and nonnegative"));
        }
        Ok(CaseCEstimator {
            spec,
            reward,
            x,
            cfg,
            horizon: cfg.horizon_for(reward.r),
        })
    }

    fn path(&self, st: &Stepper, unit: usize, mirrored: bool) -> Option<(f64, u64)> {
        let r = self.reward.r;
        let dt = self.cfg.dt;
        let q = exp(-r * dt);
        let mut disc = exp(-0.5 * r * dt);
        let mut rng = PathRng::new(self.cfg.seed, unit, mirrored);
        let mut y = self.x;
        let mut push = 0.0;
        let mut fallback = 0;
        for _ in 0..libm::ceil(self.horizon / dt) as usize {
            let z = rng.z();
            let s = st.reflect(y, z, || rng.u());
            if !s.x.is_finite() {
                return None;
            }
            push += disc * s.dl;
            fallback += s.fallback as u64;
            y = s.x;
            disc *= q;
        }
        Some((-self.reward.kappa * push, fallback))
    }
}

impl ChunkedEstimator for CaseCEstimator<'_> {
    type Acc = Moments<1>;

    fn chunks(&self) -> usize {
        self.cfg.chunks()
    }

    fn run_chunk(&self, index: usize) -> Moments<1> {
        let st = Stepper::new(self.spec, self.cfg.dt, f64::INFINITY, self.cfg.scheme);
        scalar_chunk(&self.cfg, index, |unit, mirrored, acc| {
            let (v, f) = self.path(&st, unit, mirrored)?;
            acc.fallback_steps += f;
            acc.truncated += 1;
            Some(v)
        })
    }

    fn finalize(&self, parts: Vec<Moments<1>>) -> Result<SimEstimate> {
        let r = self.reward.r;
        let s0 = self.spec.sigma(0.0);
        // value of the reflected process from 0 for frozen coefficients
        let v0 = self.reward.kappa * (s0 / sqrt(2.0 * r) + self.spec.mu(0.0).abs() / r);
        scalar_estimate(merge_all(parts), &self.cfg, exp(-r * self.horizon) * v0)
    }
}

/// Value of the Case C policy (reflect at 0, never sell) started at `x`.
pub fn estimate_case_c_value(
    spec: &DiffusionSpec,
    reward: &RewardSpec,
    x: f64,
    cfg: &SimConfig,
) -> Result<SimEstimate> {
    super::run_sequential(&CaseCEstimator::new(spec, reward, x, *cfg)?)
}

/// `E_x[e^{-∫(r − μ′)(X̂)} (κ 1{hit 0 first} + η(b) 1{hit b first})]` for the
/// hat diffusion killed on leaving `(0, b)`; this is `v′(x)` on the band.
pub struct VprimeEstimator<'a> {
    spec: &'a DiffusionSpec,
    reward: &'a RewardSpec,
    b: f64,
    x: f64,
    cfg: SimConfig,
    horizon: f64,
    rate: f64,
}

impl<'a> VprimeEstimator<'a> {
    pub fn new(spec: &'a DiffusionSpec, reward: &'a RewardSpec, b: f64, x: f64, cfg: SimConfig) -> Result<Self> {
        cfg.validate()?;
        if !(b > 0.0 && b.is_finite() && x.is_finite()) {
            return Err(Error::input("need finite x and positive finite b"));
        }
        let rate = (reward.r - spec.mu_prime(0.0)).min(reward.r - spec.mu_prime(b));
        if !(rate > 0.0) {
            return Err(Error::model("r − μ′ must be positive on the band"));
        }
        Ok(VprimeEstimator {
            spec,
            reward,
            b,
            x,
            cfg,
            horizon: cfg.horizon_for(rate),
            rate,
        })
    }

    fn path(&self, st: &Stepper, unit: usize, mirrored: bool) -> Option<(f64, bool)> {
        let dt = self.cfg.dt;
        let r = self.reward.r;
        let kill = |y: f64| r - self.spec.mu_prime(y);
        let mut rng = PathRng::new(self.cfg.seed, unit, mirrored);
        let mut y = self.x;
        let mut k_y = kill(y);
        let mut log_disc = 0.0;
        for _ in 0..libm::ceil(self.horizon / dt) as usize {
            let z = rng.z();
            let (c, var) = st.euler(y, z);
            if !c.is_finite() {
                return None;
            }
            if let Some(lower) = st.killed(y, c, var, || rng.u()) {
                let d = exp(-(log_disc + 0.5 * k_y * dt));
                let pay = if lower { self.reward.kappa } else { self.reward.eta.eta(self.b) };
                return Some((pay * d, false));
            }
            let k_c = kill(c);
            log_disc += 0.5 * (k_y + k_c) * dt;
            y = c;
            k_y = k_c;
        }
        Some((0.0, true))
    }
}

impl ChunkedEstimator for VprimeEstimator<'_> {
    type Acc = Moments<1>;

    fn chunks(&self) -> usize {
        self.cfg.chunks()
    }

    fn run_chunk(&self, index: usize) -> Moments<1> {
        let st = Stepper::new(self.spec, self.cfg.dt, self.b, self.cfg.scheme).hat();
        scalar_chunk(&self.cfg, index, |unit, mirrored, acc| {
            let (v, cut) = self.path(&st, unit, mirrored)?;
            acc.truncated += cut as usize;
            Some(v)
        })
    }

    fn finalize(&self, parts: Vec<Moments<1>>) -> Result<SimEstimate> {
        let scale = self.reward.kappa.abs().max(self.reward.eta.eta(self.b).abs());
        scalar_estimate(merge_all(parts), &self.cfg, exp(-self.rate * self.horizon) * scale)
    }
}

/// Monte Carlo `v′(x)` on `[0, b]`; the endpoints return `κ` and `η(b)` exactly.
pub fn estimate_vprime_stopping(
    spec: &DiffusionSpec,
    reward: &RewardSpec,
    b: f64,
    x: f64,
    cfg: &SimConfig,
) -> Result<SimEstimate> {
    let exact = if x <= 0.0 {
        Some(reward.kappa)
    } else if x >= b {
        Some(reward.eta.eta(b))
    } else {
        None
    };
    if let Some(mean) = exact {
        cfg.validate()?;
        return Ok(SimEstimate {
            mean,
            std_error: 0.0,
            n_paths: 0,
            tail_bound: 0.0,
            failures: 0,
            truncated: 0,
            fallback_steps: 0,
        });
    }
    super::run_sequential(&VprimeEstimator::new(spec, reward, b, x, *cfg)?)
}
