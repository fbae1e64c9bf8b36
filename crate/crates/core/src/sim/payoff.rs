use alloc::vec::Vec;

use super::rng::PathRng;
use super::step::Stepper;
use super::{check_failures, merge_all, ChunkedEstimator, Moments, SimConfig, SimEstimate};
use crate::diffusion::DiffusionSpec;
use crate::math::{exp, sqrt};
use crate::reward::RewardSpec;
use crate::{Error, Result};

/// Receives `(t, x, dL, dD)` after every step of a recorded path.
pub trait PathRecorder {
    fn record(&mut self, t: f64, x: f64, dl: f64, dd: f64);
}

impl<F: FnMut(f64, f64, f64, f64)> PathRecorder for F {
    fn record(&mut self, t: f64, x: f64, dl: f64, dd: f64) {
        self(t, x, dl, dd)
    }
}

/// Totals of one doubly reflected path over the horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathAccumulators {
    /// Lump paid at time 0 to bring `x > b` down to `b`.
    pub initial_jump: f64,
    /// `∫_b^x η` for that lump.
    pub jump_payoff: f64,
    /// `∫ e^{-rt} η dD − κ ∫ e^{-rt} dL`, the lump included.
    pub discounted_payoff: f64,
    pub total_dl: f64,
    pub total_dd: f64,
    pub min_x: f64,
    pub max_x: f64,
    pub steps: usize,
    pub fallback_steps: u64,
    /// Steps where both increments were positive (never expected).
    pub overlapping_steps: usize,
}

fn check_band(spec: &DiffusionSpec, reward: &RewardSpec, b: f64, x: f64, cfg: &SimConfig) -> Result<()> {
    cfg.validate()?;
    if !(b > 0.0 && b.is_finite()) {
        return Err(Error::input("policy boundary b must be positive and finite"));
    }
    if !(x >= 0.0 && x.is_finite()) {
        return Err(Error::input("starting point must be finite and nonnegative"));
    }
    if !(spec.sigma(0.0).is_finite() && reward.eta.eta(b).is_finite()) {
        return Err(Error::input("coefficients are not finite on the band"));
    }
    Ok(())
}

/// Simulate one path of the process reflected on `[0, b]` up to the horizon,
/// starting with a lump at time 0 if `x > b`.
pub fn simulate_double_reflection(
    spec: &DiffusionSpec,
    reward: &RewardSpec,
    b: f64,
    x: f64,
    cfg: &SimConfig,
    path: usize,
    mut recorder: Option<&mut dyn PathRecorder>,
) -> Result<PathAccumulators> {
    check_band(spec, reward, b, x, cfg)?;
    let r = reward.r;
    let horizon = cfg.horizon_for(r);
    let stepper = Stepper::new(spec, cfg.dt, b, cfg.scheme);
    let mut rng = PathRng::new(cfg.seed, path, false);
    let eta_b = reward.eta.eta(b);

    let (mut y, initial_jump, jump_payoff) = if x > b {
        (b, x - b, reward.eta.integral(b, x))
    } else {
        (x, 0.0, 0.0)
    };
    if let Some(rec) = recorder.as_deref_mut() {
        rec.record(0.0, y, 0.0, initial_jump);
    }
    let mut acc = PathAccumulators {
        initial_jump,
        jump_payoff,
        discounted_payoff: jump_payoff,
        total_dl: 0.0,
        total_dd: initial_jump,
        min_x: y,
        max_x: y,
        steps: 0,
        fallback_steps: 0,
        overlapping_steps: 0,
    };
    let n = libm::ceil(horizon / cfg.dt) as usize;
    let q = exp(-r * cfg.dt);
    let mut disc = exp(-0.5 * r * cfg.dt);
    for k in 0..n {
        let z = rng.z();
        let s = stepper.reflect(y, z, || rng.u());
        if !s.x.is_finite() {
            return Err(Error::Path { failures: 1, total: 1 });
        }
        y = s.x;
        acc.discounted_payoff += disc * (eta_b * s.dd - reward.kappa * s.dl);
        acc.total_dl += s.dl;
        acc.total_dd += s.dd;
        acc.min_x = acc.min_x.min(y);
        acc.max_x = acc.max_x.max(y);
        acc.fallback_steps += s.fallback as u64;
        acc.overlapping_steps += (s.dl > 0.0 && s.dd > 0.0) as usize;
        disc *= q;
        if let Some(rec) = recorder.as_deref_mut() {
            rec.record((k + 1) as f64 * cfg.dt, y, s.dl, s.dd);
        }
    }
    acc.steps = n;
    Ok(acc)
}

/// Regenerative estimator of the payoff of the band policy `[0, b]`.
///
/// A path runs until it has touched `b` and then been pushed at 0 (phase A,
/// payoff `A`, discount `D` at its end), then once more through the same kind
/// of cycle (payoff `C`, discount `E`). Cycle ends follow a push at 0 after a
/// descent from `b`, so successive cycles start from (nearly) the same law and
/// `J = Ā + D̄ C̄ / (1 − Ē)`; the standard error is by the delta method.
/// A phase A cut off at the horizon contributes `(A, D)` but no cycle, since
/// its end state is not a regeneration point.
pub struct PayoffEstimator<'a> {
    spec: &'a DiffusionSpec,
    reward: &'a RewardSpec,
    b: f64,
    x: f64,
    cfg: SimConfig,
    horizon: f64,
}

struct Phase {
    payoff: f64,
    discount: f64,
    end: f64,
    truncated: bool,
    fallback: u64,
}

impl<'a> PayoffEstimator<'a> {
    pub fn new(spec: &'a DiffusionSpec, reward: &'a RewardSpec, b: f64, x: f64, cfg: SimConfig) -> Result<Self> {
        check_band(spec, reward, b, x, &cfg)?;
        Ok(PayoffEstimator {
            spec,
            reward,
            b,
            x,
            cfg,
            horizon: cfg.horizon_for(reward.r),
        })
    }

    /// Run until a push at 0 after `b` has been touched, or the horizon cap.
    fn phase(&self, st: &Stepper, x0: f64, mut touched: bool, rng: &mut PathRng) -> Option<Phase> {
        let r = self.reward.r;
        let dt = self.cfg.dt;
        let eta_b = self.reward.eta.eta(self.b);
        let kappa = self.reward.kappa;
        let q = exp(-r * dt);
        let max_steps = libm::ceil(self.horizon / dt) as usize;
        let mut disc = exp(-0.5 * r * dt);
        let mut y = x0;
        let mut payoff = 0.0;
        let mut fallback = 0;
        for k in 0..max_steps {
            let z = rng.z();
            let s = st.reflect(y, z, || rng.u());
            if !s.x.is_finite() {
                return None;
            }
            payoff += disc * (eta_b * s.dd - kappa * s.dl);
            fallback += s.fallback as u64;
            y = s.x;
            disc *= q;
            if touched && s.dl > 0.0 {
                return Some(Phase {
                    payoff,
                    discount: exp(-r * (k + 1) as f64 * dt),
                    end: y,
                    truncated: false,
                    fallback,
                });
            }
            touched |= s.dd > 0.0 || y >= self.b;
        }
        Some(Phase {
            payoff,
            discount: exp(-r * max_steps as f64 * dt),
            end: y,
            truncated: true,
            fallback,
        })
    }

    /// `[A, D]` for one path, with the lump for `x > b` folded into `A`, and
    /// `[C, E]` when phase A ended at a regeneration point.
    fn path(&self, st: &Stepper, unit: usize, mirrored: bool, acc: &mut PayoffMoments) -> Option<([f64; 2], Option<[f64; 2]>)> {
        let mut rng = PathRng::new(self.cfg.seed, unit, mirrored);
        let (start, lump) = if self.x > self.b {
            (self.b, self.reward.eta.integral(self.b, self.x))
        } else {
            (self.x, 0.0)
        };
        let a = self.phase(st, start, start >= self.b, &mut rng)?;
        acc.head.truncated += a.truncated as usize;
        acc.head.fallback_steps += a.fallback;
        let head = [lump + a.payoff, a.discount];
        if a.truncated {
            // the state at the cap is not a regeneration point
            return Some((head, None));
        }
        let c = self.phase(st, a.end, false, &mut rng)?;
        acc.head.truncated += c.truncated as usize;
        acc.head.fallback_steps += c.fallback;
        Some((head, Some([c.payoff, c.discount])))
    }

    fn rate_bound(&self) -> f64 {
        let s = self.spec.sigma(0.0).max(self.spec.sigma(self.b));
        self.spec.mu(0.0).abs().max(self.spec.mu(self.b).abs()) + s * s / self.b
    }
}

/// Chunk accumulator of [`PayoffEstimator`]: moments of `(A, D)` per unit and
/// of `(C, E)` per complete cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct PayoffMoments {
    head: Moments<2>,
    cycle: Moments<2>,
}

fn quad2(g: [f64; 2], c: [[f64; 2]; 2]) -> f64 {
    g[0] * g[0] * c[0][0] + 2.0 * g[0] * g[1] * c[0][1] + g[1] * g[1] * c[1][1]
}

fn average(p: [f64; 2], m: [f64; 2]) -> [f64; 2] {
    [0.5 * (p[0] + m[0]), 0.5 * (p[1] + m[1])]
}

impl ChunkedEstimator for PayoffEstimator<'_> {
    type Acc = PayoffMoments;

    fn chunks(&self) -> usize {
        self.cfg.chunks()
    }

    fn run_chunk(&self, index: usize) -> PayoffMoments {
        let st = Stepper::new(self.spec, self.cfg.dt, self.b, self.cfg.scheme);
        let mut acc = PayoffMoments {
            head: Moments::new(),
            cycle: Moments::new(),
        };
        for unit in self.cfg.unit_range(index) {
            if self.cfg.antithetic {
                let p = self.path(&st, unit, false, &mut acc);
                let m = self.path(&st, unit, true, &mut acc);
                match (p, m) {
                    (Some((hp, cp)), Some((hm, cm))) => {
                        acc.head.push(average(hp, hm));
                        match (cp, cm) {
                            (Some(cp), Some(cm)) => acc.cycle.push(average(cp, cm)),
                            (Some(c), None) | (None, Some(c)) => acc.cycle.push(c),
                            (None, None) => {}
                        }
                    }
                    (p, m) => acc.head.failures += p.is_none() as usize + m.is_none() as usize,
                }
            } else {
                match self.path(&st, unit, false, &mut acc) {
                    Some((h, c)) => {
                        acc.head.push(h);
                        if let Some(c) = c {
                            acc.cycle.push(c);
                        }
                    }
                    None => acc.head.failures += 1,
                }
            }
        }
        acc
    }

    fn finalize(&self, parts: Vec<PayoffMoments>) -> Result<SimEstimate> {
        let (heads, cycles): (Vec<_>, Vec<_>) = parts.into_iter().map(|p| (p.head, p.cycle)).unzip();
        let h = merge_all(heads);
        let c = merge_all(cycles);
        let per_unit = if self.cfg.antithetic { 2 } else { 1 };
        let n_paths = self.cfg.units() * per_unit;
        check_failures(h.failures, n_paths)?;
        if h.n < 2 {
            return Err(Error::Path {
                failures: h.failures,
                total: n_paths,
            });
        }
        if c.n < 2 {
            return Err(Error::numerical(
                "regenerative estimator: fewer than two complete cycles; raise the horizon",
                2.0,
                c.n as f64,
            ));
        }
        let [a, d] = h.mean();
        let [cm, e] = c.mean();
        let ratio = cm / (1.0 - e);
        let mean = a + d * ratio;
        let var_head = quad2([1.0, ratio], h.covariance()) / h.n as f64;
        let var_ratio = quad2([1.0 / (1.0 - e), ratio / (1.0 - e)], c.covariance()) / c.n as f64;
        let var = var_head + d * d * var_ratio;
        let r = self.reward.r;
        let scale = self.reward.eta.eta(self.b).abs() + self.reward.kappa;
        let tail_bound = h.truncated as f64 / n_paths as f64 * exp(-r * self.horizon) * scale * self.rate_bound() / r;
        Ok(SimEstimate {
            mean,
            std_error: sqrt(var.max(0.0)),
            n_paths,
            tail_bound,
            failures: h.failures,
            truncated: h.truncated,
            fallback_steps: h.fallback_steps,
        })
    }
}

/// Payoff of the band policy `[0, b]` started at `x`.
pub fn estimate_payoff(
    spec: &DiffusionSpec,
    reward: &RewardSpec,
    b: f64,
    x: f64,
    cfg: &SimConfig,
) -> Result<SimEstimate> {
    super::run_sequential(&PayoffEstimator::new(spec, reward, b, x, *cfg)?)
}

