//! Dormand–Prince 5(4) integration of two-dimensional linear systems, with
//! exact landing on a list of output abscissae and an overflow-safe running
//! rescale (the solution is carried as `y · exp(log_scale)`).

use crate::math::log;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dopri5 {
    pub rtol: f64,
    /// Absolute tolerance measured relative to the current solution norm.
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for Dopri5 {
    fn default() -> Self {
        Dopri5 {
            rtol: 1e-12,
            atol: 1e-14,
            max_steps: 2_000_000,
        }
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const RESCALE_ABOVE: f64 = 1e100;

type V2 = [f64; 2];

#[inline]
fn axpy(y: V2, h: f64, terms: &[(f64, V2)]) -> V2 {
    let mut out = y;
    for &(c, k) in terms {
        out[0] += h * c * k[0];
        out[1] += h * c * k[1];
    }
    out
}

impl Dopri5 {
    /// Integrate `y' = f(x, y)` from `(x0, y0)` through `targets`, which must
    /// be monotone in the direction of integration and start at or past `x0`.
    /// `on_target(i, y, log_scale)` is called at each target with the rescaled
    /// state; the true state is `y · exp(log_scale)`.
    pub fn integrate<F, G>(&self, mut f: F, x0: f64, y0: V2, targets: &[f64], mut on_target: G) -> Result<()>
    where
        F: FnMut(f64, V2) -> V2,
        G: FnMut(usize, V2, f64),
    {
        if targets.is_empty() {
            return Ok(());
        }
        let span = targets[targets.len() - 1] - x0;
        let dir = if span >= 0.0 { 1.0 } else { -1.0 };
        let mut x = x0;
        let mut y = y0;
        let mut log_scale = 0.0;
        let mut k1 = f(x, y);
        let mut h = dir * (span.abs() * 1e-4).max(1e-8);
        let mut steps = 0usize;

        for (i, &target) in targets.iter().enumerate() {
            if (target - x) * dir < 0.0 {
                return Err(Error::input("ODE targets must be monotone in the integration direction"));
            }
            while (target - x) * dir > 0.0 {
                steps += 1;
                if steps > self.max_steps {
                    return Err(Error::numerical("Dormand-Prince step budget", self.rtol, f64::NAN));
                }
                let mut last = false;
                if (x + h - target) * dir >= 0.0 {
                    h = target - x;
                    last = true;
                }
                let k2 = f(x + C2 * h, axpy(y, h, &[(A21, k1)]));
                let k3 = f(x + C3 * h, axpy(y, h, &[(A31, k1), (A32, k2)]));
                let k4 = f(x + C4 * h, axpy(y, h, &[(A41, k1), (A42, k2), (A43, k3)]));
                let k5 = f(x + C5 * h, axpy(y, h, &[(A51, k1), (A52, k2), (A53, k3), (A54, k4)]));
                let k6 = f(
                    x + h,
                    axpy(y, h, &[(A61, k1), (A62, k2), (A63, k3), (A64, k4), (A65, k5)]),
                );
                let y_new = axpy(y, h, &[(A71, k1), (A73, k3), (A74, k4), (A75, k5), (A76, k6)]);
                let k7 = f(x + h, y_new);
                let err_vec = axpy(
                    [0.0, 0.0],
                    h,
                    &[(E1, k1), (E3, k3), (E4, k4), (E5, k5), (E6, k6), (E7, k7)],
                );
                let norm = y[0].abs().max(y[1].abs()).max(y_new[0].abs()).max(y_new[1].abs());
                let mut err: f64 = 0.0;
                for j in 0..2 {
                    let sc = self.rtol * y[j].abs().max(y_new[j].abs()) + self.atol * norm;
                    let e = if sc > 0.0 { err_vec[j] / sc } else { 0.0 };
                    err = err.max(e.abs());
                }
                if !err.is_finite() {
                    return Err(Error::numerical("Dormand-Prince (non-finite state)", self.rtol, f64::NAN));
                }
                let factor = if err == 0.0 {
                    5.0
                } else {
                    (0.9 * libm::pow(err, -0.2)).clamp(0.2, 5.0)
                };
                if err <= 1.0 {
                    x = if last { target } else { x + h };
                    y = y_new;
                    k1 = k7;
                    let big = y[0].abs().max(y[1].abs());
                    if big > RESCALE_ABOVE {
                        y = [y[0] / big, y[1] / big];
                        k1 = [k1[0] / big, k1[1] / big];
                        log_scale += log(big);
                    }
                    if !last {
                        h *= factor;
                    } else {
                        // keep the pre-clipping step size for the next leg
                        h = dir * h.abs().max(1e-8);
                    }
                } else {
                    h *= factor.min(1.0);
                    if h.abs() < 1e-14 * (1.0 + x.abs()) {
                        return Err(Error::numerical("Dormand-Prince step size underflow", self.rtol, err));
                    }
                }
            }
            on_target(i, y, log_scale);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::exp;
    use alloc::vec::Vec;

    #[test]
    fn harmonic_oscillator() {
        let targets: Vec<f64> = (1..=20).map(|k| k as f64 * 0.5).collect();
        let mut worst: f64 = 0.0;
        Dopri5::default()
            .integrate(|_, y| [y[1], -y[0]], 0.0, [0.0, 1.0], &targets, |i, y, s| {
                let x = targets[i];
                worst = worst.max((y[0] * exp(s) - libm::sin(x)).abs());
            })
            .unwrap();
        assert!(worst < 1e-10, "{worst}");
    }

    #[test]
    fn exponential_growth_is_rescaled() {
        // u'' = 400 u, u(0)=1, u'(0)=20 → u = e^{20x}; at x=20 that is e^{400}
        let targets = [10.0, 20.0];
        let mut logs = [0.0; 2];
        Dopri5::default()
            .integrate(|_, y| [y[1], 400.0 * y[0]], 0.0, [1.0, 20.0], &targets, |i, y, s| {
                logs[i] = log(y[0]) + s;
            })
            .unwrap();
        assert!((logs[0] - 200.0).abs() < 1e-8);
        assert!((logs[1] - 400.0).abs() < 1e-8);
    }

    #[test]
    fn backward_integration() {
        let targets = [-1.0, -2.0];
        let mut got = [0.0; 2];
        Dopri5::default()
            .integrate(|_, y| [y[1], y[0]], 0.0, [1.0, -1.0], &targets, |i, y, s| got[i] = y[0] * exp(s))
            .unwrap();
        assert!((got[0] - exp(1.0)).abs() < 1e-11);
        assert!((got[1] - exp(2.0)).abs() < 1e-11);
    }
}
