//! The uncontrolled diffusion `dX = μ(X)dt + σ(X)dB`, its companion `X̂` with
//! drift `μ + σσ′`, scale/speed densities and the two generators.

use alloc::boxed::Box;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use crate::math::quad::{self, QuadTol};
use crate::math::{exp, sqrt};
use crate::{Error, Result};

/// Drift and volatility with their first derivatives.
pub trait Diffusion: Send + Sync {
    fn drift(&self, x: f64) -> f64;
    fn drift_prime(&self, x: f64) -> f64;
    fn vol(&self, x: f64) -> f64;
    fn vol_prime(&self, x: f64) -> f64;

    /// `false` when the derivatives are finite-difference approximations.
    fn analytic_derivatives(&self) -> bool {
        true
    }
}

/// Brownian motion with constant drift and volatility.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftedBrownian {
    pub mu: f64,
    pub sigma: f64,
}

impl Diffusion for DriftedBrownian {
    fn drift(&self, _: f64) -> f64 {
        self.mu
    }
    fn drift_prime(&self, _: f64) -> f64 {
        0.0
    }
    fn vol(&self, _: f64) -> f64 {
        self.sigma
    }
    fn vol_prime(&self, _: f64) -> f64 {
        0.0
    }
}

/// `dX = (μ − θX)dt + σ dB`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrnsteinUhlenbeck {
    pub mu: f64,
    pub theta: f64,
    pub sigma: f64,
}

impl Diffusion for OrnsteinUhlenbeck {
    fn drift(&self, x: f64) -> f64 {
        self.mu - self.theta * x
    }
    fn drift_prime(&self, _: f64) -> f64 {
        -self.theta
    }
    fn vol(&self, _: f64) -> f64 {
        self.sigma
    }
    fn vol_prime(&self, _: f64) -> f64 {
        0.0
    }
}

type Func = Box<dyn Fn(f64) -> f64 + Send + Sync>;

/// Diffusion built from closures.
pub struct FnDiffusion {
    mu: Func,
    mu_prime: Func,
    sigma: Func,
    sigma_prime: Func,
    analytic: bool,
}

/// Central-difference step used whenever derivatives are not supplied.
pub fn fd_step(x: f64) -> f64 {
    1e-6_f64.max(1e-6 * x.abs())
}

pub(crate) fn central_difference(f: &(dyn Fn(f64) -> f64 + Send + Sync), x: f64) -> f64 {
    let h = fd_step(x);
    (f(x + h) - f(x - h)) / (2.0 * h)
}

impl FnDiffusion {
    pub fn new<A, B, C, D>(mu: A, mu_prime: B, sigma: C, sigma_prime: D) -> Self
    where
        A: Fn(f64) -> f64 + Send + Sync + 'static,
        B: Fn(f64) -> f64 + Send + Sync + 'static,
        C: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        FnDiffusion {
            mu: Box::new(mu),
            mu_prime: Box::new(mu_prime),
            sigma: Box::new(sigma),
            sigma_prime: Box::new(sigma_prime),
            analytic: true,
        }
    }

    /// Derivatives by central differences; flagged in the validation report.
    pub fn finite_difference<A, C>(mu: A, sigma: C) -> Self
    where
        A: Fn(f64) -> f64 + Send + Sync + 'static,
        C: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        FnDiffusion {
            mu: Box::new(mu),
            mu_prime: Box::new(|_| 0.0),
            sigma: Box::new(sigma),
            sigma_prime: Box::new(|_| 0.0),
            analytic: false,
        }
    }
}

impl Diffusion for FnDiffusion {
    fn drift(&self, x: f64) -> f64 {
        (self.mu)(x)
    }
    fn drift_prime(&self, x: f64) -> f64 {
        if self.analytic {
            (self.mu_prime)(x)
        } else {
            central_difference(&*self.mu, x)
        }
    }
    fn vol(&self, x: f64) -> f64 {
        (self.sigma)(x)
    }
    fn vol_prime(&self, x: f64) -> f64 {
        if self.analytic {
            (self.sigma_prime)(x)
        } else {
            central_difference(&*self.sigma, x)
        }
    }
    fn analytic_derivatives(&self) -> bool {
        self.analytic
    }
}

impl fmt::Debug for FnDiffusion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnDiffusion").field("analytic", &self.analytic).finish_non_exhaustive()
    }
}

/// A diffusion model plus the Lipschitz constant and the scale anchor `x_o`.
#[derive(Clone)]
pub struct DiffusionSpec {
    pub model: Arc<dyn Diffusion>,
    pub lipschitz: f64,
    pub anchor: f64,
}

impl fmt::Debug for DiffusionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DiffusionSpec")
            .field("lipschitz", &self.lipschitz)
            .field("anchor", &self.anchor)
            .finish_non_exhaustive()
    }
}

impl DiffusionSpec {
    pub fn new<D: Diffusion + 'static>(model: D, lipschitz: f64) -> Self {
        DiffusionSpec {
            model: Arc::new(model),
            lipschitz,
            anchor: 0.0,
        }
    }

    pub fn with_anchor(mut self, anchor: f64) -> Self {
        self.anchor = anchor;
        self
    }

    #[inline]
    pub fn mu(&self, x: f64) -> f64 {
        self.model.drift(x)
    }
    #[inline]
    pub fn mu_prime(&self, x: f64) -> f64 {
        self.model.drift_prime(x)
    }
    #[inline]
    pub fn sigma(&self, x: f64) -> f64 {
        self.model.vol(x)
    }
    #[inline]
    pub fn sigma_prime(&self, x: f64) -> f64 {
        self.model.vol_prime(x)
    }
    /// Drift of `X̂`.
    #[inline]
    pub fn hat_mu(&self, x: f64) -> f64 {
        self.mu(x) + self.sigma(x) * self.sigma_prime(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spacing {
    Uniform,
    /// Cells grow geometrically away from 0; `ratio` is last/first cell width.
    Geometric { ratio: u32 },
    Custom,
}

/// Strictly increasing points on `[x_lo, x_hi]` containing 0 exactly once.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    points: Vec<f64>,
    zero: usize,
    spacing: Spacing,
}

impl Grid {
    pub fn from_points(points: Vec<f64>) -> Result<Self> {
        Self::checked(points, Spacing::Custom)
    }

    fn checked(points: Vec<f64>, spacing: Spacing) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::input("grid needs at least two points"));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(Error::input("grid points must be finite"));
        }
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::input("grid points must be strictly increasing"));
        }
        let zero = points
            .iter()
            .position(|&p| p == 0.0)
            .ok_or_else(|| Error::input("grid must contain 0"))?;
        if *points.last().unwrap() <= 0.0 {
            return Err(Error::input("grid must extend above 0"));
        }
        Ok(Grid { points, zero, spacing })
    }

    /// Uniform-ish grid: cells are split between the two sides of 0 in
    /// proportion to their lengths so that 0 is a node.
    pub fn uniform(lo: f64, hi: f64, cells: usize) -> Result<Self> {
        Self::build(lo, hi, cells, 1.0).and_then(|p| Self::checked(p, Spacing::Uniform))
    }

    /// Cells grow geometrically away from 0 (finer resolution near the
    /// reflecting barrier).
    pub fn geometric(lo: f64, hi: f64, cells: usize, ratio: u32) -> Result<Self> {
        if ratio < 1 {
            return Err(Error::input("geometric ratio must be at least 1"));
        }
        Self::build(lo, hi, cells, ratio as f64).and_then(|p| Self::checked(p, Spacing::Geometric { ratio }))
    }

    fn build(lo: f64, hi: f64, cells: usize, ratio: f64) -> Result<Vec<f64>> {
        if !(lo.is_finite() && hi.is_finite()) || lo > 0.0 || hi <= 0.0 {
            return Err(Error::input("grid bounds must satisfy x_lo <= 0 < x_hi"));
        }
        if cells < 2 {
            return Err(Error::input("grid needs at least two cells"));
        }
        let n_pos = if lo == 0.0 {
            cells
        } else {
            (libm::round(cells as f64 * hi / (hi - lo)) as usize).clamp(1, cells - 1)
        };
        let n_neg = cells - n_pos;
        let side = |len: f64, n: usize| -> Vec<f64> {
            // node k at len * s(k/n), s(t) geometric stretch with end-cell ratio
            let q = if n > 1 { libm::pow(ratio, 1.0 / (n as f64 - 1.0)) } else { 1.0 };
            let mut widths: Vec<f64> = (0..n).map(|k| libm::pow(q, k as f64)).collect();
            let total: f64 = widths.iter().sum();
            for w in widths.iter_mut() {
                *w *= len / total;
            }
            let mut acc = 0.0;
            let mut out = Vec::with_capacity(n);
            for (k, w) in widths.iter().enumerate() {
                acc += w;
                out.push(if k + 1 == n { len } else { acc });
            }
            out
        };
        let mut points = Vec::with_capacity(cells + 1);
        if n_neg > 0 {
            let neg = side(-lo, n_neg);
            points.extend(neg.iter().rev().map(|&d| -d));
        }
        points.push(0.0);
        points.extend(side(hi, n_pos));
        Ok(points)
    }

    /// Default working domain `[−10 s, 10 s]` with `s = σ(0)/√(2(r − μ′(0)))`.
    pub fn default_for(spec: &DiffusionSpec, r: f64, cells: usize) -> Result<Self> {
        let r0 = r - spec.mu_prime(0.0);
        let s0 = spec.sigma(0.0);
        if !(r0 > 0.0) || !(s0 > 0.0) {
            return Err(Error::model("cannot size the default grid: need r - mu'(0) > 0 and sigma(0) > 0"));
        }
        let scale = s0 / sqrt(2.0 * r0);
        Self::uniform(-10.0 * scale, 10.0 * scale, cells)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }
    pub fn len(&self) -> usize {
        self.points.len()
    }
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
    pub fn zero_index(&self) -> usize {
        self.zero
    }
    pub fn lo(&self) -> f64 {
        self.points[0]
    }
    pub fn hi(&self) -> f64 {
        self.points[self.points.len() - 1]
    }
    pub fn spacing(&self) -> Spacing {
        self.spacing
    }
    /// Grid points in `[0, x_hi]`.
    pub fn nonnegative(&self) -> &[f64] {
        &self.points[self.zero..]
    }

    /// Index `i` of the cell `[p_i, p_{i+1}]` containing `x` (clamped).
    pub fn cell(&self, x: f64) -> usize {
        let n = self.points.len();
        match self.points.binary_search_by(|p| p.partial_cmp(&x).unwrap_or(core::cmp::Ordering::Less)) {
            Ok(i) => i.min(n - 2),
            Err(i) => i.saturating_sub(1).min(n - 2),
        }
    }
}

fn log_density(spec: &DiffusionSpec, x: f64, hat: bool) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::input("scale density queried at a non-finite point"));
    }
    let mut bad = false;
    let integral = quad::integrate(
        |y| {
            let s = spec.sigma(y);
            if !(s > 0.0) {
                bad = true;
                return 0.0;
            }
            let m = if hat { spec.hat_mu(y) } else { spec.mu(y) };
            m / (s * s)
        },
        spec.anchor,
        x,
        QuadTol::default(),
    )?;
    if bad {
        return Err(Error::model("sigma must be positive between the anchor and the query point"));
    }
    Ok(-2.0 * integral)
}

/// `S′(x) = exp(−2∫_{x_o}^x μ/σ²)`.
pub fn scale_density(spec: &DiffusionSpec, x: f64) -> Result<f64> {
    log_density(spec, x, false).map(exp)
}

/// `Ŝ′(x) = exp(−2∫_{x_o}^x (μ + σσ′)/σ²)`.
pub fn hat_scale_density(spec: &DiffusionSpec, x: f64) -> Result<f64> {
    log_density(spec, x, true).map(exp)
}

/// `m̂′(x) = 2/(σ²(x)Ŝ′(x))`.
pub fn speed_density(spec: &DiffusionSpec, x: f64) -> Result<f64> {
    let s = spec.sigma(x);
    Ok(2.0 / (s * s * hat_scale_density(spec, x)?))
}

fn finite3(f: f64, fp: f64, fpp: f64, x: f64) -> Result<()> {
    if f.is_finite() && fp.is_finite() && fpp.is_finite() && x.is_finite() {
        Ok(())
    } else {
        Err(Error::input("generator arguments must be finite"))
    }
}

/// `(L_X f)(x) = ½σ²f″ + μf′`.
pub fn generator_x(spec: &DiffusionSpec, f: f64, fp: f64, fpp: f64, x: f64) -> Result<f64> {
    finite3(f, fp, fpp, x)?;
    let s = spec.sigma(x);
    Ok(0.5 * s * s * fpp + spec.mu(x) * fp)
}

/// `(L_X̂ f)(x) = ½σ²f″ + (μ + σσ′)f′`.
pub fn generator_hat_x(spec: &DiffusionSpec, f: f64, fp: f64, fpp: f64, x: f64) -> Result<f64> {
    finite3(f, fp, fpp, x)?;
    let s = spec.sigma(x);
    Ok(0.5 * s * s * fpp + spec.hat_mu(x) * fp)
}

/// Sanity limits at the truncated ends of the domain, standing in for the
/// natural/entrance boundary classification.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryProxies {
    /// `ln ψ(x_hi)`; large and positive when `ψ → ∞`.
    pub log_psi_at_hi: f64,
    /// `|φ′(x_hi)|/S′(x_hi)` relative to its value at 0; small when it vanishes.
    pub phi_flux_ratio_at_hi: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub min_r_minus_mu_prime: f64,
    pub max_abs_mu_prime: f64,
    pub max_abs_sigma_prime: f64,
    pub min_sigma: f64,
    pub discount_ok: bool,
    pub lipschitz_ok: bool,
    pub sigma_ok: bool,
    pub finite_ok: bool,
    pub finite_difference_derivatives: bool,
    pub boundary: Option<BoundaryProxies>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.discount_ok
            && self.lipschitz_ok
            && self.sigma_ok
            && self.finite_ok
    }

    /// The boundary proxies are advisory and do not affect [`passed`](Self::passed).
    pub fn boundary_warning(&self) -> bool {
        matches!(self.boundary, Some(b) if !b.ok)
    }

    /// Human-readable list of failed checks.
    pub fn failures(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if !self.finite_ok {
            out.push("coefficients are not finite on the grid");
        }
        if !self.sigma_ok {
            out.push("sigma must be positive on the grid");
        }
        if !self.discount_ok {
            out.push("r - mu' must be positive on the grid");
        }
        if !self.lipschitz_ok {
            out.push("|mu'| or |sigma'| exceeds the Lipschitz constant");
        }
        out
    }
}

/// Check the standing assumptions on every grid point. Never fails; problems
/// are reported as flags.
pub fn validate_assumptions(spec: &DiffusionSpec, r: f64, grid: &Grid) -> ValidationReport {
    let mut min_disc = f64::INFINITY;
    let mut max_mp: f64 = 0.0;
    let mut max_sp: f64 = 0.0;
    let mut min_sigma = f64::INFINITY;
    let mut finite_ok = r.is_finite();
    for &x in grid.points() {
        let (m, mp, s, sp) = (spec.mu(x), spec.mu_prime(x), spec.sigma(x), spec.sigma_prime(x));
        if !(m.is_finite() && mp.is_finite() && s.is_finite() && sp.is_finite()) {
            finite_ok = false;
            continue;
        }
        min_disc = min_disc.min(r - mp);
        max_mp = max_mp.max(mp.abs());
        max_sp = max_sp.max(sp.abs());
        min_sigma = min_sigma.min(s);
    }
    ValidationReport {
        min_r_minus_mu_prime: min_disc,
        max_abs_mu_prime: max_mp,
        max_abs_sigma_prime: max_sp,
        min_sigma,
        discount_ok: min_disc > 0.0,
        lipschitz_ok: max_mp <= spec.lipschitz && max_sp <= spec.lipschitz,
        sigma_ok: min_sigma > 0.0,
        finite_ok,
        finite_difference_derivatives: !spec.model.analytic_derivatives(),
        boundary: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ou_baseline() -> DiffusionSpec {
        DiffusionSpec::new(OrnsteinUhlenbeck { mu: 0.1, theta: 1.0, sigma: sqrt(0.8) }, 1.0)
    }

    #[test]
    fn zero_drift_has_unit_scale_density() {
        let spec = DiffusionSpec::new(DriftedBrownian { mu: 0.0, sigma: 3.0 }, 1.0);
        assert_eq!(scale_density(&spec, 2.7).unwrap(), 1.0);
    }

    #[test]
    fn ou_scale_density_closed_form() {
        let spec = ou_baseline();
        let got = scale_density(&spec, 1.0).unwrap();
        let want = exp(-(1.0 / 0.4) * (0.1 - 0.5));
        assert!((got / want - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exponential_vol_hat_density() {
        let spec = DiffusionSpec::new(FnDiffusion::new(|_| 0.0, |_| 0.0, exp, exp), 10.0);
        for x in [-1.0, 0.3, 1.5] {
            let got = hat_scale_density(&spec, x).unwrap();
            assert!((got / exp(-2.0 * x) - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn remark_identity_with_nonzero_anchor() {
        let spec = DiffusionSpec::new(
            FnDiffusion::new(|x| 0.2 - 0.5 * x, |_| -0.5, |x| 1.0 + 0.3 * libm::sin(x), |x| 0.3 * libm::cos(x)),
            1.0,
        )
        .with_anchor(0.4);
        let s0 = spec.sigma(0.4);
        for x in [-2.0, -0.1, 0.0, 1.3, 3.0] {
            let s = spec.sigma(x);
            let ratio = hat_scale_density(&spec, x).unwrap() * s * s / (scale_density(&spec, x).unwrap() * s0 * s0);
            assert!((ratio - 1.0).abs() < 1e-10, "{x}: {ratio}");
        }
    }

    #[test]
    fn speed_density_examples() {
        let bm = DiffusionSpec::new(DriftedBrownian { mu: 0.0, sigma: sqrt(2.0) }, 1.0);
        assert!((speed_density(&bm, 1.7).unwrap() - 1.0).abs() < 1e-15);
        assert!((speed_density(&ou_baseline(), 0.0).unwrap() - 2.5).abs() < 1e-12);
    }

    #[test]
    fn generator_examples() {
        let spec = ou_baseline();
        assert_eq!(generator_x(&spec, 4.0, 0.0, 0.0, 0.3).unwrap(), 0.0);
        assert_eq!(generator_hat_x(&spec, 4.0, 0.0, 0.0, 0.3).unwrap(), 0.0);
        assert!((generator_x(&spec, 0.0, 1.0, 0.0, 0.7).unwrap() - spec.mu(0.7)).abs() < 1e-15);
        let v = generator_x(&spec, 1.0, 2.0, 2.0, 1.0).unwrap();
        assert!((v + 1.0).abs() < 1e-12);
        assert!(generator_x(&spec, f64::NAN, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn validation_flags() {
        let grid = Grid::uniform(-3.0, 3.0, 60).unwrap();
        let ok = validate_assumptions(&ou_baseline(), 0.05, &grid);
        assert!(ok.passed());
        assert!((ok.min_r_minus_mu_prime - 1.05).abs() < 1e-12);

        let gbm = DiffusionSpec::new(FnDiffusion::new(|x| 0.1 * x, |_| 0.1, |_| 1.0, |_| 0.0), 1.0);
        let bad = validate_assumptions(&gbm, 0.05, &grid);
        assert!(!bad.discount_ok);
        assert!((bad.min_r_minus_mu_prime + 0.05).abs() < 1e-12);

        let degenerate = DiffusionSpec::new(FnDiffusion::new(|_| 0.0, |_| 0.0, |x| x, |_| 1.0), 1.0);
        let r = validate_assumptions(&degenerate, 0.05, &grid);
        assert!(!r.sigma_ok && !r.passed());
    }

    #[test]
    fn finite_difference_is_flagged() {
        let spec = DiffusionSpec::new(FnDiffusion::finite_difference(|x| 0.1 - x, |_| 0.9), 2.0);
        assert!((spec.mu_prime(0.4) + 1.0).abs() < 1e-8);
        let grid = Grid::uniform(-1.0, 1.0, 10).unwrap();
        assert!(validate_assumptions(&spec, 0.05, &grid).finite_difference_derivatives);
    }

    #[test]
    fn grids_contain_zero_once() {
        let g = Grid::uniform(-6.17, 6.17, 4000).unwrap();
        assert_eq!(g.points()[g.zero_index()], 0.0);
        assert_eq!(g.points().iter().filter(|&&p| p == 0.0).count(), 1);
        assert_eq!(g.len(), 4001);
        let geo = Grid::geometric(-2.0, 5.0, 100, 20).unwrap();
        assert_eq!(geo.hi(), 5.0);
        assert_eq!(geo.lo(), -2.0);
        assert!(Grid::from_points(alloc::vec![-1.0, 1.0]).is_err());
        assert!(Grid::from_points(alloc::vec![-1.0, 0.0, 0.0, 1.0]).is_err());
        assert_eq!(g.cell(0.0), g.zero_index());
        assert_eq!(g.cell(100.0), g.len() - 2);
    }

    #[test]
    fn default_grid_for_baseline() {
        let g = Grid::default_for(&ou_baseline(), 0.05, 4000).unwrap();
        let want = 10.0 * sqrt(0.8) / sqrt(2.1);
        assert!((g.hi() - want).abs() < 1e-12);
    }
}
