//! Reward data `(η, κ, r)`, the case quantity `G = (L_X̂ − (r − μ′))η`, the
//! A/B/C classifier and the running-reward transform.

use alloc::boxed::Box;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use crate::basis::FundamentalBasis;
use crate::diffusion::{central_difference, DiffusionSpec, Grid};
use crate::math::quad::gauss_legendre5;
use crate::math::{exp, root};
use crate::{Error, Result};

/// Marginal reward per unit of control, with two derivatives.
pub trait MarginalReward: Send + Sync {
    fn eta(&self, x: f64) -> f64;
    fn eta_prime(&self, x: f64) -> f64;
    fn eta_second(&self, x: f64) -> f64;

    /// `∫_a^b η`. The default uses Gauss–Legendre panels.
    fn integral(&self, a: f64, b: f64) -> f64 {
        panel_integral(|x| self.eta(x), a, b)
    }

    fn analytic_derivatives(&self) -> bool {
        true
    }
}

pub(crate) fn panel_integral<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let n = (libm::ceil((b - a).abs() / 0.05) as usize).clamp(1, 20_000);
    let h = (b - a) / n as f64;
    (0..n).map(|k| gauss_legendre5(&f, a + k as f64 * h, a + (k + 1) as f64 * h)).sum()
}

/// `η ≡ η₀`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantReward(pub f64);

impl MarginalReward for ConstantReward {
    fn eta(&self, _: f64) -> f64 {
        self.0
    }
    fn eta_prime(&self, _: f64) -> f64 {
        0.0
    }
    fn eta_second(&self, _: f64) -> f64 {
        0.0
    }
    fn integral(&self, a: f64, b: f64) -> f64 {
        self.0 * (b - a)
    }
}

/// `η(x) = intercept + slope·x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearReward {
    pub intercept: f64,
    pub slope: f64,
}

impl MarginalReward for LinearReward {
    fn eta(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }
    fn eta_prime(&self, _: f64) -> f64 {
        self.slope
    }
    fn eta_second(&self, _: f64) -> f64 {
        0.0
    }
    fn integral(&self, a: f64, b: f64) -> f64 {
        self.intercept * (b - a) + 0.5 * self.slope * (b * b - a * a)
    }
}

/// `η(x) = scale·e^{−λx}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpDecayReward {
    pub scale: f64,
    pub lambda: f64,
}

impl MarginalReward for ExpDecayReward {
    fn eta(&self, x: f64) -> f64 {
        self.scale * exp(-self.lambda * x)
    }
    fn eta_prime(&self, x: f64) -> f64 {
        -self.lambda * self.eta(x)
    }
    fn eta_second(&self, x: f64) -> f64 {
        self.lambda * self.lambda * self.eta(x)
    }
    fn integral(&self, a: f64, b: f64) -> f64 {
        if self.lambda == 0.0 {
            return self.scale * (b - a);
        }
        self.scale * (exp(-self.lambda * a) - exp(-self.lambda * b)) / self.lambda
    }
}

type Func = Box<dyn Fn(f64) -> f64 + Send + Sync>;

/// Marginal reward built from closures.
pub struct FnReward {
    eta: Func,
    eta_prime: Option<Func>,
    eta_second: Option<Func>,
}

impl FnReward {
    pub fn new<A, B, C>(eta: A, eta_prime: B, eta_second: C) -> Self
    where
        A: Fn(f64) -> f64 + Send + Sync + 'static,
        B: Fn(f64) -> f64 + Send + Sync + 'static,
        C: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        FnReward {
            eta: Box::new(eta),
            eta_prime: Some(Box::new(eta_prime)),
            eta_second: Some(Box::new(eta_second)),
        }
    }

    /// Derivatives by central differences.
    pub fn finite_difference<A>(eta: A) -> Self
    where
        A: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        FnReward {
            eta: Box::new(eta),
            eta_prime: None,
            eta_second: None,
        }
    }
}

impl MarginalReward for FnReward {
    fn eta(&self, x: f64) -> f64 {
        (self.eta)(x)
    }
    fn eta_prime(&self, x: f64) -> f64 {
        match &self.eta_prime {
            Some(f) => f(x),
            None => central_difference(&*self.eta, x),
        }
    }
    fn eta_second(&self, x: f64) -> f64 {
        match &self.eta_second {
            Some(f) => f(x),
            None => {
                let h = 1e-4_f64.max(1e-4 * x.abs());
                ((self.eta)(x + h) - 2.0 * (self.eta)(x) + (self.eta)(x - h)) / (h * h)
            }
        }
    }
    fn analytic_derivatives(&self) -> bool {
        self.eta_prime.is_some() && self.eta_second.is_some()
    }
}

/// `η`, the reflection cost `κ` and the discount rate `r`.
#[derive(Clone)]
pub struct RewardSpec {
    pub eta: Arc<dyn MarginalReward>,
    pub kappa: f64,
    pub r: f64,
}

impl fmt::Debug for RewardSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RewardSpec")
            .field("eta(0)", &self.eta.eta(0.0))
            .field("kappa", &self.kappa)
            .field("r", &self.r)
            .finish()
    }
}

impl RewardSpec {
    /// Rejects `κ < η(0)` (the value can be infinite there) and `r ≤ 0`.
    pub fn new<M: MarginalReward + 'static>(eta: M, kappa: f64, r: f64) -> Result<Self> {
        Self::from_arc(Arc::new(eta), kappa, r)
    }

    pub fn from_arc(eta: Arc<dyn MarginalReward>, kappa: f64, r: f64) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::input("discount rate r must be positive and finite"));
        }
        if !kappa.is_finite() {
            return Err(Error::input("kappa must be finite"));
        }
        let eta0 = eta.eta(0.0);
        if !eta0.is_finite() {
            return Err(Error::input("eta(0) must be finite"));
        }
        if kappa < eta0 {
            return Err(Error::model(alloc::format!(
                "kappa = {kappa} is below eta(0) = {eta0}; the value function may be infinite"
            )));
        }
        Ok(RewardSpec { eta, kappa, r })
    }

    /// Same reward with a different reflection cost.
    pub fn with_kappa(&self, kappa: f64) -> Result<Self> {
        Self::from_arc(self.eta.clone(), kappa, self.r)
    }

    #[inline]
    pub fn eta0(&self) -> f64 {
        self.eta.eta(0.0)
    }
}

/// `G(x) = ½σ²η″ + (μ + σσ′)η′ − (r − μ′)η`.
pub fn case_quantity(spec: &DiffusionSpec, reward: &RewardSpec, x: f64) -> Result<f64> {
    let s = spec.sigma(x);
    let e = &reward.eta;
    let g = 0.5 * s * s * e.eta_second(x) + spec.hat_mu(x) * e.eta_prime(x)
        - (reward.r - spec.mu_prime(x)) * e.eta(x);
    if g.is_finite() {
        Ok(g)
    } else {
        Err(Error::numerical("case quantity (non-finite)", 0.0, g))
    }
}

/// Grid samples that break the A/B/C trichotomy.
#[derive(Debug, Clone, PartialEq)]
pub struct IndeterminateReport {
    pub sign_changes: usize,
    pub tolerance: f64,
    /// `(x, G(x))` pairs around each sign change (or non-finite samples).
    pub samples: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CaseLabel {
    A,
    B { x_bar: f64 },
    C,
    Indeterminate(IndeterminateReport),
}

impl CaseLabel {
    pub fn name(&self) -> &'static str {
        match self {
            CaseLabel::A => "A",
            CaseLabel::B { .. } => "B",
            CaseLabel::C => "C",
            CaseLabel::Indeterminate(_) => "Indeterminate",
        }
    }
}

/// Classify the problem from the sign pattern of `G` on the nonnegative part
/// of the grid. The sign tolerance is `1e-9·(1 + max|G|)`.
pub fn classify(spec: &DiffusionSpec, reward: &RewardSpec, grid: &Grid) -> CaseLabel {
    let xs = grid.nonnegative();
    let mut gs = Vec::with_capacity(xs.len());
    let mut bad = Vec::new();
    for &x in xs {
        match case_quantity(spec, reward, x) {
            Ok(g) => gs.push(g),
            Err(_) => {
                bad.push((x, f64::NAN));
                gs.push(f64::NAN);
            }
        }
    }
    let gmax = gs.iter().filter(|g| g.is_finite()).fold(0.0_f64, |m, g| m.max(g.abs()));
    let tol = 1e-9 * (1.0 + gmax);
    if !bad.is_empty() {
        return CaseLabel::Indeterminate(IndeterminateReport {
            sign_changes: 0,
            tolerance: tol,
            samples: bad,
        });
    }
    if gs.iter().all(|&g| g < -tol) {
        return CaseLabel::A;
    }
    if gs.iter().all(|&g| g >= -tol) {
        // at least one sample is >= -tol and not all are < -tol, so max G >= -tol;
        // the trichotomy asks for max G >= 0 up to the tolerance
        return CaseLabel::C;
    }
    // strict signs, ignoring samples inside the tolerance band
    let signed: Vec<(usize, i8)> = gs
        .iter()
        .enumerate()
        .filter_map(|(i, &g)| {
            if g > tol {
                Some((i, 1))
            } else if g < -tol {
                Some((i, -1))
            } else {
                None
            }
        })
        .collect();
    let changes: Vec<usize> = signed.windows(2).filter(|w| w[0].1 != w[1].1).map(|w| w[0].0).collect();
    let one_down = changes.len() == 1 && signed[0].1 == 1;
    if one_down {
        let i = changes[0];
        let j = signed.iter().find(|s| s.0 > i).unwrap().0;
        let (a, b) = (xs[i], xs[j]);
        let x_bar = root::bisect(
            |x| case_quantity(spec, reward, x).unwrap_or(f64::NAN),
            a,
            b,
            1e-13 * (1.0 + b.abs()),
        );
        return CaseLabel::B { x_bar };
    }
    let mut samples = Vec::new();
    for w in signed.windows(2).filter(|w| w[0].1 != w[1].1) {
        samples.push((xs[w[0].0], gs[w[0].0]));
        samples.push((xs[w[1].0], gs[w[1].0]));
    }
    CaseLabel::Indeterminate(IndeterminateReport {
        sign_changes: changes.len(),
        tolerance: tol,
        samples,
    })
}

/// Running reward `π` with its derivative, used by [`from_running_reward`].
pub trait RunningReward: Send + Sync {
    fn pi(&self, x: f64) -> f64;
    fn pi_prime(&self, x: f64) -> f64;
}

impl<F: Fn(f64) -> f64 + Send + Sync, G: Fn(f64) -> f64 + Send + Sync> RunningReward for (F, G) {
    fn pi(&self, x: f64) -> f64 {
        (self.0)(x)
    }
    fn pi_prime(&self, x: f64) -> f64 {
        (self.1)(x)
    }
}

/// `η = Π′ − α` where `Π` is the resolvent solution of `(L_X − r)Π = π`.
struct GreenReward {
    basis: FundamentalBasis,
    pi: Arc<dyn RunningReward>,
    alpha: f64,
    /// `∫_{x_lo}^{x_i} ψπ/(σ²S′)` at grid nodes.
    left: Vec<f64>,
    /// `∫_{x_i}^{x_hi} φπ/(σ²S′)` at grid nodes.
    right: Vec<f64>,
}

impl GreenReward {
    fn weight(&self, y: f64) -> (f64, f64) {
        let p = self.basis.eval(y);
        let s = self.basis.spec().sigma(y);
        let q = self.pi.pi(y.max(0.0)) / (s * s * p.scale_density);
        (p.psi * q, p.phi * q)
    }

    fn integrals(&self, x: f64) -> (f64, f64) {
        let pts = self.basis.grid().points();
        let i = self.basis.grid().cell(x);
        let (a, b) = (pts[i], pts[i + 1]);
        let l = self.left[i] + gauss_legendre5(|y| self.weight(y).0, a, x);
        let r = self.right[i + 1] + gauss_legendre5(|y| self.weight(y).1, x, b);
        (l, r)
    }

    /// `(Π, Π′)`.
    fn pi_big(&self, x: f64) -> (f64, f64) {
        let (l, r) = self.integrals(x);
        let p = self.basis.eval(x);
        let c = -2.0 / self.basis.wronskian();
        (c * (p.phi * l + p.psi * r), c * (p.phi_p * l + p.psi_p * r))
    }

    fn derivatives(&self, x: f64) -> (f64, f64, f64) {
        let spec = self.basis.spec();
        let r = self.basis.r();
        let (big, d1) = self.pi_big(x);
        let s = spec.sigma(x);
        let s2 = s * s;
        let pi = self.pi.pi(x.max(0.0));
        let d2 = 2.0 * (pi + r * big - spec.mu(x) * d1) / s2;
        let d3 = 2.0 * (self.pi.pi_prime(x) + (r - spec.mu_prime(x)) * d1 - spec.hat_mu(x) * d2) / s2;
        (d1, d2, d3)
    }
}

impl MarginalReward for GreenReward {
    fn eta(&self, x: f64) -> f64 {
        self.pi_big(x).1 - self.alpha
    }
    fn eta_prime(&self, x: f64) -> f64 {
        self.derivatives(x).1
    }
    fn eta_second(&self, x: f64) -> f64 {
        self.derivatives(x).2
    }
    fn integral(&self, a: f64, b: f64) -> f64 {
        self.pi_big(b).0 - self.pi_big(a).0 - self.alpha * (b - a)
    }
}

/// Turn a running reward `π` and a proportional cost `α > 0` into marginal
/// reward data: `η = Π′ − α`, `κ = Π′(0)`, with `(L_X − r)Π = π` solved by the
/// Green function of the basis. Below 0, `π` is extended by `π(0)` so that
/// constants map to constants.
pub fn from_running_reward(basis: &FundamentalBasis, pi: Arc<dyn RunningReward>, alpha: f64) -> Result<RewardSpec> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::input("alpha must be positive"));
    }
    let pts = basis.grid().points();
    let n = pts.len();
    let mut green = GreenReward {
        basis: basis.clone(),
        pi,
        alpha,
        left: alloc::vec![0.0; n],
        right: alloc::vec![0.0; n],
    };
    for i in 0..n - 1 {
        let cell = gauss_legendre5(|y| green.weight(y).0, pts[i], pts[i + 1]);
        green.left[i + 1] = green.left[i] + cell;
    }
    for i in (0..n - 1).rev() {
        let cell = gauss_legendre5(|y| green.weight(y).1, pts[i], pts[i + 1]);
        green.right[i] = green.right[i + 1] + cell;
    }
    if green.left.iter().chain(green.right.iter()).any(|v| !v.is_finite()) {
        return Err(Error::numerical("running-reward Green integrals (non-finite)", 0.0, f64::NAN));
    }
    let kappa = green.pi_big(0.0).1;
    let eta0 = kappa - alpha;
    debug_assert!(kappa - eta0 > 0.0);
    RewardSpec::from_arc(Arc::new(green), kappa, basis.r())
}

/// Finite-domain proxies for the integrability part of the reward assumptions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardProxies {
    /// `|η(x_hi)|/ψ̂(x_hi)`, expected to be small.
    pub eta_over_hat_psi_at_hi: f64,
    /// `∫_0^{x_hi} m̂′|G|`, expected to be finite.
    pub speed_weighted_case_quantity: f64,
}

pub fn reward_proxies(basis: &FundamentalBasis, reward: &RewardSpec) -> RewardProxies {
    let hi = basis.grid().hi();
    let top = basis.eval(hi);
    let spec = basis.spec();
    let pts = basis.grid().nonnegative();
    let mut total = 0.0;
    for w in pts.windows(2) {
        total += gauss_legendre5(
            |y| {
                let p = basis.eval(y);
                case_quantity(spec, reward, y).map(|g| p.hat_speed * g.abs()).unwrap_or(f64::NAN)
            },
            w[0],
            w[1],
        );
    }
    RewardProxies {
        eta_over_hat_psi_at_hi: reward.eta.eta(hi).abs() / top.hat_psi,
        speed_weighted_case_quantity: total,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::{DriftedBrownian, OrnsteinUhlenbeck};
    use crate::math::sqrt;

    fn bm(mu: f64, sigma: f64) -> DiffusionSpec {
        DiffusionSpec::new(DriftedBrownian { mu, sigma }, 1.0)
    }

    #[test]
    fn rejects_kappa_below_eta0() {
        assert!(matches!(RewardSpec::new(ConstantReward(1.0), 0.5, 0.05), Err(Error::Model(_))));
        assert!(RewardSpec::new(ConstantReward(1.0), 1.0, 0.05).is_ok());
        assert!(RewardSpec::new(ConstantReward(1.0), 1.0, 0.0).is_err());
    }

    #[test]
    fn constant_reward_quantity() {
        let spec = DiffusionSpec::new(OrnsteinUhlenbeck { mu: 0.1, theta: 1.0, sigma: sqrt(0.8) }, 1.0);
        let rw = RewardSpec::new(ConstantReward(0.5), 1.0, 0.05).unwrap();
        for x in [0.0, 0.4, 2.0] {
            assert!((case_quantity(&spec, &rw, x).unwrap() + 1.05 * 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn linear_reward_quantity() {
        let spec = bm(1.0, 1.0);
        let rw = RewardSpec::new(LinearReward { intercept: 0.0, slope: 1.0 }, 0.5, 0.5).unwrap();
        for x in [0.0, 1.0, 3.5] {
            assert!((case_quantity(&spec, &rw, x).unwrap() - (1.0 - 0.5 * x)).abs() < 1e-15);
        }
    }

    #[test]
    fn exp_decay_quantity_sign() {
        let (mu, sigma, lambda, r) = (0.3, 0.7, 2.0, 0.1);
        let spec = bm(mu, sigma);
        let rw = RewardSpec::new(ExpDecayReward { scale: 1.0, lambda }, 1.0, r).unwrap();
        let k = 0.5 * sigma * sigma * lambda * lambda - lambda * mu - r;
        for x in [0.0, 0.5, 1.5] {
            let g = case_quantity(&spec, &rw, x).unwrap();
            assert!((g - k * exp(-lambda * x)).abs() < 1e-14);
        }
    }

    #[test]
    fn classify_examples() {
        let grid = Grid::uniform(-6.0, 6.0, 1200).unwrap();
        let ou = DiffusionSpec::new(OrnsteinUhlenbeck { mu: 0.1, theta: 1.0, sigma: sqrt(0.8) }, 1.0);
        let a = RewardSpec::new(ConstantReward(0.5), 1.0, 0.05).unwrap();
        assert_eq!(classify(&ou, &a, &grid), CaseLabel::A);

        let grid = Grid::uniform(-10.0, 10.0, 1000).unwrap();
        let b = RewardSpec::new(LinearReward { intercept: 0.0, slope: 1.0 }, 0.5, 0.5).unwrap();
        match classify(&bm(1.0, 1.0), &b, &grid) {
            CaseLabel::B { x_bar } => assert!((x_bar - 2.0).abs() < 1e-10),
            other => panic!("{other:?}"),
        }

        let c = RewardSpec::new(ExpDecayReward { scale: 1.0, lambda: 2.0 }, 1.0, 1.0).unwrap();
        assert_eq!(classify(&bm(0.0, sqrt(2.0)), &c, &grid), CaseLabel::C);
    }

    #[test]
    fn two_sign_changes_are_indeterminate() {
        let grid = Grid::uniform(-5.0, 5.0, 500).unwrap();
        // G = η″/2 − η for σ=1, μ=0, r=1 with η = cos-like bump changes sign twice
        let eta = FnReward::new(
            |x| libm::cos(2.0 * x) + 1.5,
            |x| -2.0 * libm::sin(2.0 * x),
            |x| -4.0 * libm::cos(2.0 * x),
        );
        let rw = RewardSpec::new(eta, 3.0, 1.0).unwrap();
        match classify(&bm(0.0, 1.0), &rw, &grid) {
            CaseLabel::Indeterminate(rep) => assert!(rep.sign_changes >= 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn classification_is_scale_invariant() {
        let grid = Grid::uniform(-10.0, 10.0, 1000).unwrap();
        let spec = bm(1.0, 1.0);
        for c in [0.01, 1.0, 250.0] {
            let rw = RewardSpec::new(LinearReward { intercept: 0.0, slope: c }, 0.0, 0.5).unwrap();
            match classify(&spec, &rw, &grid) {
                CaseLabel::B { x_bar } => assert!((x_bar - 2.0).abs() < 1e-9),
                other => panic!("{other:?}"),
            }
        }
    }
}
