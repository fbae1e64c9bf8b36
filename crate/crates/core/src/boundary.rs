//! The free-boundary equation `Φ(b) = 0`, the value function in each regime,
//! and numerical verification of the HJB variational inequality.

use alloc::vec::Vec;

use crate::basis::{BasisPoint, FundamentalBasis};
use crate::diffusion::Grid;
use crate::math::quad::gauss_legendre5;
use crate::math::root;
use crate::reward::{case_quantity, CaseLabel, RewardSpec};
use crate::{Error, Result};

/// `Φ(b) = η(0) − κ + (1/w)φ̂(0)ψ̂(0)∫_0^b m̂′ h G`, `h = φ̂/φ̂(0) − ψ̂/ψ̂(0)`,
/// with the integral tabulated once over the nonnegative grid.
#[derive(Debug, Clone)]
pub struct BoundaryObjective {
    basis: FundamentalBasis,
    reward: RewardSpec,
    /// Cumulative integral at the nonnegative nodes.
    cumulative: Vec<f64>,
    hat_psi0: f64,
    hat_phi0: f64,
    w: f64,
}

impl BoundaryObjective {
    pub fn new(basis: &FundamentalBasis, reward: &RewardSpec) -> Result<Self> {
        let z = basis.grid().zero_index();
        let hat_psi0 = basis.psi_p()[z];
        let hat_phi0 = -basis.phi_p()[z];
        let mut obj = BoundaryObjective {
            basis: basis.clone(),
            reward: reward.clone(),
            cumulative: Vec::new(),
            hat_psi0,
            hat_phi0,
            w: basis.hat_wronskian(),
        };
        let pts = basis.grid().nonnegative();
        let mut acc = 0.0;
        obj.cumulative.push(0.0);
        for c in pts.windows(2) {
            acc += gauss_legendre5(|y| obj.integrand(y), c[0], c[1]);
            obj.cumulative.push(acc);
        }
        if !acc.is_finite() {
            return Err(Error::numerical("boundary integral (non-finite)", 0.0, acc));
        }
        Ok(obj)
    }

    fn integrand(&self, y: f64) -> f64 {
        let p = self.basis.eval(y);
        let h = p.hat_phi / self.hat_phi0 - p.hat_psi / self.hat_psi0;
        let g = case_quantity(self.basis.spec(), &self.reward, y).unwrap_or(f64::NAN);
        p.hat_speed * h * g
    }

    /// `∫_0^b m̂′ h G`.
    pub fn integral(&self, b: f64) -> f64 {
        let pts = self.basis.grid().nonnegative();
        let b = b.clamp(0.0, pts[pts.len() - 1]);
        let i = match pts.binary_search_by(|p| p.partial_cmp(&b).unwrap()) {
            Ok(i) => return self.cumulative[i],
            Err(i) => i - 1,
        };
        self.cumulative[i] + gauss_legendre5(|y| self.integrand(y), pts[i], b)
    }

    /// `Φ(b)`.
    pub fn value(&self, b: f64) -> f64 {
        self.reward.eta0() - self.reward.kappa + self.hat_phi0 * self.hat_psi0 * self.integral(b) / self.w
    }

    /// `Φ` through the direct form `(1/w)[ψ̂(0)I_φ̂(b) − φ̂(0)I_ψ̂(b)] − κ`,
    /// with no quadrature involved.
    pub fn direct(&self, b: f64) -> f64 {
        let (i_phi, i_psi) = flux_integrals(&self.basis.eval(b), &self.reward, b);
        (self.hat_psi0 * i_phi - self.hat_phi0 * i_psi) / self.w - self.reward.kappa
    }

    pub fn x_hi(&self) -> f64 {
        self.basis.grid().hi()
    }
}

/// `(I_φ̂(x), I_ψ̂(x))` with `I_f = (fη′ − f′η)/Ŝ′`.
fn flux_integrals(p: &BasisPoint, reward: &RewardSpec, x: f64) -> (f64, f64) {
    let (e, ep) = (reward.eta.eta(x), reward.eta.eta_prime(x));
    let i_phi = (p.hat_phi * ep - p.hat_phi_p * e) / p.hat_scale_density;
    let i_psi = (p.hat_psi * ep - p.hat_psi_p * e) / p.hat_scale_density;
    (i_phi, i_psi)
}

/// Evaluate `Φ(b)` (tabulates the integral on each call; build a
/// [`BoundaryObjective`] for repeated use).
pub fn boundary_objective(basis: &FundamentalBasis, reward: &RewardSpec, b: f64) -> Result<f64> {
    if !(b >= 0.0 && b <= basis.grid().hi()) {
        return Err(Error::input("b must lie in [0, x_hi]"));
    }
    Ok(BoundaryObjective::new(basis, reward)?.value(b))
}

fn kappa_equals_eta0(reward: &RewardSpec) -> bool {
    (reward.kappa - reward.eta0()).abs() <= 1e-14 * (1.0 + reward.kappa.abs())
}

/// Root of `Φ` for Cases A and B.
pub fn solve_boundary(basis: &FundamentalBasis, reward: &RewardSpec, case: &CaseLabel) -> Result<f64> {
    let obj = BoundaryObjective::new(basis, reward)?;
    solve_with(&obj, reward, case)
}

fn solve_with(obj: &BoundaryObjective, reward: &RewardSpec, case: &CaseLabel) -> Result<f64> {
    let lo = match case {
        CaseLabel::A => {
            if kappa_equals_eta0(reward) {
                return Err(Error::model(
                    "Case A with kappa = eta(0) has no interior boundary; the value squeezes at 0",
                ));
            }
            0.0
        }
        CaseLabel::B { x_bar } => {
            let at = obj.value(*x_bar);
            if !(at < 0.0) {
                return Err(Error::numerical(
                    alloc::format!("Phi(x_bar) should be negative in Case B (x_bar = {x_bar})"),
                    0.0,
                    at,
                ));
            }
            *x_bar
        }
        CaseLabel::C => return Err(Error::model("Case C has no free boundary: no control is optimal")),
        CaseLabel::Indeterminate(_) => {
            return Err(Error::model("the case classification is indeterminate; no solution formula applies"))
        }
    };
    let x_hi = obj.x_hi();
    let mut hi = if lo >= 1.0 { 2.0 * lo } else { 1.0 };
    loop {
        if hi >= x_hi {
            hi = x_hi;
            if obj.value(hi) > 0.0 {
                break;
            }
            return Err(Error::DomainTooSmall { x_hi, last_probe: hi });
        }
        if obj.value(hi) > 0.0 {
            break;
        }
        hi *= 2.0;
    }
    let root = root::brent(|b| Ok(obj.value(b)), lo, hi, 1e-12, 200)?;
    let ftol = 1e-10 * (reward.kappa.abs() + 1.0);
    if !(root.f.abs() < ftol) {
        return Err(Error::numerical("free-boundary residual", ftol, root.f.abs()));
    }
    Ok(root.x)
}

/// `(α, β) = (I_φ̂(b*)/w, I_ψ̂(b*)/w)`.
pub fn coefficients(basis: &FundamentalBasis, reward: &RewardSpec, b_star: f64) -> (f64, f64) {
    let (i_phi, i_psi) = flux_integrals(&basis.eval(b_star), reward, b_star);
    let w = basis.hat_wronskian();
    (i_phi / w, i_psi / w)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regime {
    /// Reflect at `b*`: `v = αψ + βφ` below, `v(b*) + ∫η` above.
    ReflectAtBand { b_star: f64, alpha: f64, beta: f64 },
    /// Case A with `κ = η(0)`: push the state to 0 immediately.
    SqueezeAtZero,
    /// Case C: never control.
    NoAction,
}

impl Regime {
    pub fn name(&self) -> &'static str {
        match self {
            Regime::ReflectAtBand { .. } => "ReflectAtBand",
            Regime::SqueezeAtZero => "SqueezeAtZero",
            Regime::NoAction => "NoAction",
        }
    }

    pub fn b_star(&self) -> Option<f64> {
        match *self {
            Regime::ReflectAtBand { b_star, .. } => Some(b_star),
            Regime::SqueezeAtZero => Some(0.0),
            Regime::NoAction => None,
        }
    }
}

/// `(v, v′, v″)` at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValuePoint {
    pub v: f64,
    pub dv: f64,
    pub d2v: f64,
}

#[derive(Debug, Clone)]
pub struct ControlSolution {
    pub case: CaseLabel,
    pub regime: Regime,
    /// `v(b*)`; `v(0)` when squeezing, `None` without a boundary.
    pub v_at_bstar: Option<f64>,
    basis: FundamentalBasis,
    reward: RewardSpec,
    squeeze_constant: f64,
}

impl ControlSolution {
    pub fn basis(&self) -> &FundamentalBasis {
        &self.basis
    }
    pub fn reward(&self) -> &RewardSpec {
        &self.reward
    }

    /// Evaluate the value function at `x ≥ 0`.
    pub fn value(&self, x: f64) -> Result<ValuePoint> {
        if !(x >= 0.0) || !x.is_finite() {
            return Err(Error::input("the value function is defined on x >= 0"));
        }
        let eta = &self.reward.eta;
        match self.regime {
            Regime::ReflectAtBand { b_star, alpha, beta } => {
                if x <= b_star {
                    let p = self.basis.eval(x);
                    Ok(ValuePoint {
                        v: alpha * p.psi + beta * p.phi,
                        dv: alpha * p.psi_p + beta * p.phi_p,
                        d2v: alpha * p.psi_pp + beta * p.phi_pp,
                    })
                } else {
                    Ok(ValuePoint {
                        v: self.v_at_bstar.unwrap_or(f64::NAN) + eta.integral(b_star, x),
                        dv: eta.eta(x),
                        d2v: eta.eta_prime(x),
                    })
                }
            }
            Regime::SqueezeAtZero => Ok(ValuePoint {
                v: eta.integral(0.0, x) + self.squeeze_constant,
                dv: eta.eta(x),
                d2v: eta.eta_prime(x),
            }),
            Regime::NoAction => {
                if x > self.basis.grid().hi() {
                    return Err(Error::input("x lies beyond the basis grid"));
                }
                let z = self.basis.grid().zero_index();
                let c = self.reward.kappa / self.basis.phi_p()[z];
                let p = self.basis.eval(x);
                Ok(ValuePoint {
                    v: c * p.phi,
                    dv: c * p.phi_p,
                    d2v: c * p.phi_pp,
                })
            }
        }
    }
}

/// Assemble the value function for the classified problem.
pub fn build_value(basis: &FundamentalBasis, reward: &RewardSpec, case: &CaseLabel) -> Result<ControlSolution> {
    let spec = basis.spec();
    let regime = match case {
        CaseLabel::Indeterminate(_) => {
            return Err(Error::model(
                "G = (L_hatX - (r - mu'))eta changes sign in a way not covered by Cases A/B/C",
            ))
        }
        CaseLabel::C => Regime::NoAction,
        CaseLabel::A if kappa_equals_eta0(reward) => Regime::SqueezeAtZero,
        CaseLabel::A | CaseLabel::B { .. } => {
            let b_star = solve_boundary(basis, reward, case)?;
            let (alpha, beta) = coefficients(basis, reward, b_star);
            Regime::ReflectAtBand { b_star, alpha, beta }
        }
    };
    let e = &reward.eta;
    let s0 = spec.sigma(0.0);
    let squeeze_constant = (0.5 * s0 * s0 * e.eta_prime(0.0) + spec.mu(0.0) * e.eta(0.0)) / reward.r;
    let v_at_bstar = match regime {
        Regime::ReflectAtBand { b_star, alpha, beta } => {
            let p = basis.eval(b_star);
            Some(alpha * p.psi + beta * p.phi)
        }
        Regime::SqueezeAtZero => Some(squeeze_constant),
        Regime::NoAction => None,
    };
    Ok(ControlSolution {
        case: case.clone(),
        regime,
        v_at_bstar,
        basis: basis.clone(),
        reward: reward.clone(),
        squeeze_constant,
    })
}

/// `b*_δ` for `κ = η(0) + δ`, for each `δ` in `deltas`.
pub fn epsilon_boundary_sequence(basis: &FundamentalBasis, reward: &RewardSpec, deltas: &[f64]) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::with_capacity(deltas.len());
    for &d in deltas {
        if !(d > 0.0) {
            return Err(Error::input("deltas must be positive"));
        }
        let perturbed = reward.with_kappa(reward.eta0() + d)?;
        out.push((d, solve_boundary(basis, &perturbed, &CaseLabel::A)?));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// `(L_X − r)v = 0`.
    Pde,
    /// `v′ = η`.
    Gradient,
    Both,
    Neither,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub branch: Branch,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HjbReport {
    pub grid: Grid,
    pub tolerance: f64,
    /// Max positive part of `(L_X − r)v`.
    pub max_pde_violation: f64,
    /// Max positive part of `η − v′`.
    pub max_gradient_violation: f64,
    pub equality_regions: Vec<Region>,
    /// `|v′(0) − κ|`.
    pub neumann_residual: f64,
    /// `|v′(b*) − η(b*)|/(1 + |η(b*)|)`.
    pub smooth_fit_value: Option<f64>,
    /// `|v″(b*) − η′(b*)|/(1 + |η′(b*)|)`.
    pub smooth_fit_slope: Option<f64>,
    /// Relative gap between `v(b*)` and `(½σ²η′ + μη)(b*)/r`.
    pub vb_residual: Option<f64>,
    /// Max of `v″` over `[0, b*]` (concavity diagnostic).
    pub max_second_derivative_on_band: Option<f64>,
    pub passed: bool,
}

/// Evaluate both branches of the HJB inequality on the nonnegative part of
/// `grid`. Passes iff both violations are below `1e-6·(1 + max|v|)`.
pub fn verify_hjb(solution: &ControlSolution, grid: &Grid) -> Result<HjbReport> {
    let spec = solution.basis.spec();
    let reward = &solution.reward;
    let r = reward.r;
    let mut xs: Vec<f64> = grid.nonnegative().to_vec();
    if let Some(b) = solution.regime.b_star() {
        if b > 0.0 && b < grid.hi() && !xs.contains(&b) {
            let at = xs.partition_point(|&x| x < b);
            xs.insert(at, b);
        }
    }
    let mut rows = Vec::with_capacity(xs.len());
    let mut vmax: f64 = 0.0;
    for &x in &xs {
        let vp = solution.value(x)?;
        let s = spec.sigma(x);
        let pde = 0.5 * s * s * vp.d2v + spec.mu(x) * vp.dv - r * vp.v;
        let grad = reward.eta.eta(x) - vp.dv;
        vmax = vmax.max(vp.v.abs());
        rows.push((x, pde, grad, vp));
    }
    let tol = 1e-6 * (1.0 + vmax);
    let mut max_pde: f64 = 0.0;
    let mut max_grad: f64 = 0.0;
    let mut regions: Vec<Region> = Vec::new();
    for &(x, pde, grad, _) in &rows {
        if !(pde.is_finite() && grad.is_finite()) {
            return Err(Error::numerical("HJB evaluation (non-finite)", tol, f64::NAN));
        }
        max_pde = max_pde.max(pde);
        max_grad = max_grad.max(grad);
        let branch = match (pde.abs() < tol, grad.abs() < tol) {
            (true, true) => Branch::Both,
            (true, false) => Branch::Pde,
            (false, true) => Branch::Gradient,
            (false, false) => Branch::Neither,
        };
        match regions.last_mut() {
            Some(last) if last.branch == branch => last.hi = x,
            _ => regions.push(Region { branch, lo: x, hi: x }),
        }
    }
    let v0 = solution.value(0.0)?;
    let neumann = (v0.dv - reward.kappa).abs();
    let (mut sf_v, mut sf_s, mut vb, mut concav) = (None, None, None, None);
    if let Regime::ReflectAtBand { b_star, .. } = solution.regime {
        let p = solution.value(b_star)?;
        let (e, ep) = (reward.eta.eta(b_star), reward.eta.eta_prime(b_star));
        sf_v = Some((p.dv - e).abs() / (1.0 + e.abs()));
        sf_s = Some((p.d2v - ep).abs() / (1.0 + ep.abs()));
        let s = spec.sigma(b_star);
        let target = (0.5 * s * s * ep + spec.mu(b_star) * e) / r;
        let vb_at = solution.v_at_bstar.unwrap_or(f64::NAN);
        vb = Some(if target != 0.0 { (vb_at - target).abs() / target.abs() } else { vb_at.abs() });
        concav = Some(
            rows.iter()
                .filter(|row| row.0 <= b_star)
                .fold(f64::NEG_INFINITY, |m, row| m.max(row.3.d2v)),
        );
    }
    Ok(HjbReport {
        grid: grid.clone(),
        tolerance: tol,
        max_pde_violation: max_pde,
        max_gradient_violation: max_grad,
        equality_regions: regions,
        neumann_residual: neumann,
        smooth_fit_value: sf_v,
        smooth_fit_slope: sf_s,
        vb_residual: vb,
        max_second_derivative_on_band: concav,
        passed: max_pde < tol && max_grad < tol,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransformedScaleReport {
    pub y_o: f64,
    pub y_star: f64,
    /// `ϑ(y_o)`, equal to `κ`.
    pub theta_at_yo: f64,
    /// `η̃(y_*)`, equal to `ϑ(y_*)`.
    pub eta_tilde_at_ystar: f64,
    /// `|ϑ′(y_*) − η̃′(y_*)|/(1 + |ϑ′(y_*)|)`.
    pub tangency_residual: f64,
    /// `min (ϑ − η̃)` over the sampled `[y_o, y_*]`.
    pub min_dominance: f64,
    /// Sampled points where `sign η̃″(F̂(x)) = sign G(x)`, out of `samples`.
    pub sign_matches: usize,
    pub samples: usize,
    pub passed: bool,
}

/// Quantities in the transformed scale `y = F̂(x) = ψ̂(x)/φ̂(x)`, with `ψ̂`, `φ̂`
/// normalized to 1 at 0 so that `y_o = 1` and `ϑ(y_o) = κ`.
pub struct TransformedScale<'a> {
    basis: &'a FundamentalBasis,
    reward: &'a RewardSpec,
    psi0: f64,
    phi0: f64,
}

/// `(y, η̃, η̃′, η̃″)` at a state `x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformedPoint {
    pub y: f64,
    pub eta: f64,
    pub eta_p: f64,
    pub eta_pp: f64,
}

impl<'a> TransformedScale<'a> {
    pub fn new(basis: &'a FundamentalBasis, reward: &'a RewardSpec) -> Self {
        let z = basis.grid().zero_index();
        TransformedScale {
            basis,
            reward,
            psi0: basis.psi_p()[z],
            phi0: -basis.phi_p()[z],
        }
    }

    pub fn at(&self, x: f64) -> TransformedPoint {
        let spec = self.basis.spec();
        let b = self.basis.eval(x);
        let s = spec.sigma(x);
        let disc = self.basis.r() - spec.mu_prime(x);
        let hat_second = |f: f64, fp: f64| 2.0 * (disc * f - spec.hat_mu(x) * fp) / (s * s);
        let (p, pp) = (b.hat_psi / self.psi0, b.hat_psi_p / self.psi0);
        let (q, qp) = (b.hat_phi / self.phi0, b.hat_phi_p / self.phi0);
        let (ppp, qpp) = (hat_second(p, pp), hat_second(q, qp));
        let e = &self.reward.eta;
        let (n0, n1, n2) = (e.eta(x), e.eta_prime(x), e.eta_second(x));
        let f_prime = (pp * q - p * qp) / (q * q);
        let num = n1 * q - n0 * qp;
        let den = pp * q - p * qp;
        let g = num / den;
        let g_prime = ((n2 * q - n0 * qpp) * den - num * (ppp * q - p * qpp)) / (den * den);
        TransformedPoint {
            y: p / q,
            eta: n0 / q,
            eta_p: g,
            eta_pp: g_prime / f_prime,
        }
    }
}

/// Check tangency of the line `ϑ` to `η̃` at `y_*`, dominance `ϑ ≥ η̃` on
/// `[y_o, y_*]`, and that `η̃″` has the sign of `G`.
pub fn transformed_scale_check(solution: &ControlSolution) -> Result<TransformedScaleReport> {
    let Regime::ReflectAtBand { b_star, .. } = solution.regime else {
        return Err(Error::input("the transformed-scale check needs a reflecting boundary"));
    };
    let basis = &solution.basis;
    let reward = &solution.reward;
    let ts = TransformedScale::new(basis, reward);
    let pts = basis.grid().nonnegative();
    let mut prev = f64::NEG_INFINITY;
    for &x in pts {
        let y = ts.at(x).y;
        if !(y > prev) {
            return Err(Error::numerical("transformed scale F is not increasing on the grid", 0.0, y - prev));
        }
        prev = y;
    }
    let o = ts.at(0.0);
    let st = ts.at(b_star);
    let kappa = reward.kappa;
    let slope = (st.eta - kappa) / (st.y - o.y);
    let line = |y: f64| kappa * (st.y - y) / (st.y - o.y) + st.eta * (y - o.y) / (st.y - o.y);
    let tangency = (slope - st.eta_p).abs() / (1.0 + slope.abs());
    let mut min_dom = f64::INFINITY;
    for &x in pts.iter().filter(|&&x| x <= b_star) {
        let t = ts.at(x);
        min_dom = min_dom.min(line(t.y) - t.eta);
    }
    let spec = basis.spec();
    let gs: Vec<(f64, f64)> = pts
        .iter()
        .filter(|&&x| x <= 2.0 * b_star)
        .map(|&x| (x, case_quantity(spec, reward, x).unwrap_or(f64::NAN)))
        .collect();
    let gmax = gs.iter().fold(0.0_f64, |m, g| m.max(g.1.abs()));
    let mut samples = 0;
    let mut matches = 0;
    for &(x, g) in &gs {
        if g.abs() <= 1e-6 * (1.0 + gmax) {
            continue;
        }
        samples += 1;
        if ts.at(x).eta_pp.signum() == g.signum() {
            matches += 1;
        }
    }
    let dom_tol = 1e-9 * (1.0 + kappa.abs());
    Ok(TransformedScaleReport {
        y_o: o.y,
        y_star: st.y,
        theta_at_yo: line(o.y),
        eta_tilde_at_ystar: st.eta,
        tangency_residual: tangency,
        min_dominance: min_dom,
        sign_matches: matches,
        samples,
        passed: tangency < 1e-6 && min_dom >= -dom_tol && matches == samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::compute_basis;
    use crate::diffusion::{DiffusionSpec, DriftedBrownian, OrnsteinUhlenbeck};
    use crate::math::sqrt;
    use crate::reward::{classify, ConstantReward};

    fn ou_baseline() -> (FundamentalBasis, RewardSpec) {
        let spec = DiffusionSpec::new(OrnsteinUhlenbeck { mu: 0.1, theta: 1.0, sigma: sqrt(0.8) }, 1.0);
        let grid = Grid::default_for(&spec, 0.05, 4000).unwrap();
        let basis = compute_basis(&spec, 0.05, &grid).unwrap();
        (basis, RewardSpec::new(ConstantReward(0.5), 1.0, 0.05).unwrap())
    }

    #[test]
    fn objective_at_zero_and_root() {
        let (basis, reward) = ou_baseline();
        let obj = BoundaryObjective::new(&basis, &reward).unwrap();
        assert_eq!(obj.value(0.0), -0.5);
        assert!(obj.value(0.91).abs() < 1e-2);
        let b = solve_boundary(&basis, &reward, &CaseLabel::A).unwrap();
        assert!((b - 0.91).abs() < 0.01, "{b}");
        for x in [0.2, 0.7, 1.5] {
            assert!((obj.value(x) - obj.direct(x)).abs() < 1e-9, "{x}");
        }
    }

    #[test]
    fn objective_increasing_in_case_a() {
        let (basis, reward) = ou_baseline();
        let obj = BoundaryObjective::new(&basis, &reward).unwrap();
        for b in [0.1, 0.5, 1.3, 2.2] {
            assert!(obj.value(b + 1e-4) > obj.value(b));
        }
    }

    #[test]
    fn case_c_value_nonpositive() {
        let spec = DiffusionSpec::new(DriftedBrownian { mu: 0.0, sigma: sqrt(2.0) }, 1.0);
        let grid = Grid::default_for(&spec, 1.0, 2000).unwrap();
        let basis = compute_basis(&spec, 1.0, &grid).unwrap();
        let reward = RewardSpec::new(crate::reward::ExpDecayReward { scale: 1.0, lambda: 2.0 }, 1.0, 1.0).unwrap();
        let case = classify(&spec, &reward, &grid);
        let sol = build_value(&basis, &reward, &case).unwrap();
        assert_eq!(sol.regime, Regime::NoAction);
        for x in [0.0, 1.0, 2.0, 5.0] {
            let v = sol.value(x).unwrap();
            assert!((v.v + libm::exp(-x)).abs() < 1e-8, "{x}");
        }
        assert!(sol.value(grid.hi()).unwrap().v.abs() < 1e-3);
    }

    #[test]
    fn squeeze_regime_when_kappa_equals_eta0() {
        let (basis, _) = ou_baseline();
        let reward = RewardSpec::new(ConstantReward(0.5), 0.5, 0.05).unwrap();
        let sol = build_value(&basis, &reward, &CaseLabel::A).unwrap();
        assert_eq!(sol.regime, Regime::SqueezeAtZero);
        let v = sol.value(0.3).unwrap();
        assert!((v.v - (0.15 + 0.5 * 0.1 / 0.05)).abs() < 1e-12);
        assert!(solve_boundary(&basis, &reward, &CaseLabel::A).is_err());
    }
}
