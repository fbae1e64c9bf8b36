//! The mean-reverting dividend problem: `dX = (μ − θX)dt + σdB`, constant
//! marginal reward `η₀`, with fundamental solutions written through parabolic
//! cylinder functions.

use alloc::string::String;
use alloc::vec::Vec;

use crate::basis::{basis_from_nodes, compute_basis, FundamentalBasis};
use crate::boundary::{build_value, ControlSolution, Regime};
use crate::diffusion::{DiffusionSpec, Grid, OrnsteinUhlenbeck};
use crate::math::quad::{self, QuadTol};
use crate::math::{exp, log, root, sqrt};
use crate::reward::{CaseLabel, ConstantReward, RewardSpec};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OUParams {
    pub mu: f64,
    pub theta: f64,
    pub sigma: f64,
    pub r: f64,
    pub kappa: f64,
    pub eta0: f64,
}

impl OUParams {
    pub fn new(mu: f64, theta: f64, sigma: f64, r: f64, kappa: f64, eta0: f64) -> Result<Self> {
        let p = OUParams { mu, theta, sigma, r, kappa, eta0 };
        p.validate()?;
        Ok(p)
    }

    /// `μ = 0.1`, `σ²/2 = 0.4`, `θ = 1`, `r = 0.05`, `κ = 1`, `η₀ = 0.5`.
    pub fn baseline() -> Self {
        OUParams {
            mu: 0.1,
            theta: 1.0,
            sigma: sqrt(0.8),
            r: 0.05,
            kappa: 1.0,
            eta0: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.mu, self.theta, self.sigma, self.r, self.kappa, self.eta0];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("OU parameters must be finite"));
        }
        if !(self.theta > 0.0) {
            return Err(Error::input("theta must be positive"));
        }
        if !(self.sigma > 0.0) {
            return Err(Error::input("sigma must be positive"));
        }
        if !(self.r > 0.0) {
            return Err(Error::input("r must be positive"));
        }
        if !(self.eta0 > 0.0) {
            return Err(Error::input("eta0 must be positive"));
        }
        if !(self.kappa > self.eta0) {
            return Err(Error::model("the OU problem needs kappa > eta0"));
        }
        Ok(())
    }

    pub fn spec(&self) -> DiffusionSpec {
        let lip = self.theta.max(1.0);
        DiffusionSpec::new(
            OrnsteinUhlenbeck {
                mu: self.mu,
                theta: self.theta,
                sigma: self.sigma,
            },
            lip,
        )
    }

    pub fn reward(&self) -> Result<RewardSpec> {
        RewardSpec::new(ConstantReward(self.eta0), self.kappa, self.r)
    }

    /// Cylinder order `−(r + θ)/θ`.
    pub fn order(&self) -> f64 {
        -(self.r + self.theta) / self.theta
    }

    fn c(&self) -> f64 {
        sqrt(2.0 * self.theta) / self.sigma
    }

    fn s(&self, x: f64) -> f64 {
        (x - self.mu / self.theta) * self.c()
    }

    pub fn default_grid(&self, cells: usize) -> Result<Grid> {
        Grid::default_for(&self.spec(), self.r, cells)
    }
}

/// `ln ∫_0^∞ t^p e^{−t²/2 − st} dt` for `p > −1`, integrated in `u = ln t`
/// around the peak of the integrand.
pub fn log_weber_integral(p: f64, s: f64) -> Result<f64> {
    if !(p > -1.0) || !p.is_finite() || !s.is_finite() {
        return Err(Error::input("need p > -1 and finite s"));
    }
    let q = p + 1.0;
    let root = sqrt(s * s + 4.0 * q);
    let t_star = if s > 0.0 { 2.0 * q / (s + root) } else { 0.5 * (root - s) };
    let u_star = log(t_star);
    let g = |u: f64| {
        let t = exp(u);
        q * u - 0.5 * t * t - s * t
    };
    let g_star = g(u_star);
    let drop = 60.0;
    let mut step = 0.25;
    let mut lo = u_star - step;
    while g(lo) - g_star > -drop {
        step *= 1.5;
        lo -= step;
    }
    let mut step = 0.25;
    let mut hi = u_star + step;
    while g(hi) - g_star > -drop {
        step *= 1.5;
        hi += step;
    }
    let tol = QuadTol {
        abs: 1e-15,
        rel: 1e-13,
        max_intervals: 4000,
    };
    // the mass sits within a few units of u*; split there to help the rule
    let f = |u: f64| exp(g(u) - g_star);
    let left = quad::integrate(f, lo, u_star, tol)?;
    let right = quad::integrate(f, u_star, hi, tol)?;
    Ok(g_star + log(left + right))
}

/// Parabolic cylinder function `D_α(x)` for `α < 0`:
/// `e^{−x²/4}/Γ(−α) ∫_0^∞ t^{−α−1} e^{−t²/2 − xt} dt`.
pub fn cylinder_d(alpha: f64, x: f64) -> Result<f64> {
    if !(alpha < 0.0) {
        return Err(Error::input("cylinder_d needs a negative order"));
    }
    let k = log_weber_integral(-alpha - 1.0, x)?;
    Ok(exp(-0.25 * x * x + k - libm::lgamma(-alpha)))
}

/// Closed-form `ψ̂`, `φ̂` and two derivatives at a point, with the common
/// factor `1/Γ(−α)` dropped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuHatPoint {
    pub hat_psi: f64,
    pub hat_psi_p: f64,
    pub hat_psi_pp: f64,
    pub hat_phi: f64,
    pub hat_phi_p: f64,
    pub hat_phi_pp: f64,
}

/// `φ̂(x) ∝ e^{s²/4}D_α(s)` and `ψ̂(x) ∝ e^{s²/4}D_α(−s)` with
/// `s = (x − μ/θ)√(2θ)/σ`; the Gaussian factors cancel, leaving the integral.
pub fn ou_hat_point(p: &OUParams, x: f64) -> Result<OuHatPoint> {
    let a = -p.order() - 1.0;
    let s = p.s(x);
    let c = p.c();
    let k = |order: f64, arg: f64| log_weber_integral(order, arg).map(exp);
    Ok(OuHatPoint {
        hat_phi: k(a, s)?,
        hat_phi_p: -c * k(a + 1.0, s)?,
        hat_phi_pp: c * c * k(a + 2.0, s)?,
        hat_psi: k(a, -s)?,
        hat_psi_p: c * k(a + 1.0, -s)?,
        hat_psi_pp: c * c * k(a + 2.0, -s)?,
    })
}

/// Max over `xs` of the relative residual of
/// `½σ²f″ + (μ − θx)f′ − (r + θ)f` for `f ∈ {ψ̂, φ̂}`.
pub fn ou_hat_ode_residual(p: &OUParams, xs: &[f64]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &x in xs {
        let h = ou_hat_point(p, x)?;
        for (f, fp, fpp) in [(h.hat_psi, h.hat_psi_p, h.hat_psi_pp), (h.hat_phi, h.hat_phi_p, h.hat_phi_pp)] {
            let a = 0.5 * p.sigma * p.sigma * fpp;
            let b = (p.mu - p.theta * x) * fp;
            let c = (p.r + p.theta) * f;
            worst = worst.max((a + b - c).abs() / (a.abs() + b.abs() + c.abs()));
        }
    }
    Ok(worst)
}

/// Basis built from the cylinder-function formulas. `ψ`, `φ` come from
/// `ψ = (½σ²ψ̂′ + μψ̂)/r` and `φ = −(½σ²φ̂′ + μφ̂)/r`.
pub fn ou_hat_basis(p: &OUParams, grid: &Grid) -> Result<FundamentalBasis> {
    p.validate()?;
    let half_s2 = 0.5 * p.sigma * p.sigma;
    let mut up = Vec::with_capacity(grid.len());
    let mut down = Vec::with_capacity(grid.len());
    for &x in grid.points() {
        let h = ou_hat_point(p, x)?;
        let m = p.mu - p.theta * x;
        up.push([(half_s2 * h.hat_psi_p + m * h.hat_psi) / p.r, h.hat_psi, 0.0]);
        down.push([-(half_s2 * h.hat_phi_p + m * h.hat_phi) / p.r, -h.hat_phi, 0.0]);
    }
    basis_from_nodes(&p.spec(), p.r, grid, &up, &down)
}

/// Free boundary from the constant-reward equation
/// `κ = η₀[1 − (r + θ)φ̂(0)ψ̂(0)/w ∫_0^b m̂′ h]`, entirely in closed form plus
/// quadrature.
pub fn solve_ou_boundary(p: &OUParams) -> Result<f64> {
    p.validate()?;
    let h0 = ou_hat_point(p, 0.0)?;
    // Ŝ′(0) = 1, so w is the plain Wronskian at 0
    let w = h0.hat_psi_p * h0.hat_phi - h0.hat_phi_p * h0.hat_psi;
    let s2 = p.sigma * p.sigma;
    let integrand = |y: f64| -> f64 {
        let hat_s = exp(-(2.0 / s2) * (p.mu * y - 0.5 * p.theta * y * y));
        let speed = 2.0 / (s2 * hat_s);
        match ou_hat_point(p, y) {
            Ok(h) => speed * (h.hat_phi / h0.hat_phi - h.hat_psi / h0.hat_psi),
            Err(_) => f64::NAN,
        }
    };
    let factor = (p.r + p.theta) * h0.hat_phi * h0.hat_psi / w;
    let tol = QuadTol {
        abs: 1e-13,
        rel: 1e-12,
        max_intervals: 2000,
    };
    let objective = |b: f64| -> Result<f64> {
        let integral = quad::integrate(integrand, 0.0, b, tol)?;
        Ok(p.eta0 * (1.0 - factor * integral) - p.kappa)
    };
    let mut hi = 1.0;
    let cap = 10.0 * p.sigma / sqrt(2.0 * (p.r + p.theta));
    while objective(hi)? <= 0.0 {
        hi *= 2.0;
        if hi > cap {
            return Err(Error::DomainTooSmall { x_hi: cap, last_probe: hi });
        }
    }
    let r = root::brent(objective, 0.0, hi, 1e-12, 200)?;
    Ok(r.x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParameter {
    Sigma,
    Theta,
    Kappa,
    Eta0,
}

impl SweepParameter {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "sigma" => Ok(SweepParameter::Sigma),
            "theta" => Ok(SweepParameter::Theta),
            "kappa" => Ok(SweepParameter::Kappa),
            "eta0" => Ok(SweepParameter::Eta0),
            other => Err(Error::input(alloc::format!(
                "unknown sweep parameter '{other}' (expected sigma, theta, kappa or eta0)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SweepParameter::Sigma => "sigma",
            SweepParameter::Theta => "theta",
            SweepParameter::Kappa => "kappa",
            SweepParameter::Eta0 => "eta0",
        }
    }

    pub fn apply(&self, p: &OUParams, value: f64) -> OUParams {
        let mut q = *p;
        match self {
            SweepParameter::Sigma => q.sigma = value,
            SweepParameter::Theta => q.theta = value,
            SweepParameter::Kappa => q.kappa = value,
            SweepParameter::Eta0 => q.eta0 = value,
        }
        q
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub b_star: Option<f64>,
    pub v_at_zero: Option<f64>,
    pub v_at_bstar: Option<f64>,
    /// `V` on the sweep's common `x` grid.
    pub v_grid: Vec<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub name: String,
    /// Asserted verdicts gate the sweep; the rest are descriptive.
    pub asserted: bool,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub parameter: SweepParameter,
    pub x_grid: Vec<f64>,
    pub rows: Vec<SweepRow>,
    pub verdicts: Vec<Verdict>,
}

impl SweepTable {
    pub fn all_rows_solved(&self) -> bool {
        self.rows.iter().all(|r| r.error.is_none())
    }

    pub fn asserted_hold(&self) -> bool {
        self.verdicts.iter().filter(|v| v.asserted).all(|v| v.holds)
    }
}

/// Generic-route solution of one OU configuration on the default grid.
pub fn ou_solution(p: &OUParams, cells: usize) -> Result<ControlSolution> {
    p.validate()?;
    let spec = p.spec();
    let grid = p.default_grid(cells)?;
    let basis = compute_basis(&spec, p.r, &grid)?;
    build_value(&basis, &p.reward()?, &CaseLabel::A)
}

/// Solve the problem for each value of one parameter and check the
/// comparative statics: `b*` nondecreasing in `σ` and `κ`, nonincreasing in
/// `η₀` (it reaches 0 at `η₀ = κ`); `V` pointwise nonincreasing in `σ` and
/// `θ`. The trend of `b*` in `θ` is descriptive.
pub fn sensitivity_sweep(p: &OUParams, parameter: SweepParameter, values: &[f64]) -> Result<SweepTable> {
    sensitivity_sweep_with(p, parameter, values, |q| ou_solution(q, 4000))
}

/// As [`sensitivity_sweep`] with a caller-supplied solver per configuration
/// (used to run rows in parallel).
pub fn sensitivity_sweep_with<F>(p: &OUParams, parameter: SweepParameter, values: &[f64], mut solve: F) -> Result<SweepTable>
where
    F: FnMut(&OUParams) -> Result<ControlSolution>,
{
    let solutions: Vec<Result<ControlSolution>> = values.iter().map(|&v| solve(&parameter.apply(p, v))).collect();
    sweep_table(parameter, values, solutions)
}

/// Assemble the table and verdicts from per-value solutions.
pub fn sweep_table(parameter: SweepParameter, values: &[f64], solutions: Vec<Result<ControlSolution>>) -> Result<SweepTable> {
    if values.is_empty() {
        return Err(Error::input("the sweep needs at least one value"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::input("sweep values must be finite"));
    }
    let x_grid: Vec<f64> = (0..=60).map(|k| k as f64 * 0.05).collect();
    let mut rows = Vec::with_capacity(values.len());
    for (&value, sol) in values.iter().zip(solutions) {
        let row = match sol.and_then(|s| {
            let v_grid = x_grid.iter().map(|&x| s.value(x).map(|v| v.v)).collect::<Result<Vec<_>>>()?;
            Ok((s.regime, s.v_at_bstar, s.value(0.0)?.v, v_grid))
        }) {
            Ok((regime, vb, v0, v_grid)) => SweepRow {
                value,
                b_star: match regime {
                    Regime::ReflectAtBand { b_star, .. } => Some(b_star),
                    _ => None,
                },
                v_at_zero: Some(v0),
                v_at_bstar: vb,
                v_grid,
                error: None,
            },
            Err(e) => SweepRow {
                value,
                b_star: None,
                v_at_zero: None,
                v_at_bstar: None,
                v_grid: Vec::new(),
                error: Some(alloc::format!("{e}")),
            },
        };
        rows.push(row);
    }

    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|&a, &b| rows[a].value.partial_cmp(&rows[b].value).unwrap());
    let solved: Vec<&SweepRow> = order.iter().map(|&i| &rows[i]).filter(|r| r.error.is_none()).collect();
    let bs: Vec<f64> = solved.iter().map(|r| r.b_star.unwrap_or(f64::NAN)).collect();
    let slack = |a: f64, b: f64| 1e-9 * (1.0 + a.abs().max(b.abs()));
    let b_up = bs.windows(2).all(|w| w[1] >= w[0] - slack(w[0], w[1]));
    let b_down = bs.windows(2).all(|w| w[1] <= w[0] + slack(w[0], w[1]));
    let v_down = solved.windows(2).all(|w| {
        w[0].v_grid
            .iter()
            .zip(&w[1].v_grid)
            .all(|(a, b)| *b <= *a + slack(*a, *b))
    });
    let verdict = |name: &str, asserted: bool, holds: bool| Verdict {
        name: String::from(name),
        asserted,
        holds,
    };
    let verdicts = match parameter {
        SweepParameter::Sigma => alloc::vec![
            verdict("b* nondecreasing in sigma", true, b_up),
            verdict("V nonincreasing in sigma", true, v_down),
        ],
        SweepParameter::Theta => alloc::vec![
            verdict("V nonincreasing in theta", true, v_down),
            verdict("b* decreasing in theta (observed trend)", false, b_down),
        ],
        SweepParameter::Kappa => alloc::vec![verdict("b* nondecreasing in kappa", true, b_up)],
        SweepParameter::Eta0 => alloc::vec![verdict("b* nonincreasing in eta0", true, b_down)],
    };
    Ok(SweepTable {
        parameter,
        x_grid,
        rows,
        verdicts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn d_minus_one_at_zero() {
        let v = cylinder_d(-1.0, 0.0).unwrap();
        assert!((v - sqrt(core::f64::consts::FRAC_PI_2)).abs() < 1e-13);
    }

    #[test]
    fn weber_equation_residual() {
        // D″ + (α + ½ − x²/4)D = 0
        for alpha in [-0.5, -1.05, -2.3] {
            for x in [-2.0, 0.0, 1.3, 3.0] {
                let h = 1e-3;
                let d = |y: f64| cylinder_d(alpha, y).unwrap();
                let second = (d(x + h) - 2.0 * d(x) + d(x - h)) / (h * h);
                let res = second + (alpha + 0.5 - x * x / 4.0) * d(x);
                assert!(res.abs() < 1e-6 * (1.0 + d(x).abs()), "{alpha} {x} {res}");
            }
        }
    }

    #[test]
    fn decays_for_large_argument() {
        let mut prev = cylinder_d(-1.05, 4.0).unwrap();
        for x in [5.0, 7.0, 10.0, 15.0] {
            let v = cylinder_d(-1.05, x).unwrap();
            assert!(v < prev && v > 0.0);
            prev = v;
        }
    }

    #[test]
    fn baseline_boundary() {
        let b = solve_ou_boundary(&OUParams::baseline()).unwrap();
        assert!((b - 0.91).abs() < 0.01, "{b}");
    }

    #[test]
    fn kappa_must_exceed_eta0() {
        assert!(OUParams::new(0.1, 1.0, 1.0, 0.05, 0.5, 0.5).is_err());
        assert!(SweepParameter::parse("mu").is_err());
    }
}
