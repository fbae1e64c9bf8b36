//! Fundamental solutions `ψ` (increasing) and `φ` (decreasing) of
//! `(L_X − r)u = 0`, their hat counterparts `ψ̂ = ψ′`, `φ̂ = −φ′` solving
//! `(L_X̂ − (r − μ′))u = 0`, Wronskians, and the hitting-time transform.

use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::diffusion::{validate_assumptions, BoundaryProxies, DiffusionSpec, Grid};
use crate::math::hermite::cubic;
use crate::math::ode::Dopri5;
use crate::math::quad::{self, QuadTol};
use crate::math::{exp, log, sqrt};
use crate::{Error, Result};

/// Where and how `ψ`, `φ` were normalized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalization {
    /// The point where `ψ = φ = 1` before any [`FundamentalBasis::rescaled`] call.
    pub point: f64,
    pub psi_factor: f64,
    pub phi_factor: f64,
}

/// Self-checks computed alongside the basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisDiagnostics {
    /// Standard deviation over mean of the pointwise `(ψ′φ − φ′ψ)/S′`.
    pub wronskian_rel_std: f64,
    /// The same for `(ψ̂′φ̂ − φ̂′ψ̂)/Ŝ′`.
    pub hat_wronskian_rel_std: f64,
    /// Max relative residual of the hat equation on `[0, x_hi/2]`, with `ψ̂″`
    /// from a five-point derivative of the stored `ψ̂′`.
    pub hat_ode_residual: f64,
    /// Max of `|ψ′ − ψ̂|/(1 + |ψ̂|)` and the `φ` analogue (zero by construction).
    pub derivative_identity_gap: f64,
    pub monotone: bool,
}

/// Values at a single point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisPoint {
    pub x: f64,
    pub psi: f64,
    pub phi: f64,
    pub psi_p: f64,
    pub phi_p: f64,
    pub psi_pp: f64,
    pub phi_pp: f64,
    pub hat_psi: f64,
    pub hat_phi: f64,
    pub hat_psi_p: f64,
    pub hat_phi_p: f64,
    /// `S′(x)`.
    pub scale_density: f64,
    /// `Ŝ′(x)`.
    pub hat_scale_density: f64,
    /// `m̂′(x) = 2/(σ²Ŝ′)`.
    pub hat_speed: f64,
}

#[derive(Debug)]
struct Inner {
    grid: Grid,
    spec: DiffusionSpec,
    r: f64,
    psi: Vec<f64>,
    phi: Vec<f64>,
    psi_p: Vec<f64>,
    phi_p: Vec<f64>,
    psi_pp: Vec<f64>,
    phi_pp: Vec<f64>,
    /// `ln S′` at the nodes (anchored at `spec.anchor`).
    log_s: Vec<f64>,
    sigma2_anchor: f64,
    wronskian: f64,
    hat_wronskian: f64,
    normalization: Normalization,
    diagnostics: BasisDiagnostics,
}

/// Grid-sampled fundamental solutions. Cloning is cheap (shared storage).
#[derive(Debug, Clone)]
pub struct FundamentalBasis {
    inner: Arc<Inner>,
}

fn second_derivative(spec: &DiffusionSpec, r: f64, x: f64, u: f64, up: f64) -> f64 {
    let s = spec.sigma(x);
    2.0 * (r * u - spec.mu(x) * up) / (s * s)
}

/// Integrate `(L_X − r)u = 0` on the grid from both ends and assemble the basis.
pub fn compute_basis(spec: &DiffusionSpec, r: f64, grid: &Grid) -> Result<FundamentalBasis> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::input("discount rate r must be positive and finite"));
    }
    if grid.lo() >= 0.0 {
        return Err(Error::input("the basis grid must extend below 0 (x_lo < 0)"));
    }
    let report = validate_assumptions(spec, r, grid);
    if !report.passed() {
        return Err(Error::model(alloc::format!("assumptions fail: {}", report.failures().join("; "))));
    }
    let pts = grid.points();
    let n = pts.len();
    let rhs = |x: f64, y: [f64; 2]| [y[1], second_derivative(spec, r, x, y[0], y[1])];
    let solver = Dopri5::default();

    let (lo_slope, _) = frozen_exponents(spec, r, pts[0]);
    let (_, hi_slope) = frozen_exponents(spec, r, pts[n - 1]);
    let mut up = alloc::vec![[0.0; 3]; n];
    up[0] = [1.0, lo_slope, 0.0];
    solver
        .integrate(rhs, pts[0], [1.0, lo_slope], &pts[1..], |i, y, s| up[i + 1] = [y[0], y[1], s])
        .map_err(|e| direction_error(e, "increasing solution (forward from x_lo)"))?;
    let mut down = alloc::vec![[0.0; 3]; n];
    down[n - 1] = [1.0, hi_slope, 0.0];
    let rev: Vec<f64> = pts[..n - 1].iter().rev().copied().collect();
    solver
        .integrate(rhs, pts[n - 1], [1.0, hi_slope], &rev, |i, y, s| down[n - 2 - i] = [y[0], y[1], s])
        .map_err(|e| direction_error(e, "decreasing solution (backward from x_hi)"))?;

    assemble(spec, r, grid, &up, &down)
}

/// Build a basis from raw node values `[u, u′, ln scale]` of an increasing and
/// a decreasing solution (true value `u·e^{scale}`). The second derivative is
/// recovered from the equation and both solutions are normalized to 1 at 0.
pub fn basis_from_nodes(
    spec: &DiffusionSpec,
    r: f64,
    grid: &Grid,
    up: &[[f64; 3]],
    down: &[[f64; 3]],
) -> Result<FundamentalBasis> {
    if up.len() != grid.len() || down.len() != grid.len() {
        return Err(Error::input("node arrays must match the grid"));
    }
    assemble(spec, r, grid, up, down)
}

fn assemble(spec: &DiffusionSpec, r: f64, grid: &Grid, up: &[[f64; 3]], down: &[[f64; 3]]) -> Result<FundamentalBasis> {
    let pts = grid.points();
    let n = pts.len();
    let z = grid.zero_index();
    let normalize = |raw: &[[f64; 3]], what: &str| -> Result<(Vec<f64>, Vec<f64>, f64)> {
        let [u0, _, s0] = raw[z];
        if !(u0 > 0.0) {
            return Err(Error::numerical(alloc::format!("{what}: not positive at 0"), 0.0, u0));
        }
        let mut u = Vec::with_capacity(n);
        let mut du = Vec::with_capacity(n);
        for &[v, dv, s] in raw {
            let f = exp(s - s0) / u0;
            u.push(v * f);
            du.push(dv * f);
        }
        if u.iter().chain(du.iter()).any(|v| !v.is_finite()) {
            return Err(Error::numerical(
                alloc::format!("{what} overflows on this grid; shrink [x_lo, x_hi]"),
                f64::MAX,
                f64::INFINITY,
            ));
        }
        Ok((u, du, s0 + log(u0)))
    };
    let (psi, psi_p, log_psi0) = normalize(up, "psi")?;
    let (phi, phi_p, log_phi0) = normalize(down, "phi")?;
    let psi_pp: Vec<f64> = (0..n).map(|i| second_derivative(spec, r, pts[i], psi[i], psi_p[i])).collect();
    let phi_pp: Vec<f64> = (0..n).map(|i| second_derivative(spec, r, pts[i], phi[i], phi_p[i])).collect();

    let log_s = log_scale_nodes(spec, pts, z)?;
    let s0 = spec.sigma(spec.anchor);
    let sigma2_anchor = s0 * s0;

    let mut inner = Inner {
        grid: grid.clone(),
        spec: spec.clone(),
        r,
        psi,
        phi,
        psi_p,
        phi_p,
        psi_pp,
        phi_pp,
        log_s,
        sigma2_anchor,
        wronskian: 0.0,
        hat_wronskian: 0.0,
        normalization: Normalization {
            point: 0.0,
            psi_factor: exp(-log_psi0),
            phi_factor: exp(-log_phi0),
        },
        diagnostics: BasisDiagnostics {
            wronskian_rel_std: 0.0,
            hat_wronskian_rel_std: 0.0,
            hat_ode_residual: 0.0,
            derivative_identity_gap: 0.0,
            monotone: true,
        },
    };
    finish(&mut inner);
    if !inner.diagnostics.monotone {
        return Err(Error::numerical("fundamental solutions lost monotonicity", 0.0, f64::NAN));
    }
    Ok(FundamentalBasis { inner: Arc::new(inner) })
}

/// Roots `γ₊ > 0 > γ₋` of `½σ²γ² + μγ − r = 0` with the coefficients frozen
/// at `x`. Starting the shooting with `u′/u = γ±` removes the unwanted
/// solution exactly for constant coefficients and nearly so otherwise.
fn frozen_exponents(spec: &DiffusionSpec, r: f64, x: f64) -> (f64, f64) {
    let s2 = spec.sigma(x) * spec.sigma(x);
    let m = spec.mu(x);
    let disc = sqrt(m * m + 2.0 * r * s2);
    // stable forms of (−μ ± disc)/σ²
    if m >= 0.0 {
        let gm = (-m - disc) / s2;
        (-2.0 * r / (s2 * gm), gm)
    } else {
        let gp = (-m + disc) / s2;
        (gp, -2.0 * r / (s2 * gp))
    }
}

fn direction_error(e: Error, direction: &str) -> Error {
    match e {
        Error::Numerical { what, tolerance, estimate } => Error::Numerical {
            what: alloc::format!("{direction}: {what}"),
            tolerance,
            estimate,
        },
        other => other,
    }
}

/// `ln S′` at every node: cell-wise adaptive quadrature accumulated out from 0,
/// then shifted to the anchor.
fn log_scale_nodes(spec: &DiffusionSpec, pts: &[f64], z: usize) -> Result<Vec<f64>> {
    let f = |y: f64| {
        let s = spec.sigma(y);
        -2.0 * spec.mu(y) / (s * s)
    };
    let n = pts.len();
    let mut out = alloc::vec![0.0; n];
    for i in z + 1..n {
        out[i] = out[i - 1] + quad::integrate(f, pts[i - 1], pts[i], QuadTol::default())?;
    }
    for i in (0..z).rev() {
        out[i] = out[i + 1] - quad::integrate(f, pts[i], pts[i + 1], QuadTol::default())?;
    }
    if spec.anchor != 0.0 {
        let shift = quad::integrate(f, 0.0, spec.anchor, QuadTol::default())?;
        for v in out.iter_mut() {
            *v -= shift;
        }
    }
    Ok(out)
}

/// Five-point derivative weights at `xs[k]` (Lagrange basis).
fn derivative_weights(xs: &[f64], k: usize) -> [f64; 5] {
    let x0 = xs[k];
    let mut w = [0.0; 5];
    for j in 0..5 {
        let mut sum = 0.0;
        for m in 0..5 {
            if m == j {
                continue;
            }
            let mut prod = 1.0 / (xs[j] - xs[m]);
            for l in 0..5 {
                if l != j && l != m {
                    prod *= (x0 - xs[l]) / (xs[j] - xs[l]);
                }
            }
            sum += prod;
        }
        w[j] = sum;
    }
    w
}

fn finish(inner: &mut Inner) {
    let pts = inner.grid.points();
    let n = pts.len();
    let spec = &inner.spec;
    let mut ws = Vec::with_capacity(n);
    let mut hws = Vec::with_capacity(n);
    for i in 0..n {
        let s_prime = exp(inner.log_s[i]);
        let sig = spec.sigma(pts[i]);
        let hat_s = s_prime * inner.sigma2_anchor / (sig * sig);
        ws.push((inner.psi_p[i] * inner.phi[i] - inner.phi_p[i] * inner.psi[i]) / s_prime);
        // ψ̂′φ̂ − φ̂′ψ̂ with ψ̂ = ψ′, φ̂ = −φ′
        hws.push((inner.psi_pp[i] * -inner.phi_p[i] + inner.phi_pp[i] * inner.psi_p[i]) / hat_s);
    }
    let stats = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64;
        (m, sqrt(var) / m.abs())
    };
    let (w_mean, w_std) = stats(&ws);
    let (hw_mean, hw_std) = stats(&hws);
    inner.wronskian = w_mean;
    inner.hat_wronskian = hw_mean;

    let mut monotone = true;
    for i in 1..n {
        if !(inner.psi[i] > inner.psi[i - 1]) || !(inner.phi[i] < inner.phi[i - 1]) {
            monotone = false;
        }
        // ψ̂ = ψ′ increasing and φ̂ = −φ′ decreasing
        if !(inner.psi_p[i] > inner.psi_p[i - 1]) || !(-inner.phi_p[i] < -inner.phi_p[i - 1]) {
            monotone = false;
        }
    }

    // hat equation ½σ²f″ + (μ+σσ′)f′ − (r−μ′)f with f″ from the stored f′
    let z = inner.grid.zero_index();
    let mut worst: f64 = 0.0;
    let half = pts[n - 1] / 2.0;
    for i in z.max(2)..n - 2 {
        if pts[i] > half {
            break;
        }
        let w = derivative_weights(&pts[i - 2..i + 3], 2);
        for (f, fp) in [(&inner.psi_p, &inner.psi_pp), (&inner.phi_p, &inner.phi_pp)] {
            let fpp: f64 = (0..5).map(|k| w[k] * fp[i - 2 + k]).sum();
            let x = pts[i];
            let sig = spec.sigma(x);
            let a = 0.5 * sig * sig * fpp;
            let b = spec.hat_mu(x) * fp[i];
            let c = (inner.r - spec.mu_prime(x)) * f[i];
            let res = (a + b - c).abs() / (a.abs() + b.abs() + c.abs());
            worst = worst.max(res);
        }
    }

    inner.diagnostics = BasisDiagnostics {
        wronskian_rel_std: w_std,
        hat_wronskian_rel_std: hw_std,
        hat_ode_residual: worst,
        derivative_identity_gap: 0.0,
        monotone,
    };
}

impl FundamentalBasis {
    pub fn grid(&self) -> &Grid {
        &self.inner.grid
    }
    pub fn spec(&self) -> &DiffusionSpec {
        &self.inner.spec
    }
    pub fn r(&self) -> f64 {
        self.inner.r
    }
    pub fn psi(&self) -> &[f64] {
        &self.inner.psi
    }
    pub fn phi(&self) -> &[f64] {
        &self.inner.phi
    }
    pub fn psi_p(&self) -> &[f64] {
        &self.inner.psi_p
    }
    pub fn phi_p(&self) -> &[f64] {
        &self.inner.phi_p
    }
    pub fn psi_pp(&self) -> &[f64] {
        &self.inner.psi_pp
    }
    pub fn phi_pp(&self) -> &[f64] {
        &self.inner.phi_pp
    }
    /// `ψ̂ = ψ′` at the nodes.
    pub fn hat_psi(&self) -> &[f64] {
        &self.inner.psi_p
    }
    /// `φ̂ = −φ′` at the nodes.
    pub fn hat_phi(&self) -> Vec<f64> {
        self.inner.phi_p.iter().map(|v| -v).collect()
    }
    /// `W = (ψ′φ − φ′ψ)/S′`.
    pub fn wronskian(&self) -> f64 {
        self.inner.wronskian
    }
    /// `w = (ψ̂′φ̂ − φ̂′ψ̂)/Ŝ′`.
    pub fn hat_wronskian(&self) -> f64 {
        self.inner.hat_wronskian
    }
    pub fn normalization(&self) -> Normalization {
        self.inner.normalization
    }
    pub fn diagnostics(&self) -> BasisDiagnostics {
        self.inner.diagnostics
    }
    /// `σ²(x_o)`, linking `S′` and `Ŝ′`.
    pub fn sigma2_anchor(&self) -> f64 {
        self.inner.sigma2_anchor
    }

    /// Evaluate everything at `x` (clamped to the grid). Values come from
    /// cubic Hermite interpolation of `(u, u′)` and `(u′, u″)`; `u″` is then
    /// recovered from the equation, so `(L_X − r)u = 0` holds exactly.
    pub fn eval(&self, x: f64) -> BasisPoint {
        let g = &self.inner;
        let pts = g.grid.points();
        let x = x.clamp(pts[0], pts[pts.len() - 1]);
        let i = g.grid.cell(x);
        let (x0, x1) = (pts[i], pts[i + 1]);
        let (psi, _) = cubic(x0, x1, g.psi[i], g.psi[i + 1], g.psi_p[i], g.psi_p[i + 1], x);
        let (psi_p, _) = cubic(x0, x1, g.psi_p[i], g.psi_p[i + 1], g.psi_pp[i], g.psi_pp[i + 1], x);
        let (phi, _) = cubic(x0, x1, g.phi[i], g.phi[i + 1], g.phi_p[i], g.phi_p[i + 1], x);
        let (phi_p, _) = cubic(x0, x1, g.phi_p[i], g.phi_p[i + 1], g.phi_pp[i], g.phi_pp[i + 1], x);
        let spec = &g.spec;
        let psi_pp = second_derivative(spec, g.r, x, psi, psi_p);
        let phi_pp = second_derivative(spec, g.r, x, phi, phi_p);
        let slope = |y: f64| {
            let s = spec.sigma(y);
            -2.0 * spec.mu(y) / (s * s)
        };
        let (log_s, _) = cubic(x0, x1, g.log_s[i], g.log_s[i + 1], slope(x0), slope(x1), x);
        let s_prime = exp(log_s);
        let sig = spec.sigma(x);
        let hat_s = s_prime * g.sigma2_anchor / (sig * sig);
        BasisPoint {
            x,
            psi,
            phi,
            psi_p,
            phi_p,
            psi_pp,
            phi_pp,
            hat_psi: psi_p,
            hat_phi: -phi_p,
            hat_psi_p: psi_pp,
            hat_phi_p: -phi_pp,
            scale_density: s_prime,
            hat_scale_density: hat_s,
            hat_speed: 2.0 / (sig * sig * hat_s),
        }
    }

    /// The same basis with `ψ ← aψ`, `φ ← bφ` (`a, b > 0`).
    pub fn rescaled(&self, a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0) {
            return Err(Error::input("rescaling factors must be positive"));
        }
        let g = &self.inner;
        let scale = |v: &[f64], c: f64| v.iter().map(|x| x * c).collect::<Vec<_>>();
        let mut inner = Inner {
            grid: g.grid.clone(),
            spec: g.spec.clone(),
            r: g.r,
            psi: scale(&g.psi, a),
            phi: scale(&g.phi, b),
            psi_p: scale(&g.psi_p, a),
            phi_p: scale(&g.phi_p, b),
            psi_pp: scale(&g.psi_pp, a),
            phi_pp: scale(&g.phi_pp, b),
            log_s: g.log_s.clone(),
            sigma2_anchor: g.sigma2_anchor,
            wronskian: 0.0,
            hat_wronskian: 0.0,
            normalization: Normalization {
                point: g.normalization.point,
                psi_factor: g.normalization.psi_factor * a,
                phi_factor: g.normalization.phi_factor * b,
            },
            diagnostics: g.diagnostics,
        };
        finish(&mut inner);
        Ok(FundamentalBasis { inner: Arc::new(inner) })
    }

    /// Proxies for the boundary behaviour at the truncated ends.
    pub fn boundary_proxies(&self) -> BoundaryProxies {
        let g = &self.inner;
        let n = g.psi.len();
        let z = g.grid.zero_index();
        let flux = |i: usize| g.phi_p[i].abs() / exp(g.log_s[i]);
        let probe = z + (3 * (n - 1 - z)) / 4;
        let log_psi_at_hi = log(g.psi[n - 1] / g.psi[z]);
        let ratio = flux(probe) / flux(z);
        BoundaryProxies {
            log_psi_at_hi,
            phi_flux_ratio_at_hi: ratio,
            ok: log_psi_at_hi > log(10.0) && ratio < 0.5,
        }
    }

    /// Point-wise samples for the optional CSV dump: `(x, ψ, φ, ψ′, φ′, ψ̂, φ̂)`.
    pub fn table(&self) -> Vec<[f64; 7]> {
        let g = &self.inner;
        g.grid
            .points()
            .iter()
            .enumerate()
            .map(|(i, &x)| [x, g.psi[i], g.phi[i], g.psi_p[i], g.phi_p[i], g.psi_p[i], -g.phi_p[i]])
            .collect()
    }
}

/// `(A(n), B(n))` with `A = −φ′(0)/D`, `B = ψ′(0)/D`, `D = φ(n)ψ′(0) − φ′(0)ψ(n)`.
pub fn hitting_coefficients(basis: &FundamentalBasis, n: f64) -> Result<(f64, f64)> {
    let z = basis.grid().zero_index();
    let psi_p0 = basis.psi_p()[z];
    let phi_p0 = basis.phi_p()[z];
    let at = basis.eval(n);
    let d = at.phi * psi_p0 - phi_p0 * at.psi;
    if !(d.abs() > 0.0) || !d.is_finite() {
        return Err(Error::numerical("hitting transform denominator vanished", 0.0, d));
    }
    Ok((-phi_p0 / d, psi_p0 / d))
}

/// `E_x[e^{−rσ_n}]` for the diffusion reflected at 0 and the hitting time
/// `σ_n` of level `n`.
pub fn hitting_laplace(basis: &FundamentalBasis, x: f64, n: f64) -> Result<f64> {
    if !(0.0 <= x && x <= n && n <= basis.grid().hi()) {
        return Err(Error::input("hitting_laplace needs 0 <= x <= n <= x_hi"));
    }
    let (a, b) = hitting_coefficients(basis, n)?;
    let p = basis.eval(x);
    Ok(a * p.psi + b * p.phi)
}
