mod common;

use common::*;
use follower_core::ou::{ou_hat_point, OUParams};
use follower_core::*;
use proptest::prelude::*;

fn roots(mu: f64, sigma: f64, r: f64) -> (f64, f64) {
    let s2 = sigma * sigma;
    let d = (mu * mu + 2.0 * r * s2).sqrt();
    ((-mu + d) / s2, (-mu - d) / s2)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn brownian_matches_exponentials(mu in -1.0f64..1.0, sigma in 0.4f64..2.0, r in 0.1f64..1.0) {
        let spec = DiffusionSpec::new(DriftedBrownian { mu, sigma }, 1.0);
        let grid = Grid::default_for(&spec, r, 3000).unwrap();
        let basis = compute_basis(&spec, r, &grid).unwrap();
        let (gp, gm) = roots(mu, sigma, r);
        let hi = grid.hi() * 0.5;
        for k in 0..=20 {
            let x = hi * k as f64 / 20.0;
            let p = basis.eval(x);
            prop_assert!(rel(p.psi, (gp * x).exp()) < 1e-8, "psi at {}", x);
            prop_assert!(rel(p.phi, (gm * x).exp()) < 1e-8, "phi at {}", x);
        }
    }
}

#[test]
fn wronskians_are_constant() {
    let t = ou_baseline();
    let d = t.basis.diagnostics();
    assert!(d.wronskian_rel_std < 1e-8, "{}", d.wronskian_rel_std);
    assert!(d.hat_wronskian_rel_std < 1e-8, "{}", d.hat_wronskian_rel_std);
    assert!(d.monotone);

    // state-dependent volatility
    let spec = DiffusionSpec::new(
        FnDiffusion::new(
            |x| 0.2 - 0.5 * x,
            |_| -0.5,
            |x| 1.0 + 0.3 * (x / 2.0).tanh(),
            |x| 0.15 / (x / 2.0).cosh().powi(2),
        ),
        1.0,
    );
    let grid = Grid::default_for(&spec, 0.1, 4000).unwrap();
    let basis = compute_basis(&spec, 0.1, &grid).unwrap();
    let d = basis.diagnostics();
    assert!(d.wronskian_rel_std < 1e-8, "{}", d.wronskian_rel_std);
    assert!(d.hat_wronskian_rel_std < 1e-8, "{}", d.hat_wronskian_rel_std);
}

#[test]
fn hat_equation_holds_for_derivatives() {
    let t = ou_baseline();
    let d = t.basis.diagnostics();
    assert!(d.hat_ode_residual < 1e-8, "{}", d.hat_ode_residual);
    assert_eq!(d.derivative_identity_gap, 0.0);
    // ψ̂ = ψ′ and φ̂ = −φ′ satisfy (L_X̂ − (r − μ′))u = 0
    let spec = &t.spec;
    for &x in &[0.0, 0.3, 0.9, 1.7, 2.5] {
        let p = t.basis.eval(x);
        for (u, up) in [(p.hat_psi, p.psi_pp), (p.hat_phi, -p.phi_pp)] {
            let h = 1e-4;
            let (a, b) = (t.basis.eval(x - h), t.basis.eval(x + h));
            let upp = if u == p.hat_psi {
                (b.psi_pp - a.psi_pp) / (2.0 * h)
            } else {
                -(b.phi_pp - a.phi_pp) / (2.0 * h)
            };
            let s = spec.sigma(x);
            let res = 0.5 * s * s * upp + spec.hat_mu(x) * up - (t.reward.r - spec.mu_prime(x)) * u;
            assert!(res.abs() < 1e-6 * (1.0 + u.abs()), "x = {x}: {res}");
        }
    }
}

#[test]
fn hat_solutions_match_cylinder_functions() {
    let t = ou_baseline();
    let p = OUParams::baseline();
    let z0 = ou_hat_point(&p, 0.0).unwrap();
    let b0 = t.basis.eval(0.0);
    for k in 0..=30 {
        let x = 0.1 * k as f64;
        let z = ou_hat_point(&p, x).unwrap();
        let b = t.basis.eval(x);
        assert!(rel(b.hat_psi / b0.hat_psi, z.hat_psi / z0.hat_psi) < 1e-6, "psi hat at {x}");
        assert!(rel(b.hat_phi / b0.hat_phi, z.hat_phi / z0.hat_phi) < 1e-6, "phi hat at {x}");
    }
}

#[test]
fn hitting_transform_coefficients() {
    let t = ou_baseline();
    let z = t.grid.zero_index();
    let (psi_p0, phi_p0) = (t.basis.psi_p()[z], t.basis.phi_p()[z]);
    let mut prev = f64::INFINITY;
    for k in 1..=60 {
        let n = 0.05 * k as f64;
        let (a, b) = hitting_coefficients(&t.basis, n).unwrap();
        let psi_n = t.basis.eval(n).psi;
        assert!(a > 0.0 && b > 0.0);
        assert!(a <= 1.0 / psi_n * (1.0 + 1e-12));
        assert!(b <= psi_p0 / (phi_p0.abs() * psi_n) * (1.0 + 1e-12));
        // f(n; n) = 1 and f′(0; n) = 0
        assert!((hitting_laplace(&t.basis, n, n).unwrap() - 1.0).abs() < 1e-14);
        assert!((a * psi_p0 + b * phi_p0).abs() < 1e-14 * (a * psi_p0).abs());
        let f = hitting_laplace(&t.basis, 0.0, n).unwrap();
        assert!(f > 0.0 && f <= 1.0 && f <= prev);
        prev = f;
    }
    assert!(hitting_laplace(&t.basis, 1.0, 0.5).is_err());
}

#[test]
fn boundary_is_invariant_under_normalization() {
    let t = ou_baseline();
    let b = solve_boundary(&t.basis, &t.reward, &CaseLabel::A).unwrap();
    for (a, c) in [(3.7, 0.02), (1e-3, 50.0), (1e4, 1e4)] {
        let scaled = t.basis.rescaled(a, c).unwrap();
        let bs = solve_boundary(&scaled, &t.reward, &CaseLabel::A).unwrap();
        assert!(rel(bs, b) < 1e-9, "{a} {c}: {bs} vs {b}");
    }
    // moving the scale-function anchor changes S′ by a constant only
    let p = OUParams::baseline();
    let shifted = p.spec().with_anchor(0.5);
    let basis = compute_basis(&shifted, p.r, &t.grid).unwrap();
    let bs = solve_boundary(&basis, &t.reward, &CaseLabel::A).unwrap();
    assert!(rel(bs, b) < 1e-9);
}

#[test]
fn basis_requires_valid_assumptions() {
    let spec = DiffusionSpec::new(OrnsteinUhlenbeck { mu: 0.0, theta: -1.0, sigma: 1.0 }, 2.0);
    let grid = Grid::uniform(-5.0, 5.0, 400).unwrap();
    // r − μ′ = 0.05 − 1 < 0
    assert!(compute_basis(&spec, 0.05, &grid).is_err());
    let spec = DiffusionSpec::new(DriftedBrownian { mu: 0.0, sigma: 1.0 }, 1.0);
    assert!(compute_basis(&spec, 0.5, &Grid::uniform(0.0, 5.0, 100).unwrap()).is_err());
}
