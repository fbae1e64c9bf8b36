mod common;

use common::*;
use follower_core::ou::*;
use follower_core::*;

#[test]
fn cylinder_function_special_values() {
    for x in [-3.0f64, -1.0, 0.0, 0.5, 2.0, 5.0] {
        // D_{−1}(x) = e^{x²/4}√(π/2) erfc(x/√2)
        let exact = (0.25 * x * x).exp() * (std::f64::consts::FRAC_PI_2).sqrt() * libm::erfc(x / 2f64.sqrt());
        assert!(rel(cylinder_d(-1.0, x).unwrap(), exact) < 1e-10, "x = {x}");
        // D_{−2}(x) = e^{−x²/4} − x D_{−1}(x)
        let d2 = (-0.25 * x * x).exp() - x * exact;
        assert!(rel(cylinder_d(-2.0, x).unwrap(), d2) < 1e-8, "x = {x}");
    }
    let mut prev = f64::INFINITY;
    for k in 0..10 {
        let d = cylinder_d(-1.05, 4.0 + k as f64).unwrap();
        assert!(d > 0.0 && d < prev);
        prev = d;
    }
    assert!(cylinder_d(0.5, 1.0).is_err());
}

#[test]
fn closed_form_hat_solutions() {
    let p = OUParams::baseline();
    let xs: Vec<f64> = (0..=30).map(|k| 0.1 * k as f64).collect();
    assert!(ou_hat_ode_residual(&p, &xs).unwrap() < 1e-8);
    let mut prev: Option<OuHatPoint> = None;
    for &x in &xs {
        let h = ou_hat_point(&p, x).unwrap();
        if let Some(q) = prev {
            assert!(h.hat_psi > q.hat_psi && h.hat_phi < q.hat_phi);
        }
        prev = Some(h);
    }
}

#[test]
fn baseline_boundary_by_both_routes() {
    let p = OUParams::baseline();
    let direct = solve_ou_boundary(&p).unwrap();
    let generic = ou_solution(&p, 4000).unwrap().regime.b_star().unwrap();
    assert!((direct - 0.91).abs() < 5e-3, "{direct}");
    assert!(rel(direct, generic) < 1e-6, "{direct} vs {generic}");

    let grid = p.default_grid(2000).unwrap();
    let basis = ou_hat_basis(&p, &grid).unwrap();
    let b = solve_boundary(&basis, &p.reward().unwrap(), &CaseLabel::A).unwrap();
    assert!(rel(b, direct) < 1e-6, "{b} vs {direct}");
}

#[test]
fn theta_trend() {
    let base = OUParams::baseline();
    let expected = [1.61, 1.22, 1.03, 0.91, 0.82, 0.75, 0.70, 0.66];
    let thetas: Vec<f64> = (1..=8).map(|k| 0.25 * k as f64).collect();
    for (&theta, &b) in thetas.iter().zip(&expected) {
        let q = SweepParameter::Theta.apply(&base, theta);
        let got = solve_ou_boundary(&q).unwrap();
        assert!((got - b).abs() <= 1e-2, "theta = {theta}: {got}");
    }
    let table = sensitivity_sweep(&base, SweepParameter::Theta, &thetas).unwrap();
    assert!(table.all_rows_solved() && table.asserted_hold());
    let trend = table.verdicts.iter().find(|v| !v.asserted).unwrap();
    assert!(trend.holds);
}

#[test]
fn sweep_rejects_bad_input() {
    let p = OUParams::baseline();
    assert!(sensitivity_sweep(&p, SweepParameter::Kappa, &[]).is_err());
    assert!(sensitivity_sweep(&p, SweepParameter::Kappa, &[f64::NAN]).is_err());
    assert!(SweepParameter::parse("mu").is_err());
    // κ below η₀ fails per row, not for the whole table
    let t = sensitivity_sweep(&p, SweepParameter::Kappa, &[0.2, 1.0]).unwrap();
    assert!(!t.all_rows_solved());
    assert!(t.rows[0].error.is_some() && t.rows[1].error.is_none());
}
