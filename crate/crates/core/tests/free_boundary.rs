mod common;

use common::*;
use follower_core::ou::{sensitivity_sweep, OUParams, SweepParameter};
use follower_core::*;

#[test]
fn objective_at_zero_and_slope() {
    let t = ou_baseline();
    let obj = BoundaryObjective::new(&t.basis, &t.reward).unwrap();
    assert!((obj.value(0.0) - (t.reward.eta0() - t.reward.kappa)).abs() < 1e-14);
    let mut prev = obj.value(0.0);
    for k in 1..=80 {
        let b = 0.025 * k as f64;
        let v = obj.value(b);
        assert!(v > prev, "not increasing at {b}");
        prev = v;
        assert!((v - obj.direct(b)).abs() < 1e-7, "quadrature vs direct at {b}");
    }
    assert!(boundary_objective(&t.basis, &t.reward, -0.1).is_err());
}

#[test]
fn baseline_boundary_and_value() {
    let t = ou_baseline();
    let sol = t.solution();
    let b = sol.regime.b_star().unwrap();
    assert!((b - 0.9073).abs() < 1e-3, "{b}");
    let vb = sol.v_at_bstar.unwrap();
    assert!((vb + 8.07).abs() < 0.05, "{vb}");
    let hjb = verify_hjb(&sol, &t.grid).unwrap();
    assert!(hjb.passed, "{hjb:?}");
    assert!(hjb.neumann_residual < 1e-8);
    assert!(hjb.smooth_fit_value.unwrap() < 1e-8);
    assert!(hjb.smooth_fit_slope.unwrap() < 1e-6);
    assert!(hjb.vb_residual.unwrap() < 1e-6);
    assert!(hjb.max_second_derivative_on_band.unwrap() <= 1e-9);
    // continuity across b*
    let (lo, hi) = (sol.value(b - 1e-9).unwrap(), sol.value(b + 1e-9).unwrap());
    assert!((lo.v - hi.v).abs() < 1e-7 && (lo.dv - hi.dv).abs() < 1e-7);
}

#[test]
fn case_b_boundary_exceeds_sign_change() {
    let t = case_b(0.5);
    let CaseLabel::B { x_bar } = t.case() else { panic!() };
    let sol = t.solution();
    let b = sol.regime.b_star().unwrap();
    assert!(b > x_bar, "{b} <= {x_bar}");
    let hjb = verify_hjb(&sol, &t.grid).unwrap();
    assert!(hjb.passed, "{hjb:?}");
    assert!(hjb.neumann_residual < 1e-8);
    assert!(hjb.smooth_fit_value.unwrap() < 1e-8);
}

#[test]
fn case_c_never_controls() {
    let t = case_c();
    let sol = t.solution();
    assert_eq!(sol.regime, Regime::NoAction);
    assert!(sol.v_at_bstar.is_none());
    for k in 0..=40 {
        let x = 0.1 * k as f64;
        let v = sol.value(x).unwrap();
        assert!(v.v <= 0.0);
        // v = −e^{−x} here
        assert!((v.v + (-x).exp()).abs() < 1e-8, "x = {x}: {}", v.v);
    }
    let hi = sol.value(t.grid.hi()).unwrap().v;
    assert!(hi.abs() < 1e-4, "{hi}");
    assert!(verify_hjb(&sol, &t.grid).unwrap().passed);
    assert!(transformed_scale_check(&sol).is_err());
}

#[test]
fn squeeze_limit() {
    let p = OUParams::baseline();
    let spec = p.spec();
    let grid = p.default_grid(4000).unwrap();
    let basis = compute_basis(&spec, p.r, &grid).unwrap();
    let reward = constant_reward(p.eta0, p.eta0, p.r);
    let sol = build_value(&basis, &reward, &CaseLabel::A).unwrap();
    assert_eq!(sol.regime, Regime::SqueezeAtZero);
    assert!(verify_hjb(&sol, &grid).unwrap().passed);

    let deltas = [1e-1, 1e-2, 1e-3, 1e-4];
    let seq = epsilon_boundary_sequence(&basis, &reward, &deltas).unwrap();
    for w in seq.windows(2) {
        assert!(w[1].1 < w[0].1, "{seq:?}");
    }
    assert!(seq[3].1 < 0.1 * seq[0].1, "{seq:?}");
    assert!(seq.iter().all(|s| s.1 > 0.0));
    assert!(epsilon_boundary_sequence(&basis, &reward, &[0.0]).is_err());

    // the band solutions approach the squeeze value
    let target = sol.value(0.5).unwrap().v;
    let mut prev = f64::INFINITY;
    for d in [1e-2, 1e-4, 1e-6, 1e-8] {
        let near = build_value(&basis, &reward.with_kappa(p.eta0 + d).unwrap(), &CaseLabel::A).unwrap();
        let gap = (near.value(0.5).unwrap().v - target).abs();
        assert!(gap < prev, "{d}: {gap}");
        prev = gap;
    }
    assert!(prev < 1e-2 * target.abs(), "{prev}");
}

#[test]
fn transformed_scale_tangency() {
    let t = ou_baseline();
    let sol = t.solution();
    let rep = transformed_scale_check(&sol).unwrap();
    assert!(rep.passed, "{rep:?}");
    assert!((rep.y_o - 1.0).abs() < 1e-12);
    assert!(rep.tangency_residual < 1e-6);
    assert!(rep.min_dominance >= -1e-9);
    assert_eq!(rep.sign_matches, rep.samples);
    // Case A: η̃ is concave
    let ts = boundary::TransformedScale::new(&t.basis, &t.reward);
    for k in 0..=20 {
        assert!(ts.at(0.1 * k as f64).eta_pp < 0.0);
    }
    let b = case_b(0.5);
    assert!(transformed_scale_check(&b.solution()).unwrap().passed);
}

fn b_star(p: &OUParams) -> f64 {
    ou::ou_solution(p, 4000).unwrap().regime.b_star().unwrap()
}

#[test]
fn comparative_statics() {
    let p = OUParams::baseline();
    let sweeps = [
        (SweepParameter::Kappa, [p.kappa, p.kappa * 1.5, p.kappa * 2.0, p.kappa * 3.0, p.kappa * 5.0]),
        (SweepParameter::Eta0, [p.eta0, p.eta0 * 0.8, p.eta0 * 0.6, p.eta0 * 0.4, p.eta0 * 0.2]),
        (SweepParameter::Sigma, [0.5, 0.75, 1.0, 1.5, 2.0]),
    ];
    for (param, values) in sweeps {
        let mut prev = 0.0;
        for v in values {
            let b = b_star(&param.apply(&p, v));
            assert!(b >= prev - 1e-9, "{} = {v}: {b} < {prev}", param.name());
            prev = b;
        }
        let table = sensitivity_sweep(&p, param, &values).unwrap();
        assert!(table.all_rows_solved() && table.asserted_hold(), "{:?}", table.verdicts);
    }
    for param in [SweepParameter::Sigma, SweepParameter::Theta] {
        let values = [0.3, 0.6, 1.0, 1.4, 2.0];
        let sols: Vec<_> = values.iter().map(|&v| ou::ou_solution(&param.apply(&p, v), 4000).unwrap()).collect();
        for w in sols.windows(2) {
            for k in 0..=30 {
                let x = 0.1 * k as f64;
                let (a, b) = (w[0].value(x).unwrap().v, w[1].value(x).unwrap().v);
                assert!(b <= a + 1e-9 * a.abs(), "{} at x = {x}", param.name());
            }
        }
    }
}
