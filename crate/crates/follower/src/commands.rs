use std::fs;
use std::path::{Path, PathBuf};

use follower_core::ou::{ou_solution, sweep_table, SweepParameter, SweepTable};
use follower_core::sim::{simulate_double_reflection, CaseCEstimator, PayoffEstimator, SimEstimate};
use follower_core::{
    build_value, classify, compute_basis, transformed_scale_check, validate_assumptions, verify_hjb, CaseLabel,
    ControlSolution, FundamentalBasis, HjbReport, Regime, RewardSpec, TransformedScaleReport,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Problem, ProblemConfig};
use crate::error::CliError;
use crate::output::{fmt17, num, write_csv, write_json, Num};
use crate::parallel::run_parallel;

/// Overrides taken from the command line.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub grid_hi: Option<f64>,
    pub x: Option<Vec<f64>>,
}

pub fn load_problem(path: &Path, o: &Overrides) -> Result<Problem, CliError> {
    let mut cfg = ProblemConfig::load(path)?;
    apply_overrides(&mut cfg, o);
    Problem::from_config(cfg)
}

pub fn apply_overrides(cfg: &mut ProblemConfig, o: &Overrides) {
    if let Some(seed) = o.seed {
        cfg.sim.seed = seed;
    }
    if let Some(hi) = o.grid_hi {
        cfg.grid.hi = Some(hi);
    }
    if let Some(x) = &o.x {
        cfg.sim.x = x.clone();
    }
}

/// What a command produced.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub exit_code: u8,
    pub files: Vec<PathBuf>,
    pub summary: String,
}

/// Output directory: the flag, else `[output] dir`, else `out`.
pub fn output_dir(problem: &Problem, flag: Option<&Path>) -> Result<PathBuf, CliError> {
    let dir = flag
        .map(Path::to_path_buf)
        .or_else(|| problem.config.output.dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    Ok(dir)
}

/// Basis, reward, case, value function and its verification.
#[derive(Debug, Clone)]
pub struct Solved {
    pub basis: FundamentalBasis,
    pub reward: RewardSpec,
    pub case: CaseLabel,
    pub solution: ControlSolution,
    pub hjb: HjbReport,
    pub transformed: Option<TransformedScaleReport>,
    pub warnings: Vec<String>,
}

pub fn solve_problem(problem: &Problem) -> Result<Solved, CliError> {
    let report = validate_assumptions(&problem.spec, problem.r, &problem.grid);
    let mut warnings: Vec<String> = report.failures().iter().map(|s| s.to_string()).collect();
    if report.boundary_warning() {
        warnings.push("fundamental solutions may not have their limiting behaviour at the grid edge".into());
    }
    if report.finite_difference_derivatives {
        warnings.push("coefficient derivatives are finite differences".into());
    }
    let basis = compute_basis(&problem.spec, problem.r, &problem.grid)?;
    let reward = problem.reward_spec(&basis).map_err(CliError::config)?;
    let case = classify(&problem.spec, &reward, &problem.grid);
    let solution = build_value(&basis, &reward, &case)?;
    let hjb = verify_hjb(&solution, &problem.grid)?;
    let transformed = match solution.regime {
        Regime::ReflectAtBand { .. } => Some(transformed_scale_check(&solution)?),
        _ => None,
    };
    Ok(Solved {
        basis,
        reward,
        case,
        solution,
        hjb,
        transformed,
        warnings,
    })
}

#[derive(Serialize)]
struct RegionOut {
    branch: &'static str,
    lo: Num,
    hi: Num,
}

#[derive(Serialize)]
struct HjbOut {
    passed: bool,
    tolerance: Num,
    max_pde_violation: Num,
    max_gradient_violation: Num,
    neumann_residual: Num,
    smooth_fit_value: Option<Num>,
    smooth_fit_slope: Option<Num>,
    vb_residual: Option<Num>,
    max_second_derivative_on_band: Option<Num>,
    equality_regions: Vec<RegionOut>,
}

impl From<&HjbReport> for HjbOut {
    fn from(h: &HjbReport) -> Self {
        HjbOut {
            passed: h.passed,
            tolerance: Num(h.tolerance),
            max_pde_violation: Num(h.max_pde_violation),
            max_gradient_violation: Num(h.max_gradient_violation),
            neumann_residual: Num(h.neumann_residual),
            smooth_fit_value: num(h.smooth_fit_value),
            smooth_fit_slope: num(h.smooth_fit_slope),
            vb_residual: num(h.vb_residual),
            max_second_derivative_on_band: num(h.max_second_derivative_on_band),
            equality_regions: h
                .equality_regions
                .iter()
                .map(|r| RegionOut {
                    branch: match r.branch {
                        follower_core::boundary::Branch::Pde => "pde",
                        follower_core::boundary::Branch::Gradient => "gradient",
                        follower_core::boundary::Branch::Both => "both",
                        follower_core::boundary::Branch::Neither => "neither",
                    },
                    lo: Num(r.lo),
                    hi: Num(r.hi),
                })
                .collect(),
        }
    }
}

#[derive(Serialize)]
struct TransformedOut {
    passed: bool,
    y_o: Num,
    y_star: Num,
    theta_at_yo: Num,
    eta_tilde_at_ystar: Num,
    tangency_residual: Num,
    min_dominance: Num,
    sign_matches: usize,
    samples: usize,
}

#[derive(Serialize)]
struct BasisOut {
    wronskian_rel_std: Num,
    hat_wronskian_rel_std: Num,
    hat_ode_residual: Num,
    derivative_identity_gap: Num,
    monotone: bool,
}

#[derive(Serialize)]
struct GridOut {
    lo: Num,
    hi: Num,
    cells: usize,
}

#[derive(Serialize)]
struct SolutionOut {
    schema: u32,
    command: &'static str,
    case: &'static str,
    x_bar: Option<Num>,
    regime: &'static str,
    b_star: Option<Num>,
    alpha: Option<Num>,
    beta: Option<Num>,
    v_at_bstar: Option<Num>,
    v_at_zero: Num,
    r: Num,
    kappa: Num,
    eta0: Num,
    grid: GridOut,
    warnings: Vec<String>,
    basis: BasisOut,
    hjb: HjbOut,
    transformed_scale: Option<TransformedOut>,
    value_csv: String,
}

pub fn cmd_solve(problem: &Problem, out: &Path) -> Result<Outcome, CliError> {
    let s = solve_problem(problem)?;
    let (alpha, beta) = match s.solution.regime {
        Regime::ReflectAtBand { alpha, beta, .. } => (Some(alpha), Some(beta)),
        _ => (None, None),
    };
    let b_star = s.solution.regime.b_star();
    let d = s.basis.diagnostics();
    let grid = &problem.grid;

    let value_path = out.join("value.csv");
    let hi = problem
        .config
        .output
        .value_hi
        .unwrap_or(3.0 * b_star.unwrap_or(1.0).max(1.0))
        .min(grid.hi());
    let mut rows = Vec::new();
    for &x in grid.nonnegative().iter().filter(|&&x| x <= hi) {
        let p = s.solution.value(x)?;
        rows.push(vec![fmt17(x), fmt17(p.v), fmt17(p.dv), fmt17(p.d2v), fmt17(s.reward.eta.eta(x))]);
    }
    write_csv(&value_path, &["x", "v", "dv", "d2v", "eta"], rows)?;

    let report = SolutionOut {
        schema: crate::config::SCHEMA,
        command: "solve",
        case: s.case.name(),
        x_bar: match s.case {
            CaseLabel::B { x_bar } => Some(Num(x_bar)),
            _ => None,
        },
        regime: s.solution.regime.name(),
        b_star: num(b_star),
        alpha: num(alpha),
        beta: num(beta),
        v_at_bstar: num(s.solution.v_at_bstar),
        v_at_zero: Num(s.solution.value(0.0)?.v),
        r: Num(s.reward.r),
        kappa: Num(s.reward.kappa),
        eta0: Num(s.reward.eta0()),
        grid: GridOut {
            lo: Num(grid.lo()),
            hi: Num(grid.hi()),
            cells: grid.len() - 1,
        },
        warnings: s.warnings.clone(),
        basis: BasisOut {
            wronskian_rel_std: Num(d.wronskian_rel_std),
            hat_wronskian_rel_std: Num(d.hat_wronskian_rel_std),
            hat_ode_residual: Num(d.hat_ode_residual),
            derivative_identity_gap: Num(d.derivative_identity_gap),
            monotone: d.monotone,
        },
        hjb: HjbOut::from(&s.hjb),
        transformed_scale: s.transformed.as_ref().map(|t| TransformedOut {
            passed: t.passed,
            y_o: Num(t.y_o),
            y_star: Num(t.y_star),
            theta_at_yo: Num(t.theta_at_yo),
            eta_tilde_at_ystar: Num(t.eta_tilde_at_ystar),
            tangency_residual: Num(t.tangency_residual),
            min_dominance: Num(t.min_dominance),
            sign_matches: t.sign_matches,
            samples: t.samples,
        }),
        value_csv: "value.csv".into(),
    };
    let json_path = out.join("solution.json");
    write_json(&json_path, &report)?;

    let passed = s.hjb.passed;
    let summary = format!(
        "case {} regime {}{} hjb {}",
        s.case.name(),
        s.solution.regime.name(),
        b_star.map(|b| format!(" b* = {b:.6}")).unwrap_or_default(),
        if passed { "pass" } else { "FAIL" }
    );
    Ok(Outcome {
        exit_code: if passed { 0 } else { 3 },
        files: vec![json_path, value_path],
        summary,
    })
}

#[derive(Serialize)]
struct EstimateOut {
    x: Num,
    mean: Num,
    std_error: Num,
    tail_bound: Num,
    optimal_value: Num,
    z_score: Num,
    n_paths: usize,
    failures: usize,
    truncated: usize,
    fallback_steps: u64,
}

#[derive(Serialize)]
struct SimulateOut {
    schema: u32,
    command: &'static str,
    seed: u64,
    scheme: &'static str,
    dt: Num,
    antithetic: bool,
    horizon: Option<Num>,
    regime: &'static str,
    b_star: Option<Num>,
    policy: &'static str,
    policy_b: Option<Num>,
    estimates: Vec<EstimateOut>,
    paths_csv: Option<String>,
}

/// Monte Carlo payoff of the band policy (the solved `b*` unless
/// `policy_b` is given), or of pure reflection at 0 in the no-action regime.
pub fn cmd_simulate(problem: &Problem, out: &Path, policy_b: Option<f64>) -> Result<Outcome, CliError> {
    let cfg = problem.config.sim_config()?;
    let xs = &problem.config.sim.x;
    if xs.is_empty() || xs.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(CliError::Config("sim.x must be a nonempty list of nonnegative numbers".into()));
    }
    if let Some(b) = policy_b {
        if !(b > 0.0 && b.is_finite()) {
            return Err(CliError::Config(format!("--policy-b must be positive (got {b})")));
        }
    }
    let s = solve_problem(problem)?;
    let regime = s.solution.regime;
    let band = match (policy_b, regime) {
        (Some(b), _) => Some(b),
        (None, Regime::ReflectAtBand { b_star, .. }) => Some(b_star),
        (None, Regime::NoAction) => None,
        (None, Regime::SqueezeAtZero) => {
            return Err(CliError::Failed(
                "the optimal policy pushes the state to 0 at once; pass --policy-b to simulate a band".into(),
            ))
        }
    };

    let mut estimates = Vec::new();
    for &x in xs {
        let e: SimEstimate = match band {
            Some(b) => run_parallel(&PayoffEstimator::new(&problem.spec, &s.reward, b, x, cfg)?)?,
            None => run_parallel(&CaseCEstimator::new(&problem.spec, &s.reward, x, cfg)?)?,
        };
        let v = s.solution.value(x)?.v;
        estimates.push(EstimateOut {
            x: Num(x),
            mean: Num(e.mean),
            std_error: Num(e.std_error),
            tail_bound: Num(e.tail_bound),
            optimal_value: Num(v),
            z_score: Num((e.mean - v) / e.std_error),
            n_paths: e.n_paths,
            failures: e.failures,
            truncated: e.truncated,
            fallback_steps: e.fallback_steps,
        });
    }

    let mut files = Vec::new();
    let oc = &problem.config.output;
    let paths_csv = match band {
        Some(b) if oc.paths > 0 => {
            let path = out.join("paths.csv");
            let stride = oc.path_stride.max(1);
            let mut rows = Vec::new();
            for k in 0..oc.paths {
                let (mut l, mut d, mut step) = (0.0, 0.0, 0usize);
                let mut rec = |t: f64, y: f64, dl: f64, dd: f64| {
                    l += dl;
                    d += dd;
                    if step % stride == 0 {
                        rows.push(vec![k.to_string(), fmt17(t), fmt17(y), fmt17(l), fmt17(d)]);
                    }
                    step += 1;
                };
                simulate_double_reflection(&problem.spec, &s.reward, b, xs[0], &cfg, k, Some(&mut rec))?;
            }
            write_csv(&path, &["path", "t", "x", "L", "D"], rows)?;
            files.push(path);
            Some("paths.csv".to_string())
        }
        _ => None,
    };

    let report = SimulateOut {
        schema: crate::config::SCHEMA,
        command: "simulate",
        seed: cfg.seed,
        scheme: cfg.scheme.name(),
        dt: Num(cfg.dt),
        antithetic: cfg.antithetic,
        horizon: num(cfg.horizon),
        regime: regime.name(),
        b_star: num(regime.b_star()),
        policy: if band.is_some() { "band" } else { "reflect_at_zero" },
        policy_b: num(band),
        estimates,
        paths_csv,
    };
    let json_path = out.join("simulation.json");
    write_json(&json_path, &report)?;
    files.insert(0, json_path);
    let summary = report
        .estimates
        .iter()
        .map(|e| format!("x = {:.4}: {:.6} ± {:.6} (V = {:.6})", e.x.0, e.mean.0, e.std_error.0, e.optimal_value.0))
        .collect::<Vec<_>>()
        .join("\n");
    Ok(Outcome {
        exit_code: 0,
        files,
        summary,
    })
}

#[derive(Serialize)]
struct VerdictOut {
    name: String,
    asserted: bool,
    holds: bool,
}

#[derive(Serialize)]
struct SweepOut {
    schema: u32,
    command: &'static str,
    parameter: &'static str,
    all_rows_solved: bool,
    asserted_hold: bool,
    verdicts: Vec<VerdictOut>,
    sweep_csv: String,
}

/// Solve the OU problem for each value of one parameter, in parallel.
pub fn sweep(problem: &Problem, param: &str, values: &[f64]) -> Result<SweepTable, CliError> {
    if values.is_empty() {
        return Err(CliError::Config("--values: the sweep range is empty".into()));
    }
    let p = problem
        .ou
        .ok_or_else(|| CliError::Config("sweep needs diffusion.model = \"ou\" and a constant reward.eta".into()))?;
    let parameter = SweepParameter::parse(param).map_err(|e| CliError::Config(format!("--param: {e}")))?;
    let cells = problem.config.grid.cells;
    let solutions = values
        .par_iter()
        .map(|&v| ou_solution(&parameter.apply(&p, v), cells))
        .collect();
    sweep_table(parameter, values, solutions).map_err(|e| CliError::Config(format!("--values: {e}")))
}

pub fn cmd_sweep(problem: &Problem, out: &Path, param: &str, values: &[f64]) -> Result<Outcome, CliError> {
    let table = sweep(problem, param, values)?;
    let mut order: Vec<usize> = (0..table.rows.len()).collect();
    order.sort_by(|&a, &b| table.rows[a].value.total_cmp(&table.rows[b].value));

    let csv_path = out.join("sweep.csv");
    let mut rows = Vec::new();
    let mut prev: Option<&follower_core::ou::SweepRow> = None;
    for &i in &order {
        let row = &table.rows[i];
        let opt = |v: Option<f64>| v.map(fmt17).unwrap_or_default();
        let (b_change, v_below) = match (prev, row.error.is_none()) {
            (Some(p), true) => {
                let change = match (p.b_star, row.b_star) {
                    (Some(a), Some(b)) if b > a => "+",
                    (Some(a), Some(b)) if b < a => "-",
                    (Some(_), Some(_)) => "0",
                    _ => "",
                };
                let below = p.v_grid.iter().zip(&row.v_grid).all(|(a, b)| *b <= *a + 1e-9 * (1.0 + a.abs()));
                (change.to_string(), below.to_string())
            }
            _ => (String::new(), String::new()),
        };
        rows.push(vec![
            fmt17(row.value),
            opt(row.b_star),
            opt(row.v_at_zero),
            opt(row.v_at_bstar),
            b_change,
            v_below,
            row.error.clone().unwrap_or_default(),
        ]);
        if row.error.is_none() {
            prev = Some(row);
        }
    }
    write_csv(
        &csv_path,
        &[
            table.parameter.name(),
            "b_star",
            "v_at_zero",
            "v_at_bstar",
            "b_star_change",
            "v_below_previous",
            "error",
        ],
        rows,
    )?;

    let report = SweepOut {
        schema: crate::config::SCHEMA,
        command: "sweep",
        parameter: table.parameter.name(),
        all_rows_solved: table.all_rows_solved(),
        asserted_hold: table.asserted_hold(),
        verdicts: table
            .verdicts
            .iter()
            .map(|v| VerdictOut {
                name: v.name.clone(),
                asserted: v.asserted,
                holds: v.holds,
            })
            .collect(),
        sweep_csv: "sweep.csv".into(),
    };
    let json_path = out.join("sweep.json");
    write_json(&json_path, &report)?;

    let summary = table
        .verdicts
        .iter()
        .map(|v| {
            format!(
                "{}: {}{}",
                v.name,
                if v.holds { "pass" } else { "fail" },
                if v.asserted { "" } else { " (descriptive)" }
            )
        })
        .collect::<Vec<_>>()
        .join("\n");
    let exit_code = if table.all_rows_solved() && table.asserted_hold() { 0 } else { 3 };
    Ok(Outcome {
        exit_code,
        files: vec![json_path, csv_path],
        summary,
    })
}
