//! Problem files: TOML with a `schema = 1` header and the sections
//! `[diffusion]`, `[reward]`, `[grid]`, `[sim]`, `[output]`.

use std::path::Path;
use std::sync::Arc;

use follower_core::ou::OUParams;
use follower_core::reward::{ConstantReward, ExpDecayReward, LinearReward};
use follower_core::sim::{Scheme, SimConfig};
use follower_core::{
    from_running_reward, Diffusion, DiffusionSpec, DriftedBrownian, FundamentalBasis, Grid, MarginalReward,
    OrnsteinUhlenbeck, RewardSpec,
};
use serde::Deserialize;

use crate::error::CliError;
use crate::expr::Expr;

pub const SCHEMA: u32 = 1;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub schema: u32,
    pub diffusion: DiffusionConfig,
    pub reward: RewardConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub output: OutputConfig,
}

/// `model = "ou"` (`mu`, `theta`, `sigma`), `"bm"` (`mu`, `sigma`) or
/// `"expr"` (`drift`, `vol` as expressions in `x`). `sigma2` may replace
/// `sigma` for the built-in models.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiffusionConfig {
    pub model: String,
    pub mu: Option<f64>,
    pub theta: Option<f64>,
    pub sigma: Option<f64>,
    pub sigma2: Option<f64>,
    pub drift: Option<String>,
    pub vol: Option<String>,
    /// Bound on `|μ′|` and `|σ′|`; unchecked when absent.
    pub lipschitz: Option<f64>,
    #[serde(default)]
    pub anchor: f64,
}

/// Either `eta` (marginal reward) with `kappa`, or `running` (a running
/// reward `π`) with `alpha`, in which case `κ` is derived.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardConfig {
    pub r: f64,
    pub kappa: Option<f64>,
    pub eta: Option<EtaDecl>,
    pub running: Option<String>,
    pub alpha: Option<f64>,
}

/// `eta = "expression in x"` or a built-in table such as
/// `eta = { kind = "exp-decay", scale = 1.0, lambda = 2.0 }`.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum EtaDecl {
    Expr(String),
    Builtin(EtaBuiltin),
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum EtaBuiltin {
    #[serde(rename = "constant")]
    Constant { value: f64 },
    #[serde(rename = "linear")]
    Linear { intercept: f64, slope: f64 },
    #[serde(rename = "exp-decay")]
    ExpDecay { scale: f64, lambda: f64 },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "default_cells")]
    pub cells: usize,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    #[serde(default = "default_spacing")]
    pub spacing: String,
    #[serde(default = "default_ratio")]
    pub ratio: u32,
}

fn default_cells() -> usize {
    4000
}
fn default_spacing() -> String {
    "uniform".into()
}
fn default_ratio() -> u32 {
    4
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            cells: default_cells(),
            lo: None,
            hi: None,
            spacing: default_spacing(),
            ratio: default_ratio(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_paths")]
    pub n_paths: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "yes")]
    pub antithetic: bool,
    #[serde(default = "default_scheme")]
    pub scheme: String,
    pub horizon: Option<f64>,
    /// Starting points.
    #[serde(default = "default_x")]
    pub x: Vec<f64>,
}

fn default_dt() -> f64 {
    1e-3
}
fn default_paths() -> usize {
    100_000
}
fn yes() -> bool {
    true
}
fn default_scheme() -> String {
    "bridge".into()
}
fn default_x() -> Vec<f64> {
    vec![0.0]
}

impl Default for SimSection {
    fn default() -> Self {
        SimSection {
            dt: default_dt(),
            n_paths: default_paths(),
            seed: 0,
            antithetic: true,
            scheme: default_scheme(),
            horizon: None,
            x: default_x(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<String>,
    /// Number of simulated paths to dump as CSV.
    #[serde(default)]
    pub paths: usize,
    #[serde(default = "default_stride")]
    pub path_stride: usize,
    /// Right end of the value-function table; `3·max(b*, 1)` when absent.
    pub value_hi: Option<f64>,
}

fn default_stride() -> usize {
    100
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: None,
            paths: 0,
            path_stride: default_stride(),
            value_hi: None,
        }
    }
}

impl ProblemConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: ProblemConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        if cfg.schema != SCHEMA {
            return Err(CliError::Config(format!(
                "schema: unsupported version {} (expected {SCHEMA})",
                cfg.schema
            )));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn sim_config(&self) -> Result<SimConfig, CliError> {
        let s = &self.sim;
        let scheme = match s.scheme.as_str() {
            "bridge" => Scheme::BridgeExtrema,
            "projected" => Scheme::Projected,
            other => return Err(CliError::Config(format!("sim.scheme: unknown scheme `{other}`"))),
        };
        let cfg = SimConfig {
            dt: s.dt,
            horizon: s.horizon,
            n_paths: s.n_paths,
            seed: s.seed,
            antithetic: s.antithetic,
            scheme,
        };
        cfg.validate().map_err(|e| CliError::Config(format!("sim: {e}")))?;
        Ok(cfg)
    }
}

/// Marginal or running reward as declared.
#[derive(Debug, Clone)]
pub enum RewardDecl {
    Marginal(RewardSpec),
    Running { pi: Expr, alpha: f64 },
}

/// A validated problem ready for the solver.
#[derive(Debug, Clone)]
pub struct Problem {
    pub config: ProblemConfig,
    pub spec: DiffusionSpec,
    pub r: f64,
    pub reward: RewardDecl,
    pub grid: Grid,
    /// Present for an OU diffusion with constant `η`.
    pub ou: Option<OUParams>,
}

struct ExprDiffusion {
    drift: Expr,
    vol: Expr,
}

impl Diffusion for ExprDiffusion {
    fn drift(&self, x: f64) -> f64 {
        self.drift.eval(x)
    }
    fn drift_prime(&self, x: f64) -> f64 {
        self.drift.jet(x).d1
    }
    fn vol(&self, x: f64) -> f64 {
        self.vol.eval(x)
    }
    fn vol_prime(&self, x: f64) -> f64 {
        self.vol.jet(x).d1
    }
}

#[derive(Debug)]
struct ExprReward(Expr);

impl MarginalReward for ExprReward {
    fn eta(&self, x: f64) -> f64 {
        self.0.eval(x)
    }
    fn eta_prime(&self, x: f64) -> f64 {
        self.0.jet(x).d1
    }
    fn eta_second(&self, x: f64) -> f64 {
        self.0.jet(x).d2
    }
}

fn need(v: Option<f64>, field: &str) -> Result<f64, CliError> {
    match v {
        Some(v) if v.is_finite() => Ok(v),
        Some(_) => Err(CliError::Config(format!("{field} must be finite"))),
        None => Err(CliError::Config(format!("{field} is required"))),
    }
}

fn positive(v: f64, field: &str) -> Result<f64, CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::Config(format!("{field} must be positive (got {v})")))
    }
}

fn parse_expr(text: &Option<String>, field: &str) -> Result<Expr, CliError> {
    let text = text
        .as_deref()
        .ok_or_else(|| CliError::Config(format!("{field} is required")))?;
    Expr::parse(text).map_err(|e| CliError::Config(format!("{field}: {e}")))
}

impl DiffusionConfig {
    fn sigma(&self) -> Result<f64, CliError> {
        match (self.sigma, self.sigma2) {
            (Some(s), None) => positive(s, "diffusion.sigma"),
            (None, Some(s2)) => positive(s2, "diffusion.sigma2").map(f64::sqrt),
            (Some(_), Some(_)) => Err(CliError::Config("diffusion: give sigma or sigma2, not both".into())),
            (None, None) => Err(CliError::Config("diffusion.sigma is required".into())),
        }
    }
}

impl Problem {
    pub fn from_config(config: ProblemConfig) -> Result<Self, CliError> {
        let d = &config.diffusion;
        let lipschitz = match d.lipschitz {
            Some(l) => positive(l, "diffusion.lipschitz")?,
            None => f64::INFINITY,
        };
        if !d.anchor.is_finite() {
            return Err(CliError::Config("diffusion.anchor must be finite".into()));
        }
        let r = positive(config.reward.r, "reward.r")?;
        let model: Arc<dyn Diffusion> = match d.model.as_str() {
            "ou" => Arc::new(OrnsteinUhlenbeck {
                mu: need(d.mu, "diffusion.mu")?,
                theta: positive(need(d.theta, "diffusion.theta")?, "diffusion.theta")?,
                sigma: d.sigma()?,
            }),
            "bm" => Arc::new(DriftedBrownian {
                mu: need(d.mu, "diffusion.mu")?,
                sigma: d.sigma()?,
            }),
            "expr" => {
                let drift = parse_expr(&d.drift, "diffusion.drift")?;
                let vol = parse_expr(&d.vol, "diffusion.vol")?;
                let s0 = vol.eval(d.anchor);
                if !(s0 > 0.0) {
                    return Err(CliError::Config(format!("diffusion.vol must be positive (got {s0} at the anchor)")));
                }
                Arc::new(ExprDiffusion { drift, vol })
            }
            other => {
                return Err(CliError::Config(format!(
                    "diffusion.model: unknown model `{other}` (expected ou, bm or expr)"
                )))
            }
        };
        let spec = DiffusionSpec {
            model,
            lipschitz,
            anchor: d.anchor,
        };

        let rc = &config.reward;
        let mut constant_eta = false;
        let reward = match (&rc.eta, &rc.running) {
            (Some(decl), None) => {
                let kappa = need(rc.kappa, "reward.kappa")?;
                if rc.alpha.is_some() {
                    return Err(CliError::Config("reward.alpha only applies to a running reward".into()));
                }
                let eta: Arc<dyn MarginalReward> = match decl {
                    EtaDecl::Expr(text) => {
                        let e = Expr::parse(text).map_err(|e| CliError::Config(format!("reward.eta: {e}")))?;
                        constant_eta = e.is_constant();
                        Arc::new(ExprReward(e))
                    }
                    EtaDecl::Builtin(b) => {
                        let finite = |v: f64, f: &str| need(Some(v), &format!("reward.eta.{f}"));
                        match *b {
                            EtaBuiltin::Constant { value } => {
                                constant_eta = true;
                                Arc::new(ConstantReward(finite(value, "value")?))
                            }
                            EtaBuiltin::Linear { intercept, slope } => Arc::new(LinearReward {
                                intercept: finite(intercept, "intercept")?,
                                slope: finite(slope, "slope")?,
                            }),
                            EtaBuiltin::ExpDecay { scale, lambda } => Arc::new(ExpDecayReward {
                                scale: finite(scale, "scale")?,
                                lambda: finite(lambda, "lambda")?,
                            }),
                        }
                    }
                };
                let eta0 = eta.eta(0.0);
                RewardDecl::Marginal(RewardSpec::from_arc(eta, kappa, r).map_err(|_| {
                    CliError::Config(format!(
                        "reward.kappa = {kappa} is below eta(0) = {eta0}; the value function would be infinite"
                    ))
                })?)
            }
            (None, Some(text)) => {
                if rc.kappa.is_some() {
                    return Err(CliError::Config("reward.kappa is derived from a running reward; remove it".into()));
                }
                RewardDecl::Running {
                    pi: Expr::parse(text).map_err(|e| CliError::Config(format!("reward.running: {e}")))?,
                    alpha: rc.alpha.unwrap_or(0.0),
                }
            }
            _ => return Err(CliError::Config("reward: give exactly one of eta and running".into())),
        };

        let ou = match (&reward, d.model.as_str()) {
            (RewardDecl::Marginal(rs), "ou") if constant_eta => Some(OUParams {
                mu: need(d.mu, "diffusion.mu")?,
                theta: need(d.theta, "diffusion.theta")?,
                sigma: d.sigma()?,
                r,
                kappa: rs.kappa,
                eta0: rs.eta0(),
            }),
            _ => None,
        };

        let g = &config.grid;
        if g.cells < 16 {
            return Err(CliError::Config("grid.cells must be at least 16".into()));
        }
        let grid = match (g.lo, g.hi) {
            (None, None) => match &ou {
                Some(p) => p.default_grid(g.cells),
                None => Grid::default_for(&spec, r, g.cells),
            },
            (lo, hi) => {
                let d = Grid::default_for(&spec, r, g.cells).map_err(CliError::config)?;
                let hi = hi.unwrap_or(d.hi());
                let lo = lo.unwrap_or(-hi);
                match g.spacing.as_str() {
                    "uniform" => Grid::uniform(lo, hi, g.cells),
                    "geometric" => Grid::geometric(lo, hi, g.cells, g.ratio),
                    other => {
                        return Err(CliError::Config(format!(
                            "grid.spacing: unknown spacing `{other}` (expected uniform or geometric)"
                        )))
                    }
                }
            }
        }
        .map_err(|e| CliError::Config(format!("grid: {e}")))?;

        config.sim_config()?;
        Ok(Problem {
            config,
            spec,
            r,
            reward,
            grid,
            ou,
        })
    }

    /// The reward specification, building it from the basis for a running reward.
    pub fn reward_spec(&self, basis: &FundamentalBasis) -> follower_core::Result<RewardSpec> {
        match &self.reward {
            RewardDecl::Marginal(rs) => Ok(rs.clone()),
            RewardDecl::Running { pi, alpha } => {
                let (p, q) = (pi.clone(), pi.clone());
                let running = Arc::new((move |x: f64| p.eval(x), move |x: f64| q.jet(x).d1));
                from_running_reward(basis, running, *alpha)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASELINE: &str = r#"
schema = 1
[diffusion]
model = "ou"
mu = 0.1
theta = 1.0
sigma2 = 0.8
[reward]
r = 0.05
kappa = 1.0
eta = "0.5"
"#;

    #[test]
    fn baseline_loads_as_ou() {
        let p = Problem::from_config(ProblemConfig::from_toml(BASELINE).unwrap()).unwrap();
        let ou = p.ou.unwrap();
        assert!((ou.sigma * ou.sigma - 0.8).abs() < 1e-15);
        assert_eq!(ou.eta0, 0.5);
        assert_eq!(p.grid.len(), 4001);
    }

    #[test]
    fn bad_sigma_names_the_field() {
        let text = BASELINE.replace("sigma2 = 0.8", "sigma = -1.0");
        let err = Problem::from_config(ProblemConfig::from_toml(&text).unwrap()).unwrap_err();
        assert!(err.to_string().contains("diffusion.sigma"), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn kappa_below_eta0_is_rejected_at_load() {
        let text = BASELINE.replace("kappa = 1.0", "kappa = 0.25");
        let err = Problem::from_config(ProblemConfig::from_toml(&text).unwrap()).unwrap_err();
        assert!(err.to_string().contains("reward.kappa"), "{err}");
    }

    #[test]
    fn unknown_fields_and_schema() {
        assert!(ProblemConfig::from_toml(&BASELINE.replace("schema = 1", "schema = 2")).is_err());
        assert!(ProblemConfig::from_toml(&format!("{BASELINE}\nbogus = 1\n")).is_err());
        let text = BASELINE.replace("model = \"ou\"", "model = \"cir\"");
        assert!(Problem::from_config(ProblemConfig::from_toml(&text).unwrap()).is_err());
    }

    #[test]
    fn builtin_rewards() {
        let text = BASELINE.replace("eta = \"0.5\"", "eta = { kind = \"constant\", value = 0.5 }");
        let p = Problem::from_config(ProblemConfig::from_toml(&text).unwrap()).unwrap();
        assert!(p.ou.is_some());
        let text = BASELINE.replace("eta = \"0.5\"", "eta = { kind = \"exp-decay\", scale = 0.5, lambda = 2.0 }");
        let p = Problem::from_config(ProblemConfig::from_toml(&text).unwrap()).unwrap();
        assert!(p.ou.is_none());
        let text = BASELINE.replace("eta = \"0.5\"", "eta = { kind = \"quadratic\", a = 1.0 }");
        assert!(ProblemConfig::from_toml(&text).is_err());
    }

    #[test]
    fn expression_model() {
        let text = r#"
schema = 1
[diffusion]
model = "expr"
drift = "0.1 - x"
vol = "sqrt(0.8)"
[reward]
r = 0.05
kappa = 1.0
eta = "0.5"
"#;
        let p = Problem::from_config(ProblemConfig::from_toml(text).unwrap()).unwrap();
        assert!(p.ou.is_none());
        assert_eq!(p.spec.mu_prime(0.3), -1.0);
        assert!((p.spec.sigma(2.0) - 0.8f64.sqrt()).abs() < 1e-15);
    }
}
