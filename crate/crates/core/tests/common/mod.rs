#![allow(dead_code)]

use follower_core::ou::OUParams;
use follower_core::reward::{ConstantReward, ExpDecayReward, LinearReward};
use follower_core::*;

pub struct Setup {
    pub spec: DiffusionSpec,
    pub reward: RewardSpec,
    pub grid: Grid,
    pub basis: FundamentalBasis,
}

impl Setup {
    pub fn new(spec: DiffusionSpec, reward: RewardSpec, grid: Grid) -> Setup {
        let basis = compute_basis(&spec, reward.r, &grid).unwrap();
        Setup { spec, reward, grid, basis }
    }

    pub fn case(&self) -> CaseLabel {
        classify(&self.spec, &self.reward, &self.grid)
    }

    pub fn solution(&self) -> ControlSolution {
        build_value(&self.basis, &self.reward, &self.case()).unwrap()
    }
}

pub fn ou_baseline() -> Setup {
    let p = OUParams::baseline();
    Setup::new(p.spec(), p.reward().unwrap(), p.default_grid(4000).unwrap())
}

/// η(x) = x, BM μ = 1, σ = 1, r = 0.5: one sign change at x̄ = 2.
pub fn case_b(kappa: f64) -> Setup {
    let spec = DiffusionSpec::new(DriftedBrownian { mu: 1.0, sigma: 1.0 }, 1.0);
    let reward = RewardSpec::new(LinearReward { intercept: 0.0, slope: 1.0 }, kappa, 0.5).unwrap();
    let grid = Grid::default_for(&spec, 0.5, 4000).unwrap();
    Setup::new(spec, reward, grid)
}

/// η(x) = e^{−2x}, BM μ = 0, σ² = 2, r = 1, κ = 1.
pub fn case_c() -> Setup {
    let spec = DiffusionSpec::new(
        DriftedBrownian {
            mu: 0.0,
            sigma: 2f64.sqrt(),
        },
        1.0,
    );
    let reward = RewardSpec::new(ExpDecayReward { scale: 1.0, lambda: 2.0 }, 1.0, 1.0).unwrap();
    let grid = Grid::default_for(&spec, 1.0, 4000).unwrap();
    Setup::new(spec, reward, grid)
}

pub fn constant_reward(eta0: f64, kappa: f64, r: f64) -> RewardSpec {
    RewardSpec::new(ConstantReward(eta0), kappa, r).unwrap()
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}
