//! Explicit solutions of singular stochastic control problems for
//! one-dimensional diffusions reflected at zero.
//!
//! A controller pushes the state `X` down through a nondecreasing process `D`,
//! earning `η(X)` per unit, while a local-time process `L` keeps the state
//! nonnegative at a marginal cost `κ`. Depending on the sign pattern of
//! `(L_X̂ − (r − μ′))η` the optimal policy reflects the state at a free
//! boundary `b*`, squeezes it at zero, or never acts.
//!
//! The crate is `no_std` (it needs `alloc`). Module map:
//!
//! * [`diffusion`]: drift/volatility models, scale and speed densities, generators.
//! * [`reward`]: marginal rewards, the case quantity and the A/B/C classifier.
//! * [`basis`]: fundamental solutions `ψ`, `φ`, `ψ̂`, `φ̂` on a grid.
//! * [`boundary`]: the free-boundary equation, value functions and HJB checks.
//! * [`sim`]: Monte Carlo engine for the reflected and killed diffusions.
//! * [`ou`]: the mean-reverting dividend case with parabolic cylinder functions.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod basis;
pub mod boundary;
pub mod diffusion;
mod error;
pub mod math;
pub mod ou;
pub mod reward;
pub mod sim;

pub use basis::{basis_from_nodes, compute_basis, hitting_coefficients, hitting_laplace, BasisPoint, FundamentalBasis};
pub use boundary::{
    boundary_objective, build_value, coefficients, epsilon_boundary_sequence, solve_boundary,
    transformed_scale_check, verify_hjb, BoundaryObjective, ControlSolution, HjbReport, Regime,
    TransformedScaleReport, ValuePoint,
};
pub use diffusion::{
    generator_hat_x, generator_x, hat_scale_density, scale_density, speed_density,
    validate_assumptions, Diffusion, DiffusionSpec, DriftedBrownian, FnDiffusion, Grid,
    OrnsteinUhlenbeck, Spacing, ValidationReport,
};
pub use error::{Error, Result};
pub use reward::{
    case_quantity, classify, from_running_reward, CaseLabel, MarginalReward, RewardSpec,
    RunningReward,
};
