//! Command-line front end for the reflected-follower control solver: problem
//! files, parallel Monte Carlo, and JSON/CSV output.

pub mod commands;
pub mod config;
pub mod error;
pub mod expr;
pub mod output;
pub mod parallel;

pub use commands::{cmd_simulate, cmd_solve, cmd_sweep, load_problem, solve_problem, Outcome, Overrides};
pub use config::{Problem, ProblemConfig};
pub use error::CliError;
