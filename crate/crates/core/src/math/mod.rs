//! Numerical building blocks: quadrature, ODE stepping, root finding and
//! Hermite interpolation. Everything here is `no_std` and allocation-light.

pub mod hermite;
pub mod ode;
pub mod quad;
pub mod root;

pub(crate) use libm::{exp, log, sqrt};
