use alloc::string::String;
use core::fmt;

/// Failure modes shared by every solver stage.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Non-finite or out-of-contract input.
    Input(String),
    /// A numerical routine did not reach its tolerance.
    Numerical {
        what: String,
        tolerance: f64,
        estimate: f64,
    },
    /// The problem data violate a modelling assumption.
    Model(String),
    /// The free-boundary bracket ran past the truncated domain.
    DomainTooSmall { x_hi: f64, last_probe: f64 },
    /// Too many simulated paths produced non-finite states.
    Path { failures: usize, total: usize },
}

pub type Result<T> = core::result::Result<T, Error>;

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn model(msg: impl Into<String>) -> Self {
        Error::Model(msg.into())
    }

    pub(crate) fn numerical(what: impl Into<String>, tolerance: f64, estimate: f64) -> Self {
        Error::Numerical {
            what: what.into(),
            tolerance,
            estimate,
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Input(msg) => write!(f, "invalid input: {msg}"),
            Error::Numerical {
                what,
                tolerance,
                estimate,
            } => write!(
                f,
                "numerical failure in {what}: requested tolerance {tolerance:e}, achieved {estimate:e}"
            ),
            Error::Model(msg) => write!(f, "model error: {msg}"),
            Error::DomainTooSmall { x_hi, last_probe } => write!(
                f,
                "free-boundary bracket reached the grid edge x_hi = {x_hi} (last probe {last_probe}); enlarge the grid"
            ),
            Error::Path { failures, total } => {
                write!(f, "{failures} of {total} simulated paths failed")
            }
        }
    }
}

impl core::error::Error for Error {}
