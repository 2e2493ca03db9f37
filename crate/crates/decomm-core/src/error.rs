use alloc::string::String;
use core::fmt;

/// Errors raised by the planners and kernels.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    InvalidState { agent: usize, index: usize },
    InvalidAction { agent: usize, index: usize },
    /// A step count of zero, or a window running past the horizon.
    InvalidSteps { t: usize, n: usize, horizon: usize },
    /// Tree rooted somewhere other than the queried state, or otherwise malformed.
    MalformedTree(String),
    /// The branch-and-bound search created more nodes than allowed.
    NodeBudget { budget: usize },
    /// Expected meeting time is infinite (a success probability of zero).
    Divergent,
    MissingTimeStamp,
    MissingNoop { agent: usize },
    Invalid(String),
}

pub type Result<T> = core::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidState { agent, index } => {
                write!(f, "agent {} has no local state {}", agent + 1, index)
            }
            Error::InvalidAction { agent, index } => {
                write!(f, "agent {} has no action {}", agent + 1, index)
            }
            Error::InvalidSteps { t, n, horizon } => write!(
                f,
                "window of {} steps from t={} does not fit horizon {}",
                n, t, horizon
            ),
            Error::MalformedTree(msg) => write!(f, "malformed policy tree: {}", msg),
            Error::NodeBudget { budget } => {
                write!(f, "search exceeded node budget of {} nodes", budget)
            }
            Error::Divergent => write!(f, "expected cost diverges (success probability is zero)"),
            Error::MissingTimeStamp => write!(f, "state carries no time stamp"),
            Error::MissingNoop { agent } => {
                write!(f, "agent {} has no designated no-op action", agent + 1)
            }
            Error::Invalid(msg) => f.write_str(msg),
        }
    }
}

#[cfg(feature = "std")]
extern crate std;

#[cfg(feature = "std")]
impl std::error::Error for Error {}
