use thiserror::Error;

/// Failure categories surfaced by every operation in the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unknown function `{0}`")]
    UnknownFunction(String),

    #[error("unknown distribution `{0}`")]
    UnknownDistribution(String),

    /// The requested operation is outside what the target or family certifies.
    #[error("capability: {0}")]
    Capability(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("degenerate stencil: nodes {first} and {second} coincide within tolerance")]
    DegenerateStencil { first: f64, second: f64 },

    #[error("insufficient nodes: order {order} needs {needed} nodes, got {available}")]
    InsufficientNodes {
        order: usize,
        needed: usize,
        available: usize,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(ShortfallReport),

    /// The window probability is zero, so no sample size gives a guarantee.
    #[error("no guarantee: window probability must be positive")]
    NoGuarantee,

    #[error("divergent bound: tail exponent must exceed 1, got {0}")]
    DivergentBound(f64),

    #[error("did not converge: {0}")]
    Nonconvergence(String),

    #[error("i/o: {0}")]
    Io(String),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Capability(_) | Error::NoGuarantee | Error::DivergentBound(_) => 3,
            Error::Nonconvergence(_) => 4,
            _ => 2,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Config(e.to_string())
    }
}

/// Per-order account of how many distinct in-window nodes were available.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ShortfallReport {
    pub distinct_total: usize,
    pub per_order: Vec<OrderShortfall>,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct OrderShortfall {
    pub order: usize,
    pub needed: usize,
    pub available: usize,
}

impl std::fmt::Display for ShortfallReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} distinct x values", self.distinct_total)?;
        for s in self.per_order.iter().filter(|s| s.available < s.needed) {
            write!(
                f,
                "; order {} needs {} has {}",
                s.order, s.needed, s.available
            )?;
        }
        Ok(())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
