use thiserror::Error;

use crate::asymptotics::RateCurve;
use crate::lattice::Point;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LatticeError {
    #[error("dimension {0} is not supported (expected 1..=4)")]
    Dimension(usize),
    #[error("coordinate {0} exceeds the supported range")]
    CoordinateOverflow(i64),
    #[error("box radius must be positive")]
    EmptyBox,
    #[error("{0} and {1} are not nearest neighbours")]
    NotAnEdge(Point, Point),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Lattice(#[from] LatticeError),

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("{point} lies within the boundary margin of the box (usable radius {usable})")]
    Margin { point: Point, usable: i64 },

    #[error("no giant-cluster site within ℓ1 distance {radius} of {point}")]
    NoAnchor { point: Point, radius: u64 },

    #[error("source {0} has no open incident edge")]
    DisconnectedSource(Point),

    #[error("fixed-point iteration stopped after {0} iterations without reaching tolerance")]
    NotConverged(usize),

    #[error("α−λ is still increasing at λ = {}; the point is likely outside the effective domain", .0.lambda_grid.last().copied().unwrap_or(f64::NAN))]
    DomainBoundary(Box<RateCurve>),

    #[error("invalid {field}: {message}")]
    Invalid { field: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("config: {0}")]
    Config(String),

    #[error("report: {0}")]
    Report(String),

    #[error("{0} oracle checks failed")]
    SelfTest(usize),
}

impl Error {
    pub fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Invalid {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Process exit status used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Invalid { .. } | Error::Config(_) | Error::Lattice(_) => 2,
            Error::Resource(_) => 3,
            Error::Margin { .. } | Error::NoAnchor { .. } => 4,
            Error::DomainBoundary(_) => 5,
            _ => 1,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
