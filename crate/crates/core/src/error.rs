use alloc::string::String;
use core::fmt;

/// Everything that can go wrong inside the core pipeline.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A cloud must contain at least one point.
    EmptyCloud,
    NonFiniteCoordinate { index: usize },
    NotUnitNormal { index: usize, length: f64 },
    LengthMismatch { what: &'static str, expected: usize, found: usize },
    /// All points coincide, so there is no scale to normalize by.
    DegenerateScale,
    /// The operation needs per-point normals; estimate them first.
    MissingNormals,
    TooFewPoints { needed: usize, found: usize },
    EmptySubset,
    /// A ranking metric needs both classes present.
    SingleClass,
    NoPositives,
    FeatureWidth { expected: usize, found: usize },
    NonFiniteGradient { parameter: String },
    NonFiniteParameter { parameter: String },
    InvalidArgument { name: &'static str, reason: &'static str },
}

impl Error {
    /// True for failures that come from arithmetic (divergence, degenerate
    /// geometry) rather than from bad input data or arguments.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::DegenerateScale | Error::NonFiniteGradient { .. } | Error::NonFiniteParameter { .. }
        )
    }

    pub(crate) fn invalid(name: &'static str, reason: &'static str) -> Self {
        Error::InvalidArgument { name, reason }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::EmptyCloud => write!(f, "point cloud is empty"),
            Error::NonFiniteCoordinate { index } => write!(f, "point {index} has a non-finite coordinate"),
            Error::NotUnitNormal { index, length } => {
                write!(f, "normal {index} has length {length}, expected 1")
            }
            Error::LengthMismatch { what, expected, found } => {
                write!(f, "{what}: expected {expected} entries, found {found}")
            }
            Error::DegenerateScale => write!(f, "all points coincide; cannot normalize"),
            Error::MissingNormals => {
                write!(f, "cloud has no normals; run normal estimation first")
            }
            Error::TooFewPoints { needed, found } => {
                write!(f, "need at least {needed} points, cloud has {found}")
            }
            Error::EmptySubset => write!(f, "k-NN index over an empty point subset"),
            Error::SingleClass => write!(f, "metric undefined: only one class present"),
            Error::NoPositives => write!(f, "metric undefined: no positive labels"),
            Error::FeatureWidth { expected, found } => {
                write!(f, "feature width {found} does not match network input width {expected}")
            }
            Error::NonFiniteGradient { parameter } => {
                write!(f, "non-finite gradient for parameter {parameter}")
            }
            Error::NonFiniteParameter { parameter } => {
                write!(f, "parameter {parameter} became non-finite")
            }
            Error::InvalidArgument { name, reason } => write!(f, "invalid {name}: {reason}"),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
