use thiserror::Error;

pub type Result<T, E = FinslerError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum FinslerError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("unknown symbol `{symbol}` at line {line}, column {column}")]
    UnknownSymbol {
        symbol: String,
        line: usize,
        column: usize,
    },

    #[error("non-smooth point: {reason} (x = {x:?}, y = {y:?})")]
    NonSmoothPoint {
        reason: String,
        x: Vec<f64>,
        y: Vec<f64>,
    },

    #[error(
        "strong convexity fails: smallest eigenvalue {min_eigenvalue:e} (x = {x:?}, y = {y:?})"
    )]
    StrongConvexityViolation {
        min_eigenvalue: f64,
        x: Vec<f64>,
        y: Vec<f64>,
    },

    #[error("F = {value:e} is not positive (x = {x:?}, y = {y:?})")]
    NonPositive {
        value: f64,
        x: Vec<f64>,
        y: Vec<f64>,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("unsupported dimension {0}")]
    UnsupportedDimension(usize),

    #[error("curve left the chart at x = {x:?}")]
    LeftChart { x: Vec<f64> },

    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepFailure { t: f64, h: f64 },

    #[error("transported direction degenerated to zero at t = {t}")]
    DegenerateDirection { t: f64 },

    #[error("invalid convex weights: {0}")]
    BadWeights(String),

    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl FinslerError {
    /// The point of the tangent bundle the error was raised at, if known.
    pub fn point(&self) -> Option<(&[f64], &[f64])> {
        match self {
            FinslerError::NonSmoothPoint { x, y, .. }
            | FinslerError::StrongConvexityViolation { x, y, .. }
            | FinslerError::NonPositive { x, y, .. } => Some((x, y)),
            FinslerError::LeftChart { x } => Some((x, &[])),
            _ => None,
        }
    }

    /// Attaches the evaluation point to errors raised below the point-aware layers.
    pub(crate) fn at_point(self, px: &[f64], py: &[f64]) -> Self {
        match self {
            FinslerError::NonSmoothPoint { reason, x, y } if x.is_empty() && y.is_empty() => {
                FinslerError::NonSmoothPoint {
                    reason,
                    x: px.to_vec(),
                    y: py.to_vec(),
                }
            }
            FinslerError::StrongConvexityViolation {
                min_eigenvalue,
                x,
                y,
            } if x.is_empty() && y.is_empty() => FinslerError::StrongConvexityViolation {
                min_eigenvalue,
                x: px.to_vec(),
                y: py.to_vec(),
            },
            other => other,
        }
    }

    pub(crate) fn non_smooth(reason: impl Into<String>) -> Self {
        FinslerError::NonSmoothPoint {
            reason: reason.into(),
            x: Vec::new(),
            y: Vec::new(),
        }
    }
}
