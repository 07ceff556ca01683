//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("syntax error at byte {offset}: expected {expected}")]
    Syntax { offset: usize, expected: String },
    #[error("unknown function `{name}` at byte {offset}")]
    UnknownFunction { name: String, offset: usize },
    #[error("unknown variable `{name}`")]
    UnknownVariable { name: String },
    #[error("domain error in `{subexpr}`: {reason}")]
    Domain { subexpr: String, reason: String },
    #[error("singular Hessian (condition number {cond:.3e} above threshold)")]
    SingularHessian { cond: f64 },
    #[error("singular metric at a degenerate point")]
    SingularMetric,
    #[error("no transition from chart `{src}` to chart `{dst}`")]
    NoTransition { src: String, dst: String },
    #[error("point outside the declared overlap of `{src}` -> `{dst}`")]
    OutsideOverlap { src: String, dst: String },
    #[error("mapped point not representable in destination chart `{dst}`")]
    ReexpressionFailure { dst: String },
    #[error("points are not covered by a common chart")]
    ChartMismatch,
    #[error("continuation stalled (step below {min_step:.3e})")]
    ContinuationStall { min_step: f64 },
    #[error("continuation left the chart domain before producing samples")]
    LeftDomain,
    #[error("Newton iteration did not converge from seed {seed:?}")]
    NoConvergence { seed: Vec<f64> },
    #[error("point does not lie on the curve (residual {residual:.3e})")]
    PointNotOnCurve { residual: f64 },
    #[error("point does not lie on the submanifold (residual {residual:.3e})")]
    PointNotOnS { residual: f64 },
    #[error("p and q are not joined by an e-curve with the given direction (residual {residual:.3e})")]
    NotOnECurve { residual: f64 },
    #[error("q and r are not joined by an m-curve with the given direction (residual {residual:.3e})")]
    NotOnMCurve { residual: f64 },
    #[error("chart `{name}` not found in model")]
    UnknownChart { name: String },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("zero direction vector")]
    ZeroDirection,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
