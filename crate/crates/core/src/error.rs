//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("matrix is not symplectic (residual {residual:.3e})")]
    NotSymplectic { residual: f64 },
    #[error("degenerate spectrum: {reason}")]
    DegenerateSpectrum { reason: String },
    #[error("det(I - P) vanishes within tolerance")]
    SingularIMinusP,
    #[error("integrator step size underflow at s = {s}")]
    IntegratorFailure { s: f64 },
    #[error("resonant spectrum: {reason}")]
    ResonantSpectrum { reason: String },
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("linear map is singular")]
    SingularMap,
    #[error("primitive of a symbol with nonzero s-average is not periodic")]
    NonPeriodicPrimitive,
    #[error("jet order {have} is below the requested expansion order {need}")]
    InsufficientJetOrder { have: usize, need: usize },
    #[error("conjugated frame is inconsistent (residual {residual:.3e})")]
    InconsistentFrame { residual: f64 },
    #[error(
        "resonant divisor at step {step}: monomial {multi_index:?} (order {order}), |1 - exp(theta)| = {divisor:.3e}"
    )]
    ResonantDivisor {
        step: usize,
        multi_index: Vec<u8>,
        order: usize,
        divisor: f64,
    },
    #[error("diagonal monomial {multi_index:?} is not an action monomial")]
    NonActionDiagonal { multi_index: Vec<u8> },
    #[error("truncation exceeded: {reason}")]
    TruncationExceeded { reason: String },
    #[error("normal form lacks p-tilde_{needed}")]
    MissingNormalForm { needed: usize },
    #[error("iterate N = {n} is resonant (|1 - rho^N| = {divisor:.3e})")]
    ResonantIterate { n: i64, divisor: f64 },
    #[error("Vandermonde system ill-conditioned (cond {cond:.3e}); enlarge the window or include negative N")]
    IllConditioned { cond: f64 },
    #[error("peeling left residual {residual:.3e} at a cleared level")]
    InconsistentResidual { residual: f64 },
    #[error("rank deficient system: {null_dim} null directions ({reason})")]
    RankDeficient { null_dim: usize, reason: String },
    #[error("invalid input: {0}")]
    Invalid(String),
}

impl Error {
    /// True for failures caused by the numerics rather than by malformed input.
    pub fn is_numerical(&self) -> bool {
        !matches!(self, Error::Invalid(_) | Error::DimensionMismatch { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
