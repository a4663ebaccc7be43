use crate::exponential_family::ActivationKind;

/// Errors shared by every module in the crate.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    /// A matrix expected to have full column rank does not.
    #[error("rank-deficient matrix: numerical rank {rank}, expected {cols}")]
    RankDeficient { rank: usize, cols: usize },

    /// Cholesky pivot fell below the relative threshold.
    #[error("matrix not positive definite: pivot {pivot:e} at index {index}")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    /// Natural parameter outside the admissible domain of the kind.
    #[error("theta = {theta} outside the domain of {kind}{}", coord.map(|i| format!(" at coordinate {i}")).unwrap_or_default())]
    DomainViolation {
        kind: ActivationKind,
        theta: f64,
        coord: Option<usize>,
    },

    /// NaN/Inf or a shape mismatch in caller-supplied data.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Truncation interval with lo >= hi.
    #[error("empty interval: lo = {lo}, hi = {hi}")]
    EmptyInterval { lo: f64, hi: f64 },

    /// Chain state sits on the support boundary, so no feasible open segment exists.
    #[error("state on support boundary: coordinate {coord} = {value}")]
    BoundaryState { coord: usize, value: f64 },

    /// Chain start point off the manifold or outside the open support.
    #[error("infeasible chain start: {0}")]
    InfeasibleStart(String),

    /// Conditional-mean quadrature not applicable to this instance.
    #[error("oracle unavailable: {0}")]
    OracleUnavailable(String),

    /// Forward-pass value outside a layer's support or parameter domain.
    #[error("support violation at layer {layer}: coordinate {coord} = {value}")]
    SupportViolation {
        layer: usize,
        coord: usize,
        value: f64,
    },

    /// A backward-path saddle solve failed to converge.
    #[error("reconstruction infeasible at layer {layer}: residual {residual:e}")]
    ReconstructionInfeasible { layer: usize, residual: f64 },

    /// Training loss became non-finite.
    #[error("training diverged at epoch {epoch}")]
    TrainingDiverged { epoch: usize },

    /// Model file failed to parse.
    #[error("malformed model data: {0}")]
    MalformedModel(String),
}

pub type Result<T> = std::result::Result<T, Error>;
