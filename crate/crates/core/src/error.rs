use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("metric degenerate at node {node} (rho = {rho:.6}): eigenvalues ({tangential:e}, {radial:e})")]
    MetricDegenerate {
        node: usize,
        rho: f64,
        tangential: f64,
        radial: f64,
    },

    #[error("grid too coarse: {nodes} nodes (need at least {min})")]
    GridTooCoarse { nodes: usize, min: usize },

    #[error("grid is not uniform: spacing deviates by {deviation:e}")]
    GridNotUniform { deviation: f64 },

    #[error("field has {got} samples but the grid has {expected}")]
    GridMismatch { expected: usize, got: usize },

    #[error("non-finite sample at index {index}")]
    NonFinite { index: usize },

    #[error("node {node} is a boundary node (grid has {nodes} nodes)")]
    BoundaryNode { node: usize, nodes: usize },

    #[error("operator needs complex dimension at least 2, got {n}")]
    DimensionTooSmall { n: usize },

    #[error("operator is not hermitian: symmetrization residual {residual:e}")]
    NonHermitian { residual: f64 },

    #[error("step rejected at t = {time}: {reason}")]
    StepRejected { time: f64, reason: String },

    #[error("trajectory has {len} states, need at least {min}")]
    TrajectoryTooShort { len: usize, min: usize },

    #[error("integrand does not decay at the far boundary (ratio {ratio:e})")]
    NonIntegrable { ratio: f64 },

    #[error("density normalization violated: (4πτ)^(-n)∫u²dV = {value}")]
    NormalizationViolated { value: f64 },

    #[error("minimization did not converge after {iterations} iterations (gradient norm {gradient_norm:e})")]
    NotConverged {
        iterations: usize,
        gradient_norm: f64,
    },

    #[error("rescaled parameter reached τ (s = {s}, τ = {tau})")]
    ChainDomainExceeded { s: f64, tau: f64 },

    #[error("pullback by the gradient flow left the grid at node {node}")]
    PullbackFailure { node: usize },

    #[error("no admissible blow-up points at stored resolution")]
    NoAdmissiblePoints,

    #[error("rescaling window [{start}, {end}] is outside the stored times")]
    WindowOutOfRange { start: f64, end: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
