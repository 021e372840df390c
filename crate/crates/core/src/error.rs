use thiserror::Error;

/// Errors raised by the numerical pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("root finder did not converge at t = {t} after {iterations} iterations")]
    RootNotConverged { t: f64, iterations: usize },

    #[error("exponent out of range at t = {t}: n*t = {nt} exceeds the supported range; rescale t before evaluating")]
    Overflow { t: f64, nt: f64 },

    #[error("invariant violated at node {node} (t = {t}): {what}")]
    Invariant { node: usize, t: f64, what: String },

    #[error("epsilon too large: glued form is not positive at node {node} (t = {t}, u = {u}, u_t = {u_t})")]
    EpsilonTooLarge { node: usize, t: f64, u: f64, u_t: f64 },

    #[error("perturbed form left the Kähler cone at node {node} (t = {t})")]
    LeftKahlerCone { node: usize, t: f64 },

    #[error("singular or ill-conditioned system (condition estimate {condition:e})")]
    Singular { condition: f64 },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("sampling failed: {0}")]
    Sampling(String),

    #[error("newton solve did not converge")]
    NotConverged,
}

pub type Result<T> = std::result::Result<T, Error>;
