use thiserror::Error;

pub type Result<T> = std::result::Result<T, StaffingError>;

/// Errors raised by the evaluators and solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum StaffingError {
    #[error("invalid input `{field}`: {reason}")]
    Domain { field: &'static str, reason: String },

    #[error("unstable system: lambda = {lambda} is not below n = {n}")]
    Unstable { n: f64, lambda: f64 },

    #[error(
        "quadrature did not converge for n = {n}, lambda = {lambda}: \
         {intervals} subintervals, estimated error {error_estimate:e}"
    )]
    Quadrature {
        n: f64,
        lambda: f64,
        intervals: usize,
        error_estimate: f64,
    },

    #[error("could not bracket a root for target {target} below beta = {beta_max}")]
    Bracket { target: f64, beta_max: f64 },

    #[error("no convergence after {evaluations} evaluations (residual {residual:e})")]
    NonConvergence { evaluations: usize, residual: f64 },

    #[error(
        "tail probability {tail} equals epsilon {epsilon}; key-scenario selection \
         requires strict inequalities on both sides of the key"
    )]
    KeyBoundary { tail: f64, epsilon: f64 },

    #[error("key {key:?} is infeasible: best attainable no-wait probability {best} < {target}")]
    InfeasibleKey {
        key: Vec<usize>,
        best: f64,
        target: f64,
    },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("enumeration of {candidates} candidates exceeds the cap of {cap}")]
    EnumerationCap { candidates: usize, cap: usize },

    #[error("validation failed at {pointer}: {reason}")]
    Validation { pointer: String, reason: String },
}

impl StaffingError {
    pub(crate) fn domain(field: &'static str, reason: impl Into<String>) -> Self {
        StaffingError::Domain {
            field,
            reason: reason.into(),
        }
    }

    pub(crate) fn validation(pointer: impl Into<String>, reason: impl Into<String>) -> Self {
        StaffingError::Validation {
            pointer: pointer.into(),
            reason: reason.into(),
        }
    }

    /// True for errors that mean "no feasible staffing exists" rather than a
    /// numerical or input problem.
    pub fn is_infeasibility(&self) -> bool {
        matches!(
            self,
            StaffingError::Infeasible(_) | StaffingError::InfeasibleKey { .. }
        )
    }

    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            StaffingError::Domain { .. }
                | StaffingError::Validation { .. }
                | StaffingError::KeyBoundary { .. }
                | StaffingError::Unstable { .. }
        )
    }
}
