use alloc::string::String;

use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Failures of the numerical core.
///
/// Solver failures that still carry a usable iterate are reported through
/// [`crate::solvers::SolverError`] instead.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("bad grid specification: {0}")]
    BadGridSpec(String),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("exponent not admissible at node {node}: value {value} (needs 1 < p(x) < N/3 = {limit})")]
    NonAdmissibleExponent { node: usize, value: f64, limit: f64 },
    #[error("exponent jumps by {jump} between nodes {node} and {neighbor} (Lipschitz proxy allows {allowed})")]
    ContinuityViolation {
        node: usize,
        neighbor: usize,
        jump: f64,
        allowed: f64,
    },
    #[error("derived exponent out of range at node {node}: denominator {denominator}")]
    ExponentOutOfRange { node: usize, denominator: f64 },
    #[error("Luxemburg norm did not converge: {0}")]
    NonConvergence(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("no admissible rho in the candidate grid (best C_rho = {best_c_rho}, needs {required})")]
    NoAdmissibleRho { best_c_rho: f64, required: f64 },
    #[error("no descent found along the ray: J stayed nonnegative over the schedule (last J = {last_energy})")]
    NoDescentFound { last_energy: f64 },
    #[error("no scheduled t gives J(t psi0) < 0 inside the ball")]
    PositivityNotFound,
    #[error("not applicable: {0}")]
    NotApplicable(String),
    #[error("sample is not on the sphere: x_norm = {norm}, rho = {rho}")]
    OffSphere { norm: f64, rho: f64 },
}
