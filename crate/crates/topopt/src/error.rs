//! Unified error type shared by every fallible operation in the crate.

use std::fmt;

/// Errors produced by mesh construction, assembly, solves, filtering,
/// optimization updates, and the command-line front end.
#[derive(Debug, Clone)]
pub enum TopoError {
    /// An argument violated a constructor or operation precondition.
    InvalidArgument(String),
    /// A value left its mathematical domain (e.g. a density outside [0, 1]).
    Domain(String),
    /// Problem/mesh/config mismatch: empty load mask, box mismatch, bad key.
    Configuration(String),
    /// An iterative solver ran out of its iteration budget.
    SolverDivergence { residual: f64, iterations: usize },
    /// The system matrix is not symmetric positive definite where it must be.
    NotSpd(String),
    /// The optimizer (OC bisection, MMA subproblem) failed to produce a step.
    Optimizer(String),
    /// An I/O failure, wrapped with file/path context.
    Io(String),
    /// An inner error annotated with the outer-loop iteration it occurred in.
    AtIteration {
        iteration: usize,
        source: Box<TopoError>,
    },
}

impl fmt::Display for TopoError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TopoError::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            TopoError::Domain(msg) => write!(f, "domain error: {msg}"),
            TopoError::Configuration(msg) => write!(f, "configuration error: {msg}"),
            TopoError::SolverDivergence {
                residual,
                iterations,
            } => write!(
                f,
                "solver failed to converge after {iterations} iterations \
                 (relative residual {residual:.3e})"
            ),
            TopoError::NotSpd(msg) => write!(f, "matrix not positive definite: {msg}"),
            TopoError::Optimizer(msg) => write!(f, "optimizer error: {msg}"),
            TopoError::Io(msg) => write!(f, "i/o error: {msg}"),
            TopoError::AtIteration { iteration, source } => {
                write!(f, "iteration {iteration}: {source}")
            }
        }
    }
}

impl std::error::Error for TopoError {}

impl From<std::io::Error> for TopoError {
    fn from(err: std::io::Error) -> Self {
        TopoError::Io(err.to_string())
    }
}

impl TopoError {
    /// Wrap an error with the outer-loop iteration index it surfaced in.
    pub fn at_iteration(self, iteration: usize) -> Self {
        TopoError::AtIteration {
            iteration,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, TopoError>;
