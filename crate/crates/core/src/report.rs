//! Solver reports shared by the monomial and logarithmic barrier solvers.

use std::fmt;

use thiserror::Error;

use crate::model::{count_active, projected_gradient_residual, PresolveResult, Problem, QuadraticProblem};

/// A configuration value violating its invariant.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid {field}: {reason}")]
pub struct ConfigError {
    pub field: &'static str,
    pub reason: &'static str,
}

impl ConfigError {
    pub fn new(field: &'static str, reason: &'static str) -> Self {
        Self { field, reason }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TerminationReason {
    /// Projected-gradient residual fell below `ε_g`.
    ProjGradMet,
    /// The barrier parameter schedule ran past its limit.
    MuExceeded,
    /// The outer-iteration cap was reached.
    MaxOuter,
    /// An inner solve failed; the report holds the last good projected iterate.
    InnerFailure,
}

impl TerminationReason {
    pub fn as_str(self) -> &'static str {
        match self {
            TerminationReason::ProjGradMet => "projGradMet",
            TerminationReason::MuExceeded => "muExceeded",
            TerminationReason::MaxOuter => "maxOuter",
            TerminationReason::InnerFailure => "innerFailure",
        }
    }

    /// Whether the stop came from a cap rather than convergence or failure.
    pub fn is_cap(self) -> bool {
        matches!(self, TerminationReason::MuExceeded | TerminationReason::MaxOuter)
    }
}

impl fmt::Display for TerminationReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One outer iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct OuterTrace {
    /// `μ_k` for the monomial barrier, `ν_k` for the log barrier.
    pub parameter: f64,
    pub inner_iterations: usize,
    /// Barrier value at the unprojected inner solution.
    pub barrier_value: f64,
    /// Objective at the projected iterate.
    pub f_value: f64,
    /// Projected-gradient residual at the projected iterate.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    /// Final feasible point.
    pub x: Vec<f64>,
    pub f_value: f64,
    pub proj_grad_residual: f64,
    pub outer_iterations: usize,
    pub inner_iterations_total: usize,
    pub active_count: usize,
    pub termination_reason: TerminationReason,
    /// Barrier parameter of the last inner solve.
    pub mu_final: f64,
    pub trace: Vec<OuterTrace>,
    /// Description of the inner failure, if any.
    pub failure: Option<String>,
}

impl SolveReport {
    /// Maps a report on `pre.reduced` back to the original problem; the
    /// point, objective, residual and active count are recomputed there.
    pub fn lift(self, pre: &PresolveResult, original: &QuadraticProblem) -> SolveReport {
        let x = pre.recombine(&self.x);
        SolveReport {
            f_value: original.value(&x),
            proj_grad_residual: projected_gradient_residual(&x, original),
            active_count: count_active(&x, original.bounds()),
            x,
            ..self
        }
    }
}
