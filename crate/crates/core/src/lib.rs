//! Monomial barrier method for box-constrained convex optimization.
//!
//! The box `l <= x <= u` is handled by adding the penalty
//! `1/(mμ) Σ ((x_i - r_i)/q_i)^μ` (even `μ`, `r` the box center, `q` the
//! half-widths) to the objective. Each outer iteration minimizes the
//! penalized function with damped Newton steps, projects the result onto
//! the box and multiplies `μ` by `τ`. Iterates may leave the box, and the
//! projection frequently lands exactly on the constrained optimum.
//!
//! The crate also provides a logarithmic-barrier interior-point solver over
//! the same Newton machinery, an exact enumeration oracle for small QPs,
//! benchmark generators, and a text problem format.
//!
//! ```
//! use monobar::{solve_mb, BarrierConfig, Bounds, QuadraticProblem, TerminationReason};
//!
//! // f(x) = ½ (x + 3)² on [-1, 1]
//! let p = QuadraticProblem::new([(0, 0, 1.0)], vec![3.0], 4.5, Bounds::uniform(1, -1.0, 1.0)?)?;
//! let report = solve_mb(&p, &[0.0], &BarrierConfig::default())?;
//! assert_eq!(report.termination_reason, TerminationReason::ProjGradMet);
//! assert_eq!(report.x, vec![-1.0]);
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

// Parameter checks are written as `!(x > 0.0)` on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod barrier;
pub mod bench;
pub mod logbarrier;
pub mod mb_solver;
pub mod model;
pub mod newton;
pub mod oracle;
pub mod report;

pub use barrier::{barrier_eval, barrier_eval_scaled, BarrierEval, PenaltyNormalization, ScaledBox, ScaledProblem};
pub use logbarrier::{log_barrier_eval, log_barrier_minimize, solve_ip, LogBarrierConfig};
pub use mb_solver::{predict_outer_iterations, project, solve_mb, BarrierConfig, SolveError};
pub use model::{
    count_active, kkt_report, presolve_fixed, projected_gradient_residual, ActiveSide, Bounds, KktReport, ModelError,
    PresolveResult, Problem, QuadraticProblem,
};
pub use newton::{inner_solve, InnerResult, InnerTermination, InnerTolerances, LineSearchConfig};
pub use oracle::{solve_qp_exact, OracleSolution};
pub use report::{ConfigError, OuterTrace, SolveReport, TerminationReason};
