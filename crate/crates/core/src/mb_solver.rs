//! The monomial-barrier outer loop: solve `P(·; μ_k)`, project onto the box,
//! test the projected gradient, multiply `μ` by `τ` and warm-start again.

use log::debug;
use thiserror::Error;

use crate::barrier::{BarrierError, PenaltyNormalization, ScaledBox};
use crate::model::{count_active, projected_gradient_residual, Problem, DEFAULT_EPS_G};
use crate::newton::{InnerTermination, InnerTolerances, LineSearchConfig, NewtonWorkspace, DEFAULT_ETA};
use crate::report::{ConfigError, OuterTrace, SolveReport, TerminationReason};

pub use crate::model::project;

#[derive(Debug, Clone, PartialEq)]
pub struct BarrierConfig {
    /// Initial exponent `μ_0`; even and at least 2.
    pub mu0: u64,
    /// The loop stops once `μ_{k+1}` would exceed this.
    pub mu_max: f64,
    /// Integer multiplier `τ >= 2`.
    pub tau: u64,
    /// Projected-gradient tolerance; convergence requires a residual strictly below it.
    pub eps_g: f64,
    pub max_outer: usize,
    /// Diagonal regularization of the Newton system.
    pub eta: f64,
    pub inner: InnerTolerances,
    pub line_search: LineSearchConfig,
    pub normalization: PenaltyNormalization,
}

impl Default for BarrierConfig {
    fn default() -> Self {
        Self {
            mu0: 32,
            mu_max: 2f64.powi(40),
            tau: 2,
            eps_g: DEFAULT_EPS_G,
            max_outer: 50_000,
            eta: DEFAULT_ETA,
            inner: InnerTolerances::default(),
            line_search: LineSearchConfig::default(),
            normalization: PenaltyNormalization::default(),
        }
    }
}

impl BarrierConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.mu0 < 2 || !self.mu0.is_multiple_of(2) {
            return Err(ConfigError::new("mu0", "must be an even integer >= 2"));
        }
        if self.tau < 2 {
            return Err(ConfigError::new("tau", "must be an integer >= 2"));
        }
        if !(self.mu_max >= self.mu0 as f64) {
            return Err(ConfigError::new("mu_max", "must be at least mu0"));
        }
        if !(self.eps_g >= 0.0 && self.eps_g.is_finite()) {
            return Err(ConfigError::new("eps_g", "must be nonnegative and finite"));
        }
        if self.max_outer == 0 {
            return Err(ConfigError::new("max_outer", "must be positive"));
        }
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(ConfigError::new("eta", "must be nonnegative and finite"));
        }
        self.inner.validate()?;
        self.line_search.validate()
    }
}

/// Errors that prevent a solve from starting.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Barrier(#[from] BarrierError),
    #[error("starting point has length {got}, problem has {expected} variables")]
    Dimension { expected: usize, got: usize },
    #[error("starting point has a non-finite entry at index {index}")]
    NonFiniteStart { index: usize },
}

pub(crate) fn check_start(x0: &[f64], dim: usize) -> Result<(), SolveError> {
    if x0.len() != dim {
        return Err(SolveError::Dimension {
            expected: dim,
            got: x0.len(),
        });
    }
    if let Some(index) = x0.iter().position(|v| !v.is_finite()) {
        return Err(SolveError::NonFiniteStart { index });
    }
    Ok(())
}

/// Report for a problem with no variables.
pub(crate) fn empty_report<P: Problem + ?Sized>(p: &P) -> SolveReport {
    SolveReport {
        x: Vec::new(),
        f_value: p.value(&[]),
        proj_grad_residual: 0.0,
        outer_iterations: 0,
        inner_iterations_total: 0,
        active_count: 0,
        termination_reason: TerminationReason::ProjGradMet,
        mu_final: 0.0,
        trace: Vec::new(),
        failure: None,
    }
}

/// Runs the monomial-barrier method from `x0` (which need not be feasible).
pub fn solve_mb<P: Problem + ?Sized>(p: &P, x0: &[f64], cfg: &BarrierConfig) -> Result<SolveReport, SolveError> {
    cfg.validate()?;
    let bounds = p.bounds();
    check_start(x0, bounds.dim())?;
    if bounds.dim() == 0 {
        return Ok(empty_report(p));
    }
    let sb = ScaledBox::with_normalization(bounds, cfg.normalization)?;
    let mut workspace = NewtonWorkspace::new(p);

    let mut x = x0.to_vec();
    let mut best = project(x0, bounds);
    let mut mu = cfg.mu0;
    let mut trace = Vec::new();
    let mut inner_total = 0;
    let mut failure = None;

    let reason = loop {
        if trace.len() == cfg.max_outer {
            break TerminationReason::MaxOuter;
        }
        let inner = match workspace.inner_solve(&x, mu, p, &sb, &cfg.inner, &cfg.line_search, cfg.eta) {
            Ok(r) => r,
            Err(e) => {
                failure = Some(e.to_string());
                break TerminationReason::InnerFailure;
            }
        };
        inner_total += inner.inner_iterations;
        let projected = project(&inner.x, bounds);
        let residual = projected_gradient_residual(&projected, p);
        trace.push(OuterTrace {
            parameter: mu as f64,
            inner_iterations: inner.inner_iterations,
            barrier_value: inner.value,
            f_value: p.value(&projected),
            residual,
        });
        debug!(
            "outer {}: mu={} inner={} ({:?}) residual={:.3e}",
            trace.len(),
            mu,
            inner.inner_iterations,
            inner.reason,
            residual
        );
        best.clone_from(&projected);
        if inner.reason == InnerTermination::LineSearchFailed {
            failure = Some(format!("line search failed at mu = {mu}"));
            break TerminationReason::InnerFailure;
        }
        x = projected;
        if residual < cfg.eps_g {
            break TerminationReason::ProjGradMet;
        }
        match mu.checked_mul(cfg.tau) {
            Some(next) if next as f64 <= cfg.mu_max => mu = next,
            _ => break TerminationReason::MuExceeded,
        }
    };

    Ok(SolveReport {
        f_value: p.value(&best),
        proj_grad_residual: projected_gradient_residual(&best, p),
        active_count: count_active(&best, bounds),
        x: best,
        outer_iterations: trace.len(),
        inner_iterations_total: inner_total,
        termination_reason: reason,
        mu_final: mu as f64,
        trace,
        failure,
    })
}

/// Number of outer iterations `n` after which the penalty bound `2/(τⁿ μ_0)`
/// drops below `eps_f`: zero when `eps_f >= 2/μ_0`, otherwise the smallest `n`
/// with `τⁿ μ_0 eps_f > 2`.
pub fn predict_outer_iterations(mu0: u64, tau: u64, eps_f: f64) -> Result<u32, ConfigError> {
    if mu0 < 2 || !mu0.is_multiple_of(2) {
        return Err(ConfigError::new("mu0", "must be an even integer >= 2"));
    }
    if tau < 2 {
        return Err(ConfigError::new("tau", "must be an integer >= 2"));
    }
    if !(eps_f > 0.0 && eps_f < 1.0) {
        return Err(ConfigError::new("eps_f", "must lie in (0, 1)"));
    }
    let mut scaled = mu0 as f64 * eps_f;
    if scaled >= 2.0 {
        return Ok(0);
    }
    let mut n = 0;
    while scaled <= 2.0 {
        scaled *= tau as f64;
        n += 1;
    }
    Ok(n)
}
