//! Reference interior-point solver built on the logarithmic barrier
//! `P_l(x; ν) = f(x) - ν Σ [ln(x_i - l_i) + ln(u_i - x_i)]`.
//!
//! Iterates stay strictly inside the box: every line search starts from a
//! step capped by the fraction-to-boundary rule.

use log::debug;
use thiserror::Error;

use crate::barrier::BarrierError;
use crate::mb_solver::{check_start, empty_report, SolveError};
use crate::model::{count_active, projected_gradient_residual, Bounds, Problem, DEFAULT_EPS_G};
use crate::newton::{
    InnerError, InnerResult, InnerTermination, InnerTolerances, LineSearchConfig, NewtonModel, NewtonWorkspace,
    DEFAULT_ETA,
};
use crate::report::{ConfigError, OuterTrace, SolveReport, TerminationReason};

/// Relative distance from a bound that user-supplied starting points are moved to.
pub const INTERIOR_NUDGE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct LogBarrierConfig {
    /// Initial barrier weight `ν_0`.
    pub nu0: f64,
    /// `ν_{k+1} = ν_k / nu_shrink`.
    pub nu_shrink: f64,
    /// The loop stops once `ν` would drop below this.
    pub nu_min: f64,
    /// Convergence additionally requires `ν <= nu_stop`, so that slacks of
    /// active variables (about `ν/|g_i|`) are small enough to count as active.
    pub nu_stop: f64,
    pub eps_g: f64,
    pub max_outer: usize,
    pub eta: f64,
    /// Fraction of the current slack a step may consume.
    pub fraction_to_boundary: f64,
    pub inner: InnerTolerances,
    pub line_search: LineSearchConfig,
}

impl Default for LogBarrierConfig {
    fn default() -> Self {
        Self {
            nu0: 1.0 / 32.0,
            nu_shrink: 2.0,
            nu_min: 2f64.powi(-40),
            nu_stop: 1e-12,
            eps_g: DEFAULT_EPS_G,
            max_outer: 50_000,
            eta: DEFAULT_ETA,
            fraction_to_boundary: 0.995,
            inner: InnerTolerances::default(),
            line_search: LineSearchConfig::default(),
        }
    }
}

impl LogBarrierConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.nu0 > 0.0 && self.nu0.is_finite()) {
            return Err(ConfigError::new("nu0", "must be positive and finite"));
        }
        if !(self.nu_shrink > 1.0 && self.nu_shrink.is_finite()) {
            return Err(ConfigError::new("nu_shrink", "must exceed 1"));
        }
        if !(self.nu_min > 0.0 && self.nu_min <= self.nu0) {
            return Err(ConfigError::new("nu_min", "must lie in (0, nu0]"));
        }
        if !(self.nu_stop >= 0.0) {
            return Err(ConfigError::new("nu_stop", "must be nonnegative"));
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
        if !(self.fraction_to_boundary > 0.0 && self.fraction_to_boundary < 1.0) {
            return Err(ConfigError::new("fraction_to_boundary", "must lie in (0, 1)"));
        }
        self.inner.validate()?;
        self.line_search.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("point is not strictly inside the box at index {index}")]
pub struct DomainError {
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogBarrierEval {
    pub value: f64,
    pub gradient: Vec<f64>,
    /// Diagonal added to `∇²f`: `ν [1/(x-l)² + 1/(u-x)²]`.
    pub hess_diag: Vec<f64>,
}

fn first_non_interior(x: &[f64], bounds: &Bounds) -> Option<usize> {
    x.iter()
        .zip(bounds.lower().iter().zip(bounds.upper()))
        .position(|(xi, (l, u))| !(xi - l > 0.0 && u - xi > 0.0))
}

/// Barrier term and its derivatives; `grad` and `diag` receive only the barrier parts.
fn log_terms(x: &[f64], nu: f64, bounds: &Bounds, grad: &mut [f64], diag: &mut [f64]) -> f64 {
    let mut sum = 0.0;
    for i in 0..x.len() {
        let sl = x[i] - bounds.lower()[i];
        let su = bounds.upper()[i] - x[i];
        sum += sl.ln() + su.ln();
        grad[i] = -nu * (1.0 / sl - 1.0 / su);
        diag[i] = nu * (1.0 / (sl * sl) + 1.0 / (su * su));
    }
    -nu * sum
}

pub fn log_barrier_eval<P: Problem + ?Sized>(x: &[f64], nu: f64, p: &P) -> Result<LogBarrierEval, DomainError> {
    let bounds = p.bounds();
    if let Some(index) = first_non_interior(x, bounds) {
        return Err(DomainError { index });
    }
    let mut gradient = vec![0.0; x.len()];
    let mut hess_diag = vec![0.0; x.len()];
    let mut fgrad = vec![0.0; x.len()];
    let term = log_terms(x, nu, bounds, &mut gradient, &mut hess_diag);
    p.gradient(x, &mut fgrad);
    for (g, fg) in gradient.iter_mut().zip(&fgrad) {
        *g += fg;
    }
    Ok(LogBarrierEval {
        value: p.value(x) + term,
        gradient,
        hess_diag,
    })
}

struct LogModel<'a, P: ?Sized> {
    problem: &'a P,
    nu: f64,
    fraction_to_boundary: f64,
    scratch: Vec<f64>,
}

impl<P: Problem + ?Sized> NewtonModel for LogModel<'_, P> {
    fn value(&mut self, x: &[f64]) -> f64 {
        let bounds = self.problem.bounds();
        if first_non_interior(x, bounds).is_some() {
            return f64::INFINITY;
        }
        let logs: f64 = x
            .iter()
            .zip(bounds.lower().iter().zip(bounds.upper()))
            .map(|(xi, (l, u))| (xi - l).ln() + (u - xi).ln())
            .sum();
        self.problem.value(x) - self.nu * logs
    }

    fn evaluate(&mut self, x: &[f64], grad: &mut [f64], diag: &mut [f64]) -> f64 {
        let bounds = self.problem.bounds();
        if first_non_interior(x, bounds).is_some() {
            return f64::INFINITY;
        }
        let term = log_terms(x, self.nu, bounds, &mut self.scratch, diag);
        self.problem.gradient(x, grad);
        for (g, b) in grad.iter_mut().zip(&self.scratch) {
            *g += b;
        }
        self.problem.value(x) + term
    }

    fn max_step(&self, x: &[f64], p: &[f64]) -> f64 {
        let bounds = self.problem.bounds();
        let mut alpha = f64::INFINITY;
        for i in 0..x.len() {
            let slack = if p[i] < 0.0 {
                x[i] - bounds.lower()[i]
            } else if p[i] > 0.0 {
                bounds.upper()[i] - x[i]
            } else {
                continue;
            };
            alpha = alpha.min(self.fraction_to_boundary * slack / p[i].abs());
        }
        alpha
    }
}

/// Moves `x0` at least `INTERIOR_NUDGE · q_i` inside each bound.
pub fn interior_start(x0: &[f64], bounds: &Bounds) -> Vec<f64> {
    x0.iter()
        .zip(bounds.lower().iter().zip(bounds.upper()))
        .map(|(&x, (&l, &u))| {
            let pad = INTERIOR_NUDGE * 0.5 * (u - l);
            x.clamp(l + pad, u - pad)
        })
        .collect()
}

fn require_open_box(bounds: &Bounds) -> Result<(), BarrierError> {
    match bounds.lower().iter().zip(bounds.upper()).position(|(l, u)| !(u > l)) {
        Some(index) => Err(BarrierError::Degenerate { index }),
        None => Ok(()),
    }
}

/// Approximately minimizes `P_l(·; ν)` from a strictly interior `x0`.
pub fn log_barrier_minimize<P: Problem + ?Sized>(
    p: &P,
    x0: &[f64],
    nu: f64,
    cfg: &LogBarrierConfig,
) -> Result<InnerResult, InnerError> {
    let mut workspace = NewtonWorkspace::new(p);
    minimize_at(&mut workspace, p, x0, nu, cfg)
}

fn minimize_at<P: Problem + ?Sized>(
    workspace: &mut NewtonWorkspace,
    p: &P,
    x0: &[f64],
    nu: f64,
    cfg: &LogBarrierConfig,
) -> Result<InnerResult, InnerError> {
    let mut model = LogModel {
        problem: p,
        nu,
        fraction_to_boundary: cfg.fraction_to_boundary,
        scratch: vec![0.0; p.dim()],
    };
    workspace.minimize(&mut model, p, x0, &cfg.inner, &cfg.line_search, cfg.eta)
}

/// Runs the log-barrier method. A starting point on or outside the
/// boundary is first moved inside by [`interior_start`].
pub fn solve_ip<P: Problem + ?Sized>(p: &P, x0: &[f64], cfg: &LogBarrierConfig) -> Result<SolveReport, SolveError> {
    cfg.validate()?;
    let bounds = p.bounds();
    check_start(x0, bounds.dim())?;
    if bounds.dim() == 0 {
        return Ok(empty_report(p));
    }
    require_open_box(bounds)?;
    let mut workspace = NewtonWorkspace::new(p);

    let mut x = interior_start(x0, bounds);
    let mut best = x.clone();
    let mut nu = cfg.nu0;
    let mut trace = Vec::new();
    let mut inner_total = 0;
    let mut failure = None;

    let reason = loop {
        if trace.len() == cfg.max_outer {
            break TerminationReason::MaxOuter;
        }
        let inner = match minimize_at(&mut workspace, p, &x, nu, cfg) {
            Ok(r) => r,
            Err(e) => {
                failure = Some(e.to_string());
                break TerminationReason::InnerFailure;
            }
        };
        inner_total += inner.inner_iterations;
        let residual = projected_gradient_residual(&inner.x, p);
        trace.push(OuterTrace {
            parameter: nu,
            inner_iterations: inner.inner_iterations,
            barrier_value: inner.value,
            f_value: p.value(&inner.x),
            residual,
        });
        debug!(
            "outer {}: nu={:.3e} inner={} ({:?}) residual={:.3e}",
            trace.len(),
            nu,
            inner.inner_iterations,
            inner.reason,
            residual
        );
        best.clone_from(&inner.x);
        if inner.reason == InnerTermination::LineSearchFailed {
            failure = Some(format!("line search failed at nu = {nu:e}"));
            break TerminationReason::InnerFailure;
        }
        x = inner.x;
        if residual < cfg.eps_g && nu <= cfg.nu_stop {
            break TerminationReason::ProjGradMet;
        }
        let next = nu / cfg.nu_shrink;
        if next < cfg.nu_min {
            break TerminationReason::MuExceeded;
        }
        nu = next;
    };

    Ok(SolveReport {
        f_value: p.value(&best),
        proj_grad_residual: projected_gradient_residual(&best, p),
        active_count: count_active(&best, bounds),
        x: best,
        outer_iterations: trace.len(),
        inner_iterations_total: inner_total,
        termination_reason: reason,
        mu_final: nu,
        trace,
        failure,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::QuadraticProblem;

    fn offset_qp() -> QuadraticProblem {
        QuadraticProblem::new(
            [(0, 0, 1.0), (1, 1, 1.0)],
            vec![2.0, 0.0],
            2.0,
            Bounds::uniform(2, -1.0, 1.0).unwrap(),
        )
        .unwrap()
    }

    fn tight() -> LogBarrierConfig {
        LogBarrierConfig {
            inner: InnerTolerances {
                eps_grad_p: 1e-13,
                eps_p: 1e-300,
                eps_x: 1e-300,
                max_inner: 500,
            },
            ..Default::default()
        }
    }

    #[test]
    fn center_has_no_barrier_gradient() {
        let zero = QuadraticProblem::new([], vec![0.0; 3], 0.0, Bounds::uniform(3, -1.0, 1.0).unwrap()).unwrap();
        let e = log_barrier_eval(&[0.0; 3], 0.7, &zero).unwrap();
        assert_eq!(e.value, 0.0);
        assert_eq!(e.gradient, vec![0.0; 3]);
        assert_eq!(e.hess_diag, vec![1.4; 3]);
    }

    #[test]
    fn rejects_non_interior_points() {
        let p = offset_qp();
        assert_eq!(log_barrier_eval(&[-1.0, 0.0], 0.1, &p).unwrap_err().index, 0);
        assert_eq!(log_barrier_eval(&[0.0, 2.0], 0.1, &p).unwrap_err().index, 1);
    }

    #[test]
    fn offset_qp_central_path_points() {
        let p = offset_qp();
        let r = log_barrier_minimize(&p, &[0.0, 0.0], 1.0 / 8.0, &tight()).unwrap();
        // root of x + 2 = ν [1/(1+x) - 1/(1-x)]
        assert!((r.x[0] + 0.893_400_907_536_166).abs() < 1e-12, "{:?}", r.x);
        assert!(r.x[1].abs() < 1e-12);
        let r = log_barrier_minimize(&p, &r.x, 1.0 / 1024.0, &tight()).unwrap();
        assert!((r.x[0] + 0.999_024_864_761_251).abs() < 1e-12, "{:?}", r.x);
    }

    #[test]
    fn boundary_start_is_nudged() {
        let b = Bounds::uniform(2, -1.0, 1.0).unwrap();
        assert_eq!(interior_start(&[-1.0, 5.0], &b), vec![-0.999, 0.999]);
        assert_eq!(interior_start(&[0.2, 0.0], &b), vec![0.2, 0.0]);
    }

    #[test]
    fn offset_qp_full_solve() {
        let r = solve_ip(&offset_qp(), &[-1.0, 1.0], &LogBarrierConfig::default()).unwrap();
        assert_eq!(r.termination_reason, TerminationReason::ProjGradMet);
        assert!((r.f_value - 0.5).abs() < 1e-9);
        assert_eq!(r.active_count, 1);
        assert!(r.x.iter().all(|v| v.abs() < 1.0));
    }

    #[test]
    fn interior_minimizer() {
        let p = QuadraticProblem::new(
            [(0, 0, 2.0), (1, 0, 0.5), (1, 1, 1.0)],
            vec![-0.2, 0.1],
            0.0,
            Bounds::uniform(2, -1.0, 1.0).unwrap(),
        )
        .unwrap();
        let r = solve_ip(&p, &[0.0, 0.0], &LogBarrierConfig::default()).unwrap();
        // H x = -b: [2 .5; .5 1] x = (0.2, -0.1)
        let det = 2.0 - 0.25;
        let x = [(0.2 - 0.5 * -0.1) / det, (2.0 * -0.1 - 0.5 * 0.2) / det];
        // the default inner tolerance leaves ‖∇f‖ up to 1e-4 at a free point
        assert!((r.x[0] - x[0]).abs() < 1e-4 && (r.x[1] - x[1]).abs() < 1e-4);
        assert!(r.proj_grad_residual < 1e-4);
        assert!((r.f_value - p.value(&x)).abs() < 1e-8);
    }

    #[test]
    fn config_validation() {
        assert!(LogBarrierConfig::default().validate().is_ok());
        let bad = LogBarrierConfig {
            nu_shrink: 1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
