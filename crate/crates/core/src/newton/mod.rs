//! Inner iterations: damped Newton steps on a fixed barrier subproblem.
//!
//! The Newton system `(∇²f + D + ηI) p = -∇P` is solved with a sparse
//! Cholesky factorization whose symbolic analysis is computed once per
//! problem and reused for every inner and outer iteration. Steps are damped
//! by Armijo backtracking.

pub mod cholesky;

use log::trace;
use thiserror::Error;

use crate::barrier::{barrier_value, penalty_terms, ScaledBox};
use crate::model::{dot, norm_inf, Problem};
use crate::report::ConfigError;

pub use cholesky::{CholeskyFactor, FactorError, Ordering, SymbolicCholesky};

/// Default diagonal regularization added before every factorization.
pub const DEFAULT_ETA: f64 = 1e-15;
/// Upper end of the regularization ladder used after a failed factorization.
pub const ETA_CEILING: f64 = 1e-8;
/// Number of doublings tried before giving up on a factorization.
pub const ETA_RETRIES: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchConfig {
    /// Shrink factor applied after each rejected trial.
    pub rho: f64,
    /// Sufficient-decrease constant.
    pub c: f64,
    pub max_backtracks: usize,
}

impl Default for LineSearchConfig {
    fn default() -> Self {
        Self {
            rho: 0.5,
            c: 1e-4,
            max_backtracks: 60,
        }
    }
}

impl LineSearchConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(ConfigError::new("rho", "must lie in (0, 1)"));
        }
        if !(self.c > 0.0 && self.c < 1.0) {
            return Err(ConfigError::new("c", "must lie in (0, 1)"));
        }
        if self.max_backtracks == 0 {
            return Err(ConfigError::new("max_backtracks", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerTolerances {
    /// `‖∇P‖_∞ <= eps_grad_p`.
    pub eps_grad_p: f64,
    /// `|P_{j+1} - P_j| <= eps_p (1 + |P_j|)`.
    pub eps_p: f64,
    /// `‖x_{j+1} - x_j‖_∞ <= eps_x (1 + ‖x_j‖_∞)`.
    pub eps_x: f64,
    pub max_inner: usize,
}

impl Default for InnerTolerances {
    fn default() -> Self {
        Self {
            eps_grad_p: 1e-4,
            eps_p: 1e-8,
            eps_x: 1e-8,
            max_inner: 200,
        }
    }
}

impl InnerTolerances {
    pub fn validate(&self) -> Result<(), ConfigError> {
        for (name, v) in [
            ("eps_grad_p", self.eps_grad_p),
            ("eps_p", self.eps_p),
            ("eps_x", self.eps_x),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ConfigError::new(name, "must be positive and finite"));
            }
        }
        if self.max_inner == 0 {
            return Err(ConfigError::new("max_inner", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InnerTermination {
    GradSmall,
    FuncStalled,
    StepStalled,
    MaxInner,
    LineSearchFailed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InnerResult {
    pub x: Vec<f64>,
    /// Barrier value at `x`.
    pub value: f64,
    pub inner_iterations: usize,
    pub line_search_evaluations: usize,
    pub reason: InnerTermination,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InnerError {
    #[error("newton system failed at inner iteration {iteration}: {source}")]
    Factorization {
        source: FactorError,
        iteration: usize,
        x: Vec<f64>,
    },
    #[error("barrier is undefined at the starting point")]
    Domain { x: Vec<f64> },
}

impl InnerError {
    /// Last iterate reached before the failure.
    pub fn iterate(&self) -> &[f64] {
        match self {
            InnerError::Factorization { x, .. } | InnerError::Domain { x } => x,
        }
    }
}

/// Accepted Armijo step.
#[derive(Debug, Clone, PartialEq)]
pub struct LineSearchStep {
    pub alpha: f64,
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("no step satisfied sufficient decrease after {evaluations} trials")]
pub struct LineSearchFailure {
    /// Lowest-valued point among the start and all trials.
    pub best_x: Vec<f64>,
    pub best_value: f64,
    pub evaluations: usize,
}

/// Backtracking with `α ∈ {1, ρ, ρ², …}` until
/// `P(x + αp) <= P(x) + c α ∇Pᵀp`.
pub fn armijo_backtrack(
    x: &[f64],
    p: &[f64],
    value: f64,
    slope: f64,
    eval: impl FnMut(&[f64]) -> f64,
    cfg: &LineSearchConfig,
) -> Result<LineSearchStep, LineSearchFailure> {
    backtrack_from(1.0, x, p, value, slope, eval, cfg)
}

fn backtrack_from(
    alpha0: f64,
    x: &[f64],
    p: &[f64],
    value: f64,
    slope: f64,
    mut eval: impl FnMut(&[f64]) -> f64,
    cfg: &LineSearchConfig,
) -> Result<LineSearchStep, LineSearchFailure> {
    let mut alpha = alpha0;
    let mut trial = vec![0.0; x.len()];
    let mut best_x = x.to_vec();
    let mut best_value = value;
    for evaluations in 1..=cfg.max_backtracks + 1 {
        for ((t, xi), pi) in trial.iter_mut().zip(x).zip(p) {
            *t = xi + alpha * pi;
        }
        let v = eval(&trial);
        if v <= value + cfg.c * alpha * slope {
            return Ok(LineSearchStep {
                alpha,
                x: trial,
                value: v,
                evaluations,
            });
        }
        if v < best_value {
            best_value = v;
            best_x.copy_from_slice(&trial);
        }
        alpha *= cfg.rho;
    }
    Err(LineSearchFailure {
        best_x,
        best_value,
        evaluations: cfg.max_backtracks + 1,
    })
}

/// Solves `(H + diag(hess_diag) + ηI) p = -grad_p` for a one-off pattern.
pub fn newton_direction(
    grad_p: &[f64],
    hess_pattern: &[(usize, usize)],
    hess_values: &[f64],
    hess_diag: &[f64],
    eta: f64,
) -> Result<Vec<f64>, FactorError> {
    let mut system = NewtonSystem::new(grad_p.len(), hess_pattern);
    system.solve(grad_p, hess_values, hess_diag, eta)
}

/// Reusable Newton system for one Hessian pattern.
#[derive(Debug, Clone)]
pub struct NewtonSystem {
    symbolic: SymbolicCholesky,
    factor: Option<CholeskyFactor>,
    shift: Vec<f64>,
}

impl NewtonSystem {
    pub fn new(dim: usize, pattern: &[(usize, usize)]) -> Self {
        Self::with_ordering(dim, pattern, Ordering::default())
    }

    pub fn with_ordering(dim: usize, pattern: &[(usize, usize)], ordering: Ordering) -> Self {
        Self {
            symbolic: SymbolicCholesky::analyze(dim, pattern, ordering),
            factor: None,
            shift: vec![0.0; dim],
        }
    }

    pub fn symbolic(&self) -> &SymbolicCholesky {
        &self.symbolic
    }

    /// One factorization at the given `eta`.
    pub fn solve(
        &mut self,
        grad_p: &[f64],
        hess_values: &[f64],
        hess_diag: &[f64],
        eta: f64,
    ) -> Result<Vec<f64>, FactorError> {
        for (s, d) in self.shift.iter_mut().zip(hess_diag) {
            *s = d + eta;
        }
        match &mut self.factor {
            Some(f) => f.refactor(hess_values, &self.shift)?,
            None => self.factor = Some(self.symbolic.factorize(hess_values, &self.shift)?),
        }
        let factor = self.factor.as_ref().expect("factorized above");
        let mut p: Vec<f64> = grad_p.iter().map(|g| -g).collect();
        factor.solve_in_place(&mut p);
        Ok(p)
    }

    /// Tries `eta`, then doubles it (capped at [`ETA_CEILING`]) on each
    /// factorization failure. Returns the direction and the `eta` used.
    pub fn solve_regularized(
        &mut self,
        grad_p: &[f64],
        hess_values: &[f64],
        hess_diag: &[f64],
        eta: f64,
    ) -> Result<(Vec<f64>, f64), FactorError> {
        let mut eta = eta;
        let mut last_err = None;
        for _ in 0..=ETA_RETRIES {
            match self.solve(grad_p, hess_values, hess_diag, eta) {
                Ok(p) => return Ok((p, eta)),
                Err(e @ FactorError::ValueCount { .. }) => return Err(e),
                Err(e) => last_err = Some(e),
            }
            eta = (eta * 2.0).clamp(DEFAULT_ETA, ETA_CEILING);
        }
        Err(last_err.expect("at least one attempt"))
    }
}

/// A smooth unconstrained subproblem minimized by the Newton loop.
pub(crate) trait NewtonModel {
    /// Value only; `+inf` outside the model's domain.
    fn value(&mut self, x: &[f64]) -> f64;

    /// Value, full gradient and the diagonal added to `∇²f`.
    fn evaluate(&mut self, x: &[f64], grad: &mut [f64], diag: &mut [f64]) -> f64;

    /// Largest step along `p` the line search may start from.
    fn max_step(&self, _x: &[f64], _p: &[f64]) -> f64 {
        1.0
    }
}

struct MonomialModel<'a, P: ?Sized> {
    problem: &'a P,
    sb: &'a ScaledBox,
    mu: u64,
    scratch: Vec<f64>,
}

impl<P: Problem + ?Sized> NewtonModel for MonomialModel<'_, P> {
    fn value(&mut self, x: &[f64]) -> f64 {
        barrier_value(x, self.mu, self.sb, self.problem).0
    }

    fn evaluate(&mut self, x: &[f64], grad: &mut [f64], diag: &mut [f64]) -> f64 {
        self.problem.gradient(x, grad);
        let (penalty, _) = penalty_terms(x, self.mu, self.sb, &mut self.scratch, diag);
        for (g, e) in grad.iter_mut().zip(&self.scratch) {
            *g += e;
        }
        self.problem.value(x) + penalty
    }
}

/// Per-solve workspace: the Newton system plus evaluation buffers.
#[derive(Debug, Clone)]
pub struct NewtonWorkspace {
    system: NewtonSystem,
    hess_values: Vec<f64>,
    grad: Vec<f64>,
    diag: Vec<f64>,
}

impl NewtonWorkspace {
    pub fn new<P: Problem + ?Sized>(problem: &P) -> Self {
        let dim = problem.dim();
        Self {
            system: NewtonSystem::new(dim, problem.hessian_pattern()),
            hess_values: vec![0.0; problem.hessian_pattern().len()],
            grad: vec![0.0; dim],
            diag: vec![0.0; dim],
        }
    }

    pub fn system(&self) -> &NewtonSystem {
        &self.system
    }

    /// Approximately minimizes `P(·; μ)` from `x0`.
    #[allow(clippy::too_many_arguments)]
    pub fn inner_solve<P: Problem + ?Sized>(
        &mut self,
        x0: &[f64],
        mu: u64,
        problem: &P,
        sb: &ScaledBox,
        tol: &InnerTolerances,
        ls: &LineSearchConfig,
        eta: f64,
    ) -> Result<InnerResult, InnerError> {
        let mut model = MonomialModel {
            problem,
            sb,
            mu,
            scratch: vec![0.0; problem.dim()],
        };
        self.minimize(&mut model, problem, x0, tol, ls, eta)
    }

    pub(crate) fn minimize<M: NewtonModel, P: Problem + ?Sized>(
        &mut self,
        model: &mut M,
        problem: &P,
        x0: &[f64],
        tol: &InnerTolerances,
        ls: &LineSearchConfig,
        eta: f64,
    ) -> Result<InnerResult, InnerError> {
        let mut x = x0.to_vec();
        let mut value = model.evaluate(&x, &mut self.grad, &mut self.diag);
        if !value.is_finite() {
            return Err(InnerError::Domain { x });
        }
        let mut evaluations = 0;
        let finish = |x: Vec<f64>, value, iterations, evaluations, reason| InnerResult {
            x,
            value,
            inner_iterations: iterations,
            line_search_evaluations: evaluations,
            reason,
        };
        for j in 0..=tol.max_inner {
            if norm_inf(&self.grad) <= tol.eps_grad_p {
                return Ok(finish(x, value, j, evaluations, InnerTermination::GradSmall));
            }
            if j == tol.max_inner {
                break;
            }
            problem.hessian_values(&x, &mut self.hess_values);
            let (mut p, _) = self
                .system
                .solve_regularized(&self.grad, &self.hess_values, &self.diag, eta)
                .map_err(|source| InnerError::Factorization {
                    source,
                    iteration: j,
                    x: x.clone(),
                })?;
            let mut slope = dot(&self.grad, &p);
            if !(slope < 0.0 && slope.is_finite()) {
                // not a descent direction numerically; use steepest descent
                for (pi, gi) in p.iter_mut().zip(&self.grad) {
                    *pi = -gi;
                }
                slope = -dot(&self.grad, &self.grad);
            }
            // predicted decrease below rounding: the next step cannot change P
            if -slope <= 4.0 * f64::EPSILON * (1.0 + value.abs()) {
                return Ok(finish(x, value, j, evaluations, InnerTermination::FuncStalled));
            }
            let alpha0 = model.max_step(&x, &p).min(1.0);
            let step = match backtrack_from(alpha0, &x, &p, value, slope, |t| model.value(t), ls) {
                Ok(step) => step,
                Err(fail) => {
                    evaluations += fail.evaluations;
                    trace!("line search failed at inner iteration {j}");
                    return Ok(finish(x, value, j, evaluations, InnerTermination::LineSearchFailed));
                }
            };
            evaluations += step.evaluations;
            let func_stalled = (step.value - value).abs() <= tol.eps_p * (1.0 + value.abs());
            let step_size = x.iter().zip(&step.x).fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));
            let step_stalled = step_size <= tol.eps_x * (1.0 + norm_inf(&x));
            x = step.x;
            value = model.evaluate(&x, &mut self.grad, &mut self.diag);
            if func_stalled {
                return Ok(finish(x, value, j + 1, evaluations, InnerTermination::FuncStalled));
            }
            if step_stalled {
                return Ok(finish(x, value, j + 1, evaluations, InnerTermination::StepStalled));
            }
        }
        Ok(finish(x, value, tol.max_inner, evaluations, InnerTermination::MaxInner))
    }
}

/// Approximately minimizes `P(·; μ)` from `x0` with a fresh workspace.
#[allow(clippy::too_many_arguments)]
pub fn inner_solve<P: Problem + ?Sized>(
    x0: &[f64],
    mu: u64,
    problem: &P,
    sb: &ScaledBox,
    tol: &InnerTolerances,
    ls: &LineSearchConfig,
    eta: f64,
) -> Result<InnerResult, InnerError> {
    NewtonWorkspace::new(problem).inner_solve(x0, mu, problem, sb, tol, ls, eta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::barrier::barrier_eval;
    use crate::model::{Bounds, QuadraticProblem};
    use approx::assert_relative_eq;

    fn shifted_square(a: f64) -> QuadraticProblem {
        QuadraticProblem::new(
            [(0, 0, 1.0)],
            vec![-a],
            0.5 * a * a,
            Bounds::uniform(1, -1.0, 1.0).unwrap(),
        )
        .unwrap()
    }

    fn tight() -> InnerTolerances {
        InnerTolerances {
            eps_grad_p: 1e-14,
            eps_p: 1e-300,
            eps_x: 1e-300,
            max_inner: 500,
        }
    }

    #[test]
    fn identity_direction() {
        let p = newton_direction(&[1.0, 0.0], &[(0, 0), (1, 1)], &[1.0, 1.0], &[0.0, 0.0], 0.0).unwrap();
        assert_eq!(p, vec![-1.0, 0.0]);
    }

    #[test]
    fn shifted_square_direction_at_half() {
        // ∇P = 0.5 - 0.8 + 0.5³, ∇²P = 1 + 3·0.25
        let q = shifted_square(0.8);
        let sb = ScaledBox::new(q.bounds()).unwrap();
        let e = barrier_eval(&[0.5], 4, &sb, &q);
        let mut g = [0.0];
        q.gradient(&[0.5], &mut g);
        let grad_p = g[0] + e.grad_term[0];
        assert_relative_eq!(grad_p, -0.175, epsilon = 1e-15);
        assert_relative_eq!(1.0 + e.hess_diag[0], 1.75, epsilon = 1e-15);
        let p = newton_direction(&[grad_p], &[(0, 0)], &[1.0], &e.hess_diag, 0.0).unwrap();
        assert_relative_eq!(p[0], 0.1, epsilon = 1e-15);
        assert!((1.75 * p[0] + grad_p).abs() <= 1e-12);
    }

    #[test]
    fn semidefinite_with_tiny_eta() {
        let p = newton_direction(&[1.0], &[(0, 0)], &[0.0], &[0.0], 1e-15).unwrap();
        assert_relative_eq!(p[0], -1e15, max_relative = 1e-12);
    }

    #[test]
    fn eta_ladder_recovers_from_zero_pivot() {
        let mut sys = NewtonSystem::new(1, &[(0, 0)]);
        assert!(sys.solve(&[1.0], &[0.0], &[0.0], 0.0).is_err());
        let (p, eta) = sys.solve_regularized(&[1.0], &[0.0], &[0.0], 0.0).unwrap();
        assert_eq!(eta, DEFAULT_ETA);
        assert!(p[0] < 0.0);
        // indefinite beyond the ladder ceiling stays an error
        assert!(sys.solve_regularized(&[1.0], &[-1.0], &[0.0], 0.0).is_err());
    }

    #[test]
    fn unit_step_on_quadratic() {
        let cfg = LineSearchConfig::default();
        let f = |x: &[f64]| 0.5 * x[0] * x[0];
        let step = armijo_backtrack(&[1.0], &[-1.0], 0.5, -1.0, f, &cfg).unwrap();
        assert_eq!(step.alpha, 1.0);
        assert_eq!(step.x, vec![0.0]);
        assert_eq!(step.evaluations, 1);
    }

    #[test]
    fn flat_function_exhausts_backtracks() {
        let cfg = LineSearchConfig {
            max_backtracks: 10,
            ..Default::default()
        };
        let fail = armijo_backtrack(&[0.0], &[1.0], 1.0, -1.0, |_| 1.0, &cfg).unwrap_err();
        assert_eq!(fail.evaluations, 11);
        assert_eq!(fail.best_x, vec![0.0]);
    }

    #[test]
    fn backtracks_by_rho() {
        let cfg = LineSearchConfig::default();
        // f = x⁴ from x=1 along p=-2: α=1 lands at -1 (no decrease), α=0.5 at 0
        let step = armijo_backtrack(&[1.0], &[-2.0], 1.0, -8.0, |x| x[0].powi(4), &cfg).unwrap();
        assert_eq!(step.alpha, 0.5);
    }

    #[test]
    fn already_stationary_start() {
        let q = shifted_square(0.0);
        let sb = ScaledBox::new(q.bounds()).unwrap();
        let r = inner_solve(
            &[0.0],
            8,
            &q,
            &sb,
            &InnerTolerances::default(),
            &LineSearchConfig::default(),
            DEFAULT_ETA,
        )
        .unwrap();
        assert_eq!(r.reason, InnerTermination::GradSmall);
        assert_eq!(r.inner_iterations, 0);
        assert_eq!(r.x, vec![0.0]);
    }

    #[test]
    fn shifted_square_minimizers() {
        let sb = ScaledBox::new(&Bounds::uniform(1, -1.0, 1.0).unwrap()).unwrap();
        let ls = LineSearchConfig::default();
        let r = inner_solve(&[0.0], 1024, &shifted_square(0.8), &sb, &tight(), &ls, DEFAULT_ETA).unwrap();
        assert!((r.x[0] - 0.8).abs() < 5e-9, "{:?}", r);
        let r = inner_solve(&[0.0], 1024, &shifted_square(1.0), &sb, &tight(), &ls, DEFAULT_ETA).unwrap();
        assert!((r.x[0] - 0.99486088).abs() < 1e-8, "{:?}", r);
        let r = inner_solve(&[0.0], 4, &shifted_square(3.0), &sb, &tight(), &ls, DEFAULT_ETA).unwrap();
        // x - 3 + x³ = 0
        assert!((r.x[0] - 3.0 + r.x[0].powi(3)).abs() < 1e-6);
        assert!((1.15..=1.25).contains(&r.x[0]));
    }

    #[test]
    fn max_inner_is_enforced() {
        let q = shifted_square(0.8);
        let sb = ScaledBox::new(q.bounds()).unwrap();
        let tol = InnerTolerances {
            max_inner: 1,
            ..tight()
        };
        let r = inner_solve(&[1.5], 1024, &q, &sb, &tol, &LineSearchConfig::default(), DEFAULT_ETA).unwrap();
        assert_eq!(r.reason, InnerTermination::MaxInner);
        assert_eq!(r.inner_iterations, 1);
    }

    #[test]
    fn config_validation() {
        assert!(LineSearchConfig::default().validate().is_ok());
        assert!(LineSearchConfig {
            rho: 1.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(InnerTolerances {
            eps_p: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
    }
}
