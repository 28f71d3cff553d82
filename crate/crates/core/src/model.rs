//! Problem definitions for box-constrained convex minimization.
//!
//! A [`Problem`] supplies the objective, its gradient and a sparse Hessian
//! with a fixed lower-triangular pattern, together with finite [`Bounds`].
//! [`QuadraticProblem`] is the concrete carrier used by the generators, the
//! file format and the exact oracle.

use std::collections::BTreeMap;

use thiserror::Error;

/// Relative tolerance of the activity test `|x_i - l_i| < 1e-8 (1 + |l_i|)`.
pub const ACTIVE_TOL: f64 = 1e-8;

/// Default first-order tolerance on the projected gradient.
pub const DEFAULT_EPS_G: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("bounds must have at least one variable")]
    Empty,
    #[error("lower has {lower} entries but upper has {upper}")]
    LengthMismatch { lower: usize, upper: usize },
    #[error("bound {index} is not finite")]
    NonFinite { index: usize },
    #[error("lower bound {lower} exceeds upper bound {upper} at index {index}")]
    Inverted { index: usize, lower: f64, upper: f64 },
    #[error("expected a vector of length {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("hessian entry ({row}, {col}) lies outside a {dim}x{dim} matrix")]
    IndexOutOfRange { row: usize, col: usize, dim: usize },
    #[error("hessian entry ({row}, {col}) is in the upper triangle")]
    UpperTriangle { row: usize, col: usize },
    #[error("non-finite coefficient in {0}")]
    NonFiniteCoefficient(&'static str),
}

/// Finite two-sided bounds `l <= x <= u`.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, ModelError> {
        if lower.len() != upper.len() {
            return Err(ModelError::LengthMismatch {
                lower: lower.len(),
                upper: upper.len(),
            });
        }
        if lower.is_empty() {
            return Err(ModelError::Empty);
        }
        Self::check(&lower, &upper)?;
        Ok(Self { lower, upper })
    }

    /// `[lo, hi]^dim`.
    pub fn uniform(dim: usize, lo: f64, hi: f64) -> Result<Self, ModelError> {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    /// Zero-dimensional box, only produced when presolve fixes every variable.
    pub(crate) fn empty() -> Self {
        Self {
            lower: Vec::new(),
            upper: Vec::new(),
        }
    }

    fn check(lower: &[f64], upper: &[f64]) -> Result<(), ModelError> {
        for (index, (&l, &u)) in lower.iter().zip(upper).enumerate() {
            if !l.is_finite() || !u.is_finite() {
                return Err(ModelError::NonFinite { index });
            }
            if l > u {
                return Err(ModelError::Inverted {
                    index,
                    lower: l,
                    upper: u,
                });
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Midpoint `(l + u) / 2` of every coordinate.
    pub fn center(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| 0.5 * (u + l)).collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(xi, (l, u))| l <= xi && xi <= u)
    }

    /// Whether coordinate `i` passes the activity test at its lower bound.
    pub fn at_lower(&self, i: usize, xi: f64) -> bool {
        let l = self.lower[i];
        (xi - l).abs() < ACTIVE_TOL * (1.0 + l.abs())
    }

    pub fn at_upper(&self, i: usize, xi: f64) -> bool {
        let u = self.upper[i];
        (u - xi).abs() < ACTIVE_TOL * (1.0 + u.abs())
    }
}

/// Componentwise median of `(l_i, x_i, u_i)`.
pub fn project(x: &[f64], bounds: &Bounds) -> Vec<f64> {
    let mut out = x.to_vec();
    project_in_place(&mut out, bounds);
    out
}

pub fn project_in_place(x: &mut [f64], bounds: &Bounds) {
    for ((xi, l), u) in x.iter_mut().zip(&bounds.lower).zip(&bounds.upper) {
        *xi = xi.clamp(*l, *u);
    }
}

/// A twice-differentiable convex objective over a finite box.
///
/// Evaluators must accept any finite `x`, feasible or not, and must not
/// mutate shared state. The Hessian pattern is fixed: `hessian_values`
/// always fills entries in the order of `hessian_pattern`.
pub trait Problem: Sync {
    fn bounds(&self) -> &Bounds;

    fn dim(&self) -> usize {
        self.bounds().dim()
    }

    fn value(&self, x: &[f64]) -> f64;

    fn gradient(&self, x: &[f64], out: &mut [f64]);

    /// Lower-triangular `(row, col)` pairs with `col <= row`, without duplicates.
    fn hessian_pattern(&self) -> &[(usize, usize)];

    fn hessian_values(&self, x: &[f64], out: &mut [f64]);
}

impl<P: Problem + ?Sized> Problem for &P {
    fn bounds(&self) -> &Bounds {
        (**self).bounds()
    }
    fn value(&self, x: &[f64]) -> f64 {
        (**self).value(x)
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        (**self).gradient(x, out)
    }
    fn hessian_pattern(&self) -> &[(usize, usize)] {
        (**self).hessian_pattern()
    }
    fn hessian_values(&self, x: &[f64], out: &mut [f64]) {
        (**self).hessian_values(x, out)
    }
}

/// `f(x) = ½ xᵀHx + bᵀx + c0` with `H` stored as its lower triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticProblem {
    pattern: Vec<(usize, usize)>,
    values: Vec<f64>,
    linear: Vec<f64>,
    constant: f64,
    bounds: Bounds,
}

impl QuadraticProblem {
    /// Builds the problem from lower-triangular triplets. Duplicate
    /// positions are summed and the result is sorted by `(row, col)`.
    pub fn new(
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
        linear: Vec<f64>,
        constant: f64,
        bounds: Bounds,
    ) -> Result<Self, ModelError> {
        let dim = bounds.dim();
        if linear.len() != dim {
            return Err(ModelError::Dimension {
                expected: dim,
                got: linear.len(),
            });
        }
        if linear.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::NonFiniteCoefficient("linear term"));
        }
        if !constant.is_finite() {
            return Err(ModelError::NonFiniteCoefficient("constant"));
        }
        let mut merged = BTreeMap::new();
        for (row, col, value) in triplets {
            if row >= dim || col >= dim {
                return Err(ModelError::IndexOutOfRange { row, col, dim });
            }
            if col > row {
                return Err(ModelError::UpperTriangle { row, col });
            }
            if !value.is_finite() {
                return Err(ModelError::NonFiniteCoefficient("hessian"));
            }
            *merged.entry((row, col)).or_insert(0.0) += value;
        }
        let (pattern, values) = merged.into_iter().unzip();
        Ok(Self {
            pattern,
            values,
            linear,
            constant,
            bounds,
        })
    }

    /// Sorted lower-triangular triplets.
    pub fn triplets(&self) -> impl ExactSizeIterator<Item = (usize, usize, f64)> + '_ {
        self.pattern.iter().zip(&self.values).map(|(&(r, c), &v)| (r, c, v))
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn linear(&self) -> &[f64] {
        &self.linear
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    /// Dense row-major copy of the full symmetric `H`.
    pub fn dense_hessian(&self) -> Vec<f64> {
        let m = self.dim();
        let mut dense = vec![0.0; m * m];
        for (r, c, v) in self.triplets() {
            dense[r * m + c] = v;
            dense[c * m + r] = v;
        }
        dense
    }

    /// `H x` using the symmetric expansion of the stored triangle.
    pub fn hessian_product(&self, x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for (r, c, v) in self.triplets() {
            out[r] += v * x[c];
            if r != c {
                out[c] += v * x[r];
            }
        }
    }

    pub fn with_bounds(&self, bounds: Bounds) -> Result<Self, ModelError> {
        if bounds.dim() != self.dim() {
            return Err(ModelError::Dimension {
                expected: self.dim(),
                got: bounds.dim(),
            });
        }
        Ok(Self { bounds, ..self.clone() })
    }
}

impl Problem for QuadraticProblem {
    fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    fn value(&self, x: &[f64]) -> f64 {
        let mut quad = 0.0;
        for (r, c, v) in self.triplets() {
            let term = v * x[r] * x[c];
            quad += if r == c { term } else { 2.0 * term };
        }
        0.5 * quad + dot(&self.linear, x) + self.constant
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        self.hessian_product(x, out);
        for (g, b) in out.iter_mut().zip(&self.linear) {
            *g += b;
        }
    }

    fn hessian_pattern(&self) -> &[(usize, usize)] {
        &self.pattern
    }

    fn hessian_values(&self, _x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.values);
    }
}

/// Outcome of removing variables with `l_i = u_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct PresolveResult {
    pub reduced: QuadraticProblem,
    /// `(original index, fixed value)` for every removed variable.
    pub fixed: Vec<(usize, f64)>,
    /// Original index of each reduced variable.
    pub index_map: Vec<usize>,
}

impl PresolveResult {
    pub fn original_dim(&self) -> usize {
        self.fixed.len() + self.index_map.len()
    }

    /// Scatter a reduced vector and the fixed values back into the original space.
    pub fn recombine(&self, reduced_x: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.original_dim()];
        for &(i, v) in &self.fixed {
            x[i] = v;
        }
        for (&i, &v) in self.index_map.iter().zip(reduced_x) {
            x[i] = v;
        }
        x
    }

    /// Restrict an original-space vector to the free variables.
    pub fn restrict(&self, x: &[f64]) -> Vec<f64> {
        self.index_map.iter().map(|&i| x[i]).collect()
    }
}

/// Removes every variable with `l_i = u_i` by substituting `x_i = l_i`.
///
/// With `B` the fixed set and `F` the free set, the reduced problem is
/// `½ x_Fᵀ H_FF x_F + (b_F + H_FB x_B)ᵀ x_F + c0 + b_Bᵀ x_B + ½ x_Bᵀ H_BB x_B`.
pub fn presolve_fixed(p: &QuadraticProblem) -> PresolveResult {
    let bounds = p.bounds();
    let m = p.dim();
    let mut reduced_index = vec![usize::MAX; m];
    let mut fixed_value = vec![None; m];
    let mut index_map = Vec::new();
    let mut fixed = Vec::new();
    for i in 0..m {
        let (l, u) = (bounds.lower()[i], bounds.upper()[i]);
        if l == u {
            fixed_value[i] = Some(l);
            fixed.push((i, l));
        } else {
            reduced_index[i] = index_map.len();
            index_map.push(i);
        }
    }
    if fixed.is_empty() {
        return PresolveResult {
            reduced: p.clone(),
            fixed,
            index_map,
        };
    }

    let mut linear: Vec<f64> = index_map.iter().map(|&i| p.linear()[i]).collect();
    let mut constant = p.constant();
    for &(i, v) in &fixed {
        constant += p.linear()[i] * v;
    }
    let mut triplets = Vec::new();
    for (r, c, h) in p.triplets() {
        match (fixed_value[r], fixed_value[c]) {
            (None, None) => triplets.push((reduced_index[r], reduced_index[c], h)),
            (Some(vr), Some(vc)) => {
                let term = h * vr * vc;
                constant += if r == c { 0.5 * term } else { term };
            }
            (None, Some(vc)) => linear[reduced_index[r]] += h * vc,
            (Some(vr), None) => linear[reduced_index[c]] += h * vr,
        }
    }
    let reduced_bounds = if index_map.is_empty() {
        Bounds::empty()
    } else {
        Bounds {
            lower: index_map.iter().map(|&i| bounds.lower()[i]).collect(),
            upper: index_map.iter().map(|&i| bounds.upper()[i]).collect(),
        }
    };
    let reduced =
        QuadraticProblem::new(triplets, linear, constant, reduced_bounds).expect("reduced problem inherits valid data");
    PresolveResult {
        reduced,
        fixed,
        index_map,
    }
}

/// `‖proj(x - g) - x‖_∞` for a precomputed gradient `g`.
pub fn projected_gradient_norm(x: &[f64], grad: &[f64], bounds: &Bounds) -> f64 {
    x.iter()
        .zip(grad)
        .zip(bounds.lower().iter().zip(bounds.upper()))
        .map(|((&xi, &gi), (&l, &u))| ((xi - gi).clamp(l, u) - xi).abs())
        .fold(0.0, f64::max)
}

pub fn projected_gradient_residual<P: Problem + ?Sized>(x: &[f64], p: &P) -> f64 {
    let mut grad = vec![0.0; p.dim()];
    p.gradient(x, &mut grad);
    projected_gradient_norm(x, &grad, p.bounds())
}

/// Number of coordinates within `1e-8 (1 + |bound|)` of either bound.
pub fn count_active(x: &[f64], bounds: &Bounds) -> usize {
    x.iter()
        .enumerate()
        .filter(|&(i, &xi)| bounds.at_lower(i, xi) || bounds.at_upper(i, xi))
        .count()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ActiveSide {
    Lower,
    Free,
    Upper,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarKkt {
    pub side: ActiveSide,
    pub gradient: f64,
    /// Amount by which the sign condition for `side` is violated (0 if met).
    pub violation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KktReport {
    pub vars: Vec<VarKkt>,
    pub worst_violation: f64,
    pub tol: f64,
}

impl KktReport {
    pub fn satisfied(&self) -> bool {
        self.worst_violation <= self.tol
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KktError {
    #[error("x[{index}] lies {excess:e} outside its bounds; project before checking KKT")]
    Infeasible { index: usize, excess: f64 },
    #[error("expected a point of length {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}

/// Classifies each variable with the activity test and checks the matching
/// sign condition: `∇f_i >= 0` at a lower bound, `∇f_i = 0` in the
/// interior, `∇f_i <= 0` at an upper bound.
pub fn kkt_report<P: Problem + ?Sized>(x: &[f64], p: &P, tol: f64) -> Result<KktReport, KktError> {
    let bounds = p.bounds();
    if x.len() != p.dim() {
        return Err(KktError::Dimension {
            expected: p.dim(),
            got: x.len(),
        });
    }
    for (index, &xi) in x.iter().enumerate() {
        let excess = (bounds.lower()[index] - xi).max(xi - bounds.upper()[index]);
        if excess > tol {
            return Err(KktError::Infeasible { index, excess });
        }
    }
    let mut grad = vec![0.0; p.dim()];
    p.gradient(x, &mut grad);
    let vars: Vec<VarKkt> = x
        .iter()
        .zip(&grad)
        .enumerate()
        .map(|(i, (&xi, &g))| {
            let lower = bounds.at_lower(i, xi);
            let upper = bounds.at_upper(i, xi);
            let (side, violation) = match (lower, upper) {
                (true, true) => {
                    let (vl, vu) = ((-g).max(0.0), g.max(0.0));
                    if vl <= vu {
                        (ActiveSide::Lower, vl)
                    } else {
                        (ActiveSide::Upper, vu)
                    }
                }
                (true, false) => (ActiveSide::Lower, (-g).max(0.0)),
                (false, true) => (ActiveSide::Upper, g.max(0.0)),
                (false, false) => (ActiveSide::Free, g.abs()),
            };
            VarKkt {
                side,
                gradient: g,
                violation,
            }
        })
        .collect();
    let worst_violation = vars.iter().map(|v| v.violation).fold(0.0, f64::max);
    Ok(KktReport {
        vars,
        worst_violation,
        tol,
    })
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}
