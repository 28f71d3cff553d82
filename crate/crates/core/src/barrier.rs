//! Monomial barrier `P(x; μ) = f(x) + 1/(mμ) Σ ((x_i - r_i)/q_i)^μ`.
//!
//! For even `μ` the penalty is nonnegative, vanishes at the box center and
//! stays below `1/μ` on the box, while growing explosively outside it.
//! Powers are evaluated in the log domain and clamped to
//! [`SATURATION_CAP`] so that `μ` up to `2^40` never produces `inf`.

use thiserror::Error;

use crate::model::{Bounds, Problem};

/// Largest magnitude returned by any power evaluation.
pub const SATURATION_CAP: f64 = 1e300;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BarrierError {
    #[error("variable {index} has zero width (l = u); presolve it away first")]
    Degenerate { index: usize },
}

/// Weight in front of the penalty sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum PenaltyNormalization {
    /// `1/(mμ)`: keeps the outer-iteration count independent of `m`.
    #[default]
    PerVariable,
    /// `1/μ`, the single-variable form applied to every dimension.
    Unit,
}

/// Per-variable centers `r_i = (u_i + l_i)/2` and half-widths `q_i = (u_i - l_i)/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledBox {
    centers: Vec<f64>,
    half_widths: Vec<f64>,
    normalizer: f64,
}

impl ScaledBox {
    pub fn new(bounds: &Bounds) -> Result<Self, BarrierError> {
        Self::with_normalization(bounds, PenaltyNormalization::PerVariable)
    }

    pub fn with_normalization(bounds: &Bounds, normalization: PenaltyNormalization) -> Result<Self, BarrierError> {
        let centers = bounds.center();
        let mut half_widths = Vec::with_capacity(bounds.dim());
        for (index, (l, u)) in bounds.lower().iter().zip(bounds.upper()).enumerate() {
            let q = 0.5 * (u - l);
            if q <= 0.0 {
                return Err(BarrierError::Degenerate { index });
            }
            half_widths.push(q);
        }
        let normalizer = match normalization {
            PenaltyNormalization::PerVariable => bounds.dim() as f64,
            PenaltyNormalization::Unit => 1.0,
        };
        Ok(Self {
            centers,
            half_widths,
            normalizer,
        })
    }

    pub fn dim(&self) -> usize {
        self.centers.len()
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn half_widths(&self) -> &[f64] {
        &self.half_widths
    }

    /// The `m` in the `1/(mμ)` weight (1 under [`PenaltyNormalization::Unit`]).
    pub fn normalizer(&self) -> f64 {
        self.normalizer
    }

    /// `z_i = (x_i - r_i) / q_i`.
    pub fn to_scaled(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.centers)
            .zip(&self.half_widths)
            .map(|((x, r), q)| (x - r) / q)
            .collect()
    }

    /// `x_i = r_i + q_i z_i`.
    pub fn from_scaled(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(&self.centers)
            .zip(&self.half_widths)
            .map(|((z, r), q)| r + q * z)
            .collect()
    }
}

/// `|a|^k` for `k >= 0`, saturating at [`SATURATION_CAP`].
fn magnitude_power(a: f64, k: u64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if a == 0.0 {
        return 0.0;
    }
    let v = a.abs().powf(k as f64);
    if v > SATURATION_CAP {
        SATURATION_CAP
    } else {
        v
    }
}

/// `z^k` with the sign of `z` restored for odd `k`.
fn signed_power(z: f64, k: u64) -> f64 {
    let v = magnitude_power(z, k);
    if k % 2 == 1 && z < 0.0 {
        -v
    } else {
        v
    }
}

/// `z^μ` for even `μ >= 2`, saturating at [`SATURATION_CAP`].
pub fn safe_even_power(z: f64, mu: u64) -> f64 {
    debug_assert!(mu >= 2 && mu.is_multiple_of(2), "exponent must be even and >= 2");
    magnitude_power(z, mu)
}

fn clamp_cap(v: f64) -> f64 {
    v.clamp(-SATURATION_CAP, SATURATION_CAP)
}

/// Barrier value together with the diagonal first and second derivatives
/// of its penalty part.
#[derive(Debug, Clone, PartialEq)]
pub struct BarrierEval {
    /// `P(x; μ) = f(x) + penalty`.
    pub value: f64,
    pub penalty: f64,
    /// `e_i = z_i^(μ-1) / (m q_i)`.
    pub grad_term: Vec<f64>,
    /// `d_ii = (μ-1) z_i^(μ-2) / (m q_i²)`.
    pub hess_diag: Vec<f64>,
    pub saturated: bool,
}

/// Penalty value only; returns `(penalty, saturated)`.
pub fn penalty_value(x: &[f64], mu: u64, sb: &ScaledBox) -> (f64, bool) {
    if sb.dim() == 0 {
        return (0.0, false);
    }
    let m = sb.normalizer();
    let mut sum = 0.0;
    let mut saturated = false;
    for ((xi, r), q) in x.iter().zip(sb.centers()).zip(sb.half_widths()) {
        let pw = safe_even_power((xi - r) / q, mu);
        saturated |= pw >= SATURATION_CAP;
        sum += pw;
    }
    (clamp_cap(sum / (m * mu as f64)), saturated)
}

/// Penalty value plus derivative terms written into `grad_term` and `hess_diag`.
pub fn penalty_terms(x: &[f64], mu: u64, sb: &ScaledBox, grad_term: &mut [f64], hess_diag: &mut [f64]) -> (f64, bool) {
    let m = sb.normalizer();
    let mut sum = 0.0;
    let mut saturated = false;
    for i in 0..sb.dim() {
        let q = sb.half_widths()[i];
        let z = (x[i] - sb.centers()[i]) / q;
        let pw = safe_even_power(z, mu);
        saturated |= pw >= SATURATION_CAP;
        sum += pw;
        grad_term[i] = clamp_cap(signed_power(z, mu - 1) / (m * q));
        hess_diag[i] = clamp_cap((mu - 1) as f64 * magnitude_power(z, mu - 2) / (m * q * q));
    }
    let penalty = if sb.dim() == 0 {
        0.0
    } else {
        clamp_cap(sum / (m * mu as f64))
    };
    (penalty, saturated)
}

/// Barrier value only, used by the line search.
pub fn barrier_value<P: Problem + ?Sized>(x: &[f64], mu: u64, sb: &ScaledBox, p: &P) -> (f64, bool) {
    let (penalty, saturated) = penalty_value(x, mu, sb);
    (clamp_cap(p.value(x) + penalty), saturated)
}

pub fn barrier_eval<P: Problem + ?Sized>(x: &[f64], mu: u64, sb: &ScaledBox, p: &P) -> BarrierEval {
    let mut grad_term = vec![0.0; sb.dim()];
    let mut hess_diag = vec![0.0; sb.dim()];
    let (penalty, saturated) = penalty_terms(x, mu, sb, &mut grad_term, &mut hess_diag);
    BarrierEval {
        value: clamp_cap(p.value(x) + penalty),
        penalty,
        grad_term,
        hess_diag,
        saturated,
    }
}

/// Barrier of a problem already posed on `[-1, 1]^m`:
/// `P(z; μ) = f(z) + 1/(mμ) Σ z_i^μ`.
pub fn barrier_eval_scaled<P: Problem + ?Sized>(z: &[f64], mu: u64, p: &P) -> BarrierEval {
    debug_assert!(
        p.bounds().lower().iter().all(|&l| l == -1.0) && p.bounds().upper().iter().all(|&u| u == 1.0),
        "scaled barrier expects the unit box"
    );
    let m = z.len() as f64;
    let mut saturated = false;
    let mut sum = 0.0;
    let mut grad_term = Vec::with_capacity(z.len());
    let mut hess_diag = Vec::with_capacity(z.len());
    for &zi in z {
        let pw = safe_even_power(zi, mu);
        saturated |= pw >= SATURATION_CAP;
        sum += pw;
        grad_term.push(clamp_cap(signed_power(zi, mu - 1) / m));
        hess_diag.push(clamp_cap((mu - 1) as f64 * magnitude_power(zi, mu - 2) / m));
    }
    let penalty = if z.is_empty() {
        0.0
    } else {
        clamp_cap(sum / (m * mu as f64))
    };
    BarrierEval {
        value: clamp_cap(p.value(z) + penalty),
        penalty,
        grad_term,
        hess_diag,
        saturated,
    }
}

/// `f` transported to the unit box: `f_z(z) = f(r + q ∘ z)`.
pub struct ScaledProblem<P> {
    inner: P,
    sb: ScaledBox,
    unit: Bounds,
}

impl<P: Problem> ScaledProblem<P> {
    pub fn new(inner: P) -> Result<Self, BarrierError> {
        let sb = ScaledBox::new(inner.bounds())?;
        let unit = Bounds::uniform(inner.dim(), -1.0, 1.0).expect("nonempty box");
        Ok(Self { inner, sb, unit })
    }

    pub fn scaled_box(&self) -> &ScaledBox {
        &self.sb
    }

    pub fn inner(&self) -> &P {
        &self.inner
    }
}

impl<P: Problem> Problem for ScaledProblem<P> {
    fn bounds(&self) -> &Bounds {
        &self.unit
    }

    fn value(&self, z: &[f64]) -> f64 {
        self.inner.value(&self.sb.from_scaled(z))
    }

    fn gradient(&self, z: &[f64], out: &mut [f64]) {
        self.inner.gradient(&self.sb.from_scaled(z), out);
        for (g, q) in out.iter_mut().zip(self.sb.half_widths()) {
            *g *= q;
        }
    }

    fn hessian_pattern(&self) -> &[(usize, usize)] {
        self.inner.hessian_pattern()
    }

    fn hessian_values(&self, z: &[f64], out: &mut [f64]) {
        self.inner.hessian_values(&self.sb.from_scaled(z), out);
        let q = self.sb.half_widths();
        for (v, &(r, c)) in out.iter_mut().zip(self.inner.hessian_pattern()) {
            *v *= q[r] * q[c];
        }
    }
}
