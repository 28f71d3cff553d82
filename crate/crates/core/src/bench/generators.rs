//! Seeded benchmark instances: diagonal QPs and obstacle-style grid problems.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{Bounds, Problem, QuadraticProblem};

/// Diagonal QP with `H_ii ∈ [1, 10]`.
///
/// Each unconstrained minimizer `x̂_i` has magnitude in `[0.5, 1.5]`. The box
/// around it has half-width `q_i = bound_scale · U[0.5, 1.5]` and its center
/// is offset from `x̂_i` by at most 0.5. The scaled position
/// `z_i = (x̂_i - r_i)/q_i` therefore satisfies `|z_i| <= 1/bound_scale`:
/// large scales give strictly interior minimizers, small scales push them
/// outside the box.
pub fn gen_diag_qp(m: usize, seed: u64, bound_scale: f64) -> QuadraticProblem {
    assert!(m >= 1, "gen_diag_qp needs at least one variable");
    assert!(
        bound_scale > 0.0 && bound_scale.is_finite(),
        "bound_scale must be positive"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut diag = Vec::with_capacity(m);
    let mut linear = Vec::with_capacity(m);
    let mut lower = Vec::with_capacity(m);
    let mut upper = Vec::with_capacity(m);
    for i in 0..m {
        let h: f64 = rng.gen_range(1.0..=10.0);
        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let target = sign * rng.gen_range(0.5..=1.5);
        let q = bound_scale * rng.gen_range(0.5..=1.5);
        let center = target - rng.gen_range(-0.5..=0.5);
        diag.push((i, i, h));
        linear.push(-h * target);
        lower.push(center - q);
        upper.push(center + q);
    }
    let bounds = Bounds::new(lower, upper).expect("generated bounds are ordered");
    QuadraticProblem::new(diag, linear, 0.0, bounds).expect("generated problem is valid")
}

/// Componentwise solution `clamp(-b_i/H_ii, l_i, u_i)` of a diagonal QP, or
/// `None` if `H` has off-diagonal entries or a nonpositive diagonal.
pub fn diagonal_solution(p: &QuadraticProblem) -> Option<Vec<f64>> {
    let m = p.dim();
    let mut h = vec![0.0; m];
    for (r, c, v) in p.triplets() {
        if r != c {
            return None;
        }
        h[r] = v;
    }
    if h.iter().any(|&v| v <= 0.0) {
        return None;
    }
    let b = p.bounds();
    Some(
        (0..m)
            .map(|i| (-p.linear()[i] / h[i]).clamp(b.lower()[i], b.upper()[i]))
            .collect(),
    )
}

/// Bounds on the grid values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Obstacle {
    /// The same bounds at every node.
    Constant { lower: f64, upper: f64 },
    /// Lower obstacle `base + height · max(0, 1 - |p - c|²/radius²)`
    /// centered in the square, with a flat upper bound `ceiling`.
    Bump {
        base: f64,
        height: f64,
        radius: f64,
        ceiling: f64,
    },
    /// `|x(p)| <= dist(p, ∂Ω)`, the elastic-plastic torsion constraint.
    Torsion,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObstacleSpec {
    /// Constant load; the linear term is `-load · h²` at every node.
    pub load: f64,
    pub obstacle: Obstacle,
}

impl ObstacleSpec {
    /// A membrane pressed down onto a raised bump.
    pub fn bump() -> Self {
        Self {
            load: -10.0,
            obstacle: Obstacle::Bump {
                base: -0.3,
                height: 0.5,
                radius: 0.3,
                ceiling: 1.0,
            },
        }
    }

    /// Torsion bounds with a load strong enough to reach the plastic region.
    pub fn torsion() -> Self {
        Self {
            load: 20.0,
            obstacle: Obstacle::Torsion,
        }
    }
}

/// Five-point Laplacian QP on the `grid_side²` interior nodes of the unit
/// square with zero boundary values: `H` has 4 on the diagonal and -1 for
/// each horizontal or vertical neighbor.
pub fn gen_obstacle_qp(grid_side: usize, spec: &ObstacleSpec) -> QuadraticProblem {
    assert!(grid_side >= 2, "gen_obstacle_qp needs grid_side >= 2");
    let s = grid_side;
    let m = s * s;
    let h = 1.0 / (s + 1) as f64;
    let idx = |i: usize, j: usize| i * s + j;
    let mut triplets = Vec::with_capacity(3 * m);
    let mut lower = Vec::with_capacity(m);
    let mut upper = Vec::with_capacity(m);
    for i in 0..s {
        for j in 0..s {
            let k = idx(i, j);
            if i > 0 {
                triplets.push((k, idx(i - 1, j), -1.0));
            }
            if j > 0 {
                triplets.push((k, idx(i, j - 1), -1.0));
            }
            triplets.push((k, k, 4.0));
            let (px, py) = ((i + 1) as f64 * h, (j + 1) as f64 * h);
            let (lo, hi) = match spec.obstacle {
                Obstacle::Constant { lower, upper } => (lower, upper),
                Obstacle::Bump {
                    base,
                    height,
                    radius,
                    ceiling,
                } => {
                    let r2 = (px - 0.5).powi(2) + (py - 0.5).powi(2);
                    (base + height * (1.0 - r2 / (radius * radius)).max(0.0), ceiling)
                }
                Obstacle::Torsion => {
                    let d = px.min(py).min(1.0 - px).min(1.0 - py);
                    (-d, d)
                }
            };
            lower.push(lo);
            upper.push(hi);
        }
    }
    let bounds = Bounds::new(lower, upper).expect("obstacle bounds are ordered");
    QuadraticProblem::new(triplets, vec![-spec.load * h * h; m], 0.0, bounds).expect("obstacle problem is valid")
}
