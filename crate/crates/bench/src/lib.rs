//! Fixed problem instances shared by the criterion benchmarks in `benches/`.

use monobar::bench::{gen_diag_qp, gen_obstacle_qp, ObstacleSpec};
use monobar::QuadraticProblem;

/// Seed used for every generated diagonal instance.
pub const SEED: u64 = 42;

/// Diagonal QP with `m` variables whose box excludes the unconstrained minimizer.
pub fn diag(m: usize) -> QuadraticProblem {
    gen_diag_qp(m, SEED, 1.0)
}

/// Obstacle problem on a `side x side` interior grid.
pub fn obstacle(side: usize) -> QuadraticProblem {
    gen_obstacle_qp(side, &ObstacleSpec::bump())
}

/// Torsion problem on a `side x side` interior grid.
pub fn torsion(side: usize) -> QuadraticProblem {
    gen_obstacle_qp(side, &ObstacleSpec::torsion())
}
