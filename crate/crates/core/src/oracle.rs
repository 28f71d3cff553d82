//! Exact solver for small box-constrained convex QPs by enumerating every
//! lower/free/upper pattern and checking the KKT conditions.
//!
//! Uses nalgebra's dense Cholesky, independent of the sparse factorization
//! the barrier solvers rely on.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::model::{ActiveSide, Problem, QuadraticProblem};

/// Largest dimension accepted (`3^12` patterns).
pub const MAX_ORACLE_DIM: usize = 12;

/// Relative tolerance for primal feasibility and dual signs.
const KKT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub x: Vec<f64>,
    pub f_value: f64,
    pub pattern: Vec<ActiveSide>,
    /// Number of patterns that passed every check (1 on nondegenerate instances).
    pub passing_patterns: usize,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("dimension {dim} exceeds the oracle limit of {MAX_ORACLE_DIM}")]
    TooLarge { dim: usize },
    #[error("no active pattern satisfies the KKT conditions (smallest violation {best_violation:e})")]
    NoPattern { best_violation: f64 },
}

struct Candidate {
    x: Vec<f64>,
    f: f64,
    pattern: Vec<ActiveSide>,
}

/// Decodes pattern number `code` in base 3, variable 0 most significant,
/// so increasing codes are lexicographic in `ActiveSide` order.
fn decode(mut code: usize, m: usize, out: &mut [ActiveSide]) {
    for slot in out.iter_mut().take(m).rev() {
        *slot = match code % 3 {
            0 => ActiveSide::Lower,
            1 => ActiveSide::Free,
            _ => ActiveSide::Upper,
        };
        code /= 3;
    }
}

pub fn solve_qp_exact(p: &QuadraticProblem) -> Result<OracleSolution, OracleError> {
    let m = p.dim();
    if m > MAX_ORACLE_DIM {
        return Err(OracleError::TooLarge { dim: m });
    }
    let bounds = p.bounds();
    let (lo, hi) = (bounds.lower(), bounds.upper());
    let h = DMatrix::from_row_slice(m, m, &p.dense_hessian());
    let b = p.linear();

    let mut best: Option<Candidate> = None;
    let mut passing = 0;
    let mut best_violation = f64::INFINITY;
    let mut pattern = vec![ActiveSide::Free; m];
    let mut x = vec![0.0; m];
    let mut grad = vec![0.0; m];

    for code in 0..3usize.pow(m as u32) {
        decode(code, m, &mut pattern);
        let free: Vec<usize> = (0..m).filter(|&i| pattern[i] == ActiveSide::Free).collect();
        for i in 0..m {
            x[i] = match pattern[i] {
                ActiveSide::Lower => lo[i],
                ActiveSide::Upper => hi[i],
                ActiveSide::Free => 0.0,
            };
        }
        if !free.is_empty() {
            // H_FF x_F = -(b_F + H_FB x_B)
            let hff = DMatrix::from_fn(free.len(), free.len(), |r, c| h[(free[r], free[c])]);
            let rhs = DVector::from_fn(free.len(), |r, _| {
                let i = free[r];
                -(b[i] + (0..m).map(|j| h[(i, j)] * x[j]).sum::<f64>())
            });
            let Some(chol) = hff.cholesky() else {
                continue;
            };
            let xf = chol.solve(&rhs);
            for (r, &i) in free.iter().enumerate() {
                x[i] = xf[r];
            }
        }
        p.gradient(&x, &mut grad);
        let scale = 1.0 + grad.iter().fold(0.0f64, |a, g| a.max(g.abs()));
        let mut violation = 0.0f64;
        for i in 0..m {
            let v = match pattern[i] {
                ActiveSide::Lower => (-grad[i]).max(0.0) / scale,
                ActiveSide::Upper => grad[i].max(0.0) / scale,
                ActiveSide::Free => {
                    let out = (lo[i] - x[i]).max(x[i] - hi[i]).max(0.0);
                    out / (1.0 + lo[i].abs().max(hi[i].abs()))
                }
            };
            violation = violation.max(v);
        }
        best_violation = best_violation.min(violation);
        if violation > KKT_TOL {
            continue;
        }
        passing += 1;
        let clamped: Vec<f64> = (0..m).map(|i| x[i].clamp(lo[i], hi[i])).collect();
        let f = p.value(&clamped);
        // codes increase lexicographically, so only a strictly lower f replaces
        if best.as_ref().is_none_or(|c| f < c.f) {
            best = Some(Candidate {
                x: clamped,
                f,
                pattern: pattern.clone(),
            });
        }
    }

    match best {
        Some(c) => Ok(OracleSolution {
            x: c.x,
            f_value: c.f,
            pattern: c.pattern,
            passing_patterns: passing,
        }),
        None => Err(OracleError::NoPattern { best_violation }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{projected_gradient_residual, Bounds};

    fn one_d(a: f64) -> QuadraticProblem {
        QuadraticProblem::new(
            [(0, 0, 1.0)],
            vec![-a],
            0.5 * a * a,
            Bounds::uniform(1, -1.0, 1.0).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn one_d_examples() {
        let s = solve_qp_exact(&one_d(0.8)).unwrap();
        assert!((s.x[0] - 0.8).abs() < 1e-15);
        assert_eq!(s.pattern, vec![ActiveSide::Free]);
        assert!(s.f_value.abs() < 1e-15);
        let s = solve_qp_exact(&one_d(3.0)).unwrap();
        assert_eq!(s.x, vec![1.0]);
        assert_eq!(s.pattern, vec![ActiveSide::Upper]);
        assert_eq!(s.f_value, 2.0);
        assert_eq!(s.passing_patterns, 1);
    }

    #[test]
    fn two_d_example() {
        let p = QuadraticProblem::new(
            [(0, 0, 1.0), (1, 1, 1.0)],
            vec![2.0, 0.0],
            2.0,
            Bounds::uniform(2, -1.0, 1.0).unwrap(),
        )
        .unwrap();
        let s = solve_qp_exact(&p).unwrap();
        assert_eq!(s.x, vec![-1.0, 0.0]);
        assert_eq!(s.pattern, vec![ActiveSide::Lower, ActiveSide::Free]);
        assert_eq!(s.f_value, 0.5);
        assert!(projected_gradient_residual(&s.x, &p) <= 1e-10);
    }

    #[test]
    fn degenerate_tie_prefers_lexicographic_pattern() {
        // minimizer at x = 1 with zero gradient: free and upper both pass
        let s = solve_qp_exact(&one_d(1.0)).unwrap();
        assert_eq!(s.x, vec![1.0]);
        assert_eq!(s.passing_patterns, 2);
        assert_eq!(s.pattern, vec![ActiveSide::Free]);
    }

    #[test]
    fn rejects_large_problems() {
        let p = QuadraticProblem::new([], vec![0.0; 13], 0.0, Bounds::uniform(13, 0.0, 1.0).unwrap()).unwrap();
        assert_eq!(solve_qp_exact(&p).unwrap_err(), OracleError::TooLarge { dim: 13 });
    }

    #[test]
    fn pattern_decoding_is_lexicographic() {
        let mut out = [ActiveSide::Free; 2];
        decode(0, 2, &mut out);
        assert_eq!(out, [ActiveSide::Lower, ActiveSide::Lower]);
        decode(1, 2, &mut out);
        assert_eq!(out, [ActiveSide::Lower, ActiveSide::Free]);
        decode(8, 2, &mut out);
        assert_eq!(out, [ActiveSide::Upper, ActiveSide::Upper]);
    }
}
