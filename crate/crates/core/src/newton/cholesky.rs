//! Sparse LLᵀ factorization for symmetric positive definite matrices.
//!
//! The symbolic phase ([`SymbolicCholesky::analyze`]) fixes a fill-reducing
//! ordering, the elimination tree and the column counts of `L` for a given
//! lower-triangular pattern. It is computed once per problem; every later
//! factorization only scatters new values into the permuted matrix and runs
//! the up-looking numeric phase.

use std::collections::VecDeque;

use thiserror::Error;

const NONE: usize = usize::MAX;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FactorError {
    /// Pivot `index` (in the original ordering) was not positive.
    #[error("matrix is not positive definite: pivot {value:e} at index {index}")]
    NotPositiveDefinite { index: usize, value: f64 },
    #[error("expected {expected} values, got {got}")]
    ValueCount { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Ordering {
    /// Keep the input numbering.
    Natural,
    /// Reverse Cuthill-McKee on the adjacency graph of the pattern.
    #[default]
    ReverseCuthillMcKee,
}

/// Ordering, elimination tree and storage layout of `L` for one pattern.
#[derive(Debug, Clone)]
pub struct SymbolicCholesky {
    n: usize,
    /// `perm[new] = old`.
    perm: Vec<usize>,
    /// Upper triangle of the permuted matrix, compressed by column.
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    /// Position in the permuted storage of each input pattern entry.
    entry_slot: Vec<usize>,
    /// Position of each (original) diagonal entry.
    diag_slot: Vec<usize>,
    parent: Vec<usize>,
    l_col_ptr: Vec<usize>,
}

impl SymbolicCholesky {
    /// Analyzes an `n x n` lower-triangular pattern (`col <= row`). The
    /// diagonal is always part of the structure, whether listed or not.
    pub fn analyze(n: usize, pattern: &[(usize, usize)], ordering: Ordering) -> Self {
        let perm = match ordering {
            Ordering::Natural => (0..n).collect(),
            Ordering::ReverseCuthillMcKee => reverse_cuthill_mckee(n, pattern),
        };
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }

        // Upper-triangle entries of P A Pᵀ keyed by column: (row, col) with row <= col.
        let mut entries: Vec<(usize, usize, usize)> = Vec::with_capacity(pattern.len() + n);
        for (k, &(r, c)) in pattern.iter().enumerate() {
            assert!(c <= r && r < n, "pattern entry ({r}, {c}) is not lower triangular");
            let (a, b) = (inv[r], inv[c]);
            entries.push((a.min(b), a.max(b), k));
        }
        for (i, &d) in inv.iter().enumerate() {
            entries.push((d, d, pattern.len() + i));
        }
        entries.sort_unstable_by_key(|&(row, col, _)| (col, row));

        let mut col_ptr = vec![0; n + 1];
        let mut row_idx = Vec::with_capacity(entries.len());
        let mut entry_slot = vec![0; pattern.len()];
        let mut diag_slot = vec![0; n];
        let mut last: Option<(usize, usize)> = None;
        for &(row, col, key) in &entries {
            if last != Some((row, col)) {
                row_idx.push(row);
                col_ptr[col + 1] += 1;
                last = Some((row, col));
            }
            let slot = row_idx.len() - 1;
            if key < pattern.len() {
                entry_slot[key] = slot;
            } else {
                diag_slot[key - pattern.len()] = slot;
            }
        }
        for j in 0..n {
            col_ptr[j + 1] += col_ptr[j];
        }

        let parent = elimination_tree(n, &col_ptr, &row_idx);

        // Column counts of L via the row subtrees of the elimination tree.
        let mut counts = vec![1usize; n];
        let mut stack = vec![0; n];
        let mut mark = vec![NONE; n];
        for k in 0..n {
            let top = ereach(k, &col_ptr, &row_idx, &parent, &mut stack, &mut mark);
            for &i in &stack[top..n] {
                counts[i] += 1;
            }
        }
        let mut l_col_ptr = vec![0; n + 1];
        for j in 0..n {
            l_col_ptr[j + 1] = l_col_ptr[j] + counts[j];
        }

        Self {
            n,
            perm,
            col_ptr,
            row_idx,
            entry_slot,
            diag_slot,
            parent,
            l_col_ptr,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of stored entries of `L`, diagonal included.
    pub fn factor_nnz(&self) -> usize {
        self.l_col_ptr[self.n]
    }

    /// Number of pattern entries the analysis was built for.
    pub fn pattern_len(&self) -> usize {
        self.entry_slot.len()
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    /// Factorizes `A + diag(shift)` where `A` has the analyzed pattern with
    /// `values` in pattern order.
    pub fn factorize(&self, values: &[f64], shift: &[f64]) -> Result<CholeskyFactor, FactorError> {
        let mut factor = CholeskyFactor {
            symbolic: self.clone(),
            l_row: vec![0; self.factor_nnz()],
            l_val: vec![0.0; self.factor_nnz()],
            work_a: vec![0.0; self.row_idx.len()],
        };
        factor.refactor(values, shift)?;
        Ok(factor)
    }
}

/// Numeric factor tied to one [`SymbolicCholesky`].
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    symbolic: SymbolicCholesky,
    l_row: Vec<usize>,
    l_val: Vec<f64>,
    work_a: Vec<f64>,
}

impl CholeskyFactor {
    pub fn symbolic(&self) -> &SymbolicCholesky {
        &self.symbolic
    }

    /// Numeric refactorization with the stored symbolic analysis.
    pub fn refactor(&mut self, values: &[f64], shift: &[f64]) -> Result<(), FactorError> {
        let s = &self.symbolic;
        let n = s.n;
        if values.len() != s.entry_slot.len() {
            return Err(FactorError::ValueCount {
                expected: s.entry_slot.len(),
                got: values.len(),
            });
        }
        if shift.len() != n {
            return Err(FactorError::ValueCount {
                expected: n,
                got: shift.len(),
            });
        }
        self.work_a.fill(0.0);
        for (&slot, &v) in s.entry_slot.iter().zip(values) {
            self.work_a[slot] += v;
        }
        for (&slot, &d) in s.diag_slot.iter().zip(shift) {
            self.work_a[slot] += d;
        }

        let mut next = s.l_col_ptr[..n].to_vec();
        let mut x = vec![0.0; n];
        let mut stack = vec![0; n];
        let mut mark = vec![NONE; n];
        for k in 0..n {
            let top = ereach(k, &s.col_ptr, &s.row_idx, &s.parent, &mut stack, &mut mark);
            for p in s.col_ptr[k]..s.col_ptr[k + 1] {
                x[s.row_idx[p]] = self.work_a[p];
            }
            let mut d = x[k];
            x[k] = 0.0;
            for &i in &stack[top..n] {
                let lki = x[i] / self.l_val[s.l_col_ptr[i]];
                x[i] = 0.0;
                for p in s.l_col_ptr[i] + 1..next[i] {
                    x[self.l_row[p]] -= self.l_val[p] * lki;
                }
                d -= lki * lki;
                let p = next[i];
                next[i] += 1;
                self.l_row[p] = k;
                self.l_val[p] = lki;
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(FactorError::NotPositiveDefinite {
                    index: s.perm[k],
                    value: d,
                });
            }
            let p = next[k];
            next[k] += 1;
            self.l_row[p] = k;
            self.l_val[p] = d.sqrt();
        }
        Ok(())
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let s = &self.symbolic;
        let n = s.n;
        let mut y: Vec<f64> = s.perm.iter().map(|&old| b[old]).collect();
        // L y = P b
        for j in 0..n {
            let start = s.l_col_ptr[j];
            y[j] /= self.l_val[start];
            for p in start + 1..s.l_col_ptr[j + 1] {
                y[self.l_row[p]] -= self.l_val[p] * y[j];
            }
        }
        // Lᵀ z = y
        for j in (0..n).rev() {
            let start = s.l_col_ptr[j];
            for p in start + 1..s.l_col_ptr[j + 1] {
                y[j] -= self.l_val[p] * y[self.l_row[p]];
            }
            y[j] /= self.l_val[start];
        }
        for (new, &old) in s.perm.iter().enumerate() {
            b[old] = y[new];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

fn elimination_tree(n: usize, col_ptr: &[usize], row_idx: &[usize]) -> Vec<usize> {
    let mut parent = vec![NONE; n];
    let mut ancestor = vec![NONE; n];
    for k in 0..n {
        for &row in &row_idx[col_ptr[k]..col_ptr[k + 1]] {
            let mut i = row;
            while i != NONE && i < k {
                let next = ancestor[i];
                ancestor[i] = k;
                if next == NONE {
                    parent[i] = k;
                }
                i = next;
            }
        }
    }
    parent
}

/// Nonzero pattern of row `k` of `L` (excluding the diagonal), returned as
/// `stack[top..n]` in topological order.
fn ereach(
    k: usize,
    col_ptr: &[usize],
    row_idx: &[usize],
    parent: &[usize],
    stack: &mut [usize],
    mark: &mut [usize],
) -> usize {
    let n = parent.len();
    let mut top = n;
    mark[k] = k;
    let mut path = Vec::new();
    for &row in &row_idx[col_ptr[k]..col_ptr[k + 1]] {
        if row > k {
            continue;
        }
        let mut i = row;
        path.clear();
        while mark[i] != k {
            path.push(i);
            mark[i] = k;
            i = parent[i];
        }
        while let Some(i) = path.pop() {
            top -= 1;
            stack[top] = i;
        }
    }
    top
}

fn reverse_cuthill_mckee(n: usize, pattern: &[(usize, usize)]) -> Vec<usize> {
    let mut adj = vec![Vec::new(); n];
    for &(r, c) in pattern {
        if r != c {
            adj[r].push(c);
            adj[c].push(r);
        }
    }
    for nbrs in &mut adj {
        nbrs.sort_unstable();
        nbrs.dedup();
    }
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&i| (degree[i], i));
    let mut queue = VecDeque::new();
    for &start in &by_degree {
        if visited[start] {
            continue;
        }
        visited[start] = true;
        queue.push_back(start);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut nbrs: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            nbrs.sort_by_key(|&w| (degree[w], w));
            for w in nbrs {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Random sparse SPD matrix as lower triplets plus its dense copy.
    fn random_spd(n: usize, density: f64, seed: u64) -> (Vec<(usize, usize)>, Vec<f64>, DMatrix<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut dense = DMatrix::zeros(n, n);
        let mut pattern = Vec::new();
        let mut values = Vec::new();
        for r in 0..n {
            for c in 0..r {
                if rng.gen_bool(density) {
                    let v: f64 = rng.gen_range(-1.0..1.0);
                    pattern.push((r, c));
                    values.push(v);
                    dense[(r, c)] = v;
                    dense[(c, r)] = v;
                }
            }
        }
        for i in 0..n {
            let row_sum: f64 = (0..n).filter(|&j| j != i).map(|j| dense[(i, j)].abs()).sum();
            let d = row_sum + rng.gen_range(0.5..2.0);
            pattern.push((i, i));
            values.push(d);
            dense[(i, i)] = d;
        }
        (pattern, values, dense)
    }

    #[test]
    fn matches_dense_solve() {
        for (seed, ordering) in [(1, Ordering::Natural), (2, Ordering::ReverseCuthillMcKee)] {
            let n = 40;
            let (pattern, values, dense) = random_spd(n, 0.1, seed);
            let sym = SymbolicCholesky::analyze(n, &pattern, ordering);
            let f = sym.factorize(&values, &vec![0.0; n]).unwrap();
            let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
            let x = f.solve(&b);
            let expected = dense.cholesky().unwrap().solve(&DVector::from_vec(b));
            for i in 0..n {
                assert!((x[i] - expected[i]).abs() < 1e-12 * (1.0 + expected[i].abs()));
            }
        }
    }

    #[test]
    fn identity_system() {
        let sym = SymbolicCholesky::analyze(2, &[(0, 0), (1, 1)], Ordering::default());
        let f = sym.factorize(&[1.0, 1.0], &[0.0, 0.0]).unwrap();
        assert_eq!(f.solve(&[-1.0, 0.0]), vec![-1.0, 0.0]);
    }

    #[test]
    fn diagonal_added_when_missing_from_pattern() {
        // off-diagonal only; the shift supplies the diagonal
        let sym = SymbolicCholesky::analyze(2, &[(1, 0)], Ordering::Natural);
        let f = sym.factorize(&[1.0], &[2.0, 2.0]).unwrap();
        let x = f.solve(&[3.0, 3.0]);
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn reports_indefinite_pivot() {
        let sym = SymbolicCholesky::analyze(2, &[(0, 0), (1, 0), (1, 1)], Ordering::Natural);
        let err = sym.factorize(&[1.0, 2.0, 1.0], &[0.0, 0.0]).unwrap_err();
        assert!(matches!(err, FactorError::NotPositiveDefinite { index: 1, .. }));
        let err = sym.factorize(&[0.0, 0.0, 1.0], &[0.0, 0.0]).unwrap_err();
        assert!(matches!(err, FactorError::NotPositiveDefinite { index: 0, .. }));
    }

    #[test]
    fn refactor_reuses_analysis() {
        let n = 30;
        let (pattern, values, _) = random_spd(n, 0.15, 9);
        let sym = SymbolicCholesky::analyze(n, &pattern, Ordering::default());
        let mut f = sym.factorize(&values, &vec![0.0; n]).unwrap();
        let scaled: Vec<f64> = values.iter().map(|v| 2.0 * v).collect();
        let shift = vec![0.25; n];
        f.refactor(&scaled, &shift).unwrap();
        let fresh = SymbolicCholesky::analyze(n, &pattern, Ordering::default())
            .factorize(&scaled, &shift)
            .unwrap();
        let b: Vec<f64> = (0..n).map(|i| 1.0 + i as f64).collect();
        let (x1, x2) = (f.solve(&b), fresh.solve(&b));
        for i in 0..n {
            assert!((x1[i] - x2[i]).abs() <= 1e-12 * (1.0 + x2[i].abs()));
        }
    }

    #[test]
    fn rcm_is_a_permutation_and_limits_fill_on_a_path() {
        // path graph numbered badly
        let n = 50;
        let order: Vec<usize> = (0..n).map(|i| (i * 17) % n).collect();
        let mut pattern: Vec<(usize, usize)> = (0..n).map(|i| (i, i)).collect();
        for w in order.windows(2) {
            pattern.push((w[0].max(w[1]), w[0].min(w[1])));
        }
        let sym = SymbolicCholesky::analyze(n, &pattern, Ordering::ReverseCuthillMcKee);
        let mut seen = sym.permutation().to_vec();
        seen.sort_unstable();
        assert_eq!(seen, (0..n).collect::<Vec<_>>());
        assert_eq!(sym.factor_nnz(), 2 * n - 1);
    }
}
