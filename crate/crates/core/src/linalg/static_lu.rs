//! LU without pivoting for matrices with a symmetric sparsity pattern.
//!
//! Meant for matrices whose symmetric part is positive definite (every
//! leading block is then nonsingular, whatever the ordering): the transport
//! matrix `s M + mu K + N~(w)` and the condensed saddle matrix with its
//! pressure rows negated. The ordering is approximate minimum degree on the
//! pattern, which for these FEM matrices fills in far less than a column
//! ordering built for partial pivoting.
//!
//! Factorization is up-looking: step `k` computes column `k` of `U` and
//! row `k` of `L` by two sparse triangular solves over the elimination-tree
//! reach of row `k`. `L` (by columns, unit diagonal) and `U` (by rows) share
//! one index structure. Everything but the arithmetic is precomputed.

use std::sync::Arc;

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::sparse::linalg::amd;
use faer::sparse::SymbolicSparseColMatRef;

use super::sparse::CsrMatrix;
use crate::error::{Error, Result};

const NONE: usize = usize::MAX;

#[derive(Debug)]
pub struct StaticLuPattern {
    n: usize,
    nnz: usize,
    /// `perm[new] = old`.
    perm: Vec<usize>,
    /// New column of each CSR slot of `A`.
    slot_col: Vec<usize>,
    /// Slot of the transposed entry.
    slot_t: Vec<usize>,
    col_ptr: Vec<usize>,
    /// Row of `L` (= column of `U`) at each factor position.
    row_idx: Vec<usize>,
    reach_ptr: Vec<usize>,
    /// Topologically ordered reach of each row, as `(column j, position)`.
    reach: Vec<(usize, usize)>,
}

impl StaticLuPattern {
    pub fn analyze(a: &CsrMatrix) -> Result<Arc<Self>> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::DimensionMismatch(format!("LU of a {}x{} matrix", n, a.ncols())));
        }
        let mut slot_t = vec![0; a.nnz()];
        for r in 0..n {
            for s in a.row_ptr()[r]..a.row_ptr()[r + 1] {
                let c = a.col_idx()[s];
                slot_t[s] = a
                    .slot(c, r)
                    .ok_or_else(|| Error::Factorization(format!("pattern is not symmetric at ({r}, {c})")))?;
            }
        }
        let (perm, inv) = amd_order(a)?;

        // etree of the permuted pattern
        let mut parent = vec![NONE; n];
        let mut ancestor = vec![NONE; n];
        for k in 0..n {
            for (c, _) in a.row(perm[k]) {
                let mut i = inv[c];
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

        // reach of every row in topological order; positions assigned as
        // columns fill up row by row
        let mut counts = vec![0usize; n];
        let mut reach_ptr = vec![0usize; n + 1];
        let mut reach_cols = Vec::new();
        let mut mark = vec![NONE; n];
        let mut stack = vec![0usize; n];
        let mut path = Vec::with_capacity(n);
        for k in 0..n {
            let mut top = n;
            mark[k] = k;
            for (c, _) in a.row(perm[k]) {
                let mut i = inv[c];
                if i >= k {
                    continue;
                }
                path.clear();
                while mark[i] != k {
                    path.push(i);
                    mark[i] = k;
                    i = parent[i];
                }
                for &p in path.iter().rev() {
                    top -= 1;
                    stack[top] = p;
                }
            }
            for &j in &stack[top..n] {
                reach_cols.push(j);
                counts[j] += 1;
            }
            reach_ptr[k + 1] = reach_cols.len();
        }
        let mut col_ptr = vec![0usize; n + 1];
        for j in 0..n {
            col_ptr[j + 1] = col_ptr[j] + counts[j];
        }
        let mut fill = col_ptr[..n].to_vec();
        let mut row_idx = vec![0usize; col_ptr[n]];
        let mut reach = Vec::with_capacity(reach_cols.len());
        for k in 0..n {
            for &j in &reach_cols[reach_ptr[k]..reach_ptr[k + 1]] {
                let pos = fill[j];
                fill[j] += 1;
                row_idx[pos] = k;
                reach.push((j, pos));
            }
        }

        let slot_col = a.col_idx().iter().map(|&c| inv[c]).collect();
        Ok(Arc::new(StaticLuPattern {
            n,
            nnz: a.nnz(),
            perm,
            slot_col,
            slot_t,
            col_ptr,
            row_idx,
            reach_ptr,
            reach,
        }))
    }

    /// Entries of `L` (strictly lower); `U` has the same count.
    pub fn factor_nnz(&self) -> usize {
        self.row_idx.len()
    }
}

fn amd_order(a: &CsrMatrix) -> Result<(Vec<usize>, Vec<usize>)> {
    let n = a.nrows();
    let mut perm = vec![0usize; n];
    let mut inv = vec![0usize; n];
    let pattern = SymbolicSparseColMatRef::new_checked(n, n, a.row_ptr(), None, a.col_idx());
    let mut mem = MemBuffer::new(amd::order_scratch::<usize>(n, a.nnz()));
    amd::order(&mut perm, &mut inv, pattern, amd::Control::default(), MemStack::new(&mut mem))
        .map_err(|e| Error::Factorization(format!("ordering failed: {e:?}")))?;
    Ok((perm, inv))
}

pub struct StaticLu {
    pattern: Arc<StaticLuPattern>,
    l: Vec<f64>,
    u: Vec<f64>,
    diag: Vec<f64>,
    x: Vec<f64>,
    y: Vec<f64>,
}

impl StaticLu {
    pub fn new(pattern: Arc<StaticLuPattern>) -> Self {
        let (n, m) = (pattern.n, pattern.factor_nnz());
        StaticLu {
            pattern,
            l: vec![0.0; m],
            u: vec![0.0; m],
            diag: vec![0.0; n],
            x: vec![0.0; n],
            y: vec![0.0; n],
        }
    }

    pub fn factor(&mut self, a: &CsrMatrix) -> Result<()> {
        let p = &*self.pattern;
        if a.nrows() != p.n || a.nnz() != p.nnz {
            return Err(Error::DimensionMismatch("matrix does not match the analyzed pattern".into()));
        }
        let vals = a.values();
        let (x, y) = (&mut self.x, &mut self.y);
        for k in 0..p.n {
            // row k of A gives the lower part (y); its transpose the upper part (x)
            let r = p.perm[k];
            let mut dk = 0.0;
            let mut scale = 0.0f64;
            for s in a.row_ptr()[r]..a.row_ptr()[r + 1] {
                let c = p.slot_col[s];
                scale = scale.max(vals[s].abs());
                if c < k {
                    y[c] = vals[s];
                    x[c] = vals[p.slot_t[s]];
                } else if c == k {
                    dk = vals[s];
                }
            }
            for &(j, pos) in &p.reach[p.reach_ptr[k]..p.reach_ptr[k + 1]] {
                let ujk = x[j];
                let lkj = y[j] / self.diag[j];
                x[j] = 0.0;
                y[j] = 0.0;
                let start = p.col_ptr[j];
                for q in start..pos {
                    let i = p.row_idx[q];
                    x[i] -= self.l[q] * ujk;
                    y[i] -= self.u[q] * lkj;
                }
                self.l[pos] = lkj;
                self.u[pos] = ujk;
                dk -= lkj * ujk;
            }
            if !(dk.abs() > 1e-14 * scale) {
                return Err(Error::Factorization(format!(
                    "pivot {dk:e} at step {k} (row {r}) is too small for factorization without pivoting"
                )));
            }
            self.diag[k] = dk;
        }
        Ok(())
    }

    pub fn solve_in_place(&mut self, rhs: &mut [f64]) {
        let p = &*self.pattern;
        assert_eq!(rhs.len(), p.n);
        let z = &mut self.x;
        for k in 0..p.n {
            z[k] = rhs[p.perm[k]];
        }
        for j in 0..p.n {
            let zj = z[j];
            if zj != 0.0 {
                for q in p.col_ptr[j]..p.col_ptr[j + 1] {
                    z[p.row_idx[q]] -= self.l[q] * zj;
                }
            }
        }
        for j in (0..p.n).rev() {
            let mut s = z[j];
            for q in p.col_ptr[j]..p.col_ptr[j + 1] {
                s -= self.u[q] * z[p.row_idx[q]];
            }
            z[j] = s / self.diag[j];
        }
        for k in 0..p.n {
            rhs[p.perm[k]] = z[k];
            z[k] = 0.0;
        }
    }
}
