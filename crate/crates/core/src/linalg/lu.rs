//! Sparse direct solvers backed by `faer`.
//!
//! A CSR matrix read as CSC is its transpose, so `A` is handled by
//! factorizing `A^T` and solving with the transposed factors. No copies of
//! the index arrays are made.

use std::sync::Arc;

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::solvers::Solve;
use faer::sparse::linalg::lu::{factorize_symbolic_lu, LuRef, LuSymbolicParams, NumericLu, SymbolicLu};
use faer::sparse::linalg::solvers::{Llt, SymbolicLlt};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::{Conj, MatMut, Par, Side};

use super::sparse::{norm2, CsrMatrix};
use super::static_lu::{StaticLu, StaticLuPattern};
use crate::error::{Error, Result};

/// Relative residual accepted from every sparse solve.
pub const SOLVE_RESIDUAL_TOL: f64 = 1e-9;

fn transposed_view(a: &CsrMatrix) -> SparseColMatRef<'_, usize, f64> {
    let sym = SymbolicSparseColMatRef::new_checked(a.ncols(), a.nrows(), a.row_ptr(), None, a.col_idx());
    SparseColMatRef::new(sym, a.values())
}

/// Reusable symbolic LU analysis (fill-reducing ordering and elimination
/// structure) of a fixed sparsity pattern.
pub struct LuPattern {
    symbolic: SymbolicLu<usize>,
    n: usize,
    nnz: usize,
}

impl std::fmt::Debug for LuPattern {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LuPattern").field("n", &self.n).field("nnz", &self.nnz).finish()
    }
}

impl LuPattern {
    pub fn analyze(a: &CsrMatrix) -> Result<Arc<Self>> {
        if a.nrows() != a.ncols() {
            return Err(Error::DimensionMismatch(format!("LU of a {}x{} matrix", a.nrows(), a.ncols())));
        }
        let symbolic = factorize_symbolic_lu(transposed_view(a).symbolic(), LuSymbolicParams::default())
            .map_err(|e| Error::Factorization(format!("{e:?}")))?;
        Ok(Arc::new(LuPattern {
            symbolic,
            n: a.nrows(),
            nnz: a.nnz(),
        }))
    }
}

/// Numeric LU factors; refactorizing with a new matrix of the same pattern
/// reuses all storage.
pub struct SparseLu {
    pattern: Arc<LuPattern>,
    numeric: NumericLu<usize, f64>,
    work: MemBuffer,
}

impl SparseLu {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let pattern = LuPattern::analyze(a)?;
        Self::factor_with(&pattern, a)
    }

    /// Numeric factorization reusing a symbolic analysis of the same pattern.
    pub fn factor_with(pattern: &Arc<LuPattern>, a: &CsrMatrix) -> Result<Self> {
        let sym = &pattern.symbolic;
        let work = MemBuffer::new(
            sym.factorize_numeric_lu_scratch::<f64>(Par::Seq, Default::default())
                .or(sym.solve_transpose_in_place_scratch::<f64>(1, Par::Seq)),
        );
        let mut lu = SparseLu {
            pattern: Arc::clone(pattern),
            numeric: NumericLu::new(),
            work,
        };
        lu.refactor(a)?;
        Ok(lu)
    }

    pub fn refactor(&mut self, a: &CsrMatrix) -> Result<()> {
        let p = &*self.pattern;
        if a.nrows() != p.n || a.nnz() != p.nnz {
            return Err(Error::DimensionMismatch("matrix does not match the analyzed pattern".into()));
        }
        p.symbolic
            .factorize_numeric_lu(
                &mut self.numeric,
                transposed_view(a),
                Par::Seq,
                MemStack::new(&mut self.work),
                Default::default(),
            )
            .map_err(|e| Error::Factorization(format!("{e:?}")))?;
        Ok(())
    }

    pub fn solve_in_place(&mut self, rhs: &mut [f64]) {
        let n = self.pattern.n;
        assert_eq!(rhs.len(), n);
        LuRef::new_unchecked(&self.pattern.symbolic, &self.numeric).solve_transpose_in_place_with_conj(
            Conj::No,
            MatMut::from_column_major_slice_mut(rhs, n, 1),
            Par::Seq,
            MemStack::new(&mut self.work),
        );
    }

    pub fn solve(&mut self, rhs: &[f64]) -> Vec<f64> {
        let mut x = rhs.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

/// Above this size the supernodal pivoting LU beats the scalar no-pivot one.
pub const NO_PIVOT_MAX_N: usize = 6000;

/// Pattern analysis for repeated factorization of matrices with a symmetric
/// pattern and a positive definite symmetric part. Small systems use the
/// no-pivot LU, large ones the supernodal pivoting LU.
#[derive(Debug, Clone)]
pub enum LuPlan {
    NoPivot(Arc<StaticLuPattern>),
    Pivoting(Arc<LuPattern>),
}

impl LuPlan {
    pub fn analyze(a: &CsrMatrix) -> Result<Self> {
        Self::analyze_with_limit(a, NO_PIVOT_MAX_N)
    }

    pub fn analyze_with_limit(a: &CsrMatrix, no_pivot_max_n: usize) -> Result<Self> {
        if a.nrows() <= no_pivot_max_n {
            Ok(LuPlan::NoPivot(StaticLuPattern::analyze(a)?))
        } else {
            Ok(LuPlan::Pivoting(LuPattern::analyze(a)?))
        }
    }
}

pub enum PlannedLu {
    NoPivot(StaticLu),
    Pivoting(SparseLu),
}

impl PlannedLu {
    pub fn factor_with(plan: &LuPlan, a: &CsrMatrix) -> Result<Self> {
        match plan {
            LuPlan::NoPivot(p) => {
                let mut lu = PlannedLu::NoPivot(StaticLu::new(Arc::clone(p)));
                lu.refactor(a)?;
                Ok(lu)
            }
            LuPlan::Pivoting(p) => Ok(PlannedLu::Pivoting(SparseLu::factor_with(p, a)?)),
        }
    }

    /// A pivot too small for the no-pivot LU switches this factorization to
    /// the pivoting one for good.
    pub fn refactor(&mut self, a: &CsrMatrix) -> Result<()> {
        match self {
            PlannedLu::NoPivot(lu) => {
                if lu.factor(a).is_err() {
                    *self = PlannedLu::Pivoting(SparseLu::factor(a)?);
                }
                Ok(())
            }
            PlannedLu::Pivoting(lu) => lu.refactor(a),
        }
    }

    pub fn solve_in_place(&mut self, rhs: &mut [f64]) {
        match self {
            PlannedLu::NoPivot(lu) => lu.solve_in_place(rhs),
            PlannedLu::Pivoting(lu) => lu.solve_in_place(rhs),
        }
    }

    pub fn solve(&mut self, rhs: &[f64]) -> Vec<f64> {
        let mut x = rhs.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

/// `||A x - b|| / ||b||` (absolute residual when `b = 0`).
pub fn relative_residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
    let mut r = a.mul_vec(x);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri -= bi;
    }
    let nb = norm2(b);
    let nr = norm2(&r);
    if nb > 0.0 {
        nr / nb
    } else {
        nr
    }
}

fn checked(context: &'static str, a: &CsrMatrix, x: Vec<f64>, b: &[f64]) -> Result<Vec<f64>> {
    let residual = relative_residual(a, &x, b);
    if residual.is_finite() && residual < SOLVE_RESIDUAL_TOL {
        Ok(x)
    } else {
        Err(Error::Residual {
            context,
            residual,
            tolerance: SOLVE_RESIDUAL_TOL,
        })
    }
}

/// General sparse solve by LU with a fill-reducing ordering.
pub fn solve_sparse(a: &CsrMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
    if rhs.len() != a.nrows() {
        return Err(Error::DimensionMismatch(format!("rhs {} vs {} rows", rhs.len(), a.nrows())));
    }
    let mut lu = SparseLu::factor(a)?;
    checked("sparse LU solve", a, lu.solve(rhs), rhs)
}

/// Sparse Cholesky solve for symmetric positive definite matrices. Only the
/// lower triangle is read.
pub fn solve_spd(a: &CsrMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
    if a.nrows() != a.ncols() || rhs.len() != a.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} matrix with rhs of length {}",
            a.nrows(),
            a.ncols(),
            rhs.len()
        )));
    }
    // the transposed view of the lower triangle is the upper triangle
    let view = transposed_view(a);
    let symbolic = SymbolicLlt::try_new(view.symbolic(), Side::Upper).map_err(|e| Error::Factorization(format!("{e:?}")))?;
    let llt = Llt::try_new_with_symbolic(symbolic, view, Side::Upper)
        .map_err(|e| Error::Factorization(format!("Cholesky breakdown: {e:?}")))?;
    let mut x = rhs.to_vec();
    let n = x.len();
    llt.solve_in_place(MatMut::from_column_major_slice_mut(&mut x, n, 1));
    checked("sparse Cholesky solve", a, x, rhs)
}
