//! Linear solves for the assembled M-matrix systems.

use faer::prelude::*;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMat, Triplet};

use crate::error::{Error, Result};

/// Solves a tridiagonal system (Thomas algorithm). `sub[0]` and
/// `sup[n-1]` are ignored. Stable for the diagonally dominant systems the
/// solver assembles.
pub fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut beta = diag[0];
    c[0] = sup[0] / beta;
    d[0] = rhs[0] / beta;
    for i in 1..n {
        beta = diag[i] - sub[i] * c[i - 1];
        c[i] = if i + 1 < n { sup[i] / beta } else { 0.0 };
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / beta;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

/// Sparse LU with a cached symbolic factorization. All systems passed to
/// one instance must share the sparsity pattern of the first.
#[derive(Default)]
pub struct SparseSolver {
    symbolic: Option<SymbolicLu<usize>>,
}

impl SparseSolver {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn solve(&mut self, n: usize, triplets: &[Triplet<usize, usize, f64>], rhs: &[f64]) -> Result<Vec<f64>> {
        let mat = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, triplets)
            .map_err(|e| Error::invalid(format!("sparse assembly failed: {e:?}")))?;
        if self.symbolic.is_none() {
            self.symbolic = Some(
                SymbolicLu::try_new(mat.symbolic())
                    .map_err(|e| Error::invalid(format!("symbolic factorization failed: {e:?}")))?,
            );
        }
        let symbolic = self.symbolic.clone().unwrap();
        let lu = Lu::try_new_with_symbolic(symbolic, mat.as_ref())
            .map_err(|e| Error::invalid(format!("numeric factorization failed: {e:?}")))?;
        let b = Col::<f64>::from_fn(n, |i| rhs[i]);
        let x = lu.solve(&b);
        Ok((0..n).map(|i| x[i]).collect())
    }
}
