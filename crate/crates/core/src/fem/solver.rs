//! Sparse direct solution with equilibration and iterative refinement.

use std::sync::Once;

use faer::sparse::linalg::solvers::Lu;
use faer::sparse::{SparseColMat, Triplet};
use faer::prelude::Solve;
use faer::{Mat, Par};

use super::sparse::Csr;
use crate::error::{Error, Result};

static SEQUENTIAL: Once = Once::new();

/// Relative residual bound accepted after refinement:
/// `‖Ax − b‖ ≤ tol (‖A‖ ‖x‖ + ‖b‖)`.
pub const RESIDUAL_TOL: f64 = 1e-9;

/// LU factorization of an equilibrated square matrix, reusable for many
/// right-hand sides.
pub struct Factorization {
    matrix: Csr,
    row_scale: Vec<f64>,
    col_scale: Vec<f64>,
    lu: Lu<usize, f64>,
    norm: f64,
    context: String,
}

impl std::fmt::Debug for Factorization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Factorization")
            .field("n", &self.matrix.nrows)
            .field("nnz", &self.matrix.nnz())
            .finish()
    }
}

impl Factorization {
    /// `context` names the likely floating fields for error messages.
    pub fn new(matrix: Csr, context: &str) -> Result<Factorization> {
        // Factorizations run inside parallel loops over cells; keeping the
        // kernel sequential makes results independent of the thread count.
        SEQUENTIAL.call_once(|| faer::set_global_parallelism(Par::Seq));
        let n = matrix.nrows;
        if n != matrix.ncols {
            return Err(Error::Solver(format!("{context}: matrix is {} x {}", n, matrix.ncols)));
        }
        if n == 0 {
            return Err(Error::Solver(format!("{context}: empty system")));
        }
        let mut row_scale = vec![0.0; n];
        for r in 0..n {
            let m = matrix.row(r).fold(0.0, |m, (_, v)| f64::max(m, v.abs()));
            if !(m > 0.0) || !m.is_finite() {
                return Err(Error::Solver(format!(
                    "{context}: row {r} is empty or not finite (structurally singular; {})",
                    "check constraints on floating fields"
                )));
            }
            row_scale[r] = 1.0 / m;
        }
        let mut col_max = vec![0.0f64; n];
        for r in 0..n {
            for (c, v) in matrix.row(r) {
                col_max[c] = col_max[c].max((v * row_scale[r]).abs());
            }
        }
        if let Some(c) = col_max.iter().position(|&m| !(m > 0.0)) {
            return Err(Error::Solver(format!("{context}: column {c} is empty (structurally singular)")));
        }
        let col_scale: Vec<f64> = col_max.iter().map(|m| 1.0 / m).collect();
        let trips: Vec<Triplet<usize, usize, f64>> = matrix
            .triplets()
            .map(|(r, c, v)| Triplet::new(r, c, v * row_scale[r] * col_scale[c]))
            .collect();
        let scaled = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &trips)
            .map_err(|e| Error::Solver(format!("{context}: {e:?}")))?;
        let lu = scaled
            .sp_lu()
            .map_err(|e| Error::Solver(format!("{context}: factorization failed ({e:?})")))?;
        let norm = matrix.norm_inf();
        Ok(Factorization {
            matrix,
            row_scale,
            col_scale,
            lu,
            norm,
            context: context.to_string(),
        })
    }

    pub fn n(&self) -> usize {
        self.matrix.nrows
    }

    pub fn matrix(&self) -> &Csr {
        &self.matrix
    }

    fn raw_solve(&self, rhs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = self.n();
        let b = Mat::<f64>::from_fn(n, rhs.len(), |i, j| rhs[j][i] * self.row_scale[i]);
        let y = self.lu.solve(&b);
        (0..rhs.len())
            .map(|j| (0..n).map(|i| y[(i, j)] * self.col_scale[i]).collect())
            .collect()
    }

    /// Solves `A x = b` for every right-hand side, with two refinement
    /// sweeps and a residual check.
    pub fn solve(&self, rhs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        if rhs.is_empty() {
            return Ok(Vec::new());
        }
        let mut x = self.raw_solve(rhs);
        for _ in 0..2 {
            let res: Vec<Vec<f64>> = x
                .iter()
                .zip(rhs)
                .map(|(xj, bj)| {
                    let ax = self.matrix.mul_vec(xj);
                    bj.iter().zip(&ax).map(|(b, a)| b - a).collect()
                })
                .collect();
            let dx = self.raw_solve(&res);
            for (xj, dj) in x.iter_mut().zip(&dx) {
                for (a, d) in xj.iter_mut().zip(dj) {
                    *a += d;
                }
            }
        }
        for (j, (xj, bj)) in x.iter().zip(rhs).enumerate() {
            if xj.iter().any(|v| !v.is_finite()) {
                return Err(Error::Solver(format!(
                    "{}: singular system (non-finite solution for right-hand side {j})",
                    self.context
                )));
            }
            let r = self.residual(xj, bj);
            let scale = self.norm * inf(xj) + inf(bj);
            if r > RESIDUAL_TOL * scale && r > 0.0 {
                return Err(Error::Solver(format!(
                    "{}: residual {r:e} exceeds {RESIDUAL_TOL:e} x {scale:e} for right-hand side {j} (near-singular system)",
                    self.context
                )));
            }
        }
        Ok(x)
    }

    pub fn residual(&self, x: &[f64], b: &[f64]) -> f64 {
        let ax = self.matrix.mul_vec(x);
        ax.iter().zip(b).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

fn inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// One-shot solve.
pub fn solve_sparse(matrix: Csr, rhs: &[f64], context: &str) -> Result<Vec<f64>> {
    let f = Factorization::new(matrix, context)?;
    Ok(f.solve(&[rhs.to_vec()])?.pop().unwrap())
}
