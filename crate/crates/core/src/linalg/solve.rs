//! Front end for the symmetric positive definite global systems.

use alloc::format;
use alloc::vec::Vec;

use super::{pcg, SparseCholesky, SymmetricCsc};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    /// Sparse Cholesky factorization.
    Direct,
    /// Jacobi preconditioned conjugate gradients.
    Cg,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub kind: SolverKind,
    pub cg_tol: f64,
    pub cg_max_iter: usize,
    /// Relative pivot threshold of the direct solver.
    pub pivot_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { kind: SolverKind::Direct, cg_tol: 1e-10, cg_max_iter: 50_000, pivot_tol: 1e-14 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SolveStats {
    pub dofs: usize,
    /// CG iterations, 0 for the direct solver.
    pub iterations: usize,
    /// `|b - A x| / |b|` (0 when `b = 0`).
    pub relative_residual: f64,
    /// Nonzeros of the Cholesky factor, 0 for CG.
    pub factor_nnz: usize,
    /// Wall time in seconds, filled in by the caller.
    pub seconds: f64,
}

fn norm(v: &[f64]) -> f64 {
    libm::sqrt(v.iter().map(|x| x * x).sum())
}

/// Solves `(A + gamma a a^T) x = b`. The rank-one term is only supported by
/// the iterative solver; `ordering` only by the direct one.
pub fn solve_spd(
    a: &SymmetricCsc,
    b: &[f64],
    opts: &SolverOptions,
    ordering: Option<Vec<usize>>,
    rank_one: Option<(&[f64], f64)>,
) -> Result<(Vec<f64>, SolveStats)> {
    let n = a.dim();
    let mut stats = SolveStats { dofs: n, ..SolveStats::default() };
    if n == 0 {
        return Ok((Vec::new(), stats));
    }
    let apply = |x: &[f64]| {
        let mut y = a.matvec(x);
        if let Some((v, gamma)) = rank_one {
            let s = gamma * v.iter().zip(x).map(|(p, q)| p * q).sum::<f64>();
            for (yi, vi) in y.iter_mut().zip(v) {
                *yi += s * vi;
            }
        }
        y
    };
    let x = match opts.kind {
        SolverKind::Direct => {
            if rank_one.is_some() {
                return Err(Error::Solver("rank-one update needs the iterative solver".into()));
            }
            let chol = match ordering {
                Some(p) => SparseCholesky::factor_with_ordering(a, p, opts.pivot_tol)?,
                None => SparseCholesky::factor(a, opts.pivot_tol)?,
            };
            stats.factor_nnz = chol.factor_nnz();
            chol.solve(b)
        }
        SolverKind::Cg => {
            let mut diag = a.diagonal();
            if let Some((v, gamma)) = rank_one {
                for (d, vi) in diag.iter_mut().zip(v) {
                    *d += gamma * vi * vi;
                }
            }
            let out = pcg(&apply, &diag, b, opts.cg_tol, opts.cg_max_iter);
            stats.iterations = out.iterations;
            if !out.converged {
                return Err(Error::Solver(format!(
                    "CG did not converge in {} iterations (relative residual {:e})",
                    out.iterations, out.relative_residual
                )));
            }
            out.x
        }
    };
    let r: Vec<f64> = apply(&x).iter().zip(b).map(|(ax, bi)| bi - ax).collect();
    let nb = norm(b);
    stats.relative_residual = if nb > 0.0 { norm(&r) / nb } else { norm(&r) };
    if !x.iter().all(|v| v.is_finite()) {
        return Err(Error::Solver("non-finite solution".into()));
    }
    Ok((x, stats))
}
