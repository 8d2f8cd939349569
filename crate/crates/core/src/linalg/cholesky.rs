//! Sparse Cholesky factorization `P A Pᵀ = L Lᵀ` (up-looking, row by row).

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::ordering;
use super::SymmetricCsc;
use crate::{Error, Result};

const NONE: usize = usize::MAX;

#[derive(Debug, Clone)]
pub struct SparseCholesky {
    n: usize,
    perm: Vec<usize>,
    lp: Vec<usize>,
    li: Vec<u32>,
    lx: Vec<f64>,
}

/// Upper triangle of `P A Pᵀ` in compressed column form.
fn permuted_upper(a: &SymmetricCsc, iperm: &[usize]) -> (Vec<usize>, Vec<u32>, Vec<f64>) {
    let n = a.dim();
    let (acp, ari, ax) = (a.col_ptr(), a.row_idx(), a.values());
    let mut count = vec![0usize; n + 1];
    for j in 0..n {
        for p in acp[j]..acp[j + 1] {
            let (pi, pj) = (iperm[ari[p] as usize], iperm[j]);
            count[pi.max(pj) + 1] += 1;
        }
    }
    for j in 0..n {
        count[j + 1] += count[j];
    }
    let cp = count.clone();
    let mut next = count;
    let mut ci = vec![0u32; a.nnz()];
    let mut cx = vec![0.0; a.nnz()];
    for j in 0..n {
        for p in acp[j]..acp[j + 1] {
            let (pi, pj) = (iperm[ari[p] as usize], iperm[j]);
            let col = pi.max(pj);
            let q = next[col];
            next[col] += 1;
            ci[q] = pi.min(pj) as u32;
            cx[q] = ax[p];
        }
    }
    (cp, ci, cx)
}

fn etree(n: usize, cp: &[usize], ci: &[u32]) -> Vec<usize> {
    let mut parent = vec![NONE; n];
    let mut ancestor = vec![NONE; n];
    for k in 0..n {
        for p in cp[k]..cp[k + 1] {
            let mut i = ci[p] as usize;
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

/// Nonzero pattern of row `k` of `L` (excluding the diagonal), written to
/// `stack[top..]` in topological order; returns `top`.
fn ereach(k: usize, cp: &[usize], ci: &[u32], parent: &[usize], stack: &mut [usize], mark: &mut [usize]) -> usize {
    let n = stack.len();
    let mut top = n;
    mark[k] = k;
    for p in cp[k]..cp[k + 1] {
        let mut i = ci[p] as usize;
        if i > k {
            continue;
        }
        let mut len = 0;
        while mark[i] != k {
            stack[len] = i;
            len += 1;
            mark[i] = k;
            i = parent[i];
        }
        while len > 0 {
            top -= 1;
            len -= 1;
            stack[top] = stack[len];
        }
    }
    top
}

impl SparseCholesky {
    /// Factorizes with a nested dissection ordering. A pivot below
    /// `rel_tol` times the corresponding diagonal entry of `A` is reported
    /// as a solver error.
    pub fn factor(a: &SymmetricCsc, rel_tol: f64) -> Result<Self> {
        let perm = ordering::nested_dissection(&a.adjacency());
        Self::factor_with_ordering(a, perm, rel_tol)
    }

    pub fn factor_with_ordering(a: &SymmetricCsc, perm: Vec<usize>, rel_tol: f64) -> Result<Self> {
        let n = a.dim();
        if perm.len() != n {
            return Err(Error::Mismatch(format!("ordering of length {} for matrix of dimension {n}", perm.len())));
        }
        let iperm = ordering::inverse(&perm);
        let (cp, ci, cx) = permuted_upper(a, &iperm);
        let parent = etree(n, &cp, &ci);

        let mut stack = vec![0usize; n];
        let mut mark = vec![NONE; n];
        let mut counts = vec![1usize; n];
        for k in 0..n {
            let top = ereach(k, &cp, &ci, &parent, &mut stack, &mut mark);
            for &i in &stack[top..] {
                counts[i] += 1;
            }
        }
        let mut lp = vec![0usize; n + 1];
        for j in 0..n {
            lp[j + 1] = lp[j] + counts[j];
        }
        let nnz = lp[n];
        let mut li = vec![0u32; nnz];
        let mut lx = vec![0.0f64; nnz];
        let mut next: Vec<usize> = lp[..n].to_vec();
        let mut x = vec![0.0f64; n];
        mark.iter_mut().for_each(|m| *m = NONE);

        for k in 0..n {
            let top = ereach(k, &cp, &ci, &parent, &mut stack, &mut mark);
            let mut akk = 0.0;
            for p in cp[k]..cp[k + 1] {
                let i = ci[p] as usize;
                x[i] += cx[p];
                if i == k {
                    akk += cx[p];
                }
            }
            let mut d = x[k];
            x[k] = 0.0;
            for &i in &stack[top..] {
                let lki = x[i] / lx[lp[i]];
                x[i] = 0.0;
                for p in lp[i] + 1..next[i] {
                    x[li[p] as usize] -= lx[p] * lki;
                }
                d -= lki * lki;
                let p = next[i];
                next[i] += 1;
                li[p] = k as u32;
                lx[p] = lki;
            }
            if !(d > rel_tol * akk.abs()) || !d.is_finite() {
                return Err(Error::Solver(format!(
                    "matrix is not positive definite (pivot {d:e} at original row {})",
                    perm[k]
                )));
            }
            let p = next[k];
            next[k] += 1;
            li[p] = k as u32;
            lx[p] = libm::sqrt(d);
        }
        Ok(SparseCholesky { n, perm, lp, li, lx })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of stored entries of the factor.
    pub fn factor_nnz(&self) -> usize {
        self.lx.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for j in 0..n {
            let d = self.lp[j];
            y[j] /= self.lx[d];
            let yj = y[j];
            for p in d + 1..self.lp[j + 1] {
                y[self.li[p] as usize] -= self.lx[p] * yj;
            }
        }
        for j in (0..n).rev() {
            let d = self.lp[j];
            let mut s = y[j];
            for p in d + 1..self.lp[j + 1] {
                s -= self.lx[p] * y[self.li[p] as usize];
            }
            y[j] = s / self.lx[d];
        }
        let mut x = vec![0.0; n];
        for (k, &p) in self.perm.iter().enumerate() {
            x[p] = y[k];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian(n: usize) -> SymmetricCsc {
        let mut t = Vec::new();
        for j in 0..n {
            for i in 0..n {
                let v = j * n + i;
                t.push((v, v, 4.0 + 1e-3 * v as f64));
                if i + 1 < n {
                    t.push((v, v + 1, -1.0));
                }
                if j + 1 < n {
                    t.push((v, v + n, -1.0));
                }
            }
        }
        SymmetricCsc::from_triplets(n * n, &t)
    }

    #[test]
    fn solves_grid_laplacian() {
        let a = laplacian(40);
        let xs: Vec<f64> = (0..1600).map(|i| libm::sin(i as f64)).collect();
        let b = a.matvec(&xs);
        let f = SparseCholesky::factor(&a, 1e-14).unwrap();
        let x = f.solve(&b);
        let err = x.iter().zip(&xs).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1e-12, "{err}");
        // fill is far below dense
        assert!(f.factor_nnz() < 1600 * 1600 / 20);
    }

    #[test]
    fn rejects_indefinite() {
        let a = SymmetricCsc::from_triplets(2, &[(0, 0, 1.0), (0, 1, 2.0), (1, 1, 1.0)]);
        assert!(matches!(SparseCholesky::factor(&a, 1e-14), Err(Error::Solver(_))));
    }
}
