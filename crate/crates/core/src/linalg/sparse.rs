//! Symmetric sparse matrices stored as the upper triangle in compressed
//! column form.

use alloc::vec;
use alloc::vec::Vec;

/// Sparsity pattern of a symmetric matrix assembled from element cliques.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymmetricPattern {
    n: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<u32>,
}

impl SymmetricPattern {
    /// Pattern in which every pair of dofs sharing a clique is coupled.
    pub fn from_cliques<'a, I>(n: usize, cliques: I) -> Self
    where
        I: IntoIterator<Item = &'a [usize]>,
    {
        let mut cols: Vec<Vec<u32>> = vec![Vec::new(); n];
        for clique in cliques {
            for &a in clique {
                for &b in clique {
                    if a <= b {
                        cols[b].push(a as u32);
                    }
                }
            }
        }
        let mut col_ptr = Vec::with_capacity(n + 1);
        col_ptr.push(0);
        let mut row_idx = Vec::new();
        for (j, col) in cols.iter_mut().enumerate() {
            col.push(j as u32);
            col.sort_unstable();
            col.dedup();
            row_idx.extend_from_slice(col);
            col_ptr.push(row_idx.len());
            *col = Vec::new();
        }
        SymmetricPattern { n, col_ptr, row_idx }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.row_idx.len()
    }

    /// Storage slot of entry `(i, j)`, `i <= j`.
    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        let col = &self.row_idx[self.col_ptr[j]..self.col_ptr[j + 1]];
        col.binary_search(&(i as u32)).ok().map(|p| self.col_ptr[j] + p)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricCsc {
    pattern: SymmetricPattern,
    values: Vec<f64>,
}

impl SymmetricCsc {
    pub fn zeros(pattern: SymmetricPattern) -> Self {
        let values = vec![0.0; pattern.nnz()];
        SymmetricCsc { pattern, values }
    }

    /// Builds from `(row, col, value)` triplets; duplicates are summed in
    /// input order and lower-triangle entries are mirrored.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let cliques: Vec<[usize; 2]> = triplets.iter().map(|&(i, j, _)| [i, j]).collect();
        let mut m = SymmetricCsc::zeros(SymmetricPattern::from_cliques(n, cliques.iter().map(|c| &c[..])));
        for &(i, j, v) in triplets {
            m.add(i, j, v);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.pattern.n
    }

    pub fn nnz(&self) -> usize {
        self.pattern.nnz()
    }

    pub fn pattern(&self) -> &SymmetricPattern {
        &self.pattern
    }

    /// Adds `v` to entry `(i, j)`; panics if the entry is outside the pattern.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let p = self.pattern.position(i, j).expect("entry outside sparsity pattern");
        self.values[p] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.pattern.position(i, j).map_or(0.0, |p| self.values[p])
    }

    pub fn col_ptr(&self) -> &[usize] {
        &self.pattern.col_ptr
    }

    pub fn row_idx(&self) -> &[u32] {
        &self.pattern.row_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|j| self.get(j, j)).collect()
    }

    /// `y = A x` using both triangles.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut y = vec![0.0; n];
        let (cp, ri) = (&self.pattern.col_ptr, &self.pattern.row_idx);
        for j in 0..n {
            let xj = x[j];
            let mut acc = 0.0;
            for p in cp[j]..cp[j + 1] {
                let i = ri[p] as usize;
                let a = self.values[p];
                if i == j {
                    acc += a * xj;
                } else {
                    y[i] += a * xj;
                    acc += a * x[i];
                }
            }
            y[j] += acc;
        }
        y
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Adjacency lists of the off-diagonal graph.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let n = self.dim();
        let mut adj = vec![Vec::new(); n];
        for j in 0..n {
            for p in self.pattern.col_ptr[j]..self.pattern.col_ptr[j + 1] {
                let i = self.pattern.row_idx[p] as usize;
                if i != j {
                    adj[i].push(j);
                    adj[j].push(i);
                }
            }
        }
        adj
    }

    /// Dense copy, for small systems and tests.
    pub fn to_dense(&self) -> super::DenseMatrix {
        let n = self.dim();
        let mut d = super::DenseMatrix::zeros(n, n);
        for j in 0..n {
            for p in self.pattern.col_ptr[j]..self.pattern.col_ptr[j + 1] {
                let i = self.pattern.row_idx[p] as usize;
                d[(i, j)] = self.values[p];
                d[(j, i)] = self.values[p];
            }
        }
        d
    }
}
