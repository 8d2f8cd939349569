use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols);
        DenseMatrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut t = DenseMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum()).collect()
    }

    /// `self^T x`
    pub fn tr_matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.rows);
        let mut y = vec![0.0; self.cols];
        for (i, xi) in x.iter().enumerate() {
            for (yj, a) in y.iter_mut().zip(self.row(i)) {
                *yj += a * xi;
            }
        }
        y
    }

    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.cols, other.rows);
        let mut c = DenseMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let (src, dst) = (other.row(k), &mut c.data[i * other.cols..(i + 1) * other.cols]);
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += a * s;
                }
            }
        }
        c
    }

    /// `self^T self`, symmetric by construction.
    pub fn gram(&self) -> DenseMatrix {
        let n = self.cols;
        let mut g = DenseMatrix::zeros(n, n);
        for i in 0..self.rows {
            let r = self.row(i);
            for a in 0..n {
                let ra = r[a];
                if ra == 0.0 {
                    continue;
                }
                for b in a..n {
                    g.data[a * n + b] += ra * r[b];
                }
            }
        }
        for a in 0..n {
            for b in 0..a {
                g.data[a * n + b] = g.data[b * n + a];
            }
        }
        g
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Cholesky factor `A = L L^T` of a dense symmetric positive definite
/// matrix. Only the lower triangle of the input is read.
#[derive(Debug, Clone)]
pub struct DenseCholesky {
    l: DenseMatrix,
}

impl DenseCholesky {
    /// Fails when a pivot drops below `rel_tol` times its diagonal entry.
    pub fn factor(a: &DenseMatrix, rel_tol: f64) -> Option<DenseCholesky> {
        let n = a.rows();
        assert_eq!(n, a.cols());
        let mut l = DenseMatrix::zeros(n, n);
        for j in 0..n {
            let lj = l.row(j);
            let d = a[(j, j)] - lj[..j].iter().map(|v| v * v).sum::<f64>();
            if !(d > rel_tol * a[(j, j)]) || !d.is_finite() {
                return None;
            }
            let djj = libm::sqrt(d);
            l[(j, j)] = djj;
            for i in j + 1..n {
                let (ri, rj) = (i * n, j * n);
                let s: f64 = (0..j).map(|k| l.data[ri + k] * l.data[rj + k]).sum();
                l.data[ri + j] = (a[(i, j)] - s) / djj;
            }
        }
        Some(DenseCholesky { l })
    }

    pub fn dim(&self) -> usize {
        self.l.rows()
    }

    pub fn factor_matrix(&self) -> &DenseMatrix {
        &self.l
    }

    /// Overwrites `b` with `L^{-1} b`.
    pub fn forward(&self, b: &mut [f64]) {
        let n = self.dim();
        for i in 0..n {
            let r = self.l.row(i);
            let s: f64 = r[..i].iter().zip(&b[..i]).map(|(a, x)| a * x).sum();
            b[i] = (b[i] - s) / r[i];
        }
    }

    /// Overwrites `b` with `L^{-T} b`.
    pub fn backward(&self, b: &mut [f64]) {
        let n = self.dim();
        for i in (0..n).rev() {
            b[i] /= self.l[(i, i)];
            let bi = b[i];
            for (k, bk) in b[..i].iter_mut().enumerate() {
                *bk -= self.l[(i, k)] * bi;
            }
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.forward(&mut x);
        self.backward(&mut x);
        x
    }

    /// `L^{-1} B` for every column of `B` at once.
    pub fn forward_matrix(&self, b: &DenseMatrix) -> DenseMatrix {
        let n = self.dim();
        assert_eq!(b.rows(), n);
        let m = b.cols();
        let mut w = b.clone();
        for i in 0..n {
            let li = self.l.row(i);
            let (done, rest) = w.data.split_at_mut(i * m);
            let wi = &mut rest[..m];
            for (k, lik) in li[..i].iter().enumerate() {
                if *lik == 0.0 {
                    continue;
                }
                for (a, b) in wi.iter_mut().zip(&done[k * m..(k + 1) * m]) {
                    *a -= lik * b;
                }
            }
            let d = li[i];
            for a in wi.iter_mut() {
                *a /= d;
            }
        }
        w
    }

    /// `A^{-1} B`.
    pub fn solve_matrix(&self, b: &DenseMatrix) -> DenseMatrix {
        let mut x = self.forward_matrix(b);
        let n = self.dim();
        let m = b.cols();
        for i in (0..n).rev() {
            let d = self.l[(i, i)];
            for a in x.row_mut(i) {
                *a /= d;
            }
            let (head, tail) = x.data.split_at_mut(i * m);
            let xi = &tail[..m];
            for k in 0..i {
                let lik = self.l[(i, k)];
                if lik == 0.0 {
                    continue;
                }
                for (a, b) in head[k * m..(k + 1) * m].iter_mut().zip(xi) {
                    *a -= lik * b;
                }
            }
        }
        x
    }
}
