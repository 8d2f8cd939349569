//! Jacobi-preconditioned conjugate gradients.

use alloc::vec;
use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `A x = b` for symmetric positive definite `A` given as a
/// matrix-vector product. Stops when `‖b − A x‖ ≤ tol ‖b‖`.
pub fn pcg<F>(apply: F, diagonal: &[f64], b: &[f64], tol: f64, max_iter: usize) -> CgOutcome
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let n = b.len();
    let inv: Vec<f64> = diagonal.iter().map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 }).collect();
    let bnorm = libm::sqrt(dot(b, b));
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return CgOutcome { x, iterations: 0, relative_residual: 0.0, converged: true };
    }
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut rel = 1.0;
    for it in 0..max_iter {
        let ap = apply(&p);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return CgOutcome { x, iterations: it, relative_residual: rel, converged: false };
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        rel = libm::sqrt(dot(&r, &r)) / bnorm;
        if rel <= tol {
            return CgOutcome { x, iterations: it + 1, relative_residual: rel, converged: true };
        }
        for i in 0..n {
            z[i] = r[i] * inv[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    CgOutcome { x, iterations: max_iter, relative_residual: rel, converged: false }
}
