//! Positive-weight quadrature on the reference triangle
//! `{x, y >= 0, x + y <= 1}` and Gauss-Legendre rules on edges.
//!
//! Degrees up to 6 use the classical symmetric tables. Higher degrees use
//! collapsed (conical product) Gauss-Jacobi rules, which have positive
//! weights and interior points for every degree.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

pub const MAX_DEGREE: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    /// Barycentric coordinates `(l0, l1, l2)`; the reference point is
    /// `(x, y) = (l1, l2)`.
    pub points: Vec<[f64; 3]>,
    /// Weights summing to the reference area 1/2.
    pub weights: Vec<f64>,
    pub exact_degree: usize,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Reference coordinates of point `q`.
    pub fn ref_point(&self, q: usize) -> [f64; 2] {
        [self.points[q][1], self.points[q][2]]
    }
}

/// Points and weights of a rule mapped onto a physical triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalRule {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

fn push_orbit3(pts: &mut Vec<[f64; 3]>, w: &mut Vec<f64>, a: f64, weight: f64) {
    let b = 1.0 - 2.0 * a;
    for p in [[b, a, a], [a, b, a], [a, a, b]] {
        pts.push(p);
        w.push(weight);
    }
}

fn push_orbit6(pts: &mut Vec<[f64; 3]>, w: &mut Vec<f64>, a: f64, b: f64, weight: f64) {
    let c = 1.0 - a - b;
    for p in [[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]] {
        pts.push(p);
        w.push(weight);
    }
}

fn symmetric_rule(degree: usize) -> QuadratureRule {
    let mut p = Vec::new();
    let mut w = Vec::new();
    let exact = match degree {
        0 | 1 => {
            p.push([1.0 / 3.0; 3]);
            w.push(1.0);
            1
        }
        2 => {
            push_orbit3(&mut p, &mut w, 1.0 / 6.0, 1.0 / 3.0);
            2
        }
        3 | 4 => {
            push_orbit3(&mut p, &mut w, 0.445_948_490_915_965, 0.223_381_589_678_011);
            push_orbit3(&mut p, &mut w, 0.091_576_213_509_771, 0.109_951_743_655_322);
            4
        }
        5 => {
            let s15 = libm::sqrt(15.0);
            p.push([1.0 / 3.0; 3]);
            w.push(9.0 / 40.0);
            push_orbit3(&mut p, &mut w, (6.0 + s15) / 21.0, (155.0 + s15) / 1200.0);
            push_orbit3(&mut p, &mut w, (6.0 - s15) / 21.0, (155.0 - s15) / 1200.0);
            5
        }
        6 => {
            push_orbit3(&mut p, &mut w, 0.249_286_745_170_910, 0.116_786_275_726_379);
            push_orbit3(&mut p, &mut w, 0.063_089_014_491_502, 0.050_844_906_370_207);
            push_orbit6(&mut p, &mut w, 0.053_145_049_844_817, 0.310_352_451_033_784, 0.082_851_075_618_374);
            6
        }
        _ => unreachable!(),
    };
    // tables are normalized to unit area
    for x in &mut w {
        *x *= 0.5;
    }
    QuadratureRule { points: p, weights: w, exact_degree: exact }
}

/// Eigenvalues and squared first eigenvector components of a symmetric
/// tridiagonal matrix (implicit QL with Wilkinson shifts).
fn tridiagonal_eigen(diag: &[f64], off: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = diag.len();
    let mut d = diag.to_vec();
    let mut e = vec![0.0; n];
    e[..n - 1].copy_from_slice(off);
    // only the first row of the eigenvector matrix is needed
    let mut z = vec![0.0; n];
    z[0] = 1.0;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            assert!(iter < 60, "tridiagonal QL did not converge");
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = libm::hypot(g, 1.0);
            g = d[m] - d[l] + e[l] / (g + if g >= 0.0 { r.abs() } else { -r.abs() });
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut underflow = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = libm::hypot(f, g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                let fz = z[i + 1];
                z[i + 1] = s * z[i] + c * fz;
                z[i] = c * z[i] - s * fz;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    let w = z.iter().map(|v| v * v).collect();
    (d, w)
}

/// Gauss-Jacobi rule for the weight `(1-s)^alpha` on [-1, 1] (beta = 0).
fn gauss_jacobi(n: usize, alpha: f64) -> (Vec<f64>, Vec<f64>) {
    let beta = 0.0;
    let ab = alpha + beta;
    let mut diag = Vec::with_capacity(n);
    let mut off = Vec::with_capacity(n.saturating_sub(1));
    for k in 0..n {
        let kf = k as f64;
        let a = if k == 0 {
            (beta - alpha) / (ab + 2.0)
        } else {
            (beta * beta - alpha * alpha) / ((2.0 * kf + ab) * (2.0 * kf + ab + 2.0))
        };
        diag.push(a);
        if k + 1 < n {
            let k1 = kf + 1.0;
            let s = 2.0 * k1 + ab;
            let num = 4.0 * k1 * (k1 + alpha) * (k1 + beta) * (k1 + ab);
            let den = s * s * (s + 1.0) * (s - 1.0);
            off.push(libm::sqrt(num / den));
        }
    }
    // mu0 = int_{-1}^{1} (1-s)^alpha ds
    let mu0 = libm::pow(2.0, alpha + 1.0) / (alpha + 1.0);
    let (x, w) = tridiagonal_eigen(&diag, &off);
    let mut pairs: Vec<(f64, f64)> = x.into_iter().zip(w.into_iter().map(|w| w * mu0)).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// Gauss-Legendre rule on [0, 1] with `n` points.
pub fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_jacobi(n, 0.0);
    (x.iter().map(|s| 0.5 * (s + 1.0)).collect(), w.iter().map(|w| 0.5 * w).collect())
}

/// Edge rule on [0, 1] exact for polynomials of degree `d`.
pub fn edge_rule(d: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if d > MAX_DEGREE {
        return Err(Error::UnsupportedDegree(d));
    }
    Ok(gauss_legendre_unit(d / 2 + 1))
}

fn collapsed_rule(degree: usize) -> QuadratureRule {
    let n = degree / 2 + 1;
    let (u, wu) = gauss_legendre_unit(n);
    let (s, ws) = gauss_jacobi(n, 1.0);
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for (sj, wj) in s.iter().zip(&ws) {
        let v = 0.5 * (sj + 1.0);
        // int_0^1 g(v)(1-v) dv = 1/4 int_{-1}^{1} g (1-s) ds
        let wv = 0.25 * wj;
        for (ui, wi) in u.iter().zip(&wu) {
            let x = ui * (1.0 - v);
            let y = v;
            points.push([1.0 - x - y, x, y]);
            weights.push(wi * wv);
        }
    }
    QuadratureRule { points, weights, exact_degree: 2 * n - 1 }
}

/// Positive-weight rule exact for total degree `d`.
pub fn rule_for_degree(d: usize) -> Result<QuadratureRule> {
    match d {
        0..=6 => Ok(symmetric_rule(d)),
        7..=MAX_DEGREE => Ok(collapsed_rule(d)),
        _ => Err(Error::UnsupportedDegree(d)),
    }
}

/// Affine image of `rule` on the triangle with vertices `coords`; weights
/// are scaled by `|det J|` so that they sum to the triangle area.
pub fn map_to_physical(rule: &QuadratureRule, coords: &[[f64; 2]; 3]) -> Result<PhysicalRule> {
    let [a, b, c] = *coords;
    let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
    let scale = (b[0] - a[0]).abs().max((c[0] - a[0]).abs()).max((b[1] - a[1]).abs()).max((c[1] - a[1]).abs());
    if !(det.abs() > 1e-14 * scale * scale) {
        return Err(Error::Geometry { element: 0, detail: alloc::format!("det J = {det:e}") });
    }
    let points = rule
        .points
        .iter()
        .map(|l| {
            [l[0] * a[0] + l[1] * b[0] + l[2] * c[0], l[0] * a[1] + l[1] * b[1] + l[2] * c[1]]
        })
        .collect();
    let weights = rule.weights.iter().map(|w| w * det.abs()).collect();
    Ok(PhysicalRule { points, weights })
}

/// `int_T x^a y^b` over the reference triangle: `a! b! / (a + b + 2)!`.
pub fn reference_monomial_integral(a: u32, b: u32) -> f64 {
    let mut v = 1.0;
    // a! b! / (a+b+2)! = 1 / ((a+b+2)(a+b+1) * C(a+b, a))
    for k in 1..=b {
        v *= k as f64 / (a + k) as f64;
    }
    v / (((a + b + 2) * (a + b + 1)) as f64)
}
