//! Plate data: thickness, material law, load, boundary partition and the
//! benchmark solutions.
//!
//! Symmetric tensors are stored as `[xx, yy, xy]`.

use alloc::format;
use alloc::string::ToString;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;

use crate::mesh::{BcKind, Mesh};
use crate::{Error, Result};

/// Plane stress constitutive tensor `C`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MaterialTensor {
    Identity,
    /// `C e = D ((1 - nu) e + nu tr(e) I)` with `D = E / (12 (1 - nu^2))`.
    PlaneStress { modulus: f64, poisson: f64 },
}

impl MaterialTensor {
    fn lame(self) -> (f64, f64) {
        match self {
            MaterialTensor::Identity => (1.0, 0.0),
            MaterialTensor::PlaneStress { modulus, poisson } => {
                let d = modulus / (12.0 * (1.0 - poisson * poisson));
                (d * (1.0 - poisson), d * poisson)
            }
        }
    }

    pub fn validate(self) -> Result<()> {
        if let MaterialTensor::PlaneStress { modulus, poisson } = self {
            if !(modulus > 0.0) || !(poisson > -1.0 && poisson <= 0.5) {
                return Err(Error::Config(format!("invalid plane stress parameters E={modulus}, nu={poisson}")));
            }
        }
        Ok(())
    }

    pub fn apply(self, s: [f64; 3]) -> [f64; 3] {
        let (a, b) = self.lame();
        let tr = s[0] + s[1];
        [a * s[0] + b * tr, a * s[1] + b * tr, a * s[2]]
    }

    pub fn apply_inverse(self, s: [f64; 3]) -> [f64; 3] {
        let (a, b) = self.lame();
        let tr = s[0] + s[1];
        let c = b / (a + 2.0 * b);
        [(s[0] - c * tr) / a, (s[1] - c * tr) / a, s[2] / a]
    }
}

/// Right-hand side `f` of the plate equation.
#[derive(Clone)]
pub enum Load {
    Constant(f64),
    Field(Arc<dyn Fn([f64; 2]) -> f64 + Send + Sync>),
}

impl Load {
    pub fn eval(&self, x: [f64; 2]) -> f64 {
        match self {
            Load::Constant(c) => *c,
            Load::Field(f) => f(x),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Load::Constant(c) if *c == 0.0)
    }
}

impl fmt::Debug for Load {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Load::Constant(c) => write!(f, "Constant({c})"),
            Load::Field(_) => f.write_str("Field(..)"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ModelConfig {
    pub t: f64,
    pub material: MaterialTensor,
    pub load: Load,
    /// Boundary condition kinds present on the mesh boundary.
    pub kinds: Vec<BcKind>,
    /// 1 without soft clamped / soft simple support parts, `t` otherwise.
    pub t_star: f64,
    /// No free boundary: `p` and the test component `v` live in quotient
    /// spaces modulo constants.
    pub quotient_mode: bool,
}

impl ModelConfig {
    pub fn new(mesh: &Mesh, t: f64, material: MaterialTensor, load: Load) -> Result<ModelConfig> {
        if !(t > 0.0 && t <= 1.0) {
            return Err(Error::Config(format!("thickness t = {t} outside (0, 1]")));
        }
        material.validate()?;
        let mut kinds: Vec<BcKind> = mesh.boundary_edges().filter_map(|e| mesh.edge_kind(e)).collect();
        kinds.sort();
        kinds.dedup();
        if kinds.iter().all(|k| !k.is_deflection_fixed()) {
            return Err(Error::Config("the boundary has no part with fixed deflection".to_string()));
        }
        let soft = kinds.contains(&BcKind::SoftClamped) || kinds.contains(&BcKind::SoftSimpleSupport);
        let quotient_mode = !kinds.contains(&BcKind::Free);
        Ok(ModelConfig { t, material, load, kinds, t_star: if soft { t } else { 1.0 }, quotient_mode })
    }

    /// Shear correction factor times shear modulus, fixed to one.
    pub fn kappa_g(&self) -> f64 {
        1.0
    }
}

/// Exact fields at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointValues {
    pub u: f64,
    pub grad_u: [f64; 2],
    pub psi: [f64; 2],
    pub moment: [f64; 3],
}

/// Closed-form solution of a benchmark (identity material).
pub trait ExactSolution: Send + Sync {
    fn name(&self) -> &str;
    fn values(&self, x: [f64; 2]) -> PointValues;
    /// `grad_psi[i][j] = d_j psi_i`.
    fn grad_psi(&self, x: [f64; 2]) -> [[f64; 2]; 2];
    fn load(&self, x: [f64; 2]) -> f64;
    /// Boundary kinds under which the formulas solve the plate problem.
    fn boundary_kind(&self) -> BcKind;
}

/// `g(s) = s^3 (s - 1)^3` and its first four derivatives.
fn g_poly(s: f64) -> [f64; 5] {
    let s2 = s * s;
    let s3 = s2 * s;
    [
        s3 * (s3 - 3.0 * s2 + 3.0 * s - 1.0),
        6.0 * s2 * s3 - 15.0 * s2 * s2 + 12.0 * s3 - 3.0 * s2,
        30.0 * s2 * s2 - 60.0 * s3 + 36.0 * s2 - 6.0 * s,
        120.0 * s3 - 180.0 * s2 + 72.0 * s - 6.0,
        360.0 * s2 - 360.0 * s + 72.0,
    ]
}

/// Polynomial benchmark on the unit square, hard clamped:
/// `psi = grad phi`, `phi = x^3 (x-1)^3 y^3 (y-1)^3 / 3`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolynomialSolution {
    pub t: f64,
}

pub fn example1_polynomial(t: f64) -> PolynomialSolution {
    PolynomialSolution { t }
}

impl PolynomialSolution {
    pub fn phi(&self, x: [f64; 2]) -> f64 {
        g_poly(x[0])[0] * g_poly(x[1])[0] / 3.0
    }
}

impl ExactSolution for PolynomialSolution {
    fn name(&self) -> &str {
        "poly"
    }

    fn values(&self, x: [f64; 2]) -> PointValues {
        let gx = g_poly(x[0]);
        let gy = g_poly(x[1]);
        let t2 = self.t * self.t;
        let phi = gx[0] * gy[0] / 3.0;
        let lap = (gx[2] * gy[0] + gx[0] * gy[2]) / 3.0;
        let grad_lap = [(gx[3] * gy[0] + gx[1] * gy[2]) / 3.0, (gx[2] * gy[1] + gx[0] * gy[3]) / 3.0];
        let psi = [gx[1] * gy[0] / 3.0, gx[0] * gy[1] / 3.0];
        PointValues {
            u: phi - t2 * lap,
            grad_u: [psi[0] - t2 * grad_lap[0], psi[1] - t2 * grad_lap[1]],
            psi,
            moment: [-gx[2] * gy[0] / 3.0, -gx[0] * gy[2] / 3.0, -gx[1] * gy[1] / 3.0],
        }
    }

    fn grad_psi(&self, x: [f64; 2]) -> [[f64; 2]; 2] {
        let gx = g_poly(x[0]);
        let gy = g_poly(x[1]);
        let xy = gx[1] * gy[1] / 3.0;
        [[gx[2] * gy[0] / 3.0, xy], [xy, gx[0] * gy[2] / 3.0]]
    }

    fn load(&self, x: [f64; 2]) -> f64 {
        let gx = g_poly(x[0]);
        let gy = g_poly(x[1]);
        (gx[4] * gy[0] + 2.0 * gx[2] * gy[2] + gx[0] * gy[4]) / 3.0
    }

    fn boundary_kind(&self) -> BcKind {
        BcKind::HardClamped
    }
}

/// Kirchhoff plate `Delta^2 u_K = 1` on the unit square with simple support,
/// as a truncated double sine series (indices `m, n <= n_terms`).
#[derive(Debug, Clone, PartialEq)]
pub struct KirchhoffSolution {
    pub t: f64,
    pub n_terms: usize,
    /// Coefficients for odd `m, n`, row `i` holds `m = 2 i + 1`.
    coeffs: Vec<f64>,
    n_odd: usize,
}

/// Coefficient of `sin(m pi x) sin(n pi y)` in `u_K`.
pub fn kirchhoff_coefficient(m: usize, n: usize) -> f64 {
    let (mf, nf) = (m as f64, n as f64);
    let num = 4.0 * (1.0 - libm::cos(mf * PI)) * (1.0 - libm::cos(nf * PI));
    let s = mf * mf + nf * nf;
    num / (libm::pow(PI, 6.0) * mf * nf * s * s)
}

pub fn example2_kirchhoff(t: f64, n_terms: usize) -> KirchhoffSolution {
    let n_odd = n_terms.div_ceil(2);
    let mut coeffs = Vec::with_capacity(n_odd * n_odd);
    for i in 0..n_odd {
        for j in 0..n_odd {
            let (m, n) = ((2 * i + 1) as f64, (2 * j + 1) as f64);
            let s = m * m + n * n;
            // both cosine factors equal 2 for odd indices
            coeffs.push(16.0 / (libm::pow(PI, 6.0) * m * n * s * s));
        }
    }
    KirchhoffSolution { t, n_terms, coeffs, n_odd }
}

impl KirchhoffSolution {
    /// `sin(k pi s)` and `cos(k pi s)` for odd `k`, by rotation recurrence.
    fn trig(&self, s: f64) -> (Vec<f64>, Vec<f64>) {
        let (s1, c1) = (libm::sin(PI * s), libm::cos(PI * s));
        let (s2, c2) = (2.0 * s1 * c1, c1 * c1 - s1 * s1);
        let mut sn = Vec::with_capacity(self.n_odd);
        let mut cn = Vec::with_capacity(self.n_odd);
        let (mut sk, mut ck) = (s1, c1);
        for _ in 0..self.n_odd {
            sn.push(sk);
            cn.push(ck);
            let next = (sk * c2 + ck * s2, ck * c2 - sk * s2);
            sk = next.0;
            ck = next.1;
        }
        (sn, cn)
    }

    /// `[u_K, d_x, d_y, Delta, d_xx, d_yy, d_xy, d_x Delta, d_y Delta]`.
    pub fn derivatives(&self, x: [f64; 2]) -> [f64; 9] {
        let (sx, cx) = self.trig(x[0]);
        let (sy, cy) = self.trig(x[1]);
        let mut acc = [0.0f64; 9];
        for i in 0..self.n_odd {
            let row = &self.coeffs[i * self.n_odd..(i + 1) * self.n_odd];
            let (mut a0, mut a1, mut a2, mut a3) = (0.0, 0.0, 0.0, 0.0);
            for j in 0..self.n_odd {
                let n = (2 * j + 1) as f64;
                let a = row[j];
                let an = a * n;
                a0 += a * sy[j];
                a1 += an * cy[j];
                a2 += an * n * sy[j];
                a3 += an * n * n * cy[j];
            }
            let m = (2 * i + 1) as f64;
            let m2 = m * m;
            acc[0] += sx[i] * a0;
            acc[1] += m * cx[i] * a0;
            acc[2] += sx[i] * a1;
            acc[3] += m2 * sx[i] * a0 + sx[i] * a2;
            acc[4] += m2 * sx[i] * a0;
            acc[5] += sx[i] * a2;
            acc[6] += m * cx[i] * a1;
            acc[7] += m2 * m * cx[i] * a0 + m * cx[i] * a2;
            acc[8] += m2 * sx[i] * a1 + sx[i] * a3;
        }
        let p = PI;
        let p2 = p * p;
        [
            acc[0],
            p * acc[1],
            p * acc[2],
            -p2 * acc[3],
            -p2 * acc[4],
            -p2 * acc[5],
            p2 * acc[6],
            -p2 * p * acc[7],
            -p2 * p * acc[8],
        ]
    }
}

impl ExactSolution for KirchhoffSolution {
    fn name(&self) -> &str {
        "kirchhoff"
    }

    fn values(&self, x: [f64; 2]) -> PointValues {
        let d = self.derivatives(x);
        let t2 = self.t * self.t;
        PointValues {
            u: d[0] - t2 * d[3],
            grad_u: [d[1] - t2 * d[7], d[2] - t2 * d[8]],
            psi: [d[1], d[2]],
            moment: [-d[4], -d[5], -d[6]],
        }
    }

    fn grad_psi(&self, x: [f64; 2]) -> [[f64; 2]; 2] {
        let d = self.derivatives(x);
        [[d[4], d[6]], [d[6], d[5]]]
    }

    fn load(&self, _x: [f64; 2]) -> f64 {
        1.0
    }

    fn boundary_kind(&self) -> BcKind {
        BcKind::HardSimpleSupport
    }
}

/// L-shaped benchmark without closed-form solution: unit load, hard clamped
/// along the two sides meeting the re-entrant corner, free elsewhere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LShapeProblem {
    pub bc: crate::mesh::LShapeBc,
    pub load: f64,
}

pub fn example3_lshape() -> LShapeProblem {
    LShapeProblem { bc: crate::mesh::LShapeBc::clamped_corner(), load: 1.0 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_lshape, build_structured_square, SquareBc};

    fn points(n: usize) -> Vec<[f64; 2]> {
        // deterministic scattered points in (0.05, 0.95)^2
        (0..n)
            .map(|i| {
                let a = libm::fmod(0.618_033_988_75 * (i as f64 + 1.0), 1.0);
                let b = libm::fmod(0.754_877_666_25 * (i as f64 + 1.0), 1.0);
                [0.05 + 0.9 * a, 0.05 + 0.9 * b]
            })
            .collect()
    }

    #[test]
    fn material_inverse() {
        for m in [MaterialTensor::Identity, MaterialTensor::PlaneStress { modulus: 2.5, poisson: 0.3 }] {
            let s = [0.3, -1.2, 0.7];
            let r = m.apply(m.apply_inverse(s));
            for i in 0..3 {
                assert!((r[i] - s[i]).abs() < 1e-14);
            }
        }
        assert_eq!(MaterialTensor::Identity.apply([1.0, 2.0, 3.0]), [1.0, 2.0, 3.0]);
    }

    #[test]
    fn polynomial_fields() {
        let ex = example1_polynomial(0.1);
        for y in [0.0, 0.3, 0.9] {
            assert_eq!(ex.values([0.0, y]).psi, [0.0, 0.0]);
        }
        let h = 1e-5;
        for x in points(20) {
            let s = x[0];
            let gp = g_poly(s);
            assert!((gp[1] - 3.0 * s * s * (s - 1.0) * (s - 1.0) * (2.0 * s - 1.0)).abs() < 1e-12);
            let v = ex.values(x);
            // M + eps(psi) = 0 with psi = grad phi
            let gpsi = ex.grad_psi(x);
            assert!((v.moment[0] + gpsi[0][0]).abs() < 1e-10);
            assert!((v.moment[1] + gpsi[1][1]).abs() < 1e-10);
            assert!((v.moment[2] + 0.5 * (gpsi[0][1] + gpsi[1][0])).abs() < 1e-10);
            // psi = grad phi by central differences
            let fx = (ex.phi([x[0] + h, x[1]]) - ex.phi([x[0] - h, x[1]])) / (2.0 * h);
            let fy = (ex.phi([x[0], x[1] + h]) - ex.phi([x[0], x[1] - h])) / (2.0 * h);
            assert!((fx - v.psi[0]).abs() < 1e-10 && (fy - v.psi[1]).abs() < 1e-10);
            // grad u = t^2 Div M + psi, checked by differencing u
            let ux = (ex.values([x[0] + h, x[1]]).u - ex.values([x[0] - h, x[1]]).u) / (2.0 * h);
            let uy = (ex.values([x[0], x[1] + h]).u - ex.values([x[0], x[1] - h]).u) / (2.0 * h);
            assert!((ux - v.grad_u[0]).abs() < 1e-9 && (uy - v.grad_u[1]).abs() < 1e-9);
        }
    }

    #[test]
    fn polynomial_load_is_minus_div_div_m() {
        let ex = example1_polynomial(1.0);
        let m = |x: [f64; 2]| ex.values(x).moment;
        let div_div = |x: [f64; 2], h: f64| {
            let dxx = (m([x[0] + h, x[1]])[0] - 2.0 * m(x)[0] + m([x[0] - h, x[1]])[0]) / (h * h);
            let dyy = (m([x[0], x[1] + h])[1] - 2.0 * m(x)[1] + m([x[0], x[1] - h])[1]) / (h * h);
            let dxy = (m([x[0] + h, x[1] + h])[2] - m([x[0] + h, x[1] - h])[2] - m([x[0] - h, x[1] + h])[2]
                + m([x[0] - h, x[1] - h])[2])
                / (4.0 * h * h);
            dxx + dyy + 2.0 * dxy
        };
        for x in points(10) {
            // Richardson extrapolation of the second differences
            let h = 2e-3;
            let f = -(4.0 * div_div(x, h / 2.0) - div_div(x, h)) / 3.0;
            assert!((f - ex.load(x)).abs() < 1e-8 * (1.0 + ex.load(x).abs()), "{f} {}", ex.load(x));
        }
    }

    #[test]
    fn kirchhoff_coefficients_and_truncation() {
        assert_eq!(kirchhoff_coefficient(2, 3), 0.0);
        assert_eq!(kirchhoff_coefficient(1, 4), 0.0);
        assert!((kirchhoff_coefficient(1, 1) - 4.0 / libm::pow(PI, 6.0)).abs() < 1e-18);
        assert!((kirchhoff_coefficient(1, 1) - 4.1606e-3).abs() < 1e-7);
        let k = example2_kirchhoff(0.1, 7);
        for (i, j) in [(0, 0), (1, 2), (3, 3)] {
            let c = k.coeffs[i * k.n_odd + j];
            assert!((c - kirchhoff_coefficient(2 * i + 1, 2 * j + 1)).abs() < 1e-15 * c);
        }
        let u50 = example2_kirchhoff(1e-2, 50).values([0.5, 0.5]).u;
        let u100 = example2_kirchhoff(1e-2, 100).values([0.5, 0.5]).u;
        assert!((u50 - u100).abs() < 1e-8, "{}", (u50 - u100).abs());
        // boundary values of u_K and its Laplacian
        for s in [0.0, 0.25, 0.5] {
            for p in [[0.0, s], [1.0, s], [s, 0.0], [s, 1.0]] {
                let d = k.derivatives(p);
                assert!(d[0].abs() < 1e-15 && d[3].abs() < 1e-13);
            }
        }
    }

    #[test]
    fn kirchhoff_consistency() {
        let k = example2_kirchhoff(0.05, 41);
        let h = 1e-5;
        for x in points(8) {
            let v = k.values(x);
            let d = |p: [f64; 2]| k.derivatives(p);
            let fx = (d([x[0] + h, x[1]])[0] - d([x[0] - h, x[1]])[0]) / (2.0 * h);
            assert!((fx - v.psi[0]).abs() < 1e-8);
            let lx = (d([x[0] + h, x[1]])[3] - d([x[0] - h, x[1]])[3]) / (2.0 * h);
            assert!((lx - d(x)[7]).abs() < 1e-6);
            let g = k.grad_psi(x);
            assert!((v.moment[2] + g[0][1]).abs() < 1e-12);
        }
    }

    #[test]
    fn config_flags() {
        let hc = build_structured_square(2, SquareBc::uniform(BcKind::HardClamped)).unwrap();
        let c = ModelConfig::new(&hc, 1e-2, MaterialTensor::Identity, Load::Constant(1.0)).unwrap();
        assert!(c.quotient_mode);
        assert_eq!(c.t_star, 1.0);
        let sc = build_structured_square(2, SquareBc { left: BcKind::SoftClamped, ..SquareBc::uniform(BcKind::Free) })
            .unwrap();
        let c = ModelConfig::new(&sc, 1e-2, MaterialTensor::Identity, Load::Constant(1.0)).unwrap();
        assert!(!c.quotient_mode);
        assert_eq!(c.t_star, 1e-2);
        let l = build_lshape(1, example3_lshape().bc).unwrap();
        let c = ModelConfig::new(&l, 1e-3, MaterialTensor::Identity, Load::Constant(1.0)).unwrap();
        assert!(!c.quotient_mode);
        assert_eq!(c.t_star, 1.0);
        let free = build_structured_square(2, SquareBc::uniform(BcKind::Free)).unwrap();
        assert!(ModelConfig::new(&free, 0.1, MaterialTensor::Identity, Load::Constant(1.0)).is_err());
        assert!(ModelConfig::new(&hc, 0.0, MaterialTensor::Identity, Load::Constant(1.0)).is_err());
    }
}
