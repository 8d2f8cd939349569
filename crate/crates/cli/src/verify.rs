//! Oracle suite: checks the element machinery against independent
//! reference computations.

use std::fmt;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rm_dpg::dpg::{local_b, local_gram, DofLayout, KernelContext};
use rm_dpg::fespaces::{ElementMap, TEST_FIELDS};
use rm_dpg::mesh::{build_structured_square, BoundarySegment, SquareBc};
use rm_dpg::model::{Load, ModelConfig};
use rm_dpg::quadrature::{map_to_physical, rule_for_degree, MAX_DEGREE};
use rm_dpg::{BcKind, MaterialTensor, Mesh};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Debug hook: flip the sign of one moment-trace term in the element
    /// kernels. The orthogonality check must then fail.
    pub flip_trace_sign: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions { seed: 20240607, flip_trace_sign: false }
    }
}

pub fn run_all(opts: &VerifyOptions) -> Vec<CheckResult> {
    vec![
        check_quadrature(),
        check_bilinear_form(opts.seed, 50),
        check_trace_orthogonality(opts.flip_trace_sign),
        check_gram_spd(opts.seed, 100),
    ]
}

/// `a! b! / (a + b + 2)!`, the integral of `x^a y^b` over the reference
/// triangle.
pub fn monomial_integral(a: u32, b: u32) -> f64 {
    // a! b! / (a+b+2)! = 1 / ((a+b+2)(a+b+1) * C(a+b, a))
    let mut binom = 1.0;
    for k in 1..=a {
        binom = binom * (b + k) as f64 / k as f64;
    }
    let n = (a + b) as f64;
    1.0 / ((n + 2.0) * (n + 1.0) * binom)
}

pub fn check_quadrature() -> CheckResult {
    let mut worst = 0.0f64;
    let mut detail = String::new();
    for d in 1..=MAX_DEGREE {
        let rule = match rule_for_degree(d) {
            Ok(r) => r,
            Err(e) => return CheckResult { name: "quadrature monomials", passed: false, detail: e.to_string() },
        };
        if rule.weights.iter().any(|&w| w <= 0.0) {
            detail = format!("degree {d}: non-positive weight");
            worst = f64::INFINITY;
        }
        for a in 0..=d as u32 {
            for b in 0..=(d as u32 - a) {
                let q: f64 = (0..rule.len())
                    .map(|i| {
                        let p = rule.ref_point(i);
                        rule.weights[i] * p[0].powi(a as i32) * p[1].powi(b as i32)
                    })
                    .sum();
                let exact = monomial_integral(a, b);
                let err = (q - exact).abs() / exact;
                if err > worst {
                    worst = err;
                    if detail.is_empty() || err > 1e-13 {
                        detail = format!("degree {d}, x^{a} y^{b}");
                    }
                }
            }
        }
    }
    CheckResult {
        name: "quadrature monomials",
        passed: worst <= 1e-13,
        detail: format!("degrees 1..={MAX_DEGREE}, max relative error {worst:.2e} ({detail})"),
    }
}

/// Test functions and first derivatives at a point, per field
/// `chi_x, chi_y, rho_x, rho_y, S_xx, S_yy, S_xy, v`.
#[derive(Debug, Clone, Copy, Default)]
struct TestPoint {
    val: [f64; 8],
    dx: [f64; 8],
    dy: [f64; 8],
}

/// Random cubic polynomials in scaled coordinates around a centre.
struct RandomCubics {
    centre: [f64; 2],
    h: f64,
    coef: [[f64; 10]; 8],
}

const EXPONENTS: [(i32, i32); 10] = [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2), (3, 0), (2, 1), (1, 2), (0, 3)];

impl RandomCubics {
    fn new(rng: &mut ChaCha8Rng, coords: &[[f64; 2]; 3]) -> Self {
        let centre = [(coords[0][0] + coords[1][0] + coords[2][0]) / 3.0, (coords[0][1] + coords[1][1] + coords[2][1]) / 3.0];
        let h = (0..3).map(|i| dist(coords[i], coords[(i + 1) % 3])).fold(0.0, f64::max);
        let mut coef = [[0.0; 10]; 8];
        for row in coef.iter_mut() {
            for c in row.iter_mut() {
                *c = rng.gen_range(-1.0..1.0);
            }
        }
        RandomCubics { centre, h, coef }
    }

    fn eval(&self, x: [f64; 2]) -> TestPoint {
        let s = [(x[0] - self.centre[0]) / self.h, (x[1] - self.centre[1]) / self.h];
        let mut p = TestPoint::default();
        for f in 0..8 {
            for (k, &(a, b)) in EXPONENTS.iter().enumerate() {
                let c = self.coef[f][k];
                p.val[f] += c * s[0].powi(a) * s[1].powi(b);
                if a > 0 {
                    p.dx[f] += c * a as f64 * s[0].powi(a - 1) * s[1].powi(b) / self.h;
                }
                if b > 0 {
                    p.dy[f] += c * b as f64 * s[0].powi(a) * s[1].powi(b - 1) / self.h;
                }
            }
        }
        p
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt()
}

/// Coefficients of `f` (8 fields) in the element's broken test basis:
/// `c_i = (f, phi_i)_T / det J` since the basis is orthonormal on the
/// reference triangle.
fn project_test(ctx: &KernelContext, mesh: &Mesh, t: usize, f: impl Fn([f64; 2]) -> [f64; 8]) -> Vec<f64> {
    let n = ctx.per_field();
    let rule = rule_for_degree(8).expect("degree 8 rule");
    let coords = mesh.triangle_coords(t);
    let map = ElementMap::new(&coords);
    let mut out = vec![0.0; TEST_FIELDS * n];
    let (mut v, mut dx, mut dy) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for q in 0..rule.len() {
        let r = rule.ref_point(q);
        ctx.test.eval(r, &mut v, &mut dx, &mut dy);
        let val = f(map.to_physical(r));
        for fld in 0..TEST_FIELDS {
            for i in 0..n {
                out[fld * n + i] += rule.weights[q] * val[fld] * v[i];
            }
        }
    }
    out
}

/// Trial functions of one element evaluated from a full coefficient vector,
/// using Whitney forms built from scratch.
struct TrialEval<'a> {
    mesh: &'a Mesh,
    layout: &'a DofLayout,
    full: &'a [f64],
}

#[derive(Debug, Default, Clone, Copy)]
struct TrialPoint {
    psi: [f64; 2],
    eta: [f64; 2],
    m: [f64; 3],
    p: f64,
    psi_tr: [f64; 2],
    /// `grad_psi_tr[i][j] = d_j psi_tr_i`.
    grad_psi_tr: [[f64; 2]; 2],
    eta_tr: [f64; 2],
    rot_eta_tr: f64,
    /// Rows of the moment trace and their divergences.
    m_tr: [[f64; 2]; 2],
    div_m_tr: [f64; 2],
    p_tr: f64,
    grad_p_tr: [f64; 2],
}

impl TrialEval<'_> {
    fn eval(&self, t: usize, x: [f64; 2]) -> TrialPoint {
        let tri = &self.mesh.triangles()[t];
        let v = tri.vertices;
        let c = v.map(|i| self.mesh.vertices()[i]);
        let two_a = (c[1][0] - c[0][0]) * (c[2][1] - c[0][1]) - (c[2][0] - c[0][0]) * (c[1][1] - c[0][1]);
        let mut lam = [0.0; 3];
        let mut grad = [[0.0; 2]; 3];
        for i in 0..3 {
            let (j, k) = ((i + 1) % 3, (i + 2) % 3);
            grad[i] = [(c[j][1] - c[k][1]) / two_a, (c[k][0] - c[j][0]) / two_a];
            lam[i] = ((c[j][0] - x[0]) * (c[k][1] - x[1]) - (c[k][0] - x[0]) * (c[j][1] - x[1])) / two_a;
        }
        let f = &self.full;
        let b = 8 * t;
        let mut p = TrialPoint {
            psi: [f[b], f[b + 1]],
            eta: [f[b + 2], f[b + 3]],
            m: [f[b + 4], f[b + 5], f[b + 6]],
            p: f[b + 7],
            ..TrialPoint::default()
        };
        for i in 0..3 {
            let ps = self.layout.psi_trace_offset() + 2 * v[i];
            let pt = f[self.layout.p_trace_offset() + v[i]];
            for r in 0..2 {
                p.psi_tr[r] += f[ps + r] * lam[i];
                for d in 0..2 {
                    p.grad_psi_tr[r][d] += f[ps + r] * grad[i][d];
                }
            }
            p.p_tr += pt * lam[i];
            p.grad_p_tr[0] += pt * grad[i][0];
            p.grad_p_tr[1] += pt * grad[i][1];
        }
        let local = |g: usize| v.iter().position(|&w| w == g).expect("edge vertex belongs to triangle");
        for &e in &self.mesh.triangle_edges(t) {
            let [ga, gb] = self.mesh.edges()[e].vertices;
            let (ia, ib) = (local(ga), local(gb));
            let len = dist(self.mesh.vertices()[ga], self.mesh.vertices()[gb]);
            // N = |E| (l_a grad l_b - l_b grad l_a), tangential trace 1 along a -> b
            let nv = [
                len * (lam[ia] * grad[ib][0] - lam[ib] * grad[ia][0]),
                len * (lam[ia] * grad[ib][1] - lam[ib] * grad[ia][1]),
            ];
            let rot = 2.0 * len * (grad[ia][0] * grad[ib][1] - grad[ia][1] * grad[ib][0]);
            // RT0 with unit normal flux: sigma = (N_y, -N_x), div sigma = rot N
            let sigma = [nv[1], -nv[0]];
            let ce = f[self.layout.eta_trace_offset() + e];
            p.eta_tr[0] += ce * nv[0];
            p.eta_tr[1] += ce * nv[1];
            p.rot_eta_tr += ce * rot;
            for r in 0..2 {
                let cm = f[self.layout.m_trace_offset() + 2 * e + r];
                p.m_tr[r][0] += cm * sigma[0];
                p.m_tr[r][1] += cm * sigma[1];
                p.div_m_tr[r] += cm * rot;
            }
        }
        p
    }
}

/// The ultraweak bilinear form at one point (identity material).
fn b_density(tt: f64, u: &TrialPoint, w: &TestPoint) -> f64 {
    let chi = [w.val[0], w.val[1]];
    let grad_chi = [[w.dx[0], w.dy[0]], [w.dx[1], w.dy[1]]];
    let rho = [w.val[2], w.val[3]];
    let rot_rho = w.dx[3] - w.dy[2];
    let rot_chi = w.dx[1] - w.dy[0];
    let s = [[w.val[4], w.val[6]], [w.val[6], w.val[5]]];
    let div_s = [w.dx[4] + w.dy[6], w.dx[6] + w.dy[5]];
    let v = w.val[7];
    let curl_v = [w.dy[7], -w.dx[7]];
    let m = [[u.m[0], u.m[2]], [u.m[2], u.m[1]]];
    let dot = |a: [f64; 2], b: [f64; 2]| a[0] * b[0] + a[1] * b[1];
    let ddot = |a: [[f64; 2]; 2], b: [[f64; 2]; 2]| a[0][0] * b[0][0] + a[0][1] * b[0][1] + a[1][0] * b[1][0] + a[1][1] * b[1][1];
    let eps_chi = [[grad_chi[0][0], 0.5 * (grad_chi[0][1] + grad_chi[1][0])], [0.5 * (grad_chi[0][1] + grad_chi[1][0]), grad_chi[1][1]]];
    let rot_psi_tr = u.grad_psi_tr[1][0] - u.grad_psi_tr[0][1];
    let curl_p_tr = [u.grad_p_tr[1], -u.grad_p_tr[0]];
    let chi_t_rho = [chi[0] + tt * rho[0], chi[1] + tt * rho[1]];
    let rot_mix = rot_chi + tt * rot_rho;

    dot(u.psi, [curl_v[0] - div_s[0], curl_v[1] - div_s[1]]) + tt * dot(u.eta, curl_v) - dot(u.eta, rho)
        + ddot(m, s)
        + ddot(m, eps_chi)
        + u.p * rot_mix
        + dot(u.psi_tr, [div_s[0] - curl_v[0], div_s[1] - curl_v[1]])
        + ddot(u.grad_psi_tr, s)
        + rot_psi_tr * v
        - tt * dot(u.eta_tr, curl_v)
        + tt * u.rot_eta_tr * v
        - dot(u.div_m_tr, chi)
        - ddot(u.m_tr, grad_chi)
        + dot(curl_p_tr, chi_t_rho)
        - u.p_tr * rot_mix
}

fn square(n: usize, kind: BcKind, t: f64) -> (Mesh, ModelConfig) {
    let mesh = build_structured_square(n, SquareBc::uniform(kind)).expect("square mesh");
    let cfg = ModelConfig::new(&mesh, t, MaterialTensor::Identity, Load::Constant(1.0)).expect("config");
    (mesh, cfg)
}

/// Largest relative deviation between the assembled form and direct
/// quadrature of the bilinear form over `pairs` random pairs.
pub fn bilinear_form_deviation(mesh: &Mesh, cfg: &ModelConfig, seed: u64, pairs: usize) -> f64 {
    let ctx = KernelContext::new(cfg, 3, 6).expect("kernel context");
    let layout = DofLayout::new(mesh, cfg, false);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rule = rule_for_degree(8).expect("rule");
    let bmats: Vec<_> = (0..mesh.num_triangles()).map(|t| local_b(&ctx, mesh, t).expect("element matrix")).collect();
    let mut worst = 0.0f64;
    for _ in 0..pairs {
        let full: Vec<f64> = (0..layout.n_full()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let eval = TrialEval { mesh, layout: &layout, full: &full };
        let (mut lib, mut oracle, mut scale) = (0.0, 0.0, 0.0);
        for t in 0..mesh.num_triangles() {
            let coords = mesh.triangle_coords(t);
            let cubics = RandomCubics::new(&mut rng, &coords);
            let coef = project_test(&ctx, mesh, t, |x| cubics.eval(x).val);
            let u = layout.gather(mesh, t, &full);
            let bu = bmats[t].matvec(&u);
            lib += coef.iter().zip(&bu).map(|(a, b)| a * b).sum::<f64>();
            let phys = map_to_physical(&rule, &coords).expect("rule");
            let mut bt = 0.0;
            for (x, w) in phys.points.iter().zip(&phys.weights) {
                bt += w * b_density(cfg.t, &eval.eval(t, *x), &cubics.eval(*x));
            }
            oracle += bt;
            scale += bt.abs();
        }
        worst = worst.max((lib - oracle).abs() / scale.max(f64::MIN_POSITIVE));
    }
    worst
}

pub fn check_bilinear_form(seed: u64, pairs: usize) -> CheckResult {
    let mut parts = Vec::new();
    let mut worst = 0.0f64;
    for (n, kind) in [(1, BcKind::HardClamped), (4, BcKind::HardClamped)] {
        let (mesh, cfg) = square(n, kind, 0.1);
        let d = bilinear_form_deviation(&mesh, &cfg, seed + n as u64, pairs);
        worst = worst.max(d);
        parts.push(format!("{} triangles: {d:.2e}", mesh.num_triangles()));
    }
    CheckResult {
        name: "bilinear form vs direct quadrature",
        passed: worst <= 1e-11,
        detail: format!("{pairs} random pairs, relative deviation {}", parts.join(", ")),
    }
}

/// Largest `|<tr(M, p), (chi, rho)>| / scale` over the constrained trace
/// generators of a hard clamped square mesh.
pub fn trace_orthogonality_defect(n: usize, flip: bool) -> (f64, usize) {
    let (mesh, cfg) = square(n, BcKind::HardClamped, 0.1);
    let mut ctx = KernelContext::new(&cfg, 3, 6).expect("kernel context");
    ctx.flip_moment_trace = flip;
    let layout = DofLayout::new(&mesh, &cfg, false);
    let nt = mesh.num_triangles();
    let bmats: Vec<_> = (0..nt).map(|t| local_b(&ctx, &mesh, t).expect("element matrix")).collect();
    // free dofs owning each kind of trace
    let mut owner = vec![usize::MAX; layout.n_free()];
    for d in layout.psi_trace_offset()..layout.n_full() {
        for (f, _) in layout.prolongation(d) {
            owner[f] = d;
        }
    }
    let is_kind = |f: usize, lo: usize, hi: usize| owner[f] >= lo && owner[f] < hi;
    let chi_rho: Vec<usize> = (0..layout.n_free()).filter(|&f| is_kind(f, layout.psi_trace_offset(), layout.m_trace_offset())).collect();
    let m_p: Vec<usize> = (0..layout.n_free()).filter(|&f| is_kind(f, layout.m_trace_offset(), layout.n_full())).collect();
    let unit = |f: usize| {
        let mut e = vec![0.0; layout.n_free()];
        e[f] = 1.0;
        layout.expand(&e)
    };
    let mut worst = 0.0f64;
    let mut pairs = 0;
    for &a in &chi_rho {
        let full_a = unit(a);
        let eval = TrialEval { mesh: &mesh, layout: &layout, full: &full_a };
        let coefs: Vec<Vec<f64>> = (0..nt)
            .map(|t| {
                project_test(&ctx, &mesh, t, |x| {
                    let p = eval.eval(t, x);
                    [p.psi_tr[0], p.psi_tr[1], p.eta_tr[0], p.eta_tr[1], 0.0, 0.0, 0.0, 0.0]
                })
            })
            .collect();
        for &g in &m_p {
            let full_g = unit(g);
            let (mut s, mut scale) = (0.0, 0.0);
            for t in 0..nt {
                let bu = bmats[t].matvec(&layout.gather(&mesh, t, &full_g));
                for (c, b) in coefs[t].iter().zip(&bu) {
                    s += c * b;
                    scale += (c * b).abs();
                }
            }
            pairs += 1;
            if scale > 0.0 {
                worst = worst.max(s.abs() / scale);
            }
        }
    }
    (worst, pairs)
}

pub fn check_trace_orthogonality(flip: bool) -> CheckResult {
    let (d1, p1) = trace_orthogonality_defect(1, flip);
    let (d2, p2) = trace_orthogonality_defect(2, flip);
    let worst = d1.max(d2);
    CheckResult {
        name: "trace orthogonality",
        passed: worst <= 1e-11,
        detail: format!("hard clamped, 2 triangles: {d1:.2e} ({p1} pairs), 8 triangles: {d2:.2e} ({p2} pairs)"),
    }
}

/// A random triangle with all angles above 10 degrees.
pub fn random_triangle(rng: &mut ChaCha8Rng) -> [[f64; 2]; 3] {
    loop {
        let p: [[f64; 2]; 3] = std::array::from_fn(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]);
        let ok = (0..3).all(|i| {
            let (a, b, c) = (p[i], p[(i + 1) % 3], p[(i + 2) % 3]);
            let u = [b[0] - a[0], b[1] - a[1]];
            let v = [c[0] - a[0], c[1] - a[1]];
            let cos = (u[0] * v[0] + u[1] * v[1]) / (dist(a, b) * dist(a, c));
            cos.acos() > 10f64.to_radians()
        });
        if ok {
            return p;
        }
    }
}

fn single_triangle(p: [[f64; 2]; 3], kind: BcKind) -> Mesh {
    Mesh::new(
        p.to_vec(),
        vec![([0, 1, 2], 0)],
        &[([0, 1], 0), ([1, 2], 0), ([2, 0], 0)],
        vec![BoundarySegment { name: kind.token().to_string(), kind }],
    )
    .expect("valid triangle")
}

/// Smallest eigenvalue of the element Gram matrices, relative to the
/// largest, over random triangles, thicknesses and both values of `t*`.
pub fn gram_min_eigenvalue(seed: u64, count: usize) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min_abs = f64::INFINITY;
    let mut min_rel = f64::INFINITY;
    for _ in 0..count {
        let p = random_triangle(&mut rng);
        for kind in [BcKind::HardClamped, BcKind::SoftClamped] {
            let mesh = single_triangle(p, kind);
            for t in [1.0, 1e-2, 1e-4] {
                let cfg = ModelConfig::new(&mesh, t, MaterialTensor::Identity, Load::Constant(1.0)).expect("config");
                let ctx = KernelContext::new(&cfg, 3, 6).expect("kernel context");
                let g = local_gram(&ctx, &mesh, 0).expect("gram");
                let n = g.rows();
                let m = DMatrix::from_fn(n, n, |i, j| g[(i, j)]);
                let eig = m.symmetric_eigenvalues();
                let (lo, hi) = (eig.min(), eig.max());
                min_abs = min_abs.min(lo);
                min_rel = min_rel.min(lo / hi);
            }
        }
    }
    (min_abs, min_rel)
}

pub fn check_gram_spd(seed: u64, count: usize) -> CheckResult {
    let (lo, rel) = gram_min_eigenvalue(seed, count);
    CheckResult {
        name: "Gram positive definite",
        passed: lo > 0.0,
        detail: format!("{count} random triangles x t in {{1, 1e-2, 1e-4}} x t* in {{1, t}}: min eigenvalue {lo:.3e} (min/max {rel:.2e})"),
    }
}
