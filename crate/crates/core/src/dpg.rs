//! Element kernels of the ultraweak DPG scheme and assembly of its normal
//! equations.
//!
//! Trial functions per element (26 local coefficients):
//!
//! | local | block | space |
//! |-------|-------|-------|
//! | 0..2  | psi   | P0 vector |
//! | 2..4  | eta   | P0 vector |
//! | 4..7  | M     | P0 symmetric tensor `(xx, yy, xy)` |
//! | 7     | p     | P0 |
//! | 8..14 | psi trace | P1 vector, vertex `i` component `c` at `8 + 2i + c` |
//! | 14..17 | eta trace | ND0, local edge `i` |
//! | 17..23 | M trace | RT0 rows, local edge `i` row `r` at `17 + 2i + r` |
//! | 23..26 | p trace | P1, vertex `i` |
//!
//! Test functions live in the broken P_k space, ordered
//! `chi_x, chi_y, rho_x, rho_y | S_xx, S_yy, S_xy, v`. The test inner product
//! does not couple the two groups, so the Gram matrix is block diagonal and
//! each block is factorized separately.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::exec::{ElementExecutor, CHUNK};
use crate::fespaces::{barycentric_gradients, nd0_local, rt0_local, ElementMap, ReferencePk, TEST_FIELDS};
use crate::linalg::{DenseCholesky, DenseMatrix, SymmetricCsc, SymmetricPattern};
use crate::mesh::{BcKind, Mesh};
use crate::model::{MaterialTensor, ModelConfig};
use crate::quadrature::{rule_for_degree, QuadratureRule};
use crate::{Error, Result};

pub const LOCAL_TRIAL: usize = 26;
pub const FIELD_DOFS: usize = 8;
pub const PSI: usize = 0;
pub const ETA: usize = 2;
pub const MOMENT: usize = 4;
pub const P: usize = 7;
pub const PSI_TRACE: usize = 8;
pub const ETA_TRACE: usize = 14;
pub const M_TRACE: usize = 17;
pub const P_TRACE: usize = 23;

/// Relative pivot tolerance of the element Gram factorizations.
pub const GRAM_PIVOT_TOL: f64 = 1e-14;

/// Test quantities paired with a trial function at one point:
/// `chi (0,1)`, `grad chi (2: d_x chi_x, 3: d_y chi_x, 4: d_x chi_y, 5: d_y chi_y)`,
/// `rho (6,7)`, `rot rho (8)`, `S (9: xx, 10: yy, 11: xy)`, `Div S (12,13)`,
/// `v (14)`, `curl v (15,16)`.
pub type Pairing = [f64; 17];

/// Mesh-independent data shared by all element kernels.
#[derive(Debug, Clone)]
pub struct KernelContext {
    pub t: f64,
    pub t_star: f64,
    pub quotient_mode: bool,
    pub material: MaterialTensor,
    pub test: ReferencePk,
    pub rule: QuadratureRule,
    ref_phi: Vec<f64>,
    ref_dxi: Vec<f64>,
    ref_deta: Vec<f64>,
    /// Debug hook: flips the sign of the `(grad chi, M)` term of the moment
    /// trace. Only for mutation testing of the oracle suite.
    pub flip_moment_trace: bool,
}

impl KernelContext {
    pub fn new(cfg: &ModelConfig, test_degree: usize, quad_degree: usize) -> Result<KernelContext> {
        if test_degree == 0 {
            return Err(Error::Config("test degree must be at least 1".into()));
        }
        let test = ReferencePk::new(test_degree);
        let rule = rule_for_degree(quad_degree)?;
        let n = test.len();
        let nq = rule.len();
        let mut ref_phi = vec![0.0; nq * n];
        let mut ref_dxi = vec![0.0; nq * n];
        let mut ref_deta = vec![0.0; nq * n];
        for q in 0..nq {
            let r = q * n..(q + 1) * n;
            test.eval(rule.ref_point(q), &mut ref_phi[r.clone()], &mut ref_dxi[r.clone()], &mut ref_deta[r]);
        }
        Ok(KernelContext {
            t: cfg.t,
            t_star: cfg.t_star,
            quotient_mode: cfg.quotient_mode,
            material: cfg.material,
            test,
            rule,
            ref_phi,
            ref_dxi,
            ref_deta,
            flip_moment_trace: false,
        })
    }

    /// Scalar test functions per field.
    pub fn per_field(&self) -> usize {
        self.test.len()
    }

    pub fn test_dofs(&self) -> usize {
        TEST_FIELDS * self.per_field()
    }

    fn block_dofs(&self) -> usize {
        4 * self.per_field()
    }
}

/// Test basis on one element at the quadrature points.
struct ElementTables {
    nq: usize,
    n: usize,
    weights: Vec<f64>,
    points: Vec<[f64; 2]>,
    phi: Vec<f64>,
    dx: Vec<f64>,
    dy: Vec<f64>,
    /// `int_T phi_i`.
    integrals: Vec<f64>,
    area: f64,
}

fn element_tables(ctx: &KernelContext, mesh: &Mesh, t: usize) -> Result<ElementTables> {
    let coords = mesh.triangle_coords(t);
    let map = ElementMap::new(&coords);
    if !(map.det > 0.0) {
        return Err(Error::Geometry { element: t, detail: format!("det J = {:e}", map.det) });
    }
    let n = ctx.per_field();
    let nq = ctx.rule.len();
    let mut tab = ElementTables {
        nq,
        n,
        weights: ctx.rule.weights.iter().map(|w| w * map.det).collect(),
        points: (0..nq).map(|q| map.to_physical(ctx.rule.ref_point(q))).collect(),
        phi: ctx.ref_phi.clone(),
        dx: vec![0.0; nq * n],
        dy: vec![0.0; nq * n],
        integrals: vec![0.0; n],
        area: map.area(),
    };
    for k in 0..nq * n {
        let g = map.gradient([ctx.ref_dxi[k], ctx.ref_deta[k]]);
        tab.dx[k] = g[0];
        tab.dy[k] = g[1];
    }
    for q in 0..nq {
        for i in 0..n {
            tab.integrals[i] += tab.weights[q] * tab.phi[q * n + i];
        }
    }
    Ok(tab)
}

/// The two diagonal blocks of the element Gram matrix.
fn gram_blocks(ctx: &KernelContext, tab: &ElementTables) -> (DenseMatrix, DenseMatrix) {
    let n = tab.n;
    let nb = 4 * n;
    let inv_t = 1.0 / ctx.t;
    let t = ctx.t;
    let ts = ctx.t_star;
    let s2 = core::f64::consts::SQRT_2;
    let mut f1 = DenseMatrix::zeros(9 * tab.nq, nb);
    let mut f2 = DenseMatrix::zeros(8 * tab.nq, nb);
    for q in 0..tab.nq {
        let sw = libm::sqrt(tab.weights[q]);
        for i in 0..n {
            let k = q * n + i;
            let (v, dx, dy) = (sw * tab.phi[k], sw * tab.dx[k], sw * tab.dy[k]);
            let r = 9 * q;
            // chi_x, chi_y, rho_x, rho_y
            f1[(r, i)] = v;
            f1[(r + 2, i)] = dx;
            f1[(r + 3, i)] = dy;
            f1[(r + 8, i)] = -inv_t * dy;
            f1[(r + 1, n + i)] = v;
            f1[(r + 4, n + i)] = dx;
            f1[(r + 5, n + i)] = dy;
            f1[(r + 8, n + i)] = inv_t * dx;
            f1[(r + 6, 2 * n + i)] = v;
            f1[(r + 8, 2 * n + i)] = -dy;
            f1[(r + 7, 3 * n + i)] = v;
            f1[(r + 8, 3 * n + i)] = dx;
            // S_xx, S_yy, S_xy, v
            let r = 8 * q;
            f2[(r, i)] = v;
            f2[(r + 4, i)] = dx;
            f2[(r + 1, n + i)] = v;
            f2[(r + 5, n + i)] = dy;
            f2[(r + 2, 2 * n + i)] = s2 * v;
            f2[(r + 4, 2 * n + i)] = dy;
            f2[(r + 5, 2 * n + i)] = dx;
            f2[(r + 3, 3 * n + i)] = ts * v;
            f2[(r + 4, 3 * n + i)] = -dy;
            f2[(r + 5, 3 * n + i)] = dx;
            f2[(r + 6, 3 * n + i)] = t * dy;
            f2[(r + 7, 3 * n + i)] = -t * dx;
        }
    }
    let g1 = f1.gram();
    let mut g2 = f2.gram();
    if ctx.quotient_mode {
        // t*^2 |v - mean|^2 + |T| mean^2
        let c = (1.0 - ts * ts) / tab.area;
        for i in 0..n {
            for j in 0..n {
                g2[(3 * n + i, 3 * n + j)] += c * tab.integrals[i] * tab.integrals[j];
            }
        }
    }
    (g1, g2)
}

/// Pairing vectors of the 26 local trial functions at point `x`.
fn trial_pairings(ctx: &KernelContext, mesh: &Mesh, t: usize, x: [f64; 2], grads: &[[f64; 2]; 3], lambda: [f64; 3]) -> [Pairing; LOCAL_TRIAL] {
    let tt = ctx.t;
    let mut c = [[0.0; 17]; LOCAL_TRIAL];
    for k in 0..2 {
        c[PSI + k][15 + k] += 1.0;
        c[PSI + k][12 + k] -= 1.0;
        c[ETA + k][15 + k] += tt;
        c[ETA + k][6 + k] -= 1.0;
    }
    for (j, m) in [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]].into_iter().enumerate() {
        let kinv = ctx.material.apply_inverse(m);
        let cj = &mut c[MOMENT + j];
        cj[9] += kinv[0];
        cj[10] += kinv[1];
        cj[11] += 2.0 * kinv[2];
        cj[2] += m[0];
        cj[5] += m[1];
        cj[3] += m[2];
        cj[4] += m[2];
    }
    c[P][8] += tt;
    c[P][4] += 1.0;
    c[P][3] -= 1.0;

    for i in 0..3 {
        let (l, g) = (lambda[i], grads[i]);
        let cx = &mut c[PSI_TRACE + 2 * i];
        cx[12] += l;
        cx[15] -= l;
        cx[9] += g[0];
        cx[11] += g[1];
        cx[14] -= g[1];
        let cy = &mut c[PSI_TRACE + 2 * i + 1];
        cy[13] += l;
        cy[16] -= l;
        cy[11] += g[0];
        cy[10] += g[1];
        cy[14] += g[0];

        let cp = &mut c[P_TRACE + i];
        cp[0] += g[1];
        cp[1] -= g[0];
        cp[6] += tt * g[1];
        cp[7] -= tt * g[0];
        cp[8] -= tt * l;
        cp[4] -= l;
        cp[3] += l;
    }
    let nd = nd0_local(mesh, t, x);
    let rt = rt0_local(mesh, t, x);
    let grad_sign = if ctx.flip_moment_trace { -1.0 } else { 1.0 };
    for i in 0..3 {
        let (nv, rot) = nd[i];
        let ce = &mut c[ETA_TRACE + i];
        ce[15] -= tt * nv[0];
        ce[16] -= tt * nv[1];
        ce[14] += tt * rot;
        let (sv, div) = rt[i];
        let cx = &mut c[M_TRACE + 2 * i];
        cx[0] -= div;
        cx[2] -= grad_sign * sv[0];
        cx[3] -= grad_sign * sv[1];
        let cy = &mut c[M_TRACE + 2 * i + 1];
        cy[1] -= div;
        cy[4] -= grad_sign * sv[0];
        cy[5] -= grad_sign * sv[1];
    }
    c
}

/// `(B1, B2)`: rows are the test functions of the two groups.
fn b_blocks(ctx: &KernelContext, mesh: &Mesh, t: usize, tab: &ElementTables) -> (DenseMatrix, DenseMatrix) {
    let n = tab.n;
    let coords = mesh.triangle_coords(t);
    let grads = barycentric_gradients(&coords);
    let map = ElementMap::new(&coords);
    let mut b1 = DenseMatrix::zeros(4 * n, LOCAL_TRIAL);
    let mut b2 = DenseMatrix::zeros(4 * n, LOCAL_TRIAL);
    for q in 0..tab.nq {
        let x = tab.points[q];
        let r = map.to_reference(x);
        let lambda = [1.0 - r[0] - r[1], r[0], r[1]];
        let c = trial_pairings(ctx, mesh, t, x, &grads, lambda);
        let w = tab.weights[q];
        for (j, cj) in c.iter().enumerate() {
            // (value, d_x, d_y) coefficients of each scalar test field
            let coef: [[f64; 3]; 8] = [
                [cj[0], cj[2], cj[3]],
                [cj[1], cj[4], cj[5]],
                [cj[6], 0.0, -cj[8]],
                [cj[7], cj[8], 0.0],
                [cj[9], cj[12], 0.0],
                [cj[10], 0.0, cj[13]],
                [cj[11], cj[13], cj[12]],
                [cj[14], -cj[16], cj[15]],
            ];
            for (f, [a, bx, by]) in coef.into_iter().enumerate() {
                if a == 0.0 && bx == 0.0 && by == 0.0 {
                    continue;
                }
                let (a, bx, by) = (w * a, w * bx, w * by);
                let target = if f < 4 { &mut b1 } else { &mut b2 };
                let base = (f % 4) * n;
                for i in 0..n {
                    let k = q * n + i;
                    target[(base + i, j)] += a * tab.phi[k] + bx * tab.dx[k] + by * tab.dy[k];
                }
            }
        }
    }
    (b1, b2)
}

/// Load vector `-(grad r_h, chi)` on the first test group.
fn load_block(tab: &ElementTables, grad_r: [f64; 2]) -> Vec<f64> {
    let n = tab.n;
    let mut l = vec![0.0; 4 * n];
    for i in 0..n {
        l[i] = -grad_r[0] * tab.integrals[i];
        l[n + i] = -grad_r[1] * tab.integrals[i];
    }
    l
}

fn stack(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    let mut data = a.as_slice().to_vec();
    data.extend_from_slice(b.as_slice());
    DenseMatrix::from_row_major(a.rows() + b.rows(), a.cols(), data)
}

/// Element Gram matrix over all test dofs (block diagonal).
pub fn local_gram(ctx: &KernelContext, mesh: &Mesh, t: usize) -> Result<DenseMatrix> {
    let tab = element_tables(ctx, mesh, t)?;
    let (g1, g2) = gram_blocks(ctx, &tab);
    let nb = ctx.block_dofs();
    let mut g = DenseMatrix::zeros(2 * nb, 2 * nb);
    for i in 0..nb {
        for j in 0..nb {
            g[(i, j)] = g1[(i, j)];
            g[(nb + i, nb + j)] = g2[(i, j)];
        }
    }
    Ok(g)
}

/// Element matrix of the bilinear form: test dofs x local trial dofs.
pub fn local_b(ctx: &KernelContext, mesh: &Mesh, t: usize) -> Result<DenseMatrix> {
    let tab = element_tables(ctx, mesh, t)?;
    let (b1, b2) = b_blocks(ctx, mesh, t, &tab);
    Ok(stack(&b1, &b2))
}

pub fn local_load(ctx: &KernelContext, mesh: &Mesh, t: usize, grad_r: [f64; 2]) -> Result<Vec<f64>> {
    let tab = element_tables(ctx, mesh, t)?;
    let mut l = load_block(&tab, grad_r);
    l.resize(ctx.test_dofs(), 0.0);
    Ok(l)
}

/// All element quantities, for inspection and debugging.
#[derive(Debug, Clone)]
pub struct LocalDpgKernel {
    pub element: usize,
    pub gram: DenseMatrix,
    pub b_local: DenseMatrix,
    pub load_local: Vec<f64>,
    /// Optimal test function coefficients `gram^{-1} b_local`.
    pub opt_test: DenseMatrix,
}

pub fn local_kernel(ctx: &KernelContext, mesh: &Mesh, t: usize, grad_r: [f64; 2]) -> Result<LocalDpgKernel> {
    let gram = local_gram(ctx, mesh, t)?;
    let b_local = local_b(ctx, mesh, t)?;
    let load_local = local_load(ctx, mesh, t, grad_r)?;
    let chol = DenseCholesky::factor(&gram, GRAM_PIVOT_TOL).ok_or(Error::SingularGram { element: t })?;
    let opt_test = chol.solve_matrix(&b_local);
    Ok(LocalDpgKernel { element: t, gram, b_local, load_local, opt_test })
}

/// Whitened element system `W = L^{-1} B`, `w = L^{-1} l` for both groups.
struct Whitened {
    w1: DenseMatrix,
    w2: DenseMatrix,
    l1: Vec<f64>,
}

fn whitened(ctx: &KernelContext, mesh: &Mesh, t: usize, grad_r: [f64; 2]) -> Result<Whitened> {
    let tab = element_tables(ctx, mesh, t)?;
    let (g1, g2) = gram_blocks(ctx, &tab);
    let (b1, b2) = b_blocks(ctx, mesh, t, &tab);
    let c1 = DenseCholesky::factor(&g1, GRAM_PIVOT_TOL).ok_or(Error::SingularGram { element: t })?;
    let c2 = DenseCholesky::factor(&g2, GRAM_PIVOT_TOL).ok_or(Error::SingularGram { element: t })?;
    let mut l1 = load_block(&tab, grad_r);
    c1.forward(&mut l1);
    Ok(Whitened { w1: c1.forward_matrix(&b1), w2: c2.forward_matrix(&b2), l1 })
}

/// Element contribution `B^T G^{-1} B`, `B^T G^{-1} l` to the normal
/// equations, in local trial dofs.
#[derive(Debug, Clone)]
pub struct ElementSystem {
    pub matrix: [[f64; LOCAL_TRIAL]; LOCAL_TRIAL],
    pub rhs: [f64; LOCAL_TRIAL],
}

pub fn element_system(ctx: &KernelContext, mesh: &Mesh, t: usize, grad_r: [f64; 2]) -> Result<ElementSystem> {
    let w = whitened(ctx, mesh, t, grad_r)?;
    let mut matrix = [[0.0; LOCAL_TRIAL]; LOCAL_TRIAL];
    let mut rhs = [0.0; LOCAL_TRIAL];
    for wm in [&w.w1, &w.w2] {
        for r in 0..wm.rows() {
            let row = wm.row(r);
            for a in 0..LOCAL_TRIAL {
                let ra = row[a];
                if ra == 0.0 {
                    continue;
                }
                for b in a..LOCAL_TRIAL {
                    matrix[a][b] += ra * row[b];
                }
            }
        }
    }
    for a in 0..LOCAL_TRIAL {
        for b in 0..a {
            matrix[a][b] = matrix[b][a];
        }
    }
    for (r, &l) in w.l1.iter().enumerate() {
        let row = w.w1.row(r);
        for a in 0..LOCAL_TRIAL {
            rhs[a] += row[a] * l;
        }
    }
    Ok(ElementSystem { matrix, rhs })
}

/// Squared residual `(l - B u)^T G^{-1} (l - B u)` on element `t` for local
/// trial coefficients `u`.
pub fn element_residual(ctx: &KernelContext, mesh: &Mesh, t: usize, grad_r: [f64; 2], u: &[f64; LOCAL_TRIAL]) -> Result<f64> {
    let w = whitened(ctx, mesh, t, grad_r)?;
    let mut s = 0.0;
    for (wm, load) in [(&w.w1, Some(&w.l1)), (&w.w2, None)] {
        let wu = wm.matvec(u);
        for (r, v) in wu.into_iter().enumerate() {
            let e = load.map_or(0.0, |l| l[r]) - v;
            s += e * e;
        }
    }
    Ok(s)
}

/// Global numbering of the stage-2 unknowns and the constraints of the
/// trace generators.
///
/// Full dofs: fields element by element (8 each), then psi trace (2 per
/// vertex), eta trace (1 per edge), M trace (2 per edge), p trace (1 per
/// vertex). Free dofs: all field dofs, then the free trace coordinates.
/// Each full dof is a linear combination of free dofs (the prolongation).
#[derive(Debug, Clone)]
pub struct DofLayout {
    pub n_elements: usize,
    pub n_vertices: usize,
    pub n_edges: usize,
    n_free: usize,
    pro_ptr: Vec<usize>,
    pro_idx: Vec<usize>,
    pro_val: Vec<f64>,
    /// Full dof of the pinned p trace value (quotient mode with pinning).
    pub pinned: Option<usize>,
}

fn rank_of(dirs: &[[f64; 2]]) -> usize {
    match dirs.first() {
        None => 0,
        Some(d) => {
            if dirs.iter().any(|e| (d[0] * e[1] - d[1] * e[0]).abs() > 1e-8) {
                2
            } else {
                1
            }
        }
    }
}

impl DofLayout {
    pub fn psi_trace_offset(&self) -> usize {
        FIELD_DOFS * self.n_elements
    }

    pub fn eta_trace_offset(&self) -> usize {
        self.psi_trace_offset() + 2 * self.n_vertices
    }

    pub fn m_trace_offset(&self) -> usize {
        self.eta_trace_offset() + self.n_edges
    }

    pub fn p_trace_offset(&self) -> usize {
        self.m_trace_offset() + 2 * self.n_edges
    }

    pub fn n_full(&self) -> usize {
        self.p_trace_offset() + self.n_vertices
    }

    pub fn n_free(&self) -> usize {
        self.n_free
    }

    pub fn n_field(&self) -> usize {
        FIELD_DOFS * self.n_elements
    }

    /// Builds the layout. With `pin_pressure` and no free boundary, the p
    /// trace at vertex 0 is fixed to zero to remove the constant kernel.
    pub fn new(mesh: &Mesh, cfg: &ModelConfig, pin_pressure: bool) -> DofLayout {
        let nt = mesh.num_triangles();
        let nv = mesh.num_vertices();
        let ne = mesh.num_edges();
        let mut psi_dirs: Vec<Vec<[f64; 2]>> = vec![Vec::new(); nv];
        let mut p_zero = vec![false; nv];
        for e in mesh.boundary_edges() {
            let kind = mesh.edge_kind(e).expect("boundary edge is tagged");
            let n = mesh.edge_normal(e);
            let tau = [-n[1], n[0]];
            for v in mesh.edges()[e].vertices {
                match kind {
                    BcKind::HardClamped => psi_dirs[v].extend([[1.0, 0.0], [0.0, 1.0]]),
                    BcKind::SoftClamped => psi_dirs[v].push(n),
                    BcKind::HardSimpleSupport => psi_dirs[v].push(tau),
                    BcKind::SoftSimpleSupport => {}
                    BcKind::Free => p_zero[v] = true,
                }
            }
        }

        let mut layout = DofLayout {
            n_elements: nt,
            n_vertices: nv,
            n_edges: ne,
            n_free: 0,
            pro_ptr: Vec::new(),
            pro_idx: Vec::new(),
            pro_val: Vec::new(),
            pinned: None,
        };
        let n_full = layout.n_full();
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_full];
        let mut next = FIELD_DOFS * nt;
        for (d, row) in rows.iter_mut().enumerate().take(next) {
            row.push((d, 1.0));
        }
        let psi0 = layout.psi_trace_offset();
        for v in 0..nv {
            match rank_of(&psi_dirs[v]) {
                0 => {
                    rows[psi0 + 2 * v].push((next, 1.0));
                    rows[psi0 + 2 * v + 1].push((next + 1, 1.0));
                    next += 2;
                }
                1 => {
                    let d = psi_dirs[v][0];
                    let a = [-d[1], d[0]];
                    rows[psi0 + 2 * v].push((next, a[0]));
                    rows[psi0 + 2 * v + 1].push((next, a[1]));
                    next += 1;
                }
                _ => {}
            }
        }
        let eta0 = layout.eta_trace_offset();
        for e in 0..ne {
            match mesh.edge_kind(e) {
                Some(kind) if kind.is_deflection_fixed() => {
                    // t (t eta + psi) . tau = 0 with the edge average of psi
                    let [a, b] = mesh.edges()[e].vertices;
                    let n = mesh.edge_normal(e);
                    let tau = [-n[1], n[0]];
                    let s = -0.5 / cfg.t;
                    let mut acc: Vec<(usize, f64)> = Vec::new();
                    for v in [a, b] {
                        for c in 0..2 {
                            for &(f, w) in &rows[psi0 + 2 * v + c] {
                                acc.push((f, s * tau[c] * w));
                            }
                        }
                    }
                    acc.sort_by_key(|x| x.0);
                    let mut merged: Vec<(usize, f64)> = Vec::new();
                    for (f, w) in acc {
                        match merged.last_mut() {
                            Some(last) if last.0 == f => last.1 += w,
                            _ => merged.push((f, w)),
                        }
                    }
                    let max = merged.iter().fold(0.0f64, |m, x| m.max(x.1.abs()));
                    merged.retain(|x| x.1.abs() > 1e-14 * max);
                    rows[eta0 + e] = merged;
                }
                _ => {
                    rows[eta0 + e].push((next, 1.0));
                    next += 1;
                }
            }
        }
        let m0 = layout.m_trace_offset();
        for e in 0..ne {
            let n = mesh.edge_normal(e);
            let tau = [-n[1], n[0]];
            let free_dir = match mesh.edge_kind(e) {
                None | Some(BcKind::HardClamped) => None,
                Some(BcKind::SoftClamped) => Some(n),
                Some(BcKind::HardSimpleSupport) => Some(tau),
                Some(BcKind::SoftSimpleSupport) | Some(BcKind::Free) => continue,
            };
            match free_dir {
                None => {
                    rows[m0 + 2 * e].push((next, 1.0));
                    rows[m0 + 2 * e + 1].push((next + 1, 1.0));
                    next += 2;
                }
                Some(d) => {
                    for c in 0..2 {
                        if d[c] != 0.0 {
                            rows[m0 + 2 * e + c].push((next, d[c]));
                        }
                    }
                    next += 1;
                }
            }
        }
        let p0 = layout.p_trace_offset();
        let mut pin = pin_pressure && cfg.quotient_mode;
        for v in 0..nv {
            if p_zero[v] {
                continue;
            }
            if pin {
                layout.pinned = Some(p0 + v);
                pin = false;
                continue;
            }
            rows[p0 + v].push((next, 1.0));
            next += 1;
        }
        // rank-one directions of the psi trace: drop exact zeros
        for row in rows.iter_mut() {
            row.retain(|x| x.1 != 0.0);
        }
        layout.n_free = next;
        layout.pro_ptr.push(0);
        for row in rows {
            for (f, w) in row {
                layout.pro_idx.push(f);
                layout.pro_val.push(w);
            }
            layout.pro_ptr.push(layout.pro_idx.len());
        }
        layout
    }

    /// Free dofs and weights composing full dof `d`.
    pub fn prolongation(&self, d: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.pro_ptr[d]..self.pro_ptr[d + 1];
        self.pro_idx[r.clone()].iter().copied().zip(self.pro_val[r].iter().copied())
    }

    /// Full dofs of element `t` in local trial order.
    pub fn local_dofs(&self, mesh: &Mesh, t: usize) -> [usize; LOCAL_TRIAL] {
        let mut d = [0; LOCAL_TRIAL];
        for (k, dk) in d.iter_mut().enumerate().take(FIELD_DOFS) {
            *dk = FIELD_DOFS * t + k;
        }
        let verts = mesh.triangles()[t].vertices;
        let edges = mesh.triangle_edges(t);
        for i in 0..3 {
            d[PSI_TRACE + 2 * i] = self.psi_trace_offset() + 2 * verts[i];
            d[PSI_TRACE + 2 * i + 1] = self.psi_trace_offset() + 2 * verts[i] + 1;
            d[ETA_TRACE + i] = self.eta_trace_offset() + edges[i];
            d[M_TRACE + 2 * i] = self.m_trace_offset() + 2 * edges[i];
            d[M_TRACE + 2 * i + 1] = self.m_trace_offset() + 2 * edges[i] + 1;
            d[P_TRACE + i] = self.p_trace_offset() + verts[i];
        }
        d
    }

    /// Free dofs coupled by element `t`, sorted.
    pub fn element_free_dofs(&self, mesh: &Mesh, t: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self.local_dofs(mesh, t).iter().flat_map(|&d| self.prolongation(d).map(|x| x.0)).collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Full coefficient vector from free coefficients.
    pub fn expand(&self, free: &[f64]) -> Vec<f64> {
        (0..self.n_full()).map(|d| self.prolongation(d).map(|(f, w)| w * free[f]).sum()).collect()
    }

    /// Local trial coefficients of element `t` from a full vector.
    pub fn gather(&self, mesh: &Mesh, t: usize, full: &[f64]) -> [f64; LOCAL_TRIAL] {
        self.local_dofs(mesh, t).map(|d| full[d])
    }
}

/// Elementwise constant gradients of a P1 function.
pub fn p1_gradients(mesh: &Mesh, values: &[f64]) -> Vec<[f64; 2]> {
    (0..mesh.num_triangles())
        .map(|t| {
            let g = barycentric_gradients(&mesh.triangle_coords(t));
            let v = mesh.triangles()[t].vertices;
            let mut r = [0.0; 2];
            for i in 0..3 {
                r[0] += values[v[i]] * g[i][0];
                r[1] += values[v[i]] * g[i][1];
            }
            r
        })
        .collect()
}

/// Assembled normal equations over the free dofs.
#[derive(Debug, Clone)]
pub struct NormalEquations {
    pub matrix: SymmetricCsc,
    pub rhs: Vec<f64>,
}

/// Assembles `B^T G^{-1} B` and `B^T G^{-1} l` over the free dofs of
/// `layout`. Contributions are added in element order, so the result does
/// not depend on the executor.
pub fn assemble_normal_equations<E: ElementExecutor>(
    ctx: &KernelContext,
    mesh: &Mesh,
    layout: &DofLayout,
    grad_r: &[[f64; 2]],
    exec: &E,
) -> Result<NormalEquations> {
    let nt = mesh.num_triangles();
    let cliques: Vec<Vec<usize>> = (0..nt).map(|t| layout.element_free_dofs(mesh, t)).collect();
    let pattern = SymmetricPattern::from_cliques(layout.n_free(), cliques.iter().map(|c| c.as_slice()));
    drop(cliques);
    let mut matrix = SymmetricCsc::zeros(pattern);
    let mut rhs = vec![0.0; layout.n_free()];
    let mut start = 0;
    while start < nt {
        let end = (start + CHUNK).min(nt);
        let systems = exec.map(start..end, |t| element_system(ctx, mesh, t, grad_r[t]));
        for (k, sys) in systems.into_iter().enumerate() {
            let sys = sys?;
            let t = start + k;
            let dofs = layout.local_dofs(mesh, t);
            let expanded: Vec<Vec<(usize, f64)>> = dofs.iter().map(|&d| layout.prolongation(d).collect()).collect();
            for a in 0..LOCAL_TRIAL {
                for &(fa, wa) in &expanded[a] {
                    rhs[fa] += wa * sys.rhs[a];
                    for b in 0..LOCAL_TRIAL {
                        let v = sys.matrix[a][b];
                        if v == 0.0 {
                            continue;
                        }
                        for &(fb, wb) in &expanded[b] {
                            if fa <= fb {
                                matrix.add(fa, fb, wa * wb * v);
                            }
                        }
                    }
                }
            }
        }
        start = end;
    }
    Ok(NormalEquations { matrix, rhs })
}

/// Squared residual estimator per element for full coefficients `full`.
pub fn residual_norms<E: ElementExecutor>(
    ctx: &KernelContext,
    mesh: &Mesh,
    layout: &DofLayout,
    grad_r: &[[f64; 2]],
    full: &[f64],
    exec: &E,
) -> Result<Vec<f64>> {
    let nt = mesh.num_triangles();
    let mut out = Vec::with_capacity(nt);
    let mut start = 0;
    while start < nt {
        let end = (start + CHUNK).min(nt);
        let r = exec.map(start..end, |t| element_residual(ctx, mesh, t, grad_r[t], &layout.gather(mesh, t, full)));
        for v in r {
            out.push(libm::sqrt(v?));
        }
        start = end;
    }
    Ok(out)
}
