//! Lowest-order conforming spaces and broken polynomial test spaces.
//!
//! Conforming dofs live on mesh entities (vertices for P1, edges for RT0 and
//! ND0) and are numbered by entity index. Broken spaces number their dofs
//! element by element.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::{DenseCholesky, DenseMatrix};
use crate::mesh::{BcKind, Mesh};
use crate::quadrature::reference_monomial_integral;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpaceKind {
    P0Scalar,
    P0Vector,
    /// Symmetric tensors, components `(xx, yy, xy)`.
    P0SymTensor,
    P1cScalar,
    P1cVector,
    Rt0,
    /// Tensors whose two rows are RT0 fields.
    Rt0RowsTensor,
    Nd0,
    BrokenPk(usize),
}

impl SpaceKind {
    pub fn local_dofs(self) -> usize {
        match self {
            SpaceKind::P0Scalar => 1,
            SpaceKind::P0Vector => 2,
            SpaceKind::P0SymTensor => 3,
            SpaceKind::P1cScalar | SpaceKind::Rt0 | SpaceKind::Nd0 => 3,
            SpaceKind::P1cVector | SpaceKind::Rt0RowsTensor => 6,
            SpaceKind::BrokenPk(k) => (k + 1) * (k + 2) / 2,
        }
    }

    /// Number of value components: 1 scalar, 2 vector, 4 tensor (row-major).
    pub fn value_dim(self) -> usize {
        match self {
            SpaceKind::P0Scalar | SpaceKind::P1cScalar | SpaceKind::BrokenPk(_) => 1,
            SpaceKind::P0Vector | SpaceKind::P1cVector | SpaceKind::Rt0 | SpaceKind::Nd0 => 2,
            SpaceKind::P0SymTensor | SpaceKind::Rt0RowsTensor => 4,
        }
    }
}

/// Homogeneous essential conditions on a space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BcSpec {
    None,
    /// Zero value (P1), zero normal flux (RT0) or zero tangential trace
    /// (ND0) on all boundary edges whose kind is listed.
    ZeroOn(Vec<BcKind>),
}

impl BcSpec {
    fn applies(&self, kind: Option<BcKind>) -> bool {
        match (self, kind) {
            (BcSpec::ZeroOn(kinds), Some(k)) => kinds.contains(&k),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeSpace {
    kind: SpaceKind,
    dof_count: usize,
    dof_map: Vec<usize>,
    constrained: Vec<bool>,
}

impl FeSpace {
    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    pub fn dof_count(&self) -> usize {
        self.dof_count
    }

    pub fn local_count(&self) -> usize {
        self.kind.local_dofs()
    }

    /// Global dofs of element `t` in local basis order.
    pub fn dofs(&self, t: usize) -> &[usize] {
        let n = self.local_count();
        &self.dof_map[t * n..(t + 1) * n]
    }

    pub fn is_constrained(&self, dof: usize) -> bool {
        self.constrained[dof]
    }

    pub fn num_constrained(&self) -> usize {
        self.constrained.iter().filter(|&&c| c).count()
    }

    pub fn num_free(&self) -> usize {
        self.dof_count - self.num_constrained()
    }

    /// Consecutive numbering of the free dofs, in global dof order.
    pub fn free_numbering(&self) -> Vec<Option<usize>> {
        let mut next = 0;
        self.constrained
            .iter()
            .map(|&c| {
                if c {
                    None
                } else {
                    next += 1;
                    Some(next - 1)
                }
            })
            .collect()
    }
}

pub fn build_space(kind: SpaceKind, mesh: &Mesh, bc: &BcSpec) -> Result<FeSpace> {
    let nt = mesh.num_triangles();
    let (dof_count, dof_map) = match kind {
        SpaceKind::P0Scalar | SpaceKind::P0Vector | SpaceKind::P0SymTensor | SpaceKind::BrokenPk(_) => {
            if *bc != BcSpec::None {
                return Err(Error::IncompatibleBc(format!("{kind:?} has no boundary dofs")));
            }
            let n = kind.local_dofs();
            (n * nt, (0..n * nt).collect())
        }
        SpaceKind::P1cScalar => {
            (mesh.num_vertices(), mesh.triangles().iter().flat_map(|t| t.vertices).collect())
        }
        SpaceKind::P1cVector => (
            2 * mesh.num_vertices(),
            mesh.triangles().iter().flat_map(|t| t.vertices.into_iter().flat_map(|v| [2 * v, 2 * v + 1])).collect(),
        ),
        SpaceKind::Rt0 | SpaceKind::Nd0 => {
            (mesh.num_edges(), (0..nt).flat_map(|t| mesh.triangle_edges(t)).collect())
        }
        SpaceKind::Rt0RowsTensor => (
            2 * mesh.num_edges(),
            (0..nt).flat_map(|t| mesh.triangle_edges(t).into_iter().flat_map(|e| [2 * e, 2 * e + 1])).collect(),
        ),
    };
    let mut constrained = vec![false; dof_count];
    for e in mesh.boundary_edges() {
        if !bc.applies(mesh.edge_kind(e)) {
            continue;
        }
        let [a, b] = mesh.edges()[e].vertices;
        match kind {
            SpaceKind::P1cScalar => {
                constrained[a] = true;
                constrained[b] = true;
            }
            SpaceKind::P1cVector => {
                for v in [a, b] {
                    constrained[2 * v] = true;
                    constrained[2 * v + 1] = true;
                }
            }
            SpaceKind::Rt0 | SpaceKind::Nd0 => constrained[e] = true,
            SpaceKind::Rt0RowsTensor => {
                constrained[2 * e] = true;
                constrained[2 * e + 1] = true;
            }
            _ => unreachable!(),
        }
    }
    Ok(FeSpace { kind, dof_count, dof_map, constrained })
}

/// Affine map `x = x0 + J xi` from the reference triangle onto an element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementMap {
    pub origin: [f64; 2],
    /// Columns are the edge vectors `v1 - v0` and `v2 - v0`.
    pub jac: [[f64; 2]; 2],
    pub det: f64,
    inv: [[f64; 2]; 2],
}

impl ElementMap {
    pub fn new(coords: &[[f64; 2]; 3]) -> ElementMap {
        let [a, b, c] = *coords;
        let jac = [[b[0] - a[0], c[0] - a[0]], [b[1] - a[1], c[1] - a[1]]];
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        let inv = [[jac[1][1] / det, -jac[0][1] / det], [-jac[1][0] / det, jac[0][0] / det]];
        ElementMap { origin: a, jac, det, inv }
    }

    pub fn area(&self) -> f64 {
        0.5 * self.det.abs()
    }

    pub fn to_physical(&self, xi: [f64; 2]) -> [f64; 2] {
        [
            self.origin[0] + self.jac[0][0] * xi[0] + self.jac[0][1] * xi[1],
            self.origin[1] + self.jac[1][0] * xi[0] + self.jac[1][1] * xi[1],
        ]
    }

    pub fn to_reference(&self, x: [f64; 2]) -> [f64; 2] {
        let d = [x[0] - self.origin[0], x[1] - self.origin[1]];
        [self.inv[0][0] * d[0] + self.inv[0][1] * d[1], self.inv[1][0] * d[0] + self.inv[1][1] * d[1]]
    }

    /// Physical gradient `J^{-T} g` from a reference gradient `g`.
    pub fn gradient(&self, g: [f64; 2]) -> [f64; 2] {
        [self.inv[0][0] * g[0] + self.inv[1][0] * g[1], self.inv[0][1] * g[0] + self.inv[1][1] * g[1]]
    }
}

/// Barycentric coordinates and their constant gradients on a triangle.
pub fn barycentric(coords: &[[f64; 2]; 3], x: [f64; 2]) -> [f64; 3] {
    let m = ElementMap::new(coords);
    let r = m.to_reference(x);
    [1.0 - r[0] - r[1], r[0], r[1]]
}

pub fn barycentric_gradients(coords: &[[f64; 2]; 3]) -> [[f64; 2]; 3] {
    let m = ElementMap::new(coords);
    let g1 = m.gradient([1.0, 0.0]);
    let g2 = m.gradient([0.0, 1.0]);
    [[-g1[0] - g2[0], -g1[1] - g2[1]], g1, g2]
}

/// Lowest-order Raviart-Thomas functions of element `t`: local function `i`
/// belongs to the edge opposite vertex `i` and has unit normal component
/// along the global edge normal. Returns `(value, divergence)`.
pub fn rt0_local(mesh: &Mesh, t: usize, x: [f64; 2]) -> [([f64; 2], f64); 3] {
    let coords = mesh.triangle_coords(t);
    let views = mesh.edge_views(t);
    let area = mesh.triangles()[t].area;
    core::array::from_fn(|i| {
        let s = views[i].sign * views[i].length / (2.0 * area);
        let a = coords[i];
        ([s * (x[0] - a[0]), s * (x[1] - a[1])], 2.0 * s)
    })
}

/// Lowest-order Nedelec functions: the RT0 functions rotated by +90 degrees,
/// unit tangential component along the global edge tangent. Returns
/// `(value, rot)`.
pub fn nd0_local(mesh: &Mesh, t: usize, x: [f64; 2]) -> [([f64; 2], f64); 3] {
    rt0_local(mesh, t, x).map(|(v, d)| ([-v[1], v[0]], d))
}

/// Basis of P_k on the reference triangle, orthonormal in L2.
#[derive(Debug, Clone)]
pub struct ReferencePk {
    k: usize,
    exponents: Vec<(u32, u32)>,
    /// Row `i` holds the monomial coefficients of basis function `i`.
    coeffs: DenseMatrix,
}

impl ReferencePk {
    pub fn new(k: usize) -> ReferencePk {
        let exponents: Vec<(u32, u32)> =
            (0..=k as u32).flat_map(|d| (0..=d).map(move |b| (d - b, b))).collect();
        let n = exponents.len();
        let mut gram = DenseMatrix::zeros(n, n);
        for (i, &(ai, bi)) in exponents.iter().enumerate() {
            for (j, &(aj, bj)) in exponents.iter().enumerate() {
                gram[(i, j)] = reference_monomial_integral(ai + aj, bi + bj);
            }
        }
        let chol = DenseCholesky::factor(&gram, 1e-15).expect("monomial Gram is positive definite");
        // rows of L^{-1} are the coefficients of the orthonormal basis
        let mut coeffs = DenseMatrix::zeros(n, n);
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            chol.forward(&mut e);
            for i in 0..n {
                coeffs[(i, j)] = e[i];
            }
        }
        ReferencePk { k, exponents, coeffs }
    }

    pub fn degree(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    /// Values and reference partial derivatives of all basis functions.
    pub fn eval(&self, xi: [f64; 2], values: &mut [f64], d_xi: &mut [f64], d_eta: &mut [f64]) {
        let n = self.len();
        let mut m = [0.0; 64];
        let mut mx = [0.0; 64];
        let mut my = [0.0; 64];
        assert!(n <= 64, "degree too high");
        for (j, &(a, b)) in self.exponents.iter().enumerate() {
            let xa = libm::pow(xi[0], a as f64);
            let yb = libm::pow(xi[1], b as f64);
            m[j] = xa * yb;
            mx[j] = if a > 0 { a as f64 * libm::pow(xi[0], a as f64 - 1.0) * yb } else { 0.0 };
            my[j] = if b > 0 { b as f64 * xa * libm::pow(xi[1], b as f64 - 1.0) } else { 0.0 };
        }
        for i in 0..n {
            let c = self.coeffs.row(i);
            let (mut v, mut dx, mut dy) = (0.0, 0.0, 0.0);
            for j in 0..=i {
                v += c[j] * m[j];
                dx += c[j] * mx[j];
                dy += c[j] * my[j];
            }
            values[i] = v;
            d_xi[i] = dx;
            d_eta[i] = dy;
        }
    }
}

/// Basis values and first derivatives at a set of points.
///
/// Layout: `values[(p * n_basis + i) * dim + c]` and
/// `derivs[((p * n_basis + i) * dim + c) * 2 + d]` with `d = 0` for x.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisEval {
    pub n_points: usize,
    pub n_basis: usize,
    pub dim: usize,
    pub values: Vec<f64>,
    pub derivs: Vec<f64>,
}

impl BasisEval {
    fn zeros(n_points: usize, n_basis: usize, dim: usize) -> Self {
        BasisEval {
            n_points,
            n_basis,
            dim,
            values: vec![0.0; n_points * n_basis * dim],
            derivs: vec![0.0; n_points * n_basis * dim * 2],
        }
    }

    pub fn value(&self, p: usize, i: usize, c: usize) -> f64 {
        self.values[(p * self.n_basis + i) * self.dim + c]
    }

    pub fn deriv(&self, p: usize, i: usize, c: usize, d: usize) -> f64 {
        self.derivs[((p * self.n_basis + i) * self.dim + c) * 2 + d]
    }

    fn set(&mut self, p: usize, i: usize, c: usize, v: f64, g: [f64; 2]) {
        let k = (p * self.n_basis + i) * self.dim + c;
        self.values[k] = v;
        self.derivs[2 * k] = g[0];
        self.derivs[2 * k + 1] = g[1];
    }

    /// Divergence of a vector basis function.
    pub fn div(&self, p: usize, i: usize) -> f64 {
        self.deriv(p, i, 0, 0) + self.deriv(p, i, 1, 1)
    }

    /// `rot q = d_x q_y - d_y q_x` of a vector basis function.
    pub fn rot(&self, p: usize, i: usize) -> f64 {
        self.deriv(p, i, 1, 0) - self.deriv(p, i, 0, 1)
    }
}

/// Evaluates the local basis of `space` on element `t` at physical points.
pub fn eval_basis(space: &FeSpace, mesh: &Mesh, t: usize, points: &[[f64; 2]]) -> BasisEval {
    let kind = space.kind();
    let mut out = BasisEval::zeros(points.len(), kind.local_dofs(), kind.value_dim());
    let coords = mesh.triangle_coords(t);
    let z = [0.0, 0.0];
    match kind {
        SpaceKind::P0Scalar => {
            for p in 0..points.len() {
                out.set(p, 0, 0, 1.0, z);
            }
        }
        SpaceKind::P0Vector => {
            for p in 0..points.len() {
                out.set(p, 0, 0, 1.0, z);
                out.set(p, 1, 1, 1.0, z);
            }
        }
        SpaceKind::P0SymTensor => {
            for p in 0..points.len() {
                out.set(p, 0, 0, 1.0, z);
                out.set(p, 1, 3, 1.0, z);
                out.set(p, 2, 1, 1.0, z);
                out.set(p, 2, 2, 1.0, z);
            }
        }
        SpaceKind::P1cScalar | SpaceKind::P1cVector => {
            let grads = barycentric_gradients(&coords);
            for (p, &x) in points.iter().enumerate() {
                let l = barycentric(&coords, x);
                for i in 0..3 {
                    if kind == SpaceKind::P1cScalar {
                        out.set(p, i, 0, l[i], grads[i]);
                    } else {
                        out.set(p, 2 * i, 0, l[i], grads[i]);
                        out.set(p, 2 * i + 1, 1, l[i], grads[i]);
                    }
                }
            }
        }
        SpaceKind::Rt0 | SpaceKind::Nd0 | SpaceKind::Rt0RowsTensor => {
            let views = mesh.edge_views(t);
            let area = mesh.triangles()[t].area;
            for (p, &x) in points.iter().enumerate() {
                let vals = if kind == SpaceKind::Nd0 { nd0_local(mesh, t, x) } else { rt0_local(mesh, t, x) };
                for i in 0..3 {
                    let s = views[i].sign * views[i].length / (2.0 * area);
                    let v = vals[i].0;
                    // RT0: grad of component c is s e_c; ND0 = (-v_y, v_x)
                    let (g0, g1) = if kind == SpaceKind::Nd0 { ([0.0, -s], [s, 0.0]) } else { ([s, 0.0], [0.0, s]) };
                    if kind == SpaceKind::Rt0RowsTensor {
                        out.set(p, 2 * i, 0, v[0], g0);
                        out.set(p, 2 * i, 1, v[1], g1);
                        out.set(p, 2 * i + 1, 2, v[0], g0);
                        out.set(p, 2 * i + 1, 3, v[1], g1);
                    } else {
                        out.set(p, i, 0, v[0], g0);
                        out.set(p, i, 1, v[1], g1);
                    }
                }
            }
        }
        SpaceKind::BrokenPk(k) => {
            let basis = ReferencePk::new(k);
            let map = ElementMap::new(&coords);
            let n = basis.len();
            let (mut v, mut dx, mut dy) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
            for (p, &x) in points.iter().enumerate() {
                basis.eval(map.to_reference(x), &mut v, &mut dx, &mut dy);
                for i in 0..n {
                    out.set(p, i, 0, v[i], map.gradient([dx[i], dy[i]]));
                }
            }
        }
    }
    out
}

/// Product of broken P_k spaces for the test variables: `chi` (vector),
/// `rho` (vector), `S` (symmetric tensor, three components) and `v`.
///
/// Local dof order: `chi_x, chi_y, rho_x, rho_y` (first block), then
/// `S_xx, S_yy, S_xy, v` (second block), each a full scalar P_k basis.
#[derive(Debug, Clone)]
pub struct BrokenTestSpace {
    pub scalar: FeSpace,
    pub reference: ReferencePk,
    num_elements: usize,
}

/// Number of scalar fields in the test space.
pub const TEST_FIELDS: usize = 8;

impl BrokenTestSpace {
    pub fn per_field(&self) -> usize {
        self.reference.len()
    }

    pub fn dofs_per_element(&self) -> usize {
        TEST_FIELDS * self.per_field()
    }

    pub fn total_dofs(&self) -> usize {
        self.dofs_per_element() * self.num_elements
    }

    /// Local index of basis function `i` of scalar field `field`.
    pub fn local_index(&self, field: usize, i: usize) -> usize {
        field * self.per_field() + i
    }
}

pub fn broken_test_space(mesh: &Mesh, k: usize) -> Result<BrokenTestSpace> {
    if k == 0 {
        return Err(Error::Config("test degree must be at least 1".into()));
    }
    Ok(BrokenTestSpace {
        scalar: build_space(SpaceKind::BrokenPk(k), mesh, &BcSpec::None)?,
        reference: ReferencePk::new(k),
        num_elements: mesh.num_triangles(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_structured_square, SquareBc};
    use crate::quadrature::{map_to_physical, rule_for_degree};

    fn square(n: usize, kind: BcKind) -> Mesh {
        build_structured_square(n, SquareBc::uniform(kind)).unwrap()
    }

    #[test]
    fn dof_counts_on_two_triangles() {
        let m = square(1, BcKind::HardClamped);
        let all = BcSpec::ZeroOn(BcKind::ALL.to_vec());
        let p1 = build_space(SpaceKind::P1cScalar, &m, &all).unwrap();
        assert_eq!((p1.dof_count(), p1.num_constrained(), p1.num_free()), (4, 4, 0));
        let rt = build_space(SpaceKind::Rt0, &m, &BcSpec::None).unwrap();
        assert_eq!(rt.dof_count(), 5);
        let nd = build_space(SpaceKind::Nd0, &m, &all).unwrap();
        assert_eq!(nd.num_free(), 1);
        assert!(matches!(build_space(SpaceKind::P0Vector, &m, &all), Err(Error::IncompatibleBc(_))));
    }

    #[test]
    fn test_space_sizes() {
        let m = square(2, BcKind::HardClamped);
        let v3 = broken_test_space(&m, 3).unwrap();
        assert_eq!(v3.dofs_per_element(), 80);
        assert_eq!(v3.total_dofs(), 80 * 8);
        assert_eq!(broken_test_space(&m, 1).unwrap().dofs_per_element(), 24);
    }

    #[test]
    fn reference_basis_is_orthonormal() {
        let b = ReferencePk::new(3);
        let rule = rule_for_degree(6).unwrap();
        let n = b.len();
        let mut g = vec![0.0; n * n];
        let (mut v, mut dx, mut dy) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        for q in 0..rule.len() {
            b.eval(rule.ref_point(q), &mut v, &mut dx, &mut dy);
            for i in 0..n {
                for j in 0..n {
                    g[i * n + j] += rule.weights[q] * v[i] * v[j];
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((g[i * n + j] - e).abs() < 1e-12, "{i} {j} {}", g[i * n + j]);
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let m = square(2, BcKind::HardClamped);
        let kinds = [
            SpaceKind::P1cScalar,
            SpaceKind::P1cVector,
            SpaceKind::Rt0,
            SpaceKind::Nd0,
            SpaceKind::Rt0RowsTensor,
            SpaceKind::BrokenPk(3),
        ];
        let h = 1e-6;
        for kind in kinds {
            let s = build_space(kind, &m, &BcSpec::None).unwrap();
            for t in [0, 3, 6] {
                let c = m.centroid(t);
                let x = [c[0] + 0.01, c[1] - 0.005];
                let pts = [x, [x[0] + h, x[1]], [x[0] - h, x[1]], [x[0], x[1] + h], [x[0], x[1] - h]];
                let e = eval_basis(&s, &m, t, &pts);
                for i in 0..e.n_basis {
                    for cmp in 0..e.dim {
                        let fx = (e.value(1, i, cmp) - e.value(2, i, cmp)) / (2.0 * h);
                        let fy = (e.value(3, i, cmp) - e.value(4, i, cmp)) / (2.0 * h);
                        let scale = 1.0 + e.deriv(0, i, cmp, 0).abs() + e.deriv(0, i, cmp, 1).abs();
                        assert!((fx - e.deriv(0, i, cmp, 0)).abs() < 1e-6 * scale, "{kind:?}");
                        assert!((fy - e.deriv(0, i, cmp, 1)).abs() < 1e-6 * scale, "{kind:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn partition_of_unity_and_constant_divergence() {
        let m = square(2, BcKind::Free);
        let p1 = build_space(SpaceKind::P1cScalar, &m, &BcSpec::None).unwrap();
        let rt = build_space(SpaceKind::Rt0, &m, &BcSpec::None).unwrap();
        for t in 0..m.num_triangles() {
            let rule = map_to_physical(&rule_for_degree(4).unwrap(), &m.triangle_coords(t)).unwrap();
            let e = eval_basis(&p1, &m, t, &rule.points);
            for p in 0..e.n_points {
                let s: f64 = (0..3).map(|i| e.value(p, i, 0)).sum();
                assert!((s - 1.0).abs() < 1e-14);
            }
            let r = eval_basis(&rt, &m, t, &rule.points);
            let views = m.edge_views(t);
            for i in 0..3 {
                let expect = views[i].sign * views[i].length / m.triangles()[t].area;
                for p in 0..r.n_points {
                    assert!((r.div(p, i) - expect).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn rt0_normal_and_nd0_tangential_continuity() {
        let m = square(3, BcKind::Free);
        for (e, edge) in m.edges().iter().enumerate() {
            let [a, b] = edge.vertices;
            let (pa, pb) = (m.vertices()[a], m.vertices()[b]);
            let n = m.edge_normal(e);
            let tau = [-n[1], n[0]];
            for s in [0.2, 0.7] {
                let x = [pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1])];
                for (t, i) in edge.triangles.iter().flatten() {
                    let rt = rt0_local(&m, *t, x)[*i as usize].0;
                    let nd = nd0_local(&m, *t, x)[*i as usize].0;
                    assert!((rt[0] * n[0] + rt[1] * n[1] - 1.0).abs() < 1e-12);
                    assert!((nd[0] * tau[0] + nd[1] * tau[1] - 1.0).abs() < 1e-12);
                    // the other local functions have no flux through this edge
                    for j in (0..3).filter(|&j| j != *i as usize) {
                        let o = rt0_local(&m, *t, x)[j].0;
                        assert!((o[0] * n[0] + o[1] * n[1]).abs() < 1e-12);
                    }
                }
            }
        }
    }
}
