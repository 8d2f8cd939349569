//! Conforming P1 discretization of `-Δw = g` with homogeneous Dirichlet
//! values on the deflection-fixed boundary and natural conditions on the
//! free boundary. Used for the potential of the shear force and for the
//! deflection.

use alloc::vec;
use alloc::vec::Vec;

use crate::exec::{ElementExecutor, CHUNK};
use crate::fespaces::barycentric_gradients;
use crate::linalg::{solve_spd, SolveStats, SolverOptions, SymmetricCsc, SymmetricPattern};
use crate::mesh::Mesh;
use crate::model::Load;
use crate::quadrature::{map_to_physical, QuadratureRule};
use crate::Result;

/// Free vertex numbering.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct P1Layout {
    pub free: Vec<Option<usize>>,
    pub n_free: usize,
}

impl P1Layout {
    /// Vertices on deflection-fixed edges carry the value zero.
    pub fn new(mesh: &Mesh) -> P1Layout {
        let mut fixed = vec![false; mesh.num_vertices()];
        for e in mesh.boundary_edges() {
            if mesh.edge_kind(e).is_some_and(|k| k.is_deflection_fixed()) {
                for v in mesh.edges()[e].vertices {
                    fixed[v] = true;
                }
            }
        }
        let mut n_free = 0;
        let free = fixed
            .iter()
            .map(|&f| {
                if f {
                    None
                } else {
                    n_free += 1;
                    Some(n_free - 1)
                }
            })
            .collect();
        P1Layout { free, n_free }
    }
}

/// Element stiffness matrix `(grad λ_i, grad λ_j)_T`.
pub fn element_stiffness(mesh: &Mesh, t: usize) -> [[f64; 3]; 3] {
    let g = barycentric_gradients(&mesh.triangle_coords(t));
    let area = mesh.triangles()[t].area;
    let mut k = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            k[i][j] = area * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
        }
    }
    k
}

/// `(scale * load, λ_i)_T` by quadrature.
pub fn element_load(mesh: &Mesh, t: usize, load: &Load, scale: f64, rule: &QuadratureRule) -> Result<[f64; 3]> {
    let mut out = [0.0; 3];
    if load.is_zero() || scale == 0.0 {
        return Ok(out);
    }
    let coords = mesh.triangle_coords(t);
    if let Load::Constant(c) = load {
        let v = scale * c * mesh.triangles()[t].area / 3.0;
        return Ok([v; 3]);
    }
    let phys = map_to_physical(rule, &coords)?;
    for (q, (x, w)) in phys.points.iter().zip(&phys.weights).enumerate() {
        let f = scale * w * load.eval(*x);
        for (i, o) in out.iter_mut().enumerate() {
            *o += f * rule.points[q][i];
        }
    }
    Ok(out)
}

/// Assembles and solves the Dirichlet problem; `local_load(t)` returns the
/// load vector of element `t`. Returns nodal values (zero on fixed
/// vertices).
pub fn solve_p1<E, F>(mesh: &Mesh, layout: &P1Layout, local_load: F, exec: &E, opts: &SolverOptions) -> Result<(Vec<f64>, SolveStats)>
where
    E: ElementExecutor,
    F: Fn(usize) -> Result<[f64; 3]> + Sync + Send,
{
    let nt = mesh.num_triangles();
    let local = |t: usize| -> [Option<usize>; 3] { mesh.triangles()[t].vertices.map(|v| layout.free[v]) };
    let cliques: Vec<Vec<usize>> = (0..nt).map(|t| local(t).iter().flatten().copied().collect()).collect();
    let pattern = SymmetricPattern::from_cliques(layout.n_free, cliques.iter().map(|c| c.as_slice()));
    let mut a = SymmetricCsc::zeros(pattern);
    let mut b = vec![0.0; layout.n_free];
    let mut start = 0;
    while start < nt {
        let end = (start + CHUNK).min(nt);
        let loads = exec.map(start..end, &local_load);
        for (k, l) in loads.into_iter().enumerate() {
            let l = l?;
            let t = start + k;
            let kt = element_stiffness(mesh, t);
            let d = local(t);
            for i in 0..3 {
                let Some(fi) = d[i] else { continue };
                b[fi] += l[i];
                for j in 0..3 {
                    if let Some(fj) = d[j] {
                        if fi <= fj {
                            a.add(fi, fj, kt[i][j]);
                        }
                    }
                }
            }
        }
        start = end;
    }
    let (x, stats) = solve_spd(&a, &b, opts, None, None)?;
    let values = layout.free.iter().map(|f| f.map_or(0.0, |i| x[i])).collect();
    Ok((values, stats))
}
