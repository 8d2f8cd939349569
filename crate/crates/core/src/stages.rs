//! The three solve stages, error evaluation and the refinement loop.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::dpg::{assemble_normal_equations, p1_gradients, residual_norms, DofLayout, KernelContext, FIELD_DOFS, MOMENT, P, PSI};
use crate::estimator::{doerfler_mark, poisson_estimator, EstimateField};
use crate::exec::{Clock, ElementExecutor, CHUNK};
use crate::linalg::ordering::nested_dissection;
use crate::linalg::{solve_spd, SolveStats, SolverKind, SolverOptions};
use crate::mesh::Mesh;
use crate::model::{ExactSolution, Load, MaterialTensor, ModelConfig};
use crate::poisson::{element_load, solve_p1, P1Layout};
use crate::quadrature::{map_to_physical, rule_for_degree, QuadratureRule};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuadDegrees {
    /// DPG Gram, bilinear form and load integrals.
    pub dpg: usize,
    /// Loads of the Poisson stages and volume residuals.
    pub load: usize,
    /// Errors against exact solutions.
    pub error: usize,
}

impl Default for QuadDegrees {
    fn default() -> Self {
        QuadDegrees { dpg: 6, load: 14, error: 14 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineOptions {
    pub n_refinements: usize,
    pub adaptive: bool,
    pub theta: f64,
    pub test_degree: usize,
    pub quad: QuadDegrees,
    pub solver: SolverOptions,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            n_refinements: 0,
            adaptive: false,
            theta: 0.5,
            test_degree: 3,
            quad: QuadDegrees::default(),
            solver: SolverOptions::default(),
        }
    }
}

/// Plate problem on an initial mesh.
#[derive(Clone)]
pub struct Problem {
    pub mesh: Mesh,
    pub t: f64,
    pub material: MaterialTensor,
    pub load: Load,
    pub exact: Option<Arc<dyn ExactSolution>>,
}

/// Stage-2 unknowns as full coefficients of `layout`.
#[derive(Debug, Clone)]
pub struct Stage2Solution {
    pub layout: DofLayout,
    pub full: Vec<f64>,
}

impl Stage2Solution {
    pub fn psi(&self, t: usize) -> [f64; 2] {
        let b = FIELD_DOFS * t;
        [self.full[b + PSI], self.full[b + PSI + 1]]
    }

    pub fn eta(&self, t: usize) -> [f64; 2] {
        let b = FIELD_DOFS * t + crate::dpg::ETA;
        [self.full[b], self.full[b + 1]]
    }

    /// `[M_xx, M_yy, M_xy]`.
    pub fn moment(&self, t: usize) -> [f64; 3] {
        let b = FIELD_DOFS * t + MOMENT;
        [self.full[b], self.full[b + 1], self.full[b + 2]]
    }

    pub fn p(&self, t: usize) -> f64 {
        self.full[FIELD_DOFS * t + P]
    }
}

#[derive(Debug, Clone)]
pub struct StageSolution {
    /// Nodal values of the shear potential.
    pub r: Vec<f64>,
    pub grad_r: Vec<[f64; 2]>,
    pub stage2: Stage2Solution,
    /// Nodal values of the deflection.
    pub u: Vec<f64>,
    pub stats: [SolveStats; 3],
}

pub fn stage1<E: ElementExecutor>(mesh: &Mesh, cfg: &ModelConfig, opts: &PipelineOptions, exec: &E) -> Result<(Vec<f64>, SolveStats)> {
    let rule = rule_for_degree(opts.quad.load)?;
    let layout = P1Layout::new(mesh);
    solve_p1(mesh, &layout, |t| element_load(mesh, t, &cfg.load, 1.0, &rule), exec, &opts.solver)
}

/// Field unknowns first (each couples only within its element, so
/// eliminating them first is element-wise condensation), then nested
/// dissection of the skeleton unknowns.
fn stage2_ordering(matrix: &crate::linalg::SymmetricCsc, n_field: usize) -> Vec<usize> {
    let adj = matrix.adjacency();
    let trace_adj: Vec<Vec<usize>> =
        adj[n_field..].iter().map(|row| row.iter().filter(|&&j| j >= n_field).map(|&j| j - n_field).collect()).collect();
    drop(adj);
    let mut perm: Vec<usize> = (0..n_field).collect();
    perm.extend(nested_dissection(&trace_adj).into_iter().map(|j| j + n_field));
    perm
}

pub fn stage2<E: ElementExecutor>(
    mesh: &Mesh,
    cfg: &ModelConfig,
    ctx: &KernelContext,
    grad_r: &[[f64; 2]],
    opts: &PipelineOptions,
    exec: &E,
) -> Result<(Stage2Solution, SolveStats)> {
    let pin = opts.solver.kind == SolverKind::Direct;
    let layout = DofLayout::new(mesh, cfg, pin);
    let ne = assemble_normal_equations(ctx, mesh, &layout, grad_r, exec)?;
    let (x, stats) = match opts.solver.kind {
        SolverKind::Direct => {
            let perm = stage2_ordering(&ne.matrix, layout.n_field());
            solve_spd(&ne.matrix, &ne.rhs, &opts.solver, Some(perm), None)?
        }
        SolverKind::Cg => {
            if cfg.quotient_mode {
                // (p, 1) = 0 through a penalty on the mean of p
                let mut a = vec![0.0; layout.n_free()];
                let mut p_diag = 0.0;
                for t in 0..mesh.num_triangles() {
                    let d = FIELD_DOFS * t + P;
                    a[d] = mesh.triangles()[t].area;
                    p_diag += ne.matrix.get(d, d);
                }
                let a2: f64 = a.iter().map(|v| v * v).sum();
                let gamma = p_diag / mesh.num_triangles() as f64 / a2;
                solve_spd(&ne.matrix, &ne.rhs, &opts.solver, None, Some((&a, gamma)))?
            } else {
                solve_spd(&ne.matrix, &ne.rhs, &opts.solver, None, None)?
            }
        }
    };
    let mut full = layout.expand(&x);
    if cfg.quotient_mode {
        let area = mesh.total_area();
        let mean = (0..mesh.num_triangles()).map(|t| mesh.triangles()[t].area * full[FIELD_DOFS * t + P]).sum::<f64>() / area;
        for t in 0..mesh.num_triangles() {
            full[FIELD_DOFS * t + P] -= mean;
        }
        for v in full[layout.p_trace_offset()..].iter_mut() {
            *v -= mean;
        }
    }
    Ok((Stage2Solution { layout, full }, stats))
}

pub fn stage3<E: ElementExecutor>(
    mesh: &Mesh,
    cfg: &ModelConfig,
    stage2: &Stage2Solution,
    opts: &PipelineOptions,
    exec: &E,
) -> Result<(Vec<f64>, SolveStats)> {
    let rule = rule_for_degree(opts.quad.load)?;
    let layout = P1Layout::new(mesh);
    let t2 = cfg.t * cfg.t;
    solve_p1(
        mesh,
        &layout,
        |t| {
            let mut l = element_load(mesh, t, &cfg.load, t2, &rule)?;
            let g = crate::fespaces::barycentric_gradients(&mesh.triangle_coords(t));
            let psi = stage2.psi(t);
            let area = mesh.triangles()[t].area;
            for i in 0..3 {
                l[i] += area * (psi[0] * g[i][0] + psi[1] * g[i][1]);
            }
            Ok(l)
        },
        exec,
        &opts.solver,
    )
}

/// Runs the three stages on one mesh.
pub fn solve_all<E: ElementExecutor, C: Clock + ?Sized>(
    mesh: &Mesh,
    cfg: &ModelConfig,
    ctx: &KernelContext,
    opts: &PipelineOptions,
    exec: &E,
    clock: &C,
) -> Result<StageSolution> {
    let t0 = clock.now();
    let (r, mut s1) = stage1(mesh, cfg, opts, exec)?;
    let t1 = clock.now();
    let grad_r = p1_gradients(mesh, &r);
    let (stage2, mut s2) = stage2(mesh, cfg, ctx, &grad_r, opts, exec)?;
    let t2 = clock.now();
    let (u, mut s3) = stage3(mesh, cfg, &stage2, opts, exec)?;
    let t3 = clock.now();
    s1.seconds = t1 - t0;
    s2.seconds = t2 - t1;
    s3.seconds = t3 - t2;
    Ok(StageSolution { r, grad_r, stage2, u, stats: [s1, s2, s3] })
}

fn volume_residual_sq<E: ElementExecutor>(mesh: &Mesh, load: &Load, scale: f64, rule: &QuadratureRule, exec: &E) -> Result<Vec<f64>> {
    let nt = mesh.num_triangles();
    if let Load::Constant(c) = load {
        return Ok((0..nt).map(|t| scale * scale * c * c * mesh.triangles()[t].area).collect());
    }
    let mut out = Vec::with_capacity(nt);
    let mut start = 0;
    while start < nt {
        let end = (start + CHUNK).min(nt);
        let vals = exec.map(start..end, |t| -> Result<f64> {
            let p = map_to_physical(rule, &mesh.triangle_coords(t))?;
            Ok(p.points.iter().zip(&p.weights).map(|(x, w)| {
                let f = scale * load.eval(*x);
                w * f * f
            }).sum())
        });
        for v in vals {
            out.push(v?);
        }
        start = end;
    }
    Ok(out)
}

/// All three estimator fields for a computed solution.
pub fn estimate<E: ElementExecutor>(
    mesh: &Mesh,
    cfg: &ModelConfig,
    ctx: &KernelContext,
    sol: &StageSolution,
    opts: &PipelineOptions,
    exec: &E,
) -> Result<EstimateField> {
    let rule = rule_for_degree(opts.quad.load)?;
    let f_sq = volume_residual_sq(mesh, &cfg.load, 1.0, &rule, exec)?;
    let eta1 = poisson_estimator(mesh, &sol.grad_r, &f_sq);
    let eta2 = residual_norms(ctx, mesh, &sol.stage2.layout, &sol.grad_r, &sol.stage2.full, exec)?;
    let t2 = cfg.t * cfg.t;
    let grad_u = p1_gradients(mesh, &sol.u);
    let flux: Vec<[f64; 2]> = (0..mesh.num_triangles())
        .map(|t| {
            let psi = sol.stage2.psi(t);
            [grad_u[t][0] - psi[0], grad_u[t][1] - psi[1]]
        })
        .collect();
    let r3: Vec<f64> = f_sq.iter().map(|v| t2 * t2 * v).collect();
    let eta3 = poisson_estimator(mesh, &flux, &r3);
    Ok(EstimateField { eta1, eta2, eta3 })
}

/// `|u - u_h|_{H1}` (full norm), `|psi - psi_h|`, `|M - M_h|` in L2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorNorms {
    pub u_h1: f64,
    pub psi: f64,
    pub moment: f64,
}

pub fn error_norms<E: ElementExecutor>(
    mesh: &Mesh,
    sol: &StageSolution,
    exact: &dyn ExactSolution,
    degree: usize,
    exec: &E,
) -> Result<ErrorNorms> {
    let rule = rule_for_degree(degree)?;
    let grad_u = p1_gradients(mesh, &sol.u);
    let nt = mesh.num_triangles();
    let mut acc = [0.0; 3];
    let mut start = 0;
    while start < nt {
        let end = (start + CHUNK).min(nt);
        let parts = exec.map(start..end, |t| -> Result<[f64; 3]> {
            let p = map_to_physical(&rule, &mesh.triangle_coords(t))?;
            let v = mesh.triangles()[t].vertices;
            let psi_h = sol.stage2.psi(t);
            let m_h = sol.stage2.moment(t);
            let mut e = [0.0; 3];
            for (q, (x, w)) in p.points.iter().zip(&p.weights).enumerate() {
                let ex = exact.values(*x);
                let l = rule.points[q];
                let uh = l[0] * sol.u[v[0]] + l[1] * sol.u[v[1]] + l[2] * sol.u[v[2]];
                let du = [ex.grad_u[0] - grad_u[t][0], ex.grad_u[1] - grad_u[t][1]];
                let dp = [ex.psi[0] - psi_h[0], ex.psi[1] - psi_h[1]];
                e[0] += w * ((ex.u - uh) * (ex.u - uh) + du[0] * du[0] + du[1] * du[1]);
                e[1] += w * (dp[0] * dp[0] + dp[1] * dp[1]);
                let dm = [ex.moment[0] - m_h[0], ex.moment[1] - m_h[1], ex.moment[2] - m_h[2]];
                e[2] += w * (dm[0] * dm[0] + dm[1] * dm[1] + 2.0 * dm[2] * dm[2]);
            }
            Ok(e)
        });
        for part in parts {
            let part = part?;
            for k in 0..3 {
                acc[k] += part[k];
            }
        }
        start = end;
    }
    Ok(ErrorNorms { u_h1: libm::sqrt(acc[0]), psi: libm::sqrt(acc[1]), moment: libm::sqrt(acc[2]) })
}

/// One row of the convergence history.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelRecord {
    pub level: usize,
    pub n_triangles: usize,
    /// Unknowns of the DPG stage.
    pub dofs: usize,
    pub t: f64,
    pub errors: Option<ErrorNorms>,
    /// `[eta1, eta2, eta3, eta]`.
    pub estimators: [f64; 4],
    /// Wall time of the three solves in seconds (zero without a clock).
    pub solve_seconds: [f64; 3],
    pub n_marked: usize,
}

/// Everything known about one level, handed to the observer of
/// [`run_pipeline`].
pub struct LevelData<'a> {
    pub record: &'a LevelRecord,
    pub mesh: &'a Mesh,
    pub config: &'a ModelConfig,
    pub kernel: &'a KernelContext,
    pub solution: &'a StageSolution,
    pub estimates: &'a EstimateField,
    pub marked: &'a [usize],
}

/// Solve, estimate, mark and refine for `n_refinements + 1` levels.
pub fn run_pipeline<E, C, F>(problem: &Problem, opts: &PipelineOptions, exec: &E, clock: &C, mut observe: F) -> Result<Vec<LevelRecord>>
where
    E: ElementExecutor,
    C: Clock + ?Sized,
    F: FnMut(&LevelData<'_>) -> Result<()>,
{
    if !(opts.theta > 0.0 && opts.theta <= 1.0) {
        return Err(Error::Config(alloc::format!("theta = {} outside (0, 1]", opts.theta)));
    }
    let mut mesh = problem.mesh.clone();
    let mut records = Vec::new();
    for level in 0..=opts.n_refinements {
        let cfg = ModelConfig::new(&mesh, problem.t, problem.material, problem.load.clone())?;
        let ctx = KernelContext::new(&cfg, opts.test_degree, opts.quad.dpg)?;
        let sol = solve_all(&mesh, &cfg, &ctx, opts, exec, clock)?;
        let est = estimate(&mesh, &cfg, &ctx, &sol, opts, exec)?;
        let errors = match &problem.exact {
            Some(ex) => Some(error_norms(&mesh, &sol, ex.as_ref(), opts.quad.error, exec)?),
            None => None,
        };
        let last = level == opts.n_refinements;
        let marked = if opts.adaptive && !last { doerfler_mark(&est.combined(), opts.theta) } else { Vec::new() };
        let record = LevelRecord {
            level,
            n_triangles: mesh.num_triangles(),
            dofs: sol.stats[1].dofs,
            t: problem.t,
            errors,
            estimators: est.totals(),
            solve_seconds: sol.stats.map(|s| s.seconds),
            n_marked: marked.len(),
        };
        observe(&LevelData { record: &record, mesh: &mesh, config: &cfg, kernel: &ctx, solution: &sol, estimates: &est, marked: &marked })?;
        records.push(record);
        if !last {
            mesh = if opts.adaptive { mesh.refine_nvb(&marked) } else { mesh.refine_uniform() };
        }
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::{NoClock, Sequential};
    use crate::mesh::{build_structured_square, BcKind, SquareBc};
    use crate::model::example1_polynomial;

    fn poly_problem(n: usize, t: f64) -> Problem {
        let ex = example1_polynomial(t);
        let e2 = ex;
        Problem {
            mesh: build_structured_square(n, SquareBc::uniform(BcKind::HardClamped)).unwrap(),
            t,
            material: MaterialTensor::Identity,
            load: Load::Field(Arc::new(move |x| e2.load(x))),
            exact: Some(Arc::new(ex)),
        }
    }

    #[test]
    fn zero_load_gives_zero_solution() {
        let mut p = poly_problem(2, 1e-2);
        p.load = Load::Constant(0.0);
        let opts = PipelineOptions::default();
        let cfg = ModelConfig::new(&p.mesh, p.t, p.material, p.load.clone()).unwrap();
        let ctx = KernelContext::new(&cfg, 3, 6).unwrap();
        let sol = solve_all(&p.mesh, &cfg, &ctx, &opts, &Sequential, &NoClock).unwrap();
        assert!(sol.r.iter().chain(&sol.u).chain(&sol.stage2.full).all(|v| v.abs() <= 1e-9));
    }

    #[test]
    fn direct_and_cg_agree() {
        let p = poly_problem(2, 0.1);
        let cfg = ModelConfig::new(&p.mesh, p.t, p.material, p.load.clone()).unwrap();
        let ctx = KernelContext::new(&cfg, 3, 6).unwrap();
        let mut opts = PipelineOptions::default();
        let a = solve_all(&p.mesh, &cfg, &ctx, &opts, &Sequential, &NoClock).unwrap();
        opts.solver.kind = SolverKind::Cg;
        opts.solver.cg_tol = 1e-13;
        let b = solve_all(&p.mesh, &cfg, &ctx, &opts, &Sequential, &NoClock).unwrap();
        let scale = a.stage2.full.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (x, y) in a.stage2.full.iter().zip(&b.stage2.full) {
            assert!((x - y).abs() <= 1e-6 * scale, "{x} {y}");
        }
        let mean: f64 = (0..p.mesh.num_triangles()).map(|t| p.mesh.triangles()[t].area * a.stage2.p(t)).sum();
        assert!(mean.abs() < 1e-14);
    }

    #[test]
    fn uniform_errors_decrease() {
        let p = poly_problem(2, 1e-2);
        let opts = PipelineOptions { n_refinements: 2, ..PipelineOptions::default() };
        let rec = run_pipeline(&p, &opts, &Sequential, &NoClock, |_| Ok(())).unwrap();
        assert_eq!(rec.iter().map(|r| r.n_triangles).collect::<Vec<_>>(), vec![8, 32, 128]);
        for w in rec.windows(2) {
            let (a, b) = (w[0].errors.unwrap(), w[1].errors.unwrap());
            assert!(b.psi < a.psi && b.moment < a.moment && b.u_h1 < a.u_h1, "{a:?} {b:?}");
        }
    }
}
