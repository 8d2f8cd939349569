use nalgebra::{DMatrix, DVector};

use rm_dpg::dpg::{assemble_normal_equations, local_b, local_gram, local_load, DofLayout, KernelContext, LOCAL_TRIAL};
use rm_dpg::exec::{NoClock, Sequential};
use rm_dpg::mesh::{build_structured_square, SquareBc};
use rm_dpg::model::{example1_polynomial, ExactSolution, Load, ModelConfig};
use rm_dpg::stages::{error_norms, solve_all, PipelineOptions};
use rm_dpg::{BcKind, MaterialTensor};

fn dense(m: &rm_dpg::linalg::DenseMatrix) -> DMatrix<f64> {
    DMatrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)])
}

/// The assembled system equals P^T B^T G^-1 B P built from dense blocks.
#[test]
fn normal_equations_match_dense_construction() {
    for kind in [BcKind::HardClamped, BcKind::SoftClamped, BcKind::HardSimpleSupport] {
        let mesh = build_structured_square(1, SquareBc::uniform(kind)).unwrap();
        let cfg = ModelConfig::new(&mesh, 0.05, MaterialTensor::Identity, Load::Constant(1.0)).unwrap();
        let ctx = KernelContext::new(&cfg, 3, 6).unwrap();
        let layout = DofLayout::new(&mesh, &cfg, true);
        let grad_r = vec![[0.3, -0.7]; mesh.num_triangles()];
        let sys = assemble_normal_equations(&ctx, &mesh, &layout, &grad_r, &Sequential).unwrap();

        let nf = layout.n_free();
        let mut a = DMatrix::zeros(nf, nf);
        let mut rhs = DVector::zeros(nf);
        for t in 0..mesh.num_triangles() {
            let g = dense(&local_gram(&ctx, &mesh, t).unwrap());
            let b = dense(&local_b(&ctx, &mesh, t).unwrap());
            let l = DVector::from_vec(local_load(&ctx, &mesh, t, grad_r[t]).unwrap());
            let mut p = DMatrix::zeros(LOCAL_TRIAL, nf);
            for (k, &d) in layout.local_dofs(&mesh, t).iter().enumerate() {
                for (f, w) in layout.prolongation(d) {
                    p[(k, f)] += w;
                }
            }
            let ginv = g.clone().cholesky().unwrap().inverse();
            let bp = &b * &p;
            a += bp.transpose() * &ginv * &bp;
            rhs += bp.transpose() * &ginv * &l;
        }
        let got = DMatrix::from_fn(nf, nf, |i, j| sys.matrix.get(i.min(j), i.max(j)));
        let scale = a.amax();
        assert!((&got - &a).amax() <= 1e-10 * scale, "{kind:?}: {}", (&got - &a).amax() / scale);
        let rhs_got = DVector::from_vec(sys.rhs.clone());
        assert!((&rhs_got - &rhs).amax() <= 1e-10 * rhs.amax().max(1.0));
        let eig = a.symmetric_eigenvalues();
        assert!(eig.min() > 1e-12 * eig.max(), "{kind:?}: not definite, {}", eig.min() / eig.max());
    }
}

/// Errors stay bounded as the thickness goes to zero.
#[test]
fn stable_for_vanishing_thickness() {
    let mesh = build_structured_square(4, SquareBc::uniform(BcKind::HardClamped)).unwrap().refine_uniform();
    let mut errs = Vec::new();
    for t in [1e-2, 1e-4, 1e-6] {
        let ex = example1_polynomial(t);
        let load = Load::Field(std::sync::Arc::new(move |x: [f64; 2]| example1_polynomial(t).load(x)));
        let cfg = ModelConfig::new(&mesh, t, MaterialTensor::Identity, load).unwrap();
        let ctx = KernelContext::new(&cfg, 3, 6).unwrap();
        let opts = PipelineOptions::default();
        let sol = solve_all(&mesh, &cfg, &ctx, &opts, &Sequential, &NoClock).unwrap();
        let e = error_norms(&mesh, &sol, &ex as &dyn ExactSolution, 14, &Sequential).unwrap();
        errs.push([e.u_h1, e.psi, e.moment]);
    }
    for e in &errs[1..] {
        for k in 0..3 {
            assert!(e[k].is_finite() && e[k] <= 3.0 * errs[0][k], "{errs:?}");
        }
    }
}
