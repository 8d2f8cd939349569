use proptest::prelude::*;

use rm_dpg::estimator::doerfler_mark;
use rm_dpg::mesh::{build_lshape, build_structured_square, LShapeBc, SquareBc};
use rm_dpg::quadrature::{map_to_physical, rule_for_degree};
use rm_dpg::{BcKind, Mesh};

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

fn barycentric(c: &[[f64; 2]; 3], x: [f64; 2]) -> [f64; 3] {
    let area2 = (c[1][0] - c[0][0]) * (c[2][1] - c[0][1]) - (c[2][0] - c[0][0]) * (c[1][1] - c[0][1]);
    let sub = |a: [f64; 2], b: [f64; 2]| ((a[0] - x[0]) * (b[1] - x[1]) - (b[0] - x[0]) * (a[1] - x[1])) / area2;
    [sub(c[1], c[2]), sub(c[2], c[0]), sub(c[0], c[1])]
}

fn boundary_length(mesh: &Mesh, kind: BcKind) -> f64 {
    mesh.boundary_edges().filter(|&e| mesh.edge_kind(e) == Some(kind)).map(|e| mesh.edge_length(e)).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Integral of l0^a l1^b l2^c over any triangle is 2|T| a! b! c! / (a+b+c+2)!.
    #[test]
    fn quadrature_exact_on_affine_images(
        pts in prop::array::uniform3(prop::array::uniform2(-3.0f64..3.0)),
        a in 0u32..8, b in 0u32..8, c in 0u32..5, extra in 0usize..3,
    ) {
        let area2 = (pts[1][0] - pts[0][0]) * (pts[2][1] - pts[0][1]) - (pts[2][0] - pts[0][0]) * (pts[1][1] - pts[0][1]);
        prop_assume!(area2.abs() > 0.05);
        let deg = (a + b + c) as usize + extra;
        prop_assume!(deg <= 20);
        let rule = rule_for_degree(deg.max(1)).unwrap();
        let coords = if area2 > 0.0 { pts } else { [pts[0], pts[2], pts[1]] };
        let phys = map_to_physical(&rule, &coords).unwrap();
        let q: f64 = phys.points.iter().zip(&phys.weights).map(|(x, w)| {
            let l = barycentric(&coords, *x);
            w * l[0].powi(a as i32) * l[1].powi(b as i32) * l[2].powi(c as i32)
        }).sum();
        let exact = area2.abs() * factorial(a) * factorial(b) * factorial(c) / factorial(a + b + c + 2);
        prop_assert!((q - exact).abs() <= 1e-12 * exact.max(1e-300) + 1e-15, "{} vs {}", q, exact);
    }

    /// Newest-vertex bisection keeps the mesh conforming, preserves area and
    /// boundary tags, and produces no new triangle shapes on a criss-cross
    /// free square mesh.
    #[test]
    fn nvb_invariants(seed_marks in prop::collection::vec(prop::collection::vec(0usize..10_000, 1..6), 1..6), lshape in any::<bool>()) {
        let mut mesh = if lshape {
            build_lshape(1, LShapeBc::clamped_corner()).unwrap()
        } else {
            build_structured_square(2, SquareBc { left: BcKind::HardClamped, right: BcKind::SoftClamped, ..SquareBc::uniform(BcKind::Free) }).unwrap()
        };
        let kinds: Vec<(BcKind, f64)> = BcKind::ALL.iter().map(|&k| (k, boundary_length(&mesh, k))).collect();
        let area = mesh.total_area();
        let angle = mesh.min_angle();
        for marks in seed_marks {
            let nt = mesh.num_triangles();
            let mut m: Vec<usize> = marks.iter().map(|i| i % nt).collect();
            m.sort_unstable();
            m.dedup();
            let next = mesh.refine_nvb(&m);
            prop_assert!(next.num_triangles() >= nt + m.len());
            next.check_conforming().unwrap();
            mesh = next;
        }
        prop_assert!((mesh.total_area() - area).abs() <= 1e-12 * area);
        prop_assert!(mesh.min_angle() >= angle / 2.0 - 1e-12);
        for (k, len) in kinds {
            prop_assert!((boundary_length(&mesh, k) - len).abs() <= 1e-12, "{:?}", k);
        }
    }

    /// The marked set reaches the bulk fraction and no smaller set does.
    #[test]
    fn doerfler_marks_a_minimal_set(eta in prop::collection::vec(0.0f64..10.0, 1..200), theta in 0.05f64..1.0) {
        let marked = doerfler_mark(&eta, theta);
        let total: f64 = eta.iter().map(|e| e * e).sum();
        let sum: f64 = marked.iter().map(|&i| eta[i] * eta[i]).sum();
        prop_assert!(marked.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(sum >= theta * total * (1.0 - 1e-12));
        // the largest |marked|-1 indicators fall short
        let mut sq: Vec<f64> = eta.iter().map(|e| e * e).collect();
        sq.sort_by(|a, b| b.partial_cmp(a).unwrap());
        if !marked.is_empty() && total > 0.0 {
            let best: f64 = sq[..marked.len() - 1].iter().sum();
            prop_assert!(best < theta * total);
        }
    }
}

#[test]
fn uniform_refinement_quadruples() {
    let m = build_structured_square(4, SquareBc::uniform(BcKind::HardClamped)).unwrap();
    let r = m.refine_uniform();
    assert_eq!(r.num_triangles(), 4 * m.num_triangles());
    r.check_conforming().unwrap();
    assert!((r.min_angle() - m.min_angle()).abs() < 1e-12);
}
