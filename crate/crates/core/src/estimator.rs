//! Residual estimators of the two Poisson stages, combination with the DPG
//! residual, and Dörfler marking.

use alloc::vec;
use alloc::vec::Vec;

use crate::mesh::Mesh;

/// Per-element estimator contributions (not squared).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EstimateField {
    pub eta1: Vec<f64>,
    pub eta2: Vec<f64>,
    pub eta3: Vec<f64>,
}

impl EstimateField {
    /// `eta_T = (eta1_T^2 + eta2_T^2 + eta3_T^2)^{1/2}`.
    pub fn combined(&self) -> Vec<f64> {
        (0..self.eta1.len())
            .map(|t| libm::sqrt(self.eta1[t] * self.eta1[t] + self.eta2[t] * self.eta2[t] + self.eta3[t] * self.eta3[t]))
            .collect()
    }

    /// Global values `[eta1, eta2, eta3, eta]`.
    pub fn totals(&self) -> [f64; 4] {
        let s = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
        let (a, b, c) = (s(&self.eta1), s(&self.eta2), s(&self.eta3));
        [libm::sqrt(a), libm::sqrt(b), libm::sqrt(c), libm::sqrt(a + b + c)]
    }
}

/// Residual estimator of a P1 Poisson solution with elementwise constant
/// flux `flux[t]` and volume residual `volume_sq[t] = |R|^2_{L2(T)}`:
///
/// `eta_T^2 = h_T^2 |R|_T^2 + sum_E w_E |E| |[flux . n]|_E^2`
///
/// with `w_E = 1/2` on interior edges, `1` on free boundary edges and no
/// contribution from edges with prescribed deflection.
pub fn poisson_estimator(mesh: &Mesh, flux: &[[f64; 2]], volume_sq: &[f64]) -> Vec<f64> {
    let nt = mesh.num_triangles();
    let mut sq: Vec<f64> = (0..nt)
        .map(|t| {
            let h = mesh.triangles()[t].diameter;
            h * h * volume_sq[t]
        })
        .collect();
    let mut jump_sq = vec![0.0; mesh.num_edges()];
    for (e, edge) in mesh.edges().iter().enumerate() {
        let n = mesh.edge_normal(e);
        let len = mesh.edge_length(e);
        let j = match edge.triangles {
            [Some((a, _)), Some((b, _))] => {
                let fa = flux[a];
                let fb = flux[b];
                (fa[0] - fb[0]) * n[0] + (fa[1] - fb[1]) * n[1]
            }
            [Some((a, _)), None] => match mesh.edge_kind(e) {
                Some(k) if !k.is_deflection_fixed() => flux[a][0] * n[0] + flux[a][1] * n[1],
                _ => 0.0,
            },
            _ => 0.0,
        };
        jump_sq[e] = len * len * j * j;
    }
    for (e, edge) in mesh.edges().iter().enumerate() {
        let w = if edge.is_boundary() { 1.0 } else { 0.5 };
        for (t, _) in edge.triangles.iter().flatten() {
            sq[*t] += w * jump_sq[e];
        }
    }
    sq.into_iter().map(libm::sqrt).collect()
}

/// Smallest set of elements whose squared indicators sum to at least
/// `theta` times the total; largest indicators first, ties by element
/// index. Returned in ascending element order.
pub fn doerfler_mark(eta: &[f64], theta: f64) -> Vec<usize> {
    let total: f64 = eta.iter().map(|x| x * x).sum();
    if !(total > 0.0) || theta <= 0.0 {
        return Vec::new();
    }
    let mut order: Vec<usize> = (0..eta.len()).collect();
    order.sort_by(|&a, &b| eta[b].total_cmp(&eta[a]).then(a.cmp(&b)));
    let mut acc = 0.0;
    let mut marked = Vec::new();
    for i in order {
        if acc >= theta * total {
            break;
        }
        acc += eta[i] * eta[i];
        marked.push(i);
    }
    marked.sort_unstable();
    marked
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_structured_square, BcKind, SquareBc};

    #[test]
    fn doerfler_prefix() {
        let eta = [1.0, 3.0, 2.0, 2.0];
        // total 18, the largest alone reaches half
        assert_eq!(doerfler_mark(&eta, 0.5), vec![1]);
        assert_eq!(doerfler_mark(&eta, 0.6), vec![1, 2]);
        assert_eq!(doerfler_mark(&eta, 1.0), vec![0, 1, 2, 3]);
        assert!(doerfler_mark(&[0.0, 0.0], 0.5).is_empty());
    }

    #[test]
    fn continuous_linear_flux_has_no_jumps() {
        let m = build_structured_square(3, SquareBc::uniform(BcKind::HardClamped)).unwrap();
        let flux = vec![[0.3, -1.0]; m.num_triangles()];
        let eta = poisson_estimator(&m, &flux, &vec![0.0; m.num_triangles()]);
        assert!(eta.iter().all(|&e| e < 1e-15));
        let m = build_structured_square(3, SquareBc { left: BcKind::Free, ..SquareBc::uniform(BcKind::HardClamped) }).unwrap();
        let eta = poisson_estimator(&m, &flux, &vec![0.0; m.num_triangles()]);
        assert!(eta.iter().any(|&e| e > 0.05));
    }
}
