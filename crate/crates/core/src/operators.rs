//! Staggered difference operators and the Thomas solver.

use crate::error::{Error, Result};
use crate::model::MassGrid;

/// Boundary treatment for the center-to-node derivative.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeBoundary {
    /// Zero derivative at both boundary nodes.
    NeumannZero,
    /// One-sided second-order difference from the first three centers.
    OneSided,
}

/// `(v_{i+1} - v_i) / dy` at each center.
pub fn ddy_node_to_center(v: &[f64], grid: &MassGrid) -> Vec<f64> {
    debug_assert_eq!(v.len(), grid.nodes());
    let inv = 1.0 / grid.dy();
    v.windows(2).map(|w| (w[1] - w[0]) * inv).collect()
}

/// `(w_{i+1/2} - w_{i-1/2}) / dy` at interior nodes, boundary nodes per `bc`.
pub fn ddy_center_to_node(w: &[f64], grid: &MassGrid, bc: NodeBoundary) -> Vec<f64> {
    let n = w.len();
    debug_assert_eq!(n, grid.cells());
    let inv = 1.0 / grid.dy();
    let mut out = vec![0.0; n + 1];
    for i in 1..n {
        out[i] = (w[i] - w[i - 1]) * inv;
    }
    if bc == NodeBoundary::OneSided {
        if n >= 3 {
            out[0] = (-2.0 * w[0] + 3.0 * w[1] - w[2]) * inv;
            out[n] = (2.0 * w[n - 1] - 3.0 * w[n - 2] + w[n - 3]) * inv;
        } else {
            out[0] = (w[1] - w[0]) * inv;
            out[n] = out[0];
        }
    }
    out
}

/// Tridiagonal system `sub[i] x[i-1] + diag[i] x[i] + sup[i] x[i+1] = rhs[i]`.
///
/// `sub[0]` and `sup[n-1]` are ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalSystem {
    pub sub: Vec<f64>,
    pub diag: Vec<f64>,
    pub sup: Vec<f64>,
    pub rhs: Vec<f64>,
}

impl TridiagonalSystem {
    pub fn zeros(n: usize) -> Self {
        Self {
            sub: vec![0.0; n],
            diag: vec![0.0; n],
            sup: vec![0.0; n],
            rhs: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Pins `x[i] = value` with an identity row.
    pub fn dirichlet_row(&mut self, i: usize, value: f64) {
        self.sub[i] = 0.0;
        self.sup[i] = 0.0;
        self.diag[i] = 1.0;
        self.rhs[i] = value;
    }

    /// `A x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i] * x[i];
                if i > 0 {
                    s += self.sub[i] * x[i - 1];
                }
                if i + 1 < n {
                    s += self.sup[i] * x[i + 1];
                }
                s
            })
            .collect()
    }

    /// Row-sum infinity norm of the matrix.
    pub fn matrix_inf_norm(&self) -> f64 {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i].abs();
                if i > 0 {
                    s += self.sub[i].abs();
                }
                if i + 1 < n {
                    s += self.sup[i].abs();
                }
                s
            })
            .fold(0.0, f64::max)
    }
}

/// Thomas algorithm, no pivoting. Every system assembled in this crate is
/// diagonally dominant or SPD.
pub fn solve_tridiagonal(sys: &TridiagonalSystem) -> Result<Vec<f64>> {
    let n = sys.len();
    if sys.sub.len() != n || sys.sup.len() != n || sys.rhs.len() != n {
        return Err(Error::Domain(
            "tridiagonal coefficient arrays differ in length".to_string(),
        ));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut pivot = sys.diag[0];
    if pivot == 0.0 || !pivot.is_finite() {
        return Err(Error::NumericalBreakdown { row: 0 });
    }
    c[0] = sys.sup[0] / pivot;
    d[0] = sys.rhs[0] / pivot;
    for i in 1..n {
        pivot = sys.diag[i] - sys.sub[i] * c[i - 1];
        if pivot == 0.0 || !pivot.is_finite() {
            return Err(Error::NumericalBreakdown { row: i });
        }
        c[i] = if i + 1 < n { sys.sup[i] / pivot } else { 0.0 };
        d[i] = (sys.rhs[i] - sys.sub[i] * d[i - 1]) / pivot;
    }
    for i in (0..n - 1).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn grid(n: usize) -> MassGrid {
        MassGrid::new(1.0, n).unwrap()
    }

    #[test]
    fn node_to_center_affine_and_constant() {
        let g = grid(8);
        let v: Vec<f64> = g.node_coords().iter().map(|y| 3.0 * y + 1.0).collect();
        for d in ddy_node_to_center(&v, &g) {
            assert!((d - 3.0).abs() < 1e-12);
        }
        assert!(ddy_node_to_center(&[2.0; 9], &g).iter().all(|&d| d == 0.0));
    }

    #[test]
    fn node_to_center_second_order() {
        let err = |n: usize| {
            let g = grid(n);
            let v: Vec<f64> = g.node_coords().iter().map(|y| (PI * y).sin()).collect();
            ddy_node_to_center(&v, &g)
                .iter()
                .zip(g.center_coords())
                .map(|(d, y)| (d - PI * (PI * y).cos()).abs())
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (err(128), err(256));
        // truncation term pi^3 dy^2 / 24
        assert!(e2 < PI.powi(3) / 24.0 / 256.0f64.powi(2) * 1.01);
        assert!((e1 / e2 - 4.0).abs() < 0.05);
    }

    #[test]
    fn center_to_node_constant_and_affine() {
        let g = grid(8);
        for bc in [NodeBoundary::NeumannZero, NodeBoundary::OneSided] {
            assert!(ddy_center_to_node(&[5.0; 8], &g, bc).iter().all(|&d| d.abs() < 1e-12));
        }
        let w: Vec<f64> = g.center_coords().iter().map(|y| 2.0 * y).collect();
        let d = ddy_center_to_node(&w, &g, NodeBoundary::NeumannZero);
        assert_eq!((d[0], d[8]), (0.0, 0.0));
        assert!(d[1..8].iter().all(|x| (x - 2.0).abs() < 1e-12));
        let d = ddy_center_to_node(&w, &g, NodeBoundary::OneSided);
        assert!(d.iter().all(|x| (x - 2.0).abs() < 1e-12));
        // two cells: first-order fallback still exact on affine data
        let g2 = grid(2);
        let w2: Vec<f64> = g2.center_coords().iter().map(|y| 2.0 * y).collect();
        let d2 = ddy_center_to_node(&w2, &g2, NodeBoundary::OneSided);
        assert!(d2.iter().all(|x| (x - 2.0).abs() < 1e-12));
    }

    #[test]
    fn center_to_node_second_order() {
        let err = |n: usize, bc| {
            let g = grid(n);
            let w: Vec<f64> = g.center_coords().iter().map(|y| (PI * y).cos()).collect();
            let d = ddy_center_to_node(&w, &g, bc);
            let range = if bc == NodeBoundary::OneSided { 0..=n } else { 1..=n - 1 };
            range
                .map(|i| (d[i] + PI * (PI * g.node(i)).sin()).abs())
                .fold(0.0, f64::max)
        };
        for bc in [NodeBoundary::NeumannZero, NodeBoundary::OneSided] {
            let (e1, e2) = (err(256, bc), err(512, bc));
            assert!(e1 < 1e-3, "{bc:?}: {e1}");
            let order = (e1 / e2).log2();
            assert!(order > 1.9, "{bc:?} order {order}");
        }
    }

    #[test]
    fn thomas_examples() {
        let mut sys = TridiagonalSystem::zeros(4);
        sys.diag = vec![1.0; 4];
        sys.rhs = vec![1.0, -2.0, 3.5, 0.25];
        assert_eq!(solve_tridiagonal(&sys).unwrap(), sys.rhs);

        // [2 -1 0; -1 2 -1; 0 -1 2] x = (1,0,1): elimination gives x = (1,1,1)
        let sys = TridiagonalSystem {
            sub: vec![0.0, -1.0, -1.0],
            diag: vec![2.0; 3],
            sup: vec![-1.0, -1.0, 0.0],
            rhs: vec![1.0, 0.0, 1.0],
        };
        let x = solve_tridiagonal(&sys).unwrap();
        for xi in x {
            assert!((xi - 1.0).abs() < 1e-15);
        }

        let mut bad = TridiagonalSystem::zeros(3);
        bad.diag = vec![1.0, 0.0, 1.0];
        assert_eq!(
            solve_tridiagonal(&bad),
            Err(Error::NumericalBreakdown { row: 1 })
        );
    }

    fn spd_system() -> impl Strategy<Value = (TridiagonalSystem, Vec<f64>)> {
        (3usize..40).prop_flat_map(|n| {
            (
                prop::collection::vec(0.01f64..5.0, n),
                prop::collection::vec(0.01f64..3.0, n),
                prop::collection::vec(-10.0f64..10.0, n),
            )
                .prop_map(move |(mass, w, rhs)| {
                    // diag(mass) + weighted Laplacian
                    let mut sys = TridiagonalSystem::zeros(n);
                    for i in 0..n {
                        sys.diag[i] = mass[i] + w[i] + if i > 0 { w[i - 1] } else { 0.0 };
                        if i + 1 < n {
                            sys.sup[i] = -w[i];
                        }
                        if i > 0 {
                            sys.sub[i] = -w[i - 1];
                        }
                    }
                    sys.rhs = rhs.clone();
                    (sys, rhs)
                })
        })
    }

    proptest! {
        #[test]
        fn thomas_residual_bound((sys, rhs) in spd_system()) {
            let x = solve_tridiagonal(&sys).unwrap();
            let ax = sys.apply(&x);
            let res = ax.iter().zip(&rhs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let xinf = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let rinf = rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            prop_assert!(res <= 1e-12 * (sys.matrix_inf_norm() * xinf + rinf));
        }

        #[test]
        fn summation_by_parts(
            interior in prop::collection::vec(-5.0f64..5.0, 2..60),
            wseed in prop::collection::vec(-5.0f64..5.0, 61),
        ) {
            let n = interior.len() + 1;
            let g = MassGrid::new(1.3, n).unwrap();
            let mut v = vec![0.0];
            v.extend(&interior);
            v.push(0.0);
            let w = &wseed[..n];
            let dy = g.dy();
            let lhs: f64 = ddy_node_to_center(&v, &g).iter().zip(w).map(|(a, b)| a * b * dy).sum();
            for bc in [NodeBoundary::NeumannZero, NodeBoundary::OneSided] {
                let rhs: f64 = ddy_center_to_node(w, &g, bc)
                    .iter()
                    .zip(&v)
                    .map(|(a, b)| a * b * dy)
                    .sum();
                prop_assert!((lhs + rhs).abs() < 1e-11 * (1.0 + lhs.abs()));
            }
        }
    }
}
