//! Grids, field containers, initial data and the discrete norms shared by
//! every other module.
//!
//! Layout is staggered: velocity lives on the `N + 1` nodes `y_i = i dy`,
//! the scalars `J`, `pi` and `rho0` live on the `N` cell centers
//! `y_{i+1/2}`. Center `j` sits between nodes `j` and `j + 1`.

use crate::error::{Error, Result};

/// Uniform mass-coordinate grid on `(0, L)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassGrid {
    length: f64,
    cells: usize,
    dy: f64,
}

impl MassGrid {
    pub fn new(length: f64, cells: usize) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::Config(format!(
                "domain length must be positive and finite, got {length}"
            )));
        }
        if cells < 2 {
            return Err(Error::Config(format!(
                "cell count must be at least 2, got {cells}"
            )));
        }
        Ok(Self {
            length,
            cells,
            dy: length / cells as f64,
        })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn nodes(&self) -> usize {
        self.cells + 1
    }

    pub fn dy(&self) -> f64 {
        self.dy
    }

    pub fn node(&self, i: usize) -> f64 {
        if i == self.cells {
            self.length
        } else {
            i as f64 * self.dy
        }
    }

    pub fn center(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.dy
    }

    pub fn node_coords(&self) -> Vec<f64> {
        (0..self.nodes()).map(|i| self.node(i)).collect()
    }

    pub fn center_coords(&self) -> Vec<f64> {
        (0..self.cells).map(|j| self.center(j)).collect()
    }
}

/// Viscosity and adiabatic exponent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysParams {
    pub mu: f64,
    pub gamma: f64,
}

impl PhysParams {
    pub fn new(mu: f64, gamma: f64) -> Result<Self> {
        if !(mu.is_finite() && mu > 0.0) {
            return Err(Error::Config(format!("mu must be positive, got {mu}")));
        }
        if !(gamma.is_finite() && gamma > 1.0) {
            return Err(Error::Config(format!("gamma must exceed 1, got {gamma}")));
        }
        Ok(Self { mu, gamma })
    }
}

/// Discretized initial data. Vacuum (`rho0 = 0`) is allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialData {
    pub grid: MassGrid,
    pub params: PhysParams,
    pub rho0: Vec<f64>,
    pub v0: Vec<f64>,
    pub pi0: Vec<f64>,
    pub j0: Vec<f64>,
}

impl InitialData {
    /// Builds and validates initial data with `J0 = 1`.
    pub fn new(
        grid: MassGrid,
        params: PhysParams,
        rho0: Vec<f64>,
        v0: Vec<f64>,
        pi0: Vec<f64>,
    ) -> Result<Self> {
        let j0 = vec![1.0; grid.cells()];
        Self::with_j0(grid, params, rho0, v0, pi0, j0)
    }

    pub fn with_j0(
        grid: MassGrid,
        params: PhysParams,
        rho0: Vec<f64>,
        v0: Vec<f64>,
        pi0: Vec<f64>,
        j0: Vec<f64>,
    ) -> Result<Self> {
        let n = grid.cells();
        check_len("rho0", &rho0, n)?;
        check_len("pi0", &pi0, n)?;
        check_len("J0", &j0, n)?;
        check_len("v0", &v0, n + 1)?;
        for (name, f) in [("rho0", &rho0), ("pi0", &pi0), ("v0", &v0), ("J0", &j0)] {
            if f.iter().any(|x| !x.is_finite()) {
                return Err(Error::Config(format!("{name} contains non-finite values")));
            }
        }
        if let Some(j) = rho0.iter().position(|&r| r < 0.0) {
            return Err(Error::Config(format!("rho0 is negative in cell {j}")));
        }
        if let Some(j) = pi0.iter().position(|&p| p < 0.0) {
            return Err(Error::Config(format!("pi0 is negative in cell {j}")));
        }
        if let Some(j) = j0.iter().position(|&x| x <= 0.0) {
            return Err(Error::Config(format!("J0 must be positive, fails in cell {j}")));
        }
        if v0[0] != 0.0 || v0[n] != 0.0 {
            return Err(Error::Config(
                "v0 must vanish at both boundary nodes".to_string(),
            ));
        }
        Ok(Self {
            grid,
            params,
            rho0,
            v0,
            pi0,
            j0,
        })
    }

    /// The initial state at `t = 0`.
    pub fn initial_state(&self) -> State {
        State {
            t: 0.0,
            j: self.j0.clone(),
            v: self.v0.clone(),
            pi: self.pi0.clone(),
        }
    }

    /// Lower bound of `J0`, used as the floor in the J lower-bound certificate.
    pub fn j_floor(&self) -> f64 {
        self.j0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn rho_floor(&self) -> f64 {
        self.rho0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Node lumped density: mean of the adjacent center values.
    pub fn node_density(&self) -> Vec<f64> {
        node_average(&self.rho0)
    }

    /// Copy of the data with density clamped from below by `floor`.
    pub fn with_density_floor(&self, floor: f64) -> Self {
        Self {
            rho0: self.rho0.iter().map(|&r| r.max(floor)).collect(),
            ..self.clone()
        }
    }
}

fn check_len(name: &str, f: &[f64], expected: usize) -> Result<()> {
    if f.len() != expected {
        return Err(Error::Config(format!(
            "{name} has {} values, grid needs {expected}",
            f.len()
        )));
    }
    Ok(())
}

/// Mean of adjacent center values at each node; boundary nodes take half
/// the single neighbour (the half cell outside the domain carries nothing).
pub fn node_average(center: &[f64]) -> Vec<f64> {
    let n = center.len();
    let mut out = vec![0.0; n + 1];
    out[0] = 0.5 * center[0];
    out[n] = 0.5 * center[n - 1];
    for i in 1..n {
        out[i] = 0.5 * (center[i - 1] + center[i]);
    }
    out
}

/// `(J, v, pi)` at one time instant.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub t: f64,
    pub j: Vec<f64>,
    pub v: Vec<f64>,
    pub pi: Vec<f64>,
}

impl State {
    /// Checks `J > 0`, `pi >= 0` and pinned boundary velocity.
    pub fn check_invariants(&self) -> Result<()> {
        if let Some((cell, &value)) = self.j.iter().enumerate().find(|(_, &x)| !(x > 0.0)) {
            return Err(Error::JCollapse {
                cell,
                t: self.t,
                value,
            });
        }
        if let Some(j) = self.pi.iter().position(|&p| !(p >= 0.0)) {
            return Err(Error::Domain(format!(
                "pi is negative or NaN in cell {j} at t = {}",
                self.t
            )));
        }
        let n = self.v.len() - 1;
        if self.v[0] != 0.0 || self.v[n] != 0.0 {
            return Err(Error::Domain(format!(
                "boundary velocity not pinned at t = {}",
                self.t
            )));
        }
        Ok(())
    }

    pub fn min_j(&self) -> f64 {
        self.j.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn min_pi(&self) -> f64 {
        self.pi.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn is_finite(&self) -> bool {
        self.j
            .iter()
            .chain(&self.v)
            .chain(&self.pi)
            .all(|x| x.is_finite())
    }
}

/// Length, mass and energy fixed by the initial data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Conserved {
    pub ell0: f64,
    pub m0: f64,
    pub e0: f64,
}

/// Midpoint quadrature of `l0 = int J0`, `m0 = int rho0` and the total energy.
pub fn conserved_quantities(init: &InitialData) -> Conserved {
    let dy = init.grid.dy();
    let ell0 = init.j0.iter().sum::<f64>() * dy;
    let m0 = init.rho0.iter().sum::<f64>() * dy;
    let e0 = total_energy(&init.rho0, &init.j0, &init.v0, &init.pi0, init.params, dy);
    Conserved { ell0, m0, e0 }
}

/// `sum (rho0 <v^2>/2 + J pi/(gamma - 1)) dy` where `<v^2>` is the mean of the
/// squares at the two nodes bounding each cell.
pub fn total_energy(
    rho0: &[f64],
    j: &[f64],
    v: &[f64],
    pi: &[f64],
    params: PhysParams,
    dy: f64,
) -> f64 {
    let gm1 = params.gamma - 1.0;
    let mut e = 0.0;
    for c in 0..rho0.len() {
        let v2 = 0.5 * (v[c] * v[c] + v[c + 1] * v[c + 1]);
        e += 0.5 * rho0[c] * v2 + j[c] * pi[c] / gm1;
    }
    e * dy
}

pub fn state_energy(state: &State, init: &InitialData) -> f64 {
    total_energy(
        &init.rho0,
        &state.j,
        &state.v,
        &state.pi,
        init.params,
        init.grid.dy(),
    )
}

/// Discrete `L^2` and `L^inf` norms of a node or center field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    pub l2: f64,
    pub linf: f64,
}

pub fn discrete_norms(f: &[f64], grid: &MassGrid) -> Norms {
    Norms {
        l2: l2_norm(f, grid.dy()),
        linf: linf_norm(f),
    }
}

pub fn l2_norm(f: &[f64], dy: f64) -> f64 {
    (f.iter().map(|x| x * x).sum::<f64>() * dy).sqrt()
}

pub fn linf_norm(f: &[f64]) -> f64 {
    f.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Density recovered from `J rho = rho0`.
pub fn implied_density(state: &State, init: &InitialData) -> Result<Vec<f64>> {
    state
        .j
        .iter()
        .zip(&init.rho0)
        .enumerate()
        .map(|(cell, (&j, &r))| {
            if j > 0.0 {
                Ok(r / j)
            } else {
                Err(Error::JCollapse {
                    cell,
                    t: state.t,
                    value: j,
                })
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> PhysParams {
        PhysParams::new(1.0, 1.4).unwrap()
    }

    #[test]
    fn grid_layout() {
        let g = MassGrid::new(1.0, 4).unwrap();
        assert_eq!(g.dy(), 0.25);
        assert_eq!(g.node_coords(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let g = MassGrid::new(2.0, 2).unwrap();
        assert_eq!(g.center_coords(), vec![0.5, 1.5]);
    }

    #[test]
    fn grid_rejects_bad_input() {
        assert!(matches!(MassGrid::new(0.0, 4), Err(Error::Config(_))));
        assert!(matches!(MassGrid::new(-1.0, 4), Err(Error::Config(_))));
        assert!(matches!(MassGrid::new(1.0, 1), Err(Error::Config(_))));
        assert!(matches!(MassGrid::new(f64::NAN, 4), Err(Error::Config(_))));
    }

    #[test]
    fn params_validation() {
        assert!(PhysParams::new(0.0, 1.4).is_err());
        assert!(PhysParams::new(1.0, 1.0).is_err());
        assert!(PhysParams::new(1.0, 1.4).is_ok());
    }

    #[test]
    fn conserved_constants() {
        let g = MassGrid::new(1.0, 8).unwrap();
        let init = InitialData::new(g, params(), vec![1.0; 8], vec![0.0; 9], vec![0.0; 8]).unwrap();
        let c = conserved_quantities(&init);
        assert_eq!((c.ell0, c.m0, c.e0), (1.0, 1.0, 0.0));

        let init =
            InitialData::new(g, params(), vec![0.0; 8], vec![0.0; 9], vec![0.4; 8]).unwrap();
        let c = conserved_quantities(&init);
        assert_eq!(c.ell0, 1.0);
        assert_eq!(c.m0, 0.0);
        assert!((c.e0 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn conserved_ramp_density() {
        // int_0^1 y dy = 1/2; midpoint is exact for linear integrands
        let g = MassGrid::new(1.0, 16).unwrap();
        let rho0 = g.center_coords();
        let init = InitialData::with_j0(
            g,
            params(),
            rho0,
            vec![0.0; 17],
            vec![0.0; 16],
            vec![2.0; 16],
        )
        .unwrap();
        let c = conserved_quantities(&init);
        assert!((c.ell0 - 2.0).abs() < 1e-14);
        assert!((c.m0 - 0.5).abs() < 1e-14);
        assert_eq!(c.e0, 0.0);
    }

    #[test]
    fn initial_data_validation() {
        let g = MassGrid::new(1.0, 4).unwrap();
        let p = params();
        let ok = |rho: Vec<f64>, v: Vec<f64>, pi: Vec<f64>| InitialData::new(g, p, rho, v, pi);
        assert!(ok(vec![-1.0; 4], vec![0.0; 5], vec![0.0; 4]).is_err());
        assert!(ok(vec![1.0; 4], vec![0.0; 5], vec![-0.1; 4]).is_err());
        assert!(ok(vec![1.0; 4], vec![0.1, 0.0, 0.0, 0.0, 0.0], vec![0.0; 4]).is_err());
        assert!(ok(vec![1.0; 3], vec![0.0; 5], vec![0.0; 4]).is_err());
        assert!(InitialData::with_j0(g, p, vec![1.0; 4], vec![0.0; 5], vec![0.0; 4], vec![0.0; 4])
            .is_err());
    }

    #[test]
    fn norms() {
        let g = MassGrid::new(1.0, 10).unwrap();
        let n = discrete_norms(&[1.0; 10], &g);
        assert!((n.l2 - 1.0).abs() < 1e-14 && n.linf == 1.0);
        let n = discrete_norms(&[0.0; 10], &g);
        assert_eq!((n.l2, n.linf), (0.0, 0.0));

        // int_0^1 sin^2(pi y) dy = 1/2
        let g = MassGrid::new(1.0, 512).unwrap();
        let f: Vec<f64> = g
            .center_coords()
            .iter()
            .map(|y| (std::f64::consts::PI * y).sin())
            .collect();
        assert!((discrete_norms(&f, &g).l2 - 0.5f64.sqrt()).abs() < 1e-4);
    }

    #[test]
    fn density_from_jacobian() {
        let g = MassGrid::new(1.0, 3).unwrap();
        let init = InitialData::new(
            g,
            params(),
            vec![1.0, 0.0, 3.0],
            vec![0.0; 4],
            vec![0.0; 3],
        )
        .unwrap();
        let mut s = init.initial_state();
        assert_eq!(implied_density(&s, &init).unwrap(), init.rho0);
        s.j = vec![2.0; 3];
        let rho = implied_density(&s, &init).unwrap();
        assert_eq!(rho, vec![0.5, 0.0, 1.5]);
        for c in 0..3 {
            assert_eq!(rho[c] * s.j[c], init.rho0[c]);
        }
        s.j[1] = 0.0;
        assert!(matches!(
            implied_density(&s, &init),
            Err(Error::JCollapse { cell: 1, .. })
        ));
    }

    #[test]
    fn refinement_invariance_piecewise_constant() {
        // piecewise-constant data aligned with cells: midpoint quadrature is exact
        let p = params();
        let build = |n: usize| {
            let g = MassGrid::new(1.0, n).unwrap();
            let rho: Vec<f64> = g
                .center_coords()
                .iter()
                .map(|&y| if y < 0.5 { 2.0 } else { 0.5 })
                .collect();
            let pi: Vec<f64> = g
                .center_coords()
                .iter()
                .map(|&y| if y < 0.25 { 1.0 } else { 3.0 })
                .collect();
            conserved_quantities(&InitialData::new(g, p, rho, vec![0.0; n + 1], pi).unwrap())
        };
        let a = build(8);
        for n in [16, 64, 256] {
            let b = build(n);
            assert!((a.ell0 - b.ell0).abs() < 1e-13);
            assert!((a.m0 - b.m0).abs() < 1e-13);
            assert!((a.e0 - b.e0).abs() < 1e-12);
        }
    }
}
