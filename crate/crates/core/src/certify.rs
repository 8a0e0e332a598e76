//! Evaluation of the conservation laws and a priori bounds on trajectories.
//!
//! Quantities whose bounding constants are not computable (the effective
//! flux budget, the sup bounds on `pi` and `J`) are monitored, not judged.
//! Verdicts are issued only for the explicit laws: length conservation,
//! the `J` lower bound, the `B` band and pressure positivity.

use crate::error::{Error, Result};
use crate::integrator::Trajectory;
use crate::model::{
    conserved_quantities, l2_norm, linf_norm, node_average, state_energy, Conserved, InitialData,
    MassGrid, PhysParams, State,
};
use crate::operators::{ddy_center_to_node, ddy_node_to_center, NodeBoundary};

/// Relative tolerance on `|sum J dy - l0|`.
pub const MASS_TOLERANCE: f64 = 1e-10;
/// Absolute slack on the `J` lower-bound verdict.
pub const J_FLOOR_SLACK: f64 = 1e-9;
/// The `B` band is widened by this multiple of `dy^2`.
pub const B_BAND_WIDENING: f64 = 10.0;

/// Effective viscous flux `G = mu v_y / J - pi` at centers.
pub fn compute_g(state: &State, params: PhysParams, grid: &MassGrid) -> Vec<f64> {
    ddy_node_to_center(&state.v, grid)
        .iter()
        .zip(&state.j)
        .zip(&state.pi)
        .map(|((d, j), p)| params.mu * d / j - p)
        .collect()
}

/// `J_floor exp{-(4/mu) sqrt(2 m0 E0) - ((gamma-1) E0 / (mu l0)) e^{(4/mu) sqrt(2 m0 E0)} t}`.
pub fn j_lower_bound(t: f64, c: &Conserved, params: PhysParams, j_floor: f64) -> f64 {
    let mu = params.mu;
    let s = 4.0 / mu * (2.0 * c.m0 * c.e0).sqrt();
    let rate = (params.gamma - 1.0) * c.e0 / (mu * c.ell0) * s.exp();
    j_floor * (-s - rate * t).exp()
}

/// `(e^{-(2/mu) sqrt(2 m0 E0)}, e^{(2/mu) sqrt(2 m0 E0)})`.
pub fn b_band(c: &Conserved, params: PhysParams) -> (f64, f64) {
    let s = 2.0 / params.mu * (2.0 * c.m0 * c.e0).sqrt();
    ((-s).exp(), s.exp())
}

/// `int_0^{y_c} f` at each center for a center-sampled integrand: whole
/// cells to the left plus half of the current one.
fn cumulative_to_centers(f: &[f64], dy: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(f.len());
    let mut acc = 0.0;
    for &x in f {
        out.push(acc + 0.5 * dy * x);
        acc += dy * x;
    }
    out
}

/// `int_0^{y_c} rho0 (v - v0)` with node velocities averaged to centers.
fn momentum_shift(state: &State, init: &InitialData) -> Vec<f64> {
    let f: Vec<f64> = (0..init.grid.cells())
        .map(|c| {
            let dv = 0.5 * ((state.v[c] - init.v0[c]) + (state.v[c + 1] - init.v0[c + 1]));
            init.rho0[c] * dv
        })
        .collect();
    cumulative_to_centers(&f, init.grid.dy())
}

/// `B = exp((1/mu) int_0^y rho0 (v0 - v))` at centers.
pub fn b_field(state: &State, init: &InitialData) -> Vec<f64> {
    let mu = init.params.mu;
    momentum_shift(state, init)
        .iter()
        .map(|s| (-s / mu).exp())
        .collect()
}

/// `Phi = int_0^y rho0 (v - v0) - mu (log J - log J0) + int_0^t pi` at centers.
/// Spatially constant for exact solutions.
pub fn phi_field(state: &State, int_pi: &[f64], init: &InitialData) -> Result<Vec<f64>> {
    let mu = init.params.mu;
    let shift = momentum_shift(state, init);
    (0..init.grid.cells())
        .map(|c| {
            let j = state.j[c];
            if !(j > 0.0) {
                return Err(Error::JCollapse {
                    cell: c,
                    t: state.t,
                    value: j,
                });
            }
            Ok(shift[c] - mu * (j.ln() - init.j0[c].ln()) + int_pi[c])
        })
        .collect()
}

/// `max_y Phi - min_y Phi`.
pub fn phi_spread(state: &State, int_pi: &[f64], init: &InitialData) -> Result<f64> {
    let phi = phi_field(state, int_pi, init)?;
    let (lo, hi) = phi
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    Ok(hi - lo)
}

/// `phi_spread` at stored state `k` of a trajectory.
pub fn trajectory_phi_spread(traj: &Trajectory, k: usize, init: &InitialData) -> Result<f64> {
    phi_spread(&traj.states[k], &traj.int_pi[k], init)
}

/// Second-order derivative at `times[k]` from the three-point Lagrange
/// stencil through `k-1, k, k+1` (one-sided at the ends). Non-uniform
/// spacing is allowed.
fn three_point_derivative(times: &[f64], values: &[&[f64]], k: usize) -> Vec<f64> {
    let m = times.len();
    let (i0, i1, i2) = if k == 0 {
        (0, 1, 2)
    } else if k == m - 1 {
        (m - 3, m - 2, m - 1)
    } else {
        (k - 1, k, k + 1)
    };
    let (t0, t1, t2) = (times[i0], times[i1], times[i2]);
    let t = times[k];
    let w0 = ((t - t1) + (t - t2)) / ((t0 - t1) * (t0 - t2));
    let w1 = ((t - t0) + (t - t2)) / ((t1 - t0) * (t1 - t2));
    let w2 = ((t - t0) + (t - t1)) / ((t2 - t0) * (t2 - t1));
    (0..values[k].len())
        .map(|c| w0 * values[i0][c] + w1 * values[i1][c] + w2 * values[i2][c])
        .collect()
}

/// `|| pi_t + (1/mu)(pi - ((gamma-2)/2) G)^2 - (gamma^2/(4 mu)) G^2 ||_inf` per time
/// from sampled `pi` and `G` slices.
pub fn riccati_residual_series(
    times: &[f64],
    pi: &[Vec<f64>],
    g: &[Vec<f64>],
    params: PhysParams,
) -> Result<Vec<f64>> {
    if times.len() < 3 {
        return Err(Error::Usage(format!(
            "riccati residual needs at least 3 stored states, got {}",
            times.len()
        )));
    }
    let mu = params.mu;
    let gamma = params.gamma;
    let half = 0.5 * (gamma - 2.0);
    let source = gamma * gamma / (4.0 * mu);
    let slices: Vec<&[f64]> = pi.iter().map(|p| p.as_slice()).collect();
    Ok((0..times.len())
        .map(|k| {
            let pt = three_point_derivative(times, &slices, k);
            pt.iter()
                .zip(&pi[k])
                .zip(&g[k])
                .map(|((pt, p), g)| {
                    let q = p - half * g;
                    (pt + q * q / mu - source * g * g).abs()
                })
                .fold(0.0, f64::max)
        })
        .collect())
}

pub fn riccati_residual(traj: &Trajectory, init: &InitialData) -> Result<Vec<f64>> {
    let times = traj.times();
    let pi: Vec<Vec<f64>> = traj.states.iter().map(|s| s.pi.clone()).collect();
    let g: Vec<Vec<f64>> = traj
        .states
        .iter()
        .map(|s| compute_g(s, init.params, &init.grid))
        .collect();
    riccati_residual_series(&times, &pi, &g, init.params)
}

/// Monitored quantities of the effective-flux energy budget.
#[derive(Debug, Clone, PartialEq)]
pub struct GBudget {
    pub g0_l2_sq: f64,
    pub sup_g_l2_sq: f64,
    /// Stored time at which `||G||_2` is largest.
    pub sup_time: f64,
    pub int_g_linf4: f64,
    /// `int ||G_y / sqrt(rho0)||_2^2 dt` over nodes whose neighbouring cells are non-vacuum.
    pub int_gy_weighted: f64,
    /// Nodes left out of the weighted term.
    pub excluded_nodes: Vec<usize>,
    /// `int t ||v_yt||_2^2 dt` from differenced stored slices.
    pub t_weighted_vyt: f64,
    /// `(sup ||G||^2 + int(||G||_inf^4 + ||G_y/sqrt(rho0)||^2)) / ||G0||^2`; `None` when `G0 = 0`.
    pub ratio: Option<f64>,
}

/// Nodes whose adjacent cells all carry positive density.
fn weighted_nodes(init: &InitialData) -> (Vec<usize>, Vec<usize>) {
    let n = init.grid.cells();
    let mut keep = Vec::new();
    let mut skip = Vec::new();
    for i in 0..=n {
        let left = i == 0 || init.rho0[i - 1] > 0.0;
        let right = i == n || init.rho0[i] > 0.0;
        if left && right {
            keep.push(i);
        } else {
            skip.push(i);
        }
    }
    (keep, skip)
}

fn weighted_gy(g: &[f64], init: &InitialData, keep: &[usize], node_rho: &[f64]) -> f64 {
    let gy = ddy_center_to_node(g, &init.grid, NodeBoundary::NeumannZero);
    keep.iter()
        .map(|&i| gy[i] * gy[i] / node_rho[i])
        .sum::<f64>()
        * init.grid.dy()
}

/// Boundary nodes carry half-cell mass; interior nodes the mean of both sides.
fn node_weight_density(init: &InitialData) -> Vec<f64> {
    let mut m = node_average(&init.rho0);
    let n = init.grid.cells();
    m[0] = init.rho0[0];
    m[n] = init.rho0[n - 1];
    m
}

fn trapezoid(times: &[f64], values: &[f64]) -> f64 {
    times
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum()
}

pub fn g_energy_budget(traj: &Trajectory, init: &InitialData) -> GBudget {
    let grid = &init.grid;
    let dy = grid.dy();
    let (keep, skip) = weighted_nodes(init);
    let node_rho = node_weight_density(init);
    let times = traj.times();
    let mut l2sq = Vec::with_capacity(times.len());
    let mut linf4 = Vec::with_capacity(times.len());
    let mut wgy = Vec::with_capacity(times.len());
    for s in &traj.states {
        let g = compute_g(s, init.params, grid);
        let l2 = l2_norm(&g, dy);
        l2sq.push(l2 * l2);
        linf4.push(linf_norm(&g).powi(4));
        wgy.push(weighted_gy(&g, init, &keep, &node_rho));
    }
    let (k_sup, &sup) = l2sq
        .iter()
        .enumerate()
        .fold((0, &f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
    let int_g_linf4 = trapezoid(&times, &linf4);
    let int_gy_weighted = trapezoid(&times, &wgy);

    let mut t_weighted_vyt = 0.0;
    for w in traj.states.windows(2) {
        let h = w[1].t - w[0].t;
        if h <= 0.0 {
            continue;
        }
        let a = ddy_node_to_center(&w[0].v, grid);
        let b = ddy_node_to_center(&w[1].v, grid);
        let d: Vec<f64> = a.iter().zip(&b).map(|(x, y)| (y - x) / h).collect();
        let n2 = l2_norm(&d, dy).powi(2);
        t_weighted_vyt += 0.5 * (w[0].t + w[1].t) * n2 * h;
    }

    let g0_l2_sq = l2sq[0];
    let total = sup + int_g_linf4 + int_gy_weighted;
    GBudget {
        g0_l2_sq,
        sup_g_l2_sq: sup,
        sup_time: times[k_sup],
        int_g_linf4,
        int_gy_weighted,
        excluded_nodes: skip,
        t_weighted_vyt,
        ratio: (g0_l2_sq > 0.0).then(|| total / g0_l2_sq),
    }
}

/// One row of the per-run diagnostics table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticsRow {
    pub t: f64,
    pub mass_residual: f64,
    pub energy: f64,
    pub min_j: f64,
    pub j_lower: f64,
    pub g_l2: f64,
    pub g_linf: f64,
    pub phi_spread: f64,
    pub pi_max: f64,
}

pub fn diagnostics(traj: &Trajectory, init: &InitialData) -> Result<Vec<DiagnosticsRow>> {
    let c = conserved_quantities(init);
    let j_floor = init.j_floor();
    let dy = init.grid.dy();
    traj.states
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let g = compute_g(s, init.params, &init.grid);
            Ok(DiagnosticsRow {
                t: s.t,
                mass_residual: (s.j.iter().sum::<f64>() * dy - c.ell0).abs(),
                energy: state_energy(s, init),
                min_j: s.min_j(),
                j_lower: j_lower_bound(s.t, &c, init.params, j_floor),
                g_l2: l2_norm(&g, dy),
                g_linf: linf_norm(&g),
                phi_spread: trajectory_phi_spread(traj, k, init)?,
                pi_max: s.pi.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            })
        })
        .collect()
}

/// Per-stored-time certificate record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertRecord {
    pub t: f64,
    pub mass_residual: f64,
    pub energy: f64,
    pub energy_drift: f64,
    pub min_j: f64,
    pub j_lower: f64,
    pub b_min: f64,
    pub b_max: f64,
    pub g_l2: f64,
    pub g_linf: f64,
    /// `||G_y / sqrt(rho0)||_2^2` over non-vacuum nodes.
    pub gy_weighted: f64,
    /// Running `int_0^t ||G_y / sqrt(rho0)||_2^2`.
    pub gy_weighted_integral: f64,
    pub phi_spread: f64,
    /// `None` when fewer than three states are stored.
    pub riccati_residual: Option<f64>,
    pub pi_min: f64,
    pub pi_max: f64,
    pub j_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Verdicts {
    pub mass_exact: bool,
    pub j_above_floor: bool,
    pub b_in_band: bool,
    pub pi_nonnegative: bool,
}

impl Verdicts {
    pub fn all_pass(&self) -> bool {
        self.mass_exact && self.j_above_floor && self.b_in_band && self.pi_nonnegative
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertReport {
    pub conserved: Conserved,
    pub b_band: (f64, f64),
    pub records: Vec<CertRecord>,
    pub budget: GBudget,
    pub verdicts: Verdicts,
}

pub fn full_report(traj: &Trajectory, init: &InitialData) -> Result<CertReport> {
    let c = conserved_quantities(init);
    let params = init.params;
    let grid = &init.grid;
    let dy = grid.dy();
    let j_floor = init.j_floor();
    let band = b_band(&c, params);
    let widen = B_BAND_WIDENING * dy * dy;
    let riccati = riccati_residual(traj, init).ok();
    let budget = g_energy_budget(traj, init);
    let (keep, _) = weighted_nodes(init);
    let node_rho = node_weight_density(init);

    let mut records = Vec::with_capacity(traj.states.len());
    let mut gy_integral = 0.0;
    let mut prev: Option<(f64, f64)> = None;
    for (k, s) in traj.states.iter().enumerate() {
        let g = compute_g(s, params, grid);
        let b = b_field(s, init);
        let energy = state_energy(s, init);
        let gy = weighted_gy(&g, init, &keep, &node_rho);
        if let Some((t0, gy0)) = prev {
            gy_integral += 0.5 * (s.t - t0) * (gy0 + gy);
        }
        prev = Some((s.t, gy));
        records.push(CertRecord {
            t: s.t,
            mass_residual: (s.j.iter().sum::<f64>() * dy - c.ell0).abs(),
            energy,
            energy_drift: energy - c.e0,
            min_j: s.min_j(),
            j_lower: j_lower_bound(s.t, &c, params, j_floor),
            b_min: b.iter().copied().fold(f64::INFINITY, f64::min),
            b_max: b.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            g_l2: l2_norm(&g, dy),
            g_linf: linf_norm(&g),
            gy_weighted: gy,
            gy_weighted_integral: gy_integral,
            phi_spread: trajectory_phi_spread(traj, k, init)?,
            riccati_residual: riccati.as_ref().map(|r| r[k]),
            pi_min: s.min_pi(),
            pi_max: s.pi.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            j_max: s.j.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        });
    }

    let mass_exact = records
        .iter()
        .all(|r| r.mass_residual < MASS_TOLERANCE * c.ell0);
    let j_ok = |t: f64, min_j: f64| min_j >= j_lower_bound(t, &c, params, j_floor) - J_FLOOR_SLACK;
    let j_above_floor = records.iter().all(|r| j_ok(r.t, r.min_j))
        && traj.step_log.iter().all(|r| j_ok(r.t, r.min_j));
    let b_in_band = records
        .iter()
        .all(|r| r.b_min >= band.0 - widen && r.b_max <= band.1 + widen);
    let pi_nonnegative =
        records.iter().all(|r| r.pi_min >= 0.0) && traj.step_log.iter().all(|r| r.min_pi >= 0.0);

    Ok(CertReport {
        conserved: c,
        b_band: band,
        records,
        budget,
        verdicts: Verdicts {
            mass_exact,
            j_above_floor,
            b_in_band,
            pi_nonnegative,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrator::{run, StepConfig};
    use crate::model::PhysParams;
    use crate::presets;

    fn params() -> PhysParams {
        PhysParams::new(1.0, 1.4).unwrap()
    }

    #[test]
    fn g_definition_cases() {
        let g = MassGrid::new(1.0, 4).unwrap();
        let mut s = State {
            t: 0.0,
            j: vec![1.0; 4],
            v: vec![0.0; 5],
            pi: vec![0.0; 4],
        };
        assert!(compute_g(&s, params(), &g).iter().all(|&x| x == 0.0));
        s.pi = vec![2.5; 4];
        assert!(compute_g(&s, params(), &g).iter().all(|&x| x == -2.5));
        // v_y = 1 on J = 2 gives mu v_y / J = 0.5
        s.v = g.node_coords();
        s.j = vec![2.0; 4];
        s.pi = vec![0.5; 4];
        assert!(compute_g(&s, params(), &g).iter().all(|&x| x.abs() < 1e-15));
    }

    #[test]
    fn j_lower_bound_formula() {
        let p = params();
        let zero_e = Conserved { ell0: 1.0, m0: 3.0, e0: 0.0 };
        assert_eq!(j_lower_bound(5.0, &zero_e, p, 0.7), 0.7);

        let no_mass = Conserved { ell0: 2.0, m0: 0.0, e0: 1.5 };
        let expected = 0.7 * (-(0.4 * 1.5 * 3.0) / 2.0f64).exp();
        assert!((j_lower_bound(3.0, &no_mass, p, 0.7) - expected).abs() < 1e-15);

        // exp(-4 sqrt 2) = 0.0034934892766462016 (30-digit reference)
        let unit = Conserved { ell0: 1.0, m0: 1.0, e0: 1.0 };
        let b = j_lower_bound(0.0, &unit, p, 1.0);
        assert!((b - 0.003_493_489_276_646_201_6).abs() < 1e-15, "{b}");
    }

    #[test]
    fn j_lower_bound_is_nonincreasing() {
        let c = Conserved { ell0: 1.3, m0: 0.8, e0: 2.1 };
        let mut prev = f64::INFINITY;
        for k in 0..50 {
            let b = j_lower_bound(k as f64 * 0.1, &c, params(), 1.0);
            assert!(b <= prev);
            prev = b;
        }
    }

    #[test]
    fn b_field_cases() {
        let g = MassGrid::new(1.0, 16).unwrap();
        let init = presets::sine_velocity(g, params(), &presets::SineVelocity::default()).unwrap();
        let s = init.initial_state();
        assert!(b_field(&s, &init).iter().all(|&b| b == 1.0));

        let n = 16;
        let vac = InitialData::new(g, params(), vec![0.0; n], init.v0.clone(), vec![1.0; n]).unwrap();
        let mut s = vac.initial_state();
        s.v = vec![0.0; n + 1];
        assert!(b_field(&s, &vac).iter().all(|&b| b == 1.0));
    }

    #[test]
    fn phi_cases() {
        let g = MassGrid::new(1.0, 16).unwrap();
        let init = presets::stationary(g, params(), 1.0, 0.8).unwrap();
        let s0 = init.initial_state();
        assert_eq!(phi_spread(&s0, &[0.0; 16], &init).unwrap(), 0.0);
        let mut s = s0.clone();
        s.t = 2.0;
        let phi = phi_field(&s, &[1.6; 16], &init).unwrap();
        assert!(phi.iter().all(|&x| x == 1.6));
        s.j[3] = 0.0;
        assert!(phi_spread(&s, &[1.6; 16], &init).is_err());
    }

    #[test]
    fn riccati_needs_three_states() {
        let r = riccati_residual_series(&[0.0, 1.0], &[vec![1.0], vec![1.0]], &[vec![0.0], vec![0.0]], params());
        assert!(matches!(r, Err(Error::Usage(_))));
    }

    #[test]
    fn riccati_zero_fields() {
        let t: Vec<f64> = (0..5).map(|k| k as f64 * 0.1).collect();
        let z = vec![vec![0.0; 3]; 5];
        let r = riccati_residual_series(&t, &z, &z, params()).unwrap();
        assert!(r.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn zero_flux_data_has_zero_budget() {
        let g = MassGrid::new(1.0, 16).unwrap();
        let init = presets::stationary(g, params(), 1.0, 0.0).unwrap();
        let traj = run(&init, &StepConfig::new(0.01, 0.05)).unwrap();
        let b = g_energy_budget(&traj, &init);
        assert_eq!(b.g0_l2_sq, 0.0);
        assert_eq!(b.sup_g_l2_sq, 0.0);
        assert_eq!(b.int_g_linf4, 0.0);
        assert_eq!(b.int_gy_weighted, 0.0);
        assert_eq!(b.ratio, None);
    }

    #[test]
    fn stationary_report_passes() {
        let g = MassGrid::new(1.0, 32).unwrap();
        let init = presets::stationary(g, params(), 1.0, 1.0).unwrap();
        let traj = run(&init, &StepConfig::new(0.05, 1.0)).unwrap();
        let rep = full_report(&traj, &init).unwrap();
        assert!(rep.verdicts.all_pass());
        assert!(rep.records.iter().all(|r| r.energy_drift == 0.0));
        assert!(rep.records.iter().all(|r| r.phi_spread.abs() < 1e-12));
    }

    #[test]
    fn negative_pressure_fails_verdict() {
        let g = MassGrid::new(1.0, 32).unwrap();
        let init = presets::stationary(g, params(), 1.0, 1.0).unwrap();
        let mut traj = run(&init, &StepConfig::new(0.05, 0.3)).unwrap();
        traj.states[2].pi[7] = -1e-3;
        let rep = full_report(&traj, &init).unwrap();
        assert!(!rep.verdicts.pi_nonnegative);
        assert!(rep.verdicts.mass_exact);
        assert!(!rep.verdicts.all_pass());
    }

    #[test]
    fn vacuum_nodes_excluded_from_weighted_term() {
        let g = MassGrid::new(1.0, 30).unwrap();
        let init = presets::vacuum_bubble(g, params(), &presets::VacuumBubble::default()).unwrap();
        let traj = run(&init, &StepConfig::new(1e-3, 0.01)).unwrap();
        let b = g_energy_budget(&traj, &init);
        // cells 10..20 are vacuum: nodes 10..=20 touch them
        assert_eq!(b.excluded_nodes, (10..=20).collect::<Vec<_>>());
        assert!(b.int_gy_weighted.is_finite());
    }
}
