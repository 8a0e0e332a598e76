//! Semi-implicit time stepping of the Lagrangian system
//!
//! ```text
//! J_t = v_y,   rho0 v_t - mu (v_y / J)_y + pi_y = 0,
//! pi_t + gamma (v_y / J) pi = mu (gamma - 1) (v_y / J)^2
//! ```
//!
//! with `v = 0` at both ends. One step is a Lie splitting: implicit momentum
//! with `J` frozen, explicit `J` update, then the exact solution of the
//! frozen-rate pressure ODE. The momentum matrix is `diag(rho0 dy)` plus a
//! weighted Laplacian, so it stays SPD in vacuum cells and no density floor
//! is needed.

use crate::error::{Error, Result};
use crate::model::{l2_norm, node_average, InitialData, MassGrid, State};
use crate::operators::{ddy_node_to_center, solve_tridiagonal, TridiagonalSystem};

/// Below this `|gamma a dt|` the pressure source uses its small-rate limit.
pub const PRESSURE_SERIES_THRESHOLD: f64 = 1e-8;

/// Floor on `|v_y / J| dy` in the accuracy limiter.
const RATE_EPS: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepConfig {
    pub dt: f64,
    pub t_end: f64,
    /// Accuracy limiter: `dt <= dt_safety dy / max(|v_y / J| dy, eps)`.
    pub dt_safety: f64,
    pub nan_check: bool,
    /// Store every `snapshot_stride`-th state (the final state is always stored).
    pub snapshot_stride: usize,
}

impl StepConfig {
    pub fn new(dt: f64, t_end: f64) -> Self {
        Self {
            dt,
            t_end,
            dt_safety: 0.5,
            nan_check: true,
            snapshot_stride: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return Err(Error::Config(format!(
                "t_end must be non-negative, got {}",
                self.t_end
            )));
        }
        if !(self.dt_safety > 0.0 && self.dt_safety <= 1.0) {
            return Err(Error::Config(format!(
                "dt_safety must lie in (0, 1], got {}",
                self.dt_safety
            )));
        }
        if self.snapshot_stride == 0 {
            return Err(Error::Config("snapshot_stride must be at least 1".into()));
        }
        Ok(())
    }

    /// Step size allowed by the base step and the accuracy limiter.
    pub fn admissible_dt(&self, state: &State, grid: &MassGrid) -> f64 {
        let dy = grid.dy();
        let rate = ddy_node_to_center(&state.v, grid)
            .iter()
            .zip(&state.j)
            .map(|(d, j)| (d / j).abs())
            .fold(0.0, f64::max);
        let limit = self.dt_safety * dy / (rate * dy).max(RATE_EPS);
        self.dt.min(limit)
    }
}

/// Exact solution over `dt` of `pi' = -gamma a pi + mu (gamma - 1) a^2` with `a` frozen.
pub fn pressure_update(pi: f64, rate: f64, dt: f64, mu: f64, gamma: f64) -> f64 {
    let x = gamma * rate * dt;
    let source = mu * (gamma - 1.0) * rate * rate * dt;
    if x.abs() < PRESSURE_SERIES_THRESHOLD {
        (-x).exp() * pi + source
    } else {
        // (1 - e^{-x}) / x, expm1 keeps the small-x end accurate
        (-x).exp() * pi + source * (-(-x).exp_m1() / x)
    }
}

/// Assembles the implicit momentum system for `v^{n+1}` on all `N + 1` nodes.
fn momentum_system(state: &State, node_rho: &[f64], init: &InitialData, dt: f64) -> TridiagonalSystem {
    let grid = &init.grid;
    let n = grid.cells();
    let dy = grid.dy();
    let mu = init.params.mu;
    let mut sys = TridiagonalSystem::zeros(n + 1);
    let k = mu * dt / dy;
    for i in 1..n {
        let wl = k / state.j[i - 1];
        let wr = k / state.j[i];
        let m = node_rho[i] * dy;
        sys.sub[i] = -wl;
        sys.sup[i] = -wr;
        sys.diag[i] = m + wl + wr;
        sys.rhs[i] = m * state.v[i] - dt * (state.pi[i] - state.pi[i - 1]);
    }
    sys.dirichlet_row(0, 0.0);
    sys.dirichlet_row(n, 0.0);
    sys
}

/// One splitting step of size `dt` from `state`.
pub fn advance(state: &State, init: &InitialData, dt: f64, nan_check: bool) -> Result<State> {
    let grid = &init.grid;
    let params = init.params;
    let node_rho = node_average(&init.rho0);

    let sys = momentum_system(state, &node_rho, init, dt);
    let mut v = solve_tridiagonal(&sys)?;
    let last = v.len() - 1;
    v[0] = 0.0;
    v[last] = 0.0;

    let t = state.t + dt;
    let dv = ddy_node_to_center(&v, grid);
    let mut j = Vec::with_capacity(dv.len());
    for (cell, (&j_old, &d)) in state.j.iter().zip(&dv).enumerate() {
        let j_new = j_old + dt * d;
        if !(j_new > 0.0) {
            if j_new.is_nan() {
                return Err(Error::NonFinite { field: "J", t });
            }
            return Err(Error::JCollapse {
                cell,
                t,
                value: j_new,
            });
        }
        j.push(j_new);
    }

    let pi: Vec<f64> = (0..dv.len())
        .map(|c| {
            let j_half = 0.5 * (state.j[c] + j[c]);
            pressure_update(state.pi[c], dv[c] / j_half, dt, params.mu, params.gamma)
        })
        .collect();

    let next = State { t, j, v, pi };
    if nan_check {
        for (name, f) in [("v", &next.v), ("J", &next.j), ("pi", &next.pi)] {
            if f.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite { field: name, t });
            }
        }
    }
    Ok(next)
}

/// One step using the admissible step size from `cfg`, clipped at `t_end`.
pub fn step(state: &State, init: &InitialData, cfg: &StepConfig) -> Result<State> {
    let dt = next_dt(state, init, cfg);
    let mut next = advance(state, init, dt, cfg.nan_check)?;
    if cfg.t_end - state.t <= dt {
        next.t = cfg.t_end;
    }
    Ok(next)
}

fn next_dt(state: &State, init: &InitialData, cfg: &StepConfig) -> f64 {
    let remaining = cfg.t_end - state.t;
    let dt = cfg.admissible_dt(state, &init.grid).min(remaining);
    // absorb a sliver left over by floating-point time accumulation
    if remaining - dt < 1e-9 * dt {
        remaining
    } else {
        dt
    }
}

/// Per-step extremes, recorded for every accepted step including `t = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    pub min_j: f64,
    pub min_pi: f64,
}

/// Stored states with the time-integral accumulators at each stored time.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<State>,
    /// `int_0^t pi` per center, one snapshot per stored state.
    pub int_pi: Vec<Vec<f64>>,
    /// `int_0^t v_y / J` per center, one snapshot per stored state.
    pub int_vy: Vec<Vec<f64>>,
    pub dt_history: Vec<f64>,
    pub step_log: Vec<StepRecord>,
}

impl Trajectory {
    pub fn new(initial: State) -> Self {
        let n = initial.j.len();
        let record = StepRecord {
            t: initial.t,
            min_j: initial.min_j(),
            min_pi: initial.min_pi(),
        };
        Self {
            states: vec![initial],
            int_pi: vec![vec![0.0; n]],
            int_vy: vec![vec![0.0; n]],
            dt_history: Vec::new(),
            step_log: vec![record],
        }
    }

    pub fn last(&self) -> &State {
        self.states.last().expect("trajectory is never empty")
    }

    pub fn times(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.t).collect()
    }

    /// Linear interpolation in time between stored states.
    pub fn sample_at(&self, t: f64) -> State {
        let s = &self.states;
        if t <= s[0].t {
            return s[0].clone();
        }
        if t >= s[s.len() - 1].t {
            return s[s.len() - 1].clone();
        }
        let k = s.partition_point(|st| st.t <= t) - 1;
        let (a, b) = (&s[k], &s[k + 1]);
        if t == a.t {
            return a.clone();
        }
        let w = (t - a.t) / (b.t - a.t);
        let lerp = |x: &[f64], y: &[f64]| -> Vec<f64> {
            x.iter().zip(y).map(|(p, q)| p + w * (q - p)).collect()
        };
        State {
            t,
            j: lerp(&a.j, &b.j),
            v: lerp(&a.v, &b.v),
            pi: lerp(&a.pi, &b.pi),
        }
    }
}

fn rate(state: &State, grid: &MassGrid) -> Vec<f64> {
    ddy_node_to_center(&state.v, grid)
        .iter()
        .zip(&state.j)
        .map(|(d, j)| d / j)
        .collect()
}

/// Integrates from the initial data to `cfg.t_end`.
pub fn run(init: &InitialData, cfg: &StepConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let grid = &init.grid;
    let mut state = init.initial_state();
    state.check_invariants()?;
    let mut traj = Trajectory::new(state.clone());
    let mut acc_pi = vec![0.0; grid.cells()];
    let mut acc_vy = vec![0.0; grid.cells()];
    let mut rate_old = rate(&state, grid);
    let mut steps = 0usize;

    while state.t < cfg.t_end {
        let dt = next_dt(&state, init, cfg);
        let mut next = advance(&state, init, dt, cfg.nan_check)?;
        if dt == cfg.t_end - state.t {
            next.t = cfg.t_end;
        }
        let rate_new = rate(&next, grid);
        for c in 0..acc_pi.len() {
            acc_pi[c] += 0.5 * dt * (state.pi[c] + next.pi[c]);
            acc_vy[c] += 0.5 * dt * (rate_old[c] + rate_new[c]);
        }
        steps += 1;
        traj.dt_history.push(dt);
        traj.step_log.push(StepRecord {
            t: next.t,
            min_j: next.min_j(),
            min_pi: next.min_pi(),
        });
        let done = next.t >= cfg.t_end;
        if steps % cfg.snapshot_stride == 0 || done {
            traj.states.push(next.clone());
            traj.int_pi.push(acc_pi.clone());
            traj.int_vy.push(acc_vy.clone());
        }
        state = next;
        rate_old = rate_new;
    }
    Ok(traj)
}

/// Euler positions of the nodes: `eta(0) = 0`, `eta_y = J`.
pub fn reconstruct_euler(state: &State, grid: &MassGrid) -> Vec<f64> {
    let dy = grid.dy();
    let mut eta = Vec::with_capacity(grid.nodes());
    let mut x = 0.0;
    eta.push(x);
    for &j in &state.j {
        x += dy * j;
        eta.push(x);
    }
    eta
}

/// Result of one member of a vacuum-approximation sweep.
#[derive(Debug, Clone)]
pub struct SweepMember {
    /// Floor index `n`; the density is clamped to `max(rho0, 1/n)`.
    pub n: u64,
    pub result: Result<Trajectory>,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub reference: Result<Trajectory>,
    pub members: Vec<SweepMember>,
}

/// Runs the unfloored reference and one run per floor `1/n`. Runs execute
/// concurrently; each is sequential in time, so results are deterministic.
pub fn vacuum_sequence_run(init: &InitialData, floors: &[u64], cfg: &StepConfig) -> Result<SweepResult> {
    if floors.is_empty() {
        return Err(Error::Usage("floor list is empty".into()));
    }
    if floors.contains(&0) {
        return Err(Error::Usage("floor index n must be positive".into()));
    }
    cfg.validate()?;
    std::thread::scope(|scope| {
        let handles: Vec<_> = floors
            .iter()
            .map(|&n| {
                scope.spawn(move || {
                    let floored = init.with_density_floor(1.0 / n as f64);
                    SweepMember {
                        n,
                        result: run(&floored, cfg),
                    }
                })
            })
            .collect();
        let reference = run(init, cfg);
        let members = handles
            .into_iter()
            .map(|h| h.join().expect("sweep member panicked"))
            .collect();
        Ok(SweepResult { reference, members })
    })
}

/// Discrete distances between two trajectories on the same grid, sampled at
/// the stored times of `reference`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryDistance {
    /// `sup_t ||v - v_ref||_2`
    pub sup_l2_v: f64,
    /// `sup_t ||J - J_ref||_2`
    pub sup_l2_j: f64,
    /// `(int_0^T ||v - v_ref||_{H^1}^2 dt)^{1/2}`, trapezoidal in time
    pub l2_h1_v: f64,
}

pub fn trajectory_distance(
    other: &Trajectory,
    reference: &Trajectory,
    grid: &MassGrid,
) -> TrajectoryDistance {
    let dy = grid.dy();
    let mut sup_v = 0.0f64;
    let mut sup_j = 0.0f64;
    let mut h1 = Vec::with_capacity(reference.states.len());
    for r in &reference.states {
        let o = other.sample_at(r.t);
        let dv: Vec<f64> = o.v.iter().zip(&r.v).map(|(a, b)| a - b).collect();
        let dj: Vec<f64> = o.j.iter().zip(&r.j).map(|(a, b)| a - b).collect();
        let lv = l2_norm(&dv, dy);
        sup_v = sup_v.max(lv);
        sup_j = sup_j.max(l2_norm(&dj, dy));
        let dvy = l2_norm(&ddy_node_to_center(&dv, grid), dy);
        h1.push((r.t, lv * lv + dvy * dvy));
    }
    let integral: f64 = h1
        .windows(2)
        .map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1))
        .sum();
    TrajectoryDistance {
        sup_l2_v: sup_v,
        sup_l2_j: sup_j,
        l2_h1_v: integral.sqrt(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{conserved_quantities, PhysParams};
    use crate::presets;

    #[test]
    fn pressure_zero_rate_is_identity() {
        for pi in [0.0, 0.3, 7.0] {
            assert_eq!(pressure_update(pi, 0.0, 0.1, 1.0, 1.4), pi);
        }
    }

    #[test]
    fn pressure_series_branch_continuity() {
        // both sides of the threshold agree to the size of the neglected term
        let (mu, gamma, dt) = (1.0, 1.4, 1e-3);
        let a = PRESSURE_SERIES_THRESHOLD / (gamma * dt);
        let lo = pressure_update(1.0, a * 0.999, dt, mu, gamma);
        let hi = pressure_update(1.0, a * 1.001, dt, mu, gamma);
        assert!((lo - hi).abs() < 1e-10);
    }

    #[test]
    fn pressure_stays_nonnegative() {
        for &a in &[-50.0, -1.0, -1e-12, 0.0, 1e-12, 1.0, 50.0] {
            for &pi in &[0.0, 1e-300, 1.0, 1e3] {
                let p = pressure_update(pi, a, 0.1, 0.7, 1.67);
                assert!(p >= 0.0 && p.is_finite(), "a={a} pi={pi} -> {p}");
            }
        }
    }

    #[test]
    fn stationary_state_is_fixed() {
        let init = presets::stationary(MassGrid::new(1.0, 32).unwrap(), PhysParams::new(1.0, 1.4).unwrap(), 1.3, 0.8)
            .unwrap();
        let s0 = init.initial_state();
        let s1 = advance(&s0, &init, 0.01, true).unwrap();
        assert_eq!(s1.v, s0.v);
        assert_eq!(s1.j, s0.j);
        assert_eq!(s1.pi, s0.pi);
    }

    #[test]
    fn length_is_conserved_exactly() {
        let init = presets::vacuum_bubble(
            MassGrid::new(1.0, 64).unwrap(),
            PhysParams::new(1.0, 1.4).unwrap(),
            &presets::VacuumBubble::default(),
        )
        .unwrap();
        let ell0 = conserved_quantities(&init).ell0;
        let mut cfg = StepConfig::new(1e-3, 0.2);
        cfg.snapshot_stride = 1;
        let traj = run(&init, &cfg).unwrap();
        for s in &traj.states {
            let ell: f64 = s.j.iter().sum::<f64>() * init.grid.dy();
            assert!((ell - ell0).abs() <= 1e-12 * ell0);
            s.check_invariants().unwrap();
        }
    }

    #[test]
    fn run_ends_exactly_at_t_end() {
        let init = presets::sine_velocity(
            MassGrid::new(1.0, 16).unwrap(),
            PhysParams::new(1.0, 1.4).unwrap(),
            &presets::SineVelocity::default(),
        )
        .unwrap();
        let mut cfg = StepConfig::new(0.03, 0.1);
        cfg.snapshot_stride = 2;
        let traj = run(&init, &cfg).unwrap();
        assert_eq!(traj.last().t, 0.1);
        assert_eq!(traj.dt_history.len(), 4);
        assert_eq!(traj.step_log.len(), 5);
        // stored: t = 0, step 2, final step 4
        assert_eq!(traj.states.len(), 3);
        let times = traj.times();
        assert!(times.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn huge_step_collapses_j() {
        let g = MassGrid::new(1.0, 32).unwrap();
        let pi0: Vec<f64> = g
            .center_coords()
            .iter()
            .map(|&y| if y < 0.5 { 10.0 } else { 0.1 })
            .collect();
        let init = InitialData::new(g, PhysParams::new(0.1, 1.4).unwrap(), vec![1.0; 32], vec![0.0; 33], pi0)
            .unwrap();
        let cfg = StepConfig::new(10.0, 10.0);
        match run(&init, &cfg) {
            Err(Error::JCollapse { t, value, .. }) => {
                assert_eq!(t, 10.0);
                assert!(value <= 0.0);
            }
            other => panic!("expected J collapse, got {other:?}"),
        }
    }

    #[test]
    fn euler_positions() {
        let g = MassGrid::new(1.0, 4).unwrap();
        let mut s = State {
            t: 0.0,
            j: vec![1.0; 4],
            v: vec![0.0; 5],
            pi: vec![0.0; 4],
        };
        assert_eq!(reconstruct_euler(&s, &g), g.node_coords());
        s.j = vec![2.0; 4];
        let eta = reconstruct_euler(&s, &g);
        assert_eq!(eta, vec![0.0, 0.5, 1.0, 1.5, 2.0]);
    }

    #[test]
    fn sample_at_interpolates() {
        let mk = |t: f64, x: f64| State {
            t,
            j: vec![x; 2],
            v: vec![0.0, x, 0.0],
            pi: vec![x; 2],
        };
        let mut traj = Trajectory::new(mk(0.0, 1.0));
        traj.states.push(mk(1.0, 3.0));
        assert_eq!(traj.sample_at(0.25).j, vec![1.5, 1.5]);
        assert_eq!(traj.sample_at(2.0).j, vec![3.0, 3.0]);
    }

    #[test]
    fn sweep_rejects_empty_floors() {
        let init = presets::stationary(MassGrid::new(1.0, 8).unwrap(), PhysParams::new(1.0, 1.4).unwrap(), 1.0, 1.0)
            .unwrap();
        let cfg = StepConfig::new(0.1, 0.2);
        assert!(matches!(vacuum_sequence_run(&init, &[], &cfg), Err(Error::Usage(_))));
        assert!(matches!(vacuum_sequence_run(&init, &[0], &cfg), Err(Error::Usage(_))));
    }

    #[test]
    fn inactive_floor_reproduces_reference() {
        let g = MassGrid::new(1.0, 32).unwrap();
        let mut spec = presets::SineVelocity::default();
        spec.rho_mean = 2.0;
        spec.rho_amplitude = 0.5;
        let init = presets::sine_velocity(g, PhysParams::new(1.0, 1.4).unwrap(), &spec).unwrap();
        let cfg = StepConfig::new(1e-3, 0.1);
        let sweep = vacuum_sequence_run(&init, &[1, 2], &cfg).unwrap();
        let reference = sweep.reference.unwrap();
        for m in sweep.members {
            let traj = m.result.unwrap();
            assert_eq!(traj, reference);
        }
    }

    #[test]
    fn floor_clamp_band() {
        // n = 1 and rho_bar = 2: floored density lies in [1/n, rho_bar + 1]
        let g = MassGrid::new(1.0, 30).unwrap();
        let rho: Vec<f64> = g.center_coords().iter().map(|&y| 2.0 * y).collect();
        let init = InitialData::new(g, PhysParams::new(1.0, 1.4).unwrap(), rho, vec![0.0; 31], vec![1.0; 30])
            .unwrap();
        let floored = init.with_density_floor(1.0);
        assert!(floored.rho0.iter().all(|&r| (1.0..=3.0).contains(&r)));
    }
}
