//! Fixed-point construction of local solutions for non-vacuum data.
//!
//! A candidate velocity `v` on a space-time window is mapped to
//!
//! * `J = Q(v) = J0 + int_0^t v_y`,
//! * `pi = R(v) = R1(v) + mu (gamma - 1) R2(v)` with
//!   `R1 = pi0 exp(-gamma int_0^t v_y/J)` and
//!   `R2 = int_0^t (v_y/J)^2 exp(-gamma int_tau^t v_y/J) dtau`,
//! * `V = F(v)`, the solution of the linear parabolic problem
//!   `V_t - mu V_yy / (J rho0) = -(mu J_y v_y / (J^2 rho0) + pi_y / rho0)`
//!   with `V = 0` on the boundary and `V(0) = v0`,
//!
//! and `F` is iterated to its fixed point in the metric `||(v1 - v2)_y||_{V_T}`.
//! The window starts at
//! `T# = min{1/M^4, 1/(16 C#^4), 1, (J_floor/(2 C1))^2}` and is halved when the
//! iteration fails to contract.

use crate::error::{Error, Result};
use crate::model::{l2_norm, InitialData, MassGrid};
use crate::operators::{
    ddy_center_to_node, ddy_node_to_center, solve_tridiagonal, NodeBoundary, TridiagonalSystem,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Nodes,
    Centers,
}

/// Field sampled at `t_k = k dt`, `k = 0..=K`, on a fixed mass grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeField {
    pub grid: MassGrid,
    pub dt: f64,
    pub location: Location,
    pub slices: Vec<Vec<f64>>,
}

impl SpaceTimeField {
    /// `initial` repeated on every one of the `steps + 1` time levels.
    pub fn constant(grid: MassGrid, window: f64, steps: usize, location: Location, initial: &[f64]) -> Self {
        Self {
            grid,
            dt: window / steps as f64,
            location,
            slices: vec![initial.to_vec(); steps + 1],
        }
    }

    pub fn steps(&self) -> usize {
        self.slices.len() - 1
    }

    pub fn window(&self) -> f64 {
        self.dt * self.steps() as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    pub fn last(&self) -> &[f64] {
        self.slices.last().expect("at least one time level")
    }

    fn with_slices(&self, location: Location, slices: Vec<Vec<f64>>) -> Self {
        Self {
            grid: self.grid,
            dt: self.dt,
            location,
            slices,
        }
    }

    /// Spatial derivative of every slice.
    pub fn ddy(&self) -> Self {
        match self.location {
            Location::Nodes => self.with_slices(
                Location::Centers,
                self.slices.iter().map(|s| ddy_node_to_center(s, &self.grid)).collect(),
            ),
            Location::Centers => self.with_slices(
                Location::Nodes,
                self.slices
                    .iter()
                    .map(|s| ddy_center_to_node(s, &self.grid, NodeBoundary::OneSided))
                    .collect(),
            ),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.with_slices(
            self.location,
            self.slices
                .iter()
                .zip(&other.slices)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
                .collect(),
        )
    }
}

/// Window and iteration controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PicardConfig {
    /// Iterate-norm bound; `None` uses `max(1, 2 ||v0_y||_2)`.
    pub m: Option<f64>,
    /// Embedding constant; `None` uses `2 max(1, 1/sqrt(L))`.
    pub c1: Option<f64>,
    pub c_sharp: f64,
    /// Overrides the computed `T#` when set.
    pub t_window: Option<f64>,
    pub tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
    /// Time steps per window (kept fixed under halving).
    pub time_steps: usize,
    /// A post-warmup ratio at or above this triggers a halving.
    pub contraction_limit: f64,
    /// Ratios from the first `warmup` iterations are not judged.
    pub warmup: usize,
}

impl Default for PicardConfig {
    fn default() -> Self {
        Self {
            m: None,
            c1: None,
            c_sharp: 10.0,
            t_window: None,
            tol: 1e-10,
            max_iter: 64,
            max_halvings: 8,
            time_steps: 64,
            contraction_limit: 1.0,
            warmup: 2,
        }
    }
}

impl PicardConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, x: f64| {
            if x.is_finite() && x > 0.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive, got {x}")))
            }
        };
        if let Some(m) = self.m {
            positive("M", m)?;
        }
        if let Some(c1) = self.c1 {
            positive("C1", c1)?;
        }
        if let Some(t) = self.t_window {
            positive("t_window", t)?;
        }
        positive("C_sharp", self.c_sharp)?;
        positive("tol", self.tol)?;
        positive("contraction_limit", self.contraction_limit)?;
        if self.tol >= 1.0 {
            return Err(Error::Config("tol must be below 1".into()));
        }
        if self.max_iter == 0 || self.time_steps == 0 {
            return Err(Error::Config("max_iter and time_steps must be at least 1".into()));
        }
        Ok(())
    }

    pub fn resolved_c1(&self, grid: &MassGrid) -> f64 {
        self.c1
            .unwrap_or_else(|| 2.0 * f64::max(1.0, 1.0 / grid.length().sqrt()))
    }

    pub fn resolved_m(&self, init: &InitialData) -> f64 {
        self.m.unwrap_or_else(|| {
            let vy = ddy_node_to_center(&init.v0, &init.grid);
            f64::max(1.0, 2.0 * l2_norm(&vy, init.grid.dy()))
        })
    }
}

/// `min{1/M^4, 1/(16 C#^4), 1, (J_floor/(2 C1))^2}`.
pub fn compute_t_sharp(m: f64, c_sharp: f64, c1: f64, j_floor: f64) -> f64 {
    let a = 1.0 / m.powi(4);
    let b = 1.0 / (16.0 * c_sharp.powi(4));
    let d = (j_floor / (2.0 * c1)).powi(2);
    a.min(b).min(1.0).min(d)
}

/// `J = J0 + int_0^t v_y`, trapezoidal in time.
pub fn map_q(v: &SpaceTimeField, j0: &[f64]) -> SpaceTimeField {
    let dvy = v.ddy();
    let half = 0.5 * v.dt;
    let mut slices = Vec::with_capacity(v.slices.len());
    let mut j = j0.to_vec();
    slices.push(j.clone());
    for w in dvy.slices.windows(2) {
        for c in 0..j.len() {
            j[c] += half * (w[0][c] + w[1][c]);
        }
        slices.push(j.clone());
    }
    v.with_slices(Location::Centers, slices)
}

/// `v_y / J` per slice.
fn rate(v: &SpaceTimeField, j: &SpaceTimeField) -> Result<Vec<Vec<f64>>> {
    let dvy = v.ddy();
    dvy.slices
        .iter()
        .zip(&j.slices)
        .enumerate()
        .map(|(k, (d, jk))| {
            d.iter()
                .zip(jk)
                .enumerate()
                .map(|(c, (d, &jj))| {
                    if jj > 0.0 {
                        Ok(d / jj)
                    } else {
                        Err(Error::Domain(format!(
                            "J = {jj:e} is not positive in cell {c} at t = {}",
                            v.time(k)
                        )))
                    }
                })
                .collect()
        })
        .collect()
}

/// Running trapezoidal integral of each cell's series.
fn cumulative(series: &[Vec<f64>], dt: f64) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(series.len());
    let mut acc = vec![0.0; series[0].len()];
    out.push(acc.clone());
    for w in series.windows(2) {
        for c in 0..acc.len() {
            acc[c] += 0.5 * dt * (w[0][c] + w[1][c]);
        }
        out.push(acc.clone());
    }
    out
}

/// `pi0 exp(-gamma int_0^t v_y / J)`.
pub fn map_r1(v: &SpaceTimeField, j: &SpaceTimeField, pi0: &[f64], gamma: f64) -> Result<SpaceTimeField> {
    let cum = cumulative(&rate(v, j)?, v.dt);
    let slices = cum
        .iter()
        .map(|s| s.iter().zip(pi0).map(|(i, p)| p * (-gamma * i).exp()).collect())
        .collect();
    Ok(v.with_slices(Location::Centers, slices))
}

/// `int_0^t a^2 exp(-gamma int_tau^t a) dtau` with `a = v_y / J`.
///
/// Trapezoidal in `tau` with the inner exponent taken from differences of the
/// cumulative integral. Each level reuses the previous one:
/// `R2_{k+1} = e^{-gamma dA} R2_k + dt/2 (a_k^2 e^{-gamma dA} + a_{k+1}^2)`,
/// `dA = A_{k+1} - A_k`, which is the same quadrature sum regrouped.
pub fn map_r2(v: &SpaceTimeField, j: &SpaceTimeField, gamma: f64) -> Result<SpaceTimeField> {
    let a = rate(v, j)?;
    let cum = cumulative(&a, v.dt);
    let half = 0.5 * v.dt;
    let mut slices = Vec::with_capacity(a.len());
    let mut r = vec![0.0; a[0].len()];
    slices.push(r.clone());
    for k in 0..a.len() - 1 {
        for c in 0..r.len() {
            let decay = (-gamma * (cum[k + 1][c] - cum[k][c])).exp();
            r[c] = decay * r[c] + half * (a[k][c] * a[k][c] * decay + a[k + 1][c] * a[k + 1][c]);
        }
        slices.push(r.clone());
    }
    Ok(v.with_slices(Location::Centers, slices))
}

/// `R(v) = R1(v) + mu (gamma - 1) R2(v)` with `J = Q(v)`.
pub fn map_r(v: &SpaceTimeField, j: &SpaceTimeField, init: &InitialData) -> Result<SpaceTimeField> {
    let p = init.params;
    let r1 = map_r1(v, j, &init.pi0, p.gamma)?;
    let r2 = map_r2(v, j, p.gamma)?;
    let w = p.mu * (p.gamma - 1.0);
    let slices = r1
        .slices
        .iter()
        .zip(&r2.slices)
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + w * y).collect())
        .collect();
    Ok(v.with_slices(Location::Centers, slices))
}

fn require_non_vacuum(init: &InitialData) -> Result<()> {
    let floor = init.rho_floor();
    if floor > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "the fixed-point construction needs a positive density floor, min rho0 = {floor}"
        )))
    }
}

/// `V = F(v)`: backward Euler on the window's time grid with coefficients and
/// forcing taken at the new level. One tridiagonal solve per step.
pub fn map_f(v: &SpaceTimeField, init: &InitialData) -> Result<SpaceTimeField> {
    require_non_vacuum(init)?;
    let grid = &init.grid;
    let n = grid.cells();
    let dy = grid.dy();
    let mu = init.params.mu;
    let dt = v.dt;

    let j = map_q(v, &init.j0);
    if let Some((k, c)) = j
        .slices
        .iter()
        .enumerate()
        .find_map(|(k, s)| s.iter().position(|&x| !(x > 0.0)).map(|c| (k, c)))
    {
        return Err(Error::Domain(format!(
            "Q(v) is not positive in cell {c} at t = {}",
            v.time(k)
        )));
    }
    let pi = map_r(v, &j, init)?;

    let mut slices = Vec::with_capacity(v.slices.len());
    let mut cur = init.v0.clone();
    slices.push(cur.clone());
    for k in 1..v.slices.len() {
        let jk = &j.slices[k];
        let pk = &pi.slices[k];
        let vk = &v.slices[k];
        let jy = ddy_center_to_node(jk, grid, NodeBoundary::NeumannZero);
        let py = ddy_center_to_node(pk, grid, NodeBoundary::NeumannZero);
        let mut sys = TridiagonalSystem::zeros(n + 1);
        for i in 1..n {
            let jn = 0.5 * (jk[i - 1] + jk[i]);
            let rn = 0.5 * (init.rho0[i - 1] + init.rho0[i]);
            let vy = (vk[i + 1] - vk[i - 1]) / (2.0 * dy);
            let forcing = mu * jy[i] * vy / (jn * jn * rn) + py[i] / rn;
            let c = mu * dt / (jn * rn * dy * dy);
            sys.sub[i] = -c;
            sys.sup[i] = -c;
            sys.diag[i] = 1.0 + 2.0 * c;
            sys.rhs[i] = cur[i] - dt * forcing;
        }
        sys.dirichlet_row(0, 0.0);
        sys.dirichlet_row(n, 0.0);
        cur = solve_tridiagonal(&sys)?;
        cur[0] = 0.0;
        cur[n] = 0.0;
        slices.push(cur.clone());
    }
    Ok(v.with_slices(Location::Nodes, slices))
}

/// `(sup_t ||f||_2^2 + int_0^T ||f_y||_2^2 dt)^{1/2}`, trapezoidal in time.
pub fn vt_norm(f: &SpaceTimeField) -> f64 {
    let dy = f.grid.dy();
    let sup = f
        .slices
        .iter()
        .map(|s| l2_norm(s, dy).powi(2))
        .fold(0.0, f64::max);
    let fy = f.ddy();
    let sq: Vec<f64> = fy.slices.iter().map(|s| l2_norm(s, dy).powi(2)).collect();
    let integral: f64 = sq.windows(2).map(|w| 0.5 * f.dt * (w[0] + w[1])).sum();
    (sup + integral).sqrt()
}

/// `||(v1 - v2)_y||_{V_T}`, the contraction metric.
pub fn vt_distance(v1: &SpaceTimeField, v2: &SpaceTimeField) -> f64 {
    vt_norm(&v1.sub(v2).ddy())
}

/// Max-norm residuals of the discrete system at the fixed point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointResiduals {
    /// `J_t - v_y` with trapezoidal `v_y`.
    pub volume: f64,
    /// `rho0 v_t - mu (v_y / J)_y + pi_y` in conservative staggered form, interior nodes.
    pub momentum: f64,
    /// `pi_t + gamma a pi - mu (gamma - 1) a^2` at half levels.
    pub pressure: f64,
}

pub fn fixed_point_residuals(
    v: &SpaceTimeField,
    j: &SpaceTimeField,
    pi: &SpaceTimeField,
    init: &InitialData,
) -> FixedPointResiduals {
    let grid = &init.grid;
    let n = grid.cells();
    let dt = v.dt;
    let mu = init.params.mu;
    let gamma = init.params.gamma;
    let vy = v.ddy();
    let mut volume = 0.0f64;
    let mut momentum = 0.0f64;
    let mut pressure = 0.0f64;
    for k in 0..v.steps() {
        for c in 0..n {
            let jt = (j.slices[k + 1][c] - j.slices[k][c]) / dt;
            volume = volume.max((jt - 0.5 * (vy.slices[k][c] + vy.slices[k + 1][c])).abs());
            let a0 = vy.slices[k][c] / j.slices[k][c];
            let a1 = vy.slices[k + 1][c] / j.slices[k + 1][c];
            let a = 0.5 * (a0 + a1);
            let p = 0.5 * (pi.slices[k][c] + pi.slices[k + 1][c]);
            let pt = (pi.slices[k + 1][c] - pi.slices[k][c]) / dt;
            pressure = pressure.max((pt + gamma * a * p - mu * (gamma - 1.0) * a * a).abs());
        }
        let flux: Vec<f64> = vy.slices[k + 1]
            .iter()
            .zip(&j.slices[k + 1])
            .zip(&pi.slices[k + 1])
            .map(|((d, jj), p)| mu * d / jj - p)
            .collect();
        let fy = ddy_center_to_node(&flux, grid, NodeBoundary::NeumannZero);
        for i in 1..n {
            let rn = 0.5 * (init.rho0[i - 1] + init.rho0[i]);
            let vt = (v.slices[k + 1][i] - v.slices[k][i]) / dt;
            momentum = momentum.max((rn * vt - fy[i]).abs());
        }
    }
    FixedPointResiduals {
        volume,
        momentum,
        pressure,
    }
}

/// Log of one window attempt.
#[derive(Debug, Clone, PartialEq)]
pub struct PicardAttempt {
    pub window: f64,
    pub distances: Vec<f64>,
    pub ratios: Vec<f64>,
    /// Largest `||v_y||_{V_T}` over the iterates.
    pub max_iterate_norm: f64,
    pub membership_violated: bool,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PicardOutcome {
    pub v: SpaceTimeField,
    pub j: SpaceTimeField,
    pub pi: SpaceTimeField,
    pub m: f64,
    pub c1: f64,
    pub t_sharp: f64,
    pub halvings: usize,
    pub attempts: Vec<PicardAttempt>,
    pub residuals: FixedPointResiduals,
}

impl PicardOutcome {
    pub fn final_attempt(&self) -> &PicardAttempt {
        self.attempts.last().expect("at least one attempt")
    }

    pub fn ratios(&self) -> &[f64] {
        &self.final_attempt().ratios
    }

    pub fn window(&self) -> f64 {
        self.v.window()
    }
}

/// Iterates `v <- F(v)` from the constant-in-time extension of `v0`.
pub fn picard_solve(init: &InitialData, cfg: &PicardConfig) -> Result<PicardOutcome> {
    cfg.validate()?;
    require_non_vacuum(init)?;
    let grid = init.grid;
    let m = cfg.resolved_m(init);
    let c1 = cfg.resolved_c1(&grid);
    let t_sharp = compute_t_sharp(m, cfg.c_sharp, c1, init.j_floor());
    let mut window = cfg.t_window.unwrap_or(t_sharp);
    let mut attempts = Vec::new();

    for halvings in 0..=cfg.max_halvings {
        let mut v = SpaceTimeField::constant(grid, window, cfg.time_steps, Location::Nodes, &init.v0);
        let mut attempt = PicardAttempt {
            window,
            distances: Vec::new(),
            ratios: Vec::new(),
            max_iterate_norm: vt_norm(&v.ddy()),
            membership_violated: false,
            converged: false,
        };
        for it in 0..cfg.max_iter {
            // vacuum was ruled out above, so a domain error here means Q(v)
            // left J > 0: the iterate is outside the admissible set
            let next = match map_f(&v, init) {
                Ok(next) => next,
                Err(Error::Domain(_)) => {
                    attempt.membership_violated = true;
                    break;
                }
                Err(e) => return Err(e),
            };
            let d = vt_distance(&next, &v);
            if let Some(&prev) = attempt.distances.last() {
                attempt.ratios.push(if prev > 0.0 { d / prev } else { 0.0 });
            }
            attempt.distances.push(d);
            let norm = vt_norm(&next.ddy());
            attempt.max_iterate_norm = attempt.max_iterate_norm.max(norm);
            if norm > m {
                attempt.membership_violated = true;
            }
            v = next;
            if d < cfg.tol {
                attempt.converged = true;
                break;
            }
            if attempt.membership_violated {
                break;
            }
            if it + 1 > cfg.warmup
                && attempt
                    .ratios
                    .iter()
                    .skip(cfg.warmup)
                    .any(|&r| r >= cfg.contraction_limit)
            {
                break;
            }
        }
        let converged = attempt.converged && !attempt.membership_violated;
        attempts.push(attempt);
        if converged {
            let j = map_q(&v, &init.j0);
            let pi = map_r(&v, &j, init)?;
            let residuals = fixed_point_residuals(&v, &j, &pi, init);
            return Ok(PicardOutcome {
                v,
                j,
                pi,
                m,
                c1,
                t_sharp,
                halvings,
                attempts,
                residuals,
            });
        }
        window *= 0.5;
    }
    let last = attempts.last().expect("at least one attempt");
    Err(Error::NonContraction {
        halvings: cfg.max_halvings,
        window: last.window,
        ratios: last.ratios.clone(),
    })
}
