use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use lagflow::certify::{self, diagnostics, full_report};
use lagflow::integrator::{trajectory_distance, vacuum_sequence_run};
use lagflow::model::{conserved_quantities, l2_norm, state_energy};
use lagflow::picard::{picard_solve, PicardOutcome};
use lagflow::{run, InitialData, State};

use crate::config::RunConfig;
use crate::store;
use crate::CliError;

/// Runs the configured simulation and writes the trajectory directory.
/// Returns the output directory.
pub fn cmd_run(config: &Path, out: Option<&Path>) -> Result<PathBuf, CliError> {
    let cfg = RunConfig::from_path(config)?;
    let dir = match (out, &cfg.output_dir) {
        (Some(o), _) => o.to_path_buf(),
        (None, Some(d)) => cfg.base_dir.join(d),
        (None, None) => {
            return Err(CliError::Usage(
                "no output directory: pass --out or set output_dir".into(),
            ))
        }
    };
    let init = cfg.initial_data()?;
    let step = cfg.step_config();
    let traj = run(&init, &step)?;
    let diag = diagnostics(&traj, &init)?;
    store::write_trajectory(&dir, &traj, &init, step.snapshot_stride, step.dt, step.t_end, &diag)?;
    Ok(dir)
}

/// Certifies a trajectory directory. `Err(Verdicts)` when any verdict fails.
pub fn cmd_certify(dir: &Path) -> Result<certify::Verdicts, CliError> {
    let loaded = store::read_trajectory(dir)?;
    let rep = full_report(&loaded.traj, &loaded.init)?;
    store::write_certificate(dir, &rep)?;
    if rep.verdicts.all_pass() {
        Ok(rep.verdicts)
    } else {
        Err(CliError::Verdicts(format!("{:?}", rep.verdicts)))
    }
}

/// One measured quantity across refinement levels.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub quantity: &'static str,
    pub level: usize,
    pub cells: usize,
    pub dt: f64,
    pub value: f64,
    /// Observed order against the previous level.
    pub order: Option<Order>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Order {
    Measured(f64),
    /// Both errors at roundoff.
    Exact,
}

/// Values below this count as roundoff when estimating orders.
pub const ROUNDOFF: f64 = 1e-12;

fn order(prev: f64, cur: f64) -> Order {
    if prev.abs() < ROUNDOFF && cur.abs() < ROUNDOFF {
        Order::Exact
    } else {
        Order::Measured((prev / cur).log2())
    }
}

/// Fine final state restricted to the next-coarser grid (node injection,
/// cell-pair averages), then the combined L2 distance in `(v, J, pi)`.
fn restricted_difference(coarse: &State, fine: &State, dy: f64) -> f64 {
    let dv: Vec<f64> = coarse
        .v
        .iter()
        .enumerate()
        .map(|(i, v)| v - fine.v[2 * i])
        .collect();
    let avg = |f: &[f64], c: usize| 0.5 * (f[2 * c] + f[2 * c + 1]);
    let dj: Vec<f64> = (0..coarse.j.len()).map(|c| coarse.j[c] - avg(&fine.j, c)).collect();
    let dp: Vec<f64> = (0..coarse.pi.len()).map(|c| coarse.pi[c] - avg(&fine.pi, c)).collect();
    (l2_norm(&dv, dy).powi(2) + l2_norm(&dj, dy).powi(2) + l2_norm(&dp, dy).powi(2)).sqrt()
}

struct LevelResult {
    cells: usize,
    dt: f64,
    dy: f64,
    last: State,
    energy_drift: f64,
    phi_spread: f64,
    /// `None` when fewer than three states are stored.
    riccati: Option<f64>,
}

fn run_level(cfg: &RunConfig) -> Result<LevelResult, CliError> {
    let init: InitialData = cfg.initial_data()?;
    let traj = run(&init, &cfg.step_config())?;
    let c = conserved_quantities(&init);
    let last = traj.last().clone();
    let energy_drift = (state_energy(&last, &init) - c.e0).abs() / c.e0.max(f64::EPSILON);
    let phi_spread = certify::trajectory_phi_spread(&traj, traj.states.len() - 1, &init)?;
    let riccati = if traj.states.len() >= 3 {
        Some(certify::riccati_residual(&traj, &init)?.into_iter().fold(0.0, f64::max))
    } else {
        None
    };
    Ok(LevelResult {
        cells: init.grid.cells(),
        dt: cfg.step.dt,
        dy: init.grid.dy(),
        last,
        energy_drift,
        phi_spread,
        riccati,
    })
}

/// Runs `levels` joint refinements `(N, dt), (2N, dt/2), ...` concurrently.
pub fn convergence_study(cfg: &RunConfig, levels: usize) -> Result<Vec<ConvergenceRow>, CliError> {
    if levels < 2 {
        return Err(CliError::Usage(format!(
            "convergence needs at least 2 levels, got {levels}"
        )));
    }
    let results: Vec<Result<LevelResult, CliError>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..levels)
            .map(|l| {
                let c = cfg.refined(l as u32);
                s.spawn(move || run_level(&c))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("level panicked"))
            .collect()
    });
    let results = results.into_iter().collect::<Result<Vec<_>, _>>()?;

    let mut rows = Vec::new();
    let mut push_series = |name: &'static str, values: Vec<(usize, f64)>| {
        for (k, &(l, v)) in values.iter().enumerate() {
            let ord = (k > 0).then(|| order(values[k - 1].1, v));
            rows.push(ConvergenceRow {
                quantity: name,
                level: l,
                cells: results[l].cells,
                dt: results[l].dt,
                value: v,
                order: ord,
            });
        }
    };
    let self_diff = (0..levels - 1)
        .map(|l| {
            (
                l,
                restricted_difference(&results[l].last, &results[l + 1].last, results[l].dy),
            )
        })
        .collect();
    push_series("self_difference", self_diff);
    push_series(
        "energy_drift",
        results.iter().enumerate().map(|(l, r)| (l, r.energy_drift)).collect(),
    );
    push_series(
        "phi_spread",
        results.iter().enumerate().map(|(l, r)| (l, r.phi_spread)).collect(),
    );
    let riccati: Option<Vec<(usize, f64)>> = results
        .iter()
        .enumerate()
        .map(|(l, r)| r.riccati.map(|x| (l, x)))
        .collect();
    if let Some(series) = riccati {
        push_series("riccati_residual", series);
    }
    Ok(rows)
}

pub fn convergence_csv(rows: &[ConvergenceRow]) -> String {
    let mut out = String::from("quantity,level,N,dt,value,order\n");
    for r in rows {
        let ord = match r.order {
            None => String::new(),
            Some(Order::Exact) => "exact".to_string(),
            Some(Order::Measured(p)) => format!("{p:.4}"),
        };
        let _ = writeln!(out, "{},{},{},{:e},{:e},{}", r.quantity, r.level, r.cells, r.dt, r.value, ord);
    }
    out
}

pub fn cmd_convergence(config: &Path, levels: usize) -> Result<String, CliError> {
    if levels < 2 {
        return Err(CliError::Usage(format!(
            "convergence needs at least 2 levels, got {levels}"
        )));
    }
    let cfg = RunConfig::from_path(config)?;
    Ok(convergence_csv(&convergence_study(&cfg, levels)?))
}

pub fn picard_json(out: &PicardOutcome, c_sharp: f64) -> serde_json::Value {
    let attempts: Vec<_> = out
        .attempts
        .iter()
        .map(|a| {
            serde_json::json!({
                "window": a.window,
                "distances": a.distances,
                "ratios": a.ratios,
                "max_iterate_norm": a.max_iterate_norm,
                "membership_violated": a.membership_violated,
                "converged": a.converged,
            })
        })
        .collect();
    serde_json::json!({
        "M": out.m,
        "C1": out.c1,
        "C_sharp": c_sharp,
        "t_sharp": out.t_sharp,
        "window": out.window(),
        "halvings": out.halvings,
        "time_steps": out.v.steps(),
        "attempts": attempts,
        "final_ratios": out.ratios(),
        "residuals": {
            "volume": out.residuals.volume,
            "momentum": out.residuals.momentum,
            "pressure": out.residuals.pressure,
        },
    })
}

pub fn cmd_picard(config: &Path) -> Result<(PicardOutcome, serde_json::Value), CliError> {
    let cfg = RunConfig::from_path(config)?;
    let init = cfg.initial_data()?;
    if init.rho_floor() <= 0.0 {
        return Err(CliError::Config(
            "the fixed-point path requires a positive density floor (rho0 > 0 everywhere); \
             use `run` or `sweep` for data with vacuum"
                .into(),
        ));
    }
    let pc = cfg.picard_config();
    let out = picard_solve(&init, &pc)?;
    let json = picard_json(&out, pc.c_sharp);
    Ok((out, json))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub n: u64,
    pub outcome: Result<lagflow::integrator::TrajectoryDistance, String>,
}

pub fn parse_floors(text: &str) -> Result<Vec<u64>, CliError> {
    let floors: Vec<u64> = text
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<u64>()
                .map_err(|e| CliError::Usage(format!("bad floor `{s}`: {e}")))
        })
        .collect::<Result<_, _>>()?;
    if floors.is_empty() {
        return Err(CliError::Usage("floor list is empty".into()));
    }
    Ok(floors)
}

pub fn cmd_sweep(config: &Path, floors: &[u64]) -> Result<(Vec<SweepRow>, String), CliError> {
    if floors.is_empty() {
        return Err(CliError::Usage("floor list is empty".into()));
    }
    let cfg = RunConfig::from_path(config)?;
    let init = cfg.initial_data()?;
    let sweep = vacuum_sequence_run(&init, floors, &cfg.step_config())?;
    let reference = sweep.reference?;
    let rows: Vec<SweepRow> = sweep
        .members
        .into_iter()
        .map(|m| SweepRow {
            n: m.n,
            outcome: m
                .result
                .map(|t| trajectory_distance(&t, &reference, &init.grid))
                .map_err(|e| e.to_string()),
        })
        .collect();
    let mut csv = String::from("n,floor,status,sup_l2_v,sup_l2_J,l2_h1_v\n");
    for r in &rows {
        match &r.outcome {
            Ok(d) => {
                let _ = writeln!(
                    csv,
                    "{},{:e},ok,{:e},{:e},{:e}",
                    r.n,
                    1.0 / r.n as f64,
                    d.sup_l2_v,
                    d.sup_l2_j,
                    d.l2_h1_v
                );
            }
            Err(e) => {
                let _ = writeln!(csv, "{},{:e},\"failed: {}\",,,", r.n, 1.0 / r.n as f64, e.replace('"', "'"));
            }
        }
    }
    if rows.iter().all(|r| r.outcome.is_err()) {
        return Err(CliError::Solver(lagflow::Error::Usage(format!(
            "every sweep member failed\n{csv}"
        ))));
    }
    Ok((rows, csv))
}
