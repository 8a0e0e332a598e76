//! Trajectory directories.
//!
//! ```text
//! <dir>/manifest.json
//! <dir>/diagnostics.csv
//! <dir>/step_log.csv
//! <dir>/snapshots/snap_<k>_centers.csv   y_center,J,pi,rho0,int_pi,int_vy
//! <dir>/snapshots/snap_<k>_nodes.csv     y_node,v
//! ```
//!
//! Floats are written in Rust's shortest round-trip form, so reading a
//! directory back reproduces the in-memory trajectory bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use lagflow::certify::{CertReport, DiagnosticsRow};
use lagflow::integrator::StepRecord;
use lagflow::{InitialData, MassGrid, PhysParams, State, Trajectory};

use crate::config::{GridSpec, ParamSpec};
use crate::CliError;

pub const MANIFEST: &str = "manifest.json";
pub const DIAGNOSTICS: &str = "diagnostics.csv";
pub const STEP_LOG: &str = "step_log.csv";
pub const CERT_REPORT: &str = "cert_report.csv";
pub const VERDICTS: &str = "verdicts.json";

pub const DIAGNOSTICS_HEADER: &str =
    "t,mass_residual,energy,minJ,j_lower,G_l2,G_linf,phi_spread,pi_max";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotEntry {
    pub index: usize,
    pub t: f64,
    pub centers: String,
    pub nodes: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub grid: GridSpec,
    pub params: ParamSpec,
    pub snapshot_stride: usize,
    pub dt: f64,
    pub t_end: f64,
    pub steps: usize,
    pub snapshots: Vec<SnapshotEntry>,
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| io_err(path, e))
}

fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}

pub fn diagnostics_csv(rows: &[DiagnosticsRow]) -> String {
    let mut out = String::from(DIAGNOSTICS_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
            r.t, r.mass_residual, r.energy, r.min_j, r.j_lower, r.g_l2, r.g_linf, r.phi_spread, r.pi_max
        );
    }
    out
}

/// Writes snapshots, manifest, step log and diagnostics.
pub fn write_trajectory(
    dir: &Path,
    traj: &Trajectory,
    init: &InitialData,
    stride: usize,
    dt: f64,
    t_end: f64,
    diagnostics: &[DiagnosticsRow],
) -> Result<(), CliError> {
    let snap_dir = dir.join("snapshots");
    fs::create_dir_all(&snap_dir).map_err(|e| io_err(&snap_dir, e))?;
    let grid = &init.grid;
    let yc = grid.center_coords();
    let yn = grid.node_coords();
    let mut entries = Vec::with_capacity(traj.states.len());
    for (k, s) in traj.states.iter().enumerate() {
        let centers = format!("snap_{k:06}_centers.csv");
        let nodes = format!("snap_{k:06}_nodes.csv");
        let mut c = String::from("y_center,J,pi,rho0,int_pi,int_vy\n");
        for i in 0..grid.cells() {
            let _ = writeln!(
                c,
                "{:e},{:e},{:e},{:e},{:e},{:e}",
                yc[i], s.j[i], s.pi[i], init.rho0[i], traj.int_pi[k][i], traj.int_vy[k][i]
            );
        }
        write_file(&snap_dir.join(&centers), &c)?;
        let mut nd = String::from("y_node,v\n");
        for i in 0..grid.nodes() {
            let _ = writeln!(nd, "{:e},{:e}", yn[i], s.v[i]);
        }
        write_file(&snap_dir.join(&nodes), &nd)?;
        entries.push(SnapshotEntry {
            index: k,
            t: s.t,
            centers,
            nodes,
        });
    }

    let mut log = String::from("t,dt,min_j,min_pi\n");
    for (k, r) in traj.step_log.iter().enumerate() {
        let dt_k = if k == 0 { 0.0 } else { traj.dt_history[k - 1] };
        let _ = writeln!(log, "{:e},{:e},{:e},{:e}", r.t, dt_k, r.min_j, r.min_pi);
    }
    write_file(&dir.join(STEP_LOG), &log)?;
    write_file(&dir.join(DIAGNOSTICS), &diagnostics_csv(diagnostics))?;

    let manifest = Manifest {
        grid: GridSpec {
            length: grid.length(),
            cells: grid.cells(),
        },
        params: ParamSpec {
            mu: init.params.mu,
            gamma: init.params.gamma,
        },
        snapshot_stride: stride,
        dt,
        t_end,
        steps: traj.dt_history.len(),
        snapshots: entries,
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_file(&dir.join(MANIFEST), &json)
}

/// Parses a CSV with a header line into numeric columns.
fn read_columns(path: &Path, expected: &[&str]) -> Result<Vec<Vec<f64>>, CliError> {
    let text = read_file(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| CliError::Io(format!("{}: empty file", path.display())))?;
    let names: Vec<&str> = header.split(',').map(str::trim).collect();
    if names != expected {
        return Err(CliError::Io(format!(
            "{}: expected columns {expected:?}, found {names:?}",
            path.display()
        )));
    }
    let mut cols = vec![Vec::new(); expected.len()];
    for (ln, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != expected.len() {
            return Err(CliError::Io(format!(
                "{}: line {} has {} fields",
                path.display(),
                ln + 2,
                fields.len()
            )));
        }
        for (col, f) in cols.iter_mut().zip(fields) {
            let x = f.trim().parse::<f64>().map_err(|e| {
                CliError::Io(format!("{}: line {}: {e}", path.display(), ln + 2))
            })?;
            col.push(x);
        }
    }
    Ok(cols)
}

/// A trajectory read back from disk together with its initial data.
pub struct LoadedTrajectory {
    pub manifest: Manifest,
    pub init: InitialData,
    pub traj: Trajectory,
}

pub fn read_trajectory(dir: &Path) -> Result<LoadedTrajectory, CliError> {
    let manifest_path = dir.join(MANIFEST);
    let manifest: Manifest = serde_json::from_str(&read_file(&manifest_path)?)
        .map_err(|e| CliError::Io(format!("{}: {e}", manifest_path.display())))?;
    if manifest.snapshots.is_empty() {
        return Err(CliError::Io("manifest lists no snapshots".into()));
    }
    let grid = MassGrid::new(manifest.grid.length, manifest.grid.cells)?;
    let params = PhysParams::new(manifest.params.mu, manifest.params.gamma)?;
    let snap_dir = dir.join("snapshots");

    let mut states = Vec::new();
    let mut int_pi = Vec::new();
    let mut int_vy = Vec::new();
    let mut rho0 = Vec::new();
    for e in &manifest.snapshots {
        let c = read_columns(
            &snap_dir.join(&e.centers),
            &["y_center", "J", "pi", "rho0", "int_pi", "int_vy"],
        )?;
        let nd = read_columns(&snap_dir.join(&e.nodes), &["y_node", "v"])?;
        if c[0].len() != grid.cells() || nd[0].len() != grid.nodes() {
            return Err(CliError::Io(format!(
                "snapshot {} does not match the grid size",
                e.index
            )));
        }
        let mut c = c.into_iter();
        let _y = c.next();
        let j = c.next().unwrap_or_default();
        let pi = c.next().unwrap_or_default();
        rho0 = c.next().unwrap_or_default();
        int_pi.push(c.next().unwrap_or_default());
        int_vy.push(c.next().unwrap_or_default());
        states.push(State {
            t: e.t,
            j,
            v: nd.into_iter().nth(1).unwrap_or_default(),
            pi,
        });
    }

    let first = &states[0];
    let init = InitialData::with_j0(
        grid,
        params,
        rho0,
        first.v.clone(),
        first.pi.clone(),
        first.j.clone(),
    )?;

    let log_path = dir.join(STEP_LOG);
    let (step_log, dt_history) = if log_path.exists() {
        let cols = read_columns(&log_path, &["t", "dt", "min_j", "min_pi"])?;
        let log = (0..cols[0].len())
            .map(|k| StepRecord {
                t: cols[0][k],
                min_j: cols[2][k],
                min_pi: cols[3][k],
            })
            .collect();
        (log, cols[1].iter().skip(1).copied().collect())
    } else {
        let log = states
            .iter()
            .map(|s| StepRecord {
                t: s.t,
                min_j: s.min_j(),
                min_pi: s.min_pi(),
            })
            .collect();
        (log, Vec::new())
    };

    Ok(LoadedTrajectory {
        manifest,
        init,
        traj: Trajectory {
            states,
            int_pi,
            int_vy,
            dt_history,
            step_log,
        },
    })
}

pub fn cert_report_csv(rep: &CertReport) -> String {
    let mut out = String::from(
        "t,mass_residual,energy,energy_drift,minJ,j_lower,B_min,B_max,G_l2,G_linf,\
         Gy_weighted,Gy_weighted_integral,phi_spread,riccati_residual,pi_min,pi_max,J_max\n",
    );
    for r in &rep.records {
        let ric = r
            .riccati_residual
            .map(|x| format!("{x:e}"))
            .unwrap_or_default();
        let _ = writeln!(
            out,
            "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{},{:e},{:e},{:e}",
            r.t,
            r.mass_residual,
            r.energy,
            r.energy_drift,
            r.min_j,
            r.j_lower,
            r.b_min,
            r.b_max,
            r.g_l2,
            r.g_linf,
            r.gy_weighted,
            r.gy_weighted_integral,
            r.phi_spread,
            ric,
            r.pi_min,
            r.pi_max,
            r.j_max
        );
    }
    out
}

pub fn verdicts_json(rep: &CertReport) -> serde_json::Value {
    let v = rep.verdicts;
    let b = &rep.budget;
    serde_json::json!({
        "mass_exact": v.mass_exact,
        "j_above_floor": v.j_above_floor,
        "B_in_band": v.b_in_band,
        "pi_nonnegative": v.pi_nonnegative,
        "all_pass": v.all_pass(),
        "conserved": {
            "ell0": rep.conserved.ell0,
            "m0": rep.conserved.m0,
            "E0": rep.conserved.e0,
        },
        "B_band": [rep.b_band.0, rep.b_band.1],
        "g_budget": {
            "G0_l2_sq": b.g0_l2_sq,
            "sup_G_l2_sq": b.sup_g_l2_sq,
            "sup_time": b.sup_time,
            "int_G_linf4": b.int_g_linf4,
            "int_Gy_weighted": b.int_gy_weighted,
            "excluded_nodes": b.excluded_nodes,
            "t_weighted_vyt": b.t_weighted_vyt,
            "ratio": b.ratio,
        },
    })
}

pub fn write_certificate(dir: &Path, rep: &CertReport) -> Result<(PathBuf, PathBuf), CliError> {
    let csv = dir.join(CERT_REPORT);
    let json = dir.join(VERDICTS);
    write_file(&csv, &cert_report_csv(rep))?;
    let text = serde_json::to_string_pretty(&verdicts_json(rep)).expect("verdicts serialize");
    write_file(&json, &text)?;
    Ok((csv, json))
}
