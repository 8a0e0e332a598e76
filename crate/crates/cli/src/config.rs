//! JSON run configuration.
//!
//! ```json
//! {
//!   "grid":    { "length": 1.0, "cells": 256 },
//!   "params":  { "mu": 1.0, "gamma": 1.4 },
//!   "profile": { "preset": "sine-velocity", "amplitude": 0.5 },
//!   "step":    { "dt": 1e-4, "t_end": 1.0 },
//!   "picard":  { "c_sharp": 1.0 },
//!   "snapshot_stride": 10,
//!   "output_dir": "out"
//! }
//! ```
//!
//! Unknown keys are rejected at every level.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use lagflow::presets::{self, SineVelocity, VacuumBubble};
use lagflow::{InitialData, MassGrid, PhysParams, PicardConfig, StepConfig};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub length: f64,
    pub cells: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamSpec {
    pub mu: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProfileSpec {
    Stationary {
        #[serde(default = "one")]
        rho: f64,
        #[serde(default = "one")]
        pressure: f64,
    },
    SineVelocity {
        #[serde(default = "d_amp")]
        amplitude: f64,
        #[serde(default = "one")]
        rho_mean: f64,
        #[serde(default = "d_rho_amp")]
        rho_amplitude: f64,
        #[serde(default = "one")]
        pressure_mean: f64,
        #[serde(default = "d_p_amp")]
        pressure_amplitude: f64,
    },
    VacuumBubble {
        #[serde(default = "d_amp")]
        amplitude: f64,
        #[serde(default = "one")]
        rho_outside: f64,
        #[serde(default = "one")]
        pressure: f64,
        #[serde(default = "d_vac_start")]
        vacuum_start: f64,
        #[serde(default = "d_vac_end")]
        vacuum_end: f64,
    },
    /// Arrays read from a JSON file: `rho0`, `v0`, `pi0` and optionally `J0`.
    Custom { path: PathBuf },
}

fn one() -> f64 {
    1.0
}
fn d_amp() -> f64 {
    SineVelocity::default().amplitude
}
fn d_rho_amp() -> f64 {
    SineVelocity::default().rho_amplitude
}
fn d_p_amp() -> f64 {
    SineVelocity::default().pressure_amplitude
}
fn d_vac_start() -> f64 {
    VacuumBubble::default().vacuum_start
}
fn d_vac_end() -> f64 {
    VacuumBubble::default().vacuum_end
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct CustomProfile {
    rho0: Vec<f64>,
    v0: Vec<f64>,
    pi0: Vec<f64>,
    #[serde(rename = "J0", default)]
    j0: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepSpec {
    pub dt: f64,
    pub t_end: f64,
    #[serde(default = "d_safety")]
    pub dt_safety: f64,
    #[serde(default = "d_true")]
    pub nan_check: bool,
}

fn d_safety() -> f64 {
    0.5
}
fn d_true() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PicardSpec {
    #[serde(rename = "M")]
    pub m: Option<f64>,
    #[serde(rename = "C1")]
    pub c1: Option<f64>,
    pub c_sharp: Option<f64>,
    pub t_window: Option<f64>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub max_halvings: Option<usize>,
    pub time_steps: Option<usize>,
    pub contraction_limit: Option<f64>,
    pub warmup: Option<usize>,
}

impl PicardSpec {
    pub fn to_config(&self) -> PicardConfig {
        let d = PicardConfig::default();
        PicardConfig {
            m: self.m.or(d.m),
            c1: self.c1.or(d.c1),
            c_sharp: self.c_sharp.unwrap_or(d.c_sharp),
            t_window: self.t_window.or(d.t_window),
            tol: self.tol.unwrap_or(d.tol),
            max_iter: self.max_iter.unwrap_or(d.max_iter),
            max_halvings: self.max_halvings.unwrap_or(d.max_halvings),
            time_steps: self.time_steps.unwrap_or(d.time_steps),
            contraction_limit: self.contraction_limit.unwrap_or(d.contraction_limit),
            warmup: self.warmup.unwrap_or(d.warmup),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridSpec,
    pub params: ParamSpec,
    pub profile: ProfileSpec,
    pub step: StepSpec,
    #[serde(default)]
    pub picard: PicardSpec,
    #[serde(default = "d_stride")]
    pub snapshot_stride: usize,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Directory of the config file, used to resolve relative paths.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn d_stride() -> usize {
    1
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: Self = serde_json::from_str(text)
            .map_err(|e| CliError::Config(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Everything that can be checked without building fields.
    pub fn validate(&self) -> Result<(), CliError> {
        self.mass_grid()?;
        self.phys_params()?;
        self.step_config().validate()?;
        self.picard.to_config().validate()?;
        Ok(())
    }

    pub fn mass_grid(&self) -> Result<MassGrid, CliError> {
        Ok(MassGrid::new(self.grid.length, self.grid.cells)?)
    }

    pub fn phys_params(&self) -> Result<PhysParams, CliError> {
        Ok(PhysParams::new(self.params.mu, self.params.gamma)?)
    }

    pub fn step_config(&self) -> StepConfig {
        StepConfig {
            dt: self.step.dt,
            t_end: self.step.t_end,
            dt_safety: self.step.dt_safety,
            nan_check: self.step.nan_check,
            snapshot_stride: self.snapshot_stride,
        }
    }

    pub fn picard_config(&self) -> PicardConfig {
        self.picard.to_config()
    }

    pub fn initial_data(&self) -> Result<InitialData, CliError> {
        let grid = self.mass_grid()?;
        let params = self.phys_params()?;
        let init = match &self.profile {
            ProfileSpec::Stationary { rho, pressure } => {
                presets::stationary(grid, params, *rho, *pressure)?
            }
            ProfileSpec::SineVelocity {
                amplitude,
                rho_mean,
                rho_amplitude,
                pressure_mean,
                pressure_amplitude,
            } => presets::sine_velocity(
                grid,
                params,
                &SineVelocity {
                    amplitude: *amplitude,
                    rho_mean: *rho_mean,
                    rho_amplitude: *rho_amplitude,
                    pressure_mean: *pressure_mean,
                    pressure_amplitude: *pressure_amplitude,
                },
            )?,
            ProfileSpec::VacuumBubble {
                amplitude,
                rho_outside,
                pressure,
                vacuum_start,
                vacuum_end,
            } => presets::vacuum_bubble(
                grid,
                params,
                &VacuumBubble {
                    amplitude: *amplitude,
                    rho_outside: *rho_outside,
                    pressure: *pressure,
                    vacuum_start: *vacuum_start,
                    vacuum_end: *vacuum_end,
                },
            )?,
            ProfileSpec::Custom { path } => {
                let full = self.base_dir.join(path);
                let text = std::fs::read_to_string(&full).map_err(|e| {
                    CliError::Config(format!("cannot read profile {}: {e}", full.display()))
                })?;
                let prof: CustomProfile = serde_json::from_str(&text)
                    .map_err(|e| CliError::Config(format!("invalid profile file: {e}")))?;
                let j0 = prof.j0.unwrap_or_else(|| vec![1.0; grid.cells()]);
                InitialData::with_j0(grid, params, prof.rho0, prof.v0, prof.pi0, j0)?
            }
        };
        Ok(init)
    }

    /// Copy refined by `2^level` in space and time.
    pub fn refined(&self, level: u32) -> Self {
        let f = 1usize << level;
        let mut out = self.clone();
        out.grid.cells *= f;
        out.step.dt /= f as f64;
        out
    }
}
