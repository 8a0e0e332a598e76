//! Named initial profiles. Fields are sampled pointwise at nodes and centers.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::{InitialData, MassGrid, PhysParams};

/// Rest state: `v = 0`, uniform density and pressure.
pub fn stationary(grid: MassGrid, params: PhysParams, rho: f64, pressure: f64) -> Result<InitialData> {
    let n = grid.cells();
    InitialData::new(grid, params, vec![rho; n], vec![0.0; n + 1], vec![pressure; n])
}

/// Smooth non-vacuum data:
/// `rho0 = rho_mean + rho_amplitude cos(2 pi y / L)`,
/// `v0 = amplitude sin(pi y / L)`,
/// `pi0 = pressure_mean + pressure_amplitude cos(pi y / L)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SineVelocity {
    pub amplitude: f64,
    pub rho_mean: f64,
    pub rho_amplitude: f64,
    pub pressure_mean: f64,
    pub pressure_amplitude: f64,
}

impl Default for SineVelocity {
    fn default() -> Self {
        Self {
            amplitude: 0.5,
            rho_mean: 1.0,
            rho_amplitude: 0.25,
            pressure_mean: 1.0,
            pressure_amplitude: 0.2,
        }
    }
}

pub fn sine_velocity(grid: MassGrid, params: PhysParams, spec: &SineVelocity) -> Result<InitialData> {
    let l = grid.length();
    if spec.rho_amplitude.abs() > spec.rho_mean {
        return Err(Error::Config("sine-velocity density would go negative".into()));
    }
    let rho0 = grid
        .center_coords()
        .iter()
        .map(|&y| spec.rho_mean + spec.rho_amplitude * (2.0 * PI * y / l).cos())
        .collect();
    let pi0 = grid
        .center_coords()
        .iter()
        .map(|&y| (spec.pressure_mean + spec.pressure_amplitude * (PI * y / l).cos()).max(0.0))
        .collect();
    InitialData::new(grid, params, rho0, sine_nodes(&grid, spec.amplitude), pi0)
}

/// Density `rho_outside` with an exact vacuum (`rho0 = 0`) on the cells whose
/// centers fall in `(vacuum_start, vacuum_end)` (fractions of `L`),
/// `v0 = amplitude sin(pi y / L)`, uniform pressure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VacuumBubble {
    pub amplitude: f64,
    pub rho_outside: f64,
    pub pressure: f64,
    pub vacuum_start: f64,
    pub vacuum_end: f64,
}

impl Default for VacuumBubble {
    fn default() -> Self {
        Self {
            amplitude: 0.5,
            rho_outside: 1.0,
            pressure: 1.0,
            vacuum_start: 1.0 / 3.0,
            vacuum_end: 2.0 / 3.0,
        }
    }
}

pub fn vacuum_bubble(grid: MassGrid, params: PhysParams, spec: &VacuumBubble) -> Result<InitialData> {
    if !(0.0 <= spec.vacuum_start && spec.vacuum_start < spec.vacuum_end && spec.vacuum_end <= 1.0) {
        return Err(Error::Config(
            "vacuum interval must satisfy 0 <= start < end <= 1".into(),
        ));
    }
    let l = grid.length();
    let (a, b) = (spec.vacuum_start * l, spec.vacuum_end * l);
    let rho0 = grid
        .center_coords()
        .iter()
        .map(|&y| if y > a && y < b { 0.0 } else { spec.rho_outside })
        .collect();
    let n = grid.cells();
    InitialData::new(
        grid,
        params,
        rho0,
        sine_nodes(&grid, spec.amplitude),
        vec![spec.pressure; n],
    )
}

fn sine_nodes(grid: &MassGrid, amplitude: f64) -> Vec<f64> {
    let n = grid.cells();
    let l = grid.length();
    let mut v: Vec<f64> = grid
        .node_coords()
        .iter()
        .map(|&y| amplitude * (PI * y / l).sin())
        .collect();
    v[0] = 0.0;
    v[n] = 0.0;
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vacuum_bubble_has_middle_third_vacuum() {
        let g = MassGrid::new(1.0, 30).unwrap();
        let init = vacuum_bubble(g, PhysParams::new(1.0, 1.4).unwrap(), &VacuumBubble::default()).unwrap();
        let vac = init.rho0.iter().filter(|&&r| r == 0.0).count();
        assert_eq!(vac, 10);
        assert_eq!(init.rho0[0], 1.0);
        assert_eq!(init.rho0[15], 0.0);
    }

    #[test]
    fn sine_velocity_boundary_pinned() {
        let g = MassGrid::new(2.0, 17).unwrap();
        let init = sine_velocity(g, PhysParams::new(1.0, 1.4).unwrap(), &SineVelocity::default()).unwrap();
        assert_eq!(init.v0[0], 0.0);
        assert_eq!(init.v0[17], 0.0);
        assert!(init.rho_floor() > 0.0);
    }
}
