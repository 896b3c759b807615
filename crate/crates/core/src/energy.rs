//! Single-integrator kinematics with a quadratic-plus-hover energy drain.
//!
//! Flying at constant velocity `v` for `t` seconds drains
//! `(m|v|²/2 + αm)·t` joules. The kinetic term is a drain rate, not stored
//! energy, so nothing is recovered when the vehicle slows down.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::error::{RdvError, Result};

/// Relative slack on the speed limit for round-off in constructed velocities.
pub const SPEED_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyParams {
    /// Vehicle mass, kg.
    pub mass: f64,
    /// Hover consumption constant α, J/(kg·s).
    pub hover: f64,
    /// Speed limit, m/s.
    pub v_max: f64,
}

impl EnergyParams {
    pub fn new(mass: f64, hover: f64, v_max: f64) -> Result<Self> {
        let p = Self { mass, hover, v_max };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("mass", self.mass), ("hover", self.hover), ("v_max", self.v_max)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(RdvError::Config(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Drain rate at speed `speed`, W.
    pub fn power(&self, speed: f64) -> f64 {
        self.mass * (0.5 * speed * speed + self.hover)
    }

    fn speed_ok(&self, speed: f64) -> bool {
        speed <= self.v_max * (1.0 + SPEED_TOLERANCE)
    }
}

impl Default for EnergyParams {
    fn default() -> Self {
        Self {
            mass: 1.0,
            hover: 5.0,
            v_max: 15.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UasState {
    pub position: Vector2<f64>,
    /// Remaining energy E_r, J.
    pub energy: f64,
    /// Mission clock, s.
    pub clock: f64,
}

/// Result of one integration step; `depleted` is set when the drain exceeded
/// the remaining energy, in which case `state.energy` is clamped to zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub state: UasState,
    pub depleted: bool,
}

/// x_k = x_{k-1} + v·T_s, E_k = E_{k-1} − (m|v|²/2 + αm)·T_s.
pub fn step(state: &UasState, v: Vector2<f64>, params: &EnergyParams, dt: f64) -> Result<StepOutcome> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(RdvError::Input(format!("time step must be positive, got {dt}")));
    }
    let speed = v.norm();
    if !params.speed_ok(speed) {
        return Err(RdvError::Input(format!(
            "commanded speed {speed:.6} m/s exceeds v_max = {} m/s",
            params.v_max
        )));
    }
    let energy = state.energy - params.power(speed) * dt;
    let depleted = energy < 0.0;
    Ok(StepOutcome {
        state: UasState {
            position: state.position + v * dt,
            energy: energy.max(0.0),
            clock: state.clock + dt,
        },
        depleted,
    })
}

/// Energy of holding velocity `v` for `t` seconds.
pub fn segment_energy(v: Vector2<f64>, t: f64, params: &EnergyParams) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(RdvError::Input(format!("segment duration must be non-negative, got {t}")));
    }
    Ok(params.power(v.norm()) * t)
}

/// Cheapest energy to cover `from → to` in exactly `t` seconds, or `None`
/// when the straight-line speed would exceed `v_max`.
pub fn min_energy_to_reach(
    from: Vector2<f64>,
    to: Vector2<f64>,
    t: f64,
    params: &EnergyParams,
) -> Result<Option<f64>> {
    if !(t > 0.0) {
        return Err(RdvError::Input(format!("reach time must be positive, got {t}")));
    }
    let speed = (to - from).norm() / t;
    if !params.speed_ok(speed) {
        return Ok(None);
    }
    Ok(Some(params.power(speed) * t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn p() -> EnergyParams {
        EnergyParams::default()
    }

    fn origin(energy: f64) -> UasState {
        UasState {
            position: Vector2::zeros(),
            energy,
            clock: 0.0,
        }
    }

    #[test]
    fn step_drains_kinetic_plus_hover() {
        let out = step(&origin(1000.0), Vector2::new(10.0, 0.0), &p(), 10.0).unwrap();
        assert_relative_eq!(1000.0 - out.state.energy, 550.0, epsilon = 1e-12);
        assert_eq!(out.state.position, Vector2::new(100.0, 0.0));
        assert_eq!(out.state.clock, 10.0);
        assert!(!out.depleted);

        let hover = step(&origin(1000.0), Vector2::zeros(), &p(), 1.0).unwrap();
        assert_relative_eq!(1000.0 - hover.state.energy, 5.0, epsilon = 1e-12);
    }

    #[test]
    fn step_rejects_overspeed_and_flags_depletion() {
        assert!(step(&origin(1e6), Vector2::new(15.1, 0.0), &p(), 1.0).is_err());
        assert!(step(&origin(1e6), Vector2::new(1.0, 0.0), &p(), 0.0).is_err());
        let out = step(&origin(3.0), Vector2::zeros(), &p(), 1.0).unwrap();
        assert!(out.depleted);
        assert_eq!(out.state.energy, 0.0);
    }

    #[test]
    fn unit_steps_match_one_segment() {
        let v = Vector2::new(1.0, 1.0);
        let mut s = origin(10_000.0);
        for _ in 0..100 {
            s = step(&s, v, &p(), 1.0).unwrap().state;
        }
        let e = segment_energy(v, 100.0, &p()).unwrap();
        assert_relative_eq!(10_000.0 - s.energy, e, epsilon = 1e-9);
        assert_relative_eq!(s.position.x, 100.0, epsilon = 1e-9);
    }

    #[test]
    fn segment_energy_examples() {
        assert_relative_eq!(segment_energy(Vector2::zeros(), 7.0, &p()).unwrap(), 35.0);
        assert_relative_eq!(segment_energy(Vector2::new(3.0, 4.0), 2.0, &p()).unwrap(), 35.0);
        assert!(segment_energy(Vector2::zeros(), -1.0, &p()).is_err());
    }

    #[test]
    fn reach_examples() {
        let a = Vector2::new(3.0, 4.0);
        assert_relative_eq!(min_energy_to_reach(a, a, 10.0, &p()).unwrap().unwrap(), 50.0);
        let b = a + Vector2::new(100.0, 0.0);
        assert_relative_eq!(min_energy_to_reach(a, b, 10.0, &p()).unwrap().unwrap(), 550.0);
        let c = a + Vector2::new(0.0, 200.0);
        assert_eq!(min_energy_to_reach(a, c, 10.0, &p()).unwrap(), None);
        assert!(min_energy_to_reach(a, c, 0.0, &p()).is_err());
    }
}
