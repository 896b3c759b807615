//! Risk measures gating the commit decision: the rendezvous variance ρ_R and
//! the downside energy potential ρ.
//!
//! ρ is the extra energy the rendezvous branch would need if the driver ended
//! up at the worse end of the `mean ± γ·σ` band at the rendezvous time, with
//! t₂ and t₃ held fixed so the vehicle compensates with speed. It is +∞ when
//! that endpoint cannot be reached at `v_max`.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::behavior::PositionPrediction;
use crate::energy::{min_energy_to_reach, EnergyParams};
use crate::error::{RdvError, Result};
use crate::ocp::MissionPlan;
use crate::path::RoadGeometry;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Decision {
    Proceed,
    Abort,
}

/// How the downside threshold E_risk_max is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "value", rename_all = "snake_case")]
pub enum ThresholdMode {
    /// A fixed number of joules.
    Constant(f64),
    /// A fraction of the energy remaining at decision time.
    FractionOfRemaining(f64),
}

impl ThresholdMode {
    pub fn threshold(&self, remaining_energy: f64) -> f64 {
        match *self {
            ThresholdMode::Constant(j) => j,
            ThresholdMode::FractionOfRemaining(f) => f * remaining_energy,
        }
    }
}

impl Default for ThresholdMode {
    fn default() -> Self {
        ThresholdMode::Constant(200.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Endpoint {
    pub theta: f64,
    pub point: Vector2<f64>,
    /// E₁ + E₂' + E₃' for the replanned legs, `None` if unreachable.
    pub branch_energy: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Downside {
    /// ρ in joules; `f64::INFINITY` when an endpoint is unreachable.
    pub rho: f64,
    /// Lower and upper confidence endpoints.
    pub endpoints: [Endpoint; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    /// ρ_R = Var[θ_d(T_R)].
    pub rho_r: f64,
    pub downside: Downside,
    pub threshold: f64,
    /// ρ ≤ threshold.
    pub within_threshold: bool,
}

impl RiskReport {
    pub fn rho(&self) -> f64 {
        self.downside.rho
    }
}

pub fn rendezvous_variance(prediction: &PositionPrediction) -> f64 {
    prediction.variance
}

/// Extra energy of the rendezvous branch when the driver is at path
/// position `theta` at the planned rendezvous time.
pub fn extra_energy_at(
    plan: &MissionPlan,
    theta: f64,
    geometry: &RoadGeometry,
    params: &EnergyParams,
) -> Result<Option<f64>> {
    let energy = branch_energy_with_times(plan, theta, plan.durations[1], plan.durations[2], geometry, params)?;
    Ok(energy.map(|e| e - plan.rendezvous_energy()))
}

fn branch_energy_with_times(
    plan: &MissionPlan,
    theta: f64,
    t2: f64,
    t3: f64,
    geometry: &RoadGeometry,
    params: &EnergyParams,
) -> Result<Option<f64>> {
    if !(t2 > 0.0) || !(t3 > 0.0) {
        return Err(RdvError::Input(format!(
            "rendezvous legs need positive durations, got t2 = {t2}, t3 = {t3}"
        )));
    }
    let q = geometry.point(theta);
    let pnr = plan.waypoints[0];
    let landing = plan.waypoints[2];
    let Some(e2) = min_energy_to_reach(pnr, q, t2, params)? else {
        return Ok(None);
    };
    let Some(e3) = min_energy_to_reach(q, landing, t3, params)? else {
        return Ok(None);
    };
    Ok(Some(plan.energies[0] + e2 + e3))
}

fn downside_with_times(
    plan: &MissionPlan,
    prediction: &PositionPrediction,
    t2: f64,
    t3: f64,
    geometry: &RoadGeometry,
    params: &EnergyParams,
    gamma: f64,
) -> Result<Downside> {
    let half = gamma * prediction.std_dev();
    let thetas = [prediction.mean - half, prediction.mean + half];
    let mut rho: f64 = 0.0;
    let mut endpoints = [Endpoint {
        theta: 0.0,
        point: Vector2::zeros(),
        branch_energy: None,
    }; 2];
    let nominal = plan.rendezvous_energy();
    for (slot, &theta) in endpoints.iter_mut().zip(&thetas) {
        let branch = branch_energy_with_times(plan, theta, t2, t3, geometry, params)?;
        *slot = Endpoint {
            theta,
            point: geometry.point(theta),
            branch_energy: branch,
        };
        rho = match branch {
            Some(e) => rho.max(e - nominal),
            None => f64::INFINITY,
        };
    }
    Ok(Downside { rho, endpoints })
}

/// ρ = max over the two confidence endpoints of the replanned-branch energy
/// minus the planned one, floored at zero.
pub fn downside_potential(
    plan: &MissionPlan,
    prediction: &PositionPrediction,
    geometry: &RoadGeometry,
    params: &EnergyParams,
    gamma: f64,
) -> Result<Downside> {
    let [_, t2, t3, _] = plan.durations;
    downside_with_times(plan, prediction, t2, t3, geometry, params, gamma)
}

/// Non-normative early-abort measure ρ_A: the downside potential with the
/// rendezvous legs squeezed into the abort branch's duration t₄ (t₂ and t₃
/// rescaled proportionally).
pub fn abort_timing_potential(
    plan: &MissionPlan,
    prediction: &PositionPrediction,
    geometry: &RoadGeometry,
    params: &EnergyParams,
    gamma: f64,
) -> Result<f64> {
    let [_, t2, t3, t4] = plan.durations;
    let k = t4 / (t2 + t3);
    Ok(downside_with_times(plan, prediction, t2 * k, t3 * k, geometry, params, gamma)?.rho)
}

pub fn assess(
    plan: &MissionPlan,
    prediction: &PositionPrediction,
    geometry: &RoadGeometry,
    params: &EnergyParams,
    gamma: f64,
    threshold: f64,
) -> Result<RiskReport> {
    let downside = downside_potential(plan, prediction, geometry, params, gamma)?;
    Ok(RiskReport {
        rho_r: rendezvous_variance(prediction),
        downside,
        threshold,
        within_threshold: downside.rho <= threshold,
    })
}

/// PROCEED iff ρ ≤ E_risk_max; an unreachable endpoint always aborts.
pub fn commit_check(rho: f64, e_risk_max: f64) -> Decision {
    if rho.is_finite() && rho <= e_risk_max {
        Decision::Proceed
    } else {
        Decision::Abort
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::behavior::Anchor;
    use approx::assert_relative_eq;

    fn plan(x1: Vector2<f64>, landing: Vector2<f64>, theta: f64, t: [f64; 4]) -> MissionPlan {
        let geom = RoadGeometry::diagonal();
        let params = EnergyParams::default();
        let x2 = geom.point(theta);
        let origin = Vector2::new(500.0, 0.0);
        let wp = [x1, x2, landing, origin];
        let v = crate::ocp::velocities_from_waypoints(origin, &wp, &t, 0.1).unwrap();
        let energies = std::array::from_fn(|i| params.power(v[i].norm()) * t[i]);
        MissionPlan {
            origin,
            clock: 0.0,
            waypoints: wp,
            velocities: v,
            durations: t,
            rendezvous_time: t[0] + t[1],
            energies,
            predicted_theta: theta,
            predicted_variance: 0.0,
            cost: 0.0,
            multipliers: Vec::new(),
        }
    }

    fn pred(mean: f64, variance: f64) -> PositionPrediction {
        PositionPrediction {
            mean,
            variance,
            anchor: Anchor { time: 0.0, theta: 0.0 },
            horizon_end: 20.0,
        }
    }

    #[test]
    fn zero_variance_has_no_downside() {
        let p = plan(Vector2::new(400.0, 200.0), Vector2::new(500.0, 0.0), 300.0, [10.0, 10.0, 30.0, 20.0]);
        let d = downside_potential(&p, &pred(300.0, 0.0), &RoadGeometry::diagonal(), &EnergyParams::default(), 2.0)
            .unwrap();
        assert!(d.rho.abs() < 1e-9, "{}", d.rho);
    }

    #[test]
    fn symmetric_endpoints_give_equal_extra() {
        // x1 and landing both on the normal through p(300), so ±δ along the road are mirror images
        let p = plan(Vector2::new(400.0, 200.0), Vector2::new(500.0, 100.0), 300.0, [10.0, 10.0, 20.0, 20.0]);
        let geom = RoadGeometry::diagonal();
        let params = EnergyParams::default();
        let d = downside_potential(&p, &pred(300.0, 25.0), &geom, &params, 2.0).unwrap();
        let lo = d.endpoints[0].branch_energy.unwrap();
        let hi = d.endpoints[1].branch_energy.unwrap();
        assert_relative_eq!(lo, hi, epsilon = 1e-9);
        assert_relative_eq!(d.rho, lo - p.rendezvous_energy(), epsilon = 1e-9);
    }

    #[test]
    fn unreachable_endpoint_is_infinite() {
        let p = plan(Vector2::new(400.0, 200.0), Vector2::new(500.0, 0.0), 300.0, [10.0, 10.0, 30.0, 20.0]);
        let d = downside_potential(&p, &pred(300.0, 1e6), &RoadGeometry::diagonal(), &EnergyParams::default(), 2.0)
            .unwrap();
        assert_eq!(d.rho, f64::INFINITY);
        assert_eq!(commit_check(d.rho, 200.0), Decision::Abort);
    }

    #[test]
    fn commit_threshold_is_inclusive() {
        assert_eq!(commit_check(150.0, 200.0), Decision::Proceed);
        assert_eq!(commit_check(200.0, 200.0), Decision::Proceed);
        assert_eq!(commit_check(200.000001, 200.0), Decision::Abort);
        assert_eq!(commit_check(f64::INFINITY, f64::INFINITY), Decision::Abort);
    }

    #[test]
    fn threshold_modes() {
        assert_eq!(ThresholdMode::Constant(200.0).threshold(1234.0), 200.0);
        assert_eq!(ThresholdMode::FractionOfRemaining(0.1).threshold(3000.0), 300.0);
    }

    #[test]
    fn abort_timing_equals_downside_when_durations_match() {
        let p = plan(Vector2::new(400.0, 200.0), Vector2::new(500.0, 0.0), 300.0, [10.0, 10.0, 30.0, 40.0]);
        let geom = RoadGeometry::diagonal();
        let params = EnergyParams::default();
        let pr = pred(300.0, 16.0);
        let a = abort_timing_potential(&p, &pr, &geom, &params, 2.0).unwrap();
        let d = downside_potential(&p, &pr, &geom, &params, 2.0).unwrap();
        assert_relative_eq!(a, d.rho, epsilon = 1e-9);
    }
}
