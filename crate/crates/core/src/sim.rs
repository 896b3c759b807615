//! Ground-truth world: the true driver on the road, noisy sensors, and the
//! end-to-end scenario runner.
//!
//! The driver is integrated with left-endpoint Euler at the control period:
//! `θ ← θ + a(t)·θ̇_h(t)·T_s`. Noise comes from a ChaCha8 stream seeded with
//! the scenario seed; each sample draws one standard normal for position and
//! then one for velocity, even when the corresponding σ is zero, so streams
//! stay aligned across noise levels.

use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::config::{GainChange, ScenarioConfig};
use crate::error::{RdvError, Result};
use crate::mission::{persistent_safety_audit, MissionController};
use crate::path::VelocityProfile;
use crate::trace::{RunSummary, RunTrace, TraceHeader};

/// True driver behavior θ̇_d = a(t)·θ̇_h(t).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriverTruth {
    pub gain: f64,
    pub schedule: Vec<GainChange>,
    pub theta: f64,
}

impl DriverTruth {
    pub fn constant(gain: f64, theta: f64) -> Self {
        Self {
            gain,
            schedule: Vec::new(),
            theta,
        }
    }

    pub fn gain_at(&self, t: f64) -> f64 {
        self.schedule
            .iter()
            .rev()
            .find(|g| t >= g.from)
            .map_or(self.gain, |g| g.gain)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TelemetrySample {
    pub time: f64,
    /// Measured path position θ_d.
    pub theta: f64,
    /// Measured driver speed θ̇_d.
    pub speed: f64,
    /// Historical speed θ̇_h at `time`.
    pub historical_speed: f64,
}

#[derive(Debug, Clone)]
pub struct World {
    clock: f64,
    step: f64,
    driver: DriverTruth,
    profile: VelocityProfile,
    sigma: f64,
    sigma_pos: f64,
    rng: ChaCha8Rng,
}

impl World {
    pub fn new(
        driver: DriverTruth,
        profile: VelocityProfile,
        sigma: f64,
        sigma_pos: f64,
        step: f64,
        seed: u64,
    ) -> Self {
        Self {
            clock: profile.domain().0.max(0.0),
            step,
            driver,
            profile,
            sigma,
            sigma_pos,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn from_config(cfg: &ScenarioConfig) -> Result<Self> {
        let driver = DriverTruth {
            gain: cfg.driver.gain,
            schedule: cfg.driver.schedule.clone(),
            theta: cfg.driver.initial_theta,
        };
        Ok(Self::new(
            driver,
            cfg.velocity_profile()?,
            cfg.driver.sigma,
            cfg.driver.position_noise(),
            cfg.run.step,
            cfg.run.seed,
        ))
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn driver(&self) -> &DriverTruth {
        &self.driver
    }

    fn true_speed(&self) -> Result<f64> {
        let h = self.profile.velocity_at(self.clock)?;
        Ok(self.driver.gain_at(self.clock) * h)
    }

    /// True path position at `t` within the current step, on the Euler chord.
    pub fn theta_at(&self, t: f64) -> f64 {
        let rate = self.driver.gain_at(self.clock) * self.profile.value(self.clock);
        self.driver.theta + rate * (t - self.clock)
    }

    /// Noisy measurement at the current clock.
    pub fn sense(&mut self) -> Result<TelemetrySample> {
        let h = self.profile.velocity_at(self.clock)?;
        let speed = self.true_speed()?;
        let n_pos: f64 = StandardNormal.sample(&mut self.rng);
        let n_vel: f64 = StandardNormal.sample(&mut self.rng);
        Ok(TelemetrySample {
            time: self.clock,
            theta: self.driver.theta + self.sigma_pos * n_pos,
            speed: speed + self.sigma * n_vel,
            historical_speed: h,
        })
    }

    /// Euler step of the driver; fails once the clock leaves the profile.
    pub fn step(&mut self) -> Result<()> {
        let speed = self.true_speed()?;
        self.driver.theta += speed * self.step;
        self.clock += self.step;
        Ok(())
    }

    /// Senses at the current clock, then steps.
    pub fn advance(&mut self) -> Result<TelemetrySample> {
        let s = self.sense()?;
        self.step()?;
        Ok(s)
    }
}

/// A finished run plus wall-clock solve times (kept out of the trace so
/// traces stay byte-deterministic).
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trace: RunTrace,
    pub solve_times: Vec<Duration>,
}

pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunTrace> {
    Ok(run_scenario_timed(cfg)?.trace)
}

pub fn run_scenario_timed(cfg: &ScenarioConfig) -> Result<RunOutput> {
    cfg.validate().map_err(|issues| {
        RdvError::Config(issues.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))
    })?;
    let started = Instant::now();
    let mut world = World::from_config(cfg)?;
    let mut ctl = MissionController::new(cfg)?;
    let mut rows = Vec::new();
    let mut stop_reason = None;
    while !ctl.phase().is_terminal() {
        if world.clock() >= cfg.run.duration_cap {
            stop_reason = Some(format!("duration cap {} s reached", cfg.run.duration_cap));
            break;
        }
        let sample = match world.sense() {
            Ok(s) => s,
            Err(e) => {
                stop_reason = Some(format!("end of scenario: {e}"));
                break;
            }
        };
        let truth = |t: f64| world.theta_at(t);
        rows.push(ctl.tick(&sample, &truth)?);
        if ctl.phase().is_terminal() {
            break;
        }
        if let Err(e) = world.step() {
            stop_reason = Some(format!("end of scenario: {e}"));
            break;
        }
    }
    if let Some(r) = &stop_reason {
        log::warn!("run stopped before a terminal phase: {r}");
    }
    log::debug!("run finished in {:?}", started.elapsed());

    let audit = persistent_safety_audit(&rows);
    let state = ctl.state();
    let summary = RunSummary::new(state, rows.len(), audit, ctl.solve_count(), ctl.nonconvergent_count(), stop_reason);
    Ok(RunOutput {
        trace: RunTrace {
            header: TraceHeader::new(cfg),
            rows,
            summary,
        },
        solve_times: ctl.solve_times().to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn world(gain: f64, sigma: f64, seed: u64) -> World {
        World::new(
            DriverTruth::constant(gain, 0.0),
            VelocityProfile::reference(),
            sigma,
            sigma / 10.0,
            1.0,
            seed,
        )
    }

    #[test]
    fn left_endpoint_euler_position() {
        let mut w = world(1.0, 0.0, 7);
        for _ in 0..20 {
            w.advance().unwrap();
        }
        let expected: f64 = (0..20).map(|k| 10.0 * (1.0 - k as f64 / 200.0)).sum();
        assert!((w.driver().theta - expected).abs() < 1e-12);
        assert!((w.driver().theta - 190.5).abs() < 1e-12);
    }

    #[test]
    fn noiseless_speed_is_exact() {
        let mut w = world(1.1, 0.0, 3);
        for _ in 0..10 {
            let s = w.advance().unwrap();
            assert_eq!(s.speed, 1.1 * s.historical_speed);
        }
    }

    #[test]
    fn same_seed_same_stream() {
        let mut a = world(1.1, 3.0, 42);
        let mut b = world(1.1, 3.0, 42);
        let mut c = world(1.1, 3.0, 43);
        let sa: Vec<_> = (0..30).map(|_| a.advance().unwrap()).collect();
        let sb: Vec<_> = (0..30).map(|_| b.advance().unwrap()).collect();
        let sc: Vec<_> = (0..30).map(|_| c.advance().unwrap()).collect();
        assert_eq!(sa, sb);
        assert_ne!(sa, sc);
    }

    #[test]
    fn timestamps_step_by_period() {
        let mut w = world(1.0, 1.0, 1);
        let ts: Vec<f64> = (0..5).map(|_| w.advance().unwrap().time).collect();
        assert_eq!(ts, vec![0.0, 1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn gain_schedule_switches() {
        let mut d = DriverTruth::constant(1.1, 0.0);
        d.schedule = vec![GainChange { from: 30.0, gain: 1.6 }];
        assert_eq!(d.gain_at(29.9), 1.1);
        assert_eq!(d.gain_at(30.0), 1.6);
    }

    #[test]
    fn past_profile_end_is_an_error() {
        let mut w = World::new(
            DriverTruth::constant(1.0, 0.0),
            VelocityProfile::polynomial(vec![10.0, -0.05], 0.0, 3.0).unwrap(),
            0.0,
            0.0,
            1.0,
            1,
        );
        for _ in 0..4 {
            w.advance().unwrap();
        }
        assert!(matches!(w.advance(), Err(RdvError::Domain { .. })));
    }
}
