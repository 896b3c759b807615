//! The mission loop: learn → plan → gate → act, once per control period.
//!
//! While gathering, every tick folds the new sample into the driver model,
//! re-solves the rendezvous problem (warm-started from the previous plan) and
//! flies the first segment toward the PNR. Once the PNR is at most `ε` seconds
//! away, the downside check decides between the rendezvous and the abort
//! branch, and the chosen branch is flown to completion.
//!
//! Persistent safety comes from the plan itself: every plan held while
//! gathering keeps an abort branch that fits the remaining energy and time.
//! If a re-solve fails, the previous plan is kept and its first segment keeps
//! counting down.

use std::collections::VecDeque;
use std::str::FromStr;
use std::time::{Duration, Instant};

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::behavior::{predict_position, regress, Anchor, BehaviorDataset, BehaviorPosterior, BehaviorPrior};
use crate::config::ScenarioConfig;
use crate::energy::{step, EnergyParams, UasState};
use crate::error::{RdvError, Result};
use crate::ocp::{solve, MissionPlan, OcpInputs, SolveOutcome, SolverSettings};
use crate::path::{BasisIntegralTable, RoadGeometry};
use crate::risk::{abort_timing_potential, assess, commit_check, Decision, RiskReport, ThresholdMode};
use crate::trace::TelemetryRow;

/// Slack used when auditing rows rounded to three decimals.
const AUDIT_TOL: f64 = 2e-3;
const LEG_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Phase {
    Gathering,
    CommittedRendezvous,
    CommittedAbort,
    CompletedSuccess,
    CompletedAborted,
    /// Rendezvous branch flown but the driver was not within the capture radius.
    CompletedMiss,
    FailedEnergy,
}

impl Phase {
    pub const ALL: [Phase; 7] = [
        Phase::Gathering,
        Phase::CommittedRendezvous,
        Phase::CommittedAbort,
        Phase::CompletedSuccess,
        Phase::CompletedAborted,
        Phase::CompletedMiss,
        Phase::FailedEnergy,
    ];

    pub fn is_terminal(self) -> bool {
        matches!(
            self,
            Phase::CompletedSuccess | Phase::CompletedAborted | Phase::CompletedMiss | Phase::FailedEnergy
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Gathering => "GATHERING",
            Phase::CommittedRendezvous => "COMMITTED_RENDEZVOUS",
            Phase::CommittedAbort => "COMMITTED_ABORT",
            Phase::CompletedSuccess => "COMPLETED_SUCCESS",
            Phase::CompletedAborted => "COMPLETED_ABORTED",
            Phase::CompletedMiss => "COMPLETED_MISS",
            Phase::FailedEnergy => "FAILED_ENERGY",
        }
    }

    fn rank(self) -> u8 {
        match self {
            Phase::Gathering => 0,
            Phase::CommittedRendezvous | Phase::CommittedAbort => 1,
            _ => 2,
        }
    }
}

impl FromStr for Phase {
    type Err = RdvError;

    fn from_str(s: &str) -> Result<Self> {
        Phase::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| RdvError::Input(format!("unknown phase {s:?}")))
    }
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// What planning did on a tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    /// Re-solve infeasible; the previous plan was kept.
    InfeasibleStored,
    /// Re-solve infeasible and no plan yet; hovering.
    InfeasibleHover,
    /// Re-solve hit the iteration cap; the previous plan was kept.
    NonconvergentStored,
    NonconvergentHover,
    /// Committed; no planning.
    Executing,
}

impl SolveStatus {
    const ALL: [SolveStatus; 6] = [
        SolveStatus::Optimal,
        SolveStatus::InfeasibleStored,
        SolveStatus::InfeasibleHover,
        SolveStatus::NonconvergentStored,
        SolveStatus::NonconvergentHover,
        SolveStatus::Executing,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::InfeasibleStored => "infeasible_stored",
            SolveStatus::InfeasibleHover => "infeasible_hover",
            SolveStatus::NonconvergentStored => "nonconvergent_stored",
            SolveStatus::NonconvergentHover => "nonconvergent_hover",
            SolveStatus::Executing => "executing",
        }
    }
}

impl FromStr for SolveStatus {
    type Err = RdvError;

    fn from_str(s: &str) -> Result<Self> {
        SolveStatus::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| RdvError::Input(format!("unknown solve status {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MissionState {
    pub phase: Phase,
    pub uas: UasState,
    pub dataset: BehaviorDataset,
    pub posterior: Option<BehaviorPosterior>,
    pub plan: Option<MissionPlan>,
    pub risk: Option<RiskReport>,
    /// Commit once t₁ ≤ ε.
    pub epsilon: f64,
    pub decision: Option<Decision>,
    pub decision_time: Option<f64>,
    pub capture_error: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum LegKind {
    Pnr,
    Rendezvous,
    Landing,
    Abort,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Leg {
    kind: LegKind,
    velocity: Vector2<f64>,
    remaining: f64,
}

/// Mission-level constants lifted from the scenario.
#[derive(Debug, Clone)]
struct Setup {
    geometry: RoadGeometry,
    table: BasisIntegralTable,
    prior: BehaviorPrior,
    fixed_posterior: Option<BehaviorPosterior>,
    params: EnergyParams,
    settings: SolverSettings,
    landing: Vector2<f64>,
    abort_site: Vector2<f64>,
    deadline: f64,
    dwell: f64,
    step: f64,
    gamma: f64,
    threshold: ThresholdMode,
    variance_weight: f64,
    reserve: f64,
    capture_radius: f64,
    reaim: bool,
    abort_trigger: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct MissionController {
    setup: Setup,
    state: MissionState,
    legs: VecDeque<Leg>,
    captured: Option<bool>,
    ticks: u64,
    solves: usize,
    nonconvergent: usize,
    solve_times: Vec<Duration>,
}

impl MissionController {
    pub fn new(cfg: &ScenarioConfig) -> Result<Self> {
        let setup = Setup {
            geometry: cfg.road()?,
            table: cfg.basis_table()?,
            prior: cfg.prior()?,
            fixed_posterior: cfg.fixed_posterior(),
            params: cfg.energy_params(),
            settings: cfg.solver_settings(),
            landing: cfg.landing(),
            abort_site: cfg.abort_site(),
            deadline: cfg.mission.t_max,
            dwell: cfg.mission.dwell,
            step: cfg.run.step,
            gamma: cfg.risk.gamma,
            threshold: cfg.risk.threshold,
            variance_weight: cfg.risk.variance_weight,
            reserve: cfg.mission.energy_reserve,
            capture_radius: cfg.mission.capture_radius,
            reaim: cfg.mission.reaim,
            abort_trigger: cfg.risk.abort_trigger.then_some(cfg.risk.abort_trigger_threshold),
        };
        let state = MissionState {
            phase: Phase::Gathering,
            uas: UasState {
                position: cfg.start(),
                energy: cfg.vehicle.initial_energy,
                clock: cfg.velocity_profile()?.domain().0.max(0.0),
            },
            dataset: BehaviorDataset::new(),
            posterior: None,
            plan: None,
            risk: None,
            epsilon: cfg.mission.epsilon,
            decision: None,
            decision_time: None,
            capture_error: None,
        };
        Ok(Self {
            setup,
            state,
            legs: VecDeque::new(),
            captured: None,
            ticks: 0,
            solves: 0,
            nonconvergent: 0,
            solve_times: Vec::new(),
        })
    }

    pub fn state(&self) -> &MissionState {
        &self.state
    }

    pub fn phase(&self) -> Phase {
        self.state.phase
    }

    pub fn solve_times(&self) -> &[Duration] {
        &self.solve_times
    }

    pub fn solve_count(&self) -> usize {
        self.solves
    }

    pub fn nonconvergent_count(&self) -> usize {
        self.nonconvergent
    }

    /// One control period. `truth(t)` is the true driver path position at any `t`
    /// inside the period; it is only consulted for the capture check.
    pub fn tick(&mut self, sample: &crate::sim::TelemetrySample, truth: &dyn Fn(f64) -> f64) -> Result<TelemetryRow> {
        if self.state.phase.is_terminal() {
            return Err(RdvError::Input("mission already finished".into()));
        }
        let clock = self.state.uas.clock;
        if (sample.time - clock).abs() > 1e-9 {
            return Err(RdvError::Input(format!(
                "sample at t = {} does not match mission clock {clock}",
                sample.time
            )));
        }
        self.learn(sample)?;
        let anchor = Anchor {
            time: sample.time,
            theta: sample.theta,
        };
        let phase_at_start = self.state.phase;
        let mut iterations = 0;
        let (status, decision) = if phase_at_start == Phase::Gathering {
            let (status, it) = self.plan(anchor)?;
            iterations = it;
            (status, self.decide(anchor)?)
        } else {
            if self.setup.reaim {
                self.reaim(anchor)?;
            }
            (SolveStatus::Executing, None)
        };

        let row = self.row(sample, phase_at_start, decision, status, iterations as u64, truth(clock));
        self.fly(self.setup.step, truth)?;
        self.ticks += 1;
        Ok(row)
    }

    fn learn(&mut self, sample: &crate::sim::TelemetrySample) -> Result<()> {
        self.state.dataset.append(sample.speed, sample.historical_speed)?;
        let post = match &self.setup.fixed_posterior {
            Some(p) => p.clone(),
            None => match &self.state.posterior {
                Some(prev) if prev.sample_count() + 1 == self.state.dataset.len() => {
                    prev.updated(sample.speed, sample.historical_speed)?
                }
                _ => regress(&self.setup.prior, &self.state.dataset, self.setup.table.basis())?,
            },
        };
        self.state.posterior = Some(post);
        Ok(())
    }

    fn inputs<'a>(&'a self, post: &'a BehaviorPosterior, anchor: Anchor) -> OcpInputs<'a> {
        let s = &self.setup;
        OcpInputs {
            x0: self.state.uas.position,
            energy: self.state.uas.energy,
            clock: self.state.uas.clock,
            posterior: post,
            table: &s.table,
            geometry: &s.geometry,
            anchor,
            landing: s.landing,
            abort: s.abort_site,
            horizon: s.deadline - self.state.uas.clock,
            dwell: s.dwell,
            params: s.params,
            variance_weight: s.variance_weight,
            energy_reserve: s.reserve,
        }
    }

    fn plan(&mut self, anchor: Anchor) -> Result<(SolveStatus, usize)> {
        let post = self.state.posterior.clone().expect("posterior after learn");
        let started = Instant::now();
        let outcome = solve(&self.inputs(&post, anchor), self.state.plan.as_ref(), &self.setup.settings);
        self.solve_times.push(started.elapsed());
        self.solves += 1;
        let clock = self.state.uas.clock;
        let stored = self.state.plan.take().map(|p| advance_plan(&p, clock));
        let (status, iterations) = match outcome {
            Ok(SolveOutcome::Optimal { plan, stats }) => {
                self.state.plan = Some(plan);
                (SolveStatus::Optimal, stats.outer_iterations)
            }
            Ok(SolveOutcome::Infeasible { stats }) => {
                let status = if stored.is_some() {
                    SolveStatus::InfeasibleStored
                } else {
                    SolveStatus::InfeasibleHover
                };
                self.state.plan = stored;
                (status, stats.outer_iterations)
            }
            Err(RdvError::NonConvergence { iterations, .. }) => {
                self.nonconvergent += 1;
                let status = if stored.is_some() {
                    SolveStatus::NonconvergentStored
                } else {
                    SolveStatus::NonconvergentHover
                };
                self.state.plan = stored;
                (status, iterations)
            }
            Err(e) => return Err(e),
        };
        self.state.risk = match &self.state.plan {
            Some(plan) => Some(self.risk_for(plan, &post, anchor)?),
            None => None,
        };
        Ok((status, iterations))
    }

    fn risk_for(&self, plan: &MissionPlan, post: &BehaviorPosterior, anchor: Anchor) -> Result<RiskReport> {
        let s = &self.setup;
        let t_r = plan.rendezvous_time.max(anchor.time);
        let prediction = predict_position(post, &s.table, anchor, t_r)?;
        assess(
            plan,
            &prediction,
            &s.geometry,
            &s.params,
            s.gamma,
            s.threshold.threshold(self.state.uas.energy),
        )
    }

    fn decide(&mut self, anchor: Anchor) -> Result<Option<Decision>> {
        let clock = self.state.uas.clock;
        let horizon = self.setup.deadline - clock;
        let Some(plan) = self.state.plan.clone() else {
            if horizon < 3.0 * self.setup.dwell {
                // no plan can exist any more; go home directly
                self.commit_direct_abort();
                return Ok(Some(Decision::Abort));
            }
            return Ok(None);
        };
        let risk = self.state.risk.expect("risk accompanies plan");
        let mut forced_abort = !plan.abort_branch_ok(self.state.uas.energy, horizon);
        if let Some(gamma_a) = self.setup.abort_trigger {
            let post = self.state.posterior.as_ref().expect("posterior");
            let pred = predict_position(post, &self.setup.table, anchor, plan.rendezvous_time.max(anchor.time))?;
            let rho_a = abort_timing_potential(&plan, &pred, &self.setup.geometry, &self.setup.params, self.setup.gamma)?;
            forced_abort |= rho_a > gamma_a;
        }
        if !(plan.durations[0] <= self.state.epsilon || forced_abort) {
            return Ok(None);
        }
        let decision = if forced_abort {
            Decision::Abort
        } else {
            commit_check(risk.rho(), risk.threshold)
        };
        self.commit(&plan, decision);
        Ok(Some(decision))
    }

    fn commit(&mut self, plan: &MissionPlan, decision: Decision) {
        let t = plan.durations;
        let v = plan.velocities;
        self.legs.clear();
        if t[0] > LEG_EPS {
            self.legs.push_back(Leg {
                kind: LegKind::Pnr,
                velocity: v[0],
                remaining: t[0],
            });
        }
        match decision {
            Decision::Proceed => {
                self.legs.push_back(Leg {
                    kind: LegKind::Rendezvous,
                    velocity: v[1],
                    remaining: t[1],
                });
                self.state.phase = Phase::CommittedRendezvous;
            }
            Decision::Abort => {
                self.legs.push_back(Leg {
                    kind: LegKind::Abort,
                    velocity: v[3],
                    remaining: t[3],
                });
                self.state.phase = Phase::CommittedAbort;
            }
        }
        self.state.decision = Some(decision);
        self.state.decision_time = Some(self.state.uas.clock);
    }

    fn commit_direct_abort(&mut self) {
        let (velocity, remaining) = self.direct_leg(self.setup.abort_site, 0.0);
        self.legs.clear();
        self.legs.push_back(Leg {
            kind: LegKind::Abort,
            velocity,
            remaining,
        });
        self.state.phase = Phase::CommittedAbort;
        self.state.decision = Some(Decision::Abort);
        self.state.decision_time = Some(self.state.uas.clock);
    }

    /// Straight leg to `target` taking at least `min_time`, never faster than v_max.
    fn direct_leg(&self, target: Vector2<f64>, min_time: f64) -> (Vector2<f64>, f64) {
        let d = target - self.state.uas.position;
        let t = min_time.max(d.norm() / self.setup.params.v_max);
        if t <= LEG_EPS {
            (Vector2::zeros(), 0.0)
        } else {
            (d / t, t)
        }
    }

    /// Open loop: the planned landing time. With re-aiming the UAS may be
    /// off the plan, so the leg takes the energy-optimal duration
    /// `d/√(2α)`, clipped to what v_max and the deadline allow.
    fn landing_leg(&self) -> (Vector2<f64>, f64) {
        let target = self.setup.landing;
        if !self.setup.reaim {
            let t3 = self.state.plan.as_ref().map_or(0.0, |p| p.durations[2]);
            return self.direct_leg(target, t3);
        }
        let d = (target - self.state.uas.position).norm();
        let fastest = d / self.setup.params.v_max;
        let latest = (self.setup.deadline - self.state.uas.clock).max(fastest);
        let optimal = d / (2.0 * self.setup.params.hover).sqrt();
        self.direct_leg(target, optimal.clamp(fastest, latest))
    }

    fn reaim(&mut self, anchor: Anchor) -> Result<()> {
        let Some(front) = self.legs.front() else {
            return Ok(());
        };
        if front.kind != LegKind::Rendezvous || front.remaining <= LEG_EPS {
            return Ok(());
        }
        let Some(plan) = &self.state.plan else {
            return Ok(());
        };
        let post = self.state.posterior.as_ref().expect("posterior");
        let t_r = plan.rendezvous_time.max(anchor.time);
        let pred = predict_position(post, &self.setup.table, anchor, t_r)?;
        let target = self.setup.geometry.point(pred.mean);
        let mut v = (target - self.state.uas.position) / front.remaining;
        let v_max = self.setup.params.v_max;
        if v.norm() > v_max {
            v *= v_max / v.norm();
        }
        self.legs.front_mut().expect("front leg").velocity = v;
        Ok(())
    }

    fn move_for(&mut self, v: Vector2<f64>, dt: f64) -> Result<bool> {
        if dt <= 0.0 {
            return Ok(true);
        }
        let out = step(&self.state.uas, v, &self.setup.params, dt)?;
        self.state.uas = out.state;
        if out.depleted {
            log::warn!("energy depleted at t = {:.3}", self.state.uas.clock);
            self.state.phase = Phase::FailedEnergy;
            return Ok(false);
        }
        Ok(true)
    }

    fn fly(&mut self, dt: f64, truth: &dyn Fn(f64) -> f64) -> Result<()> {
        if self.state.phase == Phase::Gathering {
            match &self.state.plan {
                Some(plan) => {
                    let t1 = plan.durations[0].clamp(0.0, dt);
                    let v1 = plan.velocities[0];
                    if self.move_for(v1, t1)? {
                        self.move_for(Vector2::zeros(), dt - t1)?;
                    }
                }
                None => {
                    self.move_for(Vector2::zeros(), dt)?;
                }
            }
            return Ok(());
        }

        let mut left = dt;
        while left > LEG_EPS && !self.state.phase.is_terminal() {
            let Some(leg) = self.legs.front_mut() else {
                break;
            };
            let d = leg.remaining.min(left);
            leg.remaining -= d;
            let (v, done, kind) = (leg.velocity, leg.remaining <= LEG_EPS, leg.kind);
            left -= d;
            if !self.move_for(v, d)? {
                return Ok(());
            }
            if done {
                self.legs.pop_front();
                self.finish_leg(kind, truth);
            }
        }
        Ok(())
    }

    fn finish_leg(&mut self, kind: LegKind, truth: &dyn Fn(f64) -> f64) {
        match kind {
            LegKind::Pnr => {}
            LegKind::Rendezvous => {
                let driver = self.setup.geometry.point(truth(self.state.uas.clock));
                let err = (self.state.uas.position - driver).norm();
                self.state.capture_error = Some(err);
                self.captured = Some(err <= self.setup.capture_radius);
                let (velocity, remaining) = self.landing_leg();
                if remaining > LEG_EPS {
                    self.legs.push_back(Leg {
                        kind: LegKind::Landing,
                        velocity,
                        remaining,
                    });
                } else {
                    self.state.phase = self.landed_phase();
                }
            }
            LegKind::Landing => self.state.phase = self.landed_phase(),
            LegKind::Abort => self.state.phase = Phase::CompletedAborted,
        }
        if self.legs.is_empty() && !self.state.phase.is_terminal() {
            self.state.phase = match self.state.phase {
                Phase::CommittedAbort => Phase::CompletedAborted,
                _ => self.landed_phase(),
            };
        }
    }

    fn landed_phase(&self) -> Phase {
        if self.captured == Some(true) {
            Phase::CompletedSuccess
        } else {
            Phase::CompletedMiss
        }
    }

    fn row(
        &self,
        sample: &crate::sim::TelemetrySample,
        phase: Phase,
        decision: Option<Decision>,
        status: SolveStatus,
        iterations: u64,
        driver_theta: f64,
    ) -> TelemetryRow {
        let driver_point = self.setup.geometry.point(driver_theta);
        let uas = &self.state.uas;
        let plan = self.state.plan.as_ref();
        let risk = self.state.risk.as_ref();
        let pt = |i: usize| plan.map(|p| p.durations[i]);
        let pe = |i: usize| plan.map(|p| p.energies[i]);
        TelemetryRow {
            tick: self.ticks,
            time: uas.clock,
            phase,
            decision,
            x: uas.position.x,
            y: uas.position.y,
            energy: uas.energy,
            time_left: self.setup.deadline - uas.clock,
            driver_theta,
            theta_meas: sample.theta,
            speed_meas: sample.speed,
            hist_speed: sample.historical_speed,
            status,
            t1: pt(0),
            t2: pt(1),
            t3: pt(2),
            t4: pt(3),
            e1: pe(0),
            e2: pe(1),
            e3: pe(2),
            e4: pe(3),
            t_rdv: plan.map(|p| p.rendezvous_time),
            pred_theta: plan.map(|p| p.predicted_theta),
            rho_r: risk.map(|r| r.rho_r),
            rho: risk.map(|r| r.rho()),
            threshold: risk.map(|r| r.threshold),
            distance: (uas.position - driver_point).norm(),
            iterations,
            solves: self.solves as u64,
        }
        .rounded()
    }
}

/// The plan as seen `clock − plan.clock` seconds later, assuming the first
/// segment was flown as planned.
pub fn advance_plan(plan: &MissionPlan, clock: f64) -> MissionPlan {
    let elapsed = clock - plan.clock;
    if elapsed <= 0.0 {
        return plan.clone();
    }
    let mut p = plan.clone();
    let t1 = plan.durations[0];
    let flown = elapsed.min(t1);
    p.origin = plan.origin + plan.velocities[0] * flown;
    p.clock = clock;
    p.durations[0] = t1 - flown;
    p.energies[0] = if t1 > 0.0 { plan.energies[0] * (t1 - flown) / t1 } else { 0.0 };
    p
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SafetyAudit {
    pub safe: bool,
    /// Index into the audited rows.
    pub first_violation: Option<usize>,
}

/// Checks that every gathering row holding a plan had an executable abort
/// branch: `E₁ + E₄ ≤ E_r` and `t₁ + t₄ ≤` time left. Rows are rounded to
/// three decimals, so the comparison allows a few thousandths of slack.
pub fn persistent_safety_audit(rows: &[TelemetryRow]) -> SafetyAudit {
    let mut prev_rank = 0;
    for (i, r) in rows.iter().enumerate() {
        let rank = r.phase.rank();
        if rank < prev_rank || r.energy < 0.0 {
            return SafetyAudit {
                safe: false,
                first_violation: Some(i),
            };
        }
        prev_rank = rank;
        if r.phase != Phase::Gathering {
            continue;
        }
        if let (Some(t1), Some(t4), Some(e1), Some(e4)) = (r.t1, r.t4, r.e1, r.e4) {
            if e1 + e4 > r.energy + AUDIT_TOL || t1 + t4 > r.time_left + AUDIT_TOL {
                return SafetyAudit {
                    safe: false,
                    first_violation: Some(i),
                };
            }
        }
    }
    SafetyAudit {
        safe: true,
        first_violation: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phase_strings_round_trip() {
        for p in Phase::ALL {
            assert_eq!(p.as_str().parse::<Phase>().unwrap(), p);
        }
        for s in SolveStatus::ALL {
            assert_eq!(s.as_str().parse::<SolveStatus>().unwrap(), s);
        }
        assert!("LANDED".parse::<Phase>().is_err());
    }

    #[test]
    fn advance_plan_counts_down_first_segment() {
        let plan = MissionPlan {
            origin: Vector2::new(0.0, 0.0),
            clock: 10.0,
            waypoints: [Vector2::new(20.0, 0.0), Vector2::zeros(), Vector2::zeros(), Vector2::zeros()],
            velocities: [Vector2::new(2.0, 0.0), Vector2::zeros(), Vector2::zeros(), Vector2::zeros()],
            durations: [10.0, 5.0, 5.0, 5.0],
            rendezvous_time: 25.0,
            energies: [70.0, 25.0, 25.0, 25.0],
            predicted_theta: 0.0,
            predicted_variance: 0.0,
            cost: 0.0,
            multipliers: Vec::new(),
        };
        let p = advance_plan(&plan, 13.0);
        assert_eq!(p.durations[0], 7.0);
        assert_eq!(p.origin, Vector2::new(6.0, 0.0));
        assert!((p.energies[0] - 49.0).abs() < 1e-12);
        assert_eq!(p.rendezvous_time, 25.0);
    }
}
