//! The condensed waypoint rendezvous problem.
//!
//! Four constant-velocity segments leave the current position `x₀`:
//! start → PNR (`x₁`), PNR → rendezvous (`x₂`), rendezvous → landing (`x₃`),
//! and the abort branch PNR → abort site (`x₄`). Velocities follow from
//! waypoints and durations, `x₂` is pinned to the predicted driver position at
//! `T_R = t_now + t₁ + t₂`, and `x₃`, `x₄` are the fixed landing and abort
//! sites, so the reduced decision vector is `z = (x₁, t₁, t₂, t₃, t₄)`.
//!
//! ```text
//! minimize  λ·Var[θ_d(T_R)] + t₂ + t₃ − t₁
//! s.t.      |x_i − x_{i−1}| ≤ v_max·t_i      (i = 1..4, x₄ measured from x₁)
//!           t₁ + t₂ + t₃ ≤ H,  t₁ + t₄ ≤ H
//!           E₁ + E₂ + E₃ ≤ E_r − reserve,  E₁ + E₄ ≤ E_r
//!           t_i ≥ t_c
//! ```

pub mod nlp;

use nalgebra::{DMatrix, DVector, Vector2};
use serde::{Deserialize, Serialize};

use crate::behavior::{Anchor, BehaviorPosterior};
use crate::energy::EnergyParams;
use crate::error::{RdvError, Result};
use crate::path::{BasisIntegralTable, RoadGeometry};

use nlp::{solve_aug_lag, AugLagSettings, AugLagStatus, Nlp};

/// Number of reduced decision variables.
pub const DIM: usize = 6;
/// Number of raw constraint residuals reported by [`RendezvousProblem::constraints`].
pub const NUM_CONSTRAINTS: usize = 12;

const LENGTH_SCALE: f64 = 100.0;
const TIME_SCALE: f64 = 10.0;
const SPEED_MARGIN: f64 = 1e-8;
const TIME_MARGIN: f64 = 1e-7;
const ENERGY_MARGIN: f64 = 1e-3;

/// Acceptance tolerances for a returned plan.
const PLAN_ENERGY_TOL: f64 = 1e-6;
const PLAN_TIME_TOL: f64 = 1e-6;
const PLAN_POSITION_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionPlan {
    /// Position and mission clock the plan starts from.
    pub origin: Vector2<f64>,
    pub clock: f64,
    /// PNR, rendezvous, landing, abort.
    pub waypoints: [Vector2<f64>; 4],
    pub velocities: [Vector2<f64>; 4],
    pub durations: [f64; 4],
    /// Absolute clock of the rendezvous, `clock + t₁ + t₂`.
    pub rendezvous_time: f64,
    pub energies: [f64; 4],
    /// Predicted driver path position and its variance at the rendezvous time.
    pub predicted_theta: f64,
    pub predicted_variance: f64,
    pub cost: f64,
    /// Constraint multipliers from the solve, reused for warm starts.
    #[serde(default)]
    pub multipliers: Vec<f64>,
}

impl MissionPlan {
    pub fn rendezvous_energy(&self) -> f64 {
        self.energies[0] + self.energies[1] + self.energies[2]
    }

    pub fn abort_energy(&self) -> f64 {
        self.energies[0] + self.energies[3]
    }

    /// The abort branch (energy and time) is executable from the plan origin.
    pub fn abort_branch_ok(&self, energy: f64, horizon: f64) -> bool {
        self.abort_energy() <= energy + PLAN_ENERGY_TOL
            && self.durations[0] + self.durations[3] <= horizon + PLAN_TIME_TOL
    }

    /// Independent check of every plan invariant; returns the violated ones.
    pub fn violations(&self, budget: &PlanBudget) -> Vec<String> {
        let mut out = Vec::new();
        let x = &self.waypoints;
        let starts = [self.origin, x[0], x[1], x[0]];
        for i in 0..4 {
            let reached = starts[i] + self.velocities[i] * self.durations[i];
            if (reached - x[i]).norm() > PLAN_POSITION_TOL {
                out.push(format!("segment {} does not end at its waypoint", i + 1));
            }
            if self.velocities[i].norm() > budget.params.v_max + 1e-9 {
                out.push(format!("segment {} exceeds v_max", i + 1));
            }
            if self.durations[i] < budget.dwell - 1e-12 {
                out.push(format!("t{} below dwell time", i + 1));
            }
        }
        if self.rendezvous_energy() - budget.reserve > budget.energy + PLAN_ENERGY_TOL {
            out.push("rendezvous branch over energy budget".into());
        }
        if self.abort_energy() > budget.energy + PLAN_ENERGY_TOL {
            out.push("abort branch over energy budget".into());
        }
        let t = &self.durations;
        if t[0] + t[1] + t[2] > budget.horizon + PLAN_TIME_TOL {
            out.push("rendezvous branch exceeds horizon".into());
        }
        if t[0] + t[3] > budget.horizon + PLAN_TIME_TOL {
            out.push("abort branch exceeds horizon".into());
        }
        out
    }
}

/// Resources a plan must fit in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanBudget {
    pub energy: f64,
    /// Extra energy held back on the rendezvous branch only.
    pub reserve: f64,
    pub horizon: f64,
    pub dwell: f64,
    pub params: EnergyParams,
}

/// Everything one solve needs.
#[derive(Debug, Clone, Copy)]
pub struct OcpInputs<'a> {
    pub x0: Vector2<f64>,
    pub energy: f64,
    pub clock: f64,
    pub posterior: &'a BehaviorPosterior,
    pub table: &'a BasisIntegralTable,
    pub geometry: &'a RoadGeometry,
    pub anchor: Anchor,
    pub landing: Vector2<f64>,
    pub abort: Vector2<f64>,
    /// Time left for either branch, s.
    pub horizon: f64,
    pub dwell: f64,
    pub params: EnergyParams,
    /// λ, weight on the rendezvous variance.
    pub variance_weight: f64,
    pub energy_reserve: f64,
}

impl OcpInputs<'_> {
    pub fn budget(&self) -> PlanBudget {
        PlanBudget {
            energy: self.energy,
            reserve: self.energy_reserve,
            horizon: self.horizon,
            dwell: self.dwell,
            params: self.params,
        }
    }

    fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(self.dwell > 0.0 && self.dwell.is_finite()) {
            return Err(RdvError::Input(format!("dwell time must be positive, got {}", self.dwell)));
        }
        let finite = [self.x0, self.landing, self.abort]
            .iter()
            .all(|p| p.iter().all(|c| c.is_finite()));
        if !finite || !self.energy.is_finite() || !self.clock.is_finite() || self.horizon.is_nan() {
            return Err(RdvError::Input("non-finite solver input".into()));
        }
        if !(self.variance_weight >= 0.0) || !(self.energy_reserve >= 0.0) {
            return Err(RdvError::Input("variance weight and energy reserve must be non-negative".into()));
        }
        Ok(())
    }
}

/// Cost and constraint evaluation in the reduced variables
/// `z = (x₁ₓ, x₁ᵧ, t₁, t₂, t₃, t₄)`.
#[derive(Debug, Clone, Copy)]
pub struct RendezvousProblem<'a> {
    inputs: OcpInputs<'a>,
}

#[derive(Debug, Clone, Copy)]
struct Eval {
    x1: Vector2<f64>,
    t: [f64; 4],
    mean: f64,
    var: f64,
    dmean: f64,
    dvar: f64,
    x2: Vector2<f64>,
    dx2: Vector2<f64>,
    d2: [f64; 4],
    energy: [f64; 4],
}

impl<'a> RendezvousProblem<'a> {
    pub fn new(inputs: OcpInputs<'a>) -> Self {
        Self { inputs }
    }

    pub fn inputs(&self) -> &OcpInputs<'a> {
        &self.inputs
    }

    fn eval(&self, z: &[f64]) -> Eval {
        let inp = &self.inputs;
        let x1 = Vector2::new(z[0], z[1]);
        let t = [z[2], z[3], z[4], z[5]];
        let t_r = inp.clock + t[0] + t[1];
        let psi = inp.table.psi_unchecked(inp.anchor.time, t_r);
        let phi = inp.table.phi_at(t_r);
        let mu = inp.posterior.mean();
        let cov = inp.posterior.cov();
        let cov_psi = cov * &psi;
        let mean = inp.anchor.theta + mu.dot(&psi);
        let var = psi.dot(&cov_psi).max(0.0);
        let dmean = mu.dot(&phi);
        let dvar = 2.0 * phi.dot(&cov_psi);
        let x2 = inp.geometry.point(mean);
        let dx2 = inp.geometry.tangent(mean) * dmean;
        let d2 = [
            (x1 - inp.x0).norm_squared(),
            (x2 - x1).norm_squared(),
            (inp.landing - x2).norm_squared(),
            (inp.abort - x1).norm_squared(),
        ];
        let m = inp.params.mass;
        let alpha = inp.params.hover;
        let energy = std::array::from_fn(|i| m * d2[i] / (2.0 * t[i]) + alpha * m * t[i]);
        Eval {
            x1,
            t,
            mean,
            var,
            dmean,
            dvar,
            x2,
            dx2,
            d2,
            energy,
        }
    }

    pub fn cost(&self, z: &[f64]) -> f64 {
        let e = self.eval(z);
        self.inputs.variance_weight * e.var + e.t[1] + e.t[2] - e.t[0]
    }

    pub fn cost_gradient(&self, z: &[f64]) -> [f64; DIM] {
        let e = self.eval(z);
        let lv = self.inputs.variance_weight * e.dvar;
        [0.0, 0.0, lv - 1.0, lv + 1.0, 1.0, 0.0]
    }

    /// Raw residuals in `g(z) ≥ 0` form: four speed limits `v²t_i² − d_i²`,
    /// two horizons, two energy budgets, four dwell bounds `t_i − t_c`.
    pub fn constraints(&self, z: &[f64]) -> [f64; NUM_CONSTRAINTS] {
        self.constraints_with(z, 0.0, 0.0, 0.0)
    }

    fn constraints_with(&self, z: &[f64], speed_margin: f64, time_margin: f64, energy_margin: f64) -> [f64; NUM_CONSTRAINTS] {
        let e = self.eval(z);
        let inp = &self.inputs;
        let v = inp.params.v_max * (1.0 - speed_margin);
        let t = e.t;
        let mut c = [0.0; NUM_CONSTRAINTS];
        for i in 0..4 {
            c[i] = v * v * t[i] * t[i] - e.d2[i];
            c[8 + i] = t[i] - inp.dwell;
        }
        c[4] = inp.horizon - t[0] - t[1] - t[2] - time_margin;
        c[5] = inp.horizon - t[0] - t[3] - time_margin;
        c[6] = inp.energy - inp.energy_reserve - e.energy[0] - e.energy[1] - e.energy[2] - energy_margin;
        c[7] = inp.energy - e.energy[0] - e.energy[3] - energy_margin;
        c
    }

    /// Row `j` is ∇g_j.
    pub fn constraint_jacobian(&self, z: &[f64]) -> [[f64; DIM]; NUM_CONSTRAINTS] {
        self.jacobian_with(z, 0.0)
    }

    fn jacobian_with(&self, z: &[f64], speed_margin: f64) -> [[f64; DIM]; NUM_CONSTRAINTS] {
        let e = self.eval(z);
        let inp = &self.inputs;
        let v = inp.params.v_max * (1.0 - speed_margin);
        let m = inp.params.mass;
        let alpha = inp.params.hover;

        // ∇(d_i²) over z
        let mut dd = [[0.0; DIM]; 4];
        let r1 = e.x1 - inp.x0;
        dd[0][0] = 2.0 * r1.x;
        dd[0][1] = 2.0 * r1.y;
        let r2 = e.x2 - e.x1;
        dd[1][0] = -2.0 * r2.x;
        dd[1][1] = -2.0 * r2.y;
        let g2 = 2.0 * r2.dot(&e.dx2);
        dd[1][2] = g2;
        dd[1][3] = g2;
        let r3 = inp.landing - e.x2;
        let g3 = -2.0 * r3.dot(&e.dx2);
        dd[2][2] = g3;
        dd[2][3] = g3;
        let r4 = inp.abort - e.x1;
        dd[3][0] = -2.0 * r4.x;
        dd[3][1] = -2.0 * r4.y;

        // ∇E_i
        let mut de = [[0.0; DIM]; 4];
        for i in 0..4 {
            let ti = e.t[i];
            for k in 0..DIM {
                de[i][k] = m / (2.0 * ti) * dd[i][k];
            }
            de[i][2 + i] += -m * e.d2[i] / (2.0 * ti * ti) + alpha * m;
        }

        let mut jac = [[0.0; DIM]; NUM_CONSTRAINTS];
        for i in 0..4 {
            for k in 0..DIM {
                jac[i][k] = -dd[i][k];
            }
            jac[i][2 + i] += 2.0 * v * v * e.t[i];
            jac[8 + i][2 + i] = 1.0;
        }
        jac[4][2] = -1.0;
        jac[4][3] = -1.0;
        jac[4][4] = -1.0;
        jac[5][2] = -1.0;
        jac[5][5] = -1.0;
        for k in 0..DIM {
            jac[6][k] = -(de[0][k] + de[1][k] + de[2][k]);
            jac[7][k] = -(de[0][k] + de[3][k]);
        }
        jac
    }

    /// Predicted driver mean and variance at the rendezvous implied by `z`,
    /// plus their T_R-derivatives.
    pub fn rendezvous_prediction(&self, z: &[f64]) -> (f64, f64, f64, f64) {
        let e = self.eval(z);
        (e.mean, e.var, e.dmean, e.dvar)
    }

    /// Builds the plan for `z`, or `None` when the rendezvous falls outside
    /// the road or profile domain.
    pub fn plan_at(&self, z: &[f64], multipliers: Vec<f64>) -> Option<MissionPlan> {
        let e = self.eval(z);
        let inp = &self.inputs;
        let t_r = inp.clock + e.t[0] + e.t[1];
        let (th_lo, th_hi) = inp.geometry.domain();
        let (t_lo, t_hi) = inp.table.profile().domain();
        if !(e.mean >= th_lo && e.mean <= th_hi && t_r >= t_lo && t_r <= t_hi) {
            return None;
        }
        let waypoints = [e.x1, e.x2, inp.landing, inp.abort];
        let velocities = velocities_from_waypoints(inp.x0, &waypoints, &e.t, inp.dwell).ok()?;
        Some(MissionPlan {
            origin: inp.x0,
            clock: inp.clock,
            waypoints,
            velocities,
            durations: e.t,
            rendezvous_time: t_r,
            energies: e.energy,
            predicted_theta: e.mean,
            predicted_variance: e.var,
            cost: self.cost(z),
            multipliers,
        })
    }
}

/// v_i = (x_i − x_{i−1})/t_i with the abort branch leaving from x₁.
pub fn velocities_from_waypoints(
    x0: Vector2<f64>,
    waypoints: &[Vector2<f64>; 4],
    durations: &[f64; 4],
    dwell: f64,
) -> Result<[Vector2<f64>; 4]> {
    for (i, &t) in durations.iter().enumerate() {
        if !(t >= dwell) {
            return Err(RdvError::Input(format!("t{} = {t} is below the dwell time {dwell}", i + 1)));
        }
    }
    let starts = [x0, waypoints[0], waypoints[1], waypoints[0]];
    Ok(std::array::from_fn(|i| (waypoints[i] - starts[i]) / durations[i]))
}

/// Inverse of [`velocities_from_waypoints`].
pub fn waypoints_from_velocities(
    x0: Vector2<f64>,
    velocities: &[Vector2<f64>; 4],
    durations: &[f64; 4],
) -> [Vector2<f64>; 4] {
    let x1 = x0 + velocities[0] * durations[0];
    let x2 = x1 + velocities[1] * durations[1];
    let x3 = x2 + velocities[2] * durations[2];
    let x4 = x1 + velocities[3] * durations[3];
    [x1, x2, x3, x4]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub aug_lag: AugLagSettings,
    /// Cold starts in addition to the warm start.
    pub multistart: usize,
    /// Relative perturbation of the durations across cold starts.
    pub perturbation: f64,
    /// Move the PNR onto the straight line to the rendezvous when that stays feasible.
    pub straighten_pnr: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            aug_lag: AugLagSettings::default(),
            multistart: 3,
            perturbation: 0.2,
            straighten_pnr: true,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub starts: usize,
    pub converged_starts: usize,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    /// Largest scaled constraint violation of the reported point.
    pub violation: f64,
    pub stationarity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SolveOutcome {
    Optimal { plan: MissionPlan, stats: SolveStats },
    Infeasible { stats: SolveStats },
}

impl SolveOutcome {
    pub fn plan(&self) -> Option<&MissionPlan> {
        match self {
            SolveOutcome::Optimal { plan, .. } => Some(plan),
            SolveOutcome::Infeasible { .. } => None,
        }
    }

    pub fn stats(&self) -> &SolveStats {
        match self {
            SolveOutcome::Optimal { stats, .. } | SolveOutcome::Infeasible { stats } => stats,
        }
    }
}

/// The problem in scaled variables `y = z ⊘ s` with tightened constraints.
struct Scaled<'p, 'a> {
    prob: &'p RendezvousProblem<'a>,
    scale: [f64; DIM],
    con_scale: [f64; 8],
}

impl<'p, 'a> Scaled<'p, 'a> {
    fn new(prob: &'p RendezvousProblem<'a>) -> Self {
        let p = &prob.inputs.params;
        let speed = (p.v_max * TIME_SCALE).powi(2);
        let energy = (p.power(p.v_max) * TIME_SCALE).max(1.0);
        Self {
            prob,
            scale: [LENGTH_SCALE, LENGTH_SCALE, TIME_SCALE, TIME_SCALE, TIME_SCALE, TIME_SCALE],
            con_scale: [speed, speed, speed, speed, TIME_SCALE, TIME_SCALE, energy, energy],
        }
    }

    fn unscale(&self, y: &DVector<f64>) -> [f64; DIM] {
        std::array::from_fn(|k| y[k] * self.scale[k])
    }

    fn rescale(&self, z: &[f64; DIM]) -> DVector<f64> {
        DVector::from_iterator(DIM, (0..DIM).map(|k| z[k] / self.scale[k]))
    }
}

impl Nlp for Scaled<'_, '_> {
    fn dim(&self) -> usize {
        DIM
    }

    fn num_constraints(&self) -> usize {
        8
    }

    fn lower_bounds(&self) -> DVector<f64> {
        let tc = self.prob.inputs.dwell / TIME_SCALE;
        DVector::from_vec(vec![f64::NEG_INFINITY, f64::NEG_INFINITY, tc, tc, tc, tc])
    }

    fn objective(&self, y: &DVector<f64>) -> f64 {
        self.prob.cost(&self.unscale(y)) / TIME_SCALE
    }

    fn gradient(&self, y: &DVector<f64>) -> DVector<f64> {
        let g = self.prob.cost_gradient(&self.unscale(y));
        DVector::from_iterator(DIM, (0..DIM).map(|k| g[k] * self.scale[k] / TIME_SCALE))
    }

    fn constraints(&self, y: &DVector<f64>) -> DVector<f64> {
        let c = self
            .prob
            .constraints_with(&self.unscale(y), SPEED_MARGIN, TIME_MARGIN, ENERGY_MARGIN);
        DVector::from_iterator(8, (0..8).map(|j| c[j] / self.con_scale[j]))
    }

    fn jacobian(&self, y: &DVector<f64>) -> DMatrix<f64> {
        let jac = self.prob.jacobian_with(&self.unscale(y), SPEED_MARGIN);
        DMatrix::from_fn(8, DIM, |j, k| jac[j][k] * self.scale[k] / self.con_scale[j])
    }
}

fn cold_start(prob: &RendezvousProblem<'_>, factor: f64) -> [f64; DIM] {
    let inp = &prob.inputs;
    let tc = inp.dwell;
    let base = (inp.horizon / 4.0).max(tc);
    let t = base * factor;
    let driver_now = inp.geometry.point(inp.anchor.theta);
    let x1 = (inp.x0 + driver_now) * 0.5;
    [x1.x, x1.y, t.max(tc), t.max(tc), t.max(tc), t.max(tc)]
}

fn warm_point(plan: &MissionPlan, inputs: &OcpInputs<'_>) -> [f64; DIM] {
    let elapsed = (inputs.clock - plan.clock).max(0.0);
    let t = plan.durations;
    let x1 = plan.waypoints[0];
    [
        x1.x,
        x1.y,
        (t[0] - elapsed).max(inputs.dwell),
        t[1].max(inputs.dwell),
        t[2].max(inputs.dwell),
        t[3].max(inputs.dwell),
    ]
}

/// Solves the rendezvous problem from the warm start (if any) plus
/// `settings.multistart` cold starts and keeps the cheapest certified plan.
pub fn solve(
    inputs: &OcpInputs<'_>,
    warm_start: Option<&MissionPlan>,
    settings: &SolverSettings,
) -> Result<SolveOutcome> {
    inputs.validate()?;
    let prob = RendezvousProblem::new(*inputs);
    let mut stats = SolveStats::default();
    if inputs.horizon < 3.0 * inputs.dwell || inputs.energy <= 0.0 {
        return Ok(SolveOutcome::Infeasible { stats });
    }
    let scaled = Scaled::new(&prob);

    let mut starts: Vec<([f64; DIM], Option<DVector<f64>>)> = Vec::new();
    if let Some(w) = warm_start {
        let mult = (w.multipliers.len() == 8).then(|| DVector::from_column_slice(&w.multipliers));
        starts.push((warm_point(w, inputs), mult));
    }
    let n_cold = settings.multistart.max(usize::from(warm_start.is_none()));
    for k in 0..n_cold {
        // 1, 1−δ, 1+δ, 1−2δ, ...
        let step = k.div_ceil(2);
        let sign = if k % 2 == 1 { -1.0 } else { 1.0 };
        let factor = 1.0 + sign * step as f64 * settings.perturbation;
        starts.push((cold_start(&prob, factor.max(0.05)), None));
    }

    let mut best: Option<(MissionPlan, [f64; DIM])> = None;
    let mut best_unconverged: Option<(f64, f64)> = None;
    let mut any_feasible = false;
    for (z0, mult) in &starts {
        stats.starts += 1;
        let r = solve_aug_lag(&scaled, &scaled.rescale(z0), mult.as_ref(), &settings.aug_lag);
        stats.outer_iterations += r.outer_iterations;
        stats.inner_iterations += r.inner_iterations;
        log::trace!(
            "start {}: {:?} after {} outer iterations, violation {:.2e}",
            stats.starts,
            r.status,
            r.outer_iterations,
            r.violation
        );
        if r.status != AugLagStatus::Infeasible {
            any_feasible |= r.violation <= settings.aug_lag.feasibility_tol;
        }
        if r.status != AugLagStatus::Converged {
            if r.status == AugLagStatus::IterationLimit {
                let cand = (r.violation, r.stationarity);
                if best_unconverged.is_none_or(|b| cand.0 < b.0) {
                    best_unconverged = Some(cand);
                }
            }
            continue;
        }
        let z = scaled.unscale(&r.x);
        let Some(plan) = prob.plan_at(&z, r.multipliers.iter().copied().collect()) else {
            continue;
        };
        if !plan.violations(&inputs.budget()).is_empty() {
            continue;
        }
        stats.converged_starts += 1;
        if best.as_ref().is_none_or(|(b, _)| plan.cost < b.cost) {
            stats.violation = r.violation;
            stats.stationarity = r.stationarity;
            best = Some((plan, z));
        }
    }

    match best {
        Some((plan, z)) => {
            let plan = if settings.straighten_pnr {
                straighten(&prob, &z, plan)
            } else {
                plan
            };
            Ok(SolveOutcome::Optimal { plan, stats })
        }
        None => match best_unconverged {
            Some((violation, stationarity)) if any_feasible => Err(RdvError::NonConvergence {
                iterations: stats.outer_iterations,
                violation,
                stationarity,
            }),
            _ => Ok(SolveOutcome::Infeasible { stats }),
        },
    }
}

/// Moves x₁ to the point on the segment x₀ → x₂ reached at the same fraction
/// of t₁ + t₂. The cost does not depend on x₁, so this only changes energy use.
fn straighten(prob: &RendezvousProblem<'_>, z: &[f64; DIM], plan: MissionPlan) -> MissionPlan {
    let inp = &prob.inputs;
    let t = plan.durations;
    let x2 = plan.waypoints[1];
    let x1 = inp.x0 + (x2 - inp.x0) * (t[0] / (t[0] + t[1]));
    let mut zs = *z;
    zs[0] = x1.x;
    zs[1] = x1.y;
    let c = prob.constraints_with(&zs, SPEED_MARGIN, TIME_MARGIN, ENERGY_MARGIN);
    if c.iter().any(|&v| v < 0.0) {
        return plan;
    }
    match prob.plan_at(&zs, plan.multipliers.clone()) {
        Some(p) if p.violations(&inp.budget()).is_empty() => p,
        _ => plan,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::path::{BasisSpec, VelocityProfile};
    use approx::assert_relative_eq;

    #[test]
    fn velocity_elimination_examples() {
        let x0 = Vector2::zeros();
        let wp = [
            Vector2::new(10.0, 0.0),
            Vector2::new(10.0, 0.0),
            Vector2::new(20.0, 5.0),
            Vector2::new(0.0, 0.0),
        ];
        let t = [2.0, 3.0, 5.0, 4.0];
        let v = velocities_from_waypoints(x0, &wp, &t, 1.0).unwrap();
        assert_eq!(v[0], Vector2::new(5.0, 0.0));
        assert_eq!(v[1], Vector2::zeros());
        assert_eq!(v[3], Vector2::new(-2.5, 0.0));
        let back = waypoints_from_velocities(x0, &v, &t);
        for i in 0..4 {
            assert!((back[i] - wp[i]).norm() < 1e-12);
        }
        assert!(velocities_from_waypoints(x0, &wp, &[0.5, 3.0, 5.0, 4.0], 1.0).is_err());
    }

    fn fixture() -> (BehaviorPosterior, BasisIntegralTable, RoadGeometry) {
        let basis = BasisSpec::new(1);
        let table = BasisIntegralTable::closed_form(&VelocityProfile::reference(), basis).unwrap();
        let post = BehaviorPosterior::deterministic(DVector::from_vec(vec![0.0, 1.0]), basis);
        (post, table, RoadGeometry::diagonal())
    }

    fn inputs<'a>(
        post: &'a BehaviorPosterior,
        table: &'a BasisIntegralTable,
        geom: &'a RoadGeometry,
    ) -> OcpInputs<'a> {
        OcpInputs {
            x0: Vector2::new(500.0, 0.0),
            energy: 5000.0,
            clock: 0.0,
            posterior: post,
            table,
            geometry: geom,
            anchor: Anchor { time: 0.0, theta: 0.0 },
            landing: Vector2::new(500.0, 0.0),
            abort: Vector2::new(500.0, 0.0),
            horizon: 80.0,
            dwell: 3.0,
            params: EnergyParams::default(),
            variance_weight: 0.01,
            energy_reserve: 200.0,
        }
    }

    #[test]
    fn rendezvous_waypoint_sits_on_predicted_driver() {
        let (post, table, geom) = fixture();
        let inp = inputs(&post, &table, &geom);
        let out = solve(&inp, None, &SolverSettings::default()).unwrap();
        let plan = out.plan().expect("feasible");
        let expected = geom.point(plan.predicted_theta);
        assert!((plan.waypoints[1] - expected).norm() < 1e-4);
        let t_r = plan.rendezvous_time;
        assert_relative_eq!(plan.predicted_theta, 10.0 * t_r - t_r * t_r / 40.0, epsilon = 1e-9);
        assert!(plan.violations(&inp.budget()).is_empty());
    }

    #[test]
    fn starved_energy_is_infeasible() {
        let (post, table, geom) = fixture();
        let mut inp = inputs(&post, &table, &geom);
        inp.energy = 40.0;
        let out = solve(&inp, None, &SolverSettings::default()).unwrap();
        assert!(matches!(out, SolveOutcome::Infeasible { .. }));
    }

    #[test]
    fn short_horizon_is_infeasible() {
        let (post, table, geom) = fixture();
        let mut inp = inputs(&post, &table, &geom);
        inp.horizon = 8.0;
        assert!(matches!(
            solve(&inp, None, &SolverSettings::default()).unwrap(),
            SolveOutcome::Infeasible { .. }
        ));
    }

    #[test]
    fn jacobian_matches_central_differences() {
        let (post, table, geom) = fixture();
        let post = post.with_scaled_covariance(1.0);
        let inp = inputs(&post, &table, &geom);
        let prob = RendezvousProblem::new(inp);
        let z = [420.0, 130.0, 12.0, 9.0, 20.0, 15.0];
        let jac = prob.constraint_jacobian(&z);
        for k in 0..DIM {
            let h = 1e-6 * z[k].abs().max(1.0);
            let mut zp = z;
            let mut zm = z;
            zp[k] += h;
            zm[k] -= h;
            let cp = prob.constraints(&zp);
            let cm = prob.constraints(&zm);
            for j in 0..NUM_CONSTRAINTS {
                let fd = (cp[j] - cm[j]) / (2.0 * h);
                assert!(
                    (fd - jac[j][k]).abs() <= 1e-4 * fd.abs().max(1.0),
                    "constraint {j}, variable {k}: fd {fd} vs {}",
                    jac[j][k]
                );
            }
        }
    }
}
