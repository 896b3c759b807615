//! Acceptance suite. Every check compares the library against an
//! independent oracle or against the scenario-level outcome it must produce.

use std::fmt;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rdv_core::behavior::{predict_position, regress, Anchor, BehaviorDataset, BehaviorPosterior, BehaviorPrior, PositionPrediction};
use rdv_core::config::ScenarioConfig;
use rdv_core::energy::EnergyParams;
use rdv_core::mission::Phase;
use rdv_core::ocp::{self, velocities_from_waypoints, MissionPlan, OcpInputs, RendezvousProblem, SolveOutcome, SolverSettings};
use rdv_core::path::{BasisIntegralTable, BasisSpec, RoadGeometry, VelocityProfile};
use rdv_core::risk::{downside_potential, extra_energy_at, Decision};
use rdv_core::sim::{run_scenario, run_scenario_timed, RunOutput};
use rdv_core::trace::TraceFormat;

use crate::scenarios::bundled_config;

pub const SEEDS: std::ops::RangeInclusive<u64> = 1..=20;

#[derive(Debug, Clone)]
pub struct CriterionReport {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CriterionReport {
    fn new(id: u8, name: &'static str, passed: bool, detail: String) -> Self {
        Self { id, name, passed, detail }
    }
}

impl fmt::Display for CriterionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "criterion {} {verdict} {}: {}", self.id, self.name, self.detail)
    }
}

fn rng(stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(0x5eed_0000 + stream)
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

// ---------------------------------------------------------------------------
// Scenario matrix

pub struct MatrixRun {
    pub scenario: String,
    pub seed: u64,
    pub output: RunOutput,
}

pub struct BatchTiming {
    pub scenario: String,
    pub wall: Duration,
}

/// Every scenario run the suite inspects.
pub struct Matrix {
    pub runs: Vec<MatrixRun>,
    pub timings: Vec<BatchTiming>,
}

fn open_loop(name: &str) -> ScenarioConfig {
    let mut cfg = bundled_config(name);
    cfg.mission.reaim = false;
    cfg.name = format!("{name}_open_loop");
    cfg
}

impl Matrix {
    /// The four bundled scenarios plus open-loop variants of the two
    /// reference scenarios, each over seeds 1..=20.
    pub fn build() -> Self {
        let mut configs: Vec<ScenarioConfig> = crate::scenarios::BUNDLED
            .iter()
            .map(|(name, _)| bundled_config(name))
            .collect();
        configs.push(open_loop("low_risk"));
        configs.push(open_loop("high_risk"));
        let mut runs = Vec::new();
        let mut timings = Vec::new();
        for base in configs {
            let started = Instant::now();
            let batch: Vec<MatrixRun> = SEEDS
                .into_par_iter()
                .map(|seed| {
                    let mut cfg = base.clone();
                    cfg.run.seed = seed;
                    let output = run_scenario_timed(&cfg).expect("bundled scenario runs");
                    MatrixRun {
                        scenario: base.name.clone(),
                        seed,
                        output,
                    }
                })
                .collect();
            timings.push(BatchTiming {
                scenario: base.name.clone(),
                wall: started.elapsed(),
            });
            runs.extend(batch);
        }
        Self { runs, timings }
    }

    pub fn scenario(&self, name: &str) -> impl Iterator<Item = &MatrixRun> + '_ {
        let name = name.to_string();
        self.runs.iter().filter(move |r| r.scenario == name)
    }

    fn batch_wall(&self, name: &str) -> Duration {
        self.timings
            .iter()
            .find(|t| t.scenario == name)
            .map_or(Duration::ZERO, |t| t.wall)
    }
}

// ---------------------------------------------------------------------------
// 1. Scenario reproduction

pub fn criterion_1(matrix: &Matrix) -> CriterionReport {
    let check = |name: &str, phase: Phase, decision: Decision, committed: Phase| {
        let mut ok = 0;
        let mut times = Vec::new();
        for r in matrix.scenario(name) {
            let s = &r.output.trace.summary;
            let passed_through = r.output.trace.rows.iter().any(|row| row.phase == committed);
            let in_band = s.decision_time.is_some_and(|t| (10.0..=40.0).contains(&t));
            if s.phase == phase && s.decision == Some(decision) && passed_through && in_band {
                ok += 1;
            }
            if let Some(t) = s.decision_time {
                times.push(t);
            }
        }
        let (lo, hi) = times
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &t| (a.min(t), b.max(t)));
        (ok, lo, hi, matrix.batch_wall(name))
    };
    let (low_ok, low_lo, low_hi, low_wall) =
        check("low_risk", Phase::CompletedSuccess, Decision::Proceed, Phase::CommittedRendezvous);
    let (high_ok, high_lo, high_hi, high_wall) =
        check("high_risk", Phase::CompletedAborted, Decision::Abort, Phase::CommittedAbort);
    let limit = Duration::from_secs(60);
    let passed = low_ok >= 18 && high_ok >= 18 && low_wall <= limit && high_wall <= limit;
    CriterionReport::new(
        1,
        "scenario reproduction",
        passed,
        format!(
            "low_risk {low_ok}/20 success (decision {low_lo:.0}-{low_hi:.0} s, batch {:.2} s); \
             high_risk {high_ok}/20 aborted (decision {high_lo:.0}-{high_hi:.0} s, batch {:.2} s)",
            low_wall.as_secs_f64(),
            high_wall.as_secs_f64()
        ),
    )
}

// ---------------------------------------------------------------------------
// 2. Solver speed

fn median(mut v: Vec<Duration>) -> Duration {
    if v.is_empty() {
        return Duration::ZERO;
    }
    v.sort();
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2
    }
}

pub fn criterion_2(matrix: &Matrix) -> CriterionReport {
    let seed1 = matrix
        .scenario("low_risk")
        .find(|r| r.seed == 1)
        .map(|r| r.output.solve_times.clone())
        .unwrap_or_default();
    let all: Vec<Duration> = matrix
        .scenario("low_risk")
        .flat_map(|r| r.output.solve_times.iter().copied())
        .collect();
    let m1 = median(seed1.clone());
    let passed = !seed1.is_empty() && m1 <= Duration::from_millis(500);
    CriterionReport::new(
        2,
        "solver speed",
        passed,
        format!(
            "median solve {:.3} ms over {} solves (seed 1); {:.3} ms over all {} low_risk solves",
            m1.as_secs_f64() * 1e3,
            seed1.len(),
            median(all.clone()).as_secs_f64() * 1e3,
            all.len()
        ),
    )
}

// ---------------------------------------------------------------------------
// 3. Posterior exactness

fn random_spd(rng: &mut ChaCha8Rng, m: usize, scale: f64) -> DMatrix<f64> {
    let b = DMatrix::from_fn(m, m, |_, _| normal(rng));
    (&b * b.transpose() / m as f64 + DMatrix::identity(m, m) * 0.5) * scale
}

/// Dense normal-equations posterior by LU factorization of the
/// diagonally equilibrated precision.
pub fn posterior_oracle(
    prior_cov: &DMatrix<f64>,
    noise_var: f64,
    driver: &[f64],
    historical: &[f64],
    degree: usize,
) -> (DVector<f64>, DMatrix<f64>) {
    let m = degree + 1;
    let n = driver.len();
    let phi = DMatrix::from_fn(n, m, |i, j| historical[i].powi(j as i32));
    let d = DVector::from_column_slice(driver);
    let prior_inv = prior_cov.clone().lu().try_inverse().expect("prior invertible");
    let precision = phi.transpose() * &phi / noise_var + prior_inv;
    let s = DMatrix::from_diagonal(&precision.diagonal().map(|p| 1.0 / p.sqrt()));
    let lu = (&s * &precision * &s).lu();
    let mean = &s * lu.solve(&(&s * phi.transpose() * d / noise_var)).expect("posterior precision invertible");
    let cov = &s * lu.try_inverse().expect("posterior precision invertible") * &s;
    (mean, cov)
}

fn max_rel_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / y.abs().max(1.0))
        .fold(0.0, f64::max)
}

pub fn criterion_3() -> CriterionReport {
    let mut rng = rng(3);
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    for _ in 0..100 {
        let m = rng.random_range(1..=5usize);
        let n = rng.random_range(1..=500usize);
        let basis = BasisSpec::new(m - 1);
        let weights: Vec<f64> = (0..m).map(|_| normal(&mut rng) / (1 + m) as f64).collect();
        let noise_std = rng.random_range(0.5..5.0);
        let historical: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..10.0)).collect();
        let driver: Vec<f64> = historical
            .iter()
            .map(|&h| {
                let clean: f64 = weights.iter().enumerate().map(|(j, w)| w * h.powi(j as i32)).sum();
                clean + noise_std * normal(&mut rng)
            })
            .collect();
        let scale = rng.random_range(0.5..50.0);
        let prior_cov = random_spd(&mut rng, m, scale);
        let noise_var = noise_std * noise_std;

        let prior = BehaviorPrior::new(prior_cov.clone(), noise_var).expect("valid prior");
        let data = BehaviorDataset::from_pairs(driver.clone(), historical.clone()).expect("finite data");
        let post = regress(&prior, &data, basis).expect("regression");
        let (mean, cov) = posterior_oracle(&prior_cov, noise_var, &driver, &historical, m - 1);

        let err = max_rel_diff(post.mean().as_slice(), mean.as_slice())
            .max(max_rel_diff(post.cov().as_slice(), cov.as_slice()));
        if err.is_nan() || err > 1e-9 {
            failures += 1;
        }
        worst = worst.max(err);
    }
    CriterionReport::new(
        3,
        "posterior exactness",
        failures == 0,
        format!("100 datasets, worst relative difference {worst:.2e} (tolerance 1e-9), {failures} over"),
    )
}

// ---------------------------------------------------------------------------
// 4. Prediction exactness

/// Composite Simpson rule with `panels` (even) sub-intervals.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let n = panels.next_multiple_of(2);
    let h = (b - a) / n as f64;
    let mut sum = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(a + k as f64 * h);
    }
    sum * h / 3.0
}

fn poly(coeffs: &[f64], t: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c)
}

/// Mean and variance from Simpson ψ-integrals and an explicit quadratic form.
pub fn prediction_oracle(
    profile_coeffs: &[f64],
    post: &BehaviorPosterior,
    anchor: Anchor,
    t_f: f64,
) -> (f64, f64) {
    let m = post.mean().len();
    let psi: Vec<f64> = (0..m)
        .map(|j| simpson(|t| poly(profile_coeffs, t).powi(j as i32), anchor.time, t_f, 4000))
        .collect();
    let mean = anchor.theta + (0..m).map(|j| post.mean()[j] * psi[j]).sum::<f64>();
    let mut var = 0.0;
    for i in 0..m {
        for j in 0..m {
            var += psi[i] * post.cov()[(i, j)] * psi[j];
        }
    }
    (mean, var)
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }
}

pub fn criterion_4() -> CriterionReport {
    let mut rng = rng(4);
    let mut worst_mean: f64 = 0.0;
    let mut worst_var: f64 = 0.0;
    for _ in 0..50 {
        let coeffs = vec![rng.random_range(8.0..15.0), rng.random_range(-0.03..0.0), rng.random_range(0.0..1e-4)];
        let profile = VelocityProfile::polynomial(coeffs.clone(), 0.0, 200.0).expect("profile");
        let degree = rng.random_range(0..=3usize);
        let basis = BasisSpec::new(degree);
        let table = BasisIntegralTable::closed_form(&profile, basis).expect("closed form");

        let n = rng.random_range(3..=60usize);
        let gain = rng.random_range(0.8..1.4);
        let noise_std = rng.random_range(0.5..5.0);
        let historical: Vec<f64> = (0..n).map(|k| poly(&coeffs, k as f64)).collect();
        let driver: Vec<f64> = historical.iter().map(|h| gain * h + noise_std * normal(&mut rng)).collect();
        let prior = BehaviorPrior::isotropic(degree + 1, rng.random_range(0.5..10.0), noise_std * noise_std).expect("prior");
        let post = regress(&prior, &BehaviorDataset::from_pairs(driver, historical).expect("data"), basis).expect("regression");

        let anchor = Anchor {
            time: rng.random_range(0.0..150.0),
            theta: rng.random_range(0.0..300.0),
        };
        let t_f = anchor.time + rng.random_range(1.0..50.0);
        let pred = predict_position(&post, &table, anchor, t_f).expect("prediction");
        let (mean, var) = prediction_oracle(&coeffs, &post, anchor, t_f);
        worst_mean = worst_mean.max(rel(pred.mean, mean));
        worst_var = worst_var.max(rel(pred.variance, var));
    }

    // Noise-free a = 1.1 driver, learned from 200 samples, propagated 20 s.
    let profile = VelocityProfile::reference();
    let basis = BasisSpec::new(1);
    let table = BasisIntegralTable::closed_form(&profile, basis).expect("closed form");
    let historical: Vec<f64> = (0..200).map(|k| profile.value(k as f64)).collect();
    let driver: Vec<f64> = historical.iter().map(|h| 1.1 * h).collect();
    let prior = BehaviorPrior::isotropic(2, 100.0, 1e-6).expect("prior");
    let post = regress(&prior, &BehaviorDataset::from_pairs(driver, historical).expect("data"), basis).expect("regression");
    let pred = predict_position(&post, &table, Anchor { time: 0.0, theta: 0.0 }, 20.0).expect("prediction");
    let dt = 1e-4;
    let steps = (20.0 / dt) as usize;
    let fine: f64 = (0..steps).map(|k| 1.1 * profile.value((k as f64 + 0.5) * dt) * dt).sum();
    let case_ok = (pred.mean - 209.0).abs() <= 0.5 && (pred.mean - fine).abs() <= 0.5;

    let passed = worst_mean <= 1e-8 && worst_var <= 1e-8 && case_ok;
    CriterionReport::new(
        4,
        "prediction exactness",
        passed,
        format!(
            "50 cases, worst relative error mean {worst_mean:.2e}, variance {worst_var:.2e}; \
             a=1.1 mean {:.4} (fine-step oracle {fine:.4})",
            pred.mean
        ),
    )
}

// ---------------------------------------------------------------------------
// Shared random problem instances

struct Instance {
    geometry: RoadGeometry,
    table: BasisIntegralTable,
    posterior: BehaviorPosterior,
    params: EnergyParams,
}

fn learned_instance(rng: &mut ChaCha8Rng, samples: std::ops::RangeInclusive<usize>) -> Instance {
    let profile = VelocityProfile::reference();
    let basis = BasisSpec::new(1);
    let table = BasisIntegralTable::closed_form(&profile, basis).expect("closed form");
    let n = rng.random_range(samples);
    let gain = rng.random_range(0.9..1.4);
    let sigma = rng.random_range(1.0..6.0);
    let historical: Vec<f64> = (0..n).map(|k| profile.value(k as f64)).collect();
    let driver: Vec<f64> = historical.iter().map(|h| gain * h + sigma * normal(rng)).collect();
    let prior = BehaviorPrior::isotropic(2, 1.0, sigma * sigma).expect("prior");
    let posterior = regress(&prior, &BehaviorDataset::from_pairs(driver, historical).expect("data"), basis).expect("regression");
    Instance {
        geometry: RoadGeometry::diagonal(),
        table,
        posterior,
        params: EnergyParams::default(),
    }
}

fn random_point(rng: &mut ChaCha8Rng, center: Vector2<f64>, radius: f64) -> Vector2<f64> {
    let angle = rng.random_range(0.0..std::f64::consts::TAU);
    let r = radius * rng.random::<f64>().sqrt();
    center + Vector2::new(angle.cos(), angle.sin()) * r
}

// ---------------------------------------------------------------------------
// 5. Gradient check

const FD_STEP: f64 = 1e-6;

/// Largest `|analytic − central difference| / max(1, |central difference|)`
/// over the cost and all constraint residuals at `z`.
fn gradient_error(prob: &RendezvousProblem<'_>, z: &[f64; 6]) -> f64 {
    let mut worst: f64 = 0.0;
    let grad = prob.cost_gradient(z);
    let jac = prob.constraint_jacobian(z);
    for k in 0..6 {
        let mut zp = *z;
        let mut zm = *z;
        zp[k] += FD_STEP;
        zm[k] -= FD_STEP;
        let fd_cost = (prob.cost(&zp) - prob.cost(&zm)) / (2.0 * FD_STEP);
        worst = worst.max((grad[k] - fd_cost).abs() / fd_cost.abs().max(1.0));
        let cp = prob.constraints(&zp);
        let cm = prob.constraints(&zm);
        for i in 0..ocp::NUM_CONSTRAINTS {
            let fd = (cp[i] - cm[i]) / (2.0 * FD_STEP);
            worst = worst.max((jac[i][k] - fd).abs() / fd.abs().max(1.0));
        }
    }
    worst
}

pub fn criterion_5() -> CriterionReport {
    let mut rng = rng(5);
    let mut worst: f64 = 0.0;
    let mut points = 0;
    let mut attempts = 0;
    while points < 50 && attempts < 200_000 {
        attempts += 1;
        let inst = learned_instance(&mut rng, 3..=40);
        let clock = rng.random_range(0.0..40.0);
        let x0 = Vector2::new(rng.random_range(300.0..600.0), rng.random_range(-100.0..150.0));
        let inputs = OcpInputs {
            x0,
            energy: 1e4,
            clock,
            posterior: &inst.posterior,
            table: &inst.table,
            geometry: &inst.geometry,
            anchor: Anchor {
                time: clock,
                theta: rng.random_range(0.0..250.0),
            },
            landing: Vector2::new(500.0, 0.0),
            abort: Vector2::new(500.0, 0.0),
            horizon: 150.0,
            dwell: 3.0,
            params: inst.params,
            variance_weight: rng.random_range(0.001..0.1),
            energy_reserve: 100.0,
        };
        let prob = RendezvousProblem::new(inputs);
        let t: [f64; 4] = std::array::from_fn(|_| rng.random_range(3.0..35.0));
        let x1 = random_point(&mut rng, x0, 0.9 * inst.params.v_max * t[0]);
        let z = [x1.x, x1.y, t[0], t[1], t[2], t[3]];
        if prob.constraints(&z).iter().any(|&c| c < 0.0) || prob.plan_at(&z, Vec::new()).is_none() {
            continue;
        }
        points += 1;
        worst = worst.max(gradient_error(&prob, &z));
    }
    CriterionReport::new(
        5,
        "gradient check",
        points == 50 && worst <= 1e-4,
        format!("{points} feasible points, worst relative error {worst:.2e} (tolerance 1e-4)"),
    )
}

// ---------------------------------------------------------------------------
// 6. Oracle dominance

/// Stationary-driver problem for the grid oracle.
pub struct GridProblem {
    pub x0: Vector2<f64>,
    pub target: Vector2<f64>,
    pub landing: Vector2<f64>,
    pub abort: Vector2<f64>,
    pub energy: f64,
    pub horizon: f64,
    pub dwell: f64,
    pub params: EnergyParams,
}

impl GridProblem {
    /// Cost of the straight-line plan with durations `t`, if feasible.
    pub fn cost(&self, t: [f64; 4]) -> Option<f64> {
        let [t1, t2, t3, t4] = t;
        if t1 + t2 + t3 > self.horizon || t1 + t4 > self.horizon {
            return None;
        }
        let v_max = self.params.v_max;
        let v12 = (self.target - self.x0) / (t1 + t2);
        let x1 = self.x0 + v12 * t1;
        let s12 = v12.norm();
        let s3 = (self.landing - self.target).norm() / t3;
        let s4 = (self.abort - x1).norm() / t4;
        if s12 > v_max || s3 > v_max || s4 > v_max {
            return None;
        }
        let p = |s: f64| self.params.power(s);
        let e1 = p(s12) * t1;
        if e1 + p(s12) * t2 + p(s3) * t3 > self.energy || e1 + p(s4) * t4 > self.energy {
            return None;
        }
        Some(t2 + t3 - t1)
    }

    fn search(&self, ranges: [(f64, f64); 4], n: usize) -> Option<([f64; 4], f64)> {
        let axis = |(lo, hi): (f64, f64)| -> Vec<f64> {
            (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
        };
        let axes: Vec<Vec<f64>> = ranges.iter().map(|&r| axis(r)).collect();
        let mut best: Option<([f64; 4], f64)> = None;
        for &t1 in &axes[0] {
            for &t2 in &axes[1] {
                for &t3 in &axes[2] {
                    for &t4 in &axes[3] {
                        let t = [t1, t2, t3, t4];
                        if let Some(c) = self.cost(t) {
                            if best.is_none_or(|(_, b)| c < b) {
                                best = Some((t, c));
                            }
                        }
                    }
                }
            }
        }
        best
    }

    /// 40⁴ grid over `[t_c, t_max]`, then a second 40⁴ grid over the cells
    /// adjacent to the best point.
    pub fn grid_optimum(&self) -> Option<([f64; 4], f64)> {
        let n = 40;
        let full = (self.dwell, self.horizon);
        let (t, c) = self.search([full; 4], n)?;
        let h = (self.horizon - self.dwell) / (n - 1) as f64;
        let refine = t.map(|ti| ((ti - h).max(self.dwell), (ti + h).min(self.horizon)));
        let (rt, rc) = self.search(refine, n)?;
        Some(if rc < c { (rt, rc) } else { (t, c) })
    }
}

pub fn criterion_6() -> CriterionReport {
    let mut rng = rng(6);
    let geometry = RoadGeometry::diagonal();
    let table = BasisIntegralTable::closed_form(&VelocityProfile::reference(), BasisSpec::new(1)).expect("table");
    let stationary = BehaviorPosterior::deterministic(DVector::zeros(2), BasisSpec::new(1));
    let mut lines = Vec::new();
    let mut passed = true;
    for k in 0..5 {
        let theta = rng.random_range(150.0..350.0);
        let x0 = Vector2::new(rng.random_range(350.0..600.0), rng.random_range(-50.0..100.0));
        let horizon = rng.random_range(50.0..90.0);
        let dwell = rng.random_range(1.0..3.0);
        let params = EnergyParams::default();
        let grid = GridProblem {
            x0,
            target: geometry.point(theta),
            landing: x0,
            abort: x0,
            energy: 1e6,
            horizon,
            dwell,
            params,
        };
        let clock = rng.random_range(0.0..20.0);
        let inputs = OcpInputs {
            x0,
            energy: grid.energy,
            clock,
            posterior: &stationary,
            table: &table,
            geometry: &geometry,
            anchor: Anchor { time: clock, theta },
            landing: x0,
            abort: x0,
            horizon,
            dwell,
            params,
            variance_weight: 0.01,
            energy_reserve: 0.0,
        };
        let solved = ocp::solve(&inputs, None, &SolverSettings::default());
        let oracle = grid.grid_optimum();
        match (solved, oracle) {
            (Ok(SolveOutcome::Optimal { plan, .. }), Some((_, grid_cost))) => {
                let on_target = (plan.waypoints[1] - grid.target).norm();
                let ok = plan.cost <= grid_cost + 1e-2;
                passed &= ok;
                lines.push(format!(
                    "#{k} solver {:.4} grid {grid_cost:.4} |x2-D| {on_target:.1e}",
                    plan.cost
                ));
            }
            (other, oracle) => {
                passed = false;
                lines.push(format!(
                    "#{k} solver {:?} grid {:?}",
                    other.map(|o| o.plan().map(|p| p.cost)),
                    oracle.map(|o| o.1)
                ));
            }
        }
    }
    CriterionReport::new(6, "oracle dominance", passed, lines.join("; "))
}

// ---------------------------------------------------------------------------
// 7. Persistent safety

pub fn criterion_7(matrix: &Matrix) -> CriterionReport {
    let unsafe_runs: Vec<String> = matrix
        .runs
        .iter()
        .filter(|r| !r.output.trace.summary.persistently_safe)
        .map(|r| format!("{}#{}", r.scenario, r.seed))
        .collect();
    let depleted: Vec<String> = matrix
        .runs
        .iter()
        .filter(|r| r.output.trace.summary.phase == Phase::FailedEnergy)
        .map(|r| format!("{}#{}", r.scenario, r.seed))
        .collect();
    let unfinished = matrix
        .runs
        .iter()
        .filter(|r| !r.output.trace.summary.phase.is_terminal())
        .count();
    let mut detail = format!(
        "{} runs audited, {} unsafe, {} FAILED_ENERGY, {unfinished} unfinished",
        matrix.runs.len(),
        unsafe_runs.len(),
        depleted.len()
    );
    for (label, list) in [("unsafe", &unsafe_runs), ("depleted", &depleted)] {
        if !list.is_empty() {
            detail += &format!("; {label}: {}", list.join(" "));
        }
    }
    CriterionReport::new(7, "persistent safety", unsafe_runs.is_empty() && depleted.is_empty(), detail)
}

// ---------------------------------------------------------------------------
// 8. Risk properties

/// A plan consistent with `post`: the rendezvous waypoint is the predicted
/// mean at the rendezvous time and every leg is flyable.
fn random_plan(rng: &mut ChaCha8Rng, inst: &Instance) -> Option<(MissionPlan, Anchor)> {
    let v_max = inst.params.v_max;
    let clock = rng.random_range(0.0..30.0);
    let anchor = Anchor {
        time: clock,
        theta: rng.random_range(0.0..150.0),
    };
    let origin = Vector2::new(rng.random_range(350.0..600.0), rng.random_range(-50.0..150.0));
    let t1 = rng.random_range(3.0..20.0);
    let t2 = rng.random_range(3.0..20.0);
    let pred = predict_position(&inst.posterior, &inst.table, anchor, clock + t1 + t2).ok()?;
    let x2 = inst.geometry.point(pred.mean);
    let x1 = random_point(rng, origin, 0.8 * v_max * t1);
    if (x2 - x1).norm() > 0.8 * v_max * t2 {
        return None;
    }
    let home = Vector2::new(500.0, 0.0);
    let t3 = ((home - x2).norm() / (0.7 * v_max)).max(3.0);
    let t4 = ((home - x1).norm() / (0.7 * v_max)).max(3.0);
    let t = [t1, t2, t3, t4];
    let wp = [x1, x2, home, home];
    let v = velocities_from_waypoints(origin, &wp, &t, 3.0).ok()?;
    let energies = std::array::from_fn(|i| inst.params.power(v[i].norm()) * t[i]);
    Some((
        MissionPlan {
            origin,
            clock,
            waypoints: wp,
            velocities: v,
            durations: t,
            rendezvous_time: clock + t1 + t2,
            energies,
            predicted_theta: pred.mean,
            predicted_variance: pred.variance,
            cost: 0.0,
            multipliers: Vec::new(),
        },
        anchor,
    ))
}

fn prediction(inst: &Instance, post: &BehaviorPosterior, plan: &MissionPlan, anchor: Anchor) -> PositionPrediction {
    predict_position(post, &inst.table, anchor, plan.rendezvous_time).expect("prediction")
}

fn plans(stream: u64, count: usize, samples: std::ops::RangeInclusive<usize>) -> Vec<(Instance, MissionPlan, Anchor)> {
    let mut rng = rng(stream);
    let mut out = Vec::new();
    while out.len() < count {
        let inst = learned_instance(&mut rng, samples.clone());
        if let Some((plan, anchor)) = random_plan(&mut rng, &inst) {
            out.push((inst, plan, anchor));
        }
    }
    out
}

pub fn criterion_8() -> CriterionReport {
    const GAMMA: f64 = 2.0;

    let mut zero_worst: f64 = 0.0;
    for (inst, plan, anchor) in plans(81, 100, 3..=40) {
        let post = inst.posterior.with_scaled_covariance(0.0);
        let pred = prediction(&inst, &post, &plan, anchor);
        let d = downside_potential(&plan, &pred, &inst.geometry, &inst.params, GAMMA).expect("downside");
        zero_worst = zero_worst.max(d.rho.abs());
    }

    let scales = [0.0, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0];
    let mut monotone_breaks = 0;
    for (inst, plan, anchor) in plans(82, 100, 3..=40) {
        let rhos: Vec<f64> = scales
            .iter()
            .map(|&c| {
                let pred = prediction(&inst, &inst.posterior.with_scaled_covariance(c), &plan, anchor);
                downside_potential(&plan, &pred, &inst.geometry, &inst.params, GAMMA)
                    .expect("downside")
                    .rho
            })
            .collect();
        if rhos.windows(2).any(|w| w[1] < w[0] - 1e-9) {
            monotone_breaks += 1;
        }
    }

    let mut sweep_gap = f64::NEG_INFINITY;
    let mut instances = 0;
    let mut rng8 = rng(83);
    while instances < 20 {
        let inst = learned_instance(&mut rng8, 5..=40);
        let Some((plan, anchor)) = random_plan(&mut rng8, &inst) else { continue };
        let pred = prediction(&inst, &inst.posterior, &plan, anchor);
        let d = downside_potential(&plan, &pred, &inst.geometry, &inst.params, GAMMA).expect("downside");
        if !d.rho.is_finite() {
            continue;
        }
        instances += 1;
        let half = GAMMA * pred.std_dev();
        for k in 0..=100 {
            let theta = pred.mean - half + 2.0 * half * k as f64 / 100.0;
            let extra = extra_energy_at(&plan, theta, &inst.geometry, &inst.params)
                .expect("extra energy")
                .unwrap_or(f64::INFINITY);
            sweep_gap = sweep_gap.max(extra - d.rho);
        }
    }

    let passed = zero_worst <= 1e-9 && monotone_breaks == 0 && sweep_gap <= 1e-9;
    CriterionReport::new(
        8,
        "risk properties",
        passed,
        format!(
            "zero variance max |rho| {zero_worst:.1e} (100 plans); {monotone_breaks}/100 plans non-monotone in covariance scale; \
             101-point sweep max gap {sweep_gap:.1e} (20 instances)"
        ),
    )
}

// ---------------------------------------------------------------------------
// 9. Determinism

pub fn criterion_9() -> CriterionReport {
    let cases = [("low_risk", 1), ("high_risk", 2), ("adversarial_switch", 3), ("exact_model", 4)];
    let mut mismatches = Vec::new();
    let mut bytes = 0;
    for (name, seed) in cases {
        let mut cfg = bundled_config(name);
        cfg.run.seed = seed;
        let a = run_scenario(&cfg).expect("run");
        let b = run_scenario(&cfg).expect("run");
        for format in [TraceFormat::Csv, TraceFormat::Jsonl] {
            let (ea, eb) = (a.encode(format), b.encode(format));
            bytes += ea.len();
            if ea.as_bytes() != eb.as_bytes() {
                mismatches.push(format!("{name}#{seed}.{}", format.extension()));
            }
        }
    }
    let detail = if mismatches.is_empty() {
        format!("{} trace pairs byte-identical ({bytes} bytes)", cases.len() * 2)
    } else {
        format!("differing traces: {}", mismatches.join(" "))
    };
    CriterionReport::new(9, "determinism", mismatches.is_empty(), detail)
}

/// Every criterion, in order.
pub fn run_all() -> Vec<CriterionReport> {
    let matrix = Matrix::build();
    vec![
        criterion_1(&matrix),
        criterion_2(&matrix),
        criterion_3(),
        criterion_4(),
        criterion_5(),
        criterion_6(),
        criterion_7(&matrix),
        criterion_8(),
        criterion_9(),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_is_exact_for_cubics() {
        let v = simpson(|t| t * t * t - 2.0 * t, 0.0, 3.0, 4);
        assert!((v - (81.0 / 4.0 - 9.0)).abs() < 1e-12);
    }

    #[test]
    fn grid_cost_rejects_overspeed() {
        let g = GridProblem {
            x0: Vector2::zeros(),
            target: Vector2::new(300.0, 0.0),
            landing: Vector2::zeros(),
            abort: Vector2::zeros(),
            energy: 1e6,
            horizon: 100.0,
            dwell: 1.0,
            params: EnergyParams::default(),
        };
        assert!(g.cost([5.0, 5.0, 30.0, 30.0]).is_none());
        assert_eq!(g.cost([10.0, 10.0, 25.0, 25.0]), Some(25.0));
    }

    #[test]
    fn oracle_matches_closed_form_one_sample() {
        // one sample, scalar basis: posterior precision 1/s + 1/σ²
        let (mean, cov) = posterior_oracle(&DMatrix::from_element(1, 1, 4.0), 1.0, &[2.0], &[7.0], 0);
        assert!((cov[(0, 0)] - 0.8).abs() < 1e-15);
        assert!((mean[0] - 1.6).abs() < 1e-15);
    }
}
