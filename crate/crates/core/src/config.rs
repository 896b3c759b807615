//! Scenario files: every physical constant, threshold, noise level and run
//! control in one strictly-parsed TOML document.
//!
//! ```toml
//! [run]
//! seed = 1
//!
//! [driver]
//! gain = 1.1
//! sigma = 3.0
//!
//! [mission]
//! epsilon = 5.0
//! ```
//!
//! Omitted sections and fields take the defaults below; unknown fields are
//! rejected. [`ScenarioConfig::validate`] reports every problem with its
//! dotted field path.

use std::fmt;

use nalgebra::{DMatrix, DVector, Vector2};
use serde::{Deserialize, Serialize};

use crate::behavior::{BehaviorPosterior, BehaviorPrior};
use crate::energy::EnergyParams;
use crate::error::{RdvError, Result};
use crate::ocp::nlp::AugLagSettings;
use crate::ocp::SolverSettings;
use crate::path::{BasisIntegralTable, BasisSpec, PathModel, Polynomial, RoadGeometry, VelocityProfile};
use crate::risk::ThresholdMode;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub name: String,
    pub run: RunSection,
    pub path: PathSection,
    pub profile: ProfileSection,
    pub learner: LearnerSection,
    pub driver: DriverSection,
    pub vehicle: VehicleSection,
    pub mission: MissionSection,
    pub risk: RiskSection,
    pub solver: SolverSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub seed: u64,
    /// Control and sensing period T_s, s.
    pub step: f64,
    /// Hard stop on simulated time, s.
    pub duration_cap: f64,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            seed: 1,
            step: 1.0,
            duration_cap: 200.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PathMode {
    /// p(θ) = (θ, θ), θ ∈ [0, 1000].
    Diagonal,
    /// Same segment, θ in meters of travel.
    ArcLengthDiagonal,
    Polynomial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathSection {
    pub mode: PathMode,
    /// Coefficients of x(θ) and y(θ), lowest degree first (polynomial mode).
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub theta_min: f64,
    pub theta_max: f64,
}

impl Default for PathSection {
    fn default() -> Self {
        Self {
            mode: PathMode::Diagonal,
            x: Vec::new(),
            y: Vec::new(),
            theta_min: 0.0,
            theta_max: 1000.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileKind {
    Polynomial,
    Tabulated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProfileSection {
    pub kind: ProfileKind,
    /// θ̇_h(t) coefficients, lowest degree first.
    pub coeffs: Vec<f64>,
    pub t_min: f64,
    pub t_max: f64,
    pub times: Vec<f64>,
    pub speeds: Vec<f64>,
}

impl Default for ProfileSection {
    fn default() -> Self {
        Self {
            kind: ProfileKind::Polynomial,
            coeffs: vec![10.0, -0.05],
            t_min: 0.0,
            t_max: 200.0,
            times: Vec::new(),
            speeds: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LearnerSection {
    pub basis_degree: usize,
    /// Σ_m = prior_scale · I.
    pub prior_scale: f64,
    /// Regression noise standard deviation; the driver's sensor σ when absent.
    pub noise_std: Option<f64>,
    /// Skip learning and plan with these weights and zero covariance.
    pub fixed_weights: Option<Vec<f64>>,
}

impl Default for LearnerSection {
    fn default() -> Self {
        Self {
            basis_degree: 1,
            prior_scale: 1.0,
            noise_std: None,
            fixed_weights: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainChange {
    /// Mission clock from which `gain` applies, s.
    pub from: f64,
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DriverSection {
    /// a in θ̇_d = a·θ̇_h.
    pub gain: f64,
    /// Velocity measurement noise σ, m/s.
    pub sigma: f64,
    /// Position measurement noise; σ/10 when absent.
    pub sigma_pos: Option<f64>,
    pub initial_theta: f64,
    /// Piecewise-constant gain changes, sorted by `from`.
    pub schedule: Vec<GainChange>,
}

impl Default for DriverSection {
    fn default() -> Self {
        Self {
            gain: 1.0,
            sigma: 3.0,
            sigma_pos: None,
            initial_theta: 0.0,
            schedule: Vec::new(),
        }
    }
}

impl DriverSection {
    pub fn position_noise(&self) -> f64 {
        self.sigma_pos.unwrap_or(self.sigma / 10.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VehicleSection {
    pub mass: f64,
    pub hover: f64,
    pub v_max: f64,
    pub initial_energy: f64,
    pub start: [f64; 2],
}

impl Default for VehicleSection {
    fn default() -> Self {
        Self {
            mass: 1.0,
            hover: 5.0,
            v_max: 15.0,
            initial_energy: 5000.0,
            start: [500.0, 0.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MissionSection {
    pub landing: [f64; 2],
    pub abort: [f64; 2],
    /// Absolute mission deadline; both branches must finish by it, s.
    pub t_max: f64,
    /// Minimum segment duration t_c, s.
    pub dwell: f64,
    /// Commit once t₁ ≤ ε, s. May be `inf`.
    pub epsilon: f64,
    pub capture_radius: f64,
    /// Re-aim the rendezvous leg at the latest prediction every step.
    pub reaim: bool,
    /// Energy held back on the rendezvous branch, J.
    pub energy_reserve: f64,
}

impl Default for MissionSection {
    fn default() -> Self {
        Self {
            landing: [500.0, 0.0],
            abort: [500.0, 0.0],
            t_max: 80.0,
            dwell: 3.0,
            epsilon: 5.0,
            capture_radius: 5.0,
            reaim: true,
            energy_reserve: 200.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RiskSection {
    /// Confidence multiplier γ_max.
    pub gamma: f64,
    pub threshold: ThresholdMode,
    /// λ on Var[θ_d(T_R)] in the planning cost, s/m².
    pub variance_weight: f64,
    /// Enable the early-abort trigger on ρ_A.
    pub abort_trigger: bool,
    /// γ_A, J.
    pub abort_trigger_threshold: f64,
}

impl Default for RiskSection {
    fn default() -> Self {
        Self {
            gamma: 2.0,
            threshold: ThresholdMode::default(),
            variance_weight: 0.01,
            abort_trigger: false,
            abort_trigger_threshold: 2000.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub stationarity_tol: f64,
    pub feasibility_tol: f64,
    pub max_iterations: usize,
    pub max_inner_iterations: usize,
    pub multistart: usize,
    pub perturbation: f64,
    pub straighten_pnr: bool,
}

impl Default for SolverSection {
    fn default() -> Self {
        let al = AugLagSettings::default();
        let s = SolverSettings::default();
        Self {
            stationarity_tol: al.stationarity_tol,
            feasibility_tol: al.feasibility_tol,
            max_iterations: al.max_outer,
            max_inner_iterations: al.max_inner,
            multistart: s.multistart,
            perturbation: s.perturbation,
            straighten_pnr: s.straighten_pnr,
        }
    }
}

/// One failed validation rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigIssue {
    pub field: String,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.field, self.message)
    }
}

struct Checker(Vec<ConfigIssue>);

impl Checker {
    fn fail(&mut self, field: &str, message: impl Into<String>) {
        self.0.push(ConfigIssue {
            field: field.to_string(),
            message: message.into(),
        });
    }

    fn positive(&mut self, field: &str, v: f64) {
        if !(v > 0.0 && v.is_finite()) {
            self.fail(field, format!("must be > 0 and finite (got {v})"));
        }
    }

    fn non_negative(&mut self, field: &str, v: f64) {
        if !(v >= 0.0 && v.is_finite()) {
            self.fail(field, format!("must be >= 0 and finite (got {v})"));
        }
    }

    fn finite_point(&mut self, field: &str, p: [f64; 2]) {
        if !p.iter().all(|c| c.is_finite()) {
            self.fail(field, "must have finite coordinates");
        }
    }
}

impl ScenarioConfig {
    /// Parses a scenario document without range checks.
    pub fn parse_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| RdvError::Config(e.message().trim().to_string()))
    }

    /// Parses and validates a scenario document.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg = Self::parse_toml(text)?;
        cfg.validate().map_err(|issues| {
            RdvError::Config(issues.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))
        })?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario config serializes")
    }

    /// Every violated rule, or `Ok` if none.
    pub fn validate(&self) -> std::result::Result<(), Vec<ConfigIssue>> {
        let mut c = Checker(Vec::new());

        c.positive("run.step", self.run.step);
        c.positive("run.duration_cap", self.run.duration_cap);

        if self.path.mode == PathMode::Polynomial {
            if self.path.x.is_empty() || self.path.y.is_empty() {
                c.fail("path.x", "and path.y are required in polynomial mode");
            }
            if !(self.path.theta_min < self.path.theta_max) {
                c.fail("path.theta_max", "must exceed path.theta_min");
            }
        }
        if let Err(e) = self.road() {
            c.fail("path", e.to_string());
        }
        match self.velocity_profile() {
            Ok(p) => {
                let (_, t_hi) = p.domain();
                if self.mission.t_max > t_hi {
                    c.fail(
                        "mission.t_max",
                        format!("must not exceed the profile end {t_hi} (got {})", self.mission.t_max),
                    );
                }
            }
            Err(e) => c.fail("profile", e.to_string()),
        }

        if self.learner.basis_degree > 8 {
            c.fail("learner.basis_degree", "must be <= 8");
        }
        c.positive("learner.prior_scale", self.learner.prior_scale);
        if let Some(s) = self.learner.noise_std {
            c.positive("learner.noise_std", s);
        } else if !(self.driver.sigma > 0.0) {
            c.fail("learner.noise_std", "is required when driver.sigma is 0");
        }
        if let Some(w) = &self.learner.fixed_weights {
            if w.len() != self.learner.basis_degree + 1 {
                c.fail("learner.fixed_weights", format!("must have basis_degree + 1 = {} entries", self.learner.basis_degree + 1));
            }
        }

        c.non_negative("driver.gain", self.driver.gain);
        c.non_negative("driver.sigma", self.driver.sigma);
        if let Some(s) = self.driver.sigma_pos {
            c.non_negative("driver.sigma_pos", s);
        }
        let mut last = f64::NEG_INFINITY;
        for (i, g) in self.driver.schedule.iter().enumerate() {
            if !(g.from > last) || !g.from.is_finite() {
                c.fail(&format!("driver.schedule[{i}].from"), "must be finite and strictly increasing");
            }
            c.non_negative(&format!("driver.schedule[{i}].gain"), g.gain);
            last = g.from;
        }

        c.positive("vehicle.mass", self.vehicle.mass);
        c.positive("vehicle.hover", self.vehicle.hover);
        c.positive("vehicle.v_max", self.vehicle.v_max);
        c.positive("vehicle.initial_energy", self.vehicle.initial_energy);
        c.finite_point("vehicle.start", self.vehicle.start);

        c.finite_point("mission.landing", self.mission.landing);
        c.finite_point("mission.abort", self.mission.abort);
        c.positive("mission.dwell", self.mission.dwell);
        c.positive("mission.t_max", self.mission.t_max);
        if self.mission.t_max <= 2.0 * self.mission.dwell {
            c.fail("mission.t_max", "must exceed 2 * mission.dwell");
        }
        if !(self.mission.epsilon >= 0.0) {
            c.fail("mission.epsilon", "must be >= 0 (inf allowed)");
        }
        c.positive("mission.capture_radius", self.mission.capture_radius);
        c.non_negative("mission.energy_reserve", self.mission.energy_reserve);

        c.non_negative("risk.gamma", self.risk.gamma);
        c.non_negative("risk.variance_weight", self.risk.variance_weight);
        match self.risk.threshold {
            ThresholdMode::Constant(j) => c.non_negative("risk.threshold.value", j),
            ThresholdMode::FractionOfRemaining(f) => {
                if !(0.0..=1.0).contains(&f) {
                    c.fail("risk.threshold.value", "fraction must lie in [0, 1]");
                }
            }
        }
        c.non_negative("risk.abort_trigger_threshold", self.risk.abort_trigger_threshold);

        c.positive("solver.stationarity_tol", self.solver.stationarity_tol);
        c.positive("solver.feasibility_tol", self.solver.feasibility_tol);
        if self.solver.max_iterations == 0 {
            c.fail("solver.max_iterations", "must be >= 1");
        }
        if self.solver.max_inner_iterations == 0 {
            c.fail("solver.max_inner_iterations", "must be >= 1");
        }
        if !(0.0..1.0).contains(&self.solver.perturbation) {
            c.fail("solver.perturbation", "must lie in [0, 1)");
        }

        if c.0.is_empty() {
            Ok(())
        } else {
            Err(c.0)
        }
    }

    pub fn road(&self) -> Result<RoadGeometry> {
        match self.path.mode {
            PathMode::Diagonal => Ok(RoadGeometry::diagonal()),
            PathMode::ArcLengthDiagonal => Ok(RoadGeometry::arc_length_diagonal()),
            PathMode::Polynomial => RoadGeometry::new(
                Polynomial::new(self.path.x.clone()),
                Polynomial::new(self.path.y.clone()),
                self.path.theta_min,
                self.path.theta_max,
            ),
        }
    }

    pub fn velocity_profile(&self) -> Result<VelocityProfile> {
        let p = &self.profile;
        match p.kind {
            ProfileKind::Polynomial => VelocityProfile::polynomial(p.coeffs.clone(), p.t_min, p.t_max),
            ProfileKind::Tabulated => VelocityProfile::tabulated(p.times.clone(), p.speeds.clone()),
        }
    }

    pub fn path_model(&self) -> Result<PathModel> {
        Ok(PathModel::new(self.road()?, self.velocity_profile()?))
    }

    pub fn basis(&self) -> BasisSpec {
        BasisSpec::new(self.learner.basis_degree)
    }

    pub fn basis_table(&self) -> Result<BasisIntegralTable> {
        Ok(BasisIntegralTable::for_profile(&self.velocity_profile()?, self.basis()))
    }

    pub fn regression_noise_std(&self) -> f64 {
        self.learner.noise_std.unwrap_or(self.driver.sigma)
    }

    pub fn prior(&self) -> Result<BehaviorPrior> {
        let s = self.regression_noise_std();
        BehaviorPrior::isotropic(self.basis().dim(), self.learner.prior_scale, s * s)
    }

    /// The fixed-weight posterior if learning is disabled.
    pub fn fixed_posterior(&self) -> Option<BehaviorPosterior> {
        self.learner
            .fixed_weights
            .as_ref()
            .map(|w| BehaviorPosterior::deterministic(DVector::from_column_slice(w), self.basis()))
    }

    pub fn energy_params(&self) -> EnergyParams {
        EnergyParams {
            mass: self.vehicle.mass,
            hover: self.vehicle.hover,
            v_max: self.vehicle.v_max,
        }
    }

    pub fn solver_settings(&self) -> SolverSettings {
        let s = &self.solver;
        SolverSettings {
            aug_lag: AugLagSettings {
                stationarity_tol: s.stationarity_tol,
                feasibility_tol: s.feasibility_tol,
                max_outer: s.max_iterations,
                max_inner: s.max_inner_iterations,
                ..AugLagSettings::default()
            },
            multistart: s.multistart,
            perturbation: s.perturbation,
            straighten_pnr: s.straighten_pnr,
        }
    }

    pub fn start(&self) -> Vector2<f64> {
        Vector2::from(self.vehicle.start)
    }

    pub fn landing(&self) -> Vector2<f64> {
        Vector2::from(self.mission.landing)
    }

    pub fn abort_site(&self) -> Vector2<f64> {
        Vector2::from(self.mission.abort)
    }

    /// Prior covariance matrix, for reporting.
    pub fn prior_cov(&self) -> DMatrix<f64> {
        let m = self.basis().dim();
        DMatrix::identity(m, m) * self.learner.prior_scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_the_default() {
        let cfg = ScenarioConfig::from_toml_str("").unwrap();
        assert_eq!(cfg, ScenarioConfig::default());
    }

    #[test]
    fn round_trips_through_toml() {
        let mut cfg = ScenarioConfig::default();
        cfg.driver.schedule.push(GainChange { from: 30.0, gain: 1.6 });
        cfg.risk.threshold = ThresholdMode::FractionOfRemaining(0.05);
        let text = cfg.to_toml_string();
        assert_eq!(ScenarioConfig::from_toml_str(&text).unwrap(), cfg);
    }

    #[test]
    fn unknown_fields_rejected() {
        let err = ScenarioConfig::from_toml_str("[mission]\nepsilonn = 5.0\n").unwrap_err();
        assert!(err.to_string().contains("epsilonn"), "{err}");
    }

    #[test]
    fn zero_dwell_names_the_field() {
        let err = ScenarioConfig::from_toml_str("[mission]\ndwell = 0.0\n").unwrap_err();
        assert!(err.to_string().contains("mission.dwell must be > 0"), "{err}");
    }

    #[test]
    fn infinite_epsilon_parses() {
        let cfg = ScenarioConfig::from_toml_str("[mission]\nepsilon = inf\n").unwrap();
        assert!(cfg.mission.epsilon.is_infinite());
    }

    #[test]
    fn collects_all_issues() {
        let mut cfg = ScenarioConfig::default();
        cfg.vehicle.mass = -1.0;
        cfg.run.step = 0.0;
        cfg.mission.t_max = 500.0;
        let issues = cfg.validate().unwrap_err();
        let fields: Vec<_> = issues.iter().map(|i| i.field.as_str()).collect();
        assert!(fields.contains(&"vehicle.mass"));
        assert!(fields.contains(&"run.step"));
        assert!(fields.contains(&"mission.t_max"));
    }
}
