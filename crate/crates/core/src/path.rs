//! Road geometry, the historical velocity profile along it, and the
//! time-integrals of basis functions that make position prediction closed-form.

use nalgebra::{DVector, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{RdvError, Result};

/// Dense univariate polynomial, coefficients in ascending powers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.len() > 1 && coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Self { coeffs }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(vec![c])
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn derivative(&self) -> Self {
        if self.coeffs.len() == 1 {
            return Self::constant(0.0);
        }
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| k as f64 * c)
                .collect(),
        )
    }

    /// Antiderivative with zero constant term.
    pub fn antiderivative(&self) -> Self {
        let mut out = Vec::with_capacity(self.coeffs.len() + 1);
        out.push(0.0);
        out.extend(
            self.coeffs
                .iter()
                .enumerate()
                .map(|(k, &c)| c / (k + 1) as f64),
        );
        Self::new(out)
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Self::new(out)
    }

    pub fn powi(&self, n: usize) -> Self {
        (0..n).fold(Self::constant(1.0), |acc, _| acc.mul(self))
    }
}

/// Planar road parameterized by a scalar path coordinate θ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoadGeometry {
    x: Polynomial,
    y: Polynomial,
    theta_min: f64,
    theta_max: f64,
}

impl RoadGeometry {
    pub fn new(x: Polynomial, y: Polynomial, theta_min: f64, theta_max: f64) -> Result<Self> {
        if !(theta_min.is_finite() && theta_max.is_finite() && theta_min < theta_max) {
            return Err(RdvError::Config(format!(
                "path domain [{theta_min}, {theta_max}] must be finite and non-empty"
            )));
        }
        if x.coeffs().iter().chain(y.coeffs()).any(|c| !c.is_finite()) {
            return Err(RdvError::Config("path coefficients must be finite".into()));
        }
        Ok(Self {
            x,
            y,
            theta_min,
            theta_max,
        })
    }

    /// p(θ) = (θ, θ) on θ ∈ [0, 1000]; θ is a path parameter, not arc length.
    pub fn diagonal() -> Self {
        Self {
            x: Polynomial::new(vec![0.0, 1.0]),
            y: Polynomial::new(vec![0.0, 1.0]),
            theta_min: 0.0,
            theta_max: 1000.0,
        }
    }

    /// The same (0,0)→(1000,1000) segment with θ in meters of travel.
    pub fn arc_length_diagonal() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Self {
            x: Polynomial::new(vec![0.0, s]),
            y: Polynomial::new(vec![0.0, s]),
            theta_min: 0.0,
            theta_max: 1000.0 * std::f64::consts::SQRT_2,
        }
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.theta_min, self.theta_max)
    }

    pub fn position_at(&self, theta: f64) -> Result<Vector2<f64>> {
        if !(theta >= self.theta_min && theta <= self.theta_max) {
            return Err(RdvError::Domain {
                what: "path parameter",
                value: theta,
                min: self.theta_min,
                max: self.theta_max,
            });
        }
        Ok(self.point(theta))
    }

    /// Unchecked evaluation; the polynomial continues past the domain ends.
    pub fn point(&self, theta: f64) -> Vector2<f64> {
        Vector2::new(self.x.eval(theta), self.y.eval(theta))
    }

    /// dp/dθ.
    pub fn tangent(&self, theta: f64) -> Vector2<f64> {
        Vector2::new(
            self.x.derivative().eval(theta),
            self.y.derivative().eval(theta),
        )
    }
}

/// Prototypical speed of traffic along the road as a function of mission time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum VelocityProfile {
    Polynomial {
        poly: Polynomial,
        t_min: f64,
        t_max: f64,
    },
    /// Piecewise-linear samples; only integrable by quadrature.
    Tabulated { times: Vec<f64>, speeds: Vec<f64> },
}

impl VelocityProfile {
    /// θ̇_h(t) = 10(1 − t/200) on [0, 200] s.
    pub fn reference() -> Self {
        Self::Polynomial {
            poly: Polynomial::new(vec![10.0, -0.05]),
            t_min: 0.0,
            t_max: 200.0,
        }
    }

    pub fn polynomial(coeffs: Vec<f64>, t_min: f64, t_max: f64) -> Result<Self> {
        if !(t_min.is_finite() && t_max.is_finite() && t_min < t_max) {
            return Err(RdvError::Config(format!(
                "profile domain [{t_min}, {t_max}] must be finite and non-empty"
            )));
        }
        if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) {
            return Err(RdvError::Config(
                "profile coefficients must be finite and non-empty".into(),
            ));
        }
        let poly = Polynomial::new(coeffs);
        let n = 2000;
        for k in 0..=n {
            let t = t_min + (t_max - t_min) * k as f64 / n as f64;
            let v = poly.eval(t);
            if v < -1e-9 {
                return Err(RdvError::Config(format!(
                    "profile is negative ({v:.3e} m/s) at t = {t:.3} s; end the domain at its root"
                )));
            }
        }
        Ok(Self::Polynomial { poly, t_min, t_max })
    }

    pub fn tabulated(times: Vec<f64>, speeds: Vec<f64>) -> Result<Self> {
        if times.len() < 2 || times.len() != speeds.len() {
            return Err(RdvError::Config(
                "tabulated profile needs at least two (time, speed) pairs of equal length".into(),
            ));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(RdvError::Config(
                "tabulated profile times must be strictly increasing".into(),
            ));
        }
        if speeds.iter().chain(&times).any(|v| !v.is_finite()) || speeds.iter().any(|&v| v < 0.0)
        {
            return Err(RdvError::Config(
                "tabulated profile speeds must be finite and non-negative".into(),
            ));
        }
        Ok(Self::Tabulated { times, speeds })
    }

    pub fn domain(&self) -> (f64, f64) {
        match self {
            Self::Polynomial { t_min, t_max, .. } => (*t_min, *t_max),
            Self::Tabulated { times, .. } => (times[0], times[times.len() - 1]),
        }
    }

    pub fn contains(&self, t: f64) -> bool {
        let (lo, hi) = self.domain();
        t >= lo && t <= hi
    }

    fn check(&self, what: &'static str, t: f64) -> Result<()> {
        let (min, max) = self.domain();
        if self.contains(t) {
            Ok(())
        } else {
            Err(RdvError::Domain {
                what,
                value: t,
                min,
                max,
            })
        }
    }

    pub fn velocity_at(&self, t: f64) -> Result<f64> {
        self.check("profile time", t)?;
        Ok(self.value(t))
    }

    /// Unchecked evaluation (polynomials extrapolate, tables clamp).
    pub fn value(&self, t: f64) -> f64 {
        match self {
            Self::Polynomial { poly, .. } => poly.eval(t),
            Self::Tabulated { times, speeds } => {
                if t <= times[0] {
                    return speeds[0];
                }
                let last = times.len() - 1;
                if t >= times[last] {
                    return speeds[last];
                }
                let k = times.partition_point(|&x| x <= t) - 1;
                let w = (t - times[k]) / (times[k + 1] - times[k]);
                speeds[k] + w * (speeds[k + 1] - speeds[k])
            }
        }
    }

    /// Upper bound on |dθ̇_h/dt| over the domain (sampled for polynomials).
    pub fn max_abs_acceleration(&self) -> f64 {
        match self {
            Self::Polynomial { poly, t_min, t_max } => {
                let d = poly.derivative();
                let n = 2000;
                (0..=n)
                    .map(|k| d.eval(t_min + (t_max - t_min) * k as f64 / n as f64).abs())
                    .fold(0.0, f64::max)
            }
            Self::Tabulated { times, speeds } => times
                .windows(2)
                .zip(speeds.windows(2))
                .map(|(t, v)| ((v[1] - v[0]) / (t[1] - t[0])).abs())
                .fold(0.0, f64::max),
        }
    }
}

/// Polynomial features φ(v) = [1, v, …, v^degree].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisSpec {
    pub degree: usize,
}

impl BasisSpec {
    pub fn new(degree: usize) -> Self {
        Self { degree }
    }

    pub fn dim(&self) -> usize {
        self.degree + 1
    }

    pub fn eval(&self, v: f64) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim());
        let mut p = 1.0;
        for k in 0..self.dim() {
            out[k] = p;
            p *= v;
        }
        out
    }
}

impl Default for BasisSpec {
    fn default() -> Self {
        Self { degree: 1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum IntegralMethod {
    /// Antiderivatives of θ̇_h(t)^k, k = 0..m.
    ClosedForm(Vec<Polynomial>),
    Quadrature { tol: f64 },
}

/// Evaluates ψ(t₀, t_f) = ∫ φ(θ̇_h(τ)) dτ for a fixed basis and profile.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisIntegralTable {
    basis: BasisSpec,
    profile: VelocityProfile,
    method: IntegralMethod,
}

impl BasisIntegralTable {
    /// Exact integrals for a polynomial profile.
    pub fn closed_form(profile: &VelocityProfile, basis: BasisSpec) -> Result<Self> {
        let VelocityProfile::Polynomial { poly, .. } = profile else {
            return Err(RdvError::Config(
                "closed-form basis integrals need a polynomial profile; \
                 build the table with BasisIntegralTable::quadrature instead"
                    .into(),
            ));
        };
        let antiderivs = (0..basis.dim())
            .map(|k| poly.powi(k).antiderivative())
            .collect();
        Ok(Self {
            basis,
            profile: profile.clone(),
            method: IntegralMethod::ClosedForm(antiderivs),
        })
    }

    /// Adaptive-Simpson integrals for any profile, absolute tolerance `tol` per entry.
    pub fn quadrature(profile: &VelocityProfile, basis: BasisSpec, tol: f64) -> Self {
        Self {
            basis,
            profile: profile.clone(),
            method: IntegralMethod::Quadrature { tol },
        }
    }

    /// Closed form when possible, quadrature (tol 1e-10) otherwise.
    pub fn for_profile(profile: &VelocityProfile, basis: BasisSpec) -> Self {
        Self::closed_form(profile, basis)
            .unwrap_or_else(|_| Self::quadrature(profile, basis, 1e-10))
    }

    pub fn basis(&self) -> BasisSpec {
        self.basis
    }

    pub fn profile(&self) -> &VelocityProfile {
        &self.profile
    }

    pub fn is_closed_form(&self) -> bool {
        matches!(self.method, IntegralMethod::ClosedForm(_))
    }

    pub fn psi(&self, t0: f64, tf: f64) -> Result<DVector<f64>> {
        self.profile.check("integration start", t0)?;
        self.profile.check("integration end", tf)?;
        if tf < t0 {
            return Err(RdvError::Input(format!(
                "integration interval reversed: t0 = {t0} > tf = {tf}"
            )));
        }
        Ok(self.psi_unchecked(t0, tf))
    }

    /// No domain checks; used inside the optimizer where trial points may stray.
    pub fn psi_unchecked(&self, t0: f64, tf: f64) -> DVector<f64> {
        match &self.method {
            IntegralMethod::ClosedForm(anti) => {
                DVector::from_iterator(anti.len(), anti.iter().map(|a| a.eval(tf) - a.eval(t0)))
            }
            IntegralMethod::Quadrature { tol } => DVector::from_iterator(
                    self.basis.dim(),
                    (0..self.basis.dim()).map(|k| {
                        adaptive_simpson(
                            &|t| self.profile.value(t).powi(k as i32),
                            t0,
                            tf,
                            *tol,
                        )
                    }),
            ),
        }
    }

    /// dψ/dt_f = φ(θ̇_h(t_f)).
    pub fn phi_at(&self, t: f64) -> DVector<f64> {
        self.basis.eval(self.profile.value(t))
    }
}

/// Adaptive Simpson quadrature of a scalar function on [a, b].
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol.max(f64::EPSILON), 50)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Road geometry plus the historical velocity profile along it.
#[derive(Debug, Clone, PartialEq)]
pub struct PathModel {
    geometry: RoadGeometry,
    profile: VelocityProfile,
}

impl PathModel {
    pub fn new(geometry: RoadGeometry, profile: VelocityProfile) -> Self {
        Self { geometry, profile }
    }

    pub fn diagonal() -> Self {
        Self::new(RoadGeometry::diagonal(), VelocityProfile::reference())
    }

    pub fn arc_length_diagonal() -> Self {
        Self::new(
            RoadGeometry::arc_length_diagonal(),
            VelocityProfile::reference(),
        )
    }

    pub fn geometry(&self) -> &RoadGeometry {
        &self.geometry
    }

    pub fn profile(&self) -> &VelocityProfile {
        &self.profile
    }

    pub fn position_at(&self, theta: f64) -> Result<Vector2<f64>> {
        self.geometry.position_at(theta)
    }

    pub fn historical_velocity_at(&self, t: f64) -> Result<f64> {
        self.profile.velocity_at(t)
    }

    /// Closed-form ψ(t₀, t_f); fails for profiles that need quadrature.
    pub fn basis_integrals(&self, basis: BasisSpec, t0: f64, tf: f64) -> Result<DVector<f64>> {
        BasisIntegralTable::closed_form(&self.profile, basis)?.psi(t0, tf)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn polynomial_ops() {
        let p = Polynomial::new(vec![1.0, 2.0, 3.0]);
        assert_eq!(p.eval(2.0), 17.0);
        assert_eq!(p.derivative().coeffs(), &[2.0, 6.0]);
        assert_eq!(p.antiderivative().coeffs(), &[0.0, 1.0, 1.0, 1.0]);
        assert_eq!(Polynomial::new(vec![1.0, 1.0]).powi(2).coeffs(), &[1.0, 2.0, 1.0]);
        assert_eq!(Polynomial::new(vec![3.0, 0.0, 0.0]).degree(), 0);
    }

    #[test]
    fn diagonal_positions() {
        let diag = PathModel::diagonal();
        assert_eq!(diag.position_at(0.0).unwrap(), Vector2::new(0.0, 0.0));
        assert_eq!(diag.position_at(1000.0).unwrap(), Vector2::new(1000.0, 1000.0));

        let arc = PathModel::arc_length_diagonal();
        let mid = arc.position_at(500.0 * std::f64::consts::SQRT_2).unwrap();
        assert_relative_eq!(mid.x, 500.0, epsilon = 1e-9);
        assert_relative_eq!(mid.y, 500.0, epsilon = 1e-9);
    }

    #[test]
    fn position_out_of_domain_names_value() {
        let err = PathModel::diagonal().position_at(-3.0).unwrap_err();
        match err {
            RdvError::Domain { value, .. } => assert_eq!(value, -3.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn historical_profile_values() {
        let path = PathModel::diagonal();
        assert_eq!(path.historical_velocity_at(0.0).unwrap(), 10.0);
        assert_eq!(path.historical_velocity_at(200.0).unwrap(), 0.0);
        assert_eq!(path.historical_velocity_at(100.0).unwrap(), 5.0);
        assert!(path.historical_velocity_at(200.5).is_err());
    }

    #[test]
    fn negative_profile_rejected() {
        assert!(VelocityProfile::polynomial(vec![10.0, -0.05], 0.0, 250.0).is_err());
    }

    #[test]
    fn closed_form_integrals() {
        let path = PathModel::diagonal();
        let psi = path.basis_integrals(BasisSpec::new(1), 0.0, 20.0).unwrap();
        assert_relative_eq!(psi[0], 20.0, epsilon = 1e-12);
        assert_relative_eq!(psi[1], 190.0, epsilon = 1e-12);

        let psi = path.basis_integrals(BasisSpec::new(2), 0.0, 20.0).unwrap();
        // 100t − t²/2 + t³/1200 at t = 20
        assert_relative_eq!(psi[2], 1806.0 + 2.0 / 3.0, epsilon = 1e-9);

        let zero = path.basis_integrals(BasisSpec::new(3), 50.0, 50.0).unwrap();
        assert!(zero.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn tabulated_profile_needs_quadrature() {
        let prof = VelocityProfile::tabulated(vec![0.0, 100.0, 200.0], vec![10.0, 5.0, 0.0]).unwrap();
        let err = BasisIntegralTable::closed_form(&prof, BasisSpec::new(1)).unwrap_err();
        assert!(err.to_string().contains("quadrature"));
        let table = BasisIntegralTable::quadrature(&prof, BasisSpec::new(1), 1e-10);
        let psi = table.psi(0.0, 20.0).unwrap();
        assert_relative_eq!(psi[1], 190.0, epsilon = 1e-8);
    }

    #[test]
    fn reversed_interval_rejected() {
        let table = BasisIntegralTable::closed_form(&VelocityProfile::reference(), BasisSpec::new(1)).unwrap();
        assert!(table.psi(30.0, 20.0).is_err());
        assert!(table.psi(0.0, 201.0).is_err());
    }
}
