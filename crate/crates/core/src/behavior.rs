//! Bayesian linear regression of driver speed on historical speed, and the
//! analytic predictive distribution of the driver's future path position.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{RdvError, Result};
use crate::path::{BasisIntegralTable, BasisSpec};

/// Paired observations of driver speed and the historical speed at the same instant.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BehaviorDataset {
    driver: Vec<f64>,
    historical: Vec<f64>,
}

impl BehaviorDataset {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs(driver: Vec<f64>, historical: Vec<f64>) -> Result<Self> {
        if driver.len() != historical.len() {
            return Err(RdvError::Data {
                index: driver.len().min(historical.len()),
                reason: format!(
                    "driver ({}) and historical ({}) series differ in length",
                    driver.len(),
                    historical.len()
                ),
            });
        }
        let mut ds = Self::new();
        for (d, h) in driver.into_iter().zip(historical) {
            ds.append(d, h)?;
        }
        Ok(ds)
    }

    /// Adds one (θ̇_d, θ̇_h) sample. Non-finite values are rejected.
    pub fn append(&mut self, driver_speed: f64, historical_speed: f64) -> Result<()> {
        if !driver_speed.is_finite() || !historical_speed.is_finite() {
            return Err(RdvError::Data {
                index: self.len(),
                reason: format!("non-finite sample ({driver_speed}, {historical_speed})"),
            });
        }
        self.driver.push(driver_speed);
        self.historical.push(historical_speed);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.driver.len()
    }

    pub fn is_empty(&self) -> bool {
        self.driver.is_empty()
    }

    pub fn driver(&self) -> &[f64] {
        &self.driver
    }

    pub fn historical(&self) -> &[f64] {
        &self.historical
    }
}

/// Zero-mean Gaussian prior on the basis weights plus the measurement noise variance.
#[derive(Debug, Clone, PartialEq)]
pub struct BehaviorPrior {
    cov: DMatrix<f64>,
    precision: DMatrix<f64>,
    noise_var: f64,
}

impl BehaviorPrior {
    pub fn new(cov: DMatrix<f64>, noise_var: f64) -> Result<Self> {
        if !cov.is_square() || cov.nrows() == 0 {
            return Err(RdvError::Config("prior covariance must be square and non-empty".into()));
        }
        if (&cov - cov.transpose()).amax() > 1e-12 * cov.amax().max(1.0) {
            return Err(RdvError::Config("prior covariance must be symmetric".into()));
        }
        if !(noise_var > 0.0 && noise_var.is_finite()) {
            return Err(RdvError::Config(format!(
                "noise variance must be positive and finite, got {noise_var}"
            )));
        }
        let chol = cov.clone().cholesky().ok_or_else(|| {
            RdvError::Config("prior covariance is not positive definite".into())
        })?;
        let precision = chol.inverse();
        Ok(Self {
            cov,
            precision,
            noise_var,
        })
    }

    /// Σ_m = scale · I.
    pub fn isotropic(dim: usize, scale: f64, noise_var: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(RdvError::Config(format!("prior scale must be positive, got {scale}")));
        }
        Self::new(DMatrix::identity(dim, dim) * scale, noise_var)
    }

    pub fn dim(&self) -> usize {
        self.cov.nrows()
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }
}

/// Gaussian posterior over basis weights, w ~ N(μ_w, A⁻¹).
#[derive(Debug, Clone, PartialEq)]
pub struct BehaviorPosterior {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    precision: DMatrix<f64>,
    /// σ⁻² Φ(H) D, kept so single samples can be folded in without the full dataset.
    information: DVector<f64>,
    basis: BasisSpec,
    noise_var: f64,
    count: usize,
}

impl BehaviorPosterior {
    fn from_natural(
        precision: DMatrix<f64>,
        information: DVector<f64>,
        basis: BasisSpec,
        noise_var: f64,
        count: usize,
    ) -> Result<Self> {
        // Jacobi scaling: monomial bases on speeds ~10 m/s span many decades
        let m = precision.nrows();
        let d = DVector::from_fn(m, |i, _| 1.0 / precision[(i, i)].sqrt());
        let scaled = DMatrix::from_fn(m, m, |i, j| precision[(i, j)] * d[i] * d[j]);
        let chol = scaled.cholesky().ok_or_else(|| {
            RdvError::Config("posterior precision lost positive definiteness".into())
        })?;
        let mean = chol.solve(&information.component_mul(&d)).component_mul(&d);
        let inv = chol.solve(&DMatrix::identity(m, m));
        let mut cov = DMatrix::from_fn(m, m, |i, j| inv[(i, j)] * d[i] * d[j]);
        // symmetrize the rounding
        cov = (&cov + cov.transpose()) * 0.5;
        Ok(Self {
            mean,
            cov,
            precision,
            information,
            basis,
            noise_var,
            count,
        })
    }

    /// A posterior with fixed weights and zero covariance; for tests and oracles.
    pub fn deterministic(weights: DVector<f64>, basis: BasisSpec) -> Self {
        let m = weights.len();
        Self {
            mean: weights,
            cov: DMatrix::zeros(m, m),
            precision: DMatrix::from_diagonal_element(m, m, f64::INFINITY),
            information: DVector::zeros(m),
            basis,
            noise_var: 0.0,
            count: 0,
        }
    }

    /// Copy with the covariance scaled by `c`; mean unchanged.
    pub fn with_scaled_covariance(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.cov *= c;
        out.precision /= c;
        out
    }

    /// Folds one more sample into the posterior (rank-1 precision update).
    pub fn updated(&self, driver_speed: f64, historical_speed: f64) -> Result<Self> {
        if !driver_speed.is_finite() || !historical_speed.is_finite() {
            return Err(RdvError::Data {
                index: self.count,
                reason: "non-finite sample".into(),
            });
        }
        let phi = self.basis.eval(historical_speed);
        let precision = &self.precision + &phi * phi.transpose() / self.noise_var;
        let information = &self.information + &phi * (driver_speed / self.noise_var);
        Self::from_natural(precision, information, self.basis, self.noise_var, self.count + 1)
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn precision(&self) -> &DMatrix<f64> {
        &self.precision
    }

    pub fn basis(&self) -> BasisSpec {
        self.basis
    }

    pub fn sample_count(&self) -> usize {
        self.count
    }

    /// Predictive mean and variance of the driver's speed at historical speed `h`.
    pub fn speed_prediction(&self, h: f64) -> (f64, f64) {
        let phi = self.basis.eval(h);
        (self.mean.dot(&phi), phi.dot(&(&self.cov * &phi)))
    }
}

/// Exact conjugate posterior for the zero-mean Gaussian prior.
pub fn regress(
    prior: &BehaviorPrior,
    data: &BehaviorDataset,
    basis: BasisSpec,
) -> Result<BehaviorPosterior> {
    if prior.dim() != basis.dim() {
        return Err(RdvError::Config(format!(
            "prior dimension {} does not match basis dimension {}",
            prior.dim(),
            basis.dim()
        )));
    }
    let m = basis.dim();
    let inv_var = 1.0 / prior.noise_var;
    let mut gram = DMatrix::zeros(m, m);
    let mut info = DVector::zeros(m);
    for (i, (&d, &h)) in data.driver.iter().zip(&data.historical).enumerate() {
        if !d.is_finite() || !h.is_finite() {
            return Err(RdvError::Data {
                index: i,
                reason: "non-finite sample".into(),
            });
        }
        let phi = basis.eval(h);
        gram.ger(1.0, &phi, &phi, 1.0);
        info.axpy(d, &phi, 1.0);
    }
    let precision = gram * inv_var + &prior.precision;
    BehaviorPosterior::from_natural(precision, info * inv_var, basis, prior.noise_var, data.len())
}

/// Where and when position propagation starts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Anchor {
    pub time: f64,
    pub theta: f64,
}

/// Predictive distribution of θ_d(t_f).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PositionPrediction {
    pub mean: f64,
    pub variance: f64,
    pub anchor: Anchor,
    pub horizon_end: f64,
}

impl PositionPrediction {
    pub fn std_dev(&self) -> f64 {
        self.variance.max(0.0).sqrt()
    }
}

/// E[θ_d(t_f)] = θ_{d,0} + μ_wᵀψ and Var[θ_d(t_f)] = ψᵀΣ_wψ.
pub fn predict_position(
    post: &BehaviorPosterior,
    table: &BasisIntegralTable,
    anchor: Anchor,
    t_f: f64,
) -> Result<PositionPrediction> {
    if table.basis() != post.basis() {
        return Err(RdvError::Config("integral table and posterior use different bases".into()));
    }
    let psi = table.psi(anchor.time, t_f)?;
    Ok(prediction_from_psi(post, &psi, anchor, t_f))
}

pub(crate) fn prediction_from_psi(
    post: &BehaviorPosterior,
    psi: &DVector<f64>,
    anchor: Anchor,
    t_f: f64,
) -> PositionPrediction {
    let variance = psi.dot(&(&post.cov * psi)).max(0.0);
    PositionPrediction {
        mean: anchor.theta + post.mean.dot(psi),
        variance,
        anchor,
        horizon_end: t_f,
    }
}
