//! Small dense nonlinear programs: an augmented Lagrangian outer loop over
//! inequality constraints with a projected Newton inner solver for simple
//! lower bounds.
//!
//! Problems have the form
//!
//! ```text
//! minimize   f(x)
//! subject to c_i(x) ≥ 0,  i = 1..p
//!            x_j ≥ l_j    (l_j may be −∞)
//! ```
//!
//! The inner Hessian is assembled from forward differences of analytic
//! gradients with the multiplier estimate frozen, plus the exact
//! `ρ ∇c ∇cᵀ` term of the active penalty pieces, and is eigen-clamped to be
//! positive definite.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

/// A smooth inequality-constrained program with lower bounds.
pub trait Nlp {
    fn dim(&self) -> usize;
    fn num_constraints(&self) -> usize;
    fn lower_bounds(&self) -> DVector<f64>;
    fn objective(&self, x: &DVector<f64>) -> f64;
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64>;
    /// Constraint values; feasible means every entry is ≥ 0.
    fn constraints(&self, x: &DVector<f64>) -> DVector<f64>;
    /// Row `i` is ∇c_i.
    fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugLagSettings {
    /// Target on the projected KKT residual.
    pub stationarity_tol: f64,
    /// Target on the largest constraint violation.
    pub feasibility_tol: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    pub initial_penalty: f64,
    pub max_penalty: f64,
}

impl Default for AugLagSettings {
    fn default() -> Self {
        Self {
            stationarity_tol: 1e-6,
            feasibility_tol: 1e-9,
            max_outer: 200,
            max_inner: 100,
            initial_penalty: 10.0,
            max_penalty: 1e12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AugLagStatus {
    Converged,
    /// The penalty reached its cap with constraints still violated.
    Infeasible,
    /// Ran out of outer iterations.
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugLagResult {
    pub x: DVector<f64>,
    pub multipliers: DVector<f64>,
    pub objective: f64,
    pub status: AugLagStatus,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    /// max_i max(0, −c_i(x)).
    pub violation: f64,
    /// ‖P(x − ∇ₓL) − x‖∞ with the returned multipliers.
    pub stationarity: f64,
    /// Per-outer-iteration (objective, violation, penalty), for tracing.
    pub trace: Vec<(f64, f64, f64)>,
}

fn project(x: &DVector<f64>, lb: &DVector<f64>) -> DVector<f64> {
    x.zip_map(lb, |v, l| v.max(l))
}

fn projected_residual(x: &DVector<f64>, g: &DVector<f64>, lb: &DVector<f64>) -> f64 {
    (project(&(x - g), lb) - x).amax()
}

struct Penalized<'a, P: Nlp + ?Sized> {
    nlp: &'a P,
    mu: &'a DVector<f64>,
    rho: f64,
}

impl<P: Nlp + ?Sized> Penalized<'_, P> {
    fn value(&self, x: &DVector<f64>) -> f64 {
        let c = self.nlp.constraints(x);
        let mut v = self.nlp.objective(x);
        for (ci, &mi) in c.iter().zip(self.mu.iter()) {
            if ci - mi / self.rho < 0.0 {
                v += -mi * ci + 0.5 * self.rho * ci * ci;
            } else {
                v += -0.5 * mi * mi / self.rho;
            }
        }
        v
    }

    /// Shifted multipliers max(0, μ − ρc).
    fn shifted(&self, c: &DVector<f64>) -> DVector<f64> {
        self.mu.zip_map(c, |m, ci| (m - self.rho * ci).max(0.0))
    }

    fn gradient_with(&self, x: &DVector<f64>, lam: &DVector<f64>) -> DVector<f64> {
        self.nlp.gradient(x) - self.nlp.jacobian(x).transpose() * lam
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let lam = self.shifted(&self.nlp.constraints(x));
        self.gradient_with(x, &lam)
    }

    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let n = x.len();
        let c = self.nlp.constraints(x);
        let lam = self.shifted(&c);
        let jac = self.nlp.jacobian(x);
        let g0 = self.nlp.gradient(x) - jac.transpose() * &lam;
        let mut h = DMatrix::zeros(n, n);
        for j in 0..n {
            let step = 1e-7 * x[j].abs().max(1.0);
            let mut xp = x.clone();
            xp[j] += step;
            let gp = self.gradient_with(&xp, &lam);
            h.set_column(j, &((gp - &g0) / step));
        }
        h = (&h + h.transpose()) * 0.5;
        for (i, (&ci, &mi)) in c.iter().zip(self.mu.iter()).enumerate() {
            if mi - self.rho * ci > 0.0 {
                let row = jac.row(i).transpose();
                h += &row * row.transpose() * self.rho;
            }
        }
        h
    }
}

fn clamp_positive_definite(h: DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(h);
    let scale = eig.eigenvalues.amax().max(1.0);
    let floor = 1e-10 * scale;
    let vals = eig.eigenvalues.map(|v| v.max(floor));
    &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose()
}

/// Bertsekas-style projected Newton on the augmented Lagrangian.
/// Returns (x, iterations, projected residual).
fn inner_solve<P: Nlp + ?Sized>(
    pen: &Penalized<'_, P>,
    mut x: DVector<f64>,
    lb: &DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> (DVector<f64>, usize, f64) {
    let n = x.len();
    let mut fx = pen.value(&x);
    let mut g = pen.gradient(&x);
    let mut res = projected_residual(&x, &g, lb);
    let mut iters = 0;
    while iters < max_iter && res > tol {
        iters += 1;
        let eps = res.min(1e-3);
        let active: Vec<bool> = (0..n).map(|j| x[j] - lb[j] <= eps && g[j] > 0.0).collect();
        let free: Vec<usize> = (0..n).filter(|&j| !active[j]).collect();

        let h = pen.hessian(&x);
        let mut d = DVector::zeros(n);
        if !free.is_empty() {
            let hf = DMatrix::from_fn(free.len(), free.len(), |a, b| h[(free[a], free[b])]);
            let gf = DVector::from_iterator(free.len(), free.iter().map(|&j| g[j]));
            let hf = clamp_positive_definite(hf);
            let df = match hf.cholesky() {
                Some(ch) => -ch.solve(&gf),
                None => -gf,
            };
            for (k, &j) in free.iter().enumerate() {
                d[j] = df[k];
            }
        }
        for j in 0..n {
            if active[j] {
                d[j] = -g[j] / h[(j, j)].abs().max(1e-8);
            }
        }

        let mut alpha = 1.0;
        let mut accepted = None;
        while alpha > 1e-14 {
            let xt = project(&(&x + &d * alpha), lb);
            let ft = pen.value(&xt);
            let mut decrease = 0.0;
            for j in 0..n {
                if active[j] {
                    decrease += g[j] * (x[j] - xt[j]);
                } else {
                    decrease -= alpha * g[j] * d[j];
                }
            }
            if ft <= fx - 1e-4 * decrease.max(0.0) && ft.is_finite() {
                accepted = Some((xt, ft));
                break;
            }
            alpha *= 0.5;
        }
        match accepted {
            Some((xt, ft)) => {
                let moved = (&xt - &x).amax();
                x = xt;
                let stalled = (fx - ft).abs() <= 1e-15 * fx.abs().max(1.0) && moved <= 1e-15;
                fx = ft;
                g = pen.gradient(&x);
                res = projected_residual(&x, &g, lb);
                if stalled {
                    break;
                }
            }
            None => break,
        }
    }
    (x, iters, res)
}

/// Solves `nlp` from `x0` with optional warm-start multipliers.
pub fn solve_aug_lag<P: Nlp + ?Sized>(
    nlp: &P,
    x0: &DVector<f64>,
    warm_multipliers: Option<&DVector<f64>>,
    settings: &AugLagSettings,
) -> AugLagResult {
    let lb = nlp.lower_bounds();
    let p = nlp.num_constraints();
    let mut x = project(x0, &lb);
    let mut mu = warm_multipliers
        .filter(|m| m.len() == p)
        .cloned()
        .unwrap_or_else(|| DVector::zeros(p));
    let mut rho = settings.initial_penalty;
    let mut omega = 1.0 / rho;
    let mut eta = 1.0 / rho.powf(0.1);
    let mut inner_total = 0;
    let mut trace = Vec::new();
    let mut status = AugLagStatus::IterationLimit;
    let mut outer = 0;

    while outer < settings.max_outer {
        outer += 1;
        let pen = Penalized { nlp, mu: &mu, rho };
        let (xn, it, res) = inner_solve(
            &pen,
            x,
            &lb,
            omega.max(settings.stationarity_tol),
            settings.max_inner,
        );
        x = xn;
        inner_total += it;
        let c = nlp.constraints(&x);
        let compl = c
            .iter()
            .zip(mu.iter())
            .map(|(&ci, &mi)| ci.min(mi / rho).abs())
            .fold(0.0, f64::max);
        let viol = c.iter().map(|&ci| (-ci).max(0.0)).fold(0.0, f64::max);
        trace.push((nlp.objective(&x), viol, rho));

        if compl <= eta.max(settings.feasibility_tol) {
            mu = pen.shifted(&c);
            if viol <= settings.feasibility_tol && res <= settings.stationarity_tol {
                let kkt = stationarity(nlp, &x, &mu, &lb);
                if kkt <= settings.stationarity_tol {
                    status = AugLagStatus::Converged;
                    break;
                }
            }
            eta /= rho.powf(0.9);
            omega /= rho;
        } else {
            rho *= 10.0;
            if rho > settings.max_penalty {
                status = AugLagStatus::Infeasible;
                break;
            }
            eta = 1.0 / rho.powf(0.1);
            omega = 1.0 / rho;
        }
    }

    let c = nlp.constraints(&x);
    let violation = c.iter().map(|&ci| (-ci).max(0.0)).fold(0.0, f64::max);
    if status == AugLagStatus::Infeasible && violation <= settings.feasibility_tol {
        // the penalty blew up chasing complementarity on an ill-posed active set
        status = AugLagStatus::IterationLimit;
    }
    AugLagResult {
        objective: nlp.objective(&x),
        stationarity: stationarity(nlp, &x, &mu, &lb),
        multipliers: mu,
        x,
        status,
        outer_iterations: outer,
        inner_iterations: inner_total,
        violation,
        trace,
    }
}

/// Projected KKT residual ‖P(x − (∇f − Jᵀμ)) − x‖∞.
pub fn stationarity<P: Nlp + ?Sized>(
    nlp: &P,
    x: &DVector<f64>,
    mu: &DVector<f64>,
    lb: &DVector<f64>,
) -> f64 {
    let g = nlp.gradient(x) - nlp.jacobian(x).transpose() * mu;
    projected_residual(x, &g, lb)
}
