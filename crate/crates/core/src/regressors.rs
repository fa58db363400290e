//! Ordinary least squares and primal linear SVR.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, LinearModel, LossKind};
use crate::error::{Error, Result};
use crate::linalg;

/// Least-squares fit with an unpenalized intercept.
pub fn ols_fit(d: &Dataset) -> Result<LinearModel> {
    let (slope, intercept) = linalg::least_squares(d.predictors(), d.n(), d.p(), d.response())?;
    LinearModel::new(slope, intercept)
}

/// `slope . x_i + intercept` for every row of a row-major `n x p` buffer.
pub fn predict(m: &LinearModel, rows: &[f64], p: usize) -> Result<Vec<f64>> {
    if p != m.p() {
        return Err(Error::DimensionMismatch {
            expected: m.p(),
            found: p,
        });
    }
    if p == 0 || !rows.len().is_multiple_of(p) {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: rows.len(),
        });
    }
    Ok(rows.chunks_exact(p).map(|x| m.eval(x)).collect())
}

pub fn predict_dataset(m: &LinearModel, d: &Dataset) -> Result<Vec<f64>> {
    predict(m, d.predictors(), d.p())
}

/// `y_i - ŷ_i`.
pub fn residuals(m: &LinearModel, d: &Dataset) -> Result<Vec<f64>> {
    let y_hat = predict_dataset(m, d)?;
    Ok(d.response().iter().zip(y_hat).map(|(y, f)| y - f).collect())
}

/// Hyperparameters of the primal SVR objective
/// `½‖slope‖² + (c/N) Σ loss(y_i - f(x_i))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvrConfig {
    pub loss: LossKind,
    pub c: f64,
    pub max_iters: usize,
    pub tol: f64,
    pub learning_rate: f64,
}

impl Default for SvrConfig {
    fn default() -> Self {
        Self {
            loss: LossKind::ABSOLUTE,
            c: 10.0,
            max_iters: 5000,
            tol: 1e-8,
            learning_rate: 0.1,
        }
    }
}

impl SvrConfig {
    pub fn with_loss(loss: LossKind) -> Self {
        Self {
            loss,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0) || !self.c.is_finite() {
            return Err(Error::InvalidInput(format!("c must be > 0, got {}", self.c)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidInput(format!("tol must be > 0, got {}", self.tol)));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidInput("learning_rate must be > 0".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidInput("max_iters must be positive".into()));
        }
        if let LossKind::L1 { epsilon } = self.loss {
            if !(epsilon >= 0.0) {
                return Err(Error::InvalidInput("epsilon must be >= 0".into()));
            }
        }
        Ok(())
    }
}

/// Outcome of [`svr_fit`].
#[derive(Debug, Clone, PartialEq)]
pub struct SvrFit {
    pub model: LinearModel,
    pub objective: f64,
    pub iterations: usize,
    /// False when `max_iters` was reached before the improvement fell below `tol`.
    pub converged: bool,
    /// Objective of the reported iterate after each iteration (non-increasing).
    pub objective_trace: Vec<f64>,
}

/// Iterations between convergence checks.
const CHECK_WINDOW: usize = 50;

/// Working state for the SVR solver on internally centered predictors.
struct SvrProblem<'a> {
    rows: Vec<f64>,
    y: &'a [f64],
    n: usize,
    p: usize,
    cfg: SvrConfig,
}

impl SvrProblem<'_> {
    fn residual(&self, i: usize, beta: &[f64]) -> f64 {
        let x = &self.rows[i * self.p..(i + 1) * self.p];
        self.y[i] - linalg::dot(&beta[..self.p], x) - beta[self.p]
    }

    fn loss(&self, r: f64) -> f64 {
        match self.cfg.loss {
            LossKind::L1 { epsilon } => (r.abs() - epsilon).max(0.0),
            LossKind::L2 => r * r,
        }
    }

    /// d loss / d r (a subgradient for L1).
    fn loss_slope(&self, r: f64) -> f64 {
        match self.cfg.loss {
            LossKind::L1 { epsilon } => {
                if r.abs() > epsilon {
                    r.signum()
                } else {
                    0.0
                }
            }
            LossKind::L2 => 2.0 * r,
        }
    }

    fn objective(&self, beta: &[f64]) -> f64 {
        let losses: Vec<f64> = (0..self.n).map(|i| self.loss(self.residual(i, beta))).collect();
        let reg: f64 = beta[..self.p].iter().map(|b| b * b).sum();
        0.5 * reg + self.cfg.c * linalg::mean(&losses)
    }

    fn subgradient(&self, beta: &[f64], grad: &mut [f64]) {
        grad.iter_mut().for_each(|g| *g = 0.0);
        for i in 0..self.n {
            let w = self.loss_slope(self.residual(i, beta));
            if w == 0.0 {
                continue;
            }
            let x = &self.rows[i * self.p..(i + 1) * self.p];
            for (g, xj) in grad[..self.p].iter_mut().zip(x) {
                *g -= w * xj;
            }
            grad[self.p] -= w;
        }
        let scale = self.cfg.c / self.n as f64;
        for (j, g) in grad.iter_mut().enumerate() {
            *g *= scale;
            if j < self.p {
                *g += beta[j];
            }
        }
    }

    /// Per-coordinate curvature scale of the objective.
    fn preconditioner(&self) -> Vec<f64> {
        let mut diag = Vec::with_capacity(self.p + 1);
        for j in 0..self.p {
            let ms = (0..self.n).map(|i| self.rows[i * self.p + j].powi(2)).sum::<f64>() / self.n as f64;
            let h = match self.cfg.loss {
                LossKind::L1 { .. } => ms.sqrt(),
                LossKind::L2 => 2.0 * ms,
            };
            diag.push(1.0 + self.cfg.c * h);
        }
        let h0 = match self.cfg.loss {
            LossKind::L1 { .. } => 1.0,
            LossKind::L2 => 2.0,
        };
        diag.push(self.cfg.c * h0);
        diag
    }
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Linear SVR by deterministic full-batch subgradient descent.
///
/// Steps are `learning_rate / √t` on a diagonally preconditioned subgradient,
/// with a linearly weighted running average of the iterates. The reported
/// model is the best of the raw and averaged iterates seen so far, so the
/// objective trace never increases. Predictors are centered internally
/// (the intercept is unpenalized, so the optimum is unchanged) and the
/// search starts from the flat model whose intercept minimizes the loss.
pub fn svr_fit(d: &Dataset, cfg: &SvrConfig) -> Result<SvrFit> {
    cfg.validate()?;
    let (n, p) = (d.n(), d.p());
    let col_means: Vec<f64> = (0..p).map(|j| linalg::mean(&d.column(j))).collect();
    let mut rows = d.predictors().to_vec();
    for (k, v) in rows.iter_mut().enumerate() {
        *v -= col_means[k % p];
    }
    let problem = SvrProblem {
        rows,
        y: d.response(),
        n,
        p,
        cfg: *cfg,
    };
    let precond = problem.preconditioner();

    let mut beta = vec![0.0; p + 1];
    beta[p] = match cfg.loss {
        LossKind::L1 { .. } => median(d.response()),
        LossKind::L2 => linalg::mean(d.response()),
    };
    let mut avg = beta.clone();
    let mut best = beta.clone();
    let mut best_obj = problem.objective(&best);
    let mut grad = vec![0.0; p + 1];
    let mut trace = Vec::with_capacity(cfg.max_iters);
    let mut window_start_obj = best_obj;
    let mut converged = false;
    let mut iterations = 0;

    for t in 1..=cfg.max_iters {
        iterations = t;
        problem.subgradient(&beta, &mut grad);
        let step = cfg.learning_rate / (t as f64).sqrt();
        for j in 0..=p {
            beta[j] -= step * grad[j] / precond[j];
        }
        let w = 2.0 / (t as f64 + 1.0);
        for j in 0..=p {
            avg[j] += w * (beta[j] - avg[j]);
        }
        for candidate in [&beta, &avg] {
            let obj = problem.objective(candidate);
            if obj < best_obj {
                best_obj = obj;
                best.copy_from_slice(candidate);
            }
        }
        trace.push(best_obj);

        if t % CHECK_WINDOW == 0 {
            let improvement = window_start_obj - best_obj;
            if improvement < cfg.tol * best_obj.abs().max(1.0) {
                converged = true;
                break;
            }
            window_start_obj = best_obj;
        }
    }

    let slope = best[..p].to_vec();
    let intercept = best[p] - linalg::dot(&slope, &col_means);
    Ok(SvrFit {
        model: LinearModel::new(slope, intercept)?,
        objective: best_obj,
        iterations,
        converged,
        objective_trace: trace,
    })
}

/// Which regressor a pipeline uses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Regressor {
    Ols,
    Svr(SvrConfig),
}

impl Regressor {
    pub fn fit(&self, d: &Dataset) -> Result<LinearModel> {
        match self {
            Regressor::Ols => ols_fit(d),
            Regressor::Svr(cfg) => svr_fit(d, cfg).map(|f| f.model),
        }
    }

    /// Loss the regressor is evaluated under: squared for OLS, the training
    /// loss for SVR.
    pub fn loss(&self) -> LossKind {
        match self {
            Regressor::Ols => LossKind::L2,
            Regressor::Svr(cfg) => cfg.loss,
        }
    }
}
