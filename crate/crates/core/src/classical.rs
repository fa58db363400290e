//! F-test for the slope and the Breusch-Pagan heteroscedasticity test.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg;
use crate::special;

/// Residuals with SSE below this fraction of SST are treated as an exact fit.
pub const DEGENERATE_SSE_RATIO: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub dof_num: usize,
    /// Denominator degrees of freedom; absent for chi-squared tests.
    pub dof_den: Option<usize>,
    pub p_value: f64,
    /// Set when the residuals are (numerically) zero and the statistic is infinite.
    pub degenerate: bool,
}

/// Sums of squares behind the F statistic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnovaDecomposition {
    pub sst: f64,
    pub sse: f64,
    /// `max(0, sst - sse)`; residuals worse than the mean model carry no regression signal.
    pub ssr: f64,
    pub msr: f64,
    pub mse: f64,
}

pub fn anova(residuals: &[f64], y: &[f64], p: usize) -> Result<AnovaDecomposition> {
    let n = y.len();
    if residuals.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: residuals.len(),
        });
    }
    if p == 0 || n <= p + 1 {
        return Err(Error::InvalidInput(format!("F-test needs n > p + 1 (n={n}, p={p})")));
    }
    let y_mean = linalg::mean(y);
    let dev: Vec<f64> = y.iter().map(|v| (v - y_mean).powi(2)).collect();
    let sq: Vec<f64> = residuals.iter().map(|r| r * r).collect();
    let sst = linalg::pairwise_sum(&dev);
    let sse = linalg::pairwise_sum(&sq);
    let ssr = (sst - sse).max(0.0);
    Ok(AnovaDecomposition {
        sst,
        sse,
        ssr,
        msr: ssr / p as f64,
        mse: sse / (n - p - 1) as f64,
    })
}

/// F-test of `H0: slope = 0` from the residuals of any regressor.
///
/// `F* = MSR / MSE` against `F(p, n - p - 1)`.
pub fn f_test_slope(residuals: &[f64], y: &[f64], p: usize) -> Result<TestResult> {
    let a = anova(residuals, y, p)?;
    let n = y.len();
    let (dof_num, dof_den) = (p, n - p - 1);
    if !(a.sst > 0.0) {
        return Err(Error::InvalidInput("response is constant".into()));
    }
    if a.sse < DEGENERATE_SSE_RATIO * a.sst {
        return Ok(TestResult {
            statistic: f64::INFINITY,
            dof_num,
            dof_den: Some(dof_den),
            p_value: 0.0,
            degenerate: true,
        });
    }
    let f_star = a.msr / a.mse;
    let p_value = special::f_sf(f_star, dof_num as f64, dof_den as f64)?;
    Ok(TestResult {
        statistic: f_star,
        dof_num,
        dof_den: Some(dof_den),
        p_value,
        degenerate: false,
    })
}

/// Coefficient of determination of regressing `target` on the predictors of `d`.
pub fn auxiliary_r_squared(target: &[f64], d: &Dataset) -> Result<f64> {
    let (slope, intercept) = linalg::least_squares(d.predictors(), d.n(), d.p(), target)?;
    let t_mean = linalg::mean(target);
    let sst: Vec<f64> = target.iter().map(|t| (t - t_mean).powi(2)).collect();
    let sse: Vec<f64> = (0..d.n())
        .map(|i| (target[i] - linalg::dot(&slope, d.row(i)) - intercept).powi(2))
        .collect();
    let sst = linalg::pairwise_sum(&sst);
    if !(sst > 0.0) {
        return Ok(0.0);
    }
    Ok((1.0 - linalg::pairwise_sum(&sse) / sst).clamp(0.0, 1.0))
}

/// Breusch-Pagan test: regress squared residuals on the predictors,
/// `T = N · R²` against chi-squared with `P` degrees of freedom.
pub fn bp_test(residuals: &[f64], d: &Dataset) -> Result<TestResult> {
    let (n, p) = (d.n(), d.p());
    if residuals.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: residuals.len(),
        });
    }
    if n <= p + 1 {
        return Err(Error::InvalidInput(format!("BP test needs n > p + 1 (n={n}, p={p})")));
    }
    let sq: Vec<f64> = residuals.iter().map(|r| r * r).collect();
    let r2 = auxiliary_r_squared(&sq, d)?;
    let t = n as f64 * r2;
    Ok(TestResult {
        statistic: t,
        dof_num: p,
        dof_den: None,
        p_value: special::chi2_sf(t, p as f64)?,
        degenerate: false,
    })
}
