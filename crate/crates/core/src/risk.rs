//! Losses, empirical risk, null-hypothesis loss thresholds and the PAC-Bayes
//! dropout increment.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, LinearModel, LossKind};
use crate::error::{Error, Result};
use crate::linalg;
use crate::regressors;
use crate::rng;

pub fn loss_value(kind: LossKind, y_hat: f64, y: f64) -> f64 {
    let r = y - y_hat;
    match kind {
        LossKind::L1 { epsilon } => (r.abs() - epsilon).max(0.0),
        LossKind::L2 => r * r,
    }
}

/// Per-sample losses of `m` on `d`.
pub fn sample_losses(m: &LinearModel, d: &Dataset, kind: LossKind) -> Result<Vec<f64>> {
    let y_hat = regressors::predict_dataset(m, d)?;
    Ok(y_hat
        .iter()
        .zip(d.response())
        .map(|(f, y)| loss_value(kind, *f, *y))
        .collect())
}

/// Mean loss over all samples.
pub fn empirical_risk(m: &LinearModel, d: &Dataset, kind: LossKind) -> Result<f64> {
    Ok(linalg::mean(&sample_losses(m, d, kind)?))
}

/// Expected loss when `ŷ ~ U(-a, a)` and `y ~ U(-b, b)` independently:
/// `b/2 + a²/(6b)` for the absolute loss (valid for `a <= b`) and
/// `(a² + b²)/3` for the squared loss.
pub fn null_threshold_analytic(a: f64, b: f64, kind: LossKind) -> Result<f64> {
    if !(b > 0.0) || !b.is_finite() {
        return Err(Error::Domain(format!("b must be > 0, got {b}")));
    }
    if !(a >= 0.0) || !a.is_finite() {
        return Err(Error::Domain(format!("a must be >= 0, got {a}")));
    }
    match kind {
        LossKind::L1 { epsilon } => {
            if epsilon != 0.0 {
                return Err(Error::NonzeroEpsilon(epsilon));
            }
            if a > b {
                return Err(Error::Domain(format!("L1 threshold needs a <= b, got a={a}, b={b}")));
            }
            Ok(b / 2.0 + a * a / (6.0 * b))
        }
        LossKind::L2 => Ok((a * a + b * b) / 3.0),
    }
}

/// Dimension above which the mesh is replaced by a quasi-uniform sample.
pub const MESH_MAX_FULL_DIM: usize = 4;
/// Size of the quasi-uniform sample used above [`MESH_MAX_FULL_DIM`].
pub const MESH_SAMPLE_POINTS: usize = 1_000_000;
const MESH_SAMPLE_SEED: u64 = 0x5A52_4D45_5348;

fn first_primes(count: usize) -> Vec<u64> {
    let mut primes: Vec<u64> = Vec::with_capacity(count);
    let mut candidate = 2u64;
    while primes.len() < count {
        if primes.iter().take_while(|p| *p * *p <= candidate).all(|p| !candidate.is_multiple_of(*p)) {
            primes.push(candidate);
        }
        candidate += 1;
    }
    primes
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut out = 0.0;
    while i > 0 {
        out += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    out
}

/// Mean loss of `model` over a grid of `(x, y)` points filling the centered
/// box with the given half-widths (`p` predictor widths, then the response).
///
/// Up to [`MESH_MAX_FULL_DIM`] dimensions the grid is the full tensor product
/// of `points_per_axis` cell midpoints per axis. Beyond that a randomly shifted
/// Halton sample of [`MESH_SAMPLE_POINTS`] points is used instead.
pub fn null_threshold_mesh(
    p: usize,
    half_widths: &[f64],
    kind: LossKind,
    points_per_axis: usize,
    model: &LinearModel,
) -> Result<f64> {
    if p == 0 {
        return Err(Error::InvalidInput("p must be >= 1".into()));
    }
    if half_widths.len() != p + 1 {
        return Err(Error::DimensionMismatch {
            expected: p + 1,
            found: half_widths.len(),
        });
    }
    if model.p() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: model.p(),
        });
    }
    if points_per_axis < 3 {
        return Err(Error::InvalidInput("points_per_axis must be >= 3".into()));
    }
    if half_widths.iter().any(|h| !(*h > 0.0) || !h.is_finite()) {
        return Err(Error::Domain("half-widths must be positive".into()));
    }
    if p + 1 > MESH_MAX_FULL_DIM {
        return Ok(quasi_uniform_threshold(p, half_widths, kind, model));
    }

    let m = points_per_axis;
    let axis = |h: f64, k: usize| -h + (2 * k + 1) as f64 * h / m as f64;
    let ys: Vec<f64> = (0..m).map(|k| axis(half_widths[p], k)).collect();
    let x_points = m.pow(p as u32);
    let partial: Vec<f64> = (0..x_points)
        .into_par_iter()
        .map(|flat| {
            let mut rem = flat;
            let mut y_hat = model.intercept;
            for j in 0..p {
                y_hat += model.slope[j] * axis(half_widths[j], rem % m);
                rem /= m;
            }
            let losses: Vec<f64> = ys.iter().map(|y| loss_value(kind, y_hat, *y)).collect();
            linalg::pairwise_sum(&losses)
        })
        .collect();
    Ok(linalg::pairwise_sum(&partial) / (x_points * m) as f64)
}

fn quasi_uniform_threshold(p: usize, half_widths: &[f64], kind: LossKind, model: &LinearModel) -> f64 {
    use rand::Rng;
    let dims = p + 1;
    let mut stream = rng::stream(MESH_SAMPLE_SEED);
    let shift: Vec<f64> = (0..dims).map(|_| stream.random::<f64>()).collect();
    let bases = first_primes(dims);
    // Cranley-Patterson rotation of a Halton point
    let coord = |i: usize, j: usize| {
        let u = (radical_inverse(i as u64 + 1, bases[j]) + shift[j]).fract();
        (2.0 * u - 1.0) * half_widths[j]
    };
    let losses: Vec<f64> = (0..MESH_SAMPLE_POINTS)
        .into_par_iter()
        .map(|i| {
            let y_hat = model.intercept + (0..p).map(|j| model.slope[j] * coord(i, j)).sum::<f64>();
            loss_value(kind, y_hat, coord(i, p))
        })
        .collect();
    linalg::pairwise_sum(&losses) / MESH_SAMPLE_POINTS as f64
}

/// Richardson-style error estimate of the midpoint mesh at `points_per_axis`,
/// from the change relative to a grid with half as many points.
pub fn mesh_error_estimate(
    p: usize,
    half_widths: &[f64],
    kind: LossKind,
    points_per_axis: usize,
    model: &LinearModel,
) -> Result<f64> {
    let fine = null_threshold_mesh(p, half_widths, kind, points_per_axis, model)?;
    let coarse = null_threshold_mesh(p, half_widths, kind, (points_per_axis / 2).max(3), model)?;
    Ok((fine - coarse).abs() / 3.0)
}

/// How the uniform-volume half-widths `a` (predictions) and `b` (response)
/// are read off a sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdBounds {
    /// `√3 · rms`: the uniform box whose second moments match the sample.
    #[default]
    UniformMoments,
    /// Largest absolute value observed.
    SampleMax,
}

impl ThresholdBounds {
    pub fn half_width(&self, values: &[f64]) -> f64 {
        match self {
            ThresholdBounds::UniformMoments => {
                let sq: Vec<f64> = values.iter().map(|v| v * v).collect();
                (3.0 * linalg::mean(&sq)).sqrt()
            }
            ThresholdBounds::SampleMax => values.iter().fold(0.0, |acc, v| acc.max(v.abs())),
        }
    }
}

/// Upper-bounds the gap between expected and empirical risk.
pub trait RiskBound {
    /// Bound increment for a fit with the given empirical risk, squared slope
    /// norm, sample size and largest observed per-sample loss.
    fn delta(&self, empirical_risk: f64, slope_sq_norm: f64, n: usize, max_sample_loss: f64) -> Result<f64>;

    /// Confidence parameter reported with decisions.
    fn eta(&self) -> f64;
}

/// Outlier threshold `L_max` used by the bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum LossCeiling {
    /// Largest per-sample loss observed on the fitted data.
    #[default]
    EmpiricalMax,
    Fixed(f64),
}

/// PAC-Bayes dropout bound parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacBayesParams {
    pub lambda_grid: Vec<f64>,
    pub dropout_rate: f64,
    pub l_max: LossCeiling,
    pub eta: f64,
}

impl Default for PacBayesParams {
    fn default() -> Self {
        Self {
            lambda_grid: log_spaced_lambdas(20),
            dropout_rate: 0.5,
            l_max: LossCeiling::EmpiricalMax,
            eta: 0.5,
        }
    }
}

/// `k` values log-spaced over `[0.501, 9.999]`.
pub fn log_spaced_lambdas(k: usize) -> Vec<f64> {
    let (lo, hi) = (0.501f64.ln(), 9.999f64.ln());
    if k == 1 {
        return vec![1.0];
    }
    (0..k)
        .map(|i| (lo + (hi - lo) * i as f64 / (k - 1) as f64).exp())
        .collect()
}

impl PacBayesParams {
    pub fn with_eta(eta: f64) -> Self {
        Self {
            eta,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambda_grid.is_empty() {
            return Err(Error::InvalidInput("lambda grid is empty".into()));
        }
        if let Some(l) = self.lambda_grid.iter().find(|l| !(**l > 0.5) || !l.is_finite()) {
            return Err(Error::InvalidInput(format!("lambda must exceed 1/2, got {l}")));
        }
        if !(0.0..=1.0).contains(&self.dropout_rate) {
            return Err(Error::InvalidInput("dropout rate must lie in [0, 1]".into()));
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(Error::InvalidInput(format!("eta must lie in (0, 1), got {}", self.eta)));
        }
        if let LossCeiling::Fixed(v) = self.l_max {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidInput("l_max must be positive".into()));
            }
        }
        Ok(())
    }

    /// KL divergence of the dropout posterior from the unit Gaussian prior.
    pub fn divergence(&self, slope_sq_norm: f64) -> f64 {
        0.5 * (1.0 - self.dropout_rate) * slope_sq_norm
    }
}

/// Bound increment
/// `min_i [R_N + (2 λ_i² L_max / n) (D + ln(k/η))] / (2 λ_i − 1)`
/// with `D = (1 − δ)/2 · ‖slope‖²`.
pub fn pac_bayes_delta(params: &PacBayesParams, empirical_risk: f64, slope_sq_norm: f64, n: usize, l_max: f64) -> Result<f64> {
    params.validate()?;
    if n == 0 {
        return Err(Error::InvalidInput("n must be >= 1".into()));
    }
    if !(empirical_risk >= 0.0) || !(slope_sq_norm >= 0.0) || !(l_max >= 0.0) {
        return Err(Error::InvalidInput("risk, norm and l_max must be non-negative".into()));
    }
    let k = params.lambda_grid.len() as f64;
    let complexity = params.divergence(slope_sq_norm) + (k / params.eta).ln();
    let delta = params
        .lambda_grid
        .iter()
        .map(|&lambda| {
            (empirical_risk + 2.0 * lambda * lambda * l_max / n as f64 * complexity) / (2.0 * lambda - 1.0)
        })
        .fold(f64::INFINITY, f64::min);
    Ok(delta.max(0.0))
}

impl RiskBound for PacBayesParams {
    fn delta(&self, empirical_risk: f64, slope_sq_norm: f64, n: usize, max_sample_loss: f64) -> Result<f64> {
        let l_max = match self.l_max {
            LossCeiling::EmpiricalMax => max_sample_loss,
            LossCeiling::Fixed(v) => v,
        };
        pac_bayes_delta(self, empirical_risk, slope_sq_norm, n, l_max)
    }

    fn eta(&self) -> f64 {
        self.eta
    }
}

/// Empirical risk, bound increment and their sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskEstimate {
    pub empirical_risk: f64,
    pub delta: f64,
    pub corrected_risk: f64,
    pub per_fold_risks: Option<Vec<f64>>,
    pub loss: LossKind,
}

impl RiskEstimate {
    pub fn new(empirical_risk: f64, delta: f64, loss: LossKind) -> Self {
        Self {
            empirical_risk,
            delta,
            corrected_risk: empirical_risk + delta,
            per_fold_risks: None,
            loss,
        }
    }

    pub fn with_folds(mut self, folds: Vec<f64>) -> Self {
        self.per_fold_risks = Some(folds);
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn loss_examples() {
        assert_eq!(loss_value(LossKind::L1 { epsilon: 0.5 }, 1.0, 1.3), 0.0);
        assert_eq!(loss_value(LossKind::L2, 0.0, 2.0), 4.0);
        assert_eq!(loss_value(LossKind::ABSOLUTE, -1.0, 1.0), 2.0);
    }

    #[test]
    fn empirical_risk_examples() {
        let d = Dataset::new(vec![0.0, 1.0, 2.0], 1, vec![1.0, 3.0, 5.0]).unwrap();
        let exact = LinearModel::new(vec![2.0], 1.0).unwrap();
        assert_eq!(empirical_risk(&exact, &d, LossKind::L2).unwrap(), 0.0);
        assert_eq!(empirical_risk(&exact, &d, LossKind::ABSOLUTE).unwrap(), 0.0);
        let s = d.standardize().unwrap();
        let zero = LinearModel::zeros(1);
        let r = empirical_risk(&zero, &s, LossKind::L2).unwrap();
        // mean(y²) of a standardized column is (n-1)/n
        assert!((r - 2.0 / 3.0).abs() < 1e-12);
        assert!(empirical_risk(&LinearModel::zeros(2), &d, LossKind::L2).is_err());
    }

    #[test]
    fn analytic_threshold_examples() {
        assert_eq!(null_threshold_analytic(0.0, 1.0, LossKind::ABSOLUTE).unwrap(), 0.5);
        assert!((null_threshold_analytic(1.0, 1.0, LossKind::L2).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(null_threshold_analytic(0.0, 3.0, LossKind::L2).unwrap(), 3.0);
        assert!(matches!(
            null_threshold_analytic(2.0, 1.0, LossKind::ABSOLUTE),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            null_threshold_analytic(0.5, 1.0, LossKind::L1 { epsilon: 0.1 }),
            Err(Error::NonzeroEpsilon(_))
        ));
        assert!(null_threshold_analytic(0.5, 0.0, LossKind::L2).is_err());
    }

    #[test]
    fn mesh_zero_model_l2() {
        let got = null_threshold_mesh(1, &[1.0, 1.0], LossKind::L2, 201, &LinearModel::zeros(1)).unwrap();
        // midpoint rule error for y² on [-1, 1] is 1/(3 m²)
        assert!((got - 1.0 / 3.0).abs() < 1e-4);
    }

    #[test]
    fn mesh_converges_to_analytic_l2() {
        let b = 1.3;
        let model = LinearModel::new(vec![0.4], 0.0).unwrap();
        let hx = 1.5;
        let a = 0.4 * hx;
        let want = null_threshold_analytic(a, b, LossKind::L2).unwrap();
        let got = null_threshold_mesh(1, &[hx, b], LossKind::L2, 201, &model).unwrap();
        assert!((got - want).abs() < 1e-3);
    }

    #[test]
    fn mesh_refinement_shrinks_change() {
        let model = LinearModel::new(vec![0.7], 0.0).unwrap();
        let hw = [1.0, 1.2];
        for kind in [LossKind::L2, LossKind::ABSOLUTE] {
            let estimate = mesh_error_estimate(1, &hw, kind, 50, &model).unwrap();
            let r50 = null_threshold_mesh(1, &hw, kind, 50, &model).unwrap();
            let r100 = null_threshold_mesh(1, &hw, kind, 100, &model).unwrap();
            assert!((r100 - r50).abs() < estimate, "{kind}: {} vs {}", (r100 - r50).abs(), estimate);
        }
    }

    #[test]
    fn mesh_high_dimension_uses_sample() {
        let model = LinearModel::zeros(4);
        let got = null_threshold_mesh(4, &[1.0; 5], LossKind::L2, 3, &model).unwrap();
        assert!((got - 1.0 / 3.0).abs() < 1e-3);
    }

    #[test]
    fn delta_single_lambda_hand_value() {
        let params = PacBayesParams {
            lambda_grid: vec![1.0],
            dropout_rate: 1.0,
            l_max: LossCeiling::Fixed(1.0),
            eta: 0.5,
        };
        let d = pac_bayes_delta(&params, 0.0, 3.0, 100, 1.0).unwrap();
        assert!((d - 0.02 * 2f64.ln()).abs() < 1e-15);
        assert!((d - 0.013_862_943_611_198_906).abs() < 1e-15);
    }

    #[test]
    fn delta_ignores_dropout_when_slope_is_zero() {
        let mut params = PacBayesParams::default();
        let base = pac_bayes_delta(&params, 0.4, 0.0, 50, 2.0).unwrap();
        params.dropout_rate = 0.1;
        assert_eq!(pac_bayes_delta(&params, 0.4, 0.0, 50, 2.0).unwrap(), base);
    }

    #[test]
    fn finer_lambda_grid_refines_the_minimum() {
        let coarse = PacBayesParams::default();
        let dense = PacBayesParams {
            lambda_grid: log_spaced_lambdas(200),
            ..PacBayesParams::default()
        };
        let c = pac_bayes_delta(&coarse, 0.8, 0.3, 100, 2.0).unwrap();
        let d = pac_bayes_delta(&dense, 0.8, 0.3, 100, 2.0).unwrap();
        assert!(c.is_finite() && d.is_finite() && c >= 0.0 && d >= 0.0);

        // Holding the ln(k/eta) penalty fixed, a grid containing the coarse
        // one can only lower the minimum. 191 = 19 * 10 + 1 nests the 20 points.
        let complexity = coarse.divergence(0.3) + (20.0f64 / coarse.eta).ln();
        let min_over = |grid: &[f64]| {
            grid.iter()
                .map(|l| (0.8 + 2.0 * l * l * 2.0 / 100.0 * complexity) / (2.0 * l - 1.0))
                .fold(f64::INFINITY, f64::min)
        };
        let nested = log_spaced_lambdas(191);
        assert!(min_over(&nested) <= min_over(&coarse.lambda_grid) + 1e-12);
        assert!((min_over(&coarse.lambda_grid) - c).abs() < 1e-12);
    }

    #[test]
    fn params_validation() {
        let mut p = PacBayesParams::default();
        p.lambda_grid = vec![0.5];
        assert!(p.validate().is_err());
        let mut p = PacBayesParams::default();
        p.eta = 1.0;
        assert!(p.validate().is_err());
        let grid = log_spaced_lambdas(20);
        assert!(grid.iter().all(|l| *l > 0.5 && *l < 10.0));
    }

    proptest! {
        #[test]
        fn delta_monotonicity(
            risk in 0.0f64..3.0,
            norm in 0.0f64..5.0,
            n in 5usize..2000,
            l_max in 0.1f64..20.0,
            eta in 0.01f64..0.99,
        ) {
            let params = PacBayesParams::with_eta(eta);
            let d = pac_bayes_delta(&params, risk, norm, n, l_max).unwrap();
            prop_assert!(d >= 0.0);
            prop_assert!(pac_bayes_delta(&params, risk, norm, n + 10, l_max).unwrap() <= d + 1e-15);
            prop_assert!(pac_bayes_delta(&params, risk, norm + 0.5, n, l_max).unwrap() >= d - 1e-15);
            prop_assert!(pac_bayes_delta(&params, risk, norm, n, l_max * 1.5).unwrap() >= d - 1e-15);
            let tighter = PacBayesParams::with_eta(eta * 0.5);
            prop_assert!(pac_bayes_delta(&tighter, risk, norm, n, l_max).unwrap() >= d - 1e-15);
        }

        #[test]
        fn mesh_agrees_with_analytic(a_frac in 0.0f64..1.0, b in 0.2f64..3.0, l2 in any::<bool>()) {
            let kind = if l2 { LossKind::L2 } else { LossKind::ABSOLUTE };
            let a = a_frac * b;
            let hx = 1.0;
            let model = LinearModel::new(vec![a / hx], 0.0).unwrap();
            let analytic = null_threshold_analytic(a, b, kind).unwrap();
            let mesh = null_threshold_mesh(1, &[hx, b], kind, 401, &model).unwrap();
            prop_assert!((mesh - analytic).abs() <= 0.005 * analytic, "{} vs {}", mesh, analytic);
        }
    }
}
