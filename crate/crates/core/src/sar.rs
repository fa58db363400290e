//! The SAR significance decision.
//!
//! A fitted regressor is declared significant when its empirical risk plus a
//! concentration-bound increment falls strictly below the expected loss of the
//! same regressor on predictors orthogonal to the response.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, LinearModel, LossKind};
use crate::error::{Error, Result};
use crate::linalg;
use crate::regressors;
use crate::risk::{self, RiskBound, RiskEstimate, ThresholdBounds};

/// How the null-hypothesis threshold is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    #[default]
    Analytic,
    Mesh,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SarOptions {
    pub threshold_mode: ThresholdMode,
    pub bounds: ThresholdBounds,
    /// Mesh resolution; `None` picks the finest grid with about 10⁶ points (≤ 201 per axis).
    pub points_per_axis: Option<usize>,
}

impl Default for SarOptions {
    fn default() -> Self {
        Self {
            threshold_mode: ThresholdMode::Analytic,
            bounds: ThresholdBounds::UniformMoments,
            points_per_axis: None,
        }
    }
}

fn default_points_per_axis(dims: usize) -> usize {
    let per_axis = (1e6f64).powf(1.0 / dims as f64).floor() as usize;
    per_axis.clamp(3, 201)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SarDecision {
    /// Null-hypothesis expected loss `R_u`.
    pub threshold: f64,
    pub risk: RiskEstimate,
    pub reject_null: bool,
    pub eta: f64,
    /// Half-width of the uniform prediction volume.
    pub a: f64,
    /// Half-width of the uniform response volume.
    pub b: f64,
    /// Outlier threshold fed to the bound (largest per-sample loss).
    pub max_sample_loss: f64,
    /// Mode actually used for the threshold.
    pub threshold_mode: ThresholdMode,
    /// True when the analytic threshold was not applicable and the mesh was used.
    pub fell_back_to_mesh: bool,
}

/// Runs the SAR test for `m` on the standardized dataset `d`.
///
/// The empirical risk is the resubstitution risk of `m` on `d`.
pub fn sar_test(
    m: &LinearModel,
    d: &Dataset,
    kind: LossKind,
    bound: &impl RiskBound,
    options: &SarOptions,
) -> Result<SarDecision> {
    if !d.is_standardized() {
        return Err(Error::InvalidInput("SAR requires a standardized dataset".into()));
    }
    let y_hat = regressors::predict_dataset(m, d)?;
    let losses: Vec<f64> = y_hat
        .iter()
        .zip(d.response())
        .map(|(f, y)| risk::loss_value(kind, *f, *y))
        .collect();
    let empirical = linalg::mean(&losses);
    let max_loss = losses.iter().copied().fold(0.0, f64::max);
    let delta = bound.delta(empirical, m.slope_sq_norm(), d.n(), max_loss)?;
    let estimate = RiskEstimate::new(empirical, delta, kind);
    sar_decision_from_risk(m, d, estimate, max_loss, bound.eta(), options)
}

/// SAR decision for an externally computed risk estimate (e.g. cross-validated).
pub fn sar_decision_from_risk(
    m: &LinearModel,
    d: &Dataset,
    estimate: RiskEstimate,
    max_sample_loss: f64,
    eta: f64,
    options: &SarOptions,
) -> Result<SarDecision> {
    let y_hat = regressors::predict_dataset(m, d)?;
    let a = options.bounds.half_width(&y_hat);
    let b = options.bounds.half_width(d.response());
    let kind = estimate.loss;

    let (threshold, mode, fell_back) = match options.threshold_mode {
        ThresholdMode::Analytic => match risk::null_threshold_analytic(a, b, kind) {
            Ok(t) => (t, ThresholdMode::Analytic, false),
            Err(Error::Domain(_)) | Err(Error::NonzeroEpsilon(_)) => {
                (mesh_threshold(m, d, kind, options)?, ThresholdMode::Mesh, true)
            }
            Err(e) => return Err(e),
        },
        ThresholdMode::Mesh => (mesh_threshold(m, d, kind, options)?, ThresholdMode::Mesh, false),
    };
    let reject_null = estimate.corrected_risk < threshold;
    Ok(SarDecision {
        threshold,
        risk: estimate,
        reject_null,
        eta,
        a,
        b,
        max_sample_loss,
        threshold_mode: mode,
        fell_back_to_mesh: fell_back,
    })
}

fn mesh_threshold(m: &LinearModel, d: &Dataset, kind: LossKind, options: &SarOptions) -> Result<f64> {
    let p = d.p();
    let mut widths: Vec<f64> = (0..p).map(|j| options.bounds.half_width(&d.column(j))).collect();
    widths.push(options.bounds.half_width(d.response()));
    let ppa = options.points_per_axis.unwrap_or_else(|| default_points_per_axis(p + 1));
    risk::null_threshold_mesh(p, &widths, kind, ppa, m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::risk::{LossCeiling, PacBayesParams};

    struct FixedBound(f64);

    impl RiskBound for FixedBound {
        fn delta(&self, _: f64, _: f64, _: usize, _: f64) -> Result<f64> {
            Ok(self.0)
        }
        fn eta(&self) -> f64 {
            0.5
        }
    }

    fn standardized_line() -> Dataset {
        Dataset::new(vec![1.0, 2.0, 3.0, 4.0, 5.0], 1, vec![3.0, 5.0, 7.0, 9.0, 11.0])
            .unwrap()
            .standardize()
            .unwrap()
    }

    #[test]
    fn tie_does_not_reject() {
        let d = standardized_line();
        let zero = LinearModel::zeros(1);
        let opts = SarOptions::default();
        let probe = sar_test(&zero, &d, LossKind::L2, &FixedBound(0.0), &opts).unwrap();
        let tied = RiskEstimate::new(probe.threshold, 0.0, LossKind::L2);
        let decision = sar_decision_from_risk(&zero, &d, tied, 1.0, 0.5, &opts).unwrap();
        assert_eq!(decision.risk.corrected_risk, decision.threshold);
        assert!(!decision.reject_null);
    }

    #[test]
    fn exact_fit_rejects() {
        let d = standardized_line();
        let m = regressors::ols_fit(&d).unwrap();
        let params = PacBayesParams::default();
        let dec = sar_test(&m, &d, LossKind::L2, &params, &SarOptions::default()).unwrap();
        assert!(dec.risk.empirical_risk < 1e-20);
        assert!(dec.reject_null);
        assert_eq!(dec.risk.corrected_risk, dec.risk.empirical_risk + dec.risk.delta);
        assert!(dec.risk.corrected_risk >= dec.risk.empirical_risk);
    }

    #[test]
    fn requires_standardized_data() {
        let raw = Dataset::new(vec![1.0, 2.0, 3.0], 1, vec![1.0, 0.0, 2.0]).unwrap();
        let err = sar_test(&LinearModel::zeros(1), &raw, LossKind::L2, &PacBayesParams::default(), &SarOptions::default());
        assert!(err.is_err());
    }

    #[test]
    fn l1_falls_back_to_mesh_when_a_exceeds_b() {
        let d = standardized_line();
        // an exaggerated slope so predictions outrun the response range
        let m = LinearModel::new(vec![3.0], 0.0).unwrap();
        let params = PacBayesParams {
            l_max: LossCeiling::Fixed(1.0),
            ..PacBayesParams::default()
        };
        let dec = sar_test(&m, &d, LossKind::ABSOLUTE, &params, &SarOptions::default()).unwrap();
        assert!(dec.fell_back_to_mesh);
        assert_eq!(dec.threshold_mode, ThresholdMode::Mesh);
        assert!(dec.a > dec.b);
    }

    #[test]
    fn mesh_and_analytic_agree_for_one_predictor() {
        let d = standardized_line();
        let m = LinearModel::new(vec![0.5], 0.0).unwrap();
        let analytic = sar_test(&m, &d, LossKind::L2, &FixedBound(0.1), &SarOptions::default()).unwrap();
        let mesh_opts = SarOptions {
            threshold_mode: ThresholdMode::Mesh,
            points_per_axis: Some(401),
            ..SarOptions::default()
        };
        let mesh = sar_test(&m, &d, LossKind::L2, &FixedBound(0.1), &mesh_opts).unwrap();
        assert!((mesh.threshold - analytic.threshold).abs() < 0.005 * analytic.threshold);
    }
}
