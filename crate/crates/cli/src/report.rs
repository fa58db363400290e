//! JSON report for `sar test`.

use serde_json::{json, Value};

use sar_core::classical::{self, TestResult};
use sar_core::data::{Dataset, LinearModel, LossKind};
use sar_core::regressors::{self, SvrConfig};
use sar_core::risk::{PacBayesParams, ThresholdBounds};
use sar_core::sar::{self, SarOptions, ThresholdMode};
use sar_core::Result;

use crate::output::json_f64;

pub const SCHEMA_VERSION: &str = "1.0.0";

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum RegressorArg {
    Ols,
    SvrL1,
    SvrL2,
}

impl RegressorArg {
    pub fn name(&self) -> &'static str {
        match self {
            RegressorArg::Ols => "ols",
            RegressorArg::SvrL1 => "svr-l1",
            RegressorArg::SvrL2 => "svr-l2",
        }
    }
}

#[derive(Debug, Clone)]
pub struct TestSettings {
    pub regressor: RegressorArg,
    pub epsilon: f64,
    pub c: f64,
    pub eta: f64,
    pub alpha: f64,
    pub threshold_mode: ThresholdMode,
    pub bounds: ThresholdBounds,
}

struct Fit {
    model: LinearModel,
    kind: LossKind,
    iterations: Option<usize>,
    converged: Option<bool>,
}

fn fit(d: &Dataset, s: &TestSettings) -> Result<Fit> {
    let loss = match s.regressor {
        RegressorArg::Ols => {
            return Ok(Fit {
                model: regressors::ols_fit(d)?,
                kind: LossKind::L2,
                iterations: None,
                converged: None,
            })
        }
        RegressorArg::SvrL1 => LossKind::l1(s.epsilon)?,
        RegressorArg::SvrL2 => LossKind::L2,
    };
    let cfg = SvrConfig {
        c: s.c,
        ..SvrConfig::with_loss(loss)
    };
    let out = regressors::svr_fit(d, &cfg)?;
    Ok(Fit {
        model: out.model,
        kind: loss,
        iterations: Some(out.iterations),
        converged: Some(out.converged),
    })
}

/// Coefficients mapped back to the units of the input file.
fn original_scale(m: &LinearModel, d: &Dataset) -> Value {
    let Some(sc) = d.scaling() else {
        return Value::Null;
    };
    let slope: Vec<f64> = m
        .slope
        .iter()
        .zip(&sc.predictor_sds)
        .map(|(b, sx)| b * sc.response_sd / sx)
        .collect();
    let shift: f64 = slope.iter().zip(&sc.predictor_means).map(|(b, mx)| b * mx).sum();
    let intercept = sc.response_mean + sc.response_sd * m.intercept - shift;
    json!({
        "slope": slope.into_iter().map(json_f64).collect::<Vec<_>>(),
        "intercept": json_f64(intercept),
    })
}

fn f_json(t: &TestResult, alpha: f64) -> Value {
    json!({
        "F_star": json_f64(t.statistic),
        "df_num": t.dof_num,
        "df_den": t.dof_den,
        "p_value": json_f64(t.p_value),
        "degenerate": t.degenerate,
        "reject_null": t.p_value < alpha,
    })
}

/// Fits, runs SAR, the F-test and the Breusch-Pagan test on a raw dataset.
pub fn build(raw: &Dataset, input: &str, s: &TestSettings) -> Result<Value> {
    let d = raw.standardize()?;
    let fitted = fit(&d, s)?;
    let params = PacBayesParams::with_eta(s.eta);
    params.validate()?;
    let opts = SarOptions {
        threshold_mode: s.threshold_mode,
        bounds: s.bounds,
        points_per_axis: None,
    };
    let decision = sar::sar_test(&fitted.model, &d, fitted.kind, &params, &opts)?;
    let residuals = regressors::residuals(&fitted.model, &d)?;
    let f = classical::f_test_slope(&residuals, d.response(), d.p())?;
    let bp = match classical::bp_test(&residuals, &d) {
        Ok(t) => json!({
            "T": json_f64(t.statistic),
            "df": t.dof_num,
            "p_value": json_f64(t.p_value),
            "reject_null": t.p_value < s.alpha,
        }),
        Err(e) => json!({ "error": { "kind": e.kind(), "message": e.to_string() } }),
    };
    let names: Vec<String> = d
        .column_names()
        .map(|c| c.to_vec())
        .unwrap_or_else(|| (1..=d.p()).map(|j| format!("x{j}")).chain(["y".to_string()]).collect());
    let r = &decision.risk;
    Ok(json!({
        "schema_version": SCHEMA_VERSION,
        "input": input,
        "n": d.n(),
        "p": d.p(),
        "columns": names,
        "regressor": s.regressor.name(),
        "loss": fitted.kind.to_string(),
        "alpha": json_f64(s.alpha),
        "coefficients": {
            "slope": fitted.model.slope.iter().copied().map(json_f64).collect::<Vec<_>>(),
            "intercept": json_f64(fitted.model.intercept),
        },
        "coefficients_original_scale": original_scale(&fitted.model, &d),
        "solver": {
            "iterations": fitted.iterations,
            "converged": fitted.converged,
        },
        "sar": {
            "R_N": json_f64(r.empirical_risk),
            "Delta": json_f64(r.delta),
            "R_corrected": json_f64(r.corrected_risk),
            "R_u": json_f64(decision.threshold),
            "a": json_f64(decision.a),
            "b": json_f64(decision.b),
            "L_max": json_f64(decision.max_sample_loss),
            "eta": json_f64(decision.eta),
            "threshold_mode": match decision.threshold_mode {
                ThresholdMode::Analytic => "analytic",
                ThresholdMode::Mesh => "mesh",
            },
            "fell_back_to_mesh": decision.fell_back_to_mesh,
            "reject_null": decision.reject_null,
        },
        "f_test": f_json(&f, s.alpha),
        "bp_test": bp,
    }))
}

pub fn error_report(e: &sar_core::Error) -> Value {
    json!({
        "schema_version": SCHEMA_VERSION,
        "error": { "kind": e.kind(), "message": e.to_string() },
    })
}
