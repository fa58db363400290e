//! Cross-validation risk estimators and Monte Carlo sweeps.
//!
//! A sweep visits every `(tau, n)` cell, draws `realizations` datasets from
//! the chosen regime, standardizes each one and runs every method on it. All
//! methods see the same dataset in a given realization; each method draws its
//! own fold shuffle from a substream keyed by its name, so reordering the
//! method list leaves every number unchanged. Work is spread over the rayon
//! pool and gathered in a fixed order before aggregation.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classical;
use crate::data::{self, Dataset, Fold, LossKind};
use crate::error::{Error, Result};
use crate::generators::{self, ClusterPruneConfig, GaussianGenConfig, HeteroGenConfig};
use crate::linalg;
use crate::regressors::{self, Regressor, SvrConfig};
use crate::risk::{self, PacBayesParams, RiskEstimate, ThresholdBounds};
use crate::rng;
use crate::sar::{self, SarOptions};

/// Validation scheme for [`cv_risk`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Scheme {
    Resub,
    KFold { k: usize, seed: u64 },
    Loo,
}

/// Risk estimate plus the out-of-fold predictions behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct CvOutcome {
    pub risk: RiskEstimate,
    /// Prediction for every row from the model that did not see it
    /// (in-sample predictions for resubstitution).
    pub predictions: Vec<f64>,
}

/// Fits on each training split and scores the mean loss on its test split.
pub fn cross_validate(d: &Dataset, folds: &[Fold], regressor: &Regressor, kind: LossKind) -> Result<CvOutcome> {
    let mut predictions = vec![f64::NAN; d.n()];
    let mut fold_risks = Vec::with_capacity(folds.len());
    for (f, fold) in folds.iter().enumerate() {
        let wrap = |e: Error| Error::FoldFailure {
            fold: f,
            source: Box::new(e),
        };
        let train = d.subset(&fold.train).map_err(wrap)?;
        let model = regressor.fit(&train).map_err(wrap)?;
        let losses: Vec<f64> = fold
            .test
            .iter()
            .map(|&i| {
                let y_hat = model.eval(d.row(i));
                predictions[i] = y_hat;
                risk::loss_value(kind, y_hat, d.response()[i])
            })
            .collect();
        fold_risks.push(linalg::mean(&losses));
    }
    let risk = RiskEstimate::new(linalg::mean(&fold_risks), 0.0, kind).with_folds(fold_risks);
    Ok(CvOutcome { risk, predictions })
}

pub fn cv_outcome(d: &Dataset, scheme: Scheme, regressor: &Regressor, kind: LossKind) -> Result<CvOutcome> {
    match scheme {
        Scheme::Resub => {
            let model = regressor.fit(d)?;
            let predictions = regressors::predict_dataset(&model, d)?;
            let losses: Vec<f64> = predictions
                .iter()
                .zip(d.response())
                .map(|(f, y)| risk::loss_value(kind, *f, *y))
                .collect();
            Ok(CvOutcome {
                risk: RiskEstimate::new(linalg::mean(&losses), 0.0, kind),
                predictions,
            })
        }
        Scheme::KFold { k, seed } => cross_validate(d, &data::split_kfold(d, k, seed)?, regressor, kind),
        Scheme::Loo => cross_validate(d, &data::loo_indices(d.n()), regressor, kind),
    }
}

/// Resubstitution, K-fold or leave-one-out risk (`delta` is always zero).
pub fn cv_risk(d: &Dataset, scheme: Scheme, regressor: &Regressor, kind: LossKind) -> Result<RiskEstimate> {
    cv_outcome(d, scheme, regressor, kind).map(|o| o.risk)
}

/// Sample sd (denominator `k - 1`) of the per-fold risks.
pub fn fold_variability(estimate: &RiskEstimate) -> Result<f64> {
    match &estimate.per_fold_risks {
        Some(folds) if folds.len() >= 2 => Ok(linalg::sample_sd(folds)),
        _ => Err(Error::NoFolds),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegressorKind {
    Ols,
    SvrL1,
    SvrL2,
}

impl RegressorKind {
    pub fn regressor(&self, c: f64) -> Regressor {
        match self {
            RegressorKind::Ols => Regressor::Ols,
            RegressorKind::SvrL1 => Regressor::Svr(SvrConfig {
                c,
                ..SvrConfig::with_loss(LossKind::ABSOLUTE)
            }),
            RegressorKind::SvrL2 => Regressor::Svr(SvrConfig {
                c,
                ..SvrConfig::with_loss(LossKind::L2)
            }),
        }
    }

    fn name(&self) -> &'static str {
        match self {
            RegressorKind::Ols => "ols",
            RegressorKind::SvrL1 => "svr-l1",
            RegressorKind::SvrL2 => "svr-l2",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Evaluation {
    Resub,
    KFold(usize),
    Loo,
    Sar,
}

/// A regressor paired with a validation scheme, written `regressor/evaluation`
/// (`ols/resub`, `svr-l2/kfold10`, `svr-l1/loo`, `svr-l2/sar`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Method {
    pub regressor: RegressorKind,
    pub evaluation: Evaluation,
}

impl Method {
    pub fn new(regressor: RegressorKind, evaluation: Evaluation) -> Self {
        Self { regressor, evaluation }
    }

    pub fn uses_folds(&self) -> bool {
        matches!(self.evaluation, Evaluation::KFold(_) | Evaluation::Loo)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let eval = match self.evaluation {
            Evaluation::Resub => "resub".to_string(),
            Evaluation::KFold(k) => format!("kfold{k}"),
            Evaluation::Loo => "loo".to_string(),
            Evaluation::Sar => "sar".to_string(),
        };
        write!(f, "{}/{}", self.regressor.name(), eval)
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidInput(format!("unknown method `{s}`"));
        let (reg, eval) = s.trim().split_once('/').ok_or_else(bad)?;
        let regressor = match reg.trim().to_ascii_lowercase().as_str() {
            "ols" => RegressorKind::Ols,
            "svr-l1" => RegressorKind::SvrL1,
            "svr-l2" => RegressorKind::SvrL2,
            _ => return Err(bad()),
        };
        let eval = eval.trim().to_ascii_lowercase();
        let evaluation = match eval.as_str() {
            "resub" => Evaluation::Resub,
            "loo" => Evaluation::Loo,
            "sar" => Evaluation::Sar,
            "kfold" => Evaluation::KFold(DEFAULT_FOLDS),
            other => {
                let k: usize = other.strip_prefix("kfold").and_then(|k| k.parse().ok()).ok_or_else(bad)?;
                Evaluation::KFold(k)
            }
        };
        Ok(Self { regressor, evaluation })
    }
}

impl Serialize for Method {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Method {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

pub const DEFAULT_FOLDS: usize = 10;

/// Where sweep datasets come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Regime {
    Gaussian,
    ClusterPruned,
    Heteroscedastic,
    /// Rows drawn without replacement from a CSV file.
    Csv {
        path: String,
        response: String,
        #[serde(default)]
        predictors: Vec<String>,
    },
}

impl Regime {
    pub fn name(&self) -> &'static str {
        match self {
            Regime::Gaussian => "gaussian",
            Regime::ClusterPruned => "cluster_pruned",
            Regime::Heteroscedastic => "heteroscedastic",
            Regime::Csv { .. } => "csv",
        }
    }
}

/// Which residuals feed the F-test of cross-validated methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CvResiduals {
    #[default]
    OutOfFold,
    Resubstitution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub taus: Vec<f64>,
    pub sample_sizes: Vec<usize>,
    pub realizations: usize,
    pub regime: Regime,
    pub methods: Vec<Method>,
    pub alpha: f64,
    pub master_seed: u64,
    /// Predictors for the Gaussian and cluster-pruned regimes.
    pub p: usize,
    pub theta: f64,
    pub eta: f64,
    pub svr_c: f64,
    pub threshold_bounds: ThresholdBounds,
    pub cv_residuals: CvResiduals,
    pub n_clusters: usize,
    pub n_keep: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            taus: vec![0.0],
            sample_sizes: vec![100],
            realizations: 100,
            regime: Regime::Gaussian,
            methods: vec![
                Method::new(RegressorKind::Ols, Evaluation::Resub),
                Method::new(RegressorKind::SvrL2, Evaluation::Sar),
            ],
            alpha: 0.05,
            master_seed: 0,
            p: 1,
            theta: std::f64::consts::FRAC_PI_4,
            eta: 0.5,
            svr_c: SvrConfig::default().c,
            threshold_bounds: ThresholdBounds::UniformMoments,
            cv_residuals: CvResiduals::OutOfFold,
            n_clusters: ClusterPruneConfig::default().n_clusters,
            n_keep: ClusterPruneConfig::default().n_keep,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if self.realizations == 0 {
            return bad("realizations must be >= 1".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if self.taus.is_empty() || self.sample_sizes.is_empty() || self.methods.is_empty() {
            return bad("taus, sample_sizes and methods must be non-empty".into());
        }
        if let Some(t) = self.taus.iter().find(|t| !(0.0..1.0).contains(*t)) {
            return bad(format!("tau must lie in [0, 1), got {t}"));
        }
        if let Some(n) = self.sample_sizes.iter().find(|n| **n < 3) {
            return bad(format!("sample sizes must be >= 3, got {n}"));
        }
        if self.p == 0 {
            return bad("p must be >= 1".into());
        }
        if !(self.svr_c > 0.0) {
            return bad("svr_c must be > 0".into());
        }
        PacBayesParams::with_eta(self.eta).validate()?;
        ClusterPruneConfig {
            n_clusters: self.n_clusters,
            n_keep: self.n_keep,
            seed: 0,
            kmeans_iters: 50,
        }
        .validate()?;
        for m in &self.methods {
            if let Evaluation::KFold(k) = m.evaluation {
                if k < 2 {
                    return bad(format!("{m}: fold count must be >= 2"));
                }
            }
        }
        Ok(())
    }
}

/// What one method produced on one realization.
#[derive(Debug, Clone, PartialEq)]
struct Realized {
    /// Corrected risk for SAR, cross-validated / resubstitution risk otherwise.
    risk: f64,
    fold_std: Option<f64>,
    f_p_value: f64,
    sar: Option<(f64, bool)>,
}

/// Aggregate over the realizations of one `(tau, n, method)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub tau: f64,
    pub n: usize,
    pub method: Method,
    pub successes: usize,
    pub failures: usize,
    pub mean_risk: f64,
    /// Variance of the risk across realizations.
    pub risk_variance: f64,
    /// Mean across realizations of the per-fold risk sd (CV methods only).
    pub mean_fold_std: Option<f64>,
    /// Mean across realizations of the per-fold risk variance (CV methods only).
    pub mean_fold_variance: Option<f64>,
    pub mean_f_p_value: f64,
    /// Fraction of realizations with F-test p-value below alpha.
    pub f_rejection_rate: f64,
    pub mean_sar_threshold: Option<f64>,
    pub sar_rejection_rate: Option<f64>,
    /// First error message seen, if any realization failed.
    pub first_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub records: Vec<CellRecord>,
    /// Cells in which every realization failed.
    pub failed_cells: Vec<(f64, usize, Method)>,
}

impl SweepResult {
    pub fn cell(&self, tau: f64, n: usize, method: &Method) -> Option<&CellRecord> {
        self.records
            .iter()
            .find(|r| r.tau == tau && r.n == n && r.method == *method)
    }
}

/// Seed of the dataset drawn for realization `r` of cell `(tau, n)`.
pub fn realization_seed(master: u64, tau: f64, n: usize, r: usize) -> u64 {
    master ^ rng::mix(&[tau.to_bits(), n as u64, r as u64])
}

fn method_key(method: &Method) -> u64 {
    rng::mix(&method.to_string().bytes().map(u64::from).collect::<Vec<_>>())
}

const PRUNE_SALT: u64 = 0x0070_5255_4E45;
const SUBSAMPLE_SALT: u64 = 0x5355_4253;

/// Draws datasets for a sweep configuration's regime.
pub struct DataSource {
    regime: Regime,
    csv: Option<Arc<Dataset>>,
    p: usize,
    theta: f64,
    n_clusters: usize,
    n_keep: usize,
}

impl DataSource {
    pub fn new(cfg: &SweepConfig) -> Result<Self> {
        let csv = match &cfg.regime {
            Regime::Csv {
                path,
                response,
                predictors,
            } => Some(Arc::new(generators::load_csv(path, response, predictors)?.dataset)),
            _ => None,
        };
        Ok(Self {
            regime: cfg.regime.clone(),
            csv,
            p: cfg.p,
            theta: cfg.theta,
            n_clusters: cfg.n_clusters,
            n_keep: cfg.n_keep,
        })
    }

    fn gaussian(&self, n: usize, tau: f64, seed: u64) -> Result<Dataset> {
        if self.p == 1 {
            generators::gen_gaussian_2d(&GaussianGenConfig {
                n,
                tau,
                theta: self.theta,
                seed,
            })
        } else {
            generators::gen_transformed(n, self.p, tau, seed)
        }
    }

    /// Raw (unstandardized) dataset of `n` rows for the given seed.
    pub fn draw(&self, n: usize, tau: f64, seed: u64) -> Result<Dataset> {
        match &self.regime {
            Regime::Gaussian => self.gaussian(n, tau, seed),
            Regime::ClusterPruned => {
                let mut pool = (n * self.n_clusters).div_ceil(self.n_keep) * 2;
                for attempt in 0..8u64 {
                    let base = self.gaussian(pool.max(self.n_clusters), tau, seed ^ attempt)?;
                    let pruned = generators::prune_clusters(
                        &base,
                        &ClusterPruneConfig {
                            n_clusters: self.n_clusters,
                            n_keep: self.n_keep,
                            seed: seed ^ PRUNE_SALT ^ attempt,
                            kmeans_iters: 50,
                        },
                    )?;
                    if pruned.n() >= n {
                        let mut stream = rng::stream(seed ^ SUBSAMPLE_SALT);
                        let mut rows = rng::sample_without_replacement(pruned.n(), n, &mut stream);
                        rows.sort_unstable();
                        return pruned.subset(&rows);
                    }
                    pool *= 2;
                }
                Err(Error::InvalidInput(format!("could not collect {n} rows after pruning")))
            }
            Regime::Heteroscedastic => generators::gen_heteroscedastic(&HeteroGenConfig {
                n,
                seed,
                ..HeteroGenConfig::default()
            }),
            Regime::Csv { .. } => {
                let full = self.csv.as_ref().ok_or(Error::EmptyResult)?;
                if n > full.n() {
                    return Err(Error::InvalidInput(format!(
                        "requested {n} rows from a CSV with {}",
                        full.n()
                    )));
                }
                let mut stream = rng::stream(seed ^ SUBSAMPLE_SALT);
                let mut rows = rng::sample_without_replacement(full.n(), n, &mut stream);
                rows.sort_unstable();
                full.subset(&rows)
            }
        }
    }
}

fn run_method(d: &Dataset, method: &Method, cfg: &SweepConfig, fold_seed: u64) -> Result<Realized> {
    let regressor = method.regressor.regressor(cfg.svr_c);
    let kind = regressor.loss();
    let f_test = |predictions: &[f64]| -> Result<f64> {
        let res: Vec<f64> = d.response().iter().zip(predictions).map(|(y, f)| y - f).collect();
        Ok(classical::f_test_slope(&res, d.response(), d.p())?.p_value)
    };
    match method.evaluation {
        Evaluation::Sar => {
            let model = regressor.fit(d)?;
            let params = PacBayesParams::with_eta(cfg.eta);
            let opts = SarOptions {
                bounds: cfg.threshold_bounds,
                ..SarOptions::default()
            };
            let decision = sar::sar_test(&model, d, kind, &params, &opts)?;
            let predictions = regressors::predict_dataset(&model, d)?;
            Ok(Realized {
                risk: decision.risk.corrected_risk,
                fold_std: None,
                f_p_value: f_test(&predictions)?,
                sar: Some((decision.threshold, decision.reject_null)),
            })
        }
        Evaluation::Resub => {
            let out = cv_outcome(d, Scheme::Resub, &regressor, kind)?;
            Ok(Realized {
                risk: out.risk.empirical_risk,
                fold_std: None,
                f_p_value: f_test(&out.predictions)?,
                sar: None,
            })
        }
        Evaluation::KFold(_) | Evaluation::Loo => {
            let scheme = match method.evaluation {
                Evaluation::KFold(k) => Scheme::KFold { k, seed: fold_seed },
                _ => Scheme::Loo,
            };
            let out = cv_outcome(d, scheme, &regressor, kind)?;
            let p_value = match cfg.cv_residuals {
                CvResiduals::OutOfFold => f_test(&out.predictions)?,
                CvResiduals::Resubstitution => {
                    let model = regressor.fit(d)?;
                    f_test(&regressors::predict_dataset(&model, d)?)?
                }
            };
            Ok(Realized {
                risk: out.risk.empirical_risk,
                fold_std: Some(fold_variability(&out.risk)?),
                f_p_value: p_value,
                sar: None,
            })
        }
    }
}

fn mean_variance(values: &[f64]) -> (f64, f64) {
    let m = linalg::mean(values);
    let v = if values.len() >= 2 {
        linalg::sample_variance(values)
    } else {
        0.0
    };
    (m, v)
}

fn aggregate(tau: f64, n: usize, method: Method, alpha: f64, outcomes: &[Result<Realized>]) -> CellRecord {
    let ok: Vec<&Realized> = outcomes.iter().filter_map(|o| o.as_ref().ok()).collect();
    let first_error = outcomes
        .iter()
        .find_map(|o| o.as_ref().err())
        .map(|e| e.to_string());
    let count = ok.len() as f64;
    let risks: Vec<f64> = ok.iter().map(|r| r.risk).collect();
    let (mean_risk, risk_variance) = mean_variance(&risks);
    let p_values: Vec<f64> = ok.iter().map(|r| r.f_p_value).collect();
    let f_rejects = ok.iter().filter(|r| r.f_p_value < alpha).count() as f64;

    let fold_std: Vec<f64> = ok.iter().filter_map(|r| r.fold_std).collect();
    let fold_var: Vec<f64> = fold_std.iter().map(|s| s * s).collect();
    let has_folds = method.uses_folds() && !fold_std.is_empty();

    let sar: Vec<(f64, bool)> = ok.iter().filter_map(|r| r.sar).collect();
    let has_sar = method.evaluation == Evaluation::Sar && !sar.is_empty();
    let thresholds: Vec<f64> = sar.iter().map(|s| s.0).collect();
    let sar_rejects = sar.iter().filter(|s| s.1).count() as f64;

    CellRecord {
        tau,
        n,
        method,
        successes: ok.len(),
        failures: outcomes.len() - ok.len(),
        mean_risk,
        risk_variance,
        mean_fold_std: has_folds.then(|| linalg::mean(&fold_std)),
        mean_fold_variance: has_folds.then(|| linalg::mean(&fold_var)),
        mean_f_p_value: linalg::mean(&p_values),
        f_rejection_rate: if ok.is_empty() { f64::NAN } else { f_rejects / count },
        mean_sar_threshold: has_sar.then(|| linalg::mean(&thresholds)),
        sar_rejection_rate: has_sar.then(|| sar_rejects / sar.len() as f64),
        first_error,
    }
}

/// Runs every `(tau, n, method)` cell over `realizations` seeded datasets.
///
/// Failures are recorded per cell and the sweep carries on; a cell in which
/// every realization failed is listed in [`SweepResult::failed_cells`].
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let source = DataSource::new(cfg)?;
    let cells: Vec<(f64, usize)> = cfg
        .taus
        .iter()
        .flat_map(|&t| cfg.sample_sizes.iter().map(move |&n| (t, n)))
        .collect();
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..cfg.realizations).map(move |r| (c, r)))
        .collect();

    let per_job: Vec<Vec<Result<Realized>>> = jobs
        .par_iter()
        .map(|&(c, r)| {
            let (tau, n) = cells[c];
            let seed = realization_seed(cfg.master_seed, tau, n, r);
            let data = source.draw(n, tau, seed).and_then(|d| d.standardize());
            cfg.methods
                .iter()
                .map(|method| {
                    let d = data.as_ref().map_err(|e| Error::InvalidInput(e.to_string()))?;
                    let fold_seed = seed ^ method_key(method);
                    run_method(d, method, cfg, fold_seed)
                })
                .collect()
        })
        .collect();

    let mut records = Vec::with_capacity(cells.len() * cfg.methods.len());
    let mut failed_cells = Vec::new();
    for (c, &(tau, n)) in cells.iter().enumerate() {
        let block = &per_job[c * cfg.realizations..(c + 1) * cfg.realizations];
        for (m, method) in cfg.methods.iter().enumerate() {
            let outcomes: Vec<Result<Realized>> = block
                .iter()
                .map(|job| match &job[m] {
                    Ok(v) => Ok(v.clone()),
                    Err(e) => Err(Error::InvalidInput(e.to_string())),
                })
                .collect();
            let record = aggregate(tau, n, *method, cfg.alpha, &outcomes);
            if record.successes == 0 {
                failed_cells.push((tau, n, *method));
            }
            records.push(record);
        }
    }
    Ok(SweepResult { records, failed_cells })
}

/// Rejection frequency per cell: SAR decisions for SAR methods, F-test
/// rejections otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerRow {
    pub tau: f64,
    pub n: usize,
    pub method: Method,
    pub power: f64,
    pub f_rejection_rate: f64,
    pub sar_rejection_rate: Option<f64>,
    pub realizations: usize,
}

pub fn power_table(result: &SweepResult) -> Vec<PowerRow> {
    result
        .records
        .iter()
        .map(|r| PowerRow {
            tau: r.tau,
            n: r.n,
            method: r.method,
            power: r.sar_rejection_rate.unwrap_or(r.f_rejection_rate),
            f_rejection_rate: r.f_rejection_rate,
            sar_rejection_rate: r.sar_rejection_rate,
            realizations: r.successes,
        })
        .collect()
}

/// Power of a single cell.
pub fn power_of(result: &SweepResult, tau: f64, n: usize, method: &Method) -> Result<f64> {
    let missing = || Error::MissingCell {
        tau,
        n,
        method: method.to_string(),
    };
    let cell = result.cell(tau, n, method).ok_or_else(missing)?;
    if cell.successes == 0 {
        return Err(missing());
    }
    Ok(cell.sar_rejection_rate.unwrap_or(cell.f_rejection_rate))
}

/// Mean per-fold risk sd of a cross-validated cell.
pub fn cell_fold_variability(result: &SweepResult, tau: f64, n: usize, method: &Method) -> Result<f64> {
    let cell = result.cell(tau, n, method).ok_or_else(|| Error::MissingCell {
        tau,
        n,
        method: method.to_string(),
    })?;
    cell.mean_fold_std.ok_or(Error::NoFolds)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian(n: usize, tau: f64, seed: u64) -> Dataset {
        generators::gen_gaussian_2d(&GaussianGenConfig::new(n, tau, seed))
            .unwrap()
            .standardize()
            .unwrap()
    }

    #[test]
    fn method_names_round_trip() {
        for s in ["ols/resub", "svr-l1/kfold5", "svr-l2/loo", "svr-l2/sar"] {
            assert_eq!(s.parse::<Method>().unwrap().to_string(), s);
        }
        assert_eq!("ols/kfold".parse::<Method>().unwrap().evaluation, Evaluation::KFold(10));
        assert!("lasso/resub".parse::<Method>().is_err());
        assert!("ols".parse::<Method>().is_err());
    }

    #[test]
    fn kfold_n_matches_loo() {
        let d = gaussian(12, 0.5, 1);
        let reg = Regressor::Ols;
        let loo = cv_risk(&d, Scheme::Loo, &reg, LossKind::L2).unwrap();
        let mut folds = data::kfold_indices(12, 12, 77).unwrap();
        folds.sort_by_key(|f| f.test[0]);
        let kf = cross_validate(&d, &folds, &reg, LossKind::L2).unwrap().risk;
        let (a, b) = (loo.per_fold_risks.unwrap(), kf.per_fold_risks.unwrap());
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_line_has_zero_risk_everywhere() {
        let d = Dataset::new((0..12).map(f64::from).collect(), 1, (0..12).map(|i| 2.0 * i as f64 + 1.0).collect())
            .unwrap()
            .standardize()
            .unwrap();
        for scheme in [Scheme::Resub, Scheme::Loo, Scheme::KFold { k: 4, seed: 3 }] {
            let r = cv_risk(&d, scheme, &Regressor::Ols, LossKind::L2).unwrap();
            assert!(r.empirical_risk < 1e-20, "{scheme:?}");
            assert_eq!(r.delta, 0.0);
        }
        let resub = cv_risk(&d, Scheme::Resub, &Regressor::Ols, LossKind::L2).unwrap();
        assert!(resub.per_fold_risks.is_none());
        assert!(matches!(fold_variability(&resub), Err(Error::NoFolds)));
    }

    #[test]
    fn fold_failure_names_the_fold() {
        // one training split keeps a single distinct x value
        let d = Dataset::new(vec![0.0, 0.0, 0.0, 1.0], 1, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let err = cv_risk(&d, Scheme::Loo, &Regressor::Ols, LossKind::L2).unwrap_err();
        assert!(matches!(err, Error::FoldFailure { fold: 3, .. }), "{err}");
    }

    #[test]
    fn fold_variability_examples() {
        let same = RiskEstimate::new(1.0, 0.0, LossKind::L2).with_folds(vec![0.5, 0.5, 0.5]);
        assert_eq!(fold_variability(&same).unwrap(), 0.0);
        let two = RiskEstimate::new(1.0, 0.0, LossKind::L2).with_folds(vec![0.0, 2.0]);
        assert!((fold_variability(&two).unwrap() - 2f64.sqrt()).abs() < 1e-15);
    }

    fn small_config() -> SweepConfig {
        SweepConfig {
            taus: vec![0.0, 0.8],
            sample_sizes: vec![20, 40],
            realizations: 4,
            methods: vec![
                "ols/resub".parse().unwrap(),
                "svr-l2/kfold5".parse().unwrap(),
                "svr-l1/sar".parse().unwrap(),
            ],
            master_seed: 42,
            ..SweepConfig::default()
        }
    }

    #[test]
    fn sweep_shape_and_determinism() {
        let cfg = small_config();
        let a = run_sweep(&cfg).unwrap();
        assert_eq!(a.records.len(), 2 * 2 * 3);
        assert!(a.failed_cells.is_empty());
        assert_eq!(a, run_sweep(&cfg).unwrap());
        for r in &a.records {
            assert!((0.0..=1.0).contains(&r.f_rejection_rate));
            if let Some(s) = r.sar_rejection_rate {
                assert!((0.0..=1.0).contains(&s));
            }
        }
        let power = power_table(&a);
        assert_eq!(power.len(), a.records.len());
    }

    #[test]
    fn method_order_does_not_matter() {
        let cfg = small_config();
        let mut flipped = cfg.clone();
        flipped.methods.reverse();
        let a = run_sweep(&cfg).unwrap();
        let b = run_sweep(&flipped).unwrap();
        for r in &a.records {
            assert_eq!(Some(r), b.cell(r.tau, r.n, &r.method));
        }
    }

    #[test]
    fn missing_cells_and_fold_lookups() {
        let a = run_sweep(&small_config()).unwrap();
        let ols: Method = "ols/resub".parse().unwrap();
        assert!(matches!(power_of(&a, 0.3, 20, &ols), Err(Error::MissingCell { .. })));
        assert!(matches!(cell_fold_variability(&a, 0.0, 20, &ols), Err(Error::NoFolds)));
        let kf: Method = "svr-l2/kfold5".parse().unwrap();
        assert!(cell_fold_variability(&a, 0.0, 20, &kf).unwrap() > 0.0);
    }

    #[test]
    fn failing_cells_are_reported() {
        let cfg = SweepConfig {
            sample_sizes: vec![5],
            realizations: 2,
            methods: vec!["ols/kfold10".parse().unwrap(), "ols/resub".parse().unwrap()],
            ..SweepConfig::default()
        };
        let out = run_sweep(&cfg).unwrap();
        assert_eq!(out.failed_cells.len(), 1);
        let bad = &out.records[0];
        assert_eq!(bad.successes, 0);
        assert!(bad.first_error.is_some());
        assert_eq!(out.records[1].successes, 2);
    }

    #[test]
    fn config_validation() {
        let mut cfg = SweepConfig::default();
        cfg.realizations = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = SweepConfig::default();
        cfg.alpha = 1.0;
        assert!(cfg.validate().is_err());
        let mut cfg = SweepConfig::default();
        cfg.taus = vec![1.2];
        assert!(cfg.validate().is_err());
    }
}
