//! Core domain types shared by every other module.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::rng;

/// Columns with sample sd at or below this value cannot be standardized.
pub const CONSTANT_COLUMN_SD: f64 = 1e-12;

/// Per-column location and scale removed by [`Dataset::standardize`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub predictor_means: Vec<f64>,
    pub predictor_sds: Vec<f64>,
    pub response_mean: f64,
    pub response_sd: f64,
}

/// `n` observations of `p` predictors plus a response.
///
/// Predictors are stored row-major. Constructors enforce `n >= 3`, `p >= 1`
/// and finiteness of every entry.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n: usize,
    p: usize,
    predictors: Vec<f64>,
    response: Vec<f64>,
    standardized: bool,
    column_names: Option<Vec<String>>,
    scaling: Option<Standardization>,
}

impl Dataset {
    /// Builds a dataset from a row-major `n x p` predictor buffer.
    pub fn new(predictors: Vec<f64>, p: usize, response: Vec<f64>) -> Result<Self> {
        let n = response.len();
        if p == 0 {
            return Err(Error::InvalidInput("dataset needs at least one predictor".into()));
        }
        if n < 3 {
            return Err(Error::TooFewRows { rows: n });
        }
        if predictors.len() != n * p {
            return Err(Error::DimensionMismatch {
                expected: n * p,
                found: predictors.len(),
            });
        }
        if let Some(pos) = predictors.iter().chain(&response).position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite entry at flat position {pos}")));
        }
        Ok(Self {
            n,
            p,
            predictors,
            response,
            standardized: false,
            column_names: None,
            scaling: None,
        })
    }

    /// Builds a dataset from predictor columns.
    pub fn from_columns(columns: &[Vec<f64>], response: Vec<f64>) -> Result<Self> {
        let n = response.len();
        if let Some(bad) = columns.iter().find(|c| c.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: bad.len(),
            });
        }
        let p = columns.len();
        let mut rows = Vec::with_capacity(n * p);
        for i in 0..n {
            rows.extend(columns.iter().map(|c| c[i]));
        }
        Self::new(rows, p, response)
    }

    /// Labels for the `p` predictors followed by the response.
    pub fn with_column_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.p + 1 {
            return Err(Error::DimensionMismatch {
                expected: self.p + 1,
                found: names.len(),
            });
        }
        self.column_names = Some(names);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn predictors(&self) -> &[f64] {
        &self.predictors
    }

    pub fn response(&self) -> &[f64] {
        &self.response
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.predictors[i * self.p..(i + 1) * self.p]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.predictors[i * self.p + j]).collect()
    }

    pub fn is_standardized(&self) -> bool {
        self.standardized
    }

    pub fn column_names(&self) -> Option<&[String]> {
        self.column_names.as_deref()
    }

    pub fn scaling(&self) -> Option<&Standardization> {
        self.scaling.as_ref()
    }

    /// Rows `indices` (in the given order) as a new dataset.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let mut rows = Vec::with_capacity(indices.len() * self.p);
        let mut response = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.n {
                return Err(Error::InvalidInput(format!("row {i} out of range")));
            }
            rows.extend_from_slice(self.row(i));
            response.push(self.response[i]);
        }
        let mut out = Self::new(rows, self.p, response)?;
        out.column_names = self.column_names.clone();
        Ok(out)
    }

    /// Centers every column and scales it to unit sample sd (denominator `n-1`).
    ///
    /// Standardizing an already standardized dataset composes the stored
    /// scaling so [`Dataset::destandardize`] still recovers the raw data.
    pub fn standardize(&self) -> Result<Self> {
        let mut means = Vec::with_capacity(self.p);
        let mut sds = Vec::with_capacity(self.p);
        for j in 0..self.p {
            let col = self.column(j);
            let sd = linalg::sample_sd(&col);
            if !(sd > CONSTANT_COLUMN_SD) {
                return Err(Error::ConstantColumn { column: j });
            }
            means.push(linalg::mean(&col));
            sds.push(sd);
        }
        let y_mean = linalg::mean(&self.response);
        let y_sd = linalg::sample_sd(&self.response);
        if !(y_sd > CONSTANT_COLUMN_SD) {
            return Err(Error::ConstantColumn { column: self.p });
        }

        let mut rows = self.predictors.clone();
        for (i, v) in rows.iter_mut().enumerate() {
            let j = i % self.p;
            *v = (*v - means[j]) / sds[j];
        }
        let response = self.response.iter().map(|v| (v - y_mean) / y_sd).collect();

        let scaling = match &self.scaling {
            Some(prev) => Standardization {
                predictor_means: (0..self.p)
                    .map(|j| prev.predictor_means[j] + prev.predictor_sds[j] * means[j])
                    .collect(),
                predictor_sds: (0..self.p).map(|j| prev.predictor_sds[j] * sds[j]).collect(),
                response_mean: prev.response_mean + prev.response_sd * y_mean,
                response_sd: prev.response_sd * y_sd,
            },
            None => Standardization {
                predictor_means: means,
                predictor_sds: sds,
                response_mean: y_mean,
                response_sd: y_sd,
            },
        };
        Ok(Self {
            n: self.n,
            p: self.p,
            predictors: rows,
            response,
            standardized: true,
            column_names: self.column_names.clone(),
            scaling: Some(scaling),
        })
    }

    /// Undoes [`Dataset::standardize`] using the stored means and sds.
    pub fn destandardize(&self) -> Result<Self> {
        let s = self
            .scaling
            .as_ref()
            .ok_or_else(|| Error::InvalidInput("dataset carries no standardization".into()))?;
        let mut rows = self.predictors.clone();
        for (i, v) in rows.iter_mut().enumerate() {
            let j = i % self.p;
            *v = *v * s.predictor_sds[j] + s.predictor_means[j];
        }
        let response = self
            .response
            .iter()
            .map(|v| v * s.response_sd + s.response_mean)
            .collect();
        let mut out = Self::new(rows, self.p, response)?;
        out.column_names = self.column_names.clone();
        Ok(out)
    }
}

/// Linear regressor `y = slope . x + intercept`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub slope: Vec<f64>,
    pub intercept: f64,
}

impl LinearModel {
    pub fn new(slope: Vec<f64>, intercept: f64) -> Result<Self> {
        if slope.iter().any(|v| !v.is_finite()) || !intercept.is_finite() {
            return Err(Error::InvalidInput("model coefficients must be finite".into()));
        }
        Ok(Self { slope, intercept })
    }

    pub fn zeros(p: usize) -> Self {
        Self {
            slope: vec![0.0; p],
            intercept: 0.0,
        }
    }

    pub fn p(&self) -> usize {
        self.slope.len()
    }

    pub fn slope_sq_norm(&self) -> f64 {
        self.slope.iter().map(|b| b * b).sum()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        linalg::dot(&self.slope, x) + self.intercept
    }
}

/// Loss selector: epsilon-insensitive absolute loss or squared loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LossKind {
    L1 { epsilon: f64 },
    L2,
}

impl LossKind {
    /// Plain absolute loss (`epsilon = 0`).
    pub const ABSOLUTE: LossKind = LossKind::L1 { epsilon: 0.0 };

    pub fn l1(epsilon: f64) -> Result<Self> {
        if !(epsilon >= 0.0) || !epsilon.is_finite() {
            return Err(Error::InvalidInput(format!("epsilon must be >= 0, got {epsilon}")));
        }
        Ok(LossKind::L1 { epsilon })
    }

    pub fn short_name(&self) -> &'static str {
        match self {
            LossKind::L1 { .. } => "l1",
            LossKind::L2 => "l2",
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LossKind::L1 { epsilon } if *epsilon == 0.0 => write!(f, "l1"),
            LossKind::L1 { epsilon } => write!(f, "l1(eps={epsilon})"),
            LossKind::L2 => write!(f, "l2"),
        }
    }
}

/// One train/test partition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Seeded K-fold partition of `0..n`: shuffle, then contiguous chunks whose
/// sizes differ by at most one (the first `n % k` chunks get the extra row).
pub fn kfold_indices(n: usize, k: usize, seed: u64) -> Result<Vec<Fold>> {
    if k < 2 || k > n {
        return Err(Error::BadFoldCount { k, n });
    }
    let mut stream = rng::stream(seed);
    let order = rng::permutation(n, &mut stream);
    let base = n / k;
    let extra = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        let test = order[start..start + size].to_vec();
        let train = order[..start]
            .iter()
            .chain(&order[start + size..])
            .copied()
            .collect();
        folds.push(Fold { train, test });
        start += size;
    }
    Ok(folds)
}

pub fn split_kfold(d: &Dataset, k: usize, seed: u64) -> Result<Vec<Fold>> {
    kfold_indices(d.n(), k, seed)
}

/// Leave-one-out folds in row order.
pub fn loo_indices(n: usize) -> Vec<Fold> {
    (0..n)
        .map(|i| Fold {
            train: (0..n).filter(|&j| j != i).collect(),
            test: vec![i],
        })
        .collect()
}
