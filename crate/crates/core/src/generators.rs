//! Synthetic datasets and CSV ingestion.
//!
//! All generators are pure functions of their configuration: every random
//! number comes from the stream named by the config's `seed` (see [`crate::rng`]).
//!
//! Linear transforms act on row vectors, `ẑ = z · T`, so the population
//! covariance of a transformed standard-normal row is `Tᵀ T`.

use std::io::Read;
use std::path::Path;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::classical;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::{self, NormalSampler};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianGenConfig {
    pub n: usize,
    /// Correlation level in `[0, 1)`.
    pub tau: f64,
    /// Rotation angle in radians.
    pub theta: f64,
    pub seed: u64,
}

impl GaussianGenConfig {
    pub fn new(n: usize, tau: f64, seed: u64) -> Self {
        Self {
            n,
            tau,
            theta: std::f64::consts::FRAC_PI_4,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        validate_tau(self.tau)?;
        if self.n < 3 {
            return Err(Error::InvalidInput(format!("n must be >= 3, got {}", self.n)));
        }
        if !self.theta.is_finite() {
            return Err(Error::InvalidInput("theta must be finite".into()));
        }
        Ok(())
    }
}

fn validate_tau(tau: f64) -> Result<()> {
    if !(0.0..1.0).contains(&tau) {
        return Err(Error::InvalidInput(format!("tau must lie in [0, 1), got {tau}")));
    }
    Ok(())
}

/// `T = S · R` with `S = diag(1, 1 - τ)` and `R` the rotation by `θ`.
pub fn transform_2d(tau: f64, theta: f64) -> [[f64; 2]; 2] {
    let (sin, cos) = theta.sin_cos();
    let s = 1.0 - tau;
    [[cos, -sin], [s * sin, s * cos]]
}

/// Population covariance `Tᵀ T` of [`gen_gaussian_2d`] output (predictor, response).
pub fn gaussian_2d_covariance(tau: f64, theta: f64) -> [[f64; 2]; 2] {
    let t = transform_2d(tau, theta);
    let mut c = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = t[0][i] * t[0][j] + t[1][i] * t[1][j];
        }
    }
    c
}

/// Standard-normal pairs transformed by [`transform_2d`]; the first output
/// coordinate is the predictor, the second the response.
pub fn gen_gaussian_2d(cfg: &GaussianGenConfig) -> Result<Dataset> {
    cfg.validate()?;
    let t = transform_2d(cfg.tau, cfg.theta);
    let mut normal = NormalSampler::new(rng::stream(cfg.seed));
    let mut x = Vec::with_capacity(cfg.n);
    let mut y = Vec::with_capacity(cfg.n);
    for _ in 0..cfg.n {
        let z0 = normal.sample();
        let z1 = normal.sample();
        x.push(z0 * t[0][0] + z1 * t[1][0]);
        y.push(z0 * t[0][1] + z1 * t[1][1]);
    }
    Dataset::new(x, 1, y)
}

/// Random `(p+1) x (p+1)` transform whose smallest singular value is scaled
/// by `1 - τ`. Draws come first from stream `seed`, before any data.
pub fn random_transform(p: usize, tau: f64, seed: u64) -> Result<DMatrix<f64>> {
    let mut normal = NormalSampler::new(rng::stream(seed));
    random_transform_from(p, tau, &mut normal)
}

fn random_transform_from<R: Rng>(p: usize, tau: f64, normal: &mut NormalSampler<R>) -> Result<DMatrix<f64>> {
    validate_tau(tau)?;
    if p == 0 {
        return Err(Error::InvalidInput("p must be >= 1".into()));
    }
    let dims = p + 1;
    let raw = DMatrix::from_fn(dims, dims, |_, _| normal.sample());
    let svd = raw.svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::Domain("SVD failed to produce singular vectors".into())),
    };
    let mut sigma = svd.singular_values.clone();
    let smallest = sigma.imin();
    sigma[smallest] *= 1.0 - tau;
    Ok(u * DMatrix::from_diagonal(&sigma) * v_t)
}

/// `(p+1)`-dimensional standard-normal rows mapped through [`random_transform`];
/// the last coordinate is the response.
pub fn gen_transformed(n: usize, p: usize, tau: f64, seed: u64) -> Result<Dataset> {
    let mut normal = NormalSampler::new(rng::stream(seed));
    let t = random_transform_from(p, tau, &mut normal)?;
    let dims = p + 1;
    let mut predictors = Vec::with_capacity(n * p);
    let mut response = Vec::with_capacity(n);
    let mut z = vec![0.0; dims];
    for _ in 0..n {
        z.iter_mut().for_each(|v| *v = normal.sample());
        for j in 0..dims {
            let value: f64 = (0..dims).map(|i| z[i] * t[(i, j)]).sum();
            if j < p {
                predictors.push(value);
            } else {
                response.push(value);
            }
        }
    }
    Dataset::new(predictors, p, response)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterPruneConfig {
    pub n_clusters: usize,
    pub n_keep: usize,
    pub seed: u64,
    pub kmeans_iters: usize,
}

impl Default for ClusterPruneConfig {
    fn default() -> Self {
        Self {
            n_clusters: 8,
            n_keep: 3,
            seed: 0,
            kmeans_iters: 50,
        }
    }
}

impl ClusterPruneConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_clusters < 2 {
            return Err(Error::InvalidInput("n_clusters must be >= 2".into()));
        }
        if self.n_keep == 0 || self.n_keep > self.n_clusters {
            return Err(Error::InvalidInput(format!(
                "n_keep must lie in 1..={}, got {}",
                self.n_clusters, self.n_keep
            )));
        }
        if self.kmeans_iters == 0 {
            return Err(Error::InvalidInput("kmeans_iters must be positive".into()));
        }
        Ok(())
    }
}

const KMEANS_SHIFT_TOL: f64 = 1e-6;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Lloyd's k-means on row-major points of dimension `dim`. Returns labels.
///
/// Initial centers are distinct data points drawn uniformly; an empty cluster
/// takes over the point farthest from its current center.
pub fn kmeans<R: Rng>(points: &[f64], dim: usize, k: usize, max_iters: usize, rng: &mut R) -> Vec<usize> {
    let n = points.len() / dim;
    let point = |i: usize| &points[i * dim..(i + 1) * dim];
    let mut centers: Vec<f64> = rng::sample_without_replacement(n, k, rng)
        .into_iter()
        .flat_map(|i| point(i).to_vec())
        .collect();
    let mut labels = vec![0usize; n];

    for _ in 0..max_iters {
        for (i, label) in labels.iter_mut().enumerate() {
            let x = point(i);
            *label = (0..k)
                .map(|c| (c, sq_dist(x, &centers[c * dim..(c + 1) * dim])))
                .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
                .0;
        }
        let mut counts = vec![0usize; k];
        labels.iter().for_each(|&l| counts[l] += 1);
        for c in 0..k {
            if counts[c] > 0 {
                continue;
            }
            let far = (0..n)
                .filter(|&i| counts[labels[i]] > 1)
                .map(|i| {
                    let l = labels[i];
                    (i, sq_dist(point(i), &centers[l * dim..(l + 1) * dim]))
                })
                .fold((usize::MAX, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best })
                .0;
            if far == usize::MAX {
                continue;
            }
            counts[labels[far]] -= 1;
            labels[far] = c;
            counts[c] = 1;
        }

        let mut next = vec![0.0; k * dim];
        for (i, &l) in labels.iter().enumerate() {
            for (acc, v) in next[l * dim..(l + 1) * dim].iter_mut().zip(point(i)) {
                *acc += v;
            }
        }
        for c in 0..k {
            let cnt = counts[c].max(1) as f64;
            next[c * dim..(c + 1) * dim].iter_mut().for_each(|v| *v /= cnt);
        }
        let shift: f64 = sq_dist(&next, &centers).sqrt();
        let norm: f64 = centers.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
        centers = next;
        if shift / norm < KMEANS_SHIFT_TOL {
            break;
        }
    }
    labels
}

/// Clusters the joint (predictors, response) points into `n_clusters` groups
/// and keeps the rows of `n_keep` groups chosen uniformly at random. Rows keep
/// their original order.
pub fn prune_clusters(d: &Dataset, cfg: &ClusterPruneConfig) -> Result<Dataset> {
    cfg.validate()?;
    if d.n() < cfg.n_clusters {
        return Err(Error::InvalidInput(format!(
            "need at least {} rows to form clusters, got {}",
            cfg.n_clusters,
            d.n()
        )));
    }
    let dim = d.p() + 1;
    let mut points = Vec::with_capacity(d.n() * dim);
    for i in 0..d.n() {
        points.extend_from_slice(d.row(i));
        points.push(d.response()[i]);
    }
    let mut stream = rng::stream(cfg.seed);
    let labels = kmeans(&points, dim, cfg.n_clusters, cfg.kmeans_iters, &mut stream);
    let keep = rng::sample_without_replacement(cfg.n_clusters, cfg.n_keep, &mut stream);
    let mut kept_mask = vec![false; cfg.n_clusters];
    keep.iter().for_each(|&c| kept_mask[c] = true);
    let rows: Vec<usize> = (0..d.n()).filter(|&i| kept_mask[labels[i]]).collect();
    if rows.is_empty() {
        return Err(Error::EmptyResult);
    }
    if rows.len() < 3 {
        return Err(Error::TooFewRows { rows: rows.len() });
    }
    d.subset(&rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeteroGenConfig {
    pub n: usize,
    pub age_min: f64,
    pub age_max: f64,
    pub noise_sd: f64,
    pub base_slope: f64,
    pub base_intercept: f64,
    pub seed: u64,
}

impl Default for HeteroGenConfig {
    fn default() -> Self {
        Self {
            n: 500,
            age_min: 1.0,
            age_max: 20.0,
            noise_sd: 1.0,
            base_slope: 3.0,
            base_intercept: 50.0,
            seed: 0,
        }
    }
}

impl HeteroGenConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.age_min < self.age_max) {
            return Err(Error::InvalidInput(format!(
                "age_min ({}) must be below age_max ({})",
                self.age_min, self.age_max
            )));
        }
        if !(self.noise_sd > 0.0) {
            return Err(Error::InvalidInput("noise_sd must be > 0".into()));
        }
        if self.n < 3 {
            return Err(Error::InvalidInput("n must be >= 3".into()));
        }
        Ok(())
    }
}

/// `x ~ U(age_min, age_max)`, `y = intercept + slope·x + x·ε`, `ε ~ N(0, noise_sd²)`.
pub fn gen_heteroscedastic(cfg: &HeteroGenConfig) -> Result<Dataset> {
    gen_age_size(cfg, true)
}

/// Same design with additive noise of constant scale `noise_sd · (age_min + age_max)/2`.
pub fn gen_homoscedastic_control(cfg: &HeteroGenConfig) -> Result<Dataset> {
    gen_age_size(cfg, false)
}

fn gen_age_size(cfg: &HeteroGenConfig, multiplicative: bool) -> Result<Dataset> {
    cfg.validate()?;
    let mut normal = NormalSampler::new(rng::stream(cfg.seed));
    let mid = 0.5 * (cfg.age_min + cfg.age_max);
    let mut x = Vec::with_capacity(cfg.n);
    let mut y = Vec::with_capacity(cfg.n);
    for _ in 0..cfg.n {
        let age = cfg.age_min + (cfg.age_max - cfg.age_min) * normal.uniform();
        let eps = cfg.noise_sd * normal.sample();
        let scale = if multiplicative { age } else { mid };
        x.push(age);
        y.push(cfg.base_intercept + cfg.base_slope * age + scale * eps);
    }
    Dataset::new(x, 1, y)
}

/// A dataset read from CSV and the number of rows dropped for missing or
/// unparseable values.
#[derive(Debug, Clone)]
pub struct CsvLoad {
    pub dataset: Dataset,
    pub dropped_rows: usize,
}

/// Reads `response_column` and `predictor_columns` (all other columns when
/// empty) from a headed CSV file.
pub fn load_csv(path: impl AsRef<Path>, response_column: &str, predictor_columns: &[String]) -> Result<CsvLoad> {
    let file = std::fs::File::open(path)?;
    read_csv(file, response_column, predictor_columns)
}

pub fn read_csv<R: Read>(reader: R, response_column: &str, predictor_columns: &[String]) -> Result<CsvLoad> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| csv_parse_error(0, e))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let y_idx = find(response_column)?;
    let x_idx: Vec<usize> = if predictor_columns.is_empty() {
        (0..headers.len()).filter(|&i| i != y_idx).collect()
    } else {
        predictor_columns.iter().map(|c| find(c)).collect::<Result<_>>()?
    };
    if x_idx.is_empty() {
        return Err(Error::InvalidInput("no predictor columns selected".into()));
    }

    let parse = |field: Option<&str>| -> Option<f64> {
        let v: f64 = field?.trim().parse().ok()?;
        v.is_finite().then_some(v)
    };
    let mut predictors = Vec::new();
    let mut response = Vec::new();
    let mut dropped = 0;
    for (k, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| csv_parse_error(k + 1, e))?;
        let y = parse(record.get(y_idx));
        let xs: Option<Vec<f64>> = x_idx.iter().map(|&i| parse(record.get(i))).collect();
        match (y, xs) {
            (Some(y), Some(xs)) => {
                predictors.extend(xs);
                response.push(y);
            }
            _ => dropped += 1,
        }
    }
    if response.len() < 3 {
        return Err(Error::TooFewRows { rows: response.len() });
    }
    let mut names: Vec<String> = x_idx.iter().map(|&i| headers[i].clone()).collect();
    names.push(headers[y_idx].clone());
    let dataset = Dataset::new(predictors, x_idx.len(), response)?.with_column_names(names)?;
    Ok(CsvLoad {
        dataset,
        dropped_rows: dropped,
    })
}

fn csv_parse_error(record: usize, e: csv::Error) -> Error {
    Error::Parse {
        record,
        message: e.to_string(),
    }
}

/// Variance inflation factor `1 / (1 - R²_j)` of every predictor.
pub fn vif(d: &Dataset) -> Result<Vec<f64>> {
    let p = d.p();
    if p < 2 {
        return Err(Error::InvalidInput("VIF needs at least two predictors".into()));
    }
    let columns: Vec<Vec<f64>> = (0..p).map(|j| d.column(j)).collect();
    (0..p)
        .map(|j| {
            let others: Vec<Vec<f64>> = columns
                .iter()
                .enumerate()
                .filter(|(k, _)| *k != j)
                .map(|(_, c)| c.clone())
                .collect();
            let sub = Dataset::from_columns(&others, columns[j].clone())?;
            let r2 = classical::auxiliary_r_squared(&columns[j], &sub)
                .map_err(|_| Error::SingularDesign { column: Some(j) })?;
            if r2 >= 1.0 - 1e-12 {
                return Err(Error::SingularDesign { column: Some(j) });
            }
            Ok(1.0 / (1.0 - r2))
        })
        .collect()
}
