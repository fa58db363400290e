//! Small dense helpers: order-independent summation and a pivoted solver for
//! the normal equations.

use crate::error::{Error, Result};

/// Relative pivot magnitude below which a system is declared singular.
pub const PIVOT_TOLERANCE: f64 = 1e-12;

/// Pairwise (cascade) summation. The result depends only on the slice order,
/// never on how work was scheduled to produce it.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if values.len() <= BLOCK {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    pairwise_sum(values) / values.len() as f64
}

/// Sample variance with denominator `n - 1`.
pub fn sample_variance(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return f64::NAN;
    }
    let m = mean(values);
    let sq: Vec<f64> = values.iter().map(|v| (v - m) * (v - m)).collect();
    pairwise_sum(&sq) / (values.len() - 1) as f64
}

pub fn sample_sd(values: &[f64]) -> f64 {
    sample_variance(values).sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `a x = b` for a dense `k x k` row-major matrix by Gaussian
/// elimination with partial pivoting.
///
/// Fails with [`Error::SingularDesign`] naming the offending column when a
/// pivot drops below [`PIVOT_TOLERANCE`] times the largest diagonal magnitude.
pub fn solve(mut a: Vec<f64>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let k = b.len();
    if a.len() != k * k {
        return Err(Error::DimensionMismatch {
            expected: k * k,
            found: a.len(),
        });
    }
    let scale = (0..k).map(|i| a[i * k + i].abs()).fold(0.0, f64::max);
    if !(scale > 0.0) {
        return Err(Error::SingularDesign { column: Some(0) });
    }
    let mut order: Vec<usize> = (0..k).collect();
    for col in 0..k {
        let (piv_row, piv_val) = (col..k)
            .map(|r| (r, a[r * k + col].abs()))
            .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if piv_val < PIVOT_TOLERANCE * scale {
            return Err(Error::SingularDesign {
                column: Some(order[col]),
            });
        }
        if piv_row != col {
            for c in 0..k {
                a.swap(col * k + c, piv_row * k + c);
            }
            b.swap(col, piv_row);
            order.swap(col, piv_row);
        }
        let pivot = a[col * k + col];
        for r in col + 1..k {
            let factor = a[r * k + col] / pivot;
            if factor == 0.0 {
                continue;
            }
            for c in col..k {
                a[r * k + c] -= factor * a[col * k + c];
            }
            b[r] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; k];
    for row in (0..k).rev() {
        let tail: f64 = (row + 1..k).map(|c| a[row * k + c] * x[c]).sum();
        x[row] = (b[row] - tail) / a[row * k + row];
    }
    Ok(x)
}

/// Least squares with an intercept: regresses `y` on the columns of the
/// row-major `n x p` matrix `rows`. Returns `(slope, intercept)`.
///
/// Works on centered cross-products, which is algebraically identical to
/// appending a ones column and better conditioned.
pub fn least_squares(rows: &[f64], n: usize, p: usize, y: &[f64]) -> Result<(Vec<f64>, f64)> {
    if rows.len() != n * p {
        return Err(Error::DimensionMismatch {
            expected: n * p,
            found: rows.len(),
        });
    }
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: y.len(),
        });
    }
    let col_means: Vec<f64> = (0..p)
        .map(|j| {
            let col: Vec<f64> = (0..n).map(|i| rows[i * p + j]).collect();
            mean(&col)
        })
        .collect();
    let y_mean = mean(y);
    let mut xtx = vec![0.0; p * p];
    let mut xty = vec![0.0; p];
    for i in 0..n {
        let row = &rows[i * p..(i + 1) * p];
        let yc = y[i] - y_mean;
        for a in 0..p {
            let xa = row[a] - col_means[a];
            xty[a] += xa * yc;
            for b in a..p {
                xtx[a * p + b] += xa * (row[b] - col_means[b]);
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            xtx[a * p + b] = xtx[b * p + a];
        }
    }
    let slope = solve(xtx, xty)?;
    let intercept = y_mean - dot(&slope, &col_means);
    Ok((slope, intercept))
}
