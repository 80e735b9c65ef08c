//! Cyclic coordinate descent for the weighted lasso.
//!
//! Minimises `(1 / 2W) sum_i w_i (y_i - b0 - x_i b)^2 + lambda * |b|_1` where the
//! non-intercept columns are standardised to weighted mean 0 and weighted
//! variance 1 (divisor `W = sum w_i`). The intercept is unpenalised.

use nalgebra::DMatrix;

pub const TOL: f64 = 1e-7;
pub const MAX_SWEEPS: usize = 10_000;

#[derive(Debug, Clone)]
pub(crate) struct LassoFit {
    /// Coefficients on the original design scale, intercept first.
    pub coefficients: Vec<f64>,
    /// Coefficients on the standardized columns, for KKT checks.
    #[cfg_attr(not(test), allow(dead_code))]
    pub standardized: Vec<f64>,
}

struct Standardized {
    cols: Vec<Vec<f64>>,
    means: Vec<f64>,
    sds: Vec<f64>,
}

fn standardize(x: &DMatrix<f64>, w: &[f64], wsum: f64) -> Standardized {
    let (n, p) = x.shape();
    let mut cols = Vec::with_capacity(p - 1);
    let mut means = Vec::with_capacity(p - 1);
    let mut sds = Vec::with_capacity(p - 1);
    for j in 1..p {
        let col = x.column(j);
        let mean = (0..n).map(|i| w[i] * col[i]).sum::<f64>() / wsum;
        let var = (0..n).map(|i| w[i] * (col[i] - mean).powi(2)).sum::<f64>() / wsum;
        let sd = var.sqrt();
        // constant columns stay at zero
        let usable = sd > 1e-12 * (1.0 + mean.abs());
        cols.push(if usable {
            (0..n).map(|i| (col[i] - mean) / sd).collect()
        } else {
            vec![0.0; n]
        });
        means.push(mean);
        sds.push(if usable { sd } else { 0.0 });
    }
    Standardized { cols, means, sds }
}

fn soft_threshold(z: f64, lambda: f64) -> f64 {
    if z > lambda {
        z - lambda
    } else if z < -lambda {
        z + lambda
    } else {
        0.0
    }
}

/// `x` must carry the intercept in column 0.
pub(crate) fn fit_lasso(x: &DMatrix<f64>, y: &[f64], weights: Option<&[f64]>, lambda: f64) -> LassoFit {
    let (n, p) = x.shape();
    let w = weights.map_or_else(|| vec![1.0; n], <[f64]>::to_vec);
    let wsum: f64 = w.iter().sum();
    let std = standardize(x, &w, wsum);
    let ybar = (0..n).map(|i| w[i] * y[i]).sum::<f64>() / wsum;
    let mut resid: Vec<f64> = y.iter().map(|v| v - ybar).collect();
    let mut beta = vec![0.0; p - 1];

    let mut sweeps = 0;
    while sweeps < MAX_SWEEPS {
        sweeps += 1;
        let mut max_change: f64 = 0.0;
        for j in 0..p - 1 {
            if std.sds[j] == 0.0 {
                continue;
            }
            let col = &std.cols[j];
            let corr = (0..n).map(|i| w[i] * col[i] * resid[i]).sum::<f64>() / wsum;
            let updated = soft_threshold(corr + beta[j], lambda);
            let delta = updated - beta[j];
            if delta != 0.0 {
                for i in 0..n {
                    resid[i] -= delta * col[i];
                }
                beta[j] = updated;
                max_change = max_change.max(delta.abs());
            }
        }
        if max_change < TOL {
            break;
        }
    }

    let mut coefficients = vec![0.0; p];
    let mut intercept = ybar;
    for j in 0..p - 1 {
        if std.sds[j] > 0.0 {
            coefficients[j + 1] = beta[j] / std.sds[j];
            intercept -= coefficients[j + 1] * std.means[j];
        }
    }
    coefficients[0] = intercept;
    LassoFit {
        coefficients,
        standardized: beta,
    }
}
