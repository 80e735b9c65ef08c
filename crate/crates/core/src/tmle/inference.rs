use rayon::prelude::*;

use super::{
    apply_fluctuation, clever_covariate, fit_nuisance_models, fluctuate, CleverCovariate, EstimandKind, Fluctuation,
    TargetingResult, TmleConfig,
};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::derive_seed;
use crate::stats;
use crate::super_learner::CvFolds;

const CROSSVAL_SEED_TAG: u64 = 1000;

fn under_rule(d: &[u8], q1: &[f64], q0: &[f64]) -> Vec<f64> {
    d.iter()
        .enumerate()
        .map(|(i, &di)| if di == 1 { q1[i] } else { q0[i] })
        .collect()
}

/// Substitution estimate from (targeted or initial) counterfactual predictions,
/// with `W` weighted by its empirical distribution.
pub fn point_estimate(kind: &EstimandKind, q1: &[f64], q0: &[f64], y: &[f64]) -> f64 {
    match kind {
        EstimandKind::Ate => stats::mean(&q1.iter().zip(q0).map(|(a, b)| a - b).collect::<Vec<_>>()),
        EstimandKind::Par => stats::mean(&q1.iter().zip(y).map(|(a, b)| a - b).collect::<Vec<_>>()),
        EstimandKind::MeanOutcome => stats::mean(y),
        EstimandKind::RuleMean(d) => stats::mean(&under_rule(d, q1, q0)),
        EstimandKind::RuleContrast(d) => stats::mean(&under_rule(d, q1, q0)) - stats::mean(y),
    }
}

/// Efficient influence curve evaluated at the targeted fit.
///
/// For the rule contrast, `psi` is `EY_d - EY`; the curve is the rule-mean
/// curve at `psi + mean(Y)` minus the mean-outcome curve at `mean(Y)`.
pub fn eic(kind: &EstimandKind, h: &CleverCovariate, t: &TargetingResult, y: &[f64], psi: f64) -> Vec<f64> {
    let n = y.len();
    let resid = |i: usize| h.observed[i] * (y[i] - t.qbar_obs_star[i]);
    match kind {
        EstimandKind::Ate => (0..n)
            .map(|i| resid(i) + t.qbar1_star[i] - t.qbar0_star[i] - psi)
            .collect(),
        EstimandKind::Par => (0..n).map(|i| resid(i) + t.qbar1_star[i] - y[i] - psi).collect(),
        EstimandKind::MeanOutcome => y.iter().map(|v| v - psi).collect(),
        EstimandKind::RuleMean(d) => {
            let qd = t.under_rule(d);
            (0..n).map(|i| resid(i) + qd[i] - psi).collect()
        }
        EstimandKind::RuleContrast(d) => {
            let ybar = stats::mean(y);
            let rm = eic(&EstimandKind::RuleMean(d.clone()), h, t, y, psi + ybar);
            let mo = eic(&EstimandKind::MeanOutcome, h, t, y, ybar);
            rm.iter().zip(&mo).map(|(a, b)| a - b).collect()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inference {
    pub sigma2: f64,
    pub se: f64,
    pub ci: (f64, f64),
    pub level: f64,
}

/// Interval from the sample variance (divisor `n - 1`) of the EIC values.
pub fn infer(psi: f64, eic_values: &[f64], level: f64) -> Result<Inference> {
    let n = eic_values.len();
    if n < 2 {
        return Err(Error::TooFewObservations { needed: 2, found: n });
    }
    Ok(infer_from_variance(psi, stats::sample_variance(eic_values), n, level))
}

pub fn infer_from_variance(psi: f64, sigma2: f64, n: usize, level: f64) -> Inference {
    let se = (sigma2.max(0.0) / n as f64).sqrt();
    let z = stats::z_quantile(level);
    Inference {
        sigma2,
        se,
        ci: (psi - z * se, psi + z * se),
        level,
    }
}

/// Cross-validated EIC variance over the given folds.
///
/// For each fold the nuisances are refitted on its complement and targeted
/// there; the fitted fluctuation is carried to the held-out rows, where the
/// EIC is evaluated. The result is the mean of the per-fold sample
/// variances, or the pooled variance of all held-out values if some fold has
/// a single row.
pub fn crossval_variance(
    ds: &Dataset,
    kind: &EstimandKind,
    config: &TmleConfig,
    folds: &CvFolds,
    fluctuation: Fluctuation,
) -> Result<f64> {
    if folds.n() != ds.n() {
        return Err(Error::ShapeMismatch {
            expected: format!("folds over {} rows", ds.n()),
            found: folds.n().to_string(),
        });
    }
    let per_fold: Vec<Vec<f64>> = (0..folds.v)
        .into_par_iter()
        .map(|f| {
            let train = folds.training(f);
            let valid = folds.validation(f);
            let mut cfg = config.clone();
            cfg.seed = derive_seed(config.seed, CROSSVAL_SEED_TAG + f as u64);

            let ds_t = ds.subset(&train);
            let kind_t = kind.subset(&train);
            let models = fit_nuisance_models(&ds_t, &cfg)?;
            let nf_t = models.evaluate(&ds_t)?;
            let h_t = clever_covariate(&kind_t, ds_t.treatment(), &nf_t.g1);
            let eps = fluctuate(&nf_t, &h_t, ds_t.treatment(), ds_t.outcome(), fluctuation)?.epsilon;

            let ds_v = ds.subset(&valid);
            let kind_v = kind.subset(&valid);
            let nf_v = models.evaluate(&ds_v)?;
            let h_v = clever_covariate(&kind_v, ds_v.treatment(), &nf_v.g1);
            let (q1, q0, qo) = apply_fluctuation(fluctuation, eps, &nf_v, &h_v, ds_v.treatment());
            let psi_v = point_estimate(&kind_v, &q1, &q0, ds_v.outcome());
            let t_v = TargetingResult {
                epsilon: eps,
                fluctuation,
                converged: true,
                iterations: 0,
                qbar1_star: q1,
                qbar0_star: q0,
                qbar_obs_star: qo,
            };
            Ok(eic(&kind_v, &h_v, &t_v, ds_v.outcome(), psi_v))
        })
        .collect::<Result<_>>()?;

    if per_fold.iter().any(|d| d.len() < 2) {
        let pooled: Vec<f64> = per_fold.concat();
        if pooled.len() < 2 {
            return Err(Error::TooFewObservations {
                needed: 2,
                found: pooled.len(),
            });
        }
        return Ok(stats::sample_variance(&pooled));
    }
    let vars: Vec<f64> = per_fold.iter().map(|d| stats::sample_variance(d)).collect();
    Ok(stats::mean(&vars))
}
