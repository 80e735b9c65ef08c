//! Clever covariates and the one-parameter fluctuation.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{EstimandKind, NuisanceFits};
use crate::error::{Error, Result};
use crate::learners::{expit, logit, solve_logistic};

/// Bound applied to initial predictions on the `[0, 1]` scale before taking
/// logits in the logistic fluctuation.
pub const Q_BOUND: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fluctuation {
    Linear,
    Logistic,
}

/// `H` at the observed treatment and at `A = 1`, `A = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct CleverCovariate {
    pub observed: Vec<f64>,
    pub treated: Vec<f64>,
    pub control: Vec<f64>,
}

impl CleverCovariate {
    pub fn is_zero(&self) -> bool {
        self.observed
            .iter()
            .chain(&self.treated)
            .chain(&self.control)
            .all(|&h| h == 0.0)
    }
}

/// Per-estimand clever covariate; `g1` must already be bounded away from 0 and 1.
///
/// - ATE: `A/g - (1-A)/(1-g)`
/// - PAR: `A/g`
/// - mean outcome: 0
/// - rule mean and rule contrast: `1{A = d(W)} / P(A = d(W) | W)`
pub fn clever_covariate(kind: &EstimandKind, a: &[u8], g1: &[f64]) -> CleverCovariate {
    let n = a.len();
    let (treated, control): (Vec<f64>, Vec<f64>) = match kind {
        EstimandKind::Ate => (0..n).map(|i| (1.0 / g1[i], -1.0 / (1.0 - g1[i]))).unzip(),
        EstimandKind::Par => (0..n).map(|i| (1.0 / g1[i], 0.0)).unzip(),
        EstimandKind::MeanOutcome => (vec![0.0; n], vec![0.0; n]),
        EstimandKind::RuleMean(d) | EstimandKind::RuleContrast(d) => (0..n)
            .map(|i| {
                if d[i] == 1 {
                    (1.0 / g1[i], 0.0)
                } else {
                    (0.0, 1.0 / (1.0 - g1[i]))
                }
            })
            .unzip(),
    };
    let observed = (0..n)
        .map(|i| if a[i] == 1 { treated[i] } else { control[i] })
        .collect();
    CleverCovariate {
        observed,
        treated,
        control,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetingResult {
    pub epsilon: f64,
    pub fluctuation: Fluctuation,
    pub converged: bool,
    pub iterations: usize,
    pub qbar1_star: Vec<f64>,
    pub qbar0_star: Vec<f64>,
    pub qbar_obs_star: Vec<f64>,
}

impl TargetingResult {
    /// `Q*(d(W), W)` for a rule `d`.
    pub fn under_rule(&self, d: &[u8]) -> Vec<f64> {
        d.iter()
            .enumerate()
            .map(|(i, &di)| {
                if di == 1 {
                    self.qbar1_star[i]
                } else {
                    self.qbar0_star[i]
                }
            })
            .collect()
    }
}

fn to_unit(v: f64, (lo, hi): (f64, f64)) -> f64 {
    ((v - lo) / (hi - lo)).clamp(Q_BOUND, 1.0 - Q_BOUND)
}

fn check_scale(scale: (f64, f64)) -> Result<()> {
    if scale.1 > scale.0 && scale.0.is_finite() && scale.1.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(
            "logistic fluctuation needs a non-degenerate outcome range".into(),
        ))
    }
}

/// Moves the initial predictions along the fluctuation submodel by `epsilon`.
pub fn apply_fluctuation(
    fluctuation: Fluctuation,
    epsilon: f64,
    nf: &NuisanceFits,
    h: &CleverCovariate,
    a: &[u8],
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let update = |q: &[f64], hh: &[f64]| -> Vec<f64> {
        match fluctuation {
            Fluctuation::Linear => q.iter().zip(hh).map(|(q, h)| q + epsilon * h).collect(),
            Fluctuation::Logistic => {
                let (lo, hi) = nf.outcome_scale;
                q.iter()
                    .zip(hh)
                    .map(|(&q, &h)| lo + (hi - lo) * expit(logit(to_unit(q, nf.outcome_scale)) + epsilon * h))
                    .collect()
            }
        }
    };
    let q1 = update(&nf.qbar1, &h.treated);
    let q0 = update(&nf.qbar0, &h.control);
    let obs = a
        .iter()
        .enumerate()
        .map(|(i, &ai)| if ai == 1 { q1[i] } else { q0[i] })
        .collect();
    (q1, q0, obs)
}

/// Solves the efficient-score equation along the one-dimensional submodel
/// through the initial fit.
///
/// Linear: `eps = sum H (Y - Q) / sum H^2`, closed form. Logistic: `eps` is the
/// MLE of a logistic regression of the `[0, 1]`-scaled outcome on `H` with
/// offset `logit(Q)`. `H == 0` returns `eps = 0` after zero iterations.
pub fn fluctuate(
    nf: &NuisanceFits,
    h: &CleverCovariate,
    a: &[u8],
    y: &[f64],
    fluctuation: Fluctuation,
) -> Result<TargetingResult> {
    let unchanged = |eps: f64, converged: bool, iterations: usize| {
        let (q1, q0, obs) = apply_fluctuation(fluctuation, eps, nf, h, a);
        TargetingResult {
            epsilon: eps,
            fluctuation,
            converged,
            iterations,
            qbar1_star: q1,
            qbar0_star: q0,
            qbar_obs_star: obs,
        }
    };
    if h.is_zero() {
        let mut t = unchanged(0.0, true, 0);
        // no update at all, on either scale
        t.qbar1_star = nf.qbar1.clone();
        t.qbar0_star = nf.qbar0.clone();
        t.qbar_obs_star = nf.qbar_obs.clone();
        return Ok(t);
    }
    match fluctuation {
        Fluctuation::Linear => {
            let hh: f64 = h.observed.iter().map(|v| v * v).sum();
            let hr: f64 = h
                .observed
                .iter()
                .zip(y.iter().zip(&nf.qbar_obs))
                .map(|(h, (y, q))| h * (y - q))
                .sum();
            if hh == 0.0 {
                // counterfactual H is non-zero but no observed unit carries weight
                return Err(Error::DegenerateFluctuation);
            }
            Ok(unchanged(hr / hh, true, 1))
        }
        Fluctuation::Logistic => {
            check_scale(nf.outcome_scale)?;
            let (lo, hi) = nf.outcome_scale;
            let ys: Vec<f64> = y.iter().map(|&v| ((v - lo) / (hi - lo)).clamp(0.0, 1.0)).collect();
            let offset: Vec<f64> = nf
                .qbar_obs
                .iter()
                .map(|&q| logit(to_unit(q, nf.outcome_scale)))
                .collect();
            let x = DMatrix::from_column_slice(y.len(), 1, &h.observed);
            let sol = solve_logistic(&x, &ys, None, Some(&offset))?;
            Ok(unchanged(sol.coefficients[0], sol.converged, sol.iterations))
        }
    }
}
