use serde::Serialize;

use super::TmleConfig;
use crate::data::{Dataset, OutcomeKind};
use crate::error::{Error, Result};
use crate::learners::{Inputs, LearnerSpec};
use crate::rng::derive_seed;
use crate::super_learner::{fit_super_learner, sl_predict, Loss, SlMode, SuperLearnerConfig, SuperLearnerFit};

/// How `P(A = 1 | W)` is obtained.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PropensityModel {
    /// Super Learner over the given roster with the binomial loss.
    Fit(Vec<LearnerSpec>),
    /// Known constant, as in a randomised trial. No fit is performed.
    Known(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum PropensityFit {
    Known(f64),
    Fitted(SuperLearnerFit),
}

/// Fitted outcome regression and treatment mechanism, reusable on new rows.
#[derive(Debug, Clone, PartialEq)]
pub struct NuisanceModels {
    pub q: SuperLearnerFit,
    pub g: PropensityFit,
    pub g_bound: f64,
    pub sl_mode: SlMode,
    /// `(min, max)` used to map a continuous outcome onto `[0, 1]` for the
    /// logistic fluctuation; `(0, 1)` for binary outcomes.
    pub outcome_scale: (f64, f64),
}

/// Nuisance predictions on a specific set of rows.
#[derive(Debug, Clone, PartialEq)]
pub struct NuisanceFits {
    pub qbar1: Vec<f64>,
    pub qbar0: Vec<f64>,
    pub qbar_obs: Vec<f64>,
    /// Propensity after truncation into `g_bounds`.
    pub g1: Vec<f64>,
    pub g_bounds: (f64, f64),
    pub g_truncated: usize,
    /// Extremes of the propensity before truncation.
    pub g_raw_range: (f64, f64),
    pub outcome_scale: (f64, f64),
}

pub(crate) fn outcome_loss(kind: OutcomeKind) -> Loss {
    match kind {
        OutcomeKind::Continuous => Loss::SquaredError,
        OutcomeKind::Binary => Loss::BinomialLoglik,
    }
}

/// Super Learner for `E(Y | A, W)`, folds stratified on `A` (continuous `Y`)
/// or on the `(A, Y)` cell (binary `Y`).
pub fn fit_outcome_sl(
    ds: &Dataset,
    roster: &[LearnerSpec],
    folds: Option<usize>,
    seed: u64,
) -> Result<SuperLearnerFit> {
    let y = ds.outcome();
    let strata: Vec<u32> = match ds.outcome_kind() {
        OutcomeKind::Continuous => ds.treatment().iter().map(|&v| u32::from(v)).collect(),
        OutcomeKind::Binary => ds
            .treatment()
            .iter()
            .zip(y)
            .map(|(&t, &v)| 2 * u32::from(t) + u32::from(v == 1.0))
            .collect(),
    };
    let cfg = SuperLearnerConfig {
        v: folds,
        seed,
        loss: outcome_loss(ds.outcome_kind()),
        strata: Some(strata),
    };
    let a = ds.treatment_f64();
    fit_super_learner(roster, Inputs::new(ds.covariates(), Some(&a)), y, &cfg)
}

/// Super Learner for `P(A = 1 | W)` under the binomial loss, folds stratified on `A`.
pub fn fit_propensity_sl(
    ds: &Dataset,
    roster: &[LearnerSpec],
    folds: Option<usize>,
    seed: u64,
) -> Result<SuperLearnerFit> {
    let cfg = SuperLearnerConfig {
        v: folds,
        seed,
        loss: Loss::BinomialLoglik,
        strata: Some(ds.treatment().iter().map(|&v| u32::from(v)).collect()),
    };
    fit_super_learner(roster, Inputs::new(ds.covariates(), None), &ds.treatment_f64(), &cfg)
}

const Q_SEED_TAG: u64 = 1;
const G_SEED_TAG: u64 = 2;

/// Fits the outcome Super Learner on `(A, W)` and, unless the propensity is
/// known, the propensity Super Learner on `W`.
pub fn fit_nuisance_models(ds: &Dataset, config: &TmleConfig) -> Result<NuisanceModels> {
    if !(config.g_bound >= 0.0 && config.g_bound < 0.5) {
        return Err(Error::InvalidConfig(format!(
            "propensity bound must lie in [0, 0.5), got {}",
            config.g_bound
        )));
    }
    let fitted_g = matches!(config.g_model, PropensityModel::Fit(_));
    if fitted_g && !ds.both_arms_present() {
        return Err(Error::SingleArmData);
    }
    let y = ds.outcome();
    let kind = ds.outcome_kind();
    let q = fit_outcome_sl(ds, &config.q_roster, config.folds, derive_seed(config.seed, Q_SEED_TAG))?;
    let g = match &config.g_model {
        PropensityModel::Known(p) => {
            if !(*p > 0.0 && *p < 1.0) {
                return Err(Error::InvalidConfig(format!("known propensity {p} not in (0, 1)")));
            }
            PropensityFit::Known(*p)
        }
        PropensityModel::Fit(roster) => PropensityFit::Fitted(fit_propensity_sl(
            ds,
            roster,
            config.folds,
            derive_seed(config.seed, G_SEED_TAG),
        )?),
    };

    let outcome_scale = match kind {
        OutcomeKind::Binary => (0.0, 1.0),
        OutcomeKind::Continuous => y.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        }),
    };
    Ok(NuisanceModels {
        q,
        g,
        g_bound: config.g_bound,
        sl_mode: config.sl_mode,
        outcome_scale,
    })
}

impl NuisanceModels {
    /// Predictions on the rows of `ds`. Counterfactual outcome predictions
    /// set `A` to 1 and to 0 for every row.
    pub fn evaluate(&self, ds: &Dataset) -> Result<NuisanceFits> {
        let n = ds.n();
        let w = ds.covariates();
        let ones = vec![1.0; n];
        let zeros = vec![0.0; n];
        let qbar1 = sl_predict(&self.q, Inputs::new(w, Some(&ones)), self.sl_mode)?;
        let qbar0 = sl_predict(&self.q, Inputs::new(w, Some(&zeros)), self.sl_mode)?;
        let qbar_obs = ds
            .treatment()
            .iter()
            .enumerate()
            .map(|(i, &a)| if a == 1 { qbar1[i] } else { qbar0[i] })
            .collect();

        let raw = match &self.g {
            PropensityFit::Known(p) => vec![*p; n],
            PropensityFit::Fitted(fit) => sl_predict(fit, Inputs::new(w, None), self.sl_mode)?,
        };
        let (lo, hi) = (self.g_bound, 1.0 - self.g_bound);
        let g_raw_range = raw
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        let mut g_truncated = 0;
        let g1 = raw
            .into_iter()
            .map(|p| {
                if p < lo || p > hi {
                    g_truncated += 1;
                }
                p.clamp(lo, hi)
            })
            .collect();
        Ok(NuisanceFits {
            qbar1,
            qbar0,
            qbar_obs,
            g1,
            g_bounds: (lo, hi),
            g_truncated,
            g_raw_range,
            outcome_scale: self.outcome_scale,
        })
    }

    pub fn g_fit(&self) -> Option<&SuperLearnerFit> {
        match &self.g {
            PropensityFit::Fitted(f) => Some(f),
            PropensityFit::Known(_) => None,
        }
    }
}

/// [`fit_nuisance_models`] followed by evaluation on the same rows.
pub fn fit_nuisance(ds: &Dataset, config: &TmleConfig) -> Result<(NuisanceModels, NuisanceFits)> {
    let models = fit_nuisance_models(ds, config)?;
    let fits = models.evaluate(ds)?;
    Ok((models, fits))
}
