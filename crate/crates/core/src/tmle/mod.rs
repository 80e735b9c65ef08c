//! Targeted maximum likelihood estimation with influence-curve inference,
//! plus the GLM and untargeted Super Learner plug-in baselines.

mod inference;
mod nuisance;
mod targeting;

use serde::{Deserialize, Serialize};

pub use inference::{crossval_variance, eic, infer, infer_from_variance, point_estimate, Inference};
pub use nuisance::{
    fit_nuisance, fit_nuisance_models, fit_outcome_sl, fit_propensity_sl, NuisanceFits, NuisanceModels, PropensityFit,
    PropensityModel,
};
pub use targeting::{
    apply_fluctuation, clever_covariate, fluctuate, CleverCovariate, Fluctuation, TargetingResult, Q_BOUND,
};

use crate::data::{Dataset, OutcomeKind};
use crate::error::{Error, Result};
use crate::learners::{numerical_rank, pinv, weighted_lstsq, Basis, LearnerSpec};
use crate::stats;
use crate::super_learner::{SlMode, SuperLearnerFit};

pub const DEFAULT_G_BOUND: f64 = 0.01;
pub const DEFAULT_LEVEL: f64 = 0.95;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EstimandKind {
    Ate,
    Par,
    MeanOutcome,
    /// `E Y_d` for per-unit assignments `d(W_i)`.
    RuleMean(Vec<u8>),
    /// `E Y_d - E Y`.
    RuleContrast(Vec<u8>),
}

impl EstimandKind {
    pub fn name(&self) -> &'static str {
        match self {
            EstimandKind::Ate => "ate",
            EstimandKind::Par => "par",
            EstimandKind::MeanOutcome => "mean",
            EstimandKind::RuleMean(_) => "rule_mean",
            EstimandKind::RuleContrast(_) => "rule_contrast",
        }
    }

    pub fn rule(&self) -> Option<&[u8]> {
        match self {
            EstimandKind::RuleMean(d) | EstimandKind::RuleContrast(d) => Some(d),
            _ => None,
        }
    }

    /// Same estimand restricted to the rows in `idx`.
    pub fn subset(&self, idx: &[usize]) -> EstimandKind {
        let pick = |d: &[u8]| idx.iter().map(|&i| d[i]).collect();
        match self {
            EstimandKind::RuleMean(d) => EstimandKind::RuleMean(pick(d)),
            EstimandKind::RuleContrast(d) => EstimandKind::RuleContrast(pick(d)),
            other => other.clone(),
        }
    }

    fn check(&self, n: usize) -> Result<()> {
        if let Some(d) = self.rule() {
            if d.len() != n {
                return Err(Error::ShapeMismatch {
                    expected: format!("{n} rule assignments"),
                    found: d.len().to_string(),
                });
            }
            if d.iter().any(|&v| v > 1) {
                return Err(Error::InvalidConfig("rule assignments must be 0 or 1".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceMode {
    #[default]
    Plugin,
    Crossval,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Tmle,
    Glm,
    SlPlugin,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Tmle => "tmle",
            Method::Glm => "glm",
            Method::SlPlugin => "sl_plugin",
        }
    }
}

/// Outcome roster used when none is configured.
pub fn default_outcome_roster(kind: OutcomeKind) -> Vec<LearnerSpec> {
    match kind {
        OutcomeKind::Continuous => vec![
            LearnerSpec::Mean,
            LearnerSpec::ols(),
            LearnerSpec::ols_interact(),
            LearnerSpec::poly2(),
            LearnerSpec::lasso(0.01),
            LearnerSpec::lasso(0.1),
            LearnerSpec::lasso(1.0),
            LearnerSpec::knn(5),
            LearnerSpec::knn(20),
            LearnerSpec::cart(3),
        ],
        // Linear smoothers can leave [0, 1], which the log-loss cannot score.
        OutcomeKind::Binary => vec![
            LearnerSpec::Mean,
            LearnerSpec::logistic(Basis::Linear),
            LearnerSpec::logistic(Basis::Interact),
            LearnerSpec::logistic(Basis::Poly2Interact),
            LearnerSpec::knn(5),
            LearnerSpec::knn(20),
            LearnerSpec::cart(3),
        ],
    }
}

pub fn default_propensity_roster() -> Vec<LearnerSpec> {
    vec![
        LearnerSpec::Mean,
        LearnerSpec::logistic(Basis::Linear),
        LearnerSpec::logistic(Basis::Poly2),
        LearnerSpec::cart(3),
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct TmleConfig {
    pub q_roster: Vec<LearnerSpec>,
    pub g_model: PropensityModel,
    /// Propensity truncation `delta`; `g` is kept in `[delta, 1 - delta]`.
    pub g_bound: f64,
    /// `None` picks linear for continuous and logistic for binary outcomes.
    pub fluctuation: Option<Fluctuation>,
    pub variance_mode: VarianceMode,
    pub level: f64,
    /// Super Learner fold count; `None` uses the default.
    pub folds: Option<usize>,
    pub sl_mode: SlMode,
    pub seed: u64,
}

impl TmleConfig {
    pub fn new(q_roster: Vec<LearnerSpec>, g_model: PropensityModel, seed: u64) -> Self {
        TmleConfig {
            q_roster,
            g_model,
            g_bound: DEFAULT_G_BOUND,
            fluctuation: None,
            variance_mode: VarianceMode::Plugin,
            level: DEFAULT_LEVEL,
            folds: None,
            sl_mode: SlMode::Ensemble,
            seed,
        }
    }

    /// Default rosters for the given outcome type.
    pub fn defaults(kind: OutcomeKind, seed: u64) -> Self {
        TmleConfig::new(
            default_outcome_roster(kind),
            PropensityModel::Fit(default_propensity_roster()),
            seed,
        )
    }

    pub fn fluctuation_for(&self, kind: OutcomeKind) -> Fluctuation {
        self.fluctuation.unwrap_or(match kind {
            OutcomeKind::Continuous => Fluctuation::Linear,
            OutcomeKind::Binary => Fluctuation::Logistic,
        })
    }

    fn check(&self) -> Result<()> {
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::InvalidConfig(format!("level {} not in (0, 1)", self.level)));
        }
        Ok(())
    }
}

/// Candidate-level summary of one Super Learner fit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlSummary {
    pub candidates: Vec<String>,
    pub cv_risks: Vec<f64>,
    pub weights: Vec<f64>,
    pub discrete_winner: String,
    pub ensemble_risk: f64,
    pub loss: &'static str,
    pub folds: usize,
}

impl From<&SuperLearnerFit> for SlSummary {
    fn from(fit: &SuperLearnerFit) -> Self {
        SlSummary {
            candidates: fit.candidates.iter().map(LearnerSpec::name).collect(),
            cv_risks: fit.cv_risks.clone(),
            weights: fit.weights.clone(),
            discrete_winner: fit.candidates[fit.discrete_winner].name(),
            ensemble_risk: fit.ensemble_risk,
            loss: fit.loss.name(),
            folds: fit.folds.v,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Diagnostics {
    /// Propensity range before truncation.
    pub g_min: Option<f64>,
    pub g_max: Option<f64>,
    pub g_truncated_count: usize,
    pub g_bounds: Option<(f64, f64)>,
    pub epsilon: Option<f64>,
    pub fluctuation: Option<Fluctuation>,
    pub targeting_converged: Option<bool>,
    pub targeting_iterations: Option<usize>,
    /// Zero standard error: the interval collapses to the point estimate.
    pub degenerate_ci: bool,
    pub no_covariates: bool,
    pub outcome_learner: Option<SlSummary>,
    pub propensity_learner: Option<SlSummary>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateReport {
    pub estimand: EstimandKind,
    pub method: Method,
    pub psi: f64,
    /// Absent for the untargeted plug-in.
    pub se: Option<f64>,
    pub ci: Option<(f64, f64)>,
    pub level: f64,
    pub n: usize,
    /// Empty for the baselines.
    pub eic_values: Vec<f64>,
    pub variance_mode: VarianceMode,
    pub diagnostics: Diagnostics,
    pub seed: u64,
}

/// Flat serialised form of an [`EstimateReport`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRecord {
    pub estimand: &'static str,
    pub method: &'static str,
    pub psi: f64,
    pub se: Option<f64>,
    pub ci_lower: Option<f64>,
    pub ci_upper: Option<f64>,
    pub level: f64,
    pub n: usize,
    pub variance_mode: VarianceMode,
    pub eic_mean: Option<f64>,
    pub eic_var: Option<f64>,
    pub g_min: Option<f64>,
    pub g_max: Option<f64>,
    pub g_truncated_count: usize,
    pub seed: u64,
}

impl EstimateReport {
    pub fn record(&self) -> ReportRecord {
        let has_eic = self.eic_values.len() >= 2;
        ReportRecord {
            estimand: self.estimand.name(),
            method: self.method.name(),
            psi: self.psi,
            se: self.se,
            ci_lower: self.ci.map(|c| c.0),
            ci_upper: self.ci.map(|c| c.1),
            level: self.level,
            n: self.n,
            variance_mode: self.variance_mode,
            eic_mean: has_eic.then(|| stats::mean(&self.eic_values)),
            eic_var: has_eic.then(|| stats::sample_variance(&self.eic_values)),
            g_min: self.diagnostics.g_min,
            g_max: self.diagnostics.g_max,
            g_truncated_count: self.diagnostics.g_truncated_count,
            seed: self.seed,
        }
    }

    /// Whether the interval contains `value`; `None` without an interval.
    pub fn covers(&self, value: f64) -> Option<bool> {
        self.ci.map(|(lo, hi)| lo <= value && value <= hi)
    }
}

fn nuisance_diagnostics(models: &NuisanceModels, nf: &NuisanceFits, ds: &Dataset) -> Diagnostics {
    Diagnostics {
        g_min: Some(nf.g_raw_range.0),
        g_max: Some(nf.g_raw_range.1),
        g_truncated_count: nf.g_truncated,
        g_bounds: Some(nf.g_bounds),
        no_covariates: ds.p() == 0,
        outcome_learner: Some(SlSummary::from(&models.q)),
        propensity_learner: models.g_fit().map(SlSummary::from),
        ..Diagnostics::default()
    }
}

/// Full TMLE: fit nuisances, target, plug in, and attach EIC inference.
pub fn estimate(ds: &Dataset, kind: &EstimandKind, config: &TmleConfig) -> Result<EstimateReport> {
    config.check()?;
    kind.check(ds.n())?;
    if ds.n() < 2 {
        return Err(Error::TooFewObservations {
            needed: 2,
            found: ds.n(),
        });
    }
    if *kind == EstimandKind::MeanOutcome {
        return mean_outcome(ds, config);
    }
    let (models, nf) = fit_nuisance(ds, config)?;
    estimate_from_fits(ds, kind, config, &models, &nf)
}

// Sample mean with its influence-curve interval; nothing to target.
fn mean_outcome(ds: &Dataset, config: &TmleConfig) -> Result<EstimateReport> {
    let y = ds.outcome();
    let psi = stats::mean(y);
    let d: Vec<f64> = y.iter().map(|v| v - psi).collect();
    let inf = infer(psi, &d, config.level)?;
    Ok(EstimateReport {
        estimand: EstimandKind::MeanOutcome,
        method: Method::Tmle,
        psi,
        se: Some(inf.se),
        ci: Some(inf.ci),
        level: config.level,
        n: ds.n(),
        eic_values: d,
        variance_mode: VarianceMode::Plugin,
        diagnostics: Diagnostics {
            epsilon: Some(0.0),
            degenerate_ci: inf.se == 0.0,
            no_covariates: ds.p() == 0,
            ..Diagnostics::default()
        },
        seed: config.seed,
    })
}

/// TMLE from already-fitted nuisances, so the plug-in and the targeted
/// estimate can share one fit.
pub fn estimate_from_fits(
    ds: &Dataset,
    kind: &EstimandKind,
    config: &TmleConfig,
    models: &NuisanceModels,
    nf: &NuisanceFits,
) -> Result<EstimateReport> {
    config.check()?;
    kind.check(ds.n())?;
    if *kind == EstimandKind::MeanOutcome {
        return mean_outcome(ds, config);
    }
    let a = ds.treatment();
    let y = ds.outcome();
    let fl = config.fluctuation_for(ds.outcome_kind());
    let h = clever_covariate(kind, a, &nf.g1);
    let t = fluctuate(nf, &h, a, y, fl)?;
    let psi = point_estimate(kind, &t.qbar1_star, &t.qbar0_star, y);
    let d = eic(kind, &h, &t, y, psi);
    let inf = match config.variance_mode {
        VarianceMode::Plugin => infer(psi, &d, config.level)?,
        VarianceMode::Crossval => {
            let s2 = crossval_variance(ds, kind, config, &models.q.folds, fl)?;
            infer_from_variance(psi, s2, ds.n(), config.level)
        }
    };
    let mut diagnostics = nuisance_diagnostics(models, nf, ds);
    diagnostics.epsilon = Some(t.epsilon);
    diagnostics.fluctuation = Some(fl);
    diagnostics.targeting_converged = Some(t.converged);
    diagnostics.targeting_iterations = Some(t.iterations);
    diagnostics.degenerate_ci = inf.se == 0.0;
    Ok(EstimateReport {
        estimand: kind.clone(),
        method: Method::Tmle,
        psi,
        se: Some(inf.se),
        ci: Some(inf.ci),
        level: config.level,
        n: ds.n(),
        eic_values: d,
        variance_mode: config.variance_mode,
        diagnostics,
        seed: config.seed,
    })
}

/// Untargeted Super Learner substitution estimate. Carries no interval.
pub fn baseline_sl_plugin(ds: &Dataset, kind: &EstimandKind, config: &TmleConfig) -> Result<EstimateReport> {
    kind.check(ds.n())?;
    let (models, nf) = fit_nuisance(ds, config)?;
    sl_plugin_from_fits(ds, kind, config, &models, &nf)
}

pub fn sl_plugin_from_fits(
    ds: &Dataset,
    kind: &EstimandKind,
    config: &TmleConfig,
    models: &NuisanceModels,
    nf: &NuisanceFits,
) -> Result<EstimateReport> {
    kind.check(ds.n())?;
    let psi = point_estimate(kind, &nf.qbar1, &nf.qbar0, ds.outcome());
    Ok(EstimateReport {
        estimand: kind.clone(),
        method: Method::SlPlugin,
        psi,
        se: None,
        ci: None,
        level: config.level,
        n: ds.n(),
        eic_values: Vec::new(),
        variance_mode: config.variance_mode,
        diagnostics: nuisance_diagnostics(models, nf, ds),
        seed: config.seed,
    })
}

/// Coefficient on `A` from least squares of `Y` on `[1, A, W]`, with the
/// classical homoskedastic standard error.
pub fn baseline_glm_ate(ds: &Dataset, level: f64) -> Result<EstimateReport> {
    if ds.outcome_kind() != OutcomeKind::Continuous {
        return Err(Error::InvalidConfig(
            "the linear-model baseline needs a continuous outcome".into(),
        ));
    }
    let (n, p) = (ds.n(), ds.p());
    let mut x = nalgebra::DMatrix::zeros(n, p + 2);
    for i in 0..n {
        x[(i, 0)] = 1.0;
        x[(i, 1)] = f64::from(ds.treatment()[i]);
        for j in 0..p {
            x[(i, j + 2)] = ds.covariates()[(i, j)];
        }
    }
    let rank = numerical_rank(&x);
    if n <= rank {
        return Err(Error::TooFewObservations {
            needed: rank + 1,
            found: n,
        });
    }
    let y = ds.outcome();
    let beta = weighted_lstsq(&x, y, None);
    let fitted = &x * nalgebra::DVector::from_column_slice(&beta);
    let rss: f64 = y.iter().zip(fitted.iter()).map(|(y, f)| (y - f).powi(2)).sum();
    let s2 = rss / (n - rank) as f64;
    let xtx_inv = pinv(&x.tr_mul(&x));
    let se = (s2 * xtx_inv[(1, 1)]).max(0.0).sqrt();
    let psi = beta[1];
    let z = stats::z_quantile(level);
    Ok(EstimateReport {
        estimand: EstimandKind::Ate,
        method: Method::Glm,
        psi,
        se: Some(se),
        ci: Some((psi - z * se, psi + z * se)),
        level,
        n,
        eic_values: Vec::new(),
        variance_mode: VarianceMode::Plugin,
        diagnostics: Diagnostics {
            degenerate_ci: se == 0.0,
            no_covariates: p == 0,
            ..Diagnostics::default()
        },
        seed: 0,
    })
}
