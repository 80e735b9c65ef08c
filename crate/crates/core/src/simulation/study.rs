use std::fmt::Write as _;

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{best_truth, Scenario, Target};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::{substream, SCHEME};
use crate::rules::{estimate_rule_effect, RuleEffectConfig};
use crate::tmle::{
    self, baseline_glm_ate, estimate_from_fits, fit_nuisance, sl_plugin_from_fits, EstimandKind, PropensityModel,
    TmleConfig, VarianceMode,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorId {
    /// Linear-model coefficient on treatment.
    Glm,
    /// Untargeted Super Learner plug-in.
    Sl,
    Tmle,
    /// TMLE with cross-validated variance.
    TmleCv,
    /// Two-fold cross-fitted effect of the estimated optimal rule.
    Rule,
}

impl EstimatorId {
    pub fn name(self) -> &'static str {
        match self {
            EstimatorId::Glm => "glm",
            EstimatorId::Sl => "sl",
            EstimatorId::Tmle => "tmle",
            EstimatorId::TmleCv => "tmle_cv",
            EstimatorId::Rule => "rule",
        }
    }

    pub fn parse(s: &str) -> Result<EstimatorId> {
        Ok(match s.trim() {
            "glm" => EstimatorId::Glm,
            "sl" | "sl_plugin" => EstimatorId::Sl,
            "tmle" => EstimatorId::Tmle,
            "tmle_cv" => EstimatorId::TmleCv,
            "rule" => EstimatorId::Rule,
            other => return Err(Error::InvalidConfig(format!("unknown estimator {other:?}"))),
        })
    }

    /// Estimand this estimator targets in `scenario`.
    pub fn target(self, scenario: &Scenario) -> Target {
        match self {
            EstimatorId::Glm => Target::Ate,
            EstimatorId::Rule => Target::OptimalRuleContrast,
            _ => scenario.target,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub scenario: Scenario,
    pub estimators: Vec<EstimatorId>,
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    /// Template for the nuisance fits; its seed is replaced per repetition and
    /// the scenario's roster overrides are applied on top.
    pub tmle: TmleConfig,
}

impl StudyConfig {
    pub fn new(scenario: Scenario, estimators: Vec<EstimatorId>, n: usize, reps: usize, seed: u64) -> Self {
        let tmle = TmleConfig::defaults(scenario.dgp.outcome_kind, 0);
        StudyConfig {
            scenario,
            estimators,
            n,
            reps,
            seed,
            tmle,
        }
    }

    fn rep_config(&self, seed: u64) -> TmleConfig {
        let mut cfg = self.tmle.clone();
        cfg.seed = seed;
        if let Some(q) = &self.scenario.q_roster {
            cfg.q_roster = q.clone();
        }
        if let Some(g) = &self.scenario.g_roster {
            cfg.g_model = PropensityModel::Fit(g.clone());
        }
        cfg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McRow {
    pub rep: usize,
    pub estimator: EstimatorId,
    pub psi: Option<f64>,
    pub ci: Option<(f64, f64)>,
    pub covered: Option<bool>,
    /// Targeting converged; always true for closed-form estimators.
    pub converged: bool,
    pub error: Option<String>,
}

impl McRow {
    pub fn failed(&self) -> bool {
        self.error.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McResult {
    pub scenario: String,
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    pub seed_scheme: &'static str,
    /// True value per estimator, in the order estimators were requested.
    pub truths: Vec<(EstimatorId, f64)>,
    /// Rows ordered by repetition, then by requested estimator order.
    pub rows: Vec<McRow>,
}

impl McResult {
    pub fn truth(&self, id: EstimatorId) -> Option<f64> {
        self.truths.iter().find(|t| t.0 == id).map(|t| t.1)
    }

    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.failed()).count()
    }

    /// CSV with columns `rep, estimator, psi, ci_lo, ci_hi, covered, failed`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("rep,estimator,psi,ci_lo,ci_hi,covered,failed\n");
        let num = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
        for r in &self.rows {
            let covered = r.covered.map(|c| u8::from(c).to_string()).unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.rep,
                r.estimator.name(),
                num(r.psi),
                num(r.ci.map(|c| c.0)),
                num(r.ci.map(|c| c.1)),
                covered,
                u8::from(r.failed())
            )
            .expect("writing to a string");
        }
        out
    }
}

fn row_from(rep: usize, id: EstimatorId, psi0: f64, res: Result<tmle::EstimateReport>) -> McRow {
    match res {
        Ok(r) => McRow {
            rep,
            estimator: id,
            psi: Some(r.psi),
            ci: r.ci,
            covered: r.covers(psi0),
            converged: r.diagnostics.targeting_converged.unwrap_or(true),
            error: None,
        },
        Err(e) => McRow {
            rep,
            estimator: id,
            psi: None,
            ci: None,
            covered: None,
            converged: false,
            error: Some(e.to_string()),
        },
    }
}

fn estimand_for(target: Target, ds: &Dataset, scenario: &Scenario) -> EstimandKind {
    match target {
        Target::Ate => EstimandKind::Ate,
        Target::Par => EstimandKind::Par,
        Target::MeanOutcome => EstimandKind::MeanOutcome,
        Target::OptimalRuleContrast => EstimandKind::RuleContrast(
            (0..ds.n())
                .map(|i| u8::from(scenario.dgp.tau0.eval(ds.covariates()[(i, 0)]) >= 0.0))
                .collect(),
        ),
    }
}

/// Runs every estimator on one dataset.
fn run_rep(cfg: &StudyConfig, truths: &[(EstimatorId, f64)], rep: usize) -> Vec<McRow> {
    let mut rng = substream(cfg.seed, rep as u64);
    let ds = cfg.scenario.dgp.sample_with(cfg.n, &mut rng);
    let tcfg = cfg.rep_config(rng.next_u64());
    let kind = estimand_for(cfg.scenario.target, &ds, &cfg.scenario);

    let needs_fit = cfg
        .estimators
        .iter()
        .any(|e| matches!(e, EstimatorId::Sl | EstimatorId::Tmle | EstimatorId::TmleCv));
    let shared = needs_fit.then(|| fit_nuisance(&ds, &tcfg));

    truths
        .iter()
        .map(|&(id, psi0)| {
            let res = match id {
                EstimatorId::Glm => baseline_glm_ate(&ds, tcfg.level),
                EstimatorId::Rule => {
                    estimate_rule_effect(&ds, &RuleEffectConfig::new(tcfg.clone())).map(|r| r.estimate)
                }
                EstimatorId::Sl | EstimatorId::Tmle | EstimatorId::TmleCv => match shared.as_ref() {
                    Some(Ok((models, nf))) => match id {
                        EstimatorId::Sl => sl_plugin_from_fits(&ds, &kind, &tcfg, models, nf),
                        EstimatorId::Tmle => estimate_from_fits(&ds, &kind, &tcfg, models, nf),
                        _ => {
                            let mut c = tcfg.clone();
                            c.variance_mode = VarianceMode::Crossval;
                            estimate_from_fits(&ds, &kind, &c, models, nf)
                        }
                    },
                    Some(Err(e)) => Err(e.clone()),
                    None => unreachable!("nuisances are fitted whenever a fit-based estimator is requested"),
                },
            };
            row_from(rep, id, psi0, res)
        })
        .collect()
}

/// Monte Carlo study. Repetition `r` samples from stream `r` of the master
/// seed and draws the estimators' seed from the same stream after sampling,
/// so rows do not depend on scheduling or thread count. Failures are
/// recorded per row.
pub fn run_study(cfg: &StudyConfig) -> Result<McResult> {
    if cfg.reps == 0 {
        return Err(Error::InvalidConfig("reps must be at least 1".into()));
    }
    if cfg.n == 0 {
        return Err(Error::EmptyData);
    }
    if cfg.estimators.is_empty() {
        return Err(Error::InvalidConfig("no estimators requested".into()));
    }
    let mut ids = Vec::new();
    for &e in &cfg.estimators {
        if !ids.contains(&e) {
            ids.push(e);
        }
    }
    let truths: Vec<(EstimatorId, f64)> = ids
        .iter()
        .map(|&id| (id, best_truth(&cfg.scenario.dgp, id.target(&cfg.scenario)).psi0))
        .collect();
    let rows: Vec<Vec<McRow>> = (0..cfg.reps)
        .into_par_iter()
        .map(|r| run_rep(cfg, &truths, r))
        .collect();
    Ok(McResult {
        scenario: cfg.scenario.name.clone(),
        n: cfg.n,
        reps: cfg.reps,
        seed: cfg.seed,
        seed_scheme: SCHEME,
        truths,
        rows: rows.concat(),
    })
}
