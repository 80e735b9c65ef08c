//! Conditional treatment effects, optimal and realistic rules, positivity
//! diagnostics, and the cross-fitted effect of an estimated rule.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::learners::Inputs;
use crate::rng::derive_seed;
use crate::stats;
use crate::super_learner::{make_folds, sl_predict, CvFolds, SlMode, SuperLearnerFit};
use crate::tmle::{
    self, fit_outcome_sl, fit_propensity_sl, infer_from_variance, Diagnostics, EstimandKind, EstimateReport,
    PropensityModel, TmleConfig,
};

pub const POSITIVITY_GRID: [f64; 4] = [0.01, 0.025, 0.05, 0.10];
pub const MIN_RULE_N: usize = 20;

const CATE_SEED_TAG: u64 = 11;
const SPLIT_SEED_TAG: u64 = 12;
const RULE_G_SEED_TAG: u64 = 13;

/// `Q(1, W) - Q(0, W)` from an outcome Super Learner.
#[derive(Debug, Clone, PartialEq)]
pub struct CateFit {
    pub cate: Vec<f64>,
    pub fit: SuperLearnerFit,
    pub sl_mode: SlMode,
}

impl CateFit {
    pub fn predict(&self, w: &DMatrix<f64>) -> Result<Vec<f64>> {
        let n = w.nrows();
        let q1 = sl_predict(&self.fit, Inputs::new(w, Some(&vec![1.0; n])), self.sl_mode)?;
        let q0 = sl_predict(&self.fit, Inputs::new(w, Some(&vec![0.0; n])), self.sl_mode)?;
        Ok(q1.iter().zip(&q0).map(|(a, b)| a - b).collect())
    }
}

/// Fits the outcome Super Learner from `config` and differences its
/// counterfactual predictions.
pub fn fit_cate(ds: &Dataset, config: &TmleConfig) -> Result<CateFit> {
    if !ds.both_arms_present() {
        return Err(Error::SingleArmData);
    }
    let fit = fit_outcome_sl(
        ds,
        &config.q_roster,
        config.folds,
        derive_seed(config.seed, CATE_SEED_TAG),
    )?;
    let mut cf = CateFit {
        cate: Vec::new(),
        fit,
        sl_mode: config.sl_mode,
    };
    cf.cate = cf.predict(ds.covariates())?;
    Ok(cf)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    #[default]
    Maximize,
    Minimize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecisionRule {
    pub assignments: Vec<u8>,
    pub objective: Objective,
    /// Threshold form of the rule when there is a single covariate.
    pub description: Option<String>,
    /// `Some(delta)` once the realistic constraint has been applied.
    pub realistic_delta: Option<f64>,
}

impl DecisionRule {
    pub fn treated_share(&self) -> f64 {
        self.assignments.iter().filter(|&&d| d == 1).count() as f64 / self.assignments.len().max(1) as f64
    }
}

/// `d = 1{cate >= 0}` when maximising, `1{cate <= 0}` when minimising. Exact
/// zeros are treated.
pub fn rule_from_cate(cate: &[f64], objective: Objective) -> Vec<u8> {
    cate.iter()
        .map(|&c| {
            u8::from(match objective {
                Objective::Maximize => c >= 0.0,
                Objective::Minimize => c <= 0.0,
            })
        })
        .collect()
}

pub fn derive_optimal_rule(cf: &CateFit, objective: Objective) -> DecisionRule {
    DecisionRule {
        assignments: rule_from_cate(&cf.cate, objective),
        objective,
        description: None,
        realistic_delta: None,
    }
}

/// Threshold description of a rule on one covariate, if it is monotone in it.
pub fn describe_threshold(w: &[f64], d: &[u8], name: &str) -> Option<String> {
    let mut order: Vec<usize> = (0..w.len()).collect();
    order.sort_by(|&i, &j| w[i].total_cmp(&w[j]));
    let sorted: Vec<u8> = order.iter().map(|&i| d[i]).collect();
    let changes = sorted.windows(2).filter(|p| p[0] != p[1]).count();
    match changes {
        0 => Some(
            if sorted.first() == Some(&1) {
                "treat all"
            } else {
                "treat none"
            }
            .to_string(),
        ),
        1 => {
            let k = sorted.windows(2).position(|p| p[0] != p[1])? + 1;
            let cut = 0.5 * (w[order[k - 1]] + w[order[k]]);
            if sorted[k] == 1 {
                Some(format!("treat if {name} >= {cut:.4}"))
            } else {
                Some(format!("treat if {name} < {cut:.4}"))
            }
        }
        _ => None,
    }
}

/// Where the assigned arm has probability below `delta`, switch to the more
/// likely arm.
pub fn apply_realistic_constraint(rule: &DecisionRule, g1: &[f64], delta: f64) -> DecisionRule {
    let assignments = rule
        .assignments
        .iter()
        .zip(g1)
        .map(|(&d, &g)| {
            let p_assigned = if d == 1 { g } else { 1.0 - g };
            if p_assigned < delta {
                u8::from(g >= 0.5)
            } else {
                d
            }
        })
        .collect();
    DecisionRule {
        assignments,
        objective: rule.objective,
        description: None,
        realistic_delta: Some(delta),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdShare {
    pub delta: f64,
    pub share_below: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PositivityReport {
    pub g_min: f64,
    pub g_max: f64,
    /// Fraction of units with `min(g, 1 - g) < delta`, by increasing `delta`.
    pub share_below: Vec<ThresholdShare>,
    pub delta: f64,
    pub flagged_units: Vec<usize>,
}

impl PositivityReport {
    pub fn share_at(&self, delta: f64) -> Option<f64> {
        self.share_below
            .iter()
            .find(|s| s.delta == delta)
            .map(|s| s.share_below)
    }
}

/// Shares of near-deterministic propensities on the standard grid plus
/// `delta`, and the units flagged at `delta`.
pub fn positivity_report(g1: &[f64], delta: f64) -> PositivityReport {
    let n = g1.len().max(1) as f64;
    let margin: Vec<f64> = g1.iter().map(|&g| g.min(1.0 - g)).collect();
    let mut grid = POSITIVITY_GRID.to_vec();
    if !grid.contains(&delta) {
        grid.push(delta);
        grid.sort_by(f64::total_cmp);
    }
    let share_below = grid
        .into_iter()
        .map(|t| ThresholdShare {
            delta: t,
            share_below: margin.iter().filter(|&&m| m < t).count() as f64 / n,
        })
        .collect();
    PositivityReport {
        g_min: g1.iter().copied().fold(f64::INFINITY, f64::min),
        g_max: g1.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        share_below,
        delta,
        flagged_units: (0..g1.len()).filter(|&i| margin[i] < delta).collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RuleEffectConfig {
    pub tmle: TmleConfig,
    pub objective: Objective,
    /// Apply the realistic constraint at this level, using a propensity fit
    /// from the training half.
    pub realistic_delta: Option<f64>,
}

impl RuleEffectConfig {
    pub fn new(tmle: TmleConfig) -> Self {
        RuleEffectConfig {
            tmle,
            objective: Objective::Maximize,
            realistic_delta: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RuleEffectReport {
    /// Pooled `EY_d - EY` over both halves, rule and EIC in original row order.
    pub estimate: EstimateReport,
    /// Rule learned on the other half, for the rows of each evaluation half.
    pub fold_rules: Vec<DecisionRule>,
    pub fold_estimates: Vec<f64>,
    pub fold_sizes: Vec<usize>,
    pub folds: CvFolds,
}

/// Two-fold cross-fitted TMLE of `EY_d - EY` for the rule `d` estimated from
/// the data. Folds are stratified on treatment.
pub fn estimate_rule_effect(ds: &Dataset, config: &RuleEffectConfig) -> Result<RuleEffectReport> {
    if ds.n() < MIN_RULE_N {
        return Err(Error::TooFewObservations {
            needed: MIN_RULE_N,
            found: ds.n(),
        });
    }
    let strata: Vec<u32> = ds.treatment().iter().map(|&a| u32::from(a)).collect();
    let folds = make_folds(ds.n(), 2, derive_seed(config.tmle.seed, SPLIT_SEED_TAG), Some(&strata))?;
    cross_fit_rule(ds, config, folds)
}

/// [`estimate_rule_effect`] on given two-fold assignments.
pub fn cross_fit_rule(ds: &Dataset, config: &RuleEffectConfig, folds: CvFolds) -> Result<RuleEffectReport> {
    if folds.v != 2 || folds.n() != ds.n() {
        return Err(Error::BadFoldCount { v: folds.v, n: ds.n() });
    }
    let halves: Vec<(DecisionRule, EstimateReport, Vec<usize>)> = (0..2)
        .into_par_iter()
        .map(|k| {
            let eval = folds.validation(k);
            let train = folds.training(k);
            let ds_t = ds.subset(&train);
            let ds_e = ds.subset(&eval);
            let cf = fit_cate(&ds_t, &config.tmle)?;
            let mut rule = DecisionRule {
                assignments: rule_from_cate(&cf.predict(ds_e.covariates())?, config.objective),
                objective: config.objective,
                description: None,
                realistic_delta: None,
            };
            if let Some(delta) = config.realistic_delta {
                let roster = match &config.tmle.g_model {
                    PropensityModel::Fit(r) => r.clone(),
                    PropensityModel::Known(_) => vec![crate::learners::LearnerSpec::Mean],
                };
                let gfit = fit_propensity_sl(
                    &ds_t,
                    &roster,
                    config.tmle.folds,
                    derive_seed(config.tmle.seed, RULE_G_SEED_TAG),
                )?;
                let g1 = sl_predict(&gfit, Inputs::new(ds_e.covariates(), None), config.tmle.sl_mode)?;
                rule = apply_realistic_constraint(&rule, &g1, delta);
            }
            if ds.p() == 1 {
                rule.description = describe_threshold(
                    ds_e.covariates().column(0).as_slice(),
                    &rule.assignments,
                    &ds.schema().covariate_names[0],
                );
            }
            let report = tmle::estimate(
                &ds_e,
                &EstimandKind::RuleContrast(rule.assignments.clone()),
                &config.tmle,
            )?;
            Ok((rule, report, eval))
        })
        .collect::<Result<_>>()?;

    let n = ds.n();
    let mut assignments = vec![0u8; n];
    let mut eic = vec![0.0; n];
    let mut weighted = 0.0;
    let mut diagnostics = Diagnostics {
        g_min: Some(f64::INFINITY),
        g_max: Some(f64::NEG_INFINITY),
        no_covariates: ds.p() == 0,
        ..Diagnostics::default()
    };
    for (rule, report, eval) in &halves {
        for (j, &i) in eval.iter().enumerate() {
            assignments[i] = rule.assignments[j];
            eic[i] = report.eic_values[j];
        }
        weighted += eval.len() as f64 * report.psi;
        let d = &report.diagnostics;
        diagnostics.g_min = Some(diagnostics.g_min.unwrap().min(d.g_min.unwrap_or(f64::INFINITY)));
        diagnostics.g_max = Some(diagnostics.g_max.unwrap().max(d.g_max.unwrap_or(f64::NEG_INFINITY)));
        diagnostics.g_truncated_count += d.g_truncated_count;
        diagnostics.g_bounds = d.g_bounds;
        diagnostics.fluctuation = d.fluctuation;
        diagnostics.targeting_converged =
            Some(diagnostics.targeting_converged.unwrap_or(true) && d.targeting_converged.unwrap_or(true));
    }
    let psi = weighted / n as f64;
    let inf = infer_from_variance(psi, stats::sample_variance(&eic), n, config.tmle.level);
    diagnostics.degenerate_ci = inf.se == 0.0;

    let estimate = EstimateReport {
        estimand: EstimandKind::RuleContrast(assignments),
        method: tmle::Method::Tmle,
        psi,
        se: Some(inf.se),
        ci: Some(inf.ci),
        level: config.tmle.level,
        n,
        eic_values: eic,
        variance_mode: tmle::VarianceMode::Plugin,
        diagnostics,
        seed: config.tmle.seed,
    };
    let fold_sizes = halves.iter().map(|h| h.2.len()).collect();
    let fold_estimates = halves.iter().map(|h| h.1.psi).collect();
    Ok(RuleEffectReport {
        estimate,
        fold_rules: halves.into_iter().map(|h| h.0).collect(),
        fold_estimates,
        fold_sizes,
        folds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::LearnerSpec;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn config(roster: Vec<LearnerSpec>, seed: u64) -> TmleConfig {
        TmleConfig::new(
            roster,
            PropensityModel::Fit(vec![LearnerSpec::Mean, LearnerSpec::logistic(crate::Basis::Linear)]),
            seed,
        )
    }

    fn sample(n: usize, seed: u64, noise: f64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..10.0)).collect();
        let a: Vec<u8> = w
            .iter()
            .map(|&x| u8::from(rng.random::<f64>() < crate::learners::expit(-1.0 + 0.2 * x)))
            .collect();
        let y = (0..n)
            .map(|i| 1.0 + 0.3 * w[i] + f64::from(a[i]) * (w[i] - 5.0) + noise * rng.random_range(-1.0..1.0))
            .collect();
        Dataset::from_columns(DMatrix::from_vec(n, 1, w), a, y).unwrap()
    }

    #[test]
    fn mean_roster_has_zero_cate() {
        let ds = sample(40, 1, 1.0);
        let cf = fit_cate(&ds, &config(vec![LearnerSpec::Mean], 1)).unwrap();
        assert!(cf.cate.iter().all(|&c| c == 0.0));
        assert!(derive_optimal_rule(&cf, Objective::Maximize)
            .assignments
            .iter()
            .all(|&d| d == 1));
    }

    #[test]
    fn interaction_model_recovers_linear_cate() {
        let ds = sample(60, 2, 0.0);
        let cf = fit_cate(&ds, &config(vec![LearnerSpec::ols_interact()], 2)).unwrap();
        for i in 0..60 {
            assert!((cf.cate[i] - (ds.covariates()[(i, 0)] - 5.0)).abs() < 1e-6);
        }
    }

    #[test]
    fn rule_examples() {
        assert_eq!(rule_from_cate(&[-1.0, 2.0], Objective::Maximize), vec![0, 1]);
        assert_eq!(rule_from_cate(&[0.0, 0.0], Objective::Maximize), vec![1, 1]);
        assert_eq!(rule_from_cate(&[0.0, -1.0], Objective::Minimize), vec![1, 1]);
        let w: Vec<f64> = (0..11).map(f64::from).collect();
        let cate: Vec<f64> = w.iter().map(|x| 0.3 * (x - 5.0)).collect();
        let d = rule_from_cate(&cate, Objective::Maximize);
        assert_eq!(d, w.iter().map(|&x| u8::from(x >= 5.0)).collect::<Vec<_>>());
        assert_eq!(describe_threshold(&w, &d, "w").unwrap(), "treat if w >= 4.5000");
    }

    #[test]
    fn realistic_constraint_examples() {
        let rule = DecisionRule {
            assignments: vec![1, 0, 1],
            objective: Objective::Maximize,
            description: None,
            realistic_delta: None,
        };
        let same = apply_realistic_constraint(&rule, &[0.3, 0.7, 0.5], 0.05);
        assert_eq!(same.assignments, rule.assignments);
        let moved = apply_realistic_constraint(&rule, &[0.02, 0.5, 0.5], 0.05);
        assert_eq!(moved.assignments, vec![0, 0, 1]);
        let id = apply_realistic_constraint(&rule, &[0.0001, 0.9999, 0.5], 0.0);
        assert_eq!(id.assignments, rule.assignments);
    }

    #[test]
    fn positivity_examples() {
        let r = positivity_report(&[0.5; 10], 0.01);
        assert!(r.share_below.iter().all(|s| s.share_below == 0.0));
        let r = positivity_report(&[0.005, 0.5], 0.01);
        assert_eq!(r.share_at(0.01), Some(0.5));
        assert_eq!(r.flagged_units, vec![0]);
        let r = positivity_report(&[0.005, 0.995], 0.0);
        assert_eq!(r.share_at(0.0), Some(0.0));
        assert_eq!(r.share_below.len(), 5);
    }

    #[test]
    fn rule_effect_needs_twenty_rows() {
        let ds = sample(19, 3, 1.0);
        let cfg = RuleEffectConfig::new(config(vec![LearnerSpec::Mean], 3));
        assert!(matches!(
            estimate_rule_effect(&ds, &cfg),
            Err(Error::TooFewObservations { needed: 20, found: 19 })
        ));
    }

    #[test]
    fn swapping_fold_labels_keeps_estimate() {
        let ds = sample(80, 4, 1.0);
        let cfg = RuleEffectConfig::new(config(vec![LearnerSpec::Mean, LearnerSpec::ols_interact()], 4));
        let r = estimate_rule_effect(&ds, &cfg).unwrap();
        let mut swapped = r.folds.clone();
        for f in &mut swapped.assignments {
            *f = 1 - *f;
        }
        let s = cross_fit_rule(&ds, &cfg, swapped).unwrap();
        assert_eq!(r.estimate.psi, s.estimate.psi);
        assert_eq!(r.estimate.estimand, s.estimate.estimand);
        assert!((r.estimate.se.unwrap() - s.estimate.se.unwrap()).abs() < 1e-12);
        assert_eq!(r.fold_sizes.iter().sum::<usize>(), 80);
    }

    #[test]
    fn evaluation_outcomes_never_move_the_rule() {
        let ds = sample(60, 5, 1.0);
        let cfg = RuleEffectConfig::new(config(vec![LearnerSpec::ols_interact()], 5));
        let r = estimate_rule_effect(&ds, &cfg).unwrap();
        // permute outcomes inside half 0; half 0's rule comes from half 1 only
        let eval = r.folds.validation(0);
        let mut y = ds.outcome().to_vec();
        let vals: Vec<f64> = eval.iter().map(|&i| y[i]).collect();
        for (k, &i) in eval.iter().enumerate() {
            y[i] = vals[(k + 1) % vals.len()];
        }
        let permuted = ds.with_outcome(y, ds.outcome_kind()).unwrap();
        let p = cross_fit_rule(&permuted, &cfg, r.folds.clone()).unwrap();
        assert_eq!(p.fold_rules[0].assignments, r.fold_rules[0].assignments);
        assert_ne!(p.estimate.psi, r.estimate.psi);
    }

    #[test]
    fn realistic_rule_effect_runs() {
        let ds = sample(60, 6, 1.0);
        let mut cfg = RuleEffectConfig::new(config(vec![LearnerSpec::ols_interact()], 6));
        cfg.realistic_delta = Some(0.05);
        let r = estimate_rule_effect(&ds, &cfg).unwrap();
        assert!(r.fold_rules.iter().all(|d| d.realistic_delta == Some(0.05)));
        assert!(r.estimate.se.unwrap() > 0.0);
    }

    proptest! {
        #[test]
        fn rule_is_scale_invariant(cate in prop::collection::vec(-5.0f64..5.0, 1..40), c in 0.01f64..100.0) {
            let scaled: Vec<f64> = cate.iter().map(|x| c * x).collect();
            prop_assert_eq!(rule_from_cate(&cate, Objective::Maximize), rule_from_cate(&scaled, Objective::Maximize));
            let neg: Vec<f64> = cate.iter().map(|x| -x).collect();
            prop_assert_eq!(rule_from_cate(&cate, Objective::Minimize), rule_from_cate(&neg, Objective::Maximize));
        }

        #[test]
        fn positivity_shares_nondecreasing(g in prop::collection::vec(0.0f64..1.0, 1..50), delta in 0.0f64..0.5) {
            let r = positivity_report(&g, delta);
            for pair in r.share_below.windows(2) {
                prop_assert!(pair[0].share_below <= pair[1].share_below);
            }
        }

        #[test]
        fn realistic_constraint_never_lowers_support(
            g in prop::collection::vec(0.001f64..0.999, 1..40),
            bits in prop::collection::vec(0u8..2, 40),
            delta in 0.0f64..0.3,
        ) {
            let rule = DecisionRule {
                assignments: bits[..g.len()].to_vec(),
                objective: Objective::Maximize,
                description: None,
                realistic_delta: None,
            };
            let support = |d: &[u8]| d.iter().zip(&g).map(|(&d, &p)| if d == 1 { p } else { 1.0 - p }).fold(1.0, f64::min);
            let after = apply_realistic_constraint(&rule, &g, delta);
            prop_assert!(support(&after.assignments) >= support(&rule.assignments));
        }
    }
}
