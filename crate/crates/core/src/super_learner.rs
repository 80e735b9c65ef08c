//! Cross-validated discrete and ensemble Super Learner.
//!
//! Each candidate is fit `V` times, once per training split, and predicts the
//! held-out fold; the stacked out-of-fold predictions form the level-one
//! matrix `Z`. The discrete learner is the candidate with smallest CV risk;
//! the ensemble weights minimise the level-one risk of `Z w` over the
//! probability simplex. Deployed predictions come from full-data refits.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::{fit_learner, FittedLearner, Inputs, LearnerSpec, OwnedInputs};

pub const PROB_CLAMP: f64 = 1e-12;
pub const DEFAULT_FOLDS: usize = 10;

const META_MAX_ITER: usize = 10_000;
const META_TOL: f64 = 1e-12;
const META_STEP: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    SquaredError,
    BinomialLoglik,
}

impl Loss {
    pub fn name(self) -> &'static str {
        match self {
            Loss::SquaredError => "squared_error",
            Loss::BinomialLoglik => "binomial_loglik",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlMode {
    Discrete,
    #[default]
    Ensemble,
}

/// Fold labels are `0..v`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CvFolds {
    pub v: usize,
    pub assignments: Vec<usize>,
    pub seed: u64,
    pub strata: Option<Vec<u32>>,
}

impl CvFolds {
    pub fn n(&self) -> usize {
        self.assignments.len()
    }

    pub fn validation(&self, fold: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.assignments[i] == fold).collect()
    }

    pub fn training(&self, fold: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.assignments[i] != fold).collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.v];
        for &f in &self.assignments {
            s[f] += 1;
        }
        s
    }
}

/// `V = 10`, or leave-one-out below ten observations.
pub fn default_fold_count(n: usize) -> usize {
    if n < DEFAULT_FOLDS {
        n
    } else {
        DEFAULT_FOLDS
    }
}

/// Seeded shuffle, then round-robin assignment stratum by stratum (strata in
/// ascending label order). The round-robin counter carries over between
/// strata, so fold sizes differ by at most one both overall and within every
/// stratum.
pub fn make_folds(n: usize, v: usize, seed: u64, strata: Option<&[u32]>) -> Result<CvFolds> {
    if v < 2 || v > n {
        return Err(Error::BadFoldCount { v, n });
    }
    if let Some(s) = strata {
        if s.len() != n {
            return Err(Error::ShapeMismatch {
                expected: format!("{n} strata labels"),
                found: s.len().to_string(),
            });
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let mut labels: Vec<u32> = strata.map_or_else(|| vec![0], |s| s.to_vec());
    labels.sort_unstable();
    labels.dedup();

    let mut assignments = vec![0; n];
    let mut counter = 0;
    for label in labels {
        for &i in &order {
            if strata.map_or(0, |s| s[i]) == label {
                assignments[i] = counter % v;
                counter += 1;
            }
        }
    }
    Ok(CvFolds {
        v,
        assignments,
        seed,
        strata: strata.map(<[u32]>::to_vec),
    })
}

/// Out-of-fold predictions, `n x K`, stored column by column.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelOneMatrix {
    pub columns: Vec<Vec<f64>>,
    pub candidate_ids: Vec<String>,
}

impl LevelOneMatrix {
    pub fn n(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn k(&self) -> usize {
        self.columns.len()
    }

    pub fn combine(&self, weights: &[f64]) -> Vec<f64> {
        combine(&self.columns, weights)
    }
}

fn combine(columns: &[Vec<f64>], weights: &[f64]) -> Vec<f64> {
    let n = columns.first().map_or(0, Vec::len);
    let mut out = vec![0.0; n];
    for (col, &w) in columns.iter().zip(weights) {
        if w != 0.0 {
            for (o, z) in out.iter_mut().zip(col) {
                *o += w * z;
            }
        }
    }
    out
}

fn fit_on(spec: &LearnerSpec, x: &OwnedInputs, y: &[f64]) -> Result<FittedLearner> {
    fit_learner(spec, x.view(), y, None, None)
}

/// Fits every candidate on every training split and predicts the matching
/// held-out fold. Fits run in parallel; assembly order is fixed by
/// `(candidate, fold)` so the result does not depend on scheduling.
pub fn compute_level_one(
    candidates: &[LearnerSpec],
    x: Inputs<'_>,
    y: &[f64],
    folds: &CvFolds,
) -> Result<LevelOneMatrix> {
    let n = x.n();
    if folds.n() != n || y.len() != n {
        return Err(Error::ShapeMismatch {
            expected: format!("{} rows", folds.n()),
            found: format!("{n} inputs, {} targets", y.len()),
        });
    }
    let splits: Vec<(Vec<usize>, Vec<usize>)> =
        (0..folds.v).map(|f| (folds.training(f), folds.validation(f))).collect();
    let tasks: Vec<(usize, usize)> = (0..candidates.len())
        .flat_map(|k| (0..folds.v).map(move |f| (k, f)))
        .collect();
    let blocks: Vec<Result<Vec<f64>>> = tasks
        .par_iter()
        .map(|&(k, f)| {
            let (train, valid) = &splits[f];
            let spec = &candidates[k];
            let xt = x.select(train);
            let yt: Vec<f64> = train.iter().map(|&i| y[i]).collect();
            let fitted = fit_on(spec, &xt, &yt).map_err(|e| e.in_candidate(&spec.name(), Some(f)))?;
            fitted
                .predict(x.select(valid).view())
                .map_err(|e| e.in_candidate(&spec.name(), Some(f)))
        })
        .collect();

    let mut columns = vec![vec![0.0; n]; candidates.len()];
    for (&(k, f), block) in tasks.iter().zip(blocks) {
        let block = block?;
        for (&i, v) in splits[f].1.iter().zip(block) {
            if !v.is_finite() {
                return Err(Error::NonFiniteInput.in_candidate(&candidates[k].name(), Some(f)));
            }
            columns[k][i] = v;
        }
    }
    Ok(LevelOneMatrix {
        columns,
        candidate_ids: candidates.iter().map(LearnerSpec::name).collect(),
    })
}

fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

fn check_targets(y: &[f64], loss: Loss) -> Result<()> {
    if loss == Loss::BinomialLoglik && y.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
        return Err(Error::LossTargetMismatch {
            loss: loss.name(),
            reason: "targets must lie in [0, 1]".into(),
        });
    }
    Ok(())
}

/// Mean loss of `pred` against `y`.
pub fn risk(pred: &[f64], y: &[f64], loss: Loss) -> f64 {
    let n = y.len() as f64;
    match loss {
        Loss::SquaredError => pred.iter().zip(y).map(|(z, t)| (t - z) * (t - z)).sum::<f64>() / n,
        Loss::BinomialLoglik => {
            pred.iter()
                .zip(y)
                .map(|(&z, &t)| {
                    let z = clamp_prob(z);
                    -(t * z.ln() + (1.0 - t) * (1.0 - z).ln())
                })
                .sum::<f64>()
                / n
        }
    }
}

/// Cross-validated risk of every level-one column.
pub fn cv_risk(z: &LevelOneMatrix, y: &[f64], loss: Loss) -> Result<Vec<f64>> {
    check_targets(y, loss)?;
    Ok(z.columns.iter().map(|c| risk(c, y, loss)).collect())
}

/// Index of the smallest risk; the lowest index wins ties. NaN never wins.
pub fn discrete_select(risks: &[f64]) -> usize {
    let mut best = 0;
    for (k, &r) in risks.iter().enumerate() {
        if r < risks[best] || (risks[best].is_nan() && !r.is_nan()) {
            best = k;
        }
    }
    best
}

fn risk_gradient(columns: &[Vec<f64>], pred: &[f64], y: &[f64], loss: Loss) -> Vec<f64> {
    let n = y.len() as f64;
    let resid: Vec<f64> = match loss {
        Loss::SquaredError => pred.iter().zip(y).map(|(p, t)| 2.0 * (p - t)).collect(),
        Loss::BinomialLoglik => pred
            .iter()
            .zip(y)
            .map(|(&p, &t)| {
                let p = clamp_prob(p);
                (p - t) / (p * (1.0 - p))
            })
            .collect(),
    };
    columns
        .iter()
        .map(|c| c.iter().zip(&resid).map(|(z, r)| z * r).sum::<f64>() / n)
        .collect()
}

/// Simplex weights minimising the level-one risk of `Z w`.
///
/// Exponentiated-gradient descent from uniform weights with step 0.5, halved
/// whenever a step fails to lower the risk; stops once the improvement falls
/// below `1e-12` or after 10 000 iterations. The best single column is also a
/// feasible point, so it is returned instead if it beats the iterate.
pub fn fit_meta_weights(z: &LevelOneMatrix, y: &[f64], loss: Loss) -> Result<Vec<f64>> {
    check_targets(y, loss)?;
    let k = z.k();
    if k == 0 {
        return Err(Error::EmptyRoster);
    }
    if k == 1 {
        return Ok(vec![1.0]);
    }
    let columns: Vec<Vec<f64>> = match loss {
        Loss::SquaredError => z.columns.clone(),
        Loss::BinomialLoglik => z
            .columns
            .iter()
            .map(|c| c.iter().map(|&v| clamp_prob(v)).collect())
            .collect(),
    };
    let mut w = vec![1.0 / k as f64; k];
    let mut current = risk(&combine(&columns, &w), y, loss);
    let mut step = META_STEP;
    for _ in 0..META_MAX_ITER {
        let pred = combine(&columns, &w);
        let grad = risk_gradient(&columns, &pred, y, loss);
        let gmin = grad.iter().copied().fold(f64::INFINITY, f64::min);
        let mut cand: Vec<f64> = w
            .iter()
            .zip(&grad)
            .map(|(wk, g)| wk * (-step * (g - gmin)).exp())
            .collect();
        let total: f64 = cand.iter().sum();
        cand.iter_mut().for_each(|c| *c /= total);
        let r = risk(&combine(&columns, &cand), y, loss);
        if r < current {
            let improvement = current - r;
            w = cand;
            current = r;
            if improvement < META_TOL {
                break;
            }
        } else {
            step *= 0.5;
            if step < 1e-30 {
                break;
            }
        }
    }
    let vertex_risks: Vec<f64> = columns.iter().map(|c| risk(c, y, loss)).collect();
    let best = discrete_select(&vertex_risks);
    if vertex_risks[best] < current {
        w = vec![0.0; k];
        w[best] = 1.0;
    }
    Ok(w)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuperLearnerConfig {
    /// `None` picks [`default_fold_count`].
    pub v: Option<usize>,
    pub seed: u64,
    pub loss: Loss,
    pub strata: Option<Vec<u32>>,
}

impl SuperLearnerConfig {
    pub fn new(loss: Loss, seed: u64) -> Self {
        SuperLearnerConfig {
            v: None,
            seed,
            loss,
            strata: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuperLearnerFit {
    pub candidates: Vec<LearnerSpec>,
    pub full_data_fits: Vec<FittedLearner>,
    pub level_one: LevelOneMatrix,
    pub cv_risks: Vec<f64>,
    pub discrete_winner: usize,
    pub weights: Vec<f64>,
    /// Level-one risk of the ensemble weights.
    pub ensemble_risk: f64,
    pub loss: Loss,
    pub folds: CvFolds,
}

pub fn fit_super_learner(
    candidates: &[LearnerSpec],
    x: Inputs<'_>,
    y: &[f64],
    config: &SuperLearnerConfig,
) -> Result<SuperLearnerFit> {
    if candidates.is_empty() {
        return Err(Error::EmptyRoster);
    }
    check_targets(y, config.loss)?;
    let n = x.n();
    let v = config.v.unwrap_or_else(|| default_fold_count(n));
    let folds = make_folds(n, v, config.seed, config.strata.as_deref())?;
    let level_one = compute_level_one(candidates, x, y, &folds)?;
    let cv_risks = cv_risk(&level_one, y, config.loss)?;
    let discrete_winner = discrete_select(&cv_risks);
    let weights = fit_meta_weights(&level_one, y, config.loss)?;
    let ensemble = level_one.combine(&weights);
    let ensemble_risk = risk(&ensemble, y, config.loss);
    let full_data_fits = candidates
        .par_iter()
        .map(|spec| fit_learner(spec, x, y, None, None).map_err(|e| e.in_candidate(&spec.name(), None)))
        .collect::<Result<Vec<_>>>()?;
    Ok(SuperLearnerFit {
        candidates: candidates.to_vec(),
        full_data_fits,
        level_one,
        cv_risks,
        discrete_winner,
        weights,
        ensemble_risk,
        loss: config.loss,
        folds,
    })
}

/// Discrete mode uses the winner's full-data fit; ensemble mode the
/// weighted sum of full-data fits (clamped to `[1e-12, 1 - 1e-12]` under the
/// binomial loss).
pub fn sl_predict(fit: &SuperLearnerFit, x: Inputs<'_>, mode: SlMode) -> Result<Vec<f64>> {
    match mode {
        SlMode::Discrete => fit.full_data_fits[fit.discrete_winner].predict(x),
        SlMode::Ensemble => {
            let mut out = vec![0.0; x.n()];
            for (f, &w) in fit.full_data_fits.iter().zip(&fit.weights) {
                if w == 0.0 {
                    continue;
                }
                let pred = f.predict(x)?;
                for (o, p) in out.iter_mut().zip(pred) {
                    *o += w * match fit.loss {
                        Loss::SquaredError => p,
                        Loss::BinomialLoglik => clamp_prob(p),
                    };
                }
            }
            if fit.loss == Loss::BinomialLoglik {
                out.iter_mut().for_each(|p| *p = clamp_prob(*p));
            }
            Ok(out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn l1(columns: Vec<Vec<f64>>) -> LevelOneMatrix {
        let ids = (0..columns.len()).map(|k| format!("c{k}")).collect();
        LevelOneMatrix {
            columns,
            candidate_ids: ids,
        }
    }

    #[test]
    fn fold_sizes() {
        let f = make_folds(10, 5, 3, None).unwrap();
        assert_eq!(f.sizes(), vec![2; 5]);
        let mut sizes = make_folds(7, 3, 3, None).unwrap().sizes();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![2, 2, 3]);
        assert!(matches!(make_folds(5, 1, 0, None), Err(Error::BadFoldCount { .. })));
        assert!(matches!(make_folds(3, 4, 0, None), Err(Error::BadFoldCount { .. })));
    }

    #[test]
    fn stratified_folds_balance_each_stratum() {
        let strata = [1, 1, 1, 1, 1, 1, 0, 0, 0, 0];
        let f = make_folds(10, 2, 11, Some(&strata)).unwrap();
        for fold in 0..2 {
            let treated = (0..10).filter(|&i| f.assignments[i] == fold && strata[i] == 1).count();
            let control = (0..10).filter(|&i| f.assignments[i] == fold && strata[i] == 0).count();
            assert_eq!((treated, control), (3, 2));
        }
    }

    #[test]
    fn loo_mean_level_one() {
        let y = [1.0, 4.0, 2.0, 7.0, 3.0];
        let w = DMatrix::from_column_slice(5, 1, &[0.0, 1.0, 2.0, 3.0, 4.0]);
        let folds = make_folds(5, 5, 1, None).unwrap();
        let z = compute_level_one(&[LearnerSpec::Mean], Inputs::new(&w, None), &y, &folds).unwrap();
        let total: f64 = y.iter().sum();
        for i in 0..5 {
            assert!((z.columns[0][i] - (total - y[i]) / 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn nearest_neighbour_level_one_uses_other_fold() {
        let wv = [0.1, 0.9, 2.3, 3.0, 4.4, 5.1, 6.7, 8.0];
        let y = [10.0, 11.0, 12.0, 13.0, 14.0, 15.0, 16.0, 17.0];
        let w = DMatrix::from_column_slice(8, 1, &wv);
        let folds = make_folds(8, 2, 5, None).unwrap();
        let z = compute_level_one(&[LearnerSpec::knn(1)], Inputs::new(&w, None), &y, &folds).unwrap();
        for i in 0..8 {
            // brute force over the opposite fold
            let j = (0..8)
                .filter(|&j| folds.assignments[j] != folds.assignments[i])
                .min_by(|&a, &b| (wv[a] - wv[i]).abs().total_cmp(&(wv[b] - wv[i]).abs()).then(a.cmp(&b)))
                .unwrap();
            assert_eq!(z.columns[0][i], y[j]);
        }
    }

    #[test]
    fn constant_targets_stay_constant() {
        let y = [2.5; 12];
        let w = DMatrix::from_fn(12, 1, |i, _| i as f64);
        let folds = make_folds(12, 3, 0, None).unwrap();
        let roster = [LearnerSpec::Mean, LearnerSpec::ols(), LearnerSpec::cart(2)];
        let z = compute_level_one(&roster, Inputs::new(&w, None), &y, &folds).unwrap();
        for c in &z.columns {
            assert!(c.iter().all(|v| (v - 2.5).abs() < 1e-12));
        }
    }

    #[test]
    fn risks() {
        let z = l1(vec![vec![1.0, 1.0], vec![0.0, 2.0]]);
        assert_eq!(cv_risk(&z, &[0.0, 2.0], Loss::SquaredError).unwrap(), vec![1.0, 0.0]);
        let z = l1(vec![vec![0.5, 0.5]]);
        let r = cv_risk(&z, &[1.0, 0.0], Loss::BinomialLoglik).unwrap();
        assert!((r[0] - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(matches!(
            cv_risk(&z, &[2.0, 0.0], Loss::BinomialLoglik),
            Err(Error::LossTargetMismatch { .. })
        ));
    }

    #[test]
    fn discrete_selection() {
        assert_eq!(discrete_select(&[0.5, 0.2, 0.9]), 1);
        assert_eq!(discrete_select(&[0.3, 0.3]), 0);
        assert_eq!(discrete_select(&[0.3]), 0);
        assert_eq!(discrete_select(&[f64::NAN, 0.3]), 1);
    }

    #[test]
    fn meta_weights_special_cases() {
        let y = vec![0.3, 1.2, -0.7, 2.0, 0.1];
        assert_eq!(
            fit_meta_weights(&l1(vec![y.clone()]), &y, Loss::SquaredError).unwrap(),
            vec![1.0]
        );

        let noisy: Vec<f64> = y.iter().map(|v| v + 0.5).collect();
        let w = fit_meta_weights(&l1(vec![noisy, y.clone(), vec![0.0; 5]]), &y, Loss::SquaredError).unwrap();
        assert!(w[1] >= 1.0 - 1e-6);

        let col = vec![0.0, 1.0, 0.0, 1.5, 0.5];
        let z = l1(vec![col.clone(), col.clone()]);
        let w = fit_meta_weights(&z, &y, Loss::SquaredError).unwrap();
        assert_eq!(w, vec![0.5, 0.5]);
        // the risk surface is flat along the simplex
        let base = risk(&col, &y, Loss::SquaredError);
        for t in 0..=10 {
            let t = t as f64 / 10.0;
            assert!((risk(&z.combine(&[t, 1.0 - t]), &y, Loss::SquaredError) - base).abs() < 1e-14);
        }
    }

    #[test]
    fn single_candidate_super_learner_is_that_fit() {
        let w = DMatrix::from_fn(30, 1, |i, _| i as f64 / 3.0);
        let y: Vec<f64> = (0..30).map(|i| (i as f64).sin()).collect();
        let x = Inputs::new(&w, None);
        let cfg = SuperLearnerConfig::new(Loss::SquaredError, 4);
        let sl = fit_super_learner(&[LearnerSpec::cart(2)], x, &y, &cfg).unwrap();
        let direct = fit_learner(&LearnerSpec::cart(2), x, &y, None, None)
            .unwrap()
            .predict(x)
            .unwrap();
        assert_eq!(sl.weights, vec![1.0]);
        assert_eq!(sl_predict(&sl, x, SlMode::Discrete).unwrap(), direct);
        assert_eq!(sl_predict(&sl, x, SlMode::Ensemble).unwrap(), direct);
    }

    #[test]
    fn linear_truth_prefers_ols() {
        let w = DMatrix::from_fn(200, 1, |i, _| (i as f64 * 0.37).rem_euclid(10.0));
        let y: Vec<f64> = w.iter().map(|v| 1.0 + 0.5 * v).collect();
        let cfg = SuperLearnerConfig::new(Loss::SquaredError, 9);
        let sl = fit_super_learner(
            &[LearnerSpec::Mean, LearnerSpec::ols()],
            Inputs::new(&w, None),
            &y,
            &cfg,
        )
        .unwrap();
        // direct CV risks: mean has positive risk, ols interpolates
        assert!(sl.cv_risks[1] < 1e-20 && sl.cv_risks[0] > 1.0);
        assert_eq!(sl.discrete_winner, 1);
    }

    #[test]
    fn ensemble_prediction_modes() {
        let w = DMatrix::from_column_slice(2, 1, &[0.0, 1.0]);
        let x = Inputs::new(&w, None);
        let mut sl = fit_super_learner(
            &[LearnerSpec::Mean, LearnerSpec::ols()],
            x,
            &[0.0, 2.0],
            &SuperLearnerConfig::new(Loss::SquaredError, 0),
        )
        .unwrap();
        sl.weights = vec![1.0, 0.0];
        assert_eq!(sl_predict(&sl, x, SlMode::Ensemble).unwrap(), vec![1.0, 1.0]);
        sl.weights = vec![0.5, 0.5];
        let p = sl_predict(&sl, x, SlMode::Ensemble).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-12 && (p[1] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn fold_hygiene() {
        // Z[i] must not move when y changes only inside fold(i).
        let w = DMatrix::from_fn(20, 1, |i, _| i as f64);
        let y: Vec<f64> = (0..20).map(|i| ((i * 7) % 5) as f64).collect();
        let folds = make_folds(20, 4, 2, None).unwrap();
        let roster = [LearnerSpec::ols(), LearnerSpec::knn(3), LearnerSpec::cart(2)];
        let base = compute_level_one(&roster, Inputs::new(&w, None), &y, &folds).unwrap();
        for f in 0..4 {
            let mut y2 = y.clone();
            for i in folds.validation(f) {
                y2[i] += 100.0;
            }
            let moved = compute_level_one(&roster, Inputs::new(&w, None), &y2, &folds).unwrap();
            for i in folds.validation(f) {
                for k in 0..3 {
                    assert_eq!(base.columns[k][i], moved.columns[k][i]);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn selection_is_monotone_invariant(risks in prop::collection::vec(0.0f64..10.0, 1..8)) {
            let transformed: Vec<f64> = risks.iter().map(|r| (r * 3.0 + 1.0).ln()).collect();
            prop_assert_eq!(discrete_select(&risks), discrete_select(&transformed));
        }

        #[test]
        fn meta_weights_dominate_vertices(
            y in prop::collection::vec(-3.0f64..3.0, 5..30),
            noise in prop::collection::vec(prop::collection::vec(-2.0f64..2.0, 30), 2..5),
        ) {
            let n = y.len();
            let cols: Vec<Vec<f64>> = noise.iter().map(|e| (0..n).map(|i| y[i] + e[i]).collect()).collect();
            let z = l1(cols);
            let w = fit_meta_weights(&z, &y, Loss::SquaredError).unwrap();
            prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(w.iter().all(|&v| v >= 0.0));
            let r = risk(&z.combine(&w), &y, Loss::SquaredError);
            let vmin = cv_risk(&z, &y, Loss::SquaredError).unwrap().into_iter().fold(f64::INFINITY, f64::min);
            prop_assert!(r <= vmin + 1e-8);
        }
    }
}
