//! Weighted logistic regression with an optional offset, fitted by
//! Newton-Raphson. The same solver runs the logistic targeting step.

use nalgebra::{DMatrix, DVector};

use super::ols::pinv;
use crate::error::{Error, Result};

pub const SCORE_TOL: f64 = 1e-10;
pub const MAX_ITER: usize = 100;
pub const COEF_BOUND: f64 = 40.0;
pub const PROB_FLOOR: f64 = 1e-12;
const STEP_TOL: f64 = 1e-6;

pub fn expit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// `expit` clamped to `[1e-12, 1 - 1e-12]`.
pub fn bounded_expit(x: f64) -> f64 {
    expit(x).clamp(PROB_FLOOR, 1.0 - PROB_FLOOR)
}

// log(1 + e^x) without overflow
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticSolution {
    pub coefficients: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Euclidean norm of the weight-normalised score at the returned coefficients.
    pub score_norm: f64,
}

struct Problem<'a> {
    x: &'a DMatrix<f64>,
    y: &'a [f64],
    w: Vec<f64>,
    offset: Vec<f64>,
    wsum: f64,
}

impl Problem<'_> {
    fn eta(&self, beta: &DVector<f64>) -> DVector<f64> {
        let mut eta = self.x * beta;
        for (e, o) in eta.iter_mut().zip(&self.offset) {
            *e += o;
        }
        eta
    }

    fn neg_loglik(&self, eta: &DVector<f64>) -> f64 {
        let mut s = 0.0;
        for i in 0..self.y.len() {
            s += self.w[i] * (softplus(eta[i]) - self.y[i] * eta[i]);
        }
        s / self.wsum
    }

    fn score(&self, eta: &DVector<f64>) -> DVector<f64> {
        let resid = DVector::from_iterator(
            self.y.len(),
            (0..self.y.len()).map(|i| self.w[i] * (self.y[i] - expit(eta[i])) / self.wsum),
        );
        self.x.tr_mul(&resid)
    }

    fn hessian(&self, eta: &DVector<f64>) -> DMatrix<f64> {
        let mut xw = self.x.clone();
        for i in 0..self.y.len() {
            let p = expit(eta[i]);
            xw.row_mut(i).scale_mut(self.w[i] * p * (1.0 - p) / self.wsum);
        }
        self.x.tr_mul(&xw)
    }
}

/// Maximises the weighted Bernoulli likelihood of `y` (values in `[0, 1]`)
/// under `expit(x * beta + offset)`.
///
/// Converges when the weight-normalised score norm drops to `1e-10` and the
/// next Newton step is negligible. If that
/// does not happen within 100 Newton steps, or a coefficient leaves
/// `[-40, 40]` (separation), the coefficients are clamped to that box and
/// `converged` is false.
pub fn solve_logistic(
    x: &DMatrix<f64>,
    y: &[f64],
    weights: Option<&[f64]>,
    offset: Option<&[f64]>,
) -> Result<LogisticSolution> {
    let (n, p) = x.shape();
    if n == 0 {
        return Err(Error::EmptyData);
    }
    if y.len() != n {
        return Err(Error::ShapeMismatch {
            expected: format!("{n} targets"),
            found: y.len().to_string(),
        });
    }
    if x.iter().chain(y).any(|v| !v.is_finite())
        || offset.is_some_and(|o| o.iter().any(|v| !v.is_finite()))
        || weights.is_some_and(|w| w.iter().any(|v| !v.is_finite() || *v < 0.0))
    {
        return Err(Error::NonFiniteInput);
    }
    if y.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
        return Err(Error::LossTargetMismatch {
            loss: "logistic",
            reason: "targets must lie in [0, 1]".into(),
        });
    }
    let w = weights.map_or_else(|| vec![1.0; n], <[f64]>::to_vec);
    let wsum: f64 = w.iter().sum();
    if wsum <= 0.0 {
        return Err(Error::EmptyData);
    }
    let prob = Problem {
        x,
        y,
        w,
        offset: offset.map_or_else(|| vec![0.0; n], <[f64]>::to_vec),
        wsum,
    };

    let mut beta = DVector::zeros(p);
    let mut eta = prob.eta(&beta);
    let mut loss = prob.neg_loglik(&eta);
    let mut converged = false;
    let mut iterations = 0;
    let mut score = prob.score(&eta);

    while iterations < MAX_ITER {
        let hess = prob.hessian(&eta);
        let step = match hess.clone().cholesky() {
            Some(ch) => ch.solve(&score),
            None => pinv(&hess) * &score,
        };
        // Under separation the score vanishes while Newton keeps pushing the
        // coefficients outward, so a small score alone is not convergence.
        if score.norm() <= SCORE_TOL && step.norm() <= STEP_TOL * (1.0 + beta.norm()) {
            converged = true;
            break;
        }
        iterations += 1;

        // Step halving keeps the objective monotone.
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let cand = &beta + &step * t;
            let cand_eta = prob.eta(&cand);
            let cand_loss = prob.neg_loglik(&cand_eta);
            if cand_loss <= loss + 1e-15 * loss.abs().max(1.0) {
                beta = cand;
                eta = cand_eta;
                loss = cand_loss;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        score = prob.score(&eta);
        if beta.amax() > COEF_BOUND {
            break;
        }
        if !accepted {
            break;
        }
    }
    if !converged {
        beta.apply(|b| *b = b.clamp(-COEF_BOUND, COEF_BOUND));
        score = prob.score(&prob.eta(&beta));
    }
    Ok(LogisticSolution {
        coefficients: beta.iter().copied().collect(),
        converged,
        iterations,
        score_norm: score.norm(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn intercept(n: usize) -> DMatrix<f64> {
        DMatrix::from_element(n, 1, 1.0)
    }

    #[test]
    fn intercept_only_recovers_logit_of_mean() {
        let y = [1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0];
        let sol = solve_logistic(&intercept(8), &y, None, None).unwrap();
        assert!(sol.converged);
        // closed-form Bernoulli MLE
        assert!((sol.coefficients[0] - (0.25f64 / 0.75).ln()).abs() < 1e-8);
        assert!((sol.coefficients[0] + 1.0986122886681098).abs() < 1e-8);
    }

    #[test]
    fn score_already_zero() {
        let offset = [-1.0, 0.3, 2.0];
        let y: Vec<f64> = offset.iter().map(|&o| expit(o)).collect();
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 0.5, 1.0, -2.0, 1.0, 3.0]);
        let sol = solve_logistic(&x, &y, None, Some(&offset)).unwrap();
        assert!(sol.converged);
        assert_eq!(sol.iterations, 0);
        assert_eq!(sol.coefficients, vec![0.0, 0.0]);
    }

    #[test]
    fn separation_is_clamped() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, -2.0, 1.0, -1.0, 1.0, 1.0, 1.0, 2.0]);
        let y = [0.0, 0.0, 1.0, 1.0];
        let sol = solve_logistic(&x, &y, None, None).unwrap();
        assert!(!sol.converged);
        assert!(sol.coefficients.iter().all(|b| b.abs() <= COEF_BOUND));
        assert!(sol.coefficients.iter().any(|b| b.abs() == COEF_BOUND));
    }

    #[test]
    fn weighted_score_vanishes() {
        let xs = [0.1, 0.4, -1.2, 2.2, 0.9, -0.3, 1.7, -2.0];
        let y = [0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.3, 0.6];
        let w = [1.0, 2.0, 0.5, 1.0, 3.0, 1.0, 1.0, 0.2];
        let mut x = DMatrix::zeros(8, 2);
        for i in 0..8 {
            x[(i, 0)] = 1.0;
            x[(i, 1)] = xs[i];
        }
        let off = [0.2, -0.1, 0.0, 0.4, 0.0, 0.1, -0.3, 0.0];
        let sol = solve_logistic(&x, &y, Some(&w), Some(&off)).unwrap();
        assert!(sol.converged && sol.score_norm <= SCORE_TOL);
        let wsum: f64 = w.iter().sum();
        for j in 0..2 {
            let s: f64 = (0..8)
                .map(|i| {
                    let p = expit(sol.coefficients[0] + sol.coefficients[1] * xs[i] + off[i]);
                    w[i] * (y[i] - p) * x[(i, j)]
                })
                .sum::<f64>()
                / wsum;
            assert!(s.abs() <= 1e-8);
        }
    }

    #[test]
    fn rejects_targets_outside_unit_interval() {
        assert!(solve_logistic(&intercept(2), &[0.0, 2.0], None, None).is_err());
        assert_eq!(
            solve_logistic(&intercept(2), &[0.0, f64::NAN], None, None),
            Err(Error::NonFiniteInput)
        );
    }
}
