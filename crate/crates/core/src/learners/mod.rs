//! Candidate learners for the Super Learner library.
//!
//! Every learner sees the same raw inputs: covariates `W` plus, for outcome
//! regressions, the treatment column `A`. Linear families expand those with
//! a [`Basis`]; `knn` and `cart` work on the raw row `[A, W_1, .., W_p]`.
//! Fitting is deterministic: there is no internal randomness anywhere here.

mod basis;
mod cart;
mod knn;
mod lasso;
pub mod logistic;
mod ols;

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use basis::{expand_basis, Basis};
pub use logistic::{bounded_expit, expit, logit, solve_logistic, LogisticSolution};

pub(crate) use ols::{numerical_rank, pinv, weighted_lstsq};

use crate::error::{Error, Result};

/// Raw learner inputs: an `n x p` covariate matrix and an optional
/// treatment column.
#[derive(Debug, Clone, Copy)]
pub struct Inputs<'a> {
    pub w: &'a DMatrix<f64>,
    pub a: Option<&'a [f64]>,
}

impl<'a> Inputs<'a> {
    pub fn new(w: &'a DMatrix<f64>, a: Option<&'a [f64]>) -> Inputs<'a> {
        Inputs { w, a }
    }

    pub fn n(&self) -> usize {
        self.w.nrows()
    }

    pub fn select(&self, idx: &[usize]) -> OwnedInputs {
        OwnedInputs {
            w: self.w.select_rows(idx),
            a: self.a.map(|a| idx.iter().map(|&i| a[i]).collect()),
        }
    }

    fn layout(&self) -> InputLayout {
        InputLayout {
            has_treatment: self.a.is_some(),
            p: self.w.ncols(),
        }
    }

    /// Row-major `[A, W...]` rows for the distance and tree learners.
    fn raw_rows(&self) -> (Vec<f64>, usize) {
        let width = usize::from(self.a.is_some()) + self.w.ncols();
        let mut rows = Vec::with_capacity(self.n() * width);
        for i in 0..self.n() {
            if let Some(a) = self.a {
                rows.push(a[i]);
            }
            rows.extend(self.w.row(i).iter());
        }
        (rows, width)
    }

    fn check_finite(&self) -> Result<()> {
        if self.w.iter().any(|v| !v.is_finite()) || self.a.is_some_and(|a| a.iter().any(|v| !v.is_finite())) {
            return Err(Error::NonFiniteInput);
        }
        if let Some(a) = self.a {
            if a.len() != self.n() {
                return Err(Error::ShapeMismatch {
                    expected: format!("treatment of length {}", self.n()),
                    found: a.len().to_string(),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OwnedInputs {
    pub w: DMatrix<f64>,
    pub a: Option<Vec<f64>>,
}

impl OwnedInputs {
    pub fn view(&self) -> Inputs<'_> {
        Inputs {
            w: &self.w,
            a: self.a.as_deref(),
        }
    }
}

/// Candidate algorithm plus its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum LearnerSpec {
    Mean,
    /// Least squares; `ols`, `ols_interact` and `poly2` are the `Linear`,
    /// `Interact` and `Poly2` bases.
    Ols {
        basis: Basis,
    },
    Lasso {
        lambda: f64,
        basis: Basis,
    },
    Logistic {
        basis: Basis,
    },
    Knn {
        k: usize,
    },
    Cart {
        max_depth: usize,
        min_leaf: usize,
    },
}

pub const DEFAULT_LASSO_BASIS: Basis = Basis::Poly2Interact;
pub const DEFAULT_MIN_LEAF: usize = 5;

impl LearnerSpec {
    pub fn ols() -> Self {
        LearnerSpec::Ols { basis: Basis::Linear }
    }

    pub fn ols_interact() -> Self {
        LearnerSpec::Ols { basis: Basis::Interact }
    }

    pub fn poly2() -> Self {
        LearnerSpec::Ols { basis: Basis::Poly2 }
    }

    pub fn lasso(lambda: f64) -> Self {
        LearnerSpec::Lasso {
            lambda,
            basis: DEFAULT_LASSO_BASIS,
        }
    }

    pub fn logistic(basis: Basis) -> Self {
        LearnerSpec::Logistic { basis }
    }

    pub fn knn(k: usize) -> Self {
        LearnerSpec::Knn { k }
    }

    pub fn cart(max_depth: usize) -> Self {
        LearnerSpec::Cart {
            max_depth,
            min_leaf: DEFAULT_MIN_LEAF,
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            LearnerSpec::Mean => "mean",
            LearnerSpec::Ols { .. } => "ols",
            LearnerSpec::Lasso { .. } => "lasso",
            LearnerSpec::Logistic { .. } => "logistic",
            LearnerSpec::Knn { .. } => "knn",
            LearnerSpec::Cart { .. } => "cart",
        }
    }

    /// Only the least-squares and logistic families honour an offset.
    pub fn supports_offset(&self) -> bool {
        matches!(self, LearnerSpec::Ols { .. } | LearnerSpec::Logistic { .. })
    }

    /// Canonical name, accepted back by [`LearnerSpec::parse`].
    pub fn name(&self) -> String {
        self.to_string()
    }

    /// Parses `mean`, `ols`, `ols_interact`, `poly2`, `poly2_interact`,
    /// `lasso:LAMBDA[:BASIS]`, `logistic[:BASIS]`, `knn:K` and
    /// `cart:DEPTH[:MIN_LEAF]`.
    pub fn parse(s: &str) -> Result<LearnerSpec> {
        let s = s.trim();
        let mut parts = s.split(':');
        let family = parts.next().unwrap_or_default();
        let args: Vec<&str> = parts.collect();
        let bad = || Error::UnknownLearner(s.to_string());
        let basis_arg = |i: usize, default: Basis| -> Result<Basis> {
            args.get(i).map_or(Ok(default), |b| Basis::parse(b).ok_or_else(bad))
        };
        let num = |i: usize| -> Result<f64> { args.get(i).ok_or_else(bad)?.parse::<f64>().map_err(|_| bad()) };
        let count = |i: usize| -> Result<usize> { args.get(i).ok_or_else(bad)?.parse::<usize>().map_err(|_| bad()) };
        let spec = match family {
            "mean" if args.is_empty() => LearnerSpec::Mean,
            "ols" if args.is_empty() => LearnerSpec::ols(),
            "ols_interact" if args.is_empty() => LearnerSpec::ols_interact(),
            "poly2" if args.is_empty() => LearnerSpec::poly2(),
            "poly2_interact" if args.is_empty() => LearnerSpec::Ols {
                basis: Basis::Poly2Interact,
            },
            "lasso" if (1..=2).contains(&args.len()) => LearnerSpec::Lasso {
                lambda: num(0)?,
                basis: basis_arg(1, DEFAULT_LASSO_BASIS)?,
            },
            "logistic" if args.len() <= 1 => LearnerSpec::Logistic {
                basis: basis_arg(0, Basis::Linear)?,
            },
            "knn" if args.len() == 1 => LearnerSpec::Knn { k: count(0)? },
            "cart" if (1..=2).contains(&args.len()) => LearnerSpec::Cart {
                max_depth: count(0)?,
                min_leaf: if args.len() == 2 { count(1)? } else { DEFAULT_MIN_LEAF },
            },
            _ => return Err(bad()),
        };
        spec.check()?;
        Ok(spec)
    }

    pub fn check(&self) -> Result<()> {
        match *self {
            LearnerSpec::Lasso { lambda, .. } if !(lambda >= 0.0 && lambda.is_finite()) => Err(
                Error::BadHyperparameter(format!("lasso lambda must be >= 0, got {lambda}")),
            ),
            LearnerSpec::Knn { k: 0 } => Err(Error::BadHyperparameter("knn k must be >= 1".into())),
            LearnerSpec::Cart { max_depth, min_leaf } if max_depth == 0 || min_leaf == 0 => {
                Err(Error::BadHyperparameter("cart depth and min_leaf must be >= 1".into()))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for LearnerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LearnerSpec::Mean => write!(f, "mean"),
            LearnerSpec::Ols { basis } => f.write_str(match basis {
                Basis::Linear => "ols",
                Basis::Interact => "ols_interact",
                Basis::Poly2 => "poly2",
                Basis::Poly2Interact => "poly2_interact",
            }),
            LearnerSpec::Lasso { lambda, basis } => write!(f, "lasso:{lambda}:{}", basis.name()),
            LearnerSpec::Logistic { basis } => write!(f, "logistic:{}", basis.name()),
            LearnerSpec::Knn { k } => write!(f, "knn:{k}"),
            LearnerSpec::Cart { max_depth, min_leaf } => write!(f, "cart:{max_depth}:{min_leaf}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct InputLayout {
    pub has_treatment: bool,
    pub p: usize,
}

#[derive(Debug, Clone, PartialEq)]
enum Model {
    Constant(f64),
    Linear { coef: Vec<f64>, basis: Basis },
    Logistic { coef: Vec<f64>, basis: Basis },
    Knn(knn::Knn),
    Tree(cart::Tree),
}

/// A fitted candidate. Prediction is a pure function of the stored state.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedLearner {
    spec: LearnerSpec,
    layout: InputLayout,
    model: Model,
    converged: bool,
}

impl FittedLearner {
    pub fn spec(&self) -> &LearnerSpec {
        &self.spec
    }

    pub fn layout(&self) -> InputLayout {
        self.layout
    }

    /// Design coefficients for the linear families, intercept first.
    pub fn coefficients(&self) -> Option<&[f64]> {
        match &self.model {
            Model::Linear { coef, .. } | Model::Logistic { coef, .. } => Some(coef),
            _ => None,
        }
    }

    /// False only for a logistic fit that hit the iteration or coefficient bound.
    pub fn converged(&self) -> bool {
        self.converged
    }

    pub fn n_leaves(&self) -> Option<usize> {
        match &self.model {
            Model::Tree(t) => Some(t.n_leaves()),
            _ => None,
        }
    }

    /// Predictions without an offset. Logistic fits return probabilities in
    /// `[1e-12, 1 - 1e-12]`.
    pub fn predict(&self, x: Inputs<'_>) -> Result<Vec<f64>> {
        self.predict_with_offset(x, None)
    }

    /// Adds `offset` to the linear predictor (before the link for logistic).
    pub fn predict_with_offset(&self, x: Inputs<'_>, offset: Option<&[f64]>) -> Result<Vec<f64>> {
        if x.layout() != self.layout {
            return Err(Error::ShapeMismatch {
                expected: format!("{:?}", self.layout),
                found: format!("{:?}", x.layout()),
            });
        }
        x.check_finite()?;
        if offset.is_some() && !self.spec.supports_offset() {
            return Err(Error::OffsetUnsupported(self.spec.name()));
        }
        let n = x.n();
        let off = |i: usize| offset.map_or(0.0, |o| o[i]);
        Ok(match &self.model {
            Model::Constant(c) => vec![*c; n],
            Model::Linear { coef, basis } => {
                let d = expand_basis(x.w, x.a, *basis);
                (0..n).map(|i| dot_row(&d, i, coef) + off(i)).collect()
            }
            Model::Logistic { coef, basis } => {
                let d = expand_basis(x.w, x.a, *basis);
                (0..n).map(|i| bounded_expit(dot_row(&d, i, coef) + off(i))).collect()
            }
            Model::Knn(m) => {
                let (rows, width) = x.raw_rows();
                (0..n)
                    .map(|i| m.predict_one(&rows[i * width..(i + 1) * width]))
                    .collect()
            }
            Model::Tree(t) => {
                let (rows, width) = x.raw_rows();
                (0..n)
                    .map(|i| t.predict_one(&rows[i * width..(i + 1) * width]))
                    .collect()
            }
        })
    }
}

fn dot_row(d: &DMatrix<f64>, i: usize, coef: &[f64]) -> f64 {
    coef.iter().enumerate().map(|(j, c)| d[(i, j)] * c).sum()
}

/// Fits `spec` to `(x, y)`.
///
/// `weights` must be non-negative. `offset` is accepted by `ols` (the fit
/// targets `y - offset`) and `logistic` (added to the linear predictor); any
/// other family returns [`Error::OffsetUnsupported`].
pub fn fit_learner(
    spec: &LearnerSpec,
    x: Inputs<'_>,
    y: &[f64],
    weights: Option<&[f64]>,
    offset: Option<&[f64]>,
) -> Result<FittedLearner> {
    spec.check()?;
    let n = x.n();
    if n == 0 {
        return Err(Error::EmptyData);
    }
    if y.len() != n {
        return Err(Error::ShapeMismatch {
            expected: format!("{n} targets"),
            found: y.len().to_string(),
        });
    }
    x.check_finite()?;
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput);
    }
    if let Some(w) = weights {
        if w.len() != n || w.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::NonFiniteInput);
        }
    }
    if offset.is_some() && !spec.supports_offset() {
        return Err(Error::OffsetUnsupported(spec.name()));
    }
    if let Some(o) = offset {
        if o.len() != n || o.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput);
        }
    }

    let mut converged = true;
    let model = match *spec {
        LearnerSpec::Mean => Model::Constant(weighted_mean(y, weights)),
        LearnerSpec::Ols { basis } => {
            let d = expand_basis(x.w, x.a, basis);
            let target: Vec<f64> = match offset {
                Some(o) => y.iter().zip(o).map(|(a, b)| a - b).collect(),
                None => y.to_vec(),
            };
            Model::Linear {
                coef: weighted_lstsq(&d, &target, weights),
                basis,
            }
        }
        LearnerSpec::Lasso { lambda, basis } => {
            let d = expand_basis(x.w, x.a, basis);
            Model::Linear {
                coef: lasso::fit_lasso(&d, y, weights, lambda).coefficients,
                basis,
            }
        }
        LearnerSpec::Logistic { basis } => {
            let d = expand_basis(x.w, x.a, basis);
            let sol = solve_logistic(&d, y, weights, offset)?;
            converged = sol.converged;
            Model::Logistic {
                coef: sol.coefficients,
                basis,
            }
        }
        LearnerSpec::Knn { k } => {
            let (rows, width) = x.raw_rows();
            Model::Knn(knn::Knn::fit(rows, width, y, weights, k))
        }
        LearnerSpec::Cart { max_depth, min_leaf } => {
            let (rows, width) = x.raw_rows();
            let w = weights.map_or_else(|| vec![1.0; n], <[f64]>::to_vec);
            Model::Tree(cart::Tree::fit(&rows, width, y, &w, max_depth, min_leaf))
        }
    };
    Ok(FittedLearner {
        spec: spec.clone(),
        layout: x.layout(),
        model,
        converged,
    })
}

pub fn predict_learner(f: &FittedLearner, x: Inputs<'_>) -> Result<Vec<f64>> {
    f.predict(x)
}

fn weighted_mean(y: &[f64], weights: Option<&[f64]>) -> f64 {
    match weights {
        Some(w) => {
            let ws: f64 = w.iter().sum();
            if ws > 0.0 {
                y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / ws
            } else {
                y.iter().sum::<f64>() / y.len() as f64
            }
        }
        None => y.iter().sum::<f64>() / y.len() as f64,
    }
}
