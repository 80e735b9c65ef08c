use nalgebra::DMatrix;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, OutcomeKind};
use crate::error::{Error, Result};
use crate::learners::{expit, Basis, LearnerSpec};
use crate::rng::{open_uniform, standard_normal, substream};

pub const MAX_DEGREE: usize = 4;

/// Polynomial with ascending coefficients, `c[0] + c[1] w + ...`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Poly(pub Vec<f64>);

impl Poly {
    pub fn eval(&self, w: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, c| acc * w + c)
    }

    pub fn degree(&self) -> usize {
        self.0.iter().rposition(|&c| c != 0.0).unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0.0)
    }

    /// `E p(W)` for `W ~ Uniform(lo, hi)`.
    pub fn uniform_mean(&self, lo: f64, hi: f64) -> f64 {
        self.0
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let k1 = (k + 1) as i32;
                c * (hi.powi(k1) - lo.powi(k1)) / (f64::from(k1) * (hi - lo))
            })
            .sum()
    }
}

/// Single uniform covariate, logistic-linear propensity, outcome
/// `m0(w) + a tau0(w)` plus Gaussian noise (continuous) or as a Bernoulli
/// mean (binary).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub name: String,
    pub w_lo: f64,
    pub w_hi: f64,
    pub m0: Poly,
    pub tau0: Poly,
    /// `g0(w) = expit(g_intercept + g_slope w)`.
    pub g_intercept: f64,
    pub g_slope: f64,
    pub noise_sd: f64,
    pub outcome_kind: OutcomeKind,
}

impl DgpSpec {
    pub fn new(
        name: impl Into<String>,
        (w_lo, w_hi): (f64, f64),
        m0: Vec<f64>,
        tau0: Vec<f64>,
        (g_intercept, g_slope): (f64, f64),
        noise_sd: f64,
        outcome_kind: OutcomeKind,
    ) -> Result<DgpSpec> {
        let spec = DgpSpec {
            name: name.into(),
            w_lo,
            w_hi,
            m0: Poly(m0),
            tau0: Poly(tau0),
            g_intercept,
            g_slope,
            noise_sd,
            outcome_kind,
        };
        spec.check()?;
        Ok(spec)
    }

    fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidDgp(format!("{}: {m}", self.name)));
        let finite = [self.w_lo, self.w_hi, self.g_intercept, self.g_slope, self.noise_sd]
            .iter()
            .chain(&self.m0.0)
            .chain(&self.tau0.0)
            .all(|v| v.is_finite());
        if !finite {
            return bad("non-finite parameter".into());
        }
        if !(self.w_lo < self.w_hi) {
            return bad(format!("empty support [{}, {}]", self.w_lo, self.w_hi));
        }
        if self.m0.0.len() > MAX_DEGREE + 1 || self.tau0.0.len() > MAX_DEGREE + 1 {
            return bad(format!("polynomial degree above {MAX_DEGREE}"));
        }
        if self.noise_sd < 0.0 {
            return bad("negative noise sd".into());
        }
        for w in [self.w_lo, self.w_hi] {
            let g = self.g0(w);
            if !(g > 0.0 && g < 1.0) {
                return bad(format!("propensity {g} at w = {w}"));
            }
        }
        if self.outcome_kind == OutcomeKind::Binary {
            // Bernoulli means must be probabilities across the support
            let steps = 1000;
            for k in 0..=steps {
                let w = self.w_lo + (self.w_hi - self.w_lo) * k as f64 / steps as f64;
                for a in [0.0, 1.0] {
                    let q = self.qbar0(a, w);
                    if !(0.0..=1.0).contains(&q) {
                        return bad(format!("outcome mean {q} outside [0, 1] at w = {w}"));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn g0(&self, w: f64) -> f64 {
        expit(self.g_intercept + self.g_slope * w)
    }

    pub fn qbar0(&self, a: f64, w: f64) -> f64 {
        self.m0.eval(w) + a * self.tau0.eval(w)
    }

    pub fn propensity_is_constant(&self) -> bool {
        self.g_slope == 0.0
    }

    /// Draws `n` units from `rng`: per unit `W`, then `A`, then the outcome
    /// noise (one normal or one uniform).
    pub fn sample_with<R: RngCore>(&self, n: usize, rng: &mut R) -> Dataset {
        let mut w = Vec::with_capacity(n);
        let mut a = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for _ in 0..n {
            let wi = self.w_lo + (self.w_hi - self.w_lo) * open_uniform(rng);
            let ai = u8::from(open_uniform(rng) < self.g0(wi));
            let q = self.qbar0(f64::from(ai), wi);
            let yi = match self.outcome_kind {
                OutcomeKind::Continuous => {
                    let z = standard_normal(rng);
                    if self.noise_sd == 0.0 {
                        q
                    } else {
                        q + self.noise_sd * z
                    }
                }
                OutcomeKind::Binary => f64::from(u8::from(open_uniform(rng) < q)),
            };
            w.push(wi);
            a.push(ai);
            y.push(yi);
        }
        Dataset::from_parts_unchecked(
            crate::data::ColumnSchema::new(["w1"], "A", "Y", self.outcome_kind).expect("fixed names are valid"),
            DMatrix::from_vec(n, 1, w),
            a,
            y,
        )
    }
}

/// `n` units from stream 0 of `seed`.
pub fn sample_dgp(spec: &DgpSpec, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::EmptyData);
    }
    Ok(spec.sample_with(n, &mut substream(seed, 0)))
}

/// Estimand template for a study; the rule contrast uses the true optimal
/// rule `1{tau0(w) >= 0}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Ate,
    Par,
    MeanOutcome,
    OptimalRuleContrast,
}

impl Target {
    pub const ALL: [Target; 4] = [
        Target::Ate,
        Target::Par,
        Target::MeanOutcome,
        Target::OptimalRuleContrast,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Target::Ate => "ate",
            Target::Par => "par",
            Target::MeanOutcome => "mean",
            Target::OptimalRuleContrast => "optimal_rule_contrast",
        }
    }
}

/// A registered DGP with the estimand its study targets and any roster
/// overrides for the nuisance fits.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    pub name: String,
    pub dgp: DgpSpec,
    pub target: Target,
    pub q_roster: Option<Vec<LearnerSpec>>,
    pub g_roster: Option<Vec<LearnerSpec>>,
}

pub const SCENARIO_NAMES: [&str; 5] = ["fig1", "fig1-sym", "null", "dr-q-wrong", "dr-g-wrong"];

fn fig1_dgp(name: &str, g_intercept: f64, tau0: Vec<f64>) -> DgpSpec {
    DgpSpec::new(
        name,
        (0.0, 10.0),
        vec![2.0, 0.8, -0.07],
        tau0,
        (g_intercept, 0.4),
        1.0,
        OutcomeKind::Continuous,
    )
    .expect("registered constants are valid")
}

/// Looks up a registered scenario.
///
/// `fig1`: `W ~ U(0, 10)`, `g0 = expit(-1 + 0.4 w)`, `m0 = 2 + 0.8 w - 0.07 w^2`,
/// `tau0 = 0.3 (w - 5)`, unit noise. `fig1-sym` uses intercept -2, which
/// centres the propensity at `w = 5`. `null` sets `tau0 = 0`. The two
/// `dr-*` scenarios keep the fig1 law, target the PAR and misspecify one
/// nuisance roster each.
pub fn scenario(name: &str) -> Result<Scenario> {
    let tau = vec![-1.5, 0.3];
    let s = |dgp: DgpSpec, target, q_roster, g_roster| Scenario {
        name: name.to_string(),
        dgp,
        target,
        q_roster,
        g_roster,
    };
    Ok(match name {
        "fig1" => s(fig1_dgp(name, -1.0, tau), Target::Ate, None, None),
        "fig1-sym" => s(fig1_dgp(name, -2.0, tau), Target::Ate, None, None),
        "null" => s(fig1_dgp(name, -1.0, vec![0.0]), Target::Ate, None, None),
        "dr-q-wrong" => s(
            fig1_dgp(name, -1.0, tau),
            Target::Par,
            Some(vec![LearnerSpec::Mean]),
            Some(vec![LearnerSpec::logistic(Basis::Linear)]),
        ),
        "dr-g-wrong" => s(
            fig1_dgp(name, -1.0, tau),
            Target::Par,
            Some(vec![LearnerSpec::Ols {
                basis: Basis::Poly2Interact,
            }]),
            Some(vec![LearnerSpec::Mean]),
        ),
        other => return Err(Error::InvalidDgp(format!("unknown scenario {other:?}"))),
    })
}
