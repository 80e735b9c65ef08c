//! Run configuration: defaults, then the `--config` file, then flags.

use std::path::PathBuf;

use serde::{Serialize, Serializer};
use tlearn::rules::Objective;
use tlearn::super_learner::SlMode;
use tlearn::tmle::{
    default_outcome_roster, default_propensity_roster, Fluctuation, PropensityModel, TmleConfig, VarianceMode,
    DEFAULT_G_BOUND, DEFAULT_LEVEL,
};
use tlearn::{LearnerSpec, OutcomeKind};

use crate::CliError;

pub const CONFIG_KEYS_HELP: &str = "\
Config file: one `key = value` per line, `#` starts a comment. Keys:
  seed             u64, default 1
  threads          worker count, default all cores
  folds            Super Learner fold count, default chosen from n
  g_bound          propensity truncation delta in [0, 0.5), default 0.01
  fluctuation      linear | logistic, default by outcome type
  variance_mode    plugin | crossval, default plugin
  sl_mode          ensemble | discrete, default ensemble
  level            confidence level in (0, 1), default 0.95
  q_roster         comma-separated learners, e.g. mean,ols,lasso:0.1,knn:5,cart:3
  g_roster         comma-separated learners for the propensity
  estimand         ate | par | mean | optimal-rule
  method           tmle | glm | sl_plugin
  objective        maximize | minimize (optimal-rule)
  realistic_delta  apply the realistic-rule constraint at this level
  delta            positivity threshold for diagnose, default 0.01
  target           outcome | propensity (cv-report)
  dgp              fig1 | fig1-sym | null | dr-q-wrong | dr-g-wrong
  n, reps          simulation sample size and repetitions
  estimators       comma-separated: glm,sl,tmle,tmle_cv,rule
  data             input CSV path
  schema           comma-separated covariate columns (may be empty)
  treatment        treatment column, default A
  outcome          outcome column, default Y
  outcome_kind     auto | continuous | binary, default auto
  out              output file (or directory for simulate)
Flags override file values.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KindChoice {
    Auto,
    Continuous,
    Binary,
}

/// Every setting a command can use. Serialised verbatim into reports,
/// except `threads`, which never changes results.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub seed: u64,
    #[serde(skip)]
    pub threads: Option<usize>,
    pub folds: Option<usize>,
    pub g_bound: f64,
    pub fluctuation: Option<Fluctuation>,
    pub variance_mode: VarianceMode,
    pub sl_mode: SlMode,
    pub level: f64,
    #[serde(serialize_with = "roster_names")]
    pub q_roster: Option<Vec<LearnerSpec>>,
    #[serde(serialize_with = "roster_names")]
    pub g_roster: Option<Vec<LearnerSpec>>,
    pub estimand: Option<String>,
    pub method: String,
    pub objective: Objective,
    pub realistic_delta: Option<f64>,
    pub delta: f64,
    pub target: Option<String>,
    pub dgp: Option<String>,
    pub n: Option<usize>,
    pub reps: Option<usize>,
    pub estimators: Vec<String>,
    pub data: Option<PathBuf>,
    pub schema: Vec<String>,
    pub treatment: String,
    pub outcome: String,
    pub outcome_kind: KindChoice,
    pub out: Option<PathBuf>,
}

fn roster_names<S: Serializer>(r: &Option<Vec<LearnerSpec>>, s: S) -> Result<S::Ok, S::Error> {
    match r {
        Some(v) => s.collect_seq(v.iter().map(LearnerSpec::name)),
        None => s.serialize_none(),
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 1,
            threads: None,
            folds: None,
            g_bound: DEFAULT_G_BOUND,
            fluctuation: None,
            variance_mode: VarianceMode::Plugin,
            sl_mode: SlMode::Ensemble,
            level: DEFAULT_LEVEL,
            q_roster: None,
            g_roster: None,
            estimand: None,
            method: "tmle".into(),
            objective: Objective::Maximize,
            realistic_delta: None,
            delta: 0.01,
            target: None,
            dgp: None,
            n: None,
            reps: None,
            estimators: vec!["glm".into(), "sl".into(), "tmle".into()],
            data: None,
            schema: Vec::new(),
            treatment: "A".into(),
            outcome: "Y".into(),
            outcome_kind: KindChoice::Auto,
            out: None,
        }
    }
}

fn usage(msg: String) -> CliError {
    CliError::Usage(msg)
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, CliError> {
    v.trim()
        .parse()
        .map_err(|_| usage(format!("invalid value {v:?} for `{key}`")))
}

pub fn list(v: &str) -> Vec<String> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect()
}

pub fn parse_roster(v: &str) -> Result<Vec<LearnerSpec>, CliError> {
    let names = list(v);
    if names.is_empty() {
        return Err(usage("empty learner roster".into()));
    }
    names
        .iter()
        .map(|s| LearnerSpec::parse(s).map_err(|e| usage(e.to_string())))
        .collect()
}

impl RunConfig {
    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let v = value.trim();
        match key {
            "seed" => self.seed = num(key, v)?,
            "threads" => {
                let t: usize = num(key, v)?;
                if t == 0 {
                    return Err(usage("threads must be at least 1".into()));
                }
                self.threads = Some(t);
            }
            "folds" => self.folds = Some(num(key, v)?),
            "g_bound" => self.g_bound = num(key, v)?,
            "fluctuation" => {
                self.fluctuation = Some(match v {
                    "linear" => Fluctuation::Linear,
                    "logistic" => Fluctuation::Logistic,
                    _ => return Err(usage(format!("unknown fluctuation {v:?}"))),
                })
            }
            "variance_mode" => {
                self.variance_mode = match v {
                    "plugin" => VarianceMode::Plugin,
                    "crossval" => VarianceMode::Crossval,
                    _ => return Err(usage(format!("unknown variance_mode {v:?}"))),
                }
            }
            "sl_mode" => {
                self.sl_mode = match v {
                    "ensemble" => SlMode::Ensemble,
                    "discrete" => SlMode::Discrete,
                    _ => return Err(usage(format!("unknown sl_mode {v:?}"))),
                }
            }
            "level" => self.level = num(key, v)?,
            "q_roster" => self.q_roster = Some(parse_roster(v)?),
            "g_roster" => self.g_roster = Some(parse_roster(v)?),
            "estimand" => {
                if !["ate", "par", "mean", "optimal-rule"].contains(&v) {
                    return Err(usage(format!("unknown estimand {v:?}")));
                }
                self.estimand = Some(v.into());
            }
            "method" => {
                if !["tmle", "glm", "sl_plugin"].contains(&v) {
                    return Err(usage(format!("unknown method {v:?}")));
                }
                self.method = v.into();
            }
            "objective" => {
                self.objective = match v {
                    "maximize" => Objective::Maximize,
                    "minimize" => Objective::Minimize,
                    _ => return Err(usage(format!("unknown objective {v:?}"))),
                }
            }
            "realistic_delta" => self.realistic_delta = Some(num(key, v)?),
            "delta" => {
                let d: f64 = num(key, v)?;
                if !(0.0..0.5).contains(&d) {
                    return Err(usage(format!("delta must lie in [0, 0.5), got {d}")));
                }
                self.delta = d;
            }
            "target" => {
                if !["outcome", "propensity"].contains(&v) {
                    return Err(usage(format!("unknown target {v:?}")));
                }
                self.target = Some(v.into());
            }
            "dgp" => self.dgp = Some(v.into()),
            "n" => self.n = Some(num(key, v)?),
            "reps" => self.reps = Some(num(key, v)?),
            "estimators" => self.estimators = list(v),
            "data" => self.data = Some(PathBuf::from(v)),
            "schema" => self.schema = list(v),
            "treatment" => self.treatment = v.into(),
            "outcome" => self.outcome = v.into(),
            "outcome_kind" => {
                self.outcome_kind = match v {
                    "auto" => KindChoice::Auto,
                    "continuous" => KindChoice::Continuous,
                    "binary" => KindChoice::Binary,
                    _ => return Err(usage(format!("unknown outcome_kind {v:?}"))),
                }
            }
            "out" => self.out = Some(PathBuf::from(v)),
            _ => return Err(usage(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    /// Applies a flat `key = value` file.
    pub fn apply_file(&mut self, text: &str) -> Result<(), CliError> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or_default().trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| usage(format!("config line {}: expected `key = value`", i + 1)))?;
            self.set(k.trim(), v)?;
        }
        Ok(())
    }

    /// Estimator configuration for a dataset with outcome type `kind`.
    pub fn tmle_config(&self, kind: OutcomeKind) -> TmleConfig {
        let mut c = TmleConfig::new(
            self.q_roster.clone().unwrap_or_else(|| default_outcome_roster(kind)),
            PropensityModel::Fit(self.g_roster.clone().unwrap_or_else(default_propensity_roster)),
            self.seed,
        );
        c.g_bound = self.g_bound;
        c.fluctuation = self.fluctuation;
        c.variance_mode = self.variance_mode;
        c.level = self.level;
        c.folds = self.folds;
        c.sl_mode = self.sl_mode;
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_then_override() {
        let mut c = RunConfig::default();
        c.apply_file("# comment\nseed = 7\nq_roster = mean, ols\n\nestimand=par # trailing\n")
            .unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.q_roster.as_ref().unwrap().len(), 2);
        assert_eq!(c.estimand.as_deref(), Some("par"));
        c.set("seed", "9").unwrap();
        assert_eq!(c.seed, 9);
    }

    #[test]
    fn bad_lines_are_usage_errors() {
        let mut c = RunConfig::default();
        assert!(matches!(c.apply_file("nonsense"), Err(CliError::Usage(_))));
        assert!(matches!(c.set("colour", "red"), Err(CliError::Usage(_))));
        assert!(matches!(c.set("q_roster", "ols,unicorn"), Err(CliError::Usage(_))));
        assert!(matches!(c.set("threads", "0"), Err(CliError::Usage(_))));
    }

    #[test]
    fn threads_are_not_echoed() {
        let mut a = RunConfig::default();
        a.threads = Some(8);
        let json = serde_json::to_string(&a).unwrap();
        assert!(!json.contains("threads"));
        assert_eq!(json, serde_json::to_string(&RunConfig::default()).unwrap());
    }
}
