use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};
use tlearn::data::parse_csv;
use tlearn::learners::Inputs;
use tlearn::rng::derive_seed;
use tlearn::rules::{estimate_rule_effect, positivity_report, PositivityReport, RuleEffectConfig};
use tlearn::simulation::{best_truth, compute_metrics, run_study, scenario, EstimatorId, StudyConfig, TruthReport};
use tlearn::super_learner::sl_predict;
use tlearn::tmle::{
    baseline_glm_ate, baseline_sl_plugin, default_outcome_roster, default_propensity_roster, estimate, fit_outcome_sl,
    fit_propensity_sl, Diagnostics, EstimandKind, ReportRecord, SlSummary,
};
use tlearn::{ColumnSchema, Dataset, OutcomeKind};

use crate::config::{KindChoice, RunConfig};
use crate::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

// Same tags the estimator uses for its own nuisance fits.
const Q_SEED_TAG: u64 = 1;
const G_SEED_TAG: u64 = 2;

/// Provenance wrapper shared by every JSON report.
#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config: &'a RunConfig,
    seed: u64,
    input_sha256: Option<String>,
    #[serde(flatten)]
    body: T,
}

fn write_json<T: Serialize>(
    path: &Path,
    command: &'static str,
    cfg: &RunConfig,
    hash: Option<String>,
    body: T,
) -> Result<(), CliError> {
    let env = Envelope {
        tool: "tlearn",
        version: VERSION,
        command,
        config: cfg,
        seed: cfg.seed,
        input_sha256: hash,
        body,
    };
    let mut text = serde_json::to_string_pretty(&env).map_err(|e| CliError::Compute(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn out_path(cfg: &RunConfig, default: &str) -> PathBuf {
    cfg.out.clone().unwrap_or_else(|| PathBuf::from(default))
}

/// Reads and parses the `--data` file; returns the dataset and the SHA-256
/// of the raw bytes.
fn load(cfg: &RunConfig) -> Result<(Dataset, String), CliError> {
    let path = cfg
        .data
        .as_ref()
        .ok_or_else(|| CliError::Usage("--data is required".into()))?;
    let bytes = fs::read(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    let hash = hex::encode(Sha256::digest(&bytes));
    let kind = match cfg.outcome_kind {
        KindChoice::Binary => OutcomeKind::Binary,
        _ => OutcomeKind::Continuous,
    };
    let schema = ColumnSchema::new(
        cfg.schema.iter().cloned(),
        cfg.treatment.clone(),
        cfg.outcome.clone(),
        kind,
    )?;
    let mut ds = parse_csv(bytes.as_slice(), &schema)?;
    if cfg.outcome_kind == KindChoice::Auto && OutcomeKind::detect(ds.outcome()) == OutcomeKind::Binary {
        ds = ds.with_outcome(ds.outcome().to_vec(), OutcomeKind::Binary)?;
    }
    Ok((ds, hash))
}

#[derive(Serialize)]
struct FoldRule {
    size: usize,
    psi: f64,
    treated_share: f64,
    description: Option<String>,
}

#[derive(Serialize)]
struct RuleSummary {
    objective: tlearn::rules::Objective,
    realistic_delta: Option<f64>,
    folds: Vec<FoldRule>,
}

#[derive(Serialize)]
struct EstimateBody {
    #[serde(flatten)]
    record: ReportRecord,
    diagnostics: Diagnostics,
    rule: Option<RuleSummary>,
}

pub fn cmd_estimate(cfg: &RunConfig) -> Result<(), CliError> {
    let estimand = cfg
        .estimand
        .clone()
        .ok_or_else(|| CliError::Usage("--estimand is required".into()))?;
    let (ds, hash) = load(cfg)?;
    let tcfg = cfg.tmle_config(ds.outcome_kind());
    let (report, rule) = if estimand == "optimal-rule" {
        if cfg.method != "tmle" {
            return Err(CliError::Usage("optimal-rule is estimated by tmle only".into()));
        }
        let rcfg = RuleEffectConfig {
            tmle: tcfg,
            objective: cfg.objective,
            realistic_delta: cfg.realistic_delta,
        };
        let r = estimate_rule_effect(&ds, &rcfg)?;
        let folds = r
            .fold_rules
            .iter()
            .zip(&r.fold_sizes)
            .zip(&r.fold_estimates)
            .map(|((d, &size), &psi)| FoldRule {
                size,
                psi,
                treated_share: d.treated_share(),
                description: d.description.clone(),
            })
            .collect();
        let summary = RuleSummary {
            objective: cfg.objective,
            realistic_delta: cfg.realistic_delta,
            folds,
        };
        (r.estimate, Some(summary))
    } else {
        let kind = match estimand.as_str() {
            "ate" => EstimandKind::Ate,
            "par" => EstimandKind::Par,
            _ => EstimandKind::MeanOutcome,
        };
        let report = match cfg.method.as_str() {
            "glm" if kind != EstimandKind::Ate => {
                return Err(CliError::Usage("the glm baseline estimates the ate only".into()))
            }
            "glm" => baseline_glm_ate(&ds, cfg.level)?,
            "sl_plugin" => baseline_sl_plugin(&ds, &kind, &tcfg)?,
            _ => estimate(&ds, &kind, &tcfg)?,
        };
        (report, None)
    };
    let rec = report.record();
    match (rec.se, rec.ci_lower, rec.ci_upper) {
        (Some(se), Some(lo), Some(hi)) => {
            println!(
                "{} {}: psi = {:.6}  se = {:.6}  {}% CI [{:.6}, {:.6}]",
                rec.method,
                rec.estimand,
                rec.psi,
                se,
                rec.level * 100.0,
                lo,
                hi
            )
        }
        _ => println!("{} {}: psi = {:.6}", rec.method, rec.estimand, rec.psi),
    }
    let body = EstimateBody {
        record: rec,
        diagnostics: report.diagnostics,
        rule,
    };
    write_json(&out_path(cfg, "estimate.json"), "estimate", cfg, Some(hash), body)
}

pub fn cmd_simulate(cfg: &RunConfig) -> Result<(), CliError> {
    let name = cfg
        .dgp
        .as_deref()
        .ok_or_else(|| CliError::Usage("--dgp is required".into()))?;
    let sc = scenario(name).map_err(|e| CliError::Usage(e.to_string()))?;
    let n = cfg.n.ok_or_else(|| CliError::Usage("--n is required".into()))?;
    let reps = cfg.reps.ok_or_else(|| CliError::Usage("--reps is required".into()))?;
    if n == 0 || reps == 0 {
        return Err(CliError::Usage("--n and --reps must be at least 1".into()));
    }
    let estimators = cfg
        .estimators
        .iter()
        .map(|s| EstimatorId::parse(s).map_err(|e| CliError::Usage(e.to_string())))
        .collect::<Result<Vec<_>, _>>()?;
    if estimators.is_empty() {
        return Err(CliError::Usage("--estimators is empty".into()));
    }
    let dir = cfg
        .out
        .clone()
        .ok_or_else(|| CliError::Usage("--out is required".into()))?;
    fs::create_dir_all(&dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;

    let mut study = StudyConfig::new(sc, estimators.clone(), n, reps, cfg.seed);
    study.tmle = cfg.tmle_config(study.scenario.dgp.outcome_kind);
    let started = Instant::now();
    let mc = run_study(&study)?;
    let metrics = compute_metrics(&mc);
    eprintln!("simulate: {reps} reps in {:.1} s", started.elapsed().as_secs_f64());

    let csv_path = dir.join("mc_result.csv");
    fs::write(&csv_path, mc.to_csv()).map_err(|e| CliError::Io(format!("{}: {e}", csv_path.display())))?;

    #[derive(Serialize)]
    struct MetricsBody<'a> {
        seed_scheme: &'static str,
        metrics: &'a tlearn::simulation::MetricsTable,
    }
    write_json(
        &dir.join("metrics.json"),
        "simulate",
        cfg,
        None,
        MetricsBody {
            seed_scheme: mc.seed_scheme,
            metrics: &metrics,
        },
    )?;

    #[derive(Serialize)]
    struct TruthBody {
        dgp: tlearn::simulation::DgpSpec,
        truths: Vec<TruthReport>,
    }
    let mut targets: Vec<_> = estimators.iter().map(|e| e.target(&study.scenario)).collect();
    targets.sort();
    targets.dedup();
    let truths = targets
        .into_iter()
        .map(|t| best_truth(&study.scenario.dgp, t))
        .collect();
    write_json(
        &dir.join("truth.json"),
        "simulate",
        cfg,
        None,
        TruthBody {
            dgp: study.scenario.dgp.clone(),
            truths,
        },
    )?;

    println!("estimator    bias        variance    mse         coverage  failures");
    for r in &metrics.rows {
        let cov = r.coverage.map(|c| format!("{c:.3}")).unwrap_or_else(|| "-".into());
        println!(
            "{:<12} {:<11.5} {:<11.5} {:<11.5} {:<9} {}",
            r.estimator.name(),
            r.bias,
            r.variance,
            r.mse,
            cov,
            r.failures
        );
    }
    Ok(())
}

pub fn cmd_diagnose(cfg: &RunConfig) -> Result<(), CliError> {
    let (ds, hash) = load(cfg)?;
    let roster = cfg.g_roster.clone().unwrap_or_else(default_propensity_roster);
    if !ds.both_arms_present() {
        return Err(tlearn::Error::SingleArmData.into());
    }
    let fit = fit_propensity_sl(&ds, &roster, cfg.folds, derive_seed(cfg.seed, G_SEED_TAG))?;
    let g1 = sl_predict(&fit, Inputs::new(ds.covariates(), None), cfg.sl_mode)?;
    let report = positivity_report(&g1, cfg.delta);
    let share = report.share_at(cfg.delta).unwrap_or(0.0);
    println!(
        "g range [{:.4}, {:.4}]; share with min(g, 1-g) < {}: {:.4}",
        report.g_min, report.g_max, cfg.delta, share
    );
    if share > 0.0 {
        eprintln!(
            "warning: {} of {} units have an estimated treatment probability within {} of 0 or 1",
            report.flagged_units.len(),
            ds.n(),
            cfg.delta
        );
    }

    #[derive(Serialize)]
    struct Body {
        positivity: PositivityReport,
        propensity_learner: SlSummary,
    }
    let body = Body {
        positivity: report,
        propensity_learner: SlSummary::from(&fit),
    };
    write_json(&out_path(cfg, "diagnose.json"), "diagnose", cfg, Some(hash), body)
}

pub fn cmd_cv_report(cfg: &RunConfig) -> Result<(), CliError> {
    let target = cfg
        .target
        .clone()
        .ok_or_else(|| CliError::Usage("--target is required".into()))?;
    let (ds, hash) = load(cfg)?;
    let fit = if target == "outcome" {
        let roster = cfg
            .q_roster
            .clone()
            .unwrap_or_else(|| default_outcome_roster(ds.outcome_kind()));
        fit_outcome_sl(&ds, &roster, cfg.folds, derive_seed(cfg.seed, Q_SEED_TAG))?
    } else {
        if !ds.both_arms_present() {
            return Err(tlearn::Error::SingleArmData.into());
        }
        let roster = cfg.g_roster.clone().unwrap_or_else(default_propensity_roster);
        fit_propensity_sl(&ds, &roster, cfg.folds, derive_seed(cfg.seed, G_SEED_TAG))?
    };
    let summary = SlSummary::from(&fit);
    for (name, (risk, w)) in summary
        .candidates
        .iter()
        .zip(summary.cv_risks.iter().zip(&summary.weights))
    {
        println!("{name:<28} cv_risk {risk:<12.6} weight {w:.4}");
    }
    println!(
        "discrete winner: {}; ensemble risk {:.6}",
        summary.discrete_winner, summary.ensemble_risk
    );

    #[derive(Serialize)]
    struct Body {
        target: String,
        #[serde(flatten)]
        sl: SlSummary,
    }
    write_json(
        &out_path(cfg, "cv_report.json"),
        "cv-report",
        cfg,
        Some(hash),
        Body { target, sl: summary },
    )
}
