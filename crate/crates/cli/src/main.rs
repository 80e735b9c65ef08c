//! `tlearn`: targeted learning from the command line.
//!
//! Exit codes: 0 success, 1 computation failure, 2 usage or parse error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use config::{RunConfig, CONFIG_KEYS_HELP};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Compute(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Compute(_) | CliError::Io(_) => 1,
        }
    }
}

impl From<tlearn::Error> for CliError {
    fn from(e: tlearn::Error) -> Self {
        use tlearn::Error as E;
        match e {
            E::MissingColumn(_)
            | E::NonNumericCell { .. }
            | E::BadTreatmentValue(_)
            | E::BadOutcomeValue(_)
            | E::RaggedRow { .. }
            | E::EmptyBody
            | E::BadSchema(_)
            | E::Csv(_)
            | E::UnknownLearner(_)
            | E::BadHyperparameter(_)
            | E::InvalidConfig(_) => CliError::Usage(e.to_string()),
            other => CliError::Compute(other.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(name = "tlearn", version, about = "Super Learner, TMLE and simulation studies", after_long_help = CONFIG_KEYS_HELP)]
struct Cli {
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Flat `key = value` config file (see --help).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct DataArgs {
    /// Input CSV with a header row.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Comma-separated covariate columns; may be empty.
    #[arg(long)]
    schema: Option<String>,
    #[arg(long)]
    treatment: Option<String>,
    #[arg(long)]
    outcome: Option<String>,
    /// auto | continuous | binary
    #[arg(long)]
    outcome_kind: Option<String>,
    /// Output file.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Outcome learners, comma-separated.
    #[arg(long)]
    q_roster: Option<String>,
    /// Propensity learners, comma-separated.
    #[arg(long)]
    g_roster: Option<String>,
    /// Super Learner fold count.
    #[arg(long)]
    folds: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate a causal parameter from a CSV file.
    Estimate {
        #[command(flatten)]
        data: DataArgs,
        /// ate | par | mean | optimal-rule
        #[arg(long)]
        estimand: Option<String>,
        /// tmle | glm | sl_plugin
        #[arg(long)]
        method: Option<String>,
        /// Propensity truncation delta.
        #[arg(long)]
        g_bound: Option<f64>,
        /// linear | logistic
        #[arg(long)]
        fluctuation: Option<String>,
        /// plugin | crossval
        #[arg(long)]
        variance_mode: Option<String>,
        /// ensemble | discrete
        #[arg(long)]
        sl_mode: Option<String>,
        #[arg(long)]
        level: Option<f64>,
        /// maximize | minimize
        #[arg(long)]
        objective: Option<String>,
        #[arg(long)]
        realistic_delta: Option<f64>,
    },
    /// Monte Carlo study on a registered data-generating process.
    Simulate {
        /// fig1 | fig1-sym | null | dr-q-wrong | dr-g-wrong
        #[arg(long)]
        dgp: Option<String>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        reps: Option<usize>,
        /// Comma-separated: glm,sl,tmle,tmle_cv,rule
        #[arg(long)]
        estimators: Option<String>,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Positivity diagnostics from a propensity Super Learner.
    Diagnose {
        #[command(flatten)]
        data: DataArgs,
        /// Flagging threshold on min(g, 1 - g).
        #[arg(long)]
        delta: Option<f64>,
    },
    /// Cross-validated risks and weights of a Super Learner roster.
    CvReport {
        #[command(flatten)]
        data: DataArgs,
        /// outcome | propensity
        #[arg(long)]
        target: Option<String>,
    },
}

fn set_opt<T: ToString>(cfg: &mut RunConfig, key: &str, v: &Option<T>) -> Result<(), CliError> {
    match v {
        Some(v) => cfg.set(key, &v.to_string()),
        None => Ok(()),
    }
}

fn apply_data(cfg: &mut RunConfig, d: &DataArgs) -> Result<(), CliError> {
    set_opt(cfg, "data", &d.data.as_ref().map(|p| p.display()))?;
    set_opt(cfg, "schema", &d.schema)?;
    set_opt(cfg, "treatment", &d.treatment)?;
    set_opt(cfg, "outcome", &d.outcome)?;
    set_opt(cfg, "outcome_kind", &d.outcome_kind)?;
    set_opt(cfg, "out", &d.out.as_ref().map(|p| p.display()))?;
    set_opt(cfg, "q_roster", &d.q_roster)?;
    set_opt(cfg, "g_roster", &d.g_roster)?;
    set_opt(cfg, "folds", &d.folds)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        cfg.apply_file(&text)?;
    }
    set_opt(&mut cfg, "seed", &cli.seed)?;
    set_opt(&mut cfg, "threads", &cli.threads)?;

    match &cli.command {
        Command::Estimate {
            data,
            estimand,
            method,
            g_bound,
            fluctuation,
            variance_mode,
            sl_mode,
            level,
            objective,
            realistic_delta,
        } => {
            apply_data(&mut cfg, data)?;
            set_opt(&mut cfg, "estimand", estimand)?;
            set_opt(&mut cfg, "method", method)?;
            set_opt(&mut cfg, "g_bound", g_bound)?;
            set_opt(&mut cfg, "fluctuation", fluctuation)?;
            set_opt(&mut cfg, "variance_mode", variance_mode)?;
            set_opt(&mut cfg, "sl_mode", sl_mode)?;
            set_opt(&mut cfg, "level", level)?;
            set_opt(&mut cfg, "objective", objective)?;
            set_opt(&mut cfg, "realistic_delta", realistic_delta)?;
        }
        Command::Simulate {
            dgp,
            n,
            reps,
            estimators,
            out,
        } => {
            set_opt(&mut cfg, "dgp", dgp)?;
            set_opt(&mut cfg, "n", n)?;
            set_opt(&mut cfg, "reps", reps)?;
            set_opt(&mut cfg, "estimators", estimators)?;
            set_opt(&mut cfg, "out", &out.as_ref().map(|p| p.display()))?;
        }
        Command::Diagnose { data, delta } => {
            apply_data(&mut cfg, data)?;
            set_opt(&mut cfg, "delta", delta)?;
        }
        Command::CvReport { data, target } => {
            apply_data(&mut cfg, data)?;
            set_opt(&mut cfg, "target", target)?;
        }
    }

    if let Some(t) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Compute(e.to_string()))?;
    }

    match cli.command {
        Command::Estimate { .. } => commands::cmd_estimate(&cfg),
        Command::Simulate { .. } => commands::cmd_simulate(&cfg),
        Command::Diagnose { .. } => commands::cmd_diagnose(&cfg),
        Command::CvReport { .. } => commands::cmd_cv_report(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
