use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("missing column `{0}` in header")]
    MissingColumn(String),
    #[error("non-numeric cell at row {row}, column `{col}`: {value:?}")]
    NonNumericCell { row: usize, col: String, value: String },
    #[error("treatment value at row {0} is not 0 or 1")]
    BadTreatmentValue(usize),
    #[error("binary outcome at row {0} is not 0 or 1")]
    BadOutcomeValue(usize),
    #[error("row {row} has {found} fields, header has {expected}")]
    RaggedRow { row: usize, expected: usize, found: usize },
    #[error("file has a header but no data rows")]
    EmptyBody,
    #[error("invalid column schema: {0}")]
    BadSchema(String),
    #[error("csv: {0}")]
    Csv(String),
    #[error("dataset is invalid: {0}")]
    InvalidDataset(String),

    #[error("learner `{0}` does not accept an offset")]
    OffsetUnsupported(String),
    #[error("cannot fit on zero observations")]
    EmptyData,
    #[error("non-finite value in learner input")]
    NonFiniteInput,
    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: String, found: String },
    #[error("invalid learner hyperparameter: {0}")]
    BadHyperparameter(String),
    #[error("unknown learner `{0}`")]
    UnknownLearner(String),

    #[error("fold count {v} must satisfy 2 <= V <= n = {n}")]
    BadFoldCount { v: usize, n: usize },
    #[error("loss {loss} is incompatible with the targets: {reason}")]
    LossTargetMismatch { loss: &'static str, reason: String },
    #[error("candidate `{candidate}` failed{}: {source}", fold.map(|f| format!(" on fold {f}")).unwrap_or_default())]
    Candidate {
        candidate: String,
        fold: Option<usize>,
        source: Box<Error>,
    },
    #[error("empty candidate roster")]
    EmptyRoster,

    #[error("only one treatment arm is present and no known propensity was supplied")]
    SingleArmData,
    #[error("degenerate fluctuation: clever covariate has zero norm but non-zero entries")]
    DegenerateFluctuation,
    #[error("need at least {needed} observations, found {found}")]
    TooFewObservations { needed: usize, found: usize },
    #[error("{0}")]
    InvalidConfig(String),

    #[error("estimand {0} is not supported here")]
    UnsupportedEstimand(String),
    #[error("invalid data-generating process: {0}")]
    InvalidDgp(String),
}

impl Error {
    pub(crate) fn in_candidate(self, candidate: &str, fold: Option<usize>) -> Error {
        Error::Candidate {
            candidate: candidate.to_string(),
            fold,
            source: Box::new(self),
        }
    }
}
