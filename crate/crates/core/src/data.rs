//! Observed-data unit `(W, A, Y)` and CSV ingestion.
//!
//! A [`Dataset`] holds `n` rows of covariates `W` (an `n x p` matrix, `p` may
//! be zero), a binary treatment `A` and a real outcome `Y`. Missing values are
//! rejected at parse time; there is no imputation.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::io::Read;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeKind {
    Continuous,
    Binary,
}

impl OutcomeKind {
    /// `Binary` when every value is exactly 0 or 1.
    pub fn detect(y: &[f64]) -> OutcomeKind {
        if !y.is_empty() && y.iter().all(|&v| v == 0.0 || v == 1.0) {
            OutcomeKind::Binary
        } else {
            OutcomeKind::Continuous
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub covariate_names: Vec<String>,
    pub treatment_name: String,
    pub outcome_name: String,
    pub outcome_kind: OutcomeKind,
}

impl ColumnSchema {
    pub fn new<S: Into<String>>(
        covariates: impl IntoIterator<Item = S>,
        treatment: impl Into<String>,
        outcome: impl Into<String>,
        outcome_kind: OutcomeKind,
    ) -> Result<ColumnSchema> {
        let schema = ColumnSchema {
            covariate_names: covariates.into_iter().map(Into::into).collect(),
            treatment_name: treatment.into(),
            outcome_name: outcome.into(),
            outcome_kind,
        };
        schema.check()?;
        Ok(schema)
    }

    fn check(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for name in self
            .covariate_names
            .iter()
            .chain([&self.treatment_name, &self.outcome_name])
        {
            if name.is_empty() {
                return Err(Error::BadSchema("empty column name".into()));
            }
            if !seen.insert(name.as_str()) {
                return Err(Error::BadSchema(format!("column `{name}` appears twice")));
            }
        }
        Ok(())
    }
}

/// A single-time-point observational dataset. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: ColumnSchema,
    covariates: DMatrix<f64>,
    treatment: Vec<u8>,
    outcome: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Violation {
    Empty,
    LengthMismatch {
        column: String,
        expected: usize,
        found: usize,
    },
    NonFiniteCovariate {
        row: usize,
        col: usize,
    },
    BadTreatment(usize),
    NonFiniteOutcome(usize),
    BinaryOutcomeViolation(usize),
}

impl Dataset {
    /// Builds a dataset and rejects it if [`validate_dataset`] finds anything.
    pub fn new(
        schema: ColumnSchema,
        covariates: DMatrix<f64>,
        treatment: Vec<u8>,
        outcome: Vec<f64>,
    ) -> Result<Dataset> {
        schema.check()?;
        let ds = Dataset::from_parts_unchecked(schema, covariates, treatment, outcome);
        let violations = validate_dataset(&ds);
        if let Some(first) = violations.first() {
            return Err(Error::InvalidDataset(format!(
                "{} violation(s), first: {first:?}",
                violations.len()
            )));
        }
        Ok(ds)
    }

    /// Covariates named `w1..wp`, treatment `A`, outcome `Y`, outcome kind
    /// detected from the values.
    pub fn from_columns(covariates: DMatrix<f64>, treatment: Vec<u8>, outcome: Vec<f64>) -> Result<Dataset> {
        let names = (1..=covariates.ncols()).map(|j| format!("w{j}"));
        let schema = ColumnSchema::new(names, "A", "Y", OutcomeKind::detect(&outcome))?;
        Dataset::new(schema, covariates, treatment, outcome)
    }

    /// Assembles a dataset without checking invariants. Use [`validate_dataset`]
    /// to inspect the result.
    pub fn from_parts_unchecked(
        schema: ColumnSchema,
        covariates: DMatrix<f64>,
        treatment: Vec<u8>,
        outcome: Vec<f64>,
    ) -> Dataset {
        Dataset {
            schema,
            covariates,
            treatment,
            outcome,
        }
    }

    pub fn n(&self) -> usize {
        self.outcome.len()
    }

    pub fn p(&self) -> usize {
        self.covariates.ncols()
    }

    pub fn schema(&self) -> &ColumnSchema {
        &self.schema
    }

    pub fn outcome_kind(&self) -> OutcomeKind {
        self.schema.outcome_kind
    }

    pub fn covariates(&self) -> &DMatrix<f64> {
        &self.covariates
    }

    pub fn treatment(&self) -> &[u8] {
        &self.treatment
    }

    pub fn treatment_f64(&self) -> Vec<f64> {
        self.treatment.iter().map(|&a| f64::from(a)).collect()
    }

    pub fn outcome(&self) -> &[f64] {
        &self.outcome
    }

    pub fn n_treated(&self) -> usize {
        self.treatment.iter().filter(|&&a| a == 1).count()
    }

    pub fn both_arms_present(&self) -> bool {
        let n1 = self.n_treated();
        n1 > 0 && n1 < self.n()
    }

    /// Rows `idx`, in the given order.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            covariates: self.covariates.select_rows(idx),
            treatment: idx.iter().map(|&i| self.treatment[i]).collect(),
            outcome: idx.iter().map(|&i| self.outcome[i]).collect(),
        }
    }

    /// Same rows with a replaced outcome vector.
    pub fn with_outcome(&self, outcome: Vec<f64>, kind: OutcomeKind) -> Result<Dataset> {
        let mut schema = self.schema.clone();
        schema.outcome_kind = kind;
        Dataset::new(schema, self.covariates.clone(), self.treatment.clone(), outcome)
    }
}

/// Every invariant violation, in row order. Never mutates.
pub fn validate_dataset(ds: &Dataset) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = ds.outcome.len();
    if n == 0 {
        out.push(Violation::Empty);
    }
    if ds.treatment.len() != n {
        out.push(Violation::LengthMismatch {
            column: ds.schema.treatment_name.clone(),
            expected: n,
            found: ds.treatment.len(),
        });
    }
    if ds.covariates.nrows() != n {
        out.push(Violation::LengthMismatch {
            column: "covariates".into(),
            expected: n,
            found: ds.covariates.nrows(),
        });
    }
    if ds.covariates.ncols() != ds.schema.covariate_names.len() {
        out.push(Violation::LengthMismatch {
            column: "covariate names".into(),
            expected: ds.covariates.ncols(),
            found: ds.schema.covariate_names.len(),
        });
    }
    for i in 0..ds.covariates.nrows() {
        for j in 0..ds.covariates.ncols() {
            if !ds.covariates[(i, j)].is_finite() {
                out.push(Violation::NonFiniteCovariate { row: i, col: j });
            }
        }
    }
    for (i, &a) in ds.treatment.iter().enumerate() {
        if a > 1 {
            out.push(Violation::BadTreatment(i));
        }
    }
    for (i, &y) in ds.outcome.iter().enumerate() {
        if !y.is_finite() {
            out.push(Violation::NonFiniteOutcome(i));
        } else if ds.schema.outcome_kind == OutcomeKind::Binary && y != 0.0 && y != 1.0 {
            out.push(Violation::BinaryOutcomeViolation(i));
        }
    }
    out
}

/// Reads a header-first, comma-separated numeric file. Data rows are numbered
/// from 1 in error messages.
pub fn parse_csv<R: Read>(reader: R, schema: &ColumnSchema) -> Result<Dataset> {
    schema.check()?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Csv(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let locate = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let cov_idx = schema
        .covariate_names
        .iter()
        .map(|c| locate(c))
        .collect::<Result<Vec<_>>>()?;
    let a_idx = locate(&schema.treatment_name)?;
    let y_idx = locate(&schema.outcome_name)?;

    let mut w = Vec::new();
    let mut a = Vec::new();
    let mut y = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let row = r + 1;
        let record = record.map_err(|e| Error::Csv(e.to_string()))?;
        if record.len() == 1 && record.get(0) == Some("") {
            continue;
        }
        if record.len() != header.len() {
            return Err(Error::RaggedRow {
                row,
                expected: header.len(),
                found: record.len(),
            });
        }
        let cell = |idx: usize| -> Result<f64> {
            let raw = &record[idx];
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::NonNumericCell {
                    row,
                    col: header[idx].clone(),
                    value: raw.to_string(),
                }),
            }
        };
        for &j in &cov_idx {
            w.push(cell(j)?);
        }
        a.push(match cell(a_idx)? {
            v if v == 0.0 => 0u8,
            v if v == 1.0 => 1u8,
            _ => return Err(Error::BadTreatmentValue(row)),
        });
        let yv = cell(y_idx)?;
        if schema.outcome_kind == OutcomeKind::Binary && yv != 0.0 && yv != 1.0 {
            return Err(Error::BadOutcomeValue(row));
        }
        y.push(yv);
    }
    if y.is_empty() {
        return Err(Error::EmptyBody);
    }
    let covariates = DMatrix::from_row_slice(y.len(), cov_idx.len(), &w);
    Dataset::new(schema.clone(), covariates, a, y)
}

pub fn parse_csv_str(text: &str, schema: &ColumnSchema) -> Result<Dataset> {
    parse_csv(text.as_bytes(), schema)
}

/// Renders `ds` as CSV (covariates, treatment, outcome) with 17 significant
/// digits, which parses back bit-for-bit.
pub fn to_csv_string(ds: &Dataset) -> String {
    let s = &ds.schema;
    let mut out = String::new();
    let header: Vec<&str> = s
        .covariate_names
        .iter()
        .map(String::as_str)
        .chain([s.treatment_name.as_str(), s.outcome_name.as_str()])
        .collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for i in 0..ds.n() {
        for j in 0..ds.p() {
            let _ = write!(out, "{:.16e},", ds.covariates[(i, j)]);
        }
        let _ = writeln!(out, "{},{:.16e}", ds.treatment[i], ds.outcome[i]);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ColumnSummary {
    pub name: String,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetSummary {
    pub n: usize,
    pub columns: Vec<ColumnSummary>,
    pub treated_fraction: f64,
}

fn column_summary(name: &str, values: impl Iterator<Item = f64>) -> ColumnSummary {
    let (mut sum, mut min, mut max, mut count) = (0.0, f64::INFINITY, f64::NEG_INFINITY, 0usize);
    for v in values {
        sum += v;
        min = min.min(v);
        max = max.max(v);
        count += 1;
    }
    ColumnSummary {
        name: name.to_string(),
        mean: sum / count as f64,
        min,
        max,
    }
}

/// Per-column mean/min/max for covariates and outcome, plus the treated share.
pub fn summarize(ds: &Dataset) -> DatasetSummary {
    let mut columns: Vec<ColumnSummary> = ds
        .schema
        .covariate_names
        .iter()
        .enumerate()
        .map(|(j, name)| column_summary(name, ds.covariates.column(j).iter().copied()))
        .collect();
    columns.push(column_summary(&ds.schema.outcome_name, ds.outcome.iter().copied()));
    DatasetSummary {
        n: ds.n(),
        columns,
        treated_fraction: ds.n_treated() as f64 / ds.n() as f64,
    }
}
