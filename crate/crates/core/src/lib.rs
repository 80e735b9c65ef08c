//! Targeted learning toolkit: Super Learner ensembles, targeted maximum
//! likelihood estimation with influence-curve inference, treatment-rule
//! learning, positivity diagnostics and a Monte Carlo harness.

pub mod data;
pub mod error;
pub mod learners;
pub mod rng;
pub mod rules;
pub mod simulation;
pub mod stats;
pub mod super_learner;
pub mod tmle;

pub use data::{ColumnSchema, Dataset, OutcomeKind};
pub use error::{Error, Result};
pub use learners::{Basis, FittedLearner, Inputs, LearnerSpec};
