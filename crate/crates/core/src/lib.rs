//! Composition-aware scaling laws for fine-tuning under token budgets.
//!
//! Training data is described by its volume `V = N · L` (example count times
//! mean token length) and accuracy is modelled as `A · V^β · M^γ + E` for a
//! model of `M` million parameters. The crate covers budgeted subsampling of
//! example corpora, robust fitting of the law, prediction, normalized token
//! efficiency and the pooled-versus-per-strategy comparison.
//!
//! The `parallel` feature (on by default) runs the E grid, leave-one-out
//! refits and budget sweeps on rayon; results are identical either way.

pub mod cli;
pub mod corpus;
pub mod error;
pub mod experiment;
mod linalg;
pub mod par;
pub mod scaling_law;
pub mod subsample;

pub use corpus::{approximate_token_count, load_examples, load_runs, summarize, DatasetSummary, Example, RunRecord, StrategyLabel};
pub use error::{Error, Result};
pub use par::Execution;
pub use scaling_law::{fit_grid, fit_huber, linearize, predict, token_efficiency, EfficiencyPoint, FitConfig, ScalingLawFit};
pub use subsample::{canonical_order, nesting_check, subsample, Selection, Strategy};
