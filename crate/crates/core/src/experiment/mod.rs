//! Analyses over collections of runs: per-strategy tables, published-table
//! checks, pooled versus per-strategy comparison, the fixed-volume ablation,
//! synthetic data and report emission.

pub mod ablation;
pub mod compare;
pub mod report;
pub mod synthetic;
pub mod table;

pub use ablation::{ablation_fixed_volume, group_by_volume, AblationGroup, CompositionCell};
pub use compare::{compare_pooled_vs_per_strategy, compare_pooled_vs_per_strategy_with, ComparisonReport, Winner};
pub use report::{emit_report, Manifest, ReportInputs};
pub use synthetic::{generate_synthetic, GridPoint, SyntheticRuns, SyntheticSpec};
pub use table::{build_strategy_table, validate_table_consistency, ConsistencyFlag, StrategyTableRow};
