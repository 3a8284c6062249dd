//! Composition-aware (one fit per strategy) versus composition-blind (one
//! pooled fit) scaling laws, judged by leave-one-out prediction error.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::table::group_by_strategy;
use crate::corpus::RunRecord;
use crate::error::{Error, Result};
use crate::par::Execution;
use crate::scaling_law::{fit_grid_with, predict, FitConfig};

/// Records needed per strategy: four to fit plus one held out.
pub const MIN_RECORDS_PER_STRATEGY: usize = 5;
/// Relative RMSE difference below which the comparison is a tie.
pub const TIE_RELATIVE: f64 = 1e-9;
/// Both leave-one-out RMSEs below this count as an exact-law tie.
pub const TIE_ABSOLUTE: f64 = 1e-8;

pub const POOLED_LABEL: &str = "pooled";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Winner {
    PerStrategy,
    Pooled,
    Tie,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub per_strategy_rmse: BTreeMap<String, f64>,
    pub pooled_rmse: f64,
    pub per_strategy_loo_rmse: BTreeMap<String, f64>,
    pub pooled_loo_rmse: f64,
    /// In-sample RMSE of the per-strategy fits over all records.
    pub per_strategy_overall_rmse: f64,
    /// Leave-one-out RMSE of the per-strategy fits over all records.
    pub per_strategy_overall_loo_rmse: f64,
    pub winner: Winner,
    pub config_echo: FitConfig,
}

pub fn decide_winner(per_strategy_loo: f64, pooled_loo: f64) -> Winner {
    let hi = per_strategy_loo.max(pooled_loo);
    if hi < TIE_ABSOLUTE || (per_strategy_loo - pooled_loo).abs() <= TIE_RELATIVE * hi {
        Winner::Tie
    } else if per_strategy_loo < pooled_loo {
        Winner::PerStrategy
    } else {
        Winner::Pooled
    }
}

fn rmse(sq_errors: &[f64]) -> f64 {
    (sq_errors.iter().sum::<f64>() / sq_errors.len() as f64).sqrt()
}

pub fn compare_pooled_vs_per_strategy(records: &[RunRecord], config: &FitConfig) -> Result<ComparisonReport> {
    compare_pooled_vs_per_strategy_with(records, config, Execution::default())
}

pub fn compare_pooled_vs_per_strategy_with(
    records: &[RunRecord],
    config: &FitConfig,
    exec: Execution,
) -> Result<ComparisonReport> {
    let groups: Vec<(String, Vec<RunRecord>)> = group_by_strategy(records)
        .into_iter()
        .map(|(label, rows)| (label.as_str().to_string(), rows.into_iter().cloned().collect()))
        .collect();
    if groups.is_empty() {
        return Err(Error::InsufficientRecords {
            strategy: POOLED_LABEL.into(),
            got: 0,
            needed: MIN_RECORDS_PER_STRATEGY,
        });
    }
    for (label, rows) in &groups {
        if rows.len() < MIN_RECORDS_PER_STRATEGY {
            return Err(Error::InsufficientRecords {
                strategy: label.clone(),
                got: rows.len(),
                needed: MIN_RECORDS_PER_STRATEGY,
            });
        }
    }

    // Index `groups.len()` stands for the pooled set.
    let pooled: Vec<RunRecord> = groups.iter().flat_map(|(_, rows)| rows.iter().cloned()).collect();
    let set = |g: usize| -> (&str, &[RunRecord]) {
        if g < groups.len() {
            (&groups[g].0, &groups[g].1)
        } else {
            (POOLED_LABEL, &pooled)
        }
    };

    // Full fits, then every leave-one-out fold, as one flat job list.
    let mut jobs: Vec<(usize, Option<usize>)> = (0..=groups.len()).map(|g| (g, None)).collect();
    for g in 0..=groups.len() {
        jobs.extend((0..set(g).1.len()).map(|i| (g, Some(i))));
    }
    let results = exec.map(&jobs, |&(g, held_out)| -> Result<f64> {
        let (label, rows) = set(g);
        match held_out {
            None => fit_grid_with(rows, config, label, Execution::Sequential).map(|f| f.rmse_accuracy),
            Some(i) => {
                let train: Vec<RunRecord> = rows
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, r)| r.clone())
                    .collect();
                let fit = fit_grid_with(&train, config, label, Execution::Sequential)?;
                let r = &rows[i];
                Ok((predict(&fit, r.volume(), r.model_size) - r.accuracy).powi(2))
            }
        }
    });

    let mut in_sample = vec![0.0; groups.len() + 1];
    let mut loo_sq: Vec<Vec<f64>> = vec![Vec::new(); groups.len() + 1];
    for (&(g, held_out), res) in jobs.iter().zip(results) {
        let v = res?;
        match held_out {
            None => in_sample[g] = v,
            Some(_) => loo_sq[g].push(v),
        }
    }

    let mut per_strategy_rmse = BTreeMap::new();
    let mut per_strategy_loo_rmse = BTreeMap::new();
    let mut in_sample_sq = 0.0;
    let mut all_loo = Vec::new();
    for (g, (label, rows)) in groups.iter().enumerate() {
        per_strategy_rmse.insert(label.clone(), in_sample[g]);
        per_strategy_loo_rmse.insert(label.clone(), rmse(&loo_sq[g]));
        in_sample_sq += in_sample[g].powi(2) * rows.len() as f64;
        all_loo.extend_from_slice(&loo_sq[g]);
    }
    let per_strategy_overall_loo_rmse = rmse(&all_loo);
    let pooled_loo_rmse = rmse(&loo_sq[groups.len()]);

    Ok(ComparisonReport {
        per_strategy_rmse,
        pooled_rmse: in_sample[groups.len()],
        per_strategy_loo_rmse,
        pooled_loo_rmse,
        per_strategy_overall_rmse: (in_sample_sq / pooled.len() as f64).sqrt(),
        per_strategy_overall_loo_rmse,
        winner: decide_winner(per_strategy_overall_loo_rmse, pooled_loo_rmse),
        config_echo: *config,
    })
}
