//! Fixed-volume ablation: runs that share V but split it differently between
//! N and L get the same prediction from the law, so any accuracy difference
//! among them is composition the V-form cannot see.

use serde::{Deserialize, Serialize};

use crate::corpus::RunRecord;
use crate::error::{Error, Result};
use crate::scaling_law::{predict, ScalingLawFit};

/// Maximum relative spread of V inside one ablation group.
pub const VOLUME_TOLERANCE: f64 = 0.005;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositionCell {
    pub n_examples: f64,
    pub mean_token_length: f64,
    pub count: usize,
    /// Mean of observed minus predicted accuracy.
    pub mean_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationGroup {
    pub mean_volume: f64,
    /// Largest (max − min) prediction among records sharing a model size.
    pub prediction_spread: f64,
    /// Largest (max − min) observed accuracy among records sharing a model size.
    pub observed_spread: f64,
    pub cells: Vec<CompositionCell>,
}

fn spread(values: impl Iterator<Item = f64>) -> f64 {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if hi >= lo {
        hi - lo
    } else {
        0.0
    }
}

pub fn ablation_fixed_volume(groups: &[Vec<RunRecord>], fit: &ScalingLawFit) -> Result<Vec<AblationGroup>> {
    groups
        .iter()
        .enumerate()
        .map(|(gi, group)| {
            if group.len() < 2 {
                return Err(Error::TooFewPoints {
                    needed: 2,
                    got: group.len(),
                });
            }
            let vols: Vec<f64> = group.iter().map(RunRecord::volume).collect();
            let (min, max) = vols
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
            if (max - min) / min > VOLUME_TOLERANCE {
                return Err(Error::VolumeMismatch {
                    group: gi,
                    min,
                    max,
                    tolerance: VOLUME_TOLERANCE,
                });
            }
            let preds: Vec<f64> = group.iter().map(|r| predict(fit, r.volume(), r.model_size)).collect();

            let mut sizes: Vec<f64> = group.iter().map(|r| r.model_size).collect();
            sizes.sort_by(f64::total_cmp);
            sizes.dedup();
            let mut prediction_spread = 0.0f64;
            let mut observed_spread = 0.0f64;
            for m in sizes {
                let at_m = || group.iter().zip(&preds).filter(move |(r, _)| r.model_size == m);
                prediction_spread = prediction_spread.max(spread(at_m().map(|(_, p)| *p)));
                observed_spread = observed_spread.max(spread(at_m().map(|(r, _)| r.accuracy)));
            }

            let mut cells: Vec<CompositionCell> = Vec::new();
            for (r, p) in group.iter().zip(&preds) {
                let resid = r.accuracy - p;
                match cells
                    .iter_mut()
                    .find(|c| c.n_examples == r.n_examples && c.mean_token_length == r.mean_token_length)
                {
                    Some(c) => {
                        c.mean_residual += resid;
                        c.count += 1;
                    }
                    None => cells.push(CompositionCell {
                        n_examples: r.n_examples,
                        mean_token_length: r.mean_token_length,
                        count: 1,
                        mean_residual: resid,
                    }),
                }
            }
            for c in &mut cells {
                c.mean_residual /= c.count as f64;
            }

            Ok(AblationGroup {
                mean_volume: vols.iter().sum::<f64>() / vols.len() as f64,
                prediction_spread,
                observed_spread,
                cells,
            })
        })
        .collect()
}

/// Clusters records whose volumes lie within [`VOLUME_TOLERANCE`] of the smallest volume in the cluster.
pub fn group_by_volume(records: &[RunRecord]) -> Vec<Vec<RunRecord>> {
    let mut sorted: Vec<&RunRecord> = records.iter().collect();
    sorted.sort_by(|a, b| a.volume().total_cmp(&b.volume()));
    let mut groups: Vec<Vec<RunRecord>> = Vec::new();
    for r in sorted {
        match groups.last_mut() {
            Some(g) if (r.volume() - g[0].volume()) / g[0].volume() <= VOLUME_TOLERANCE => g.push(r.clone()),
            _ => groups.push(vec![r.clone()]),
        }
    }
    groups
}
