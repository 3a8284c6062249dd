use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::corpus::{RunRecord, StrategyLabel};
use crate::error::{Error, Result};

/// Per-strategy means over a set of runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyTableRow {
    #[serde(rename = "strategy")]
    pub strategy_label: String,
    pub mean_n: f64,
    pub mean_l: f64,
    pub mean_volume: f64,
    pub mean_accuracy: f64,
}

/// Groups records by strategy in report order (few_long, many_short, balanced, others by name).
pub(crate) fn group_by_strategy(records: &[RunRecord]) -> Vec<(StrategyLabel, Vec<&RunRecord>)> {
    let mut groups: BTreeMap<(u8, String), (StrategyLabel, Vec<&RunRecord>)> = BTreeMap::new();
    for r in records {
        let (rank, name) = r.strategy.report_rank();
        groups
            .entry((rank, name.to_string()))
            .or_insert_with(|| (r.strategy.clone(), Vec::new()))
            .1
            .push(r);
    }
    groups.into_values().collect()
}

/// Arithmetic means per strategy; volume per record is recomputed as N·L.
pub fn build_strategy_table(records: &[RunRecord]) -> Vec<StrategyTableRow> {
    group_by_strategy(records)
        .into_iter()
        .map(|(label, rows)| {
            let n = rows.len() as f64;
            let mean = |f: fn(&RunRecord) -> f64| rows.iter().map(|r| f(r)).sum::<f64>() / n;
            StrategyTableRow {
                strategy_label: label.as_str().to_string(),
                mean_n: mean(|r| r.n_examples),
                mean_l: mean(|r| r.mean_token_length),
                mean_volume: mean(RunRecord::volume),
                mean_accuracy: mean(|r| r.accuracy),
            }
        })
        .collect()
}

pub const TABLE_COLUMNS: [&str; 5] = ["strategy", "mean_n", "mean_l", "mean_volume", "mean_accuracy"];

pub fn write_strategy_table<W: Write>(writer: W, rows: &[StrategyTableRow]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(TABLE_COLUMNS)?;
    for r in rows {
        wtr.write_record([
            r.strategy_label.clone(),
            r.mean_n.to_string(),
            r.mean_l.to_string(),
            r.mean_volume.to_string(),
            r.mean_accuracy.to_string(),
        ])?;
    }
    wtr.flush().map_err(|e| Error::io("<strategy table>", e))?;
    Ok(())
}

/// A published row flagged because N·L disagrees with its reported volume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyFlag {
    pub row: usize,
    pub strategy: String,
    pub product: f64,
    pub reported_volume: f64,
    pub relative_deviation: f64,
}

pub fn validate_table_consistency(
    rows: &[StrategyTableRow],
    reported_volumes: &[f64],
    rel_tol: f64,
) -> Result<Vec<ConsistencyFlag>> {
    if rows.len() != reported_volumes.len() {
        return Err(Error::LengthMismatch {
            rows: rows.len(),
            reported: reported_volumes.len(),
        });
    }
    Ok(rows
        .iter()
        .zip(reported_volumes)
        .enumerate()
        .filter_map(|(i, (row, &reported))| {
            let product = row.mean_n * row.mean_l;
            let dev = (product - reported).abs() / reported;
            (dev > rel_tol).then(|| ConsistencyFlag {
                row: i,
                strategy: row.strategy_label.clone(),
                product,
                reported_volume: reported,
                relative_deviation: dev,
            })
        })
        .collect())
}

/// Header of a published-table file: `strategy,mean_n,mean_l,reported_volume,mean_accuracy`.
pub const PUBLISHED_COLUMNS: [&str; 5] = ["strategy", "mean_n", "mean_l", "reported_volume", "mean_accuracy"];

/// Reads a transcribed published table. `mean_volume` of each row is set to N·L.
pub fn read_published_table<R: Read>(reader: R) -> Result<(Vec<StrategyTableRow>, Vec<f64>)> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let names: Vec<&str> = headers.iter().collect();
    if names != PUBLISHED_COLUMNS {
        return Err(Error::BadHeader(format!(
            "expected {}, got {}",
            PUBLISHED_COLUMNS.join(","),
            names.join(",")
        )));
    }
    let mut rows = Vec::new();
    let mut reported = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let num = |k: usize| -> Result<f64> {
            let raw = rec.get(k).unwrap_or("");
            raw.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| Error::BadRow {
                row: i + 1,
                message: format!("{}: not a number: {raw:?}", PUBLISHED_COLUMNS[k]),
            })
        };
        let (n, l) = (num(1)?, num(2)?);
        let volume = num(3)?;
        if !(volume > 0.0) {
            return Err(Error::BadRow {
                row: i + 1,
                message: "reported_volume must be positive".into(),
            });
        }
        rows.push(StrategyTableRow {
            strategy_label: rec.get(0).unwrap_or("").to_string(),
            mean_n: n,
            mean_l: l,
            mean_volume: n * l,
            mean_accuracy: num(4)?,
        });
        reported.push(volume);
    }
    Ok((rows, reported))
}
