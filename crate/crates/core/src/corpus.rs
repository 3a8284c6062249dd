//! Data model for example corpora and observed fine-tuning runs.
//!
//! Two on-disk formats are handled here:
//!
//! * examples files: one JSON object per line with `id`, optional
//!   `token_length` and optional `text`;
//! * run tables: CSV with the header
//!   `model_size_m,strategy,budget_tokens,n_examples,mean_token_length,accuracy`.

use std::collections::HashSet;
use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::subsample::Strategy;

/// One training item.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Example {
    pub id: String,
    pub token_length: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
}

impl Example {
    pub fn new(id: impl Into<String>, token_length: u64) -> Self {
        Self {
            id: id.into(),
            token_length,
            text: None,
        }
    }
}

/// Whitespace token count used when a record carries no precomputed length.
///
/// Empty (or all-whitespace) text still occupies one token slot.
pub fn approximate_token_count(text: &str) -> u64 {
    (text.split_whitespace().count() as u64).max(1)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExample {
    id: String,
    #[serde(default)]
    token_length: Option<i64>,
    #[serde(default)]
    text: Option<String>,
}

pub fn load_examples(path: impl AsRef<Path>) -> Result<Vec<Example>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_examples(file, path)
}

/// Parses JSON-lines examples from any reader; `origin` is used in error messages.
pub fn read_examples<R: Read>(reader: R, origin: &Path) -> Result<Vec<Example>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in BufReader::new(reader).lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(origin, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawExample = serde_json::from_str(&line).map_err(|e| Error::MalformedLine {
            path: origin.to_path_buf(),
            line: line_no,
            message: e.to_string(),
        })?;
        let token_length = match (raw.token_length, raw.text.as_deref()) {
            (Some(n), _) if n < 1 => {
                return Err(Error::InvalidTokenLength {
                    id: raw.id,
                    value: n,
                })
            }
            (Some(n), _) => n as u64,
            (None, Some(text)) => approximate_token_count(text),
            (None, None) => return Err(Error::MissingLength(raw.id)),
        };
        if !seen.insert(raw.id.clone()) {
            return Err(Error::DuplicateId(raw.id));
        }
        out.push(Example {
            id: raw.id,
            token_length,
            text: raw.text,
        });
    }
    Ok(out)
}

/// Writes examples in canonical JSON-lines form (`id`, `token_length`, `text`).
pub fn write_examples<W: Write>(mut writer: W, examples: &[Example]) -> std::io::Result<()> {
    for example in examples {
        serde_json::to_writer(&mut writer, example)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

/// Aggregate size of a selection: count N, mean length L and volume V = N·L.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub n_examples: u64,
    pub mean_token_length: f64,
    pub volume: f64,
    pub total_tokens: u64,
}

/// Summarizes a non-empty selection.
///
/// `volume` is stored as the exact token total; `n_examples * mean_token_length`
/// agrees with it up to one rounding of the division.
pub fn summarize(selection: &[Example]) -> Result<DatasetSummary> {
    if selection.is_empty() {
        return Err(Error::EmptySelection);
    }
    let total: u64 = selection.iter().map(|e| e.token_length).sum();
    Ok(summary_from_totals(selection.len() as u64, total))
}

pub(crate) fn summary_from_totals(n: u64, total: u64) -> DatasetSummary {
    DatasetSummary {
        n_examples: n,
        mean_token_length: total as f64 / n as f64,
        volume: total as f64,
        total_tokens: total,
    }
}

/// Strategy column of a run table. Unknown names are preserved verbatim.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StrategyLabel {
    Known(Strategy),
    Other(String),
}

impl StrategyLabel {
    pub fn as_str(&self) -> &str {
        match self {
            StrategyLabel::Known(s) => s.as_str(),
            StrategyLabel::Other(name) => name,
        }
    }

    /// Parses case-insensitively; unrecognised names become `Other` with a warning.
    pub fn parse_lenient(name: &str) -> Self {
        match name.trim().parse::<Strategy>() {
            Ok(s) => StrategyLabel::Known(s),
            Err(_) => {
                log::warn!("unknown strategy {name:?}, keeping it as an `other` label");
                StrategyLabel::Other(name.trim().to_string())
            }
        }
    }

    /// Ordering used for reports: the three known strategies first, then the rest by name.
    pub(crate) fn report_rank(&self) -> (u8, &str) {
        match self {
            StrategyLabel::Known(Strategy::FewLong) => (0, ""),
            StrategyLabel::Known(Strategy::ManyShort) => (1, ""),
            StrategyLabel::Known(Strategy::Balanced) => (2, ""),
            StrategyLabel::Other(name) => (3, name),
        }
    }
}

impl From<Strategy> for StrategyLabel {
    fn from(s: Strategy) -> Self {
        StrategyLabel::Known(s)
    }
}

impl fmt::Display for StrategyLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One observed fine-tuning outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    /// Model size in millions of parameters.
    pub model_size: f64,
    pub strategy: StrategyLabel,
    pub budget: Option<u64>,
    pub n_examples: f64,
    pub mean_token_length: f64,
    pub accuracy: f64,
}

impl RunRecord {
    pub fn volume(&self) -> f64 {
        self.n_examples * self.mean_token_length
    }
}

pub const RUN_COLUMNS: [&str; 6] = [
    "model_size_m",
    "strategy",
    "budget_tokens",
    "n_examples",
    "mean_token_length",
    "accuracy",
];

pub fn load_runs(path: impl AsRef<Path>) -> Result<Vec<RunRecord>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_runs(file)
}

pub fn read_runs<R: Read>(reader: R) -> Result<Vec<RunRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut index = [usize::MAX; 6];
    for (pos, name) in headers.iter().enumerate() {
        match RUN_COLUMNS.iter().position(|c| *c == name) {
            Some(slot) if index[slot] == usize::MAX => index[slot] = pos,
            Some(_) => return Err(Error::BadHeader(format!("duplicate column {name:?}"))),
            None => return Err(Error::BadHeader(format!("unknown column {name:?}"))),
        }
    }
    if let Some(slot) = index.iter().position(|&i| i == usize::MAX) {
        return Err(Error::BadHeader(format!(
            "missing column {:?}",
            RUN_COLUMNS[slot]
        )));
    }

    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        // 1-based data row, header excluded
        let row_no = i + 1;
        let row = row?;
        let field = |slot: usize| row.get(index[slot]).unwrap_or("");
        let bad = |message: String| Error::BadRow {
            row: row_no,
            message,
        };
        let positive = |slot: usize| -> Result<f64> {
            let raw = field(slot);
            let v: f64 = raw
                .parse()
                .map_err(|_| bad(format!("{}: not a number: {raw:?}", RUN_COLUMNS[slot])))?;
            if !(v.is_finite() && v > 0.0) {
                return Err(bad(format!("{} must be positive, got {v}", RUN_COLUMNS[slot])));
            }
            Ok(v)
        };

        let model_size = positive(0)?;
        let strategy = StrategyLabel::parse_lenient(field(1));
        let budget = match field(2) {
            "" => None,
            raw => {
                let b: u64 = raw
                    .parse()
                    .map_err(|_| bad(format!("budget_tokens: not an integer: {raw:?}")))?;
                if b == 0 {
                    return Err(bad("budget_tokens must be positive, got 0".into()));
                }
                Some(b)
            }
        };
        let n_examples = positive(3)?;
        let mean_token_length = positive(4)?;
        let raw_acc = field(5);
        let accuracy: f64 = raw_acc
            .parse()
            .map_err(|_| bad(format!("accuracy: not a number: {raw_acc:?}")))?;
        if !(accuracy > 0.0 && accuracy <= 1.0) {
            return Err(bad(format!("accuracy {accuracy} outside (0, 1]")));
        }
        out.push(RunRecord {
            model_size,
            strategy,
            budget,
            n_examples,
            mean_token_length,
            accuracy,
        });
    }
    Ok(out)
}

/// Writes a run table. Floats use the shortest representation that round-trips.
pub fn write_runs<W: Write>(writer: W, records: &[RunRecord]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(RUN_COLUMNS)?;
    for r in records {
        wtr.write_record([
            r.model_size.to_string(),
            r.strategy.as_str().to_string(),
            r.budget.map(|b| b.to_string()).unwrap_or_default(),
            r.n_examples.to_string(),
            r.mean_token_length.to_string(),
            r.accuracy.to_string(),
        ])?;
    }
    wtr.flush().map_err(|e| Error::io("<run table>", e))?;
    Ok(())
}

impl FromStr for StrategyLabel {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(StrategyLabel::parse_lenient(s))
    }
}
