use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::compare::ComparisonReport;
use super::table::{write_strategy_table, StrategyTableRow};
use crate::error::{Error, Result};
use crate::scaling_law::{EfficiencyPoint, ScalingLawFit};

pub const STRATEGY_TABLE_FILE: &str = "strategy_table.csv";
pub const EFFICIENCY_FILE: &str = "efficiency.csv";
pub const COMPARISON_FILE: &str = "comparison.json";
pub const MANIFEST_FILE: &str = "manifest.json";

pub const EFFICIENCY_COLUMNS: [&str; 3] = ["model_size_m", "strategy", "eta_norm"];

#[derive(Debug, Clone, Default)]
pub struct ReportInputs<'a> {
    pub fits: &'a [ScalingLawFit],
    pub table: Option<&'a [StrategyTableRow]>,
    pub efficiency: Option<&'a [EfficiencyPoint]>,
    pub comparison: Option<&'a ComparisonReport>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub files: Vec<ManifestEntry>,
}

/// File-name-safe form of a strategy label.
pub fn file_stem(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

pub fn fit_file_name(fit: &ScalingLawFit) -> String {
    format!("fit_{}.json", file_stem(&fit.strategy_label))
}

pub fn to_json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(value)?;
    out.push(b'\n');
    Ok(out)
}

pub fn efficiency_csv(points: &[EfficiencyPoint]) -> Result<Vec<u8>> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(EFFICIENCY_COLUMNS)?;
    for p in points {
        wtr.write_record([p.model_size.to_string(), p.strategy_label.clone(), p.eta_norm.to_string()])?;
    }
    wtr.into_inner().map_err(|e| Error::io("<efficiency>", e.into_error()))
}

pub fn strategy_table_csv(rows: &[StrategyTableRow]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_strategy_table(&mut buf, rows)?;
    Ok(buf)
}

/// Renders every artifact in memory, in a fixed order.
pub fn render_report(inputs: &ReportInputs<'_>) -> Result<Vec<(String, Vec<u8>)>> {
    let mut files = Vec::new();
    for fit in inputs.fits {
        files.push((fit_file_name(fit), to_json_bytes(fit)?));
    }
    if let Some(rows) = inputs.table {
        files.push((STRATEGY_TABLE_FILE.to_string(), strategy_table_csv(rows)?));
    }
    if let Some(points) = inputs.efficiency {
        files.push((EFFICIENCY_FILE.to_string(), efficiency_csv(points)?));
    }
    if let Some(cmp) = inputs.comparison {
        files.push((COMPARISON_FILE.to_string(), to_json_bytes(cmp)?));
    }
    if files.is_empty() {
        return Err(Error::NothingToEmit);
    }
    Ok(files)
}

pub fn manifest_for(files: &[(String, Vec<u8>)]) -> Manifest {
    let mut entries: Vec<ManifestEntry> = files
        .iter()
        .map(|(name, bytes)| ManifestEntry {
            file: name.clone(),
            sha256: format!("{:x}", Sha256::digest(bytes)),
            bytes: bytes.len() as u64,
        })
        .collect();
    entries.sort_by(|a, b| a.file.cmp(&b.file));
    Manifest { files: entries }
}

/// Writes all artifacts plus a manifest. With several artifacts a manifest is always added.
pub fn emit_report(dir: &Path, inputs: &ReportInputs<'_>, overwrite: bool) -> Result<Manifest> {
    let mut files = render_report(inputs)?;
    let manifest = manifest_for(&files);
    files.push((MANIFEST_FILE.to_string(), to_json_bytes(&manifest)?));
    write_files(dir, &files, overwrite)?;
    Ok(manifest)
}

/// Writes each file via a temporary sibling and a rename, all or nothing.
///
/// Existing targets are refused unless `overwrite` is set; the check happens
/// before anything is written.
pub fn write_files(dir: &Path, files: &[(String, Vec<u8>)], overwrite: bool) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let targets: Vec<PathBuf> = files.iter().map(|(name, _)| dir.join(name)).collect();
    if !overwrite {
        if let Some(t) = targets.iter().find(|t| t.exists()) {
            return Err(Error::WouldOverwrite(t.clone()));
        }
    }

    let mut temps: Vec<PathBuf> = Vec::new();
    let cleanup = |temps: &[PathBuf]| {
        for t in temps {
            let _ = std::fs::remove_file(t);
        }
    };
    for ((name, bytes), target) in files.iter().zip(&targets) {
        let tmp = dir.join(format!(".{name}.tmp"));
        let res = std::fs::File::create(&tmp).and_then(|mut f| {
            f.write_all(bytes)?;
            f.sync_all()
        });
        temps.push(tmp.clone());
        if let Err(e) = res {
            cleanup(&temps);
            return Err(Error::io(target, e));
        }
    }
    for (i, (tmp, target)) in temps.iter().zip(&targets).enumerate() {
        if let Err(e) = std::fs::rename(tmp, target) {
            cleanup(&temps[i..]);
            for done in &targets[..i] {
                let _ = std::fs::remove_file(done);
            }
            return Err(Error::io(target, e));
        }
    }
    Ok(targets)
}
