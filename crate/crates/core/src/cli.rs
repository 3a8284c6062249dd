//! `volscale` command-line front end.
//!
//! Exit status: 0 on success, 1 on usage errors, 2 on data or validation
//! errors. Errors are printed on stderr as a single `error[<code>]: ...` line.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::corpus::{load_examples, load_runs, write_runs, RunRecord};
use crate::error::Error;
use crate::experiment::compare::POOLED_LABEL;
use crate::experiment::report::{self, fit_file_name, to_json_bytes, write_files, ReportInputs};
use crate::experiment::synthetic::read_grid;
use crate::experiment::table::read_published_table;
use crate::experiment::{
    build_strategy_table, compare_pooled_vs_per_strategy, generate_synthetic, validate_table_consistency,
    SyntheticSpec,
};
use crate::par::Execution;
use crate::scaling_law::{fit_grid, predict, token_efficiency, EfficiencyPoint, FitConfig, ScalingLawFit};
use crate::subsample::{check_nested, subsample_many, Strategy};

pub const RUNS_FILE: &str = "runs.csv";

#[derive(Debug, Parser)]
#[command(name = "volscale", version, about = "Composition-aware scaling-law fitting for fine-tuning runs")]
pub struct Cli {
    /// Directory receiving output files.
    #[arg(long, global = true, default_value = "./out")]
    pub output_dir: PathBuf,

    /// Overwrite existing output files.
    #[arg(long, global = true)]
    pub force: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Select examples under one or more token budgets.
    Subsample {
        #[arg(long)]
        examples: PathBuf,
        #[arg(long)]
        strategy: Strategy,
        #[arg(long, conflicts_with = "budgets", required_unless_present = "budgets")]
        budget: Option<u64>,
        /// Comma-separated ascending budgets; also emits a nesting check.
        #[arg(long, value_delimiter = ',')]
        budgets: Option<Vec<u64>>,
    },
    /// Fit the scaling law to a run table.
    Fit {
        #[arg(long)]
        runs: PathBuf,
        /// One fit per strategy (default).
        #[arg(long, conflicts_with = "pooled")]
        per_strategy: bool,
        /// One fit over all records.
        #[arg(long)]
        pooled: bool,
        #[command(flatten)]
        fit: FitFlags,
    },
    /// Predict accuracy from a fit file.
    Predict {
        #[arg(long)]
        fit: PathBuf,
        #[arg(long)]
        volume: f64,
        #[arg(long)]
        model_size: f64,
    },
    /// Normalized token efficiency of each run.
    Efficiency {
        /// Fit file(s); a fit is matched to runs by strategy, a pooled fit covers the rest.
        #[arg(long, required = true)]
        fit: Vec<PathBuf>,
        #[arg(long)]
        runs: PathBuf,
    },
    /// Per-strategy means of a run table.
    Table {
        #[arg(long)]
        runs: PathBuf,
    },
    /// Pooled versus per-strategy fits under leave-one-out.
    Compare {
        #[arg(long)]
        runs: PathBuf,
        #[command(flatten)]
        fit: FitFlags,
    },
    /// Generate a synthetic run table from known parameters.
    Simulate {
        #[arg(long)]
        a: f64,
        #[arg(long, allow_negative_numbers = true)]
        beta: f64,
        #[arg(long, allow_negative_numbers = true)]
        gamma: f64,
        #[arg(long)]
        e: f64,
        #[arg(long, default_value_t = 0.0)]
        sigma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        grid: PathBuf,
    },
    /// Check N·L against reported volumes in a transcribed table.
    Validate {
        #[arg(long)]
        table: PathBuf,
        #[arg(long)]
        tolerance: f64,
    },
    /// Full bundle: per-strategy and pooled fits, table, efficiency, comparison and manifest.
    Report {
        #[arg(long)]
        runs: PathBuf,
        #[command(flatten)]
        fit: FitFlags,
    },
}

#[derive(Debug, Args, Default)]
pub struct FitFlags {
    /// JSON file with FitConfig fields; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub e_min: Option<f64>,
    #[arg(long)]
    pub e_max: Option<f64>,
    #[arg(long)]
    pub e_step: Option<f64>,
    #[arg(long)]
    pub huber_delta: Option<f64>,
}

impl FitFlags {
    /// Defaults, then the config file, then flags.
    pub fn resolve(&self) -> Result<FitConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => {
                let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
                serde_json::from_slice(&bytes)?
            }
            None => FitConfig::default(),
        };
        if let Some(v) = self.e_min {
            cfg.e_grid_min = v;
        }
        if let Some(v) = self.e_max {
            cfg.e_grid_max = v;
        }
        if let Some(v) = self.e_step {
            cfg.e_grid_step = v;
        }
        if let Some(v) = self.huber_delta {
            cfg.huber_delta = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Data(Error),
    /// Validation ran and raised flags.
    Flags(usize),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Data(e)
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    0
                }
                _ => {
                    let _ = write!(err, "{}", e.render());
                    1
                }
            };
        }
    };
    match execute(&cli, out) {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(err, "error[usage]: {msg}");
            1
        }
        Err(Failure::Data(e)) => {
            let _ = writeln!(err, "error[{}]: {}", e.code(), single_line(&e.to_string()));
            2
        }
        Err(Failure::Flags(n)) => {
            let _ = writeln!(err, "error[inconsistent-table]: {n} row(s) flagged");
            2
        }
    }
}

fn single_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn emit(cli: &Cli, files: Vec<(String, Vec<u8>)>, out: &mut dyn Write) -> Result<(), Failure> {
    let written = write_files(&cli.output_dir, &files, cli.force)?;
    for path in written {
        let _ = writeln!(out, "{}", path.display());
    }
    Ok(())
}

fn read_fit(path: &Path) -> Result<ScalingLawFit, Error> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_slice(&bytes)?)
}

/// Per-strategy fits in report order, or a single pooled fit.
fn fit_records(records: &[RunRecord], config: &FitConfig, pooled: bool) -> Result<Vec<ScalingLawFit>, Error> {
    if pooled {
        return Ok(vec![fit_grid(records, config, POOLED_LABEL)?]);
    }
    crate::experiment::table::group_by_strategy(records)
        .into_iter()
        .map(|(label, rows)| {
            let rows: Vec<RunRecord> = rows.into_iter().cloned().collect();
            fit_grid(&rows, config, label.as_str())
        })
        .collect()
}

fn efficiency_points(fits: &[ScalingLawFit], records: &[RunRecord]) -> Vec<EfficiencyPoint> {
    let fallback = fits
        .iter()
        .find(|f| f.strategy_label == POOLED_LABEL)
        .or(if fits.len() == 1 { fits.first() } else { None });
    records
        .iter()
        .filter_map(|r| {
            let fit = fits
                .iter()
                .find(|f| f.strategy_label == r.strategy.as_str())
                .or(fallback);
            let Some(fit) = fit else {
                log::warn!("no fit for strategy {:?}; run skipped", r.strategy.as_str());
                return None;
            };
            match token_efficiency(fit, r) {
                Ok(p) => Some(p),
                Err(e) => {
                    log::warn!("{e}");
                    None
                }
            }
        })
        .collect()
}

fn execute(cli: &Cli, out: &mut dyn Write) -> Result<(), Failure> {
    match &cli.command {
        Command::Subsample {
            examples,
            strategy,
            budget,
            budgets,
        } => {
            let corpus = load_examples(examples)?;
            let budgets: Vec<u64> = match (budget, budgets) {
                (Some(b), _) => vec![*b],
                (None, Some(bs)) => bs.clone(),
                (None, None) => return Err(Failure::Usage("--budget or --budgets is required".into())),
            };
            if budgets.iter().any(|&b| b == 0) {
                return Err(Failure::Usage("budgets must be positive".into()));
            }
            for pair in budgets.windows(2) {
                if pair[1] <= pair[0] {
                    return Err(Error::BudgetsNotAscending {
                        prev: pair[0],
                        next: pair[1],
                    }
                    .into());
                }
            }
            let selections = subsample_many(&corpus, *strategy, &budgets, Execution::default());
            let mut files = Vec::new();
            for s in &selections {
                files.push((
                    format!("selection_{}_{}.json", strategy.as_str(), s.budget),
                    to_json_bytes(&s.to_record())?,
                ));
            }
            if selections.len() > 1 {
                files.push((
                    format!("nesting_{}.json", strategy.as_str()),
                    to_json_bytes(&check_nested(&selections))?,
                ));
            }
            emit(cli, files, out)
        }
        Command::Fit {
            runs,
            per_strategy: _,
            pooled,
            fit,
        } => {
            let config = fit.resolve()?;
            let records = load_runs(runs)?;
            let fits = fit_records(&records, &config, *pooled)?;
            let files = fits
                .iter()
                .map(|f| Ok((fit_file_name(f), to_json_bytes(f)?)))
                .collect::<Result<Vec<_>, Error>>()?;
            emit(cli, files, out)
        }
        Command::Predict {
            fit,
            volume,
            model_size,
        } => {
            if !(*volume > 0.0 && *model_size > 0.0) {
                return Err(Failure::Usage("--volume and --model-size must be positive".into()));
            }
            let fit = read_fit(fit)?;
            let acc = predict(&fit, *volume, *model_size);
            if acc > 1.0 {
                log::warn!("predicted accuracy {acc} exceeds 1");
            }
            let _ = writeln!(out, "{acc}");
            Ok(())
        }
        Command::Efficiency { fit, runs } => {
            let fits = fit.iter().map(|p| read_fit(p)).collect::<Result<Vec<_>, _>>()?;
            let records = load_runs(runs)?;
            let points = efficiency_points(&fits, &records);
            emit(cli, vec![(report::EFFICIENCY_FILE.into(), report::efficiency_csv(&points)?)], out)
        }
        Command::Table { runs } => {
            let records = load_runs(runs)?;
            let rows = build_strategy_table(&records);
            emit(cli, vec![(report::STRATEGY_TABLE_FILE.into(), report::strategy_table_csv(&rows)?)], out)
        }
        Command::Compare { runs, fit } => {
            let config = fit.resolve()?;
            let records = load_runs(runs)?;
            let cmp = compare_pooled_vs_per_strategy(&records, &config)?;
            emit(cli, vec![(report::COMPARISON_FILE.into(), to_json_bytes(&cmp)?)], out)
        }
        Command::Simulate {
            a,
            beta,
            gamma,
            e,
            sigma,
            seed,
            grid,
        } => {
            let file = std::fs::File::open(grid).map_err(|err| Error::io(grid, err))?;
            let grid = read_grid(file)?;
            let spec = SyntheticSpec::new(*a, *beta, *gamma, *e, grid).with_noise(*sigma, *seed);
            let runs = generate_synthetic(&spec)?;
            let mut buf = Vec::new();
            write_runs(&mut buf, &runs.records)?;
            emit(cli, vec![(RUNS_FILE.into(), buf)], out)
        }
        Command::Validate { table, tolerance } => {
            if !(*tolerance >= 0.0) {
                return Err(Failure::Usage("--tolerance must be non-negative".into()));
            }
            let file = std::fs::File::open(table).map_err(|err| Error::io(table, err))?;
            let (rows, reported) = read_published_table(file)?;
            let flags = validate_table_consistency(&rows, &reported, *tolerance)?;
            for f in &flags {
                let _ = writeln!(out, "{}", serde_json::to_string(f).map_err(Error::from)?);
            }
            if flags.is_empty() {
                Ok(())
            } else {
                Err(Failure::Flags(flags.len()))
            }
        }
        Command::Report { runs, fit } => {
            let config = fit.resolve()?;
            let records = load_runs(runs)?;
            let mut fits = fit_records(&records, &config, false)?;
            let pooled = fit_grid(&records, &config, POOLED_LABEL)?;
            let points = efficiency_points(&fits, &records);
            fits.push(pooled);
            let table = build_strategy_table(&records);
            let cmp = compare_pooled_vs_per_strategy(&records, &config)?;
            let inputs = ReportInputs {
                fits: &fits,
                table: Some(&table),
                efficiency: Some(&points),
                comparison: Some(&cmp),
            };
            let mut files = report::render_report(&inputs)?;
            let manifest = report::manifest_for(&files);
            files.push((report::MANIFEST_FILE.into(), to_json_bytes(&manifest)?));
            emit(cli, files, out)
        }
    }
}
