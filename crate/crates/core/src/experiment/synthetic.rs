use std::io::Read;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::corpus::{RunRecord, StrategyLabel};
use crate::error::{Error, Result};

/// One design point; its volume is `n_examples * mean_token_length`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub model_size: f64,
    pub strategy: String,
    pub n_examples: f64,
    pub mean_token_length: f64,
}

impl GridPoint {
    pub fn volume(&self) -> f64 {
        self.n_examples * self.mean_token_length
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub a: f64,
    pub beta: f64,
    pub gamma: f64,
    pub e: f64,
    pub noise_sigma: f64,
    pub seed: u64,
    pub grid: Vec<GridPoint>,
    /// Lower clip is `e + clip_margin`.
    pub clip_margin: f64,
}

impl SyntheticSpec {
    pub fn new(a: f64, beta: f64, gamma: f64, e: f64, grid: Vec<GridPoint>) -> Self {
        Self {
            a,
            beta,
            gamma,
            e,
            noise_sigma: 0.0,
            seed: 0,
            grid,
            clip_margin: 1e-6,
        }
    }

    pub fn with_noise(mut self, sigma: f64, seed: u64) -> Self {
        self.noise_sigma = sigma;
        self.seed = seed;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticRuns {
    pub records: Vec<RunRecord>,
    /// Accuracies moved into `(E + margin, 1]`.
    pub clipped: usize,
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticRuns> {
    if spec.grid.is_empty() {
        return Err(Error::Synthetic("empty grid".into()));
    }
    if !(spec.noise_sigma >= 0.0 && spec.noise_sigma.is_finite()) {
        return Err(Error::Synthetic(format!("noise_sigma must be >= 0, got {}", spec.noise_sigma)));
    }
    if let Some(p) = spec
        .grid
        .iter()
        .find(|p| !(p.model_size > 0.0 && p.n_examples > 0.0 && p.mean_token_length > 0.0))
    {
        return Err(Error::Synthetic(format!("grid point with non-positive field: {p:?}")));
    }
    let lower = spec.e + spec.clip_margin;
    if !(lower < 1.0) {
        return Err(Error::Synthetic(format!("E={} leaves no room below accuracy 1", spec.e)));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let normal = (spec.noise_sigma > 0.0)
        .then(|| Normal::new(0.0, spec.noise_sigma).expect("sigma validated"));

    let mut clipped = 0;
    let records: Vec<RunRecord> = spec
        .grid
        .iter()
        .map(|p| {
            let clean = spec.a * p.volume().powf(spec.beta) * p.model_size.powf(spec.gamma) + spec.e;
            let noisy = clean + normal.as_ref().map_or(0.0, |d| d.sample(&mut rng));
            let accuracy = if noisy < lower {
                clipped += 1;
                lower
            } else if noisy > 1.0 {
                clipped += 1;
                1.0
            } else {
                noisy
            };
            RunRecord {
                model_size: p.model_size,
                strategy: StrategyLabel::parse_lenient(&p.strategy),
                budget: None,
                n_examples: p.n_examples,
                mean_token_length: p.mean_token_length,
                accuracy,
            }
        })
        .collect();

    if clipped == records.len() {
        return Err(Error::Synthetic(format!(
            "all {clipped} generated accuracies fell outside (E + margin, 1]"
        )));
    }
    if clipped > 0 {
        log::warn!("clipped {clipped} of {} synthetic accuracies", records.len());
    }
    Ok(SyntheticRuns { records, clipped })
}

/// Cartesian grid: every (model size, volume, strategy), with N = V / L for a fixed L.
pub fn cartesian_grid(model_sizes: &[f64], volumes: &[f64], strategies: &[&str], mean_token_length: f64) -> Vec<GridPoint> {
    let mut grid = Vec::with_capacity(model_sizes.len() * volumes.len() * strategies.len());
    for s in strategies {
        for &m in model_sizes {
            for &v in volumes {
                grid.push(GridPoint {
                    model_size: m,
                    strategy: s.to_string(),
                    n_examples: v / mean_token_length,
                    mean_token_length,
                });
            }
        }
    }
    grid
}

/// `n` volumes spaced geometrically over `[lo, hi]`.
pub fn geometric_volumes(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let ratio = (hi / lo).ln() / (n - 1) as f64;
    (0..n).map(|i| lo * (ratio * i as f64).exp()).collect()
}

pub const GRID_COLUMNS: [&str; 4] = ["model_size_m", "strategy", "n_examples", "mean_token_length"];

/// Reads a grid file with header `model_size_m,strategy,n_examples,mean_token_length`.
pub fn read_grid<R: Read>(reader: R) -> Result<Vec<GridPoint>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let names: Vec<&str> = headers.iter().collect();
    if names != GRID_COLUMNS {
        return Err(Error::BadHeader(format!(
            "expected {}, got {}",
            GRID_COLUMNS.join(","),
            names.join(",")
        )));
    }
    let mut grid = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let num = |k: usize| -> Result<f64> {
            let raw = rec.get(k).unwrap_or("");
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite() && *v > 0.0)
                .ok_or_else(|| Error::BadRow {
                    row: i + 1,
                    message: format!("{}: expected a positive number, got {raw:?}", GRID_COLUMNS[k]),
                })
        };
        grid.push(GridPoint {
            model_size: num(0)?,
            strategy: rec.get(1).unwrap_or("").to_string(),
            n_examples: num(2)?,
            mean_token_length: num(3)?,
        });
    }
    Ok(grid)
}
