//! Fitting `accuracy = A · V^β · M^γ + E`.
//!
//! For each candidate offset E on a grid, the law is linearized as
//! `ln(accuracy − E) = ln A + β ln V + γ ln M` and fitted with a Huber-loss
//! IRLS regression. The E whose back-transformed predictions have the lowest
//! RMSE in accuracy space wins.

use serde::{Deserialize, Serialize};

use crate::corpus::RunRecord;
use crate::error::{Error, Result};
use crate::linalg::{self, weighted_lstsq, LstsqError, P};
use crate::par::Execution;

/// Consistency constant turning a median absolute deviation into a normal-scale estimate.
pub const MAD_TO_SIGMA: f64 = 1.4826;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub e_grid_min: f64,
    pub e_grid_max: f64,
    pub e_grid_step: f64,
    /// Huber threshold on MAD-standardized residuals.
    pub huber_delta: f64,
    pub irls_max_iter: usize,
    pub irls_tol: f64,
    pub positivity_margin: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            e_grid_min: 0.20,
            e_grid_max: 0.30,
            e_grid_step: 0.005,
            huber_delta: 1.345,
            irls_max_iter: 100,
            irls_tol: 1e-10,
            positivity_margin: 1e-6,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if !(self.e_grid_min.is_finite() && self.e_grid_max.is_finite()) {
            return bad("E grid bounds must be finite");
        }
        if self.e_grid_min > self.e_grid_max {
            return bad("e_grid_min must not exceed e_grid_max");
        }
        if !(self.e_grid_step > 0.0 && self.e_grid_step.is_finite()) {
            return bad("e_grid_step must be positive");
        }
        if !(self.huber_delta > 0.0) {
            return bad("huber_delta must be positive");
        }
        if self.irls_max_iter == 0 {
            return bad("irls_max_iter must be positive");
        }
        if !(self.irls_tol > 0.0) {
            return bad("irls_tol must be positive");
        }
        if !(self.positivity_margin > 0.0) {
            return bad("positivity_margin must be positive");
        }
        Ok(())
    }

    /// Grid offsets from `e_grid_min` to `e_grid_max` inclusive.
    ///
    /// Points are rounded to 12 decimals so that e.g. 0.25 lands exactly on 0.25.
    pub fn e_grid(&self) -> Vec<f64> {
        let steps = ((self.e_grid_max - self.e_grid_min) / self.e_grid_step + 1e-9).floor() as usize;
        (0..=steps)
            .map(|k| {
                let e = self.e_grid_min + k as f64 * self.e_grid_step;
                (e * 1e12).round() / 1e12
            })
            .collect()
    }
}

/// Design matrix rows `(1, ln V, ln M)` and responses `ln(accuracy − E)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedData {
    pub rows: Vec<[f64; P]>,
    pub responses: Vec<f64>,
}

pub fn linearize(records: &[RunRecord], e: f64, margin: f64) -> Result<LinearizedData> {
    let mut rows = Vec::with_capacity(records.len());
    let mut responses = Vec::with_capacity(records.len());
    for (index, r) in records.iter().enumerate() {
        let gap = r.accuracy - e;
        if !(gap >= margin) {
            return Err(Error::Positivity {
                index,
                accuracy: r.accuracy,
                e,
                margin,
            });
        }
        rows.push([1.0, r.volume().ln(), r.model_size.ln()]);
        responses.push(gap.ln());
    }
    Ok(LinearizedData { rows, responses })
}

/// Huber loss with threshold `c` on a raw residual; `c = ∞` is plain squared loss.
pub fn huber(r: f64, c: f64) -> f64 {
    let a = r.abs();
    if a <= c {
        0.5 * r * r
    } else {
        c * (a - 0.5 * c)
    }
}

/// Robust residual scale: MAD about the median, times [`MAD_TO_SIGMA`].
pub fn mad_scale(residuals: &[f64]) -> f64 {
    let mut v = residuals.to_vec();
    let center = linalg::median(&mut v);
    let mut dev: Vec<f64> = residuals.iter().map(|r| (r - center).abs()).collect();
    MAD_TO_SIGMA * linalg::median(&mut dev)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HuberFit {
    /// `[ln A, β, γ]`
    pub coefficients: [f64; P],
    pub iterations: usize,
    pub converged: bool,
    /// Residual scale used by the last reweighting.
    pub scale: f64,
    /// Huber loss of the final residuals at threshold `δ · scale`.
    pub loss: f64,
    /// Per iteration: objective before and after the weighted solve, both at that iteration's scale.
    pub descent: Vec<(f64, f64)>,
}

fn residuals(data: &LinearizedData, coef: &[f64; P]) -> Vec<f64> {
    data.rows
        .iter()
        .zip(&data.responses)
        .map(|(x, y)| y - (x[0] * coef[0] + x[1] * coef[1] + x[2] * coef[2]))
        .collect()
}

fn threshold(scale: f64, delta: f64) -> f64 {
    // a vanishing scale means the data sit on the fit; use plain least squares
    if scale.is_finite() && scale > f64::MIN_POSITIVE {
        delta * scale
    } else {
        f64::INFINITY
    }
}

fn objective(res: &[f64], c: f64) -> f64 {
    res.iter().map(|&r| huber(r, c)).sum()
}

fn check_columns(data: &LinearizedData) -> Result<()> {
    for (col, name) in [(1, "ln V (all records share one volume)"), (2, "ln M (all records share one model size)")] {
        let first = data.rows[0][col];
        let spread = data
            .rows
            .iter()
            .map(|r| (r[col] - first).abs())
            .fold(0.0, f64::max);
        if spread <= 1e-12 * (1.0 + first.abs()) {
            return Err(Error::DegenerateDesign(format!("constant column {name}")));
        }
    }
    Ok(())
}

fn solve(data: &LinearizedData, w: &[f64]) -> Result<[f64; P]> {
    weighted_lstsq(&data.rows, &data.responses, w).map_err(|LstsqError::RankDeficient(col)| {
        let name = ["intercept", "ln V", "ln M"][col];
        Error::DegenerateDesign(format!("column {name} is collinear with the others"))
    })
}

/// Ordinary least squares on the linearized data.
pub fn fit_ols(data: &LinearizedData) -> Result<[f64; P]> {
    check_min_points(data.rows.len())?;
    check_columns(data)?;
    solve(data, &vec![1.0; data.rows.len()])
}

fn check_min_points(n: usize) -> Result<()> {
    if n < P + 1 {
        return Err(Error::TooFewPoints { needed: P + 1, got: n });
    }
    Ok(())
}

/// Huber regression by iteratively reweighted least squares, started from OLS.
pub fn fit_huber(data: &LinearizedData, config: &FitConfig) -> Result<HuberFit> {
    let mut coef = fit_ols(data)?;
    let mut descent = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut scale = mad_scale(&residuals(data, &coef));

    while iterations < config.irls_max_iter {
        iterations += 1;
        let res = residuals(data, &coef);
        scale = mad_scale(&res);
        let c = threshold(scale, config.huber_delta);
        let w: Vec<f64> = res
            .iter()
            .map(|r| if r.abs() <= c { 1.0 } else { c / r.abs() })
            .collect();
        let next = solve(data, &w)?;
        descent.push((objective(&res, c), objective(&residuals(data, &next), c)));
        let change = (0..P).map(|j| (next[j] - coef[j]).abs()).fold(0.0, f64::max);
        coef = next;
        if change < config.irls_tol {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!(
            "IRLS did not converge in {} iterations; keeping last iterate",
            config.irls_max_iter
        );
    }
    debug_assert_eq!(descent.len(), iterations);
    let loss = objective(&residuals(data, &coef), threshold(scale, config.huber_delta));
    Ok(HuberFit {
        coefficients: coef,
        iterations,
        converged,
        scale,
        loss,
        descent,
    })
}

/// Fitted law plus diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingLawFit {
    #[serde(rename = "strategy")]
    pub strategy_label: String,
    #[serde(rename = "A")]
    pub a: f64,
    pub beta: f64,
    pub gamma: f64,
    #[serde(rename = "E")]
    pub e: f64,
    pub rmse_accuracy: f64,
    pub huber_loss_log: f64,
    pub n_points: usize,
    #[serde(rename = "config_echo")]
    pub config: FitConfig,
}

impl ScalingLawFit {
    /// A law with the given parameters and no fit diagnostics, e.g. for prediction.
    pub fn from_params(a: f64, beta: f64, gamma: f64, e: f64) -> Self {
        Self {
            strategy_label: "manual".into(),
            a,
            beta,
            gamma,
            e,
            rmse_accuracy: 0.0,
            huber_loss_log: 0.0,
            n_points: 0,
            config: FitConfig::default(),
        }
    }

    pub fn predict(&self, volume: f64, model_size: f64) -> f64 {
        predict(self, volume, model_size)
    }
}

/// `A · V^β · M^γ + E`, unclamped.
pub fn predict(fit: &ScalingLawFit, volume: f64, model_size: f64) -> f64 {
    fit.a * volume.powf(fit.beta) * model_size.powf(fit.gamma) + fit.e
}

/// Fit at one fixed offset E.
pub fn fit_at(records: &[RunRecord], e: f64, config: &FitConfig, label: &str) -> Result<ScalingLawFit> {
    let data = linearize(records, e, config.positivity_margin)?;
    let huber_fit = fit_huber(&data, config)?;
    let [ln_a, beta, gamma] = huber_fit.coefficients;
    let a = ln_a.exp();
    let sse: f64 = records
        .iter()
        .zip(&data.rows)
        .map(|(r, x)| {
            let pred = (ln_a + beta * x[1] + gamma * x[2]).exp() + e;
            (pred - r.accuracy).powi(2)
        })
        .sum();
    Ok(ScalingLawFit {
        strategy_label: label.to_string(),
        a,
        beta,
        gamma,
        e,
        rmse_accuracy: (sse / records.len() as f64).sqrt(),
        huber_loss_log: huber_fit.loss,
        n_points: records.len(),
        config: *config,
    })
}

pub fn fit_grid(records: &[RunRecord], config: &FitConfig, label: &str) -> Result<ScalingLawFit> {
    fit_grid_with(records, config, label, Execution::default())
}

/// Grid search over E; the winner minimizes accuracy-space RMSE, ties going to the smaller E.
pub fn fit_grid_with(
    records: &[RunRecord],
    config: &FitConfig,
    label: &str,
    exec: Execution,
) -> Result<ScalingLawFit> {
    config.validate()?;
    check_min_points(records.len())?;
    let min_acc = records.iter().map(|r| r.accuracy).fold(f64::INFINITY, f64::min);
    let feasible: Vec<f64> = config
        .e_grid()
        .into_iter()
        .filter(|e| min_acc - e >= config.positivity_margin)
        .collect();
    if feasible.is_empty() {
        return Err(Error::InfeasibleGrid {
            e_min: config.e_grid_min,
            e_max: config.e_grid_max,
            min_accuracy: min_acc,
        });
    }

    let candidates = exec.map(&feasible, |&e| fit_at(records, e, config, label));
    let mut best: Option<ScalingLawFit> = None;
    for cand in candidates {
        let cand = cand?;
        let better = match &best {
            None => true,
            Some(b) => cand
                .rmse_accuracy
                .total_cmp(&b.rmse_accuracy)
                .then(cand.e.total_cmp(&b.e))
                .is_lt(),
        };
        if better {
            best = Some(cand);
        }
    }
    Ok(best.expect("feasible grid is non-empty"))
}

/// Normalized token efficiency of one observed run under a fitted law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyPoint {
    pub model_size: f64,
    pub strategy_label: String,
    pub eta_norm: f64,
}

/// `(accuracy − E) / (V · M^γ)`.
pub fn token_efficiency(fit: &ScalingLawFit, record: &RunRecord) -> Result<EfficiencyPoint> {
    if !(record.accuracy > fit.e) {
        return Err(Error::ExcludedPoint {
            accuracy: record.accuracy,
            e: fit.e,
        });
    }
    let eta = (record.accuracy - fit.e) / (record.volume() * record.model_size.powf(fit.gamma));
    Ok(EfficiencyPoint {
        model_size: record.model_size,
        strategy_label: record.strategy.as_str().to_string(),
        eta_norm: eta,
    })
}
