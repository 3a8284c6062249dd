//! Budget-constrained selection of examples.
//!
//! Every strategy is a fixed ordering of the corpus followed by a greedy
//! prefix cut at the first example that would overflow the budget. Because the
//! ordering does not depend on the budget, a selection at a smaller budget is
//! always a prefix of the selection at a larger one.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{summary_from_totals, DatasetSummary, Example};
use crate::error::{Error, Result};
use crate::par::Execution;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Longest examples first.
    FewLong,
    /// Shortest examples first.
    ManyShort,
    /// Examples closest to the corpus median length first.
    Balanced,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::FewLong, Strategy::ManyShort, Strategy::Balanced];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::FewLong => "few_long",
            Strategy::ManyShort => "many_short",
            Strategy::Balanced => "balanced",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownStrategy(pub String);

impl fmt::Display for UnknownStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown strategy {:?} (expected few_long, many_short or balanced)", self.0)
    }
}

impl std::error::Error for UnknownStrategy {}

impl FromStr for Strategy {
    type Err = UnknownStrategy;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "few_long" => Ok(Strategy::FewLong),
            "many_short" => Ok(Strategy::ManyShort),
            "balanced" => Ok(Strategy::Balanced),
            _ => Err(UnknownStrategy(s.to_string())),
        }
    }
}

/// Twice the median token length, kept integral so even-sized corpora need no floats.
fn doubled_median(corpus: &[Example]) -> u128 {
    let mut lens: Vec<u64> = corpus.iter().map(|e| e.token_length).collect();
    lens.sort_unstable();
    let n = lens.len();
    if n % 2 == 1 {
        2 * lens[n / 2] as u128
    } else {
        lens[n / 2 - 1] as u128 + lens[n / 2] as u128
    }
}

fn tie_break(a: &Example, b: &Example) -> Ordering {
    a.token_length
        .cmp(&b.token_length)
        .then_with(|| a.id.cmp(&b.id))
}

/// Orders the corpus the way `strategy` consumes it.
pub fn canonical_order<'a>(corpus: &'a [Example], strategy: Strategy) -> Result<Vec<&'a Example>> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut order: Vec<&Example> = corpus.iter().collect();
    match strategy {
        Strategy::FewLong => order.sort_by(|a, b| {
            b.token_length
                .cmp(&a.token_length)
                .then_with(|| tie_break(a, b))
        }),
        Strategy::ManyShort => order.sort_by(|a, b| tie_break(a, b)),
        Strategy::Balanced => {
            let med2 = doubled_median(corpus);
            let dist = |e: &Example| (2 * e.token_length as u128).abs_diff(med2);
            order.sort_by(|a, b| dist(a).cmp(&dist(b)).then_with(|| tie_break(a, b)));
        }
    }
    Ok(order)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub strategy: Strategy,
    pub budget: u64,
    pub example_ids: Vec<String>,
    /// `None` when not even the first example fits.
    pub summary: Option<DatasetSummary>,
}

impl Selection {
    pub fn is_empty(&self) -> bool {
        self.example_ids.is_empty()
    }

    pub fn total_tokens(&self) -> u64 {
        self.summary.map_or(0, |s| s.total_tokens)
    }

    pub fn to_record(&self) -> SelectionRecord {
        SelectionRecord {
            strategy: self.strategy,
            budget_tokens: self.budget,
            example_ids: self.example_ids.clone(),
            n_examples: self.example_ids.len() as u64,
            mean_token_length: self.summary.map(|s| s.mean_token_length),
            volume: self.summary.map_or(0.0, |s| s.volume),
            total_tokens: self.total_tokens(),
        }
    }
}

/// JSON form of a [`Selection`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionRecord {
    pub strategy: Strategy,
    pub budget_tokens: u64,
    pub example_ids: Vec<String>,
    pub n_examples: u64,
    pub mean_token_length: Option<f64>,
    pub volume: f64,
    pub total_tokens: u64,
}

fn cut_prefix(order: &[&Example], strategy: Strategy, budget: u64) -> Selection {
    let mut total = 0u64;
    let mut ids = Vec::new();
    for e in order {
        match total.checked_add(e.token_length) {
            Some(t) if t <= budget => {
                total = t;
                ids.push(e.id.clone());
            }
            _ => break,
        }
    }
    let summary = (!ids.is_empty()).then(|| summary_from_totals(ids.len() as u64, total));
    Selection {
        strategy,
        budget,
        example_ids: ids,
        summary,
    }
}

/// Longest prefix of the canonical order that fits in `budget` tokens.
///
/// An empty corpus or a budget smaller than the first example gives an empty selection.
pub fn subsample(corpus: &[Example], strategy: Strategy, budget: u64) -> Selection {
    match canonical_order(corpus, strategy) {
        Ok(order) => cut_prefix(&order, strategy, budget),
        Err(_) => cut_prefix(&[], strategy, budget),
    }
}

/// Selections for several budgets sharing one canonical ordering.
pub fn subsample_many(
    corpus: &[Example],
    strategy: Strategy,
    budgets: &[u64],
    exec: Execution,
) -> Vec<Selection> {
    let order = canonical_order(corpus, strategy).unwrap_or_default();
    exec.map(budgets, |&b| cut_prefix(&order, strategy, b))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NestingViolation {
    /// Index of the smaller budget in the budget list.
    pub index: usize,
    pub smaller_budget: u64,
    pub larger_budget: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NestingReport {
    pub nested: bool,
    pub first_violation: Option<NestingViolation>,
}

/// Checks that each selection's ids are a prefix of the next selection's ids.
pub fn check_nested(selections: &[Selection]) -> NestingReport {
    let first_violation = selections.windows(2).enumerate().find_map(|(i, pair)| {
        let (small, large) = (&pair[0], &pair[1]);
        (!large.example_ids.starts_with(&small.example_ids)).then(|| NestingViolation {
            index: i,
            smaller_budget: small.budget,
            larger_budget: large.budget,
        })
    });
    NestingReport {
        nested: first_violation.is_none(),
        first_violation,
    }
}

pub fn nesting_check(corpus: &[Example], strategy: Strategy, budgets: &[u64]) -> Result<NestingReport> {
    for pair in budgets.windows(2) {
        if pair[1] <= pair[0] {
            return Err(Error::BudgetsNotAscending {
                prev: pair[0],
                next: pair[1],
            });
        }
    }
    let selections = subsample_many(corpus, strategy, budgets, Execution::default());
    Ok(check_nested(&selections))
}
