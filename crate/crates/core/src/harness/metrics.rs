//! Aggregate metrics over episode results.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::llm::{raw_expense, Role, TokenUsage};
use crate::orchestrator::{EpisodeResult, Method};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Up,
    Down,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Sr,
    Tr,
    Ar,
    As,
    Expense,
}

impl Metric {
    /// Which way is better. Checked against every published improvement cell.
    pub fn direction(&self) -> Direction {
        match self {
            Metric::Sr | Metric::Tr | Metric::Ar => Direction::Up,
            Metric::As | Metric::Expense => Direction::Down,
        }
    }

    pub fn column(&self) -> &'static str {
        match self {
            Metric::Sr => "SR",
            Metric::Tr => "TR",
            Metric::Ar => "AR",
            Metric::As => "AS",
            Metric::Expense => "Expense($)",
        }
    }
}

/// Relative improvement in percent, positive when `new` is better.
/// Undefined for a zero base.
pub fn improvement(base: f64, new: f64, direction: Direction) -> Option<f64> {
    if base == 0.0 || !base.is_finite() || !new.is_finite() {
        return None;
    }
    Some(match direction {
        Direction::Up => (new - base) / base * 100.0,
        Direction::Down => (base - new) / base * 100.0,
    })
}

/// How a suite is scored: binary success, or accumulated milestone reward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Scoring {
    #[default]
    Success,
    Reward,
}

impl Scoring {
    pub fn steps_mode(&self) -> StepsMode {
        match self {
            Scoring::Success => StepsMode::SuccessfulOnly,
            Scoring::Reward => StepsMode::ToFirstReward,
        }
    }

    /// Metrics that get an improvement column, in column order.
    pub fn imp_metrics(&self) -> [Metric; 3] {
        match self {
            Scoring::Success => [Metric::Sr, Metric::As, Metric::Expense],
            Scoring::Reward => [Metric::Ar, Metric::As, Metric::Expense],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepsMode {
    SuccessfulOnly,
    ToFirstReward,
}

/// Successes over tasks; `None` for an empty suite.
pub fn success_rate(results: &[EpisodeResult]) -> Option<f64> {
    if results.is_empty() {
        return None;
    }
    let ok = results.iter().filter(|r| r.success).count();
    Some(ok as f64 / results.len() as f64)
}

/// Mean exploitation steps; `None` when no task qualifies.
pub fn avg_steps(results: &[EpisodeResult], mode: StepsMode) -> Option<f64> {
    let steps: Vec<usize> = match mode {
        StepsMode::SuccessfulOnly => results.iter().filter(|r| r.success).map(|r| r.steps()).collect(),
        StepsMode::ToFirstReward => results.iter().filter_map(|r| r.first_reward_step).collect(),
    };
    if steps.is_empty() {
        None
    } else {
        Some(steps.iter().sum::<usize>() as f64 / steps.len() as f64)
    }
}

/// Tokens shown in the cost columns: the strong model's calls. Extraction
/// counts only when the strong model does it (everything but WESE).
pub fn cost_usage(result: &EpisodeResult) -> TokenUsage {
    let l = &result.ledger;
    let mut usage = l.usage_for(Role::StrongExplore) + l.usage_for(Role::StrongExploit);
    if !(result.method.decoupled() && !result.method.strong_explorer()) {
        usage += l.usage_for(Role::Extraction);
    }
    usage
}

/// Unrounded dollars over every role at the episode's prices.
pub fn expense_dollars(result: &EpisodeResult) -> f64 {
    let l = &result.ledger;
    Role::ALL
        .iter()
        .map(|r| raw_expense(l.usage_for(*r), l.prices.price(*r)))
        .sum()
}

/// One row of a results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub method: String,
    /// Row whose values the improvements are relative to.
    #[serde(default)]
    pub base: Option<String>,
    #[serde(default)]
    pub tasks: usize,
    #[serde(default)]
    pub sr: Option<f64>,
    #[serde(default)]
    pub tr: Option<f64>,
    #[serde(default)]
    pub ar: Option<f64>,
    #[serde(default, rename = "as")]
    pub avg_steps: Option<f64>,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub expense: f64,
    /// `None` values are undefined (zero base); absent keys mean no base row.
    #[serde(default)]
    pub imp: BTreeMap<Metric, Option<f64>>,
}

impl MetricRow {
    pub fn from_results(method: Method, results: &[EpisodeResult], scoring: Scoring) -> Self {
        let usage: TokenUsage = results.iter().map(cost_usage).sum();
        let tr: f64 = results.iter().map(|r| r.total_reward).sum();
        let reward = scoring == Scoring::Reward;
        MetricRow {
            method: method.label().to_string(),
            base: Some(method.base().label().to_string()),
            tasks: results.len(),
            sr: success_rate(results),
            tr: reward.then_some(tr),
            ar: (reward && !results.is_empty()).then(|| tr / results.len() as f64),
            avg_steps: avg_steps(results, scoring.steps_mode()),
            prompt_tokens: usage.prompt_tokens,
            completion_tokens: usage.completion_tokens,
            expense: results.iter().map(expense_dollars).sum(),
            imp: BTreeMap::new(),
        }
    }

    pub fn value(&self, metric: Metric) -> Option<f64> {
        match metric {
            Metric::Sr => self.sr,
            Metric::Tr => self.tr,
            Metric::Ar => self.ar,
            Metric::As => self.avg_steps,
            Metric::Expense => Some(self.expense),
        }
    }
}

/// Fills `imp` of every row whose base row is present in `rows`.
pub fn attach_improvements(rows: &mut [MetricRow], scoring: Scoring) {
    let bases: BTreeMap<String, MetricRow> = rows.iter().map(|r| (r.method.clone(), r.clone())).collect();
    for row in rows.iter_mut() {
        row.imp.clear();
        let Some(base) = row.base.as_ref().and_then(|b| bases.get(b)) else {
            continue;
        };
        for m in scoring.imp_metrics() {
            let imp = match (base.value(m), row.value(m)) {
                (Some(b), Some(n)) => improvement(b, n, m.direction()),
                _ => None,
            };
            row.imp.insert(m, imp);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn improvement_examples() {
        let close = |a: Option<f64>, b: f64| (a.unwrap() - b).abs() < 0.005;
        assert!(close(improvement(0.43, 0.63, Direction::Up), 46.51));
        assert!(close(improvement(10.83, 7.54, Direction::Down), 30.38));
        assert!(close(improvement(98.60, 146.69, Direction::Down), -48.77));
        assert_eq!(improvement(0.0, 1.0, Direction::Up), None);
        assert_eq!(improvement(3.0, 3.0, Direction::Down), Some(0.0));
    }

    #[test]
    fn registry_directions() {
        assert_eq!(Metric::Sr.direction(), Direction::Up);
        assert_eq!(Metric::Ar.direction(), Direction::Up);
        assert_eq!(Metric::As.direction(), Direction::Down);
        assert_eq!(Metric::Expense.direction(), Direction::Down);
    }
}
