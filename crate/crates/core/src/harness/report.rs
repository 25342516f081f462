//! Run reports and their table/json/csv renderings.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::metrics::{Direction, Metric, MetricRow, Scoring};
use crate::env::EnvKind;
use crate::llm::TokenUsage;
use crate::orchestrator::Method;

pub const REPORT_FORMAT_VERSION: &str = "1.0";

/// Per-task line of a report, pointing at the full episode file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskOutcome {
    pub task_id: String,
    /// Path of the episode result, relative to the run directory.
    pub file: String,
    pub success: bool,
    pub steps: usize,
    pub first_reward_step: Option<usize>,
    pub total_reward: f64,
    /// Tokens counted in the cost columns.
    pub usage: TokenUsage,
    pub expense: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Counters about how a run went, not part of its results.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunStats {
    pub executed: usize,
    pub resumed: usize,
    pub backend_calls: usize,
    pub wall_clock_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub format_version: String,
    pub repo_version: String,
    pub method: Method,
    pub env: EnvKind,
    pub scoring: Scoring,
    pub config: serde_json::Value,
    pub tasks: Vec<TaskOutcome>,
    /// Tasks never started because the dollar budget ran out.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub skipped: Vec<String>,
    pub rows: Vec<MetricRow>,
    /// Kept out of `report.json` so replay runs are byte-identical.
    #[serde(skip)]
    pub stats: RunStats,
}

impl RunReport {
    pub fn table(&self) -> ReportTable {
        ReportTable {
            scoring: self.scoring,
            rows: self.rows.clone(),
        }
    }

    pub fn all_succeeded(&self) -> bool {
        self.skipped.is_empty() && self.tasks.iter().all(|t| t.success)
    }
}

/// Rows sharing one scoring scheme, rendered together.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportTable {
    pub scoring: Scoring,
    pub rows: Vec<MetricRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Table,
    Json,
    Csv,
}

impl FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "table" => Ok(Format::Table),
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            other => Err(format!("unknown format {other:?} (table, json or csv)")),
        }
    }
}

pub const UNDEFINED: &str = "n/a";

/// Fixed-point text, halves rounded away from zero.
pub fn round_half_up(value: f64, decimals: usize) -> String {
    let scale = 10f64.powi(decimals as i32);
    let scaled = value.abs() * scale;
    // Absorb binary representation error so x.5 never rounds down.
    let rounded = (scaled + 0.5 + 1e-7).floor();
    let negative = value < 0.0 && rounded != 0.0;
    let digits = format!("{:.*}", decimals, rounded / scale);
    if negative {
        format!("-{digits}")
    } else {
        digits
    }
}

/// Improvement text: two decimals, signed unless zero.
pub fn format_imp(value: Option<f64>) -> String {
    match value {
        None => UNDEFINED.to_string(),
        Some(v) => {
            let text = round_half_up(v, 2);
            if text.starts_with('-') || text == "0.00" {
                text
            } else {
                format!("+{text}")
            }
        }
    }
}

fn format_opt(value: Option<f64>) -> String {
    value.map_or_else(|| UNDEFINED.to_string(), |v| round_half_up(v, 2))
}

/// `4908548` → `4,908,548`.
pub fn group_thousands(n: u64) -> String {
    let digits = n.to_string();
    let mut out = String::new();
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(c);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mark {
    Best,
    Second,
}

fn group_key(row: &MetricRow) -> String {
    row.base.clone().unwrap_or_else(|| row.method.clone())
}

/// Best and second-best per metric within each base-method group.
pub fn marks(rows: &[MetricRow], metrics: &[Metric]) -> BTreeMap<(usize, Metric), Mark> {
    let mut out = BTreeMap::new();
    let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, r) in rows.iter().enumerate() {
        groups.entry(group_key(r)).or_default().push(i);
    }
    for members in groups.values() {
        if members.len() < 2 {
            continue;
        }
        for &m in metrics {
            let mut values: Vec<f64> = members.iter().filter_map(|&i| rows[i].value(m)).collect();
            values.sort_by(|a, b| match m.direction() {
                Direction::Up => b.total_cmp(a),
                Direction::Down => a.total_cmp(b),
            });
            values.dedup();
            for &i in members {
                let Some(v) = rows[i].value(m) else { continue };
                if values.first() == Some(&v) {
                    out.insert((i, m), Mark::Best);
                } else if values.get(1) == Some(&v) {
                    out.insert((i, m), Mark::Second);
                }
            }
        }
    }
    out
}

impl ReportTable {
    fn value_metrics(&self) -> Vec<Metric> {
        match self.scoring {
            Scoring::Success => vec![Metric::Sr, Metric::As, Metric::Expense],
            Scoring::Reward => vec![Metric::Tr, Metric::Ar, Metric::As, Metric::Expense],
        }
    }

    fn has_imp(&self) -> bool {
        self.rows.iter().any(|r| !r.imp.is_empty())
    }

    /// Header and cell text, without marks.
    fn cells(&self) -> (Vec<String>, Vec<Vec<(String, Option<Metric>)>>) {
        let imp = self.has_imp();
        let mut header = vec!["Method".to_string()];
        let effect: &[Metric] = match self.scoring {
            Scoring::Success => &[Metric::Sr],
            Scoring::Reward => &[Metric::Tr, Metric::Ar],
        };
        let [imp_effect, imp_steps, imp_cost] = self.scoring.imp_metrics();
        for m in effect {
            header.push(m.column().to_string());
        }
        if imp {
            header.push("Imp(%)".into());
        }
        header.push("AS".into());
        if imp {
            header.push("Imp(%)".into());
        }
        header.extend(["Prompt".into(), "Completion".into(), "Expense($)".into()]);
        if imp {
            header.push("Imp(%)".into());
        }
        let imp_cell = |r: &MetricRow, m: Metric| -> (String, Option<Metric>) {
            if r.imp.is_empty() {
                ("N/A".into(), None)
            } else {
                (format_imp(r.imp.get(&m).copied().flatten()), None)
            }
        };
        let body = self
            .rows
            .iter()
            .map(|r| {
                let mut row = vec![(r.method.clone(), None)];
                for &m in effect {
                    row.push((format_opt(r.value(m)), Some(m)));
                }
                if imp {
                    row.push(imp_cell(r, imp_effect));
                }
                row.push((format_opt(r.avg_steps), Some(Metric::As)));
                if imp {
                    row.push(imp_cell(r, imp_steps));
                }
                row.push((group_thousands(r.prompt_tokens), None));
                row.push((group_thousands(r.completion_tokens), None));
                row.push((round_half_up(r.expense, 2), Some(Metric::Expense)));
                if imp {
                    row.push(imp_cell(r, imp_cost));
                }
                row
            })
            .collect();
        (header, body)
    }

    /// Aligned text table; best is `**x**`, second best `_x_`, groups split by rules.
    pub fn render_table(&self) -> String {
        let marks = marks(&self.rows, &self.value_metrics());
        let (header, body) = self.cells();
        let body: Vec<Vec<String>> = body
            .into_iter()
            .enumerate()
            .map(|(i, row)| {
                row.into_iter()
                    .map(|(text, metric)| match metric.and_then(|m| marks.get(&(i, m))) {
                        Some(Mark::Best) => format!("**{text}**"),
                        Some(Mark::Second) => format!("_{text}_"),
                        None => text,
                    })
                    .collect()
            })
            .collect();
        let widths: Vec<usize> = (0..header.len())
            .map(|c| {
                body.iter()
                    .map(|r| r[c].chars().count())
                    .chain(std::iter::once(header[c].chars().count()))
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let line = |cells: &[String]| -> String {
            let parts: Vec<String> = cells
                .iter()
                .enumerate()
                .map(|(c, t)| {
                    let pad = widths[c] - t.chars().count();
                    if c == 0 {
                        format!("{t}{}", " ".repeat(pad))
                    } else {
                        format!("{}{t}", " ".repeat(pad))
                    }
                })
                .collect();
            format!("| {} |", parts.join(" | "))
        };
        let rule = format!(
            "|{}|",
            widths.iter().map(|w| "-".repeat(w + 2)).collect::<Vec<_>>().join("|")
        );
        let mut out = String::new();
        writeln!(out, "{}", line(&header)).ok();
        writeln!(out, "{rule}").ok();
        let mut previous: Option<String> = None;
        for (i, row) in body.iter().enumerate() {
            let group = group_key(&self.rows[i]);
            if previous.as_ref().is_some_and(|p| *p != group) {
                writeln!(out, "{rule}").ok();
            }
            previous = Some(group);
            writeln!(out, "{}", line(row)).ok();
        }
        out
    }

    pub fn render_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report table serializes")
    }

    /// Machine-friendly columns: raw token counts, one named column per
    /// improvement, empty fields for undefined values.
    pub fn render_csv(&self) -> String {
        let effect: &[Metric] = match self.scoring {
            Scoring::Success => &[Metric::Sr],
            Scoring::Reward => &[Metric::Tr, Metric::Ar],
        };
        let imp = self.has_imp();
        let key = |m: &Metric| serde_json::to_value(m).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
        let mut header: Vec<String> = vec!["method".into(), "base".into(), "tasks".into()];
        header.extend(effect.iter().map(key));
        header.extend(["as", "prompt_tokens", "completion_tokens", "expense"].map(String::from));
        if imp {
            header.extend(self.scoring.imp_metrics().iter().map(|m| format!("imp_{}", key(m))));
        }
        let num = |v: Option<f64>| v.map(|v| round_half_up(v, 2)).unwrap_or_default();
        let mut out = String::new();
        writeln!(out, "{}", header.join(",")).ok();
        for r in &self.rows {
            let mut cells = vec![
                csv_field(&r.method),
                csv_field(r.base.as_deref().unwrap_or("")),
                r.tasks.to_string(),
            ];
            cells.extend(effect.iter().map(|m| num(r.value(*m))));
            cells.push(num(r.avg_steps));
            cells.push(r.prompt_tokens.to_string());
            cells.push(r.completion_tokens.to_string());
            cells.push(round_half_up(r.expense, 2));
            if imp {
                for m in self.scoring.imp_metrics() {
                    cells.push(match r.imp.get(&m).copied().flatten() {
                        Some(v) => format_imp(Some(v)),
                        None => String::new(),
                    });
                }
            }
            writeln!(out, "{}", cells.join(",")).ok();
        }
        out
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Table => self.render_table(),
            Format::Json => self.render_json(),
            Format::Csv => self.render_csv(),
        }
    }
}

fn csv_field(text: &str) -> String {
    if text.contains([',', '"', '\n']) {
        format!("\"{}\"", text.replace('"', "\"\""))
    } else {
        text.to_string()
    }
}

/// Renders a report's own rows.
pub fn render_report(report: &RunReport, format: Format) -> String {
    report.table().render(format)
}
