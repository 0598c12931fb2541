//! Transcript persistence, box-plot and heatmap exports, and the text report.

mod records;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use records::{
    load_run, read_record_file, write_record_file, RecordFile, RecordHeader, RecordWriter, RunData, RECORD_SCHEMA,
    RECORD_SCHEMA_VERSION,
};

use crate::game::{GameStatus, GameTranscript, SetupKind};
use crate::metrics::{self, MetricError, MetricKind, MetricOptions, RateValue};
use crate::steering::Condition;
use crate::strategies::OpponentSpec;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("nothing to report: {0}")]
    EmptyInput(String),
    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("record file belongs to plan {expected}, not {found}")]
    FingerprintMismatch { expected: String, found: String },
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// How games against random opponents of different `p` are grouped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RandomGrouping {
    /// One row for all random opponents, labelled `RD`.
    #[default]
    Pooled,
    /// One row per probability.
    Separate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ExportOptions {
    pub metric: MetricOptions,
    pub random: RandomGrouping,
}

/// One box-plot series: a condition against one opponent.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateRow {
    pub condition: String,
    pub opponent: String,
    pub n_games: usize,
    pub n_invalid: usize,
    pub n_defined: usize,
    pub median: Option<f64>,
    pub q1: Option<f64>,
    pub q3: Option<f64>,
    /// Exact median as a reduced fraction.
    pub median_exact: Option<String>,
    pub per_game: Vec<RateValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatesTable {
    pub metric: MetricKind,
    pub rows: Vec<RateRow>,
}

fn opponent_key(g: &GameTranscript, grouping: RandomGrouping) -> String {
    match (g.condition_b.opponent(), grouping) {
        (Some(OpponentSpec::Random { .. }), RandomGrouping::Pooled) => "RD".into(),
        _ => g.condition_b.label(),
    }
}

// (condition_a, opponent or condition_b), each as a label_key
type CellKey = ((usize, String), (usize, String));

/// Sort key giving the standard condition order, then anything else by label.
fn label_key(label: &str) -> (usize, String) {
    (Condition::rank(label), label.to_string())
}

fn fraction(r: Ratio<i64>) -> String {
    if *r.denom() == 1 {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Per-game rates and their median and quartiles, one row per
/// (condition, opponent). Invalid games are counted but not measured.
pub fn export_rates(
    transcripts: &[GameTranscript],
    metric: MetricKind,
    options: &ExportOptions,
) -> Result<RatesTable, ReportError> {
    let mut groups: BTreeMap<CellKey, (usize, Vec<RateValue>)> = BTreeMap::new();
    for g in transcripts.iter().filter(|g| metric.applies_to(g)) {
        let key = (label_key(&g.condition_a.label()), label_key(&opponent_key(g, options.random)));
        let entry = groups.entry(key).or_default();
        if g.is_valid() {
            entry.1.push(metrics::rate(metric, g, &options.metric)?);
        } else {
            entry.0 += 1;
        }
    }
    if groups.is_empty() {
        return Err(ReportError::EmptyInput(format!("no games to measure {metric} on")));
    }
    let rows = groups
        .into_iter()
        .map(|(((_, condition), (_, opponent)), (n_invalid, per_game))| {
            let summary = metrics::aggregate(&per_game).ok();
            let f = |pick: fn(&metrics::Summary) -> Ratio<i64>| summary.as_ref().map(|s| metrics::ratio_to_f64(pick(s)));
            RateRow {
                condition,
                opponent,
                n_games: per_game.len() + n_invalid,
                n_invalid,
                n_defined: per_game.iter().filter(|v| v.is_defined()).count(),
                median: f(|s| s.median),
                q1: f(|s| s.q1),
                q3: f(|s| s.q3),
                median_exact: summary.as_ref().map(|s| fraction(s.median)),
                per_game,
            }
        })
        .collect();
    Ok(RatesTable { metric, rows })
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".into(), |x| x.to_string())
}

impl RatesTable {
    /// Per-game values are `events/opportunities`, `;`-separated; `0/0` is undefined.
    pub fn to_csv(&self) -> Result<String, ReportError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "metric", "condition", "opponent", "n_games", "n_invalid", "n_defined", "median", "q1", "q3", "per_game",
        ])?;
        for r in &self.rows {
            let values: Vec<String> = r.per_game.iter().map(|v| format!("{}/{}", v.numerator, v.denominator)).collect();
            w.write_record([
                self.metric.name().to_string(),
                r.condition.clone(),
                r.opponent.clone(),
                r.n_games.to_string(),
                r.n_invalid.to_string(),
                r.n_defined.to_string(),
                opt(r.median),
                opt(r.q1),
                opt(r.q3),
                values.join(";"),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| ReportError::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn to_json(&self) -> Result<String, ReportError> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeatCell {
    pub n_valid: usize,
    pub mean_total: f64,
    pub median_total: f64,
    pub mean_personal: f64,
    pub median_personal: f64,
}

/// Setup-3 score matrices, rows = A's condition, columns = B's condition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Heatmap {
    pub labels_a: Vec<String>,
    pub labels_b: Vec<String>,
    /// Row-major; `None` where a pair has no valid games.
    pub cells: Vec<Vec<Option<HeatCell>>>,
}

fn mean(v: &[i64]) -> Ratio<i64> {
    Ratio::new(v.iter().sum(), v.len() as i64)
}

fn median(v: &[i64]) -> Ratio<i64> {
    let mut sorted: Vec<Ratio<i64>> = v.iter().map(|&x| Ratio::from_integer(x)).collect();
    sorted.sort();
    metrics::quantile(&sorted, Ratio::new(1, 2))
}

pub fn export_heatmap(transcripts: &[GameTranscript]) -> Result<Heatmap, ReportError> {
    let games: Vec<&GameTranscript> = transcripts.iter().filter(|g| g.setup_kind == SetupKind::Setup3).collect();
    if games.is_empty() {
        return Err(ReportError::EmptyInput("no setup3 games".into()));
    }
    let mut labels_a: Vec<String> = games.iter().map(|g| g.condition_a.label()).collect();
    let mut labels_b: Vec<String> = games.iter().map(|g| g.condition_b.label()).collect();
    for labels in [&mut labels_a, &mut labels_b] {
        labels.sort_by_key(|l| label_key(l));
        labels.dedup();
    }
    let mut scores: BTreeMap<(String, String), (Vec<i64>, Vec<i64>)> = BTreeMap::new();
    for g in games.iter().filter(|g| g.is_valid()) {
        let e = scores.entry((g.condition_a.label(), g.condition_b.label())).or_default();
        e.0.push(metrics::total_score(g)?.into());
        e.1.push(metrics::personal_score(g)?);
    }
    let cells = labels_a
        .iter()
        .map(|a| {
            labels_b
                .iter()
                .map(|b| {
                    scores.get(&(a.clone(), b.clone())).map(|(t, p)| HeatCell {
                        n_valid: t.len(),
                        mean_total: metrics::ratio_to_f64(mean(t)),
                        median_total: metrics::ratio_to_f64(median(t)),
                        mean_personal: metrics::ratio_to_f64(mean(p)),
                        median_personal: metrics::ratio_to_f64(median(p)),
                    })
                })
                .collect()
        })
        .collect();
    Ok(Heatmap {
        labels_a,
        labels_b,
        cells,
    })
}

impl Heatmap {
    pub fn get(&self, a: &str, b: &str) -> Option<&HeatCell> {
        let i = self.labels_a.iter().position(|l| l == a)?;
        let j = self.labels_b.iter().position(|l| l == b)?;
        self.cells[i][j].as_ref()
    }

    /// Four stacked matrices; the first column names the matrix, the second
    /// A's condition, the rest are B's conditions.
    pub fn to_csv(&self) -> Result<String, ReportError> {
        type Pick = fn(&HeatCell) -> f64;
        let matrices: [(&str, Pick); 4] = [
            ("mean_total", |c| c.mean_total),
            ("mean_personal", |c| c.mean_personal),
            ("median_total", |c| c.median_total),
            ("median_personal", |c| c.median_personal),
        ];
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["matrix".to_string(), "condition_a".to_string()];
        header.extend(self.labels_b.iter().cloned());
        w.write_record(&header)?;
        for (name, pick) in matrices {
            for (i, a) in self.labels_a.iter().enumerate() {
                let mut row = vec![name.to_string(), a.clone()];
                row.extend(self.cells[i].iter().map(|c| opt(c.as_ref().map(pick))));
                w.write_record(&row)?;
            }
        }
        let bytes = w.into_inner().map_err(|e| ReportError::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

pub const LOWER_IS_BETTER: &str = "Scores are prison years: lower is better.";

/// Plain-text summary of a run. Depends only on the transcript set.
pub fn render_report(run: &RunData, options: &ExportOptions) -> String {
    let games = &run.transcripts;
    let n_invalid = games.iter().filter(|g| !g.is_valid()).count();
    let mut setups: Vec<SetupKind> = games.iter().map(|g| g.setup_kind).collect();
    setups.sort_by_key(|s| s.key());
    setups.dedup();

    let mut out = String::new();
    let _ = writeln!(out, "plan: {}", run.plan_fingerprint);
    let setup_names: Vec<&str> = setups.iter().map(|s| s.key()).collect();
    let _ = writeln!(out, "setup: {}", if setup_names.is_empty() { "-".into() } else { setup_names.join(", ") });
    match run.planned_games() {
        Some(p) => {
            let _ = writeln!(out, "games: {} of {} planned", games.len(), p);
        }
        None => {
            let _ = writeln!(out, "games: {}", games.len());
        }
    }
    let _ = writeln!(out, "valid: {}", games.len() - n_invalid);
    let _ = writeln!(out, "invalid: {n_invalid}");
    let mut invalid: Vec<&GameTranscript> = games.iter().filter(|g| !g.is_valid()).collect();
    invalid.sort_by(|a, b| a.game_id.cmp(&b.game_id));
    for g in invalid {
        if let GameStatus::Invalid { reason } = &g.status {
            let _ = writeln!(out, "  {}: {reason}", g.game_id);
        }
    }

    let _ = writeln!(out, "\nscores per game (mean / median)");
    let _ = writeln!(out, "{LOWER_IS_BETTER}");
    let _ = writeln!(out, "{:<10} {:<10} {:>5} {:>19} {:>19}", "condition", "opponent", "n", "total", "personal");
    let mut by_cell: BTreeMap<CellKey, (Vec<i64>, Vec<i64>)> = BTreeMap::new();
    for g in games.iter().filter(|g| g.is_valid() && g.is_complete()) {
        let e = by_cell
            .entry((label_key(&g.condition_a.label()), label_key(&g.condition_b.label())))
            .or_default();
        e.0.push(g.rounds.iter().map(|r| i64::from(r.years_a + r.years_b)).sum());
        e.1.push(g.rounds.iter().map(|r| i64::from(r.years_a) - i64::from(r.years_b)).sum());
    }
    for (((_, a), (_, b)), (t, p)) in &by_cell {
        let _ = writeln!(
            out,
            "{:<10} {:<10} {:>5} {:>19} {:>19}",
            a,
            b,
            t.len(),
            format!("{} / {}", fmt_num(mean(t)), fmt_num(median(t))),
            format!("{} / {}", fmt_num(mean(p)), fmt_num(median(p))),
        );
    }

    for metric in MetricKind::ALL {
        let Ok(table) = export_rates(games, metric, options) else {
            continue;
        };
        let _ = writeln!(out, "\n{metric} rate (median [q1, q3], defined/games)");
        for r in &table.rows {
            let stats = match (r.median, r.q1, r.q3) {
                (Some(m), Some(a), Some(b)) => format!("{} [{}, {}]", fmt_f(m), fmt_f(a), fmt_f(b)),
                _ => "undefined".into(),
            };
            let _ = writeln!(
                out,
                "{:<10} {:<10} {:<24} {}/{}",
                r.condition, r.opponent, stats, r.n_defined, r.n_games
            );
        }
    }
    out
}

fn fmt_f(x: f64) -> String {
    format!("{x:.3}")
}

fn fmt_num(r: Ratio<i64>) -> String {
    if r.is_integer() {
        r.to_integer().to_string()
    } else {
        fmt_f(metrics::ratio_to_f64(r))
    }
}
