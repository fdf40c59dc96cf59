use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};
use crate::trainer::{Mode, RunMetrics};

pub const SUMMARY_HEADER: [&str; 5] = ["mode", "seed", "final_eval", "best_mean100", "steps_to_threshold"];

/// Headline numbers of one `(mode, seed)` run. Absent values are empty
/// fields in the CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub mode: Mode,
    pub seed: u64,
    pub final_eval: Option<f64>,
    pub best_mean100: Option<f64>,
    pub steps_to_threshold: Option<u64>,
}

impl SummaryRow {
    pub fn from_metrics(mode: Mode, seed: u64, metrics: &RunMetrics, threshold: f64) -> Self {
        Self {
            mode,
            seed,
            final_eval: metrics.final_eval,
            best_mean100: metrics.best_mean100(),
            steps_to_threshold: metrics.steps_to_threshold(threshold),
        }
    }
}

fn field<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(SUMMARY_HEADER).expect("writing to memory");
    for row in rows {
        writer
            .write_record([
                row.mode.to_string(),
                row.seed.to_string(),
                field(row.final_eval),
                field(row.best_mean100),
                field(row.steps_to_threshold),
            ])
            .expect("writing to memory");
    }
    String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
}

pub fn parse_summary(text: &str) -> Result<Vec<SummaryRow>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| Error::Report(e.to_string()))?;
    if header.iter().ne(SUMMARY_HEADER) {
        return Err(Error::Report(format!(
            "summary header must be `{}`",
            SUMMARY_HEADER.join(",")
        )));
    }
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Report(e.to_string()))?;
        let line = i + 2;
        let bad = |col: usize| Error::Report(format!("line {line}: invalid {} `{}`", SUMMARY_HEADER[col], &record[col]));
        fn optional<T: std::str::FromStr>(s: &str) -> Option<Option<T>> {
            if s.is_empty() {
                Some(None)
            } else {
                s.parse().ok().map(Some)
            }
        }
        rows.push(SummaryRow {
            mode: record[0].parse().map_err(|_| bad(0))?,
            seed: record[1].parse().map_err(|_| bad(1))?,
            final_eval: optional(&record[2]).ok_or_else(|| bad(2))?,
            best_mean100: optional(&record[3]).ok_or_else(|| bad(3))?,
            steps_to_threshold: optional(&record[4]).ok_or_else(|| bad(4))?,
        });
    }
    Ok(rows)
}

pub fn read_summary(path: &Path) -> Result<Vec<SummaryRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_summary(&text)
}

/// Median of `values`; the mean of the middle pair for even counts.
/// Infinite entries sort last.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    Some(if n % 2 == 1 {
        sorted[n / 2]
    } else {
        let (a, b) = (sorted[n / 2 - 1], sorted[n / 2]);
        if a == b {
            a
        } else {
            (a + b) / 2.0
        }
    })
}

/// Per-mode statistics over seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeAggregate {
    pub mode: Mode,
    pub runs: usize,
    pub mean_final_eval: Option<f64>,
    pub median_final_eval: Option<f64>,
    /// Runs that never reached the threshold count as infinitely slow.
    pub median_steps_to_threshold: Option<f64>,
    pub reached_threshold: usize,
}

pub fn aggregate(rows: &[SummaryRow], mode: Mode) -> ModeAggregate {
    let mine: Vec<&SummaryRow> = rows.iter().filter(|r| r.mode == mode).collect();
    let evals: Vec<f64> = mine.iter().filter_map(|r| r.final_eval).collect();
    let steps: Vec<f64> = mine
        .iter()
        .map(|r| r.steps_to_threshold.map_or(f64::INFINITY, |s| s as f64))
        .collect();
    ModeAggregate {
        mode,
        runs: mine.len(),
        mean_final_eval: (!evals.is_empty()).then(|| evals.iter().sum::<f64>() / evals.len() as f64),
        median_final_eval: median(&evals),
        median_steps_to_threshold: median(&steps),
        reached_threshold: mine.iter().filter(|r| r.steps_to_threshold.is_some()).count(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub label: String,
    pub baseline: f64,
    pub treatment: f64,
    /// Percent gain over the baseline; absent when the baseline is not positive.
    pub improvement: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub baseline: Mode,
    pub treatment: Mode,
    pub rows: Vec<ComparisonRow>,
    pub mean_improvement: Option<f64>,
    pub median_improvement: Option<f64>,
}

/// Compares mean final evaluation returns of two modes in each labelled
/// summary. Summaries whose baseline is not positive are listed but left out
/// of the percentage aggregates.
pub fn compare_report(tables: &[(String, Vec<SummaryRow>)], baseline: Mode, treatment: Mode) -> Result<Comparison> {
    let mut rows = Vec::new();
    for (label, table) in tables {
        let score = |mode: Mode| {
            aggregate(table, mode)
                .mean_final_eval
                .ok_or_else(|| Error::Report(format!("`{label}` has no final_eval for mode `{mode}`")))
        };
        let (b, t) = (score(baseline)?, score(treatment)?);
        rows.push(ComparisonRow {
            label: label.clone(),
            baseline: b,
            treatment: t,
            improvement: (b > 0.0).then(|| (t - b) / b * 100.0),
        });
    }
    let gains: Vec<f64> = rows.iter().filter_map(|r| r.improvement).collect();
    Ok(Comparison {
        baseline,
        treatment,
        mean_improvement: (!gains.is_empty()).then(|| gains.iter().sum::<f64>() / gains.len() as f64),
        median_improvement: median(&gains),
        rows,
    })
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let pct = |v: Option<f64>| v.map_or_else(|| "excluded".to_string(), |v| format!("{v:+.2}%"));
        writeln!(f, "summary\t{}\t{}\timprovement", self.baseline, self.treatment)?;
        for row in &self.rows {
            writeln!(f, "{}\t{:.4}\t{:.4}\t{}", row.label, row.baseline, row.treatment, pct(row.improvement))?;
        }
        let included = self.rows.iter().filter(|r| r.improvement.is_some()).count();
        writeln!(
            f,
            "mean improvement: {} ({included} of {} included)",
            pct(self.mean_improvement),
            self.rows.len()
        )?;
        writeln!(f, "median improvement: {}", pct(self.median_improvement))
    }
}
