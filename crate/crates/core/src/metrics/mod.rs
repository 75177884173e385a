//! Scoring of results against ground truth: per-task metric bundles, the
//! proximity score, reliability rates and model ranking.

mod report;
mod stats;

pub use report::{
    evaluate, ranking_csv, EvalKind, EvalTask, GroundTruth, MetricReport, ModelEntry, ReportConfig,
    TaskMetrics, TaskReport,
};
pub use stats::{
    binary_metrics, continuous_metrics, count_metrics, ordinal_metrics, pearson, BinaryMetrics,
    ContinuousMetrics, CountMetrics, OrdinalMetrics, TOLERANCE_EPS,
};

use std::collections::BTreeSet;

use crate::batch::ResultsTable;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("no pairs to evaluate")]
    EmptyInput,
    #[error("truth and prediction lengths differ ({truth} vs {pred})")]
    LengthMismatch { truth: usize, pred: usize },
    #[error("range must be > 0, got {0}")]
    InvalidRange(f64),
    #[error("ordinal tasks need at least 2 classes, got {0}")]
    InvalidClasses(u32),
    #[error("class {class} outside 1..={classes}")]
    ClassOutOfRange { class: u32, classes: u32 },
    #[error("task `{task}`: {message}")]
    Task { task: String, message: String },
    #[error("images missing from ground truth: {}", .0.join(", "))]
    UnknownImages(Vec<String>),
    #[error("model `{name}` covers tasks {found:?}, expected {expected:?}")]
    InconsistentTasks {
        name: String,
        expected: Vec<String>,
        found: Vec<String>,
    },
    #[error("{0}")]
    Input(String),
}

/// `max(0, 1 - |truth - pred| / range)`.
pub fn proximity(truth: f64, pred: f64, range: f64) -> Result<f64, MetricsError> {
    if range.is_nan() || range <= 0.0 {
        return Err(MetricsError::InvalidRange(range));
    }
    Ok((1.0 - (truth - pred).abs() / range).max(0.0))
}

/// Mean proximity over pairs whose prediction is present.
pub fn task_proximity(truth: &[f64], pred: &[Option<f64>], range: f64) -> Result<f64, MetricsError> {
    if truth.len() != pred.len() {
        return Err(MetricsError::LengthMismatch {
            truth: truth.len(),
            pred: pred.len(),
        });
    }
    let mut sum = 0.0;
    let mut n = 0usize;
    for (t, p) in truth.iter().zip(pred) {
        if let Some(p) = p {
            sum += proximity(*t, *p, range)?;
            n += 1;
        }
    }
    if n == 0 {
        return Err(MetricsError::EmptyInput);
    }
    Ok(sum / n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ReliabilityRates {
    pub na_runs: usize,
    pub total_runs: usize,
    pub truncated: usize,
    pub checks: usize,
}

impl ReliabilityRates {
    pub fn na_rate(&self) -> f64 {
        ratio(self.na_runs, self.total_runs)
    }

    pub fn truncation_rate(&self) -> f64 {
        ratio(self.truncated, self.checks)
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// NA share over individual runs (from `{col}_runs`, or the value cell for
/// single-run tasks) and truncation share over (image, task) checks.
pub fn reliability_rates(table: &ResultsTable, columns: &[&str]) -> ReliabilityRates {
    let mut rates = ReliabilityRates::default();
    for &col in columns {
        let runs_col = format!("{col}_runs");
        let trunc_col = format!("{col}_truncated");
        let has_runs = table.has_column(&runs_col);
        for row in &table.rows {
            if row.get(col).is_empty() {
                continue;
            }
            rates.checks += 1;
            if row.get(&trunc_col) == "1" {
                rates.truncated += 1;
            }
            if has_runs {
                for run in row.get(&runs_col).split(';') {
                    rates.total_runs += 1;
                    rates.na_runs += usize::from(run == crate::batch::NA);
                }
            } else {
                rates.total_runs += 1;
                rates.na_runs += usize::from(row.get(col) == crate::batch::NA);
            }
        }
    }
    rates
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankingRow {
    pub rank: usize,
    pub name: String,
    pub per_task: Vec<(String, f64)>,
    pub mean: f64,
}

/// Orders models by the unweighted mean of their per-task proximities,
/// highest first; equal means sort by name.
pub fn rank_models(reports: &[(String, Vec<(String, f64)>)]) -> Result<Vec<RankingRow>, MetricsError> {
    let Some((_, first)) = reports.first() else {
        return Ok(Vec::new());
    };
    let expected: BTreeSet<&str> = first.iter().map(|(t, _)| t.as_str()).collect();
    if expected.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let mut rows = Vec::with_capacity(reports.len());
    for (name, tasks) in reports {
        let found: BTreeSet<&str> = tasks.iter().map(|(t, _)| t.as_str()).collect();
        if found != expected || found.len() != tasks.len() {
            return Err(MetricsError::InconsistentTasks {
                name: name.clone(),
                expected: expected.iter().map(|s| s.to_string()).collect(),
                found: tasks.iter().map(|(t, _)| t.clone()).collect(),
            });
        }
        let per_task: Vec<(String, f64)> = first
            .iter()
            .map(|(t, _)| {
                let v = tasks.iter().find(|(u, _)| u == t).map(|(_, v)| *v).unwrap_or_default();
                (t.clone(), v)
            })
            .collect();
        let mean = per_task.iter().map(|(_, v)| v).sum::<f64>() / per_task.len() as f64;
        rows.push(RankingRow {
            rank: 0,
            name: name.clone(),
            per_task,
            mean,
        });
    }
    rows.sort_by(|a, b| b.mean.total_cmp(&a.mean).then_with(|| a.name.cmp(&b.name)));
    for (i, r) in rows.iter_mut().enumerate() {
        r.rank = i + 1;
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::batch::ResultsRow;

    #[test]
    fn proximity_cases() {
        assert_eq!(proximity(5.0, 6.0, 8.0).unwrap(), 0.875);
        assert_eq!(proximity(3.0, 3.0, 8.0).unwrap(), 1.0);
        assert_eq!(proximity(0.0, 100.0, 8.0).unwrap(), 0.0);
        assert_eq!(proximity(1.0, 2.0, 0.0), Err(MetricsError::InvalidRange(0.0)));
    }

    #[test]
    fn task_proximity_skips_na() {
        let v = task_proximity(&[5.0, 2.0, 1.0], &[Some(6.0), None, Some(1.0)], 8.0).unwrap();
        assert!((v - (0.875 + 1.0) / 2.0).abs() < 1e-12);
        assert_eq!(task_proximity(&[1.0], &[None], 1.0), Err(MetricsError::EmptyInput));
    }

    #[test]
    fn binary_proximity_is_accuracy() {
        let truth: Vec<f64> = (0..120).map(|i| f64::from(u8::from(i % 7 != 0))).collect();
        let pred: Vec<Option<f64>> = (0..120)
            .map(|i| Some(if i < 102 { truth[i] } else { 1.0 - truth[i] }))
            .collect();
        assert!((task_proximity(&truth, &pred, 1.0).unwrap() - 0.85).abs() < 1e-12);
    }

    #[test]
    fn reliability_counts_runs_and_flags() {
        let mut t = ResultsTable::new(
            ["image", "v", "v_runs", "v_truncated", "s", "s_truncated"]
                .map(String::from)
                .to_vec(),
        );
        for i in 0..10 {
            let mut r = ResultsRow::new(format!("{i}.jpg"));
            r.cells.insert("v".into(), "3".into());
            r.cells.insert("v_runs".into(), if i == 0 { "3;NA;3" } else { "3;3;3" }.into());
            r.cells.insert("v_truncated".into(), "0".into());
            r.cells.insert("s".into(), "1".into());
            r.cells.insert("s_truncated".into(), if i < 2 { "1" } else { "0" }.into());
            t.upsert(r);
        }
        let rates = reliability_rates(&t, &["v", "s"]);
        assert_eq!((rates.na_runs, rates.total_runs), (1, 40));
        assert_eq!((rates.truncated, rates.checks), (2, 20));
        let only_v = reliability_rates(&t, &["v"]);
        assert_eq!(format!("{:.2}", only_v.na_rate() * 100.0), "3.33");
        assert_eq!(reliability_rates(&t, &[]).na_rate(), 0.0);
    }

    #[test]
    fn ranking_means_and_ties() {
        let tasks = |v: [f64; 2]| vec![("a".to_string(), v[0]), ("b".to_string(), v[1])];
        let rows = rank_models(&[
            ("zeta".into(), tasks([50.0, 50.0])),
            ("alpha".into(), tasks([40.0, 60.0])),
            ("best".into(), tasks([90.0, 80.0])),
        ])
        .unwrap();
        let names: Vec<&str> = rows.iter().map(|r| r.name.as_str()).collect();
        assert_eq!(names, ["best", "alpha", "zeta"]);
        assert_eq!(rows[0].rank, 1);
        assert_eq!(rows[0].mean, 85.0);

        let bad = rank_models(&[
            ("x".into(), tasks([1.0, 1.0])),
            ("y".into(), vec![("a".into(), 1.0)]),
        ]);
        assert!(matches!(bad, Err(MetricsError::InconsistentTasks { .. })));
    }
}
