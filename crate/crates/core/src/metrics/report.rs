//! Ground truth loading, report configuration and the per-model report.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::io::Read;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::stats::{
    binary_metrics, continuous_metrics, count_metrics, ordinal_metrics, BinaryMetrics,
    ContinuousMetrics, CountMetrics, OrdinalMetrics,
};
use super::{reliability_rates, task_proximity, MetricsError, RankingRow, ReliabilityRates};
use crate::batch::{ResultsTable, NA};
use crate::config::document::{parse_document, Section};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalKind {
    Binary,
    Count,
    Continuous,
    Ordinal,
}

impl EvalKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EvalKind::Binary => "binary",
            EvalKind::Count => "count",
            EvalKind::Continuous => "continuous",
            EvalKind::Ordinal => "ordinal",
        }
    }
}

impl fmt::Display for EvalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EvalKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "binary" => Ok(EvalKind::Binary),
            "count" => Ok(EvalKind::Count),
            "continuous" => Ok(EvalKind::Continuous),
            "ordinal" => Ok(EvalKind::Ordinal),
            other => Err(format!(
                "unknown kind `{other}` (expected binary, count, continuous or ordinal)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalTask {
    pub column: String,
    pub kind: EvalKind,
    /// Proximity range; defaults to the observed truth range.
    pub range: Option<f64>,
    /// Ordinal class count; defaults to the largest truth class.
    pub classes: Option<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelEntry {
    pub name: String,
    pub results: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReportConfig {
    pub model: Option<String>,
    pub output_dir: Option<PathBuf>,
    pub tasks: Vec<EvalTask>,
    /// Further result files ranked alongside the main one.
    pub models: Vec<ModelEntry>,
}

fn input_err(section: &Section, message: impl fmt::Display) -> MetricsError {
    MetricsError::Input(format!("[{}] at line {}: {message}", section.name, section.line))
}

fn check_keys(section: &Section, allowed: &[&str]) -> Result<(), MetricsError> {
    match section.entries.iter().find(|e| !allowed.contains(&e.key.as_str())) {
        Some(e) => Err(MetricsError::Input(format!(
            "line {}: unknown key `{}` in [{}]",
            e.line, e.key, section.name
        ))),
        None => Ok(()),
    }
}

fn required<'a>(section: &'a Section, key: &str) -> Result<&'a str, MetricsError> {
    section
        .get(key)
        .map(|e| e.value.trim())
        .filter(|v| !v.is_empty())
        .ok_or_else(|| input_err(section, format!("missing `{key}`")))
}

impl ReportConfig {
    pub fn parse(source: &str) -> Result<Self, MetricsError> {
        let sections = parse_document(source).map_err(|e| MetricsError::Input(e.to_string()))?;
        let mut cfg = ReportConfig::default();
        for s in &sections {
            match s.name.as_str() {
                "report" => {
                    check_keys(s, &["model", "output_dir"])?;
                    cfg.model = s.get("model").map(|e| e.value.trim().to_string());
                    cfg.output_dir = s.get("output_dir").map(|e| PathBuf::from(e.value.trim()));
                }
                "task" => {
                    check_keys(s, &["column", "kind", "range", "classes"])?;
                    let column = required(s, "column")?.to_string();
                    let kind = required(s, "kind")?.parse().map_err(|e| input_err(s, e))?;
                    let range = match s.get("range") {
                        None => None,
                        Some(e) => Some(
                            e.value
                                .trim()
                                .parse::<f64>()
                                .ok()
                                .filter(|r| *r > 0.0)
                                .ok_or_else(|| input_err(s, format!("{column}.range must be a number > 0")))?,
                        ),
                    };
                    let classes = match s.get("classes") {
                        None => None,
                        Some(e) => Some(
                            e.value
                                .trim()
                                .parse::<u32>()
                                .ok()
                                .filter(|c| *c >= 2)
                                .ok_or_else(|| input_err(s, format!("{column}.classes must be an integer >= 2")))?,
                        ),
                    };
                    if cfg.tasks.iter().any(|t: &EvalTask| t.column == column) {
                        return Err(input_err(s, format!("duplicate task `{column}`")));
                    }
                    cfg.tasks.push(EvalTask {
                        column,
                        kind,
                        range,
                        classes,
                    });
                }
                "model" => {
                    check_keys(s, &["name", "results"])?;
                    cfg.models.push(ModelEntry {
                        name: required(s, "name")?.to_string(),
                        results: PathBuf::from(required(s, "results")?),
                    });
                }
                other => {
                    return Err(MetricsError::Input(format!(
                        "line {}: unknown section [{other}]",
                        s.line
                    )))
                }
            }
        }
        if cfg.tasks.is_empty() {
            return Err(MetricsError::Input("report config lists no [task] sections".into()));
        }
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self, MetricsError> {
        let source = std::fs::read_to_string(path)
            .map_err(|e| MetricsError::Input(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&source)
    }
}

/// Human annotations keyed by image, then column.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroundTruth {
    pub columns: Vec<String>,
    pub rows: BTreeMap<String, BTreeMap<String, String>>,
}

impl GroundTruth {
    pub fn from_reader<R: Read>(reader: R) -> Result<Self, MetricsError> {
        let table = ResultsTable::from_reader(reader)
            .map_err(|e| MetricsError::Input(format!("ground truth: {e}")))?;
        let mut rows = BTreeMap::new();
        for row in table.rows {
            rows.insert(row.image, row.cells);
        }
        Ok(GroundTruth {
            columns: table.header[1..].to_vec(),
            rows,
        })
    }

    pub fn read_csv(path: &Path) -> Result<Self, MetricsError> {
        let file = std::fs::File::open(path)
            .map_err(|e| MetricsError::Input(format!("cannot read {}: {e}", path.display())))?;
        Self::from_reader(file)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TaskMetrics {
    Binary(BinaryMetrics),
    Count(CountMetrics),
    Continuous(ContinuousMetrics),
    Ordinal(OrdinalMetrics),
}

impl TaskMetrics {
    /// `(name, value)` pairs; rates are fractions, `None` is undefined.
    pub fn entries(&self) -> Vec<(&'static str, Option<f64>)> {
        match *self {
            TaskMetrics::Binary(m) => vec![
                ("accuracy", Some(m.accuracy)),
                ("sensitivity", m.sensitivity),
                ("specificity", m.specificity),
                ("cohen_kappa", Some(m.cohen_kappa)),
            ],
            TaskMetrics::Count(m) => vec![
                ("mae", Some(m.mae)),
                ("bias", Some(m.bias)),
                ("exact", Some(m.exact)),
                ("within1", Some(m.within1)),
                ("within2", Some(m.within2)),
                ("pearson_r", m.pearson_r),
            ],
            TaskMetrics::Continuous(m) => vec![
                ("mae", Some(m.mae)),
                ("bias", Some(m.bias)),
                ("mape", m.mape),
                ("within10m", Some(m.within10m)),
                ("pearson_r", m.pearson_r),
            ],
            TaskMetrics::Ordinal(m) => vec![
                ("exact", Some(m.exact)),
                ("within1class", Some(m.within1class)),
                ("mae_class", Some(m.mae_class)),
                ("weighted_kappa_linear", Some(m.weighted_kappa_linear)),
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskReport {
    pub column: String,
    pub kind: EvalKind,
    pub range: f64,
    pub classes: Option<u32>,
    pub n_evaluated: usize,
    pub n_na: usize,
    pub proximity: f64,
    pub metrics: TaskMetrics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub model: String,
    pub tasks: Vec<TaskReport>,
    /// Unweighted mean of the per-task proximities.
    pub overall_proximity: f64,
    pub reliability: ReliabilityRates,
}

fn parse_bool_cell(s: &str) -> Option<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "1" | "yes" | "true" => Some(true),
        "0" | "no" | "false" => Some(false),
        _ => None,
    }
}

fn parse_class_cell(s: &str, classes: u32) -> Option<u32> {
    let v: f64 = s.trim().parse().ok()?;
    (v.fract() == 0.0 && v >= 1.0 && v <= f64::from(classes)).then_some(v as u32)
}

/// Numeric encoding of a cell under `kind`; `None` when the cell is not a
/// valid value of that kind.
fn cell_value(kind: EvalKind, classes: u32, s: &str) -> Option<f64> {
    let s = s.trim();
    if s.is_empty() || s == NA {
        return None;
    }
    match kind {
        EvalKind::Binary => parse_bool_cell(s).map(|b| f64::from(u8::from(b))),
        EvalKind::Count | EvalKind::Continuous => s.parse::<f64>().ok().filter(|v| v.is_finite()),
        EvalKind::Ordinal => parse_class_cell(s, classes).map(f64::from),
    }
}

fn evaluate_task(
    task: &EvalTask,
    results: &ResultsTable,
    truth: &GroundTruth,
) -> Result<TaskReport, MetricsError> {
    let terr = |message: String| MetricsError::Task {
        task: task.column.clone(),
        message,
    };
    if !results.has_column(&task.column) {
        return Err(terr("column missing from results".into()));
    }
    if !truth.columns.contains(&task.column) {
        return Err(terr("column missing from ground truth".into()));
    }

    // Truth values across the whole truth file; they fix R and K.
    let raw_truth: Vec<(&str, &str)> = truth
        .rows
        .iter()
        .filter_map(|(img, cells)| cells.get(&task.column).map(|v| (img.as_str(), v.as_str())))
        .filter(|(_, v)| !v.trim().is_empty() && v.trim() != NA)
        .collect();
    let numeric_truth = |img: &str, v: &str, classes: u32| {
        cell_value(task.kind, classes, v)
            .ok_or_else(|| terr(format!("invalid ground-truth value `{v}` for image {img}")))
    };
    let classes = match task.kind {
        EvalKind::Ordinal => match task.classes {
            Some(k) => k,
            None => raw_truth
                .iter()
                .filter_map(|(_, v)| v.trim().parse::<f64>().ok())
                .fold(2.0f64, f64::max) as u32,
        },
        _ => 0,
    };
    let mut truth_values = BTreeMap::new();
    for (img, v) in &raw_truth {
        truth_values.insert(*img, numeric_truth(img, v, classes)?);
    }
    let range = match (task.kind, task.range) {
        (EvalKind::Binary, _) => 1.0,
        (_, Some(r)) => r,
        (_, None) => {
            let (lo, hi) = truth_values
                .values()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
            hi - lo
        }
    };
    if range.is_nan() || range <= 0.0 {
        return Err(terr(format!(
            "proximity range is {range}; constant ground truth needs an explicit `range`"
        )));
    }

    let mut t_vals = Vec::new();
    let mut p_vals = Vec::new();
    let mut n_na = 0;
    for row in &results.rows {
        let Some(&t) = truth_values.get(row.image.as_str()) else {
            continue;
        };
        match cell_value(task.kind, classes, row.get(&task.column)) {
            Some(p) => {
                t_vals.push(t);
                p_vals.push(p);
            }
            None => n_na += 1,
        }
    }
    if t_vals.is_empty() {
        return Err(terr("no evaluable (truth, prediction) pairs".into()));
    }

    let pred_opt: Vec<Option<f64>> = p_vals.iter().copied().map(Some).collect();
    let proximity = task_proximity(&t_vals, &pred_opt, range)?;
    let metrics = match task.kind {
        EvalKind::Binary => {
            let tb: Vec<bool> = t_vals.iter().map(|v| *v == 1.0).collect();
            let pb: Vec<bool> = p_vals.iter().map(|v| *v == 1.0).collect();
            TaskMetrics::Binary(binary_metrics(&tb, &pb)?)
        }
        EvalKind::Count => TaskMetrics::Count(count_metrics(&t_vals, &p_vals)?),
        EvalKind::Continuous => TaskMetrics::Continuous(continuous_metrics(&t_vals, &p_vals)?),
        EvalKind::Ordinal => {
            let tc: Vec<u32> = t_vals.iter().map(|v| *v as u32).collect();
            let pc: Vec<u32> = p_vals.iter().map(|v| *v as u32).collect();
            TaskMetrics::Ordinal(ordinal_metrics(&tc, &pc, classes)?)
        }
    };
    Ok(TaskReport {
        column: task.column.clone(),
        kind: task.kind,
        range,
        classes: (task.kind == EvalKind::Ordinal).then_some(classes),
        n_evaluated: t_vals.len(),
        n_na,
        proximity,
        metrics,
    })
}

/// Scores one results table. Every results image must appear in the ground
/// truth; truth images without a results row are simply not evaluated.
pub fn evaluate(
    model: &str,
    results: &ResultsTable,
    truth: &GroundTruth,
    tasks: &[EvalTask],
) -> Result<MetricReport, MetricsError> {
    let unknown: Vec<String> = results
        .rows
        .iter()
        .filter(|r| !truth.rows.contains_key(&r.image))
        .map(|r| r.image.clone())
        .collect();
    if !unknown.is_empty() {
        return Err(MetricsError::UnknownImages(unknown));
    }
    if tasks.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let reports = tasks
        .iter()
        .map(|t| evaluate_task(t, results, truth))
        .collect::<Result<Vec<_>, _>>()?;
    let overall_proximity = reports.iter().map(|r| r.proximity).sum::<f64>() / reports.len() as f64;
    let columns: Vec<&str> = tasks.iter().map(|t| t.column.as_str()).collect();
    Ok(MetricReport {
        model: model.to_string(),
        tasks: reports,
        overall_proximity,
        reliability: reliability_rates(results, &columns),
    })
}

fn is_rate(metric: &str) -> bool {
    matches!(
        metric,
        "accuracy" | "sensitivity" | "specificity" | "exact" | "within1" | "within2" | "within10m" | "within1class"
    )
}

fn fmt_metric(metric: &str, value: Option<f64>) -> String {
    match value {
        None => NA.to_string(),
        Some(v) if is_rate(metric) => format!("{:.1}%", v * 100.0),
        Some(v) if metric == "mape" => format!("{v:.1}%"),
        Some(v) => format!("{v:.2}"),
    }
}

impl MetricReport {
    /// `(task, proximity)` pairs for [`rank_models`](super::rank_models).
    pub fn proximities(&self) -> Vec<(String, f64)> {
        self.tasks.iter().map(|t| (t.column.clone(), t.proximity)).collect()
    }

    /// Plain-text tables, percentages to one decimal.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let r = &self.reliability;
        let _ = writeln!(out, "Model: {}", self.model);
        let _ = writeln!(out, "Overall proximity: {:.1}%", self.overall_proximity * 100.0);
        let _ = writeln!(out, "NA rate: {:.1}% ({}/{} runs)", r.na_rate() * 100.0, r.na_runs, r.total_runs);
        let _ = writeln!(
            out,
            "Truncation rate: {:.1}% ({}/{} checks)",
            r.truncation_rate() * 100.0,
            r.truncated,
            r.checks
        );
        for t in &self.tasks {
            let _ = write!(out, "\n{} ({}, R={}", t.column, t.kind, t.range);
            if let Some(k) = t.classes {
                let _ = write!(out, ", K={k}");
            }
            out.push_str(")\n");
            let _ = writeln!(out, "  {:<22}{}", "n_evaluated", t.n_evaluated);
            let _ = writeln!(out, "  {:<22}{}", "n_na", t.n_na);
            for (name, v) in t.metrics.entries() {
                let _ = writeln!(out, "  {:<22}{}", name, fmt_metric(name, v));
            }
            let _ = writeln!(out, "  {:<22}{:.1}%", "proximity", t.proximity * 100.0);
        }
        out
    }

    /// `model,task,metric,value` rows at full precision; undefined values are `NA`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(["model", "task", "metric", "value"])
            .expect("in-memory write");
        let mut put = |task: &str, metric: &str, value: String| {
            w.write_record([self.model.as_str(), task, metric, value.as_str()])
                .expect("in-memory write");
        };
        for t in &self.tasks {
            put(&t.column, "n_evaluated", t.n_evaluated.to_string());
            put(&t.column, "n_na", t.n_na.to_string());
            put(&t.column, "range", t.range.to_string());
            for (name, v) in t.metrics.entries() {
                put(&t.column, name, v.map_or_else(|| NA.to_string(), |v| v.to_string()));
            }
            put(&t.column, "proximity", t.proximity.to_string());
        }
        put("overall", "proximity", self.overall_proximity.to_string());
        put("overall", "na_rate", self.reliability.na_rate().to_string());
        put("overall", "truncation_rate", self.reliability.truncation_rate().to_string());
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }
}

/// Ranking as CSV: `rank,model,<task...>,mean`, proximities in percent.
pub fn ranking_csv(rows: &[RankingRow]) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    if let Some(first) = rows.first() {
        let mut header = vec!["rank".to_string(), "model".to_string()];
        header.extend(first.per_task.iter().map(|(t, _)| t.clone()));
        header.push("mean".into());
        w.write_record(&header).expect("in-memory write");
    }
    for r in rows {
        let mut rec = vec![r.rank.to_string(), r.name.clone()];
        rec.extend(r.per_task.iter().map(|(_, v)| format!("{:.1}", v * 100.0)));
        rec.push(format!("{:.1}", r.mean * 100.0));
        w.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}
