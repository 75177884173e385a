//! Run configuration: task definitions, generation parameters and backend
//! settings, loaded from a sectioned text document.

pub mod document;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use crate::backend::{BackendKind, BackendSpec};
use document::{parse_document, write_entry, Section};

/// Token budget forced on tasks running in reasoning mode.
pub const REASONING_TOKEN_BUDGET: u32 = 1024;
/// Upper bound for the configurable generation length.
pub const MAX_TOKEN_LIMIT: u32 = 1500;
pub const MAX_TASKS: usize = 10;
pub const MIN_RUNS: u8 = 2;
pub const MAX_RUNS: u8 = 5;
pub const DEFAULT_RUNS: u8 = 2;

/// Column suffixes owned by the results layout.
pub const RESERVED_SUFFIXES: [&str; 5] = [
    "_consensus",
    "_agreement",
    "_runs",
    "_reasoning",
    "_truncated",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TaskType {
    Numeric,
    Category,
    Boolean,
    Text,
}

impl TaskType {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskType::Numeric => "numeric",
            TaskType::Category => "category",
            TaskType::Boolean => "boolean",
            TaskType::Text => "text",
        }
    }
}

impl fmt::Display for TaskType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "numeric" => Ok(TaskType::Numeric),
            "category" => Ok(TaskType::Category),
            "boolean" => Ok(TaskType::Boolean),
            "text" => Ok(TaskType::Text),
            other => Err(format!(
                "unknown task type `{other}` (expected numeric, category, boolean or text)"
            )),
        }
    }
}

/// One analysis task: the output column, the four prompt parts and how the
/// answer is parsed and validated.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskSpec {
    pub column: String,
    /// Overrides the global role when non-empty.
    pub role: String,
    pub task: String,
    pub theory: String,
    pub format: String,
    pub task_type: TaskType,
    pub consensus_enabled: bool,
    pub n_runs: u8,
    pub numeric_tolerance_pct: f64,
    pub reasoning_enabled: bool,
}

impl TaskSpec {
    pub fn new(column: impl Into<String>, task_type: TaskType) -> Self {
        TaskSpec {
            column: column.into(),
            role: String::new(),
            task: String::new(),
            theory: String::new(),
            format: String::new(),
            task_type,
            consensus_enabled: false,
            n_runs: DEFAULT_RUNS,
            numeric_tolerance_pct: 0.0,
            reasoning_enabled: false,
        }
    }

    /// Number of inference runs per image: `n_runs` with consensus, else one.
    pub fn effective_runs(&self) -> usize {
        if self.consensus_enabled {
            usize::from(self.n_runs)
        } else {
            1
        }
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let col = &self.column;
        let invalid = |reason: &str| ConfigError::InvalidColumn {
            column: col.clone(),
            reason: reason.to_string(),
        };
        if col.is_empty() {
            return Err(invalid("column name is empty"));
        }
        if col.chars().any(|c| matches!(c, ',' | '"' | '\n' | '\r')) {
            return Err(invalid("column name contains a comma, quote or newline"));
        }
        if col.trim() != col {
            return Err(invalid("column name has surrounding whitespace"));
        }
        if col == "image" {
            return Err(invalid("`image` is the row key column"));
        }
        if let Some(sfx) = RESERVED_SUFFIXES.iter().find(|s| col.ends_with(*s)) {
            return Err(invalid(&format!("column name ends with reserved suffix `{sfx}`")));
        }
        if !(MIN_RUNS..=MAX_RUNS).contains(&self.n_runs) {
            return Err(ConfigError::RunsOutOfRange {
                column: col.clone(),
                runs: i64::from(self.n_runs),
            });
        }
        if !self.numeric_tolerance_pct.is_finite() || self.numeric_tolerance_pct < 0.0 {
            return Err(ConfigError::InvalidValue {
                field: format!("{col}.tolerance_pct"),
                value: self.numeric_tolerance_pct.to_string(),
                reason: "must be a non-negative percentage".into(),
            });
        }
        if self.task_type != TaskType::Numeric && self.numeric_tolerance_pct != 0.0 {
            return Err(ConfigError::ToleranceOnNonNumeric {
                column: col.clone(),
                task_type: self.task_type,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationParams {
    /// `0` selects greedy decoding at the backend.
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: u32,
    pub seed: Option<u64>,
}

impl Default for GenerationParams {
    fn default() -> Self {
        GenerationParams {
            temperature: 0.0,
            top_p: 1.0,
            max_tokens: 50,
            seed: None,
        }
    }
}

impl GenerationParams {
    fn validate(&self) -> Result<(), ConfigError> {
        let bad = |field: &str, value: String, reason: &str| ConfigError::InvalidValue {
            field: field.into(),
            value,
            reason: reason.into(),
        };
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            return Err(bad("temperature", self.temperature.to_string(), "must be >= 0"));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(bad("top_p", self.top_p.to_string(), "must be in (0, 1]"));
        }
        if !(1..=MAX_TOKEN_LIMIT).contains(&self.max_tokens) {
            return Err(bad(
                "max_tokens",
                self.max_tokens.to_string(),
                "must be in [1, 1500]",
            ));
        }
        Ok(())
    }
}

/// Token limit for one task: the reasoning budget when reasoning mode is on,
/// the configured `max_tokens` otherwise.
pub fn effective_max_tokens(task: &TaskSpec, params: &GenerationParams) -> u32 {
    if task.reasoning_enabled {
        REASONING_TOKEN_BUDGET
    } else {
        params.max_tokens
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub image_dir: PathBuf,
    pub output_csv: PathBuf,
    pub backend: BackendSpec,
    pub global_role: String,
    pub tasks: Vec<TaskSpec>,
    pub params: GenerationParams,
    pub parallel_images: usize,
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let source = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        load_config(&source)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.tasks.is_empty() {
            return Err(ConfigError::EmptyTaskList);
        }
        if self.tasks.len() > MAX_TASKS {
            return Err(ConfigError::TooManyTasks(self.tasks.len()));
        }
        for (i, task) in self.tasks.iter().enumerate() {
            task.validate()?;
            if self.tasks[..i].iter().any(|t| t.column == task.column) {
                return Err(ConfigError::DuplicateColumn(task.column.clone()));
            }
        }
        self.params.validate()?;
        if self.parallel_images == 0 {
            return Err(ConfigError::InvalidValue {
                field: "parallel_images".into(),
                value: "0".into(),
                reason: "must be >= 1".into(),
            });
        }
        if self.backend.url.trim().is_empty() {
            return Err(ConfigError::MissingKey {
                section: "global".into(),
                key: "backend_url".into(),
            });
        }
        if self.backend.request_timeout.is_zero() {
            return Err(ConfigError::InvalidValue {
                field: "timeout".into(),
                value: "0".into(),
                reason: "must be > 0 seconds".into(),
            });
        }
        Ok(())
    }

    /// Writes the config in the format [`load_config`] reads.
    pub fn render(&self) -> String {
        let mut out = String::from("[global]\n");
        write_entry(&mut out, "image_dir", &self.image_dir.to_string_lossy());
        write_entry(&mut out, "output_csv", &self.output_csv.to_string_lossy());
        write_entry(&mut out, "backend_url", &self.backend.url);
        write_entry(&mut out, "backend_kind", self.backend.kind.as_str());
        write_entry(&mut out, "model", &self.backend.model_name);
        write_entry(&mut out, "timeout", &self.backend.request_timeout.as_secs().to_string());
        write_entry(&mut out, "retries", &self.backend.max_retries.to_string());
        write_entry(&mut out, "role", &self.global_role);
        write_entry(&mut out, "temperature", &self.params.temperature.to_string());
        write_entry(&mut out, "top_p", &self.params.top_p.to_string());
        write_entry(&mut out, "max_tokens", &self.params.max_tokens.to_string());
        if let Some(seed) = self.params.seed {
            write_entry(&mut out, "seed", &seed.to_string());
        }
        write_entry(&mut out, "parallel_images", &self.parallel_images.to_string());
        for t in &self.tasks {
            out.push_str("\n[task]\n");
            write_entry(&mut out, "column", &t.column);
            write_entry(&mut out, "type", t.task_type.as_str());
            if !t.role.is_empty() {
                write_entry(&mut out, "role", &t.role);
            }
            write_entry(&mut out, "task", &t.task);
            write_entry(&mut out, "theory", &t.theory);
            write_entry(&mut out, "format", &t.format);
            write_entry(&mut out, "consensus", &t.consensus_enabled.to_string());
            write_entry(&mut out, "runs", &t.n_runs.to_string());
            write_entry(&mut out, "tolerance_pct", &t.numeric_tolerance_pct.to_string());
            write_entry(&mut out, "reasoning", &t.reasoning_enabled.to_string());
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("syntax error: {0}")]
    Syntax(#[from] document::SyntaxError),
    #[error("cannot read {path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("line {line}: unknown section [{name}]")]
    UnknownSection { name: String, line: usize },
    #[error("line {line}: unknown key `{key}` in [{section}]")]
    UnknownKey {
        section: String,
        key: String,
        line: usize,
    },
    #[error("missing required key `{key}` in [{section}]")]
    MissingKey { section: String, key: String },
    #[error("invalid value `{value}` for `{field}`: {reason}")]
    InvalidValue {
        field: String,
        value: String,
        reason: String,
    },
    #[error("empty task list: at least one [task] section is required")]
    EmptyTaskList,
    #[error("too many tasks: {0} configured, at most 10 allowed")]
    TooManyTasks(usize),
    #[error("duplicate column `{0}`")]
    DuplicateColumn(String),
    #[error("invalid column `{column}`: {reason}")]
    InvalidColumn { column: String, reason: String },
    #[error("task `{column}`: runs = {runs} is outside [2, 5]")]
    RunsOutOfRange { column: String, runs: i64 },
    #[error("task `{column}`: tolerance_pct is only allowed on numeric tasks (type is {task_type})")]
    ToleranceOnNonNumeric { column: String, task_type: TaskType },
}

const GLOBAL_KEYS: &[&str] = &[
    "image_dir",
    "output_csv",
    "backend_url",
    "backend_kind",
    "model",
    "timeout",
    "retries",
    "role",
    "temperature",
    "top_p",
    "max_tokens",
    "seed",
    "parallel_images",
];

const TASK_KEYS: &[&str] = &[
    "column",
    "role",
    "task",
    "theory",
    "format",
    "type",
    "consensus",
    "runs",
    "tolerance_pct",
    "reasoning",
];

/// Typed access to one section's entries.
struct Fields<'a> {
    section: &'a Section,
    prefix: String,
}

impl<'a> Fields<'a> {
    fn new(section: &'a Section, allowed: &[&str], prefix: String) -> Result<Self, ConfigError> {
        if let Some(e) = section.entries.iter().find(|e| !allowed.contains(&e.key.as_str())) {
            return Err(ConfigError::UnknownKey {
                section: section.name.clone(),
                key: e.key.clone(),
                line: e.line,
            });
        }
        Ok(Fields { section, prefix })
    }

    fn text(&self, key: &str) -> Option<&'a str> {
        self.section.get(key).map(|e| e.value.as_str())
    }

    fn required(&self, key: &str) -> Result<&'a str, ConfigError> {
        self.text(key)
            .filter(|v| !v.trim().is_empty())
            .ok_or_else(|| ConfigError::MissingKey {
                section: self.section.name.clone(),
                key: key.into(),
            })
    }

    fn parsed<T: FromStr>(&self, key: &str, what: &str) -> Result<Option<T>, ConfigError> {
        match self.text(key) {
            None => Ok(None),
            Some(raw) => raw.trim().parse().map(Some).map_err(|_| ConfigError::InvalidValue {
                field: format!("{}{key}", self.prefix),
                value: raw.to_string(),
                reason: format!("expected {what}"),
            }),
        }
    }

    fn boolean(&self, key: &str) -> Result<Option<bool>, ConfigError> {
        match self.text(key).map(|v| v.trim().to_ascii_lowercase()) {
            None => Ok(None),
            Some(v) if v == "true" => Ok(Some(true)),
            Some(v) if v == "false" => Ok(Some(false)),
            Some(v) => Err(ConfigError::InvalidValue {
                field: format!("{}{key}", self.prefix),
                value: v,
                reason: "expected true or false".into(),
            }),
        }
    }
}

/// Parses and validates a run configuration document.
pub fn load_config(source: &str) -> Result<RunConfig, ConfigError> {
    let sections = parse_document(source)?;
    let mut global: Option<&Section> = None;
    let mut task_sections = Vec::new();
    for s in &sections {
        match s.name.as_str() {
            "global" if global.is_none() => global = Some(s),
            "global" => {
                return Err(ConfigError::Syntax(document::SyntaxError {
                    line: s.line,
                    message: "second [global] section".into(),
                }))
            }
            "task" => task_sections.push(s),
            other => {
                return Err(ConfigError::UnknownSection {
                    name: other.into(),
                    line: s.line,
                })
            }
        }
    }
    let global = global.ok_or_else(|| ConfigError::MissingKey {
        section: "global".into(),
        key: "[global] section".into(),
    })?;
    let g = Fields::new(global, GLOBAL_KEYS, String::new())?;

    let kind = match g.text("backend_kind") {
        None => BackendKind::Generic,
        Some(raw) => raw.parse().map_err(|reason| ConfigError::InvalidValue {
            field: "backend_kind".into(),
            value: raw.into(),
            reason,
        })?,
    };
    let defaults = BackendSpec::new("");
    let backend = BackendSpec {
        url: g.required("backend_url")?.trim().to_string(),
        kind,
        model_name: g
            .text("model")
            .map(|m| m.trim().to_string())
            .unwrap_or(defaults.model_name),
        request_timeout: g
            .parsed::<u64>("timeout", "a whole number of seconds")?
            .map(Duration::from_secs)
            .unwrap_or(defaults.request_timeout),
        max_retries: g
            .parsed("retries", "a non-negative integer")?
            .unwrap_or(defaults.max_retries),
    };

    let base = GenerationParams::default();
    let params = GenerationParams {
        temperature: g.parsed("temperature", "a number")?.unwrap_or(base.temperature),
        top_p: g.parsed("top_p", "a number")?.unwrap_or(base.top_p),
        max_tokens: g.parsed("max_tokens", "an integer")?.unwrap_or(base.max_tokens),
        seed: g.parsed("seed", "a non-negative integer")?,
    };

    if task_sections.is_empty() {
        return Err(ConfigError::EmptyTaskList);
    }
    if task_sections.len() > MAX_TASKS {
        return Err(ConfigError::TooManyTasks(task_sections.len()));
    }
    let tasks = task_sections
        .into_iter()
        .map(load_task)
        .collect::<Result<Vec<_>, _>>()?;

    let config = RunConfig {
        image_dir: PathBuf::from(g.required("image_dir")?.trim()),
        output_csv: PathBuf::from(g.required("output_csv")?.trim()),
        backend,
        global_role: g.text("role").unwrap_or_default().to_string(),
        tasks,
        params,
        parallel_images: g.parsed("parallel_images", "an integer")?.unwrap_or(1),
    };
    config.validate()?;
    Ok(config)
}

fn load_task(section: &Section) -> Result<TaskSpec, ConfigError> {
    let probe = Fields::new(section, TASK_KEYS, String::new())?;
    let column = probe.required("column")?.trim().to_string();
    let f = Fields::new(section, TASK_KEYS, format!("{column}."))?;

    let raw_type = f.required("type")?;
    let task_type: TaskType = raw_type.parse().map_err(|reason| ConfigError::InvalidValue {
        field: format!("{column}.type"),
        value: raw_type.into(),
        reason,
    })?;
    let runs: Option<i64> = f.parsed("runs", "an integer")?;
    let n_runs = match runs {
        None => DEFAULT_RUNS,
        Some(r) if (i64::from(MIN_RUNS)..=i64::from(MAX_RUNS)).contains(&r) => r as u8,
        Some(r) => return Err(ConfigError::RunsOutOfRange { column, runs: r }),
    };

    Ok(TaskSpec {
        role: f.text("role").unwrap_or_default().to_string(),
        task: f.text("task").unwrap_or_default().to_string(),
        theory: f.text("theory").unwrap_or_default().to_string(),
        format: f.text("format").unwrap_or_default().to_string(),
        task_type,
        consensus_enabled: f.boolean("consensus")?.unwrap_or(false),
        n_runs,
        numeric_tolerance_pct: f.parsed("tolerance_pct", "a percentage")?.unwrap_or(0.0),
        reasoning_enabled: f.boolean("reasoning")?.unwrap_or(false),
        column,
    })
}
