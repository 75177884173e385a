use std::io::Write as _;
use std::path::Path;
use std::sync::Arc;

use futures::future::join_all;
use futures::stream::{self, StreamExt};

use super::resume::{resume_plan_from_path, resume_plan, WorkItem};
use super::table::{ResultsRow, ResultsTable, NA};
use super::{list_images, BatchError};
use crate::backend::{clean_output, BackendClient, ImageRef, InferenceRequest};
use crate::config::{effective_max_tokens, RunConfig, TaskSpec};
use crate::consensus::compute_consensus;
use crate::parse::{parse_response, Answer, ParsedValue};
use crate::prompt::build_prompt;

/// Per-image completion notice handed to [`RunOptions::progress`].
#[derive(Debug, Clone)]
pub struct ImageProgress {
    pub image: String,
    /// 1-based position among scheduled images, in completion order.
    pub completed: usize,
    pub scheduled: usize,
    pub tasks_run: usize,
    pub na_tasks: usize,
    pub truncated_tasks: usize,
}

pub type ProgressFn = Arc<dyn Fn(&ImageProgress) + Send + Sync>;

#[derive(Clone, Default)]
pub struct RunOptions {
    /// Ignore and overwrite an existing output file.
    pub fresh: bool,
    /// Process at most this many scheduled images, then stop.
    pub image_limit: Option<usize>,
    pub progress: Option<ProgressFn>,
}

#[derive(Debug, Clone)]
pub struct BatchSummary {
    pub images_total: usize,
    pub images_scheduled: usize,
    pub images_processed: usize,
    /// Task cells written as `NA` in this invocation.
    pub na_tasks: usize,
    /// Task cells flagged truncated in this invocation.
    pub truncated_tasks: usize,
    pub table: ResultsTable,
}

/// Outcome of one task on one image, ready to become CSV cells.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskCells {
    pub value: Answer,
    pub reasoning: Option<String>,
    pub agreement: Option<f64>,
    pub runs: Vec<Answer>,
    pub truncated: bool,
}

impl TaskCells {
    pub fn write_into(&self, task: &TaskSpec, row: &mut ResultsRow) {
        let c = &task.column;
        let value = self.value.to_cell();
        if task.reasoning_enabled {
            let trace = self.reasoning.clone().unwrap_or_else(|| NA.to_string());
            row.cells.insert(format!("{c}_reasoning"), trace);
        }
        if task.consensus_enabled {
            row.cells.insert(format!("{c}_consensus"), value.clone());
            row.cells.insert(
                format!("{c}_agreement"),
                format!("{:.2}", self.agreement.unwrap_or(0.0)),
            );
            let runs: Vec<String> = self.runs.iter().map(Answer::to_cell).collect();
            row.cells.insert(format!("{c}_runs"), runs.join(";"));
        }
        row.cells
            .insert(format!("{c}_truncated"), if self.truncated { "1" } else { "0" }.into());
        row.cells.insert(c.clone(), value);
    }
}

struct RunResult {
    parsed: ParsedValue,
    truncated: bool,
}

async fn run_once(
    client: &BackendClient,
    config: &RunConfig,
    task: &TaskSpec,
    image: &ImageRef,
    bytes: Option<&[u8]>,
    run: usize,
) -> RunResult {
    let failed = RunResult {
        parsed: Answer::Na.into(),
        truncated: false,
    };
    let Some(bytes) = bytes else {
        return failed;
    };
    let prompt = build_prompt(task, &config.global_role);
    let req = InferenceRequest {
        image,
        image_bytes: bytes,
        prompt: &prompt,
        params: &config.params,
        token_limit: effective_max_tokens(task, &config.params),
        column: &task.column,
        run,
    };
    match client.infer(req).await {
        Ok(raw) => {
            let cleaned = clean_output(&raw, &prompt);
            let parsed = parse_response(&cleaned, task.task_type, task.reasoning_enabled);
            let truncated = raw.truncated();
            if truncated {
                tracing::warn!(
                    image = %image.file_name,
                    column = %task.column,
                    run,
                    "generation hit the token limit ({}); answer may be cut off",
                    raw.token_limit
                );
            }
            tracing::info!(
                image = %image.file_name,
                column = %task.column,
                run,
                tokens = raw.generated_tokens,
                "parsed {}",
                parsed.answer
            );
            RunResult { parsed, truncated }
        }
        Err(e) => {
            tracing::warn!(image = %image.file_name, column = %task.column, run, "run failed: {e}");
            failed
        }
    }
}

/// Runs one task on one image: all consensus runs, then the vote.
pub async fn run_task(
    client: &BackendClient,
    config: &RunConfig,
    task: &TaskSpec,
    image: &ImageRef,
    bytes: Option<&[u8]>,
) -> TaskCells {
    let n = task.effective_runs();
    let results = join_all((1..=n).map(|run| run_once(client, config, task, image, bytes, run))).await;
    let truncated = results.iter().any(|r| r.truncated);
    let reasoning = results[0].parsed.reasoning_trace.clone();
    let runs: Vec<Answer> = results.into_iter().map(|r| r.parsed.answer).collect();
    if task.consensus_enabled {
        let outcome = compute_consensus(&runs, task.task_type, task.numeric_tolerance_pct)
            .expect("validated run count");
        TaskCells {
            value: outcome.value,
            reasoning,
            agreement: Some(outcome.agreement_ratio),
            runs: outcome.runs,
            truncated,
        }
    } else {
        TaskCells {
            value: runs[0].clone(),
            reasoning,
            agreement: None,
            runs,
            truncated,
        }
    }
}

struct ImageOutcome {
    row: ResultsRow,
    tasks_run: usize,
    na_tasks: usize,
    truncated_tasks: usize,
}

async fn run_image(client: &BackendClient, config: &RunConfig, item: WorkItem) -> ImageOutcome {
    let bytes = match item.image.read_bytes() {
        Ok(b) => Some(b),
        Err(e) => {
            tracing::warn!(image = %item.image.file_name, "cannot read image: {e}");
            None
        }
    };
    let mut row = ResultsRow::new(item.image.file_name.clone());
    let (mut na_tasks, mut truncated_tasks) = (0, 0);
    for &idx in &item.tasks {
        let task = &config.tasks[idx];
        let cells = run_task(client, config, task, &item.image, bytes.as_deref()).await;
        na_tasks += usize::from(cells.value.is_na());
        truncated_tasks += usize::from(cells.truncated);
        cells.write_into(task, &mut row);
    }
    ImageOutcome {
        row,
        tasks_run: item.tasks.len(),
        na_tasks,
        truncated_tasks,
    }
}

fn append(path: &Path, bytes: &[u8]) -> Result<(), BatchError> {
    let mut f = std::fs::OpenOptions::new()
        .append(true)
        .open(path)
        .map_err(|e| BatchError::io(path, e))?;
    f.write_all(bytes).and_then(|_| f.flush()).map_err(|e| BatchError::io(path, e))
}

/// Executes the configured tasks on every image not yet complete in
/// `config.output_csv`, appending each finished row and rewriting the file
/// sorted at the end.
pub async fn run_batch(
    config: &RunConfig,
    client: &BackendClient,
    options: &RunOptions,
) -> Result<BatchSummary, BatchError> {
    let images = list_images(&config.image_dir)?;
    let out = config.output_csv.as_path();
    let parent = out.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    if !parent.is_dir() {
        return Err(BatchError::OutputDir(parent.to_path_buf()));
    }

    let plan = if options.fresh {
        resume_plan(None, &config.tasks, &images)?
    } else {
        resume_plan_from_path(out, &config.tasks, &images)?
    };
    let mut table = plan.table;
    let mut work = plan.work;
    if let Some(limit) = options.image_limit {
        work.truncate(limit);
    }
    let scheduled = work.len();
    tracing::info!("{} of {} images scheduled", scheduled, images.len());
    table.write_csv(out)?;

    let mut summary = BatchSummary {
        images_total: images.len(),
        images_scheduled: scheduled,
        images_processed: 0,
        na_tasks: 0,
        truncated_tasks: 0,
        table: ResultsTable::new(Vec::new()),
    };

    let mut completed = stream::iter(work)
        .map(|item| run_image(client, config, item))
        .buffer_unordered(config.parallel_images.max(1));
    while let Some(outcome) = completed.next().await {
        let mut row = table.row(&outcome.row.image).cloned().unwrap_or_default();
        row.image.clone_from(&outcome.row.image);
        row.merge_from(outcome.row);
        append(out, &table.row_bytes(&row))?;
        table.upsert(row.clone());

        summary.images_processed += 1;
        summary.na_tasks += outcome.na_tasks;
        summary.truncated_tasks += outcome.truncated_tasks;
        if let Some(progress) = &options.progress {
            progress(&ImageProgress {
                image: row.image,
                completed: summary.images_processed,
                scheduled,
                tasks_run: outcome.tasks_run,
                na_tasks: outcome.na_tasks,
                truncated_tasks: outcome.truncated_tasks,
            });
        }
    }

    table.sort();
    table.write_csv(out)?;
    summary.table = table;
    Ok(summary)
}
