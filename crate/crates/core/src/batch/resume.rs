//! Decides which (image, task) pairs still need to run against an existing
//! results file, upgrading its header when tasks were added.

use std::path::Path;

use super::table::{column_group, header_for, ResultsTable};
use super::BatchError;
use crate::backend::ImageRef;
use crate::config::{TaskSpec, RESERVED_SUFFIXES};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorkItem {
    pub image: ImageRef,
    /// Indices into the configured task list, in config order.
    pub tasks: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResumePlan {
    /// Existing rows under the upgraded header.
    pub table: ResultsTable,
    pub work: Vec<WorkItem>,
}

fn check_group(table: &ResultsTable, task: &TaskSpec) -> Result<bool, BatchError> {
    let expected = column_group(task);
    let present: Vec<String> = std::iter::once(task.column.clone())
        .chain(RESERVED_SUFFIXES.iter().map(|s| format!("{}{s}", task.column)))
        .filter(|c| table.has_column(c))
        .collect();
    if present.is_empty() {
        return Ok(false);
    }
    let mut want = expected.clone();
    want.sort();
    let mut have = present;
    have.sort();
    if want != have {
        return Err(BatchError::SchemaConflict {
            column: task.column.clone(),
            message: format!(
                "existing columns {have:?} do not match the configured layout {expected:?}"
            ),
        });
    }
    Ok(true)
}

/// Builds the upgraded table and the work list. A task is done for an image
/// when its value cell is non-empty (`NA` counts as done).
pub fn resume_plan(
    existing: Option<ResultsTable>,
    tasks: &[TaskSpec],
    images: &[ImageRef],
) -> Result<ResumePlan, BatchError> {
    let table = match existing {
        None => ResultsTable::new(header_for(tasks)),
        Some(mut table) => {
            for task in tasks {
                if !check_group(&table, task)? {
                    table.header.extend(column_group(task));
                }
            }
            table.sort();
            table
        }
    };

    let work = images
        .iter()
        .filter_map(|image| {
            let row = table.row(&image.file_name);
            let pending: Vec<usize> = tasks
                .iter()
                .enumerate()
                .filter(|(_, t)| row.is_none_or(|r| r.get(&t.column).is_empty()))
                .map(|(i, _)| i)
                .collect();
            (!pending.is_empty()).then(|| WorkItem {
                image: image.clone(),
                tasks: pending,
            })
        })
        .collect();

    Ok(ResumePlan { table, work })
}

/// [`resume_plan`] against the CSV at `path`, treating a missing file as a
/// cold start.
pub fn resume_plan_from_path(
    path: &Path,
    tasks: &[TaskSpec],
    images: &[ImageRef],
) -> Result<ResumePlan, BatchError> {
    let existing = if path.exists() {
        Some(ResultsTable::read_csv(path)?)
    } else {
        None
    };
    resume_plan(existing, tasks, images)
}
