//! Batch execution: every configured task on every image, one CSV row per
//! image, resumable and tolerant of per-task failures.

mod resume;
mod runner;
mod table;

use std::path::{Path, PathBuf};

pub use resume::{resume_plan, resume_plan_from_path, ResumePlan, WorkItem};
pub use runner::{run_batch, run_task, BatchSummary, ImageProgress, ProgressFn, RunOptions, TaskCells};
pub use table::{column_group, header_for, ResultsRow, ResultsTable, IMAGE_COLUMN, NA};

use crate::backend::ImageRef;

pub const IMAGE_EXTENSIONS: [&str; 3] = ["jpg", "jpeg", "png"];

#[derive(Debug, thiserror::Error)]
pub enum BatchError {
    #[error("cannot read image directory {path}: {message}")]
    ImageDir { path: PathBuf, message: String },
    #[error("output directory {0} does not exist")]
    OutputDir(PathBuf),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("cannot parse results CSV {path}: {message}")]
    Csv { path: PathBuf, message: String },
    #[error("results file is incompatible with task `{column}`: {message}; use a fresh output path (or --fresh)")]
    SchemaConflict { column: String, message: String },
    #[error("backend setup failed: {0}")]
    Backend(String),
}

impl BatchError {
    pub(crate) fn io(path: &Path, err: std::io::Error) -> Self {
        BatchError::Io {
            path: path.to_path_buf(),
            message: err.to_string(),
        }
    }
}

/// Image files (jpg/jpeg/png, any case) in `dir`, byte-wise sorted by name.
pub fn list_images(dir: &Path) -> Result<Vec<ImageRef>, BatchError> {
    let err = |e: std::io::Error| BatchError::ImageDir {
        path: dir.to_path_buf(),
        message: e.to_string(),
    };
    let mut images = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(err)? {
        let entry = entry.map_err(err)?;
        if !entry.file_type().map_err(err)?.is_file() {
            continue;
        }
        let Ok(file_name) = entry.file_name().into_string() else {
            tracing::warn!("skipping non-UTF-8 file name {:?}", entry.file_name());
            continue;
        };
        let is_image = Path::new(&file_name)
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| IMAGE_EXTENSIONS.iter().any(|x| x.eq_ignore_ascii_case(e)));
        if is_image {
            images.push(ImageRef {
                path: entry.path(),
                file_name,
            });
        }
    }
    images.sort_by(|a, b| a.file_name.as_bytes().cmp(b.file_name.as_bytes()));
    Ok(images)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn filters_and_sorts() {
        let dir = tempfile::tempdir().unwrap();
        for f in ["S27.jpg", "D01.png", "notes.txt", "S1.JPG", "a.jpeg", "b.gif"] {
            std::fs::write(dir.path().join(f), b"x").unwrap();
        }
        std::fs::create_dir(dir.path().join("sub.jpg")).unwrap();
        let names: Vec<String> = list_images(dir.path()).unwrap().into_iter().map(|i| i.file_name).collect();
        assert_eq!(names, ["D01.png", "S1.JPG", "S27.jpg", "a.jpeg"]);
    }

    #[test]
    fn empty_and_missing_dirs() {
        let dir = tempfile::tempdir().unwrap();
        assert!(list_images(dir.path()).unwrap().is_empty());
        assert!(matches!(
            list_images(&dir.path().join("nope")),
            Err(BatchError::ImageDir { .. })
        ));
    }
}
