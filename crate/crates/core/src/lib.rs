//! Benchmark harness for vision-language models served behind
//! chat-completions endpoints.
//!
//! The pipeline runs in this order:
//!
//! 1. [`config`] loads a run configuration (tasks, generation parameters, backend).
//! 2. [`prompt`] assembles the four-part prompt for each task.
//! 3. [`backend`] sends image + prompt to the endpoint and cleans the reply.
//! 4. [`parse`] turns cleaned text into a typed [`Answer`].
//! 5. [`consensus`] votes over repeated runs.
//! 6. [`batch`] drives all images and tasks, persisting a resumable CSV.
//! 7. [`metrics`] scores a results CSV against ground truth.

pub mod backend;
pub mod batch;
pub mod config;
pub mod consensus;
pub mod metrics;
pub mod parse;
pub mod prompt;

pub use backend::{BackendClient, BackendError, BackendKind, BackendSpec, ImageRef, RawInference};
pub use batch::{run_batch, BatchError, BatchSummary, ResultsRow, ResultsTable, RunOptions};
pub use config::{
    effective_max_tokens, load_config, ConfigError, GenerationParams, RunConfig, TaskSpec,
    TaskType,
};
pub use consensus::{compute_consensus, ConsensusOutcome};
pub use parse::{parse_response, Answer, ParsedValue};
pub use prompt::{build_prompt, cot_directive, PromptText};
