//! Four-part prompt assembly (role, task, theory, format) and the built-in
//! chain-of-thought directive used in reasoning mode.

use crate::config::{TaskSpec, TaskType};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptText {
    pub text: String,
    pub reasoning_active: bool,
}

/// Template revision of [`cot_directive`]. Bump whenever the wording changes.
pub const COT_TEMPLATE_VERSION: u32 = 1;

const COT_NUMERIC: &str = "First, describe what you observe in the image that is relevant to the task.
Then, reason step by step to reach your answer.
Finally, write your final answer on the last line, in exactly this format:
ANSWER: <integer>";

const COT_CATEGORY: &str = "First, describe what you observe in the image that is relevant to the task.
Then, reason step by step to reach your answer.
Finally, write your final answer on the last line, in exactly this format:
ANSWER: <label>";

const COT_BOOLEAN: &str = "First, describe what you observe in the image that is relevant to the task.
Then, reason step by step to reach your answer.
Finally, write your final answer on the last line, answering only yes or no, in exactly this format:
ANSWER: <yes or no>";

const COT_TEXT: &str = "First, describe what you observe in the image that is relevant to the task.
Then, reason step by step to reach your answer.
Finally, write your final answer on the last line, in exactly this format:
ANSWER: <text>";

/// Format block substituted for the task's own format in reasoning mode.
pub fn cot_directive(task_type: TaskType) -> &'static str {
    match task_type {
        TaskType::Numeric => COT_NUMERIC,
        TaskType::Category => COT_CATEGORY,
        TaskType::Boolean => COT_BOOLEAN,
        TaskType::Text => COT_TEXT,
    }
}

/// Joins ROLE, TASK, THEORY and FORMAT with single newlines, skipping empty
/// parts. The task's role wins over `global_role` when set.
pub fn build_prompt(task: &TaskSpec, global_role: &str) -> PromptText {
    let role = if task.role.is_empty() {
        global_role
    } else {
        task.role.as_str()
    };
    let format = if task.reasoning_enabled {
        cot_directive(task.task_type)
    } else {
        task.format.as_str()
    };
    let text = [role, task.task.as_str(), task.theory.as_str(), format]
        .into_iter()
        .filter(|part| !part.is_empty())
        .collect::<Vec<_>>()
        .join("\n");
    PromptText {
        text,
        reasoning_active: task.reasoning_enabled,
    }
}
