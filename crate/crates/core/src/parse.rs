//! Typed parsing of cleaned model output.
//!
//! Every parser is total: unparseable input yields [`Answer::Na`].

use std::fmt;
use std::sync::LazyLock;

use regex::Regex;

use crate::config::TaskType;

static NUMBER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"-?\d+(\.\d+)?").unwrap());

/// Leading phrases removed from category answers, tried in order.
pub const CATEGORY_PREFIXES: [&str; 4] = [
    "The answer is:",
    "The answer is",
    "Based on the image,",
    "Answer:",
];

/// Marker searched for in the trailing lines of a reasoning trace.
pub const ANSWER_MARKER: &str = "answer:";
/// Number of trailing non-empty lines searched for [`ANSWER_MARKER`].
pub const ANSWER_SCAN_LINES: usize = 5;

const TRUE_WORDS: [&str; 3] = ["yes", "true", "1"];
const FALSE_WORDS: [&str; 3] = ["no", "false", "0"];

#[derive(Debug, Clone, PartialEq)]
pub enum Answer {
    Number(f64),
    Label(String),
    Bool(bool),
    FreeText(String),
    Na,
}

impl Answer {
    pub fn is_na(&self) -> bool {
        matches!(self, Answer::Na)
    }

    pub fn as_number(&self) -> Option<f64> {
        match self {
            Answer::Number(v) => Some(*v),
            _ => None,
        }
    }

    /// CSV cell form: booleans as `1`/`0`, missing values as `NA`.
    pub fn to_cell(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Answer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            // normalise -0
            Answer::Number(v) if *v == 0.0 => f.write_str("0"),
            Answer::Number(v) => write!(f, "{v}"),
            Answer::Label(s) | Answer::FreeText(s) => f.write_str(s),
            Answer::Bool(true) => f.write_str("1"),
            Answer::Bool(false) => f.write_str("0"),
            Answer::Na => f.write_str("NA"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedValue {
    pub answer: Answer,
    /// Full cleaned output when the answer came from a reasoning trace.
    pub reasoning_trace: Option<String>,
}

impl From<Answer> for ParsedValue {
    fn from(answer: Answer) -> Self {
        ParsedValue {
            answer,
            reasoning_trace: None,
        }
    }
}

/// Last `-?\d+(\.\d+)?` match in the text.
pub fn parse_numeric(text: &str) -> Answer {
    NUMBER
        .find_iter(text)
        .last()
        .and_then(|m| m.as_str().parse::<f64>().ok())
        .filter(|v| v.is_finite())
        .map_or(Answer::Na, Answer::Number)
}

fn strip_prefix_ci<'a>(text: &'a str, prefix: &str) -> Option<&'a str> {
    let head = text.get(..prefix.len())?;
    head.eq_ignore_ascii_case(prefix).then(|| &text[prefix.len()..])
}

pub fn parse_category(text: &str) -> Answer {
    let mut label = text.trim();
    if let Some(rest) = CATEGORY_PREFIXES.iter().find_map(|p| strip_prefix_ci(label, p)) {
        label = rest;
    }
    let label = label.trim().trim_end_matches('.').trim_end();
    if label.is_empty() {
        Answer::Na
    } else {
        Answer::Label(label.to_string())
    }
}

fn boolean_words(text: &str) -> Vec<String> {
    text.to_lowercase()
        .chars()
        .map(|c| if c.is_alphanumeric() || c.is_whitespace() { c } else { ' ' })
        .collect::<String>()
        .split_whitespace()
        .map(str::to_string)
        .collect()
}

fn boolean_word(word: &str) -> Option<bool> {
    if TRUE_WORDS.contains(&word) {
        Some(true)
    } else if FALSE_WORDS.contains(&word) {
        Some(false)
    } else {
        None
    }
}

/// First word decides if it is a yes/no token; otherwise the first such token
/// anywhere in the text. `1`/`0` count as yes/no.
pub fn parse_boolean(text: &str) -> Answer {
    boolean_words(text)
        .iter()
        .find_map(|w| boolean_word(w))
        .map_or(Answer::Na, Answer::Bool)
}

/// Like [`parse_boolean`] but takes the last yes/no token, i.e. the
/// conclusion of a reasoning trace rather than its opening remarks.
pub fn parse_boolean_last(text: &str) -> Answer {
    boolean_words(text)
        .iter()
        .rev()
        .find_map(|w| boolean_word(w))
        .map_or(Answer::Na, Answer::Bool)
}

pub fn parse_text(text: &str) -> Answer {
    let t = text.trim();
    if t.is_empty() {
        Answer::Na
    } else {
        Answer::FreeText(t.to_string())
    }
}

/// Standard (non-reasoning) parser for a task type.
pub fn parse_standard(text: &str, task_type: TaskType) -> Answer {
    match task_type {
        TaskType::Numeric => parse_numeric(text),
        TaskType::Category => parse_category(text),
        TaskType::Boolean => parse_boolean(text),
        TaskType::Text => parse_text(text),
    }
}

fn rfind_ascii_ci(haystack: &str, needle: &str) -> Option<usize> {
    let (h, n) = (haystack.as_bytes(), needle.as_bytes());
    if n.len() > h.len() {
        return None;
    }
    (0..=h.len() - n.len())
        .rev()
        .find(|&i| h[i..i + n.len()].eq_ignore_ascii_case(n))
}

/// Text following the `ANSWER:` marker on the latest of the last five
/// non-empty lines that carries one.
pub fn find_answer_line(text: &str) -> Option<&str> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .rev()
        .take(ANSWER_SCAN_LINES)
        .find_map(|line| rfind_ascii_ci(line, ANSWER_MARKER).map(|i| &line[i + ANSWER_MARKER.len()..]))
}

/// Reasoning-mode parser: the `ANSWER:` line when present and parseable,
/// otherwise the standard parser over the whole trace. Boolean fallback
/// reads the trace's last yes/no token.
pub fn parse_reasoning(text: &str, task_type: TaskType) -> ParsedValue {
    let from_line = find_answer_line(text)
        .map(|rest| parse_standard(rest, task_type))
        .filter(|a| !a.is_na());
    let answer = from_line.unwrap_or_else(|| match task_type {
        TaskType::Boolean => parse_boolean_last(text),
        other => parse_standard(text, other),
    });
    ParsedValue {
        answer,
        reasoning_trace: Some(text.to_string()),
    }
}

/// Entry point used by the batch runner.
pub fn parse_response(text: &str, task_type: TaskType, reasoning: bool) -> ParsedValue {
    if reasoning {
        parse_reasoning(text, task_type)
    } else {
        parse_standard(text, task_type).into()
    }
}
