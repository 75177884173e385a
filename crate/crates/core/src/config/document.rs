//! Line-oriented sectioned document format shared by run and report configs.
//!
//! ```text
//! # comment
//! [global]
//! key = value
//! long = """
//! first line
//! second line
//! """
//! [task]
//! column = vehicles
//! ```
//!
//! Comments are whole lines starting with `#`. Values are trimmed unless
//! wrapped in triple quotes; a triple-quoted value that starts on the key line
//! and closes on a later line keeps every inner line verbatim.

use std::fmt::Write as _;

const TRIPLE: &str = "\"\"\"";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Section {
    pub name: String,
    pub line: usize,
    pub entries: Vec<Entry>,
}

impl Section {
    pub fn get(&self, key: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.key == key)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct SyntaxError {
    pub line: usize,
    pub message: String,
}

fn syntax(line: usize, message: impl Into<String>) -> SyntaxError {
    SyntaxError {
        line,
        message: message.into(),
    }
}

/// Splits a document into sections. Line numbers are 1-based.
pub fn parse_document(source: &str) -> Result<Vec<Section>, SyntaxError> {
    let mut sections: Vec<Section> = Vec::new();
    let mut lines = source.lines().enumerate().map(|(i, l)| (i + 1, l));

    while let Some((lineno, raw)) = lines.next() {
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if trimmed.starts_with('[') {
            let name = trimmed
                .strip_prefix('[')
                .and_then(|s| s.strip_suffix(']'))
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .ok_or_else(|| syntax(lineno, format!("malformed section header `{trimmed}`")))?;
            sections.push(Section {
                name: name.to_string(),
                line: lineno,
                entries: Vec::new(),
            });
            continue;
        }
        let Some((key, rest)) = raw.split_once('=') else {
            return Err(syntax(lineno, format!("expected `key = value`, found `{trimmed}`")));
        };
        let key = key.trim();
        if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(syntax(lineno, format!("invalid key `{key}`")));
        }
        let Some(section) = sections.last_mut() else {
            return Err(syntax(lineno, format!("key `{key}` appears before any section header")));
        };
        if section.get(key).is_some() {
            return Err(syntax(lineno, format!("duplicate key `{key}` in [{}]", section.name)));
        }

        let rest = rest.trim();
        let value = if let Some(open) = rest.strip_prefix(TRIPLE) {
            if let Some(inner) = open.strip_suffix(TRIPLE).filter(|_| open.len() >= 3) {
                if inner.contains(TRIPLE) {
                    return Err(syntax(lineno, "stray triple quote in value"));
                }
                inner.to_string()
            } else if open.contains(TRIPLE) {
                return Err(syntax(lineno, "text after closing triple quote"));
            } else {
                let mut parts: Vec<&str> = Vec::new();
                if !open.is_empty() {
                    parts.push(open);
                }
                let mut closed = false;
                for (_, body) in lines.by_ref() {
                    if let Some(pos) = body.find(TRIPLE) {
                        if !body[pos + 3..].trim().is_empty() {
                            return Err(syntax(lineno, "text after closing triple quote"));
                        }
                        if pos > 0 {
                            parts.push(&body[..pos]);
                        }
                        closed = true;
                        break;
                    }
                    parts.push(body);
                }
                if !closed {
                    return Err(syntax(lineno, format!("unterminated triple-quoted value for `{key}`")));
                }
                parts.join("\n")
            }
        } else {
            rest.to_string()
        };

        section.entries.push(Entry {
            key: key.to_string(),
            value,
            line: lineno,
        });
    }
    Ok(sections)
}

/// Appends `key = value` in a form [`parse_document`] reads back unchanged.
pub fn write_entry(out: &mut String, key: &str, value: &str) {
    if value.contains('\n') {
        let _ = write!(out, "{key} = {TRIPLE}\n{value}\n{TRIPLE}\n");
    } else if value.trim() != value || value.starts_with(TRIPLE) {
        let _ = writeln!(out, "{key} = {TRIPLE}{value}{TRIPLE}");
    } else {
        let _ = writeln!(out, "{key} = {value}");
    }
}
