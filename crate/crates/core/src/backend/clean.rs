use super::{BackendKind, RawInference};
use crate::prompt::PromptText;

/// Chat-template markers that precede the answer in echoed llava-style
/// replies. Extend here for other base LLM templates.
pub const LLAVA_MARKERS: [&str; 3] = ["[/INST]", "ASSISTANT:", "assistant\n"];

/// Extracts the model's answer from a raw reply.
///
/// llava-style: text after the last occurrence of the prompt or of any
/// [`LLAVA_MARKERS`] entry, trimmed. Other kinds: the reply trimmed.
pub fn clean_output(raw: &RawInference, prompt: &PromptText) -> String {
    let text = raw.raw_text.as_str();
    if raw.kind != BackendKind::LlavaStyle {
        return text.trim().to_string();
    }
    let prompt_needle = (!prompt.text.is_empty()).then_some(prompt.text.as_str());
    let cut = LLAVA_MARKERS
        .iter()
        .copied()
        .chain(prompt_needle)
        .filter_map(|needle| text.rfind(needle).map(|start| (start, start + needle.len())))
        .max_by_key(|&(start, end)| (start, end))
        .map_or(0, |(_, end)| end);
    text[cut..].trim().to_string()
}
