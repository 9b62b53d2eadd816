//! Prompt templates and message assembly.

use serde::{Deserialize, Serialize};

use super::PromptContext;
use crate::validator::{format_issue, ValidationIssue};

pub const SYSTEM_TEMPLATE: &str = include_str!("../../../../prompts/system.txt");
pub const GENERATE_TEMPLATE: &str = include_str!("../../../../prompts/generate.txt");
pub const BARE_TEMPLATE: &str = include_str!("../../../../prompts/bare.txt");
pub const FIX_TEMPLATE: &str = include_str!("../../../../prompts/fix.txt");

/// Written where a section has no entries.
pub const NONE_MARKER: &str = "(none)";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

/// Replace `{name}` placeholders in one pass, so substituted text is never
/// expanded again. Unknown placeholders stay as they are.
pub fn fill(template: &str, values: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let hit = after.find('}').and_then(|close| {
            let name = &after[..close];
            values.iter().find(|(k, _)| *k == name).map(|(_, v)| (close, *v))
        });
        match hit {
            Some((close, value)) => {
                out.push_str(value);
                rest = &after[close + 1..];
            }
            None => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out.trim_end().to_string()
}

fn or_none(s: String) -> String {
    if s.is_empty() {
        NONE_MARKER.to_string()
    } else {
        s
    }
}

fn examples_section(ctx: &PromptContext) -> String {
    ctx.examples
        .iter()
        .map(|e| {
            format!(
                "{}\n```sparql\n#+ endpoint: {}\n{}\n```",
                e.question,
                e.endpoint,
                e.query.trim()
            )
        })
        .collect::<Vec<_>>()
        .join("\n\n")
}

fn shapes_section(ctx: &PromptContext) -> String {
    ctx.shapes
        .iter()
        .map(|s| format!("# {} ({})\n{}", s.label, s.endpoint, s.shex))
        .collect::<Vec<_>>()
        .join("\n\n")
}

pub fn system_message(ctx: &PromptContext) -> ChatMessage {
    let info = ctx.endpoint_info.as_ref().map(|i| i.text.clone()).unwrap_or_default();
    ChatMessage::system(fill(SYSTEM_TEMPLATE, &[("endpoint_info", &or_none(info))]))
}

/// System message with the endpoint description, then the user message
/// carrying examples, shapes and the question, in retrieval order.
pub fn build_prompt(question: &str, ctx: &PromptContext) -> Vec<ChatMessage> {
    let examples = or_none(examples_section(ctx));
    let shapes = or_none(shapes_section(ctx));
    vec![
        system_message(ctx),
        ChatMessage::user(fill(
            GENERATE_TEMPLATE,
            &[("examples", &examples), ("shapes", &shapes), ("question", question)],
        )),
    ]
}

/// Prompt without retrieved context.
pub fn build_bare_prompt(question: &str) -> Vec<ChatMessage> {
    vec![
        system_message(&PromptContext::default()),
        ChatMessage::user(fill(BARE_TEMPLATE, &[("question", question)])),
    ]
}

/// The correction request listing each problem on its own line.
pub fn fix_message(issues: &[ValidationIssue], problems: &[String]) -> ChatMessage {
    let lines: Vec<String> = problems
        .iter()
        .cloned()
        .chain(issues.iter().map(format_issue))
        .map(|m| format!("- {m}"))
        .collect();
    ChatMessage::user(fill(FIX_TEMPLATE, &[("issues", &lines.join("\n"))]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fill_is_single_pass() {
        assert_eq!(fill("a {x} b {y} {z}", &[("x", "{y}"), ("y", "1")]), "a {y} b 1 {z}");
        assert_eq!(fill("{", &[]), "{");
    }

    #[test]
    fn empty_context_has_markers() {
        let msgs = build_prompt("What is X?", &PromptContext::default());
        assert_eq!(msgs.len(), 2);
        let user = &msgs[1].content;
        assert!(user
            .starts_with("Example queries:\n\n(none)\n\nClasses schema (ShEx):\n\n(none)\n\nQuestion:\nWhat is X?\n"));
        assert!(msgs[0].content.ends_with("Endpoint information:\n(none)"));
    }
}
