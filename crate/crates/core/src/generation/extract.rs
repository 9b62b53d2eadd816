//! Pulling the query out of a model answer.

use crate::sparql_ast::parse;

struct Block<'a> {
    tag: String,
    body: Vec<&'a str>,
}

fn fence(line: &str) -> Option<(usize, &str)> {
    let trimmed = line.trim_start();
    if line.len() - trimmed.len() > 3 {
        return None;
    }
    let ticks = trimmed.chars().take_while(|&c| c == '`').count();
    (ticks >= 3).then(|| (ticks, trimmed[ticks..].trim()))
}

/// Closed fenced code blocks, in order.
fn blocks(text: &str) -> Vec<Block<'_>> {
    let mut out = Vec::new();
    let mut open: Option<(usize, Block<'_>)> = None;
    for line in text.lines() {
        match (&mut open, fence(line)) {
            (None, Some((ticks, info))) => {
                let tag = info.split_whitespace().next().unwrap_or("").to_ascii_lowercase();
                open = Some((ticks, Block { tag, body: Vec::new() }));
            }
            (Some((ticks, _)), Some((n, info))) if n >= *ticks && info.is_empty() => {
                if let Some((_, block)) = open.take() {
                    out.push(block);
                }
            }
            (Some((_, block)), _) => block.body.push(line),
            (None, None) => {}
        }
    }
    out
}

/// The last ```sparql block; failing that, the last untagged block that
/// parses as SPARQL.
pub fn extract_sparql(answer: &str) -> Option<String> {
    let blocks = blocks(answer);
    let text = |b: &Block<'_>| b.body.join("\n").trim().to_string();
    if let Some(b) = blocks.iter().rev().find(|b| b.tag == "sparql") {
        return Some(text(b));
    }
    blocks
        .iter()
        .rev()
        .filter(|b| b.tag.is_empty())
        .map(text)
        .find(|t| !t.is_empty() && parse(t).is_ok())
}

/// The endpoint named by a `#+ endpoint: URL` comment line.
pub fn target_endpoint(query: &str) -> Option<String> {
    query.lines().find_map(|line| {
        let rest = line
            .trim()
            .strip_prefix('#')?
            .trim_start()
            .strip_prefix('+')?
            .trim_start();
        let url = rest.strip_prefix("endpoint:")?.trim();
        (!url.is_empty()).then(|| url.trim_matches(|c| c == '<' || c == '>').to_string())
    })
}
