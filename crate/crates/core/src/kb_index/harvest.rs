//! Turning endpoint content into indexable documents.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use regex::Regex;
use serde_json::Value;

use super::{DocKind, IndexedDoc};
use crate::endpoint::{EndpointError, ResultsSource, SparqlClient};
use crate::prefixes::PrefixMap;
use crate::schema_catalog::{render_shex, EndpointSchema};
use crate::sparql_results::{QueryResults, RdfTerm};

pub const EXAMPLES_QUERY: &str = include_str!("../../../../queries/examples.rq");

/// Example documents of one endpoint, plus how many examples were dropped
/// for lacking a question.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExampleHarvest {
    pub docs: Vec<IndexedDoc>,
    pub skipped: usize,
}

pub async fn harvest_examples(
    client: &SparqlClient,
    source: &ResultsSource,
    endpoint: &str,
) -> Result<ExampleHarvest, EndpointError> {
    let results = client.results(source, EXAMPLES_QUERY).await?;
    let harvest = examples_from_results(&results, endpoint);
    if harvest.docs.is_empty() {
        tracing::warn!(endpoint, "no example queries found");
    }
    if harvest.skipped > 0 {
        tracing::warn!(
            endpoint,
            skipped = harvest.skipped,
            "examples without a comment skipped"
        );
    }
    Ok(harvest)
}

fn lang_rank(term: &RdfTerm) -> u8 {
    match term.lang.as_deref() {
        Some(l) if l.eq_ignore_ascii_case("en") || l.to_ascii_lowercase().starts_with("en-") => 0,
        None => 1,
        Some(_) => 2,
    }
}

/// One document per example resource. When an example carries several
/// comments the English one is preferred, then an untagged one.
pub fn examples_from_results(results: &QueryResults, endpoint: &str) -> ExampleHarvest {
    struct Pending<'a> {
        query: &'a str,
        comment: Option<&'a RdfTerm>,
    }
    let mut by_iri: BTreeMap<&str, Pending<'_>> = BTreeMap::new();
    for solution in &results.bindings {
        let (Some(sq), Some(query)) = (solution.get("sq"), solution.get("query")) else {
            continue;
        };
        let entry = by_iri.entry(sq.value.as_str()).or_insert(Pending {
            query: &query.value,
            comment: None,
        });
        if let Some(c) = solution.get("comment").filter(|c| !c.value.trim().is_empty()) {
            let better = match entry.comment {
                None => true,
                Some(old) => (lang_rank(c), &c.value) < (lang_rank(old), &old.value),
            };
            if better {
                entry.comment = Some(c);
            }
        }
    }

    let mut harvest = ExampleHarvest::default();
    for (iri, pending) in by_iri {
        let Some(comment) = pending.comment else {
            harvest.skipped += 1;
            continue;
        };
        let question = comment.value.trim();
        match IndexedDoc::new(
            DocKind::ExampleQuery,
            question,
            pending.query,
            endpoint,
            Some(iri.to_string()),
        ) {
            Ok(doc) => harvest.docs.push(doc),
            Err(_) => harvest.skipped += 1,
        }
    }
    harvest
}

/// Fetch an endpoint homepage and read its schema.org description.
/// Failures are logged and yield nothing.
pub async fn harvest_endpoint_info(client: &SparqlClient, homepage: &str, endpoint: &str) -> Option<IndexedDoc> {
    match client.get_text(homepage, "text/html").await {
        Ok(html) => {
            let doc = endpoint_info_from_html(&html, endpoint);
            if doc.is_none() {
                tracing::warn!(homepage, "no schema.org metadata on homepage");
            }
            doc
        }
        Err(e) => {
            tracing::warn!(homepage, error = %e, "homepage not reachable");
            None
        }
    }
}

fn ld_json_script() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r#"(?is)<script\b[^>]*\btype\s*=\s*["']?application/ld\+json["']?[^>]*>(.*?)</script\s*>"#)
            .expect("static regex")
    })
}

fn text_field(node: &Value, key: &str) -> Option<String> {
    let v = node
        .get(key)
        .or_else(|| node.get(format!("https://schema.org/{key}")))?;
    let s = match v {
        Value::String(s) => s.clone(),
        Value::Object(o) => o.get("@value")?.as_str()?.to_string(),
        Value::Array(items) => items.iter().find_map(|i| match i {
            Value::String(s) => Some(s.clone()),
            Value::Object(o) => o.get("@value")?.as_str().map(String::from),
            _ => None,
        })?,
        _ => return None,
    };
    let s = s.trim().to_string();
    (!s.is_empty()).then_some(s)
}

/// The first node with a name or a description, looking into top-level
/// arrays and `@graph`.
fn describe(value: &Value) -> Option<(Option<String>, Option<String>)> {
    match value {
        Value::Array(items) => items.iter().find_map(describe),
        Value::Object(o) => {
            let name = text_field(value, "name");
            let description = text_field(value, "description");
            if name.is_some() || description.is_some() {
                return Some((name, description));
            }
            o.get("@graph").and_then(describe)
        }
        _ => None,
    }
}

/// Only the first `application/ld+json` block is read.
pub fn endpoint_info_from_html(html: &str, endpoint: &str) -> Option<IndexedDoc> {
    let block = ld_json_script().captures(html)?.get(1)?.as_str();
    let json: Value = serde_json::from_str(block.trim()).ok()?;
    let (name, description) = describe(&json)?;
    let text = [name, description].into_iter().flatten().collect::<Vec<_>>().join("\n");
    let payload = format!("Endpoint {endpoint}\n{text}");
    IndexedDoc::new(
        DocKind::EndpointInfo,
        text,
        payload,
        endpoint,
        Some(endpoint.to_string()),
    )
    .ok()
}

/// One ClassShape document per class: label and description are embedded,
/// the rendered shape is the payload.
pub fn shape_docs(schema: &EndpointSchema, endpoint: &str, prefixes: &PrefixMap) -> Vec<IndexedDoc> {
    schema
        .classes
        .values()
        .filter_map(|shape| {
            let embed = match &shape.description {
                Some(d) if !d.trim().is_empty() => format!("{}\n{}", shape.label, d.trim()),
                _ => shape.label.clone(),
            };
            IndexedDoc::new(
                DocKind::ClassShape,
                embed,
                render_shex(shape, prefixes),
                endpoint,
                Some(shape.class_iri.clone()),
            )
            .ok()
        })
        .collect()
}
