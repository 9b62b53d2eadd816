//! W3C SPARQL 1.1 Query Results JSON (`application/sparql-results+json`).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MEDIA_TYPE: &str = "application/sparql-results+json";

#[derive(Debug, Error, PartialEq, Eq)]
#[error("malformed SPARQL results at line {line}, column {column}: {reason}")]
pub struct MalformedResults {
    pub line: usize,
    pub column: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RdfTermKind {
    Uri,
    Literal,
    Bnode,
}

/// One bound value in a solution.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RdfTerm {
    #[serde(rename = "type")]
    pub kind: RdfTermKind,
    pub value: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub datatype: Option<String>,
    #[serde(default, rename = "xml:lang", skip_serializing_if = "Option::is_none")]
    pub lang: Option<String>,
}

impl RdfTerm {
    pub fn uri(value: impl Into<String>) -> Self {
        RdfTerm {
            kind: RdfTermKind::Uri,
            value: value.into(),
            datatype: None,
            lang: None,
        }
    }

    pub fn literal(value: impl Into<String>) -> Self {
        RdfTerm {
            kind: RdfTermKind::Literal,
            value: value.into(),
            datatype: None,
            lang: None,
        }
    }

    pub fn is_uri(&self) -> bool {
        self.kind == RdfTermKind::Uri
    }
}

pub type Solution = BTreeMap<String, RdfTerm>;

/// Parsed results document: either variable bindings or an ASK boolean.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct QueryResults {
    pub vars: Vec<String>,
    pub bindings: Vec<Solution>,
    pub boolean: Option<bool>,
}

#[derive(Deserialize)]
struct RawDoc {
    #[serde(default)]
    head: RawHead,
    results: Option<RawResults>,
    boolean: Option<bool>,
}

#[derive(Deserialize, Default)]
struct RawHead {
    #[serde(default)]
    vars: Vec<String>,
}

#[derive(Deserialize)]
struct RawResults {
    bindings: Vec<BTreeMap<String, RawTerm>>,
}

#[derive(Deserialize)]
struct RawTerm {
    #[serde(rename = "type")]
    kind: String,
    value: String,
    datatype: Option<String>,
    #[serde(rename = "xml:lang")]
    lang: Option<String>,
}

impl QueryResults {
    pub fn parse(text: &str) -> Result<Self, MalformedResults> {
        let raw: RawDoc = serde_json::from_str(text).map_err(|e| MalformedResults {
            line: e.line(),
            column: e.column(),
            reason: e.to_string(),
        })?;
        let malformed = |reason: String| MalformedResults {
            line: 0,
            column: 0,
            reason,
        };
        if let Some(b) = raw.boolean {
            return Ok(QueryResults {
                vars: raw.head.vars,
                bindings: Vec::new(),
                boolean: Some(b),
            });
        }
        let results = raw
            .results
            .ok_or_else(|| malformed("missing 'results' and 'boolean'".into()))?;
        let mut bindings = Vec::with_capacity(results.bindings.len());
        for (i, row) in results.bindings.into_iter().enumerate() {
            let mut solution = Solution::new();
            for (var, term) in row {
                let kind = match term.kind.as_str() {
                    "uri" => RdfTermKind::Uri,
                    "literal" | "typed-literal" => RdfTermKind::Literal,
                    "bnode" => RdfTermKind::Bnode,
                    other => {
                        return Err(malformed(format!(
                            "binding {i}, variable '{var}': unknown term type '{other}'"
                        )))
                    }
                };
                solution.insert(
                    var,
                    RdfTerm {
                        kind,
                        value: term.value,
                        datatype: term.datatype,
                        lang: term.lang,
                    },
                );
            }
            bindings.push(solution);
        }
        Ok(QueryResults {
            vars: raw.head.vars,
            bindings,
            boolean: None,
        })
    }

    pub fn to_json(&self) -> String {
        let mut doc = serde_json::json!({ "head": { "vars": self.vars } });
        match self.boolean {
            Some(b) => doc["boolean"] = b.into(),
            None => doc["results"] = serde_json::json!({ "bindings": self.bindings }),
        }
        doc.to_string()
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty() && self.boolean.is_none()
    }
}
