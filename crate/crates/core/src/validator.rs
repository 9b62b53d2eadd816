//! Static checking of a query's triple patterns against class shapes.
//!
//! Classes come from `rdf:type` triples and are pushed forward along
//! predicates whose shape names the object classes. A predicate is flagged
//! only when none of the subject's candidate classes allows it.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::prefixes::PrefixMap;
use crate::schema_catalog::{EndpointSchema, SchemaCatalog};
use crate::sparql_ast::{
    expand_prefixes, extract_triples_by_endpoint, parse, render_term, Query, SparqlError, Term, TriplePattern,
};

/// Classes known for one subject, split by where they came from.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidates {
    pub declared: BTreeSet<String>,
    pub inferred: BTreeSet<String>,
}

impl Candidates {
    /// Declared classes win; inferred ones are used only without them.
    pub fn effective(&self) -> &BTreeSet<String> {
        if self.declared.is_empty() {
            &self.inferred
        } else {
            &self.declared
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ClassAssignment {
    entries: BTreeMap<Term, Candidates>,
}

impl ClassAssignment {
    pub fn get(&self, term: &Term) -> Option<&Candidates> {
        self.entries.get(term)
    }

    /// Effective candidate classes; empty when nothing is known.
    pub fn classes(&self, term: &Term) -> BTreeSet<String> {
        self.entries
            .get(term)
            .map(|c| c.effective().clone())
            .unwrap_or_default()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Term, &Candidates)> {
        self.entries.iter()
    }
}

/// Declared classes from `rdf:type` triples, then forward propagation to a
/// fixed point. Triple order does not matter.
pub fn infer_classes(triples: &[TriplePattern], schema: &EndpointSchema) -> ClassAssignment {
    let mut entries: BTreeMap<Term, Candidates> = BTreeMap::new();
    for t in triples {
        if let (true, Term::Iri(class)) = (t.predicate.is_rdf_type(), &t.object) {
            entries
                .entry(t.subject.clone())
                .or_default()
                .declared
                .insert(class.clone());
        }
    }

    loop {
        let mut changed = false;
        for t in triples {
            let Some(p) = t.predicate.as_iri() else {
                continue;
            };
            if t.predicate.is_rdf_type() || !t.object.is_placeholder() {
                continue;
            }
            let Some(subject) = entries.get(&t.subject) else {
                continue;
            };
            let gained: BTreeSet<String> = subject
                .effective()
                .iter()
                .filter_map(|c| schema.class(c)?.predicate(p))
                .flat_map(|ps| ps.object_classes.iter().cloned())
                .collect();
            if gained.is_empty() {
                continue;
            }
            let object = entries.entry(t.object.clone()).or_default();
            for c in gained {
                changed |= object.inferred.insert(c);
            }
        }
        if !changed {
            break;
        }
    }
    ClassAssignment { entries }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationIssue {
    pub endpoint: String,
    pub subject: String,
    pub subject_class: String,
    pub predicate: String,
    /// Predicates of `subject_class`, in shape order.
    pub allowed_predicates: Vec<String>,
    pub message: String,
}

/// The correction message fed back to the model.
pub fn format_issue(i: &ValidationIssue) -> String {
    let allowed = if i.allowed_predicates.is_empty() {
        "(none)".to_string()
    } else {
        i.allowed_predicates.join(", ")
    };
    format!(
        "Subject {} with type {} in endpoint {} does not support the predicate {}. It can have the following predicates: {}",
        i.subject, i.subject_class, i.endpoint, i.predicate, allowed
    )
}

fn render_subject(t: &Term, prefixes: &PrefixMap) -> String {
    match t {
        Term::Iri(iri) => prefixes.compact(iri),
        other => render_term(other),
    }
}

/// Issues for one endpoint's triples.
pub fn validate_triples(
    triples: &[TriplePattern],
    endpoint: &str,
    schema: &EndpointSchema,
    prefixes: &PrefixMap,
) -> Vec<ValidationIssue> {
    let assignment = infer_classes(triples, schema);
    let mut issues: BTreeMap<(String, String, String), ValidationIssue> = BTreeMap::new();
    for t in triples {
        let Some(p) = t.predicate.as_iri() else {
            continue;
        };
        if t.predicate.is_rdf_type() {
            continue;
        }
        let Some(candidates) = assignment.get(&t.subject) else {
            continue;
        };
        let classes = candidates.effective();
        // A class missing from the catalog could allow anything.
        let Some(shapes) = classes.iter().map(|c| schema.class(c)).collect::<Option<Vec<_>>>() else {
            continue;
        };
        let Some(first) = shapes.first() else {
            continue;
        };
        if shapes.iter().any(|s| s.allows(p)) {
            continue;
        }
        let subject = render_subject(&t.subject, prefixes);
        let predicate = prefixes.compact(p);
        let subject_class = prefixes.compact(&first.class_iri);
        issues
            .entry((subject.clone(), predicate.clone(), subject_class.clone()))
            .or_insert_with(|| {
                let mut issue = ValidationIssue {
                    endpoint: endpoint.to_string(),
                    subject,
                    subject_class,
                    predicate,
                    allowed_predicates: first
                        .predicates
                        .iter()
                        .map(|ps| prefixes.compact(&ps.predicate))
                        .collect(),
                    message: String::new(),
                };
                issue.message = format_issue(&issue);
                issue
            });
    }
    issues.into_values().collect()
}

/// Validate a parsed, prefix-expanded query. Triples outside any SERVICE
/// belong to `primary_endpoint`. Endpoints absent from the catalog and
/// `SERVICE ?var` blocks are not checked. Issues are ordered by endpoint,
/// subject, then predicate.
pub fn validate(q: &Query, primary_endpoint: &str, catalog: &SchemaCatalog) -> Vec<ValidationIssue> {
    let mut out = Vec::new();
    for (endpoint, triples) in extract_triples_by_endpoint(q, primary_endpoint) {
        let Some(iri) = endpoint.as_iri() else {
            continue;
        };
        let Some(schema) = catalog.endpoint(iri) else {
            continue;
        };
        out.extend(validate_triples(&triples, iri, schema, catalog.prefixes()));
    }
    out
}

/// Parse, expand and validate query text.
pub fn validate_text(
    text: &str,
    primary_endpoint: &str,
    catalog: &SchemaCatalog,
) -> Result<Vec<ValidationIssue>, SparqlError> {
    let q = expand_prefixes(&parse(text)?)?;
    Ok(validate(&q, primary_endpoint, catalog))
}
