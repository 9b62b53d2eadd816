use std::collections::BTreeMap;

use crate::endpoint::{ResultsSource, SparqlClient};
use crate::sparql_results::{QueryResults, RdfTerm, RdfTermKind};

use super::{CatalogError, ClassLabel, ClassLabels, ObjectDescriptor, VoidRow};

pub const VOID_QUERY: &str = include_str!("../../../../queries/void.rq");
pub const LABELS_QUERY: &str = include_str!("../../../../queries/labels.rq");

const RDFS_LABEL: &str = "http://www.w3.org/2000/01/rdf-schema#label";
const RDFS_COMMENT: &str = "http://www.w3.org/2000/01/rdf-schema#comment";

/// Run the VoID query against an endpoint (or read its stored results) and
/// compile the rows.
pub async fn fetch_void_rows(client: &SparqlClient, source: &ResultsSource) -> Result<Vec<VoidRow>, CatalogError> {
    let results = client.results(source, VOID_QUERY).await?;
    let rows = void_rows_from_results(&results);
    if rows.is_empty() {
        let name = match source {
            ResultsSource::Endpoint(url) => url.clone(),
            ResultsSource::File(path) => path.display().to_string(),
        };
        return Err(CatalogError::EmptyVoid(name));
    }
    Ok(rows)
}

/// One row per object descriptor found in each solution: a solution with
/// both an object class and a datatype yields two rows. Duplicates collapse
/// (keeping the largest triple count); output is sorted.
pub fn void_rows_from_results(results: &QueryResults) -> Vec<VoidRow> {
    let mut rows: BTreeMap<(String, String, ObjectDescriptor), u64> = BTreeMap::new();
    for solution in &results.bindings {
        let iri = |var: &str| solution.get(var).filter(|t| t.is_uri()).map(|t| t.value.clone());
        let (Some(class), Some(predicate)) = (iri("subjectClass"), iri("prop")) else {
            tracing::warn!("skipping VoID solution without subject class or property");
            continue;
        };
        let triples = solution
            .get("triples")
            .and_then(|t| t.value.trim().parse::<u64>().ok())
            .unwrap_or(0);
        let mut objects = Vec::new();
        if let Some(c) = iri("objectClass") {
            objects.push(ObjectDescriptor::Class(c));
        }
        if let Some(d) = iri("objectDatatype") {
            objects.push(ObjectDescriptor::Datatype(d));
        }
        if objects.is_empty() {
            let literal = solution
                .get("objectKind")
                .is_some_and(|k| k.value.eq_ignore_ascii_case("literal"));
            objects.push(if literal {
                ObjectDescriptor::Literal
            } else {
                ObjectDescriptor::Iri
            });
        }
        for object in objects {
            let count = rows.entry((class.clone(), predicate.clone(), object)).or_insert(0);
            *count = (*count).max(triples);
        }
    }
    rows.into_iter()
        .map(|((subject_class, predicate, object), triples)| VoidRow {
            subject_class,
            predicate,
            object,
            triples,
        })
        .collect()
}

pub async fn fetch_class_labels(client: &SparqlClient, source: &ResultsSource) -> Result<ClassLabels, CatalogError> {
    let results = client.results(source, LABELS_QUERY).await?;
    Ok(labels_from_results(&results))
}

/// English first, then untagged, then any language; ties by value.
fn language_rank(term: &RdfTerm) -> u8 {
    match term.lang.as_deref() {
        Some(l) if l.eq_ignore_ascii_case("en") => 0,
        None => 1,
        Some(_) => 2,
    }
}

/// Pick one label and one description per class. A class with only a
/// description gets its IRI as label.
pub fn labels_from_results(results: &QueryResults) -> ClassLabels {
    let mut best: BTreeMap<(String, bool), &RdfTerm> = BTreeMap::new();
    for solution in &results.bindings {
        let (Some(class), Some(property), Some(value)) =
            (solution.get("class"), solution.get("property"), solution.get("value"))
        else {
            continue;
        };
        if value.kind != RdfTermKind::Literal || value.value.trim().is_empty() {
            continue;
        }
        let is_label = match property.value.as_str() {
            RDFS_LABEL => true,
            RDFS_COMMENT => false,
            _ => continue,
        };
        let key = (class.value.clone(), is_label);
        let better = best
            .get(&key)
            .is_none_or(|current| (language_rank(value), &value.value) < (language_rank(current), &current.value));
        if better {
            best.insert(key, value);
        }
    }

    let mut labels = ClassLabels::new();
    for ((class, is_label), term) in best {
        let entry = labels.entry(class.clone()).or_insert_with(|| ClassLabel {
            label: class.clone(),
            description: None,
        });
        if is_label {
            entry.label = term.value.trim().to_string();
        } else {
            entry.description = Some(term.value.trim().to_string());
        }
    }
    labels
}

#[cfg(test)]
mod tests {
    use super::*;

    fn results(json: &str) -> QueryResults {
        QueryResults::parse(json).unwrap()
    }

    #[test]
    fn shipped_queries_parse() {
        for q in [VOID_QUERY, LABELS_QUERY] {
            crate::sparql_ast::parse(q).unwrap();
        }
    }

    #[test]
    fn english_label_preferred() {
        let r = results(
            r#"{"head":{"vars":["class","property","value"]},"results":{"bindings":[
            {"class":{"type":"uri","value":"http://x/C"},"property":{"type":"uri","value":"http://www.w3.org/2000/01/rdf-schema#label"},"value":{"type":"literal","value":"Klasse","xml:lang":"de"}},
            {"class":{"type":"uri","value":"http://x/C"},"property":{"type":"uri","value":"http://www.w3.org/2000/01/rdf-schema#label"},"value":{"type":"literal","value":"Class","xml:lang":"en"}},
            {"class":{"type":"uri","value":"http://x/C"},"property":{"type":"uri","value":"http://www.w3.org/2000/01/rdf-schema#label"},"value":{"type":"literal","value":"Classe","xml:lang":"fr"}},
            {"class":{"type":"uri","value":"http://x/D"},"property":{"type":"uri","value":"http://www.w3.org/2000/01/rdf-schema#comment"},"value":{"type":"literal","value":"Only a comment"}}
            ]}}"#,
        );
        let labels = labels_from_results(&r);
        assert_eq!(labels["http://x/C"].label, "Class");
        assert_eq!(labels["http://x/C"].description, None);
        assert_eq!(labels["http://x/D"].label, "http://x/D");
        assert_eq!(labels["http://x/D"].description.as_deref(), Some("Only a comment"));
        assert!(!labels.contains_key("http://x/E"));
    }

    #[test]
    fn untagged_beats_other_languages() {
        let r = results(
            r#"{"head":{"vars":["class","property","value"]},"results":{"bindings":[
            {"class":{"type":"uri","value":"http://x/C"},"property":{"type":"uri","value":"http://www.w3.org/2000/01/rdf-schema#label"},"value":{"type":"literal","value":"Klasse","xml:lang":"de"}},
            {"class":{"type":"uri","value":"http://x/C"},"property":{"type":"uri","value":"http://www.w3.org/2000/01/rdf-schema#label"},"value":{"type":"literal","value":"plain"}}
            ]}}"#,
        );
        assert_eq!(labels_from_results(&r)["http://x/C"].label, "plain");
    }
}
