//! Per-endpoint class shapes compiled from VoID statistics.
//!
//! A shape lists, for one class, the predicates its instances actually use
//! and what those predicates point to: classes, datatypes, untyped IRIs or
//! plain literals. Shapes render to a compact ShEx-like text meant for
//! prompts; each one is self-contained (object classes are listed, never
//! other shapes).

mod check;
mod fetch;
mod shex;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::endpoint::EndpointError;
use crate::prefixes::PrefixMap;
use crate::sparql_ast::RDF_TYPE;

pub use check::{check_endpoint_metadata, MetadataReport, Probe};
pub use fetch::{
    fetch_class_labels, fetch_void_rows, labels_from_results, void_rows_from_results, LABELS_QUERY, VOID_QUERY,
};
pub use shex::render_shex;

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error(transparent)]
    Endpoint(#[from] EndpointError),
    #[error("no VoID statistics found at {0}")]
    EmptyVoid(String),
}

/// What the objects of one (class, predicate) partition are.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectDescriptor {
    Class(String),
    Datatype(String),
    /// IRIs without a known class.
    Iri,
    /// Literals without a datatype partition.
    Literal,
}

/// One compiled VoID statistic.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VoidRow {
    pub subject_class: String,
    pub predicate: String,
    pub object: ObjectDescriptor,
    /// `void:triples` of the property partition; 0 when not published.
    pub triples: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredicateShape {
    pub predicate: String,
    pub object_classes: BTreeSet<String>,
    pub object_datatypes: BTreeSet<String>,
    pub has_untyped_iri_objects: bool,
    pub has_plain_literal_objects: bool,
    /// Largest triple count seen for this predicate; orders the shape.
    pub triples: u64,
}

impl PredicateShape {
    fn new(predicate: &str) -> Self {
        PredicateShape {
            predicate: predicate.to_string(),
            object_classes: BTreeSet::new(),
            object_datatypes: BTreeSet::new(),
            has_untyped_iri_objects: false,
            has_plain_literal_objects: false,
            triples: 0,
        }
    }

    fn add(&mut self, object: &ObjectDescriptor) {
        match object {
            ObjectDescriptor::Class(c) => {
                self.object_classes.insert(c.clone());
            }
            ObjectDescriptor::Datatype(d) => {
                self.object_datatypes.insert(d.clone());
            }
            ObjectDescriptor::Iri => self.has_untyped_iri_objects = true,
            ObjectDescriptor::Literal => self.has_plain_literal_objects = true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassShape {
    pub class_iri: String,
    pub label: String,
    pub description: Option<String>,
    /// Most used predicates first; ties by predicate IRI.
    pub predicates: Vec<PredicateShape>,
}

impl ClassShape {
    pub fn predicate(&self, iri: &str) -> Option<&PredicateShape> {
        self.predicates.iter().find(|p| p.predicate == iri)
    }

    pub fn allows(&self, iri: &str) -> bool {
        self.predicate(iri).is_some()
    }
}

/// Label and optional description of a class, from its ontology.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassLabel {
    pub label: String,
    pub description: Option<String>,
}

pub type ClassLabels = BTreeMap<String, ClassLabel>;

/// The classes of one endpoint.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EndpointSchema {
    pub classes: BTreeMap<String, ClassShape>,
}

impl EndpointSchema {
    pub fn class(&self, iri: &str) -> Option<&ClassShape> {
        self.classes.get(iri)
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }
}

/// Shapes for every configured endpoint. Immutable once built.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaCatalog {
    prefixes: PrefixMap,
    endpoints: BTreeMap<String, EndpointSchema>,
}

impl SchemaCatalog {
    pub fn new(prefixes: PrefixMap, endpoints: impl IntoIterator<Item = (String, EndpointSchema)>) -> Self {
        SchemaCatalog {
            prefixes,
            endpoints: endpoints.into_iter().collect(),
        }
    }

    pub fn prefixes(&self) -> &PrefixMap {
        &self.prefixes
    }

    pub fn endpoint(&self, endpoint: &str) -> Option<&EndpointSchema> {
        self.endpoints.get(endpoint)
    }

    pub fn endpoints(&self) -> impl Iterator<Item = (&str, &EndpointSchema)> {
        self.endpoints.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn lookup(&self, endpoint: &str, class: &str) -> Option<&ClassShape> {
        self.endpoints.get(endpoint)?.class(class)
    }

    pub fn class_count(&self) -> usize {
        self.endpoints.values().map(EndpointSchema::len).sum()
    }

    pub fn compact(&self, iri: &str) -> String {
        self.prefixes.compact(iri)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).unwrap_or_default()
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Group rows by subject class then predicate into class shapes.
///
/// Pure in its inputs: row order and duplicates do not affect the result.
/// `rdf:type` rows are dropped, every shape states its own class instead.
pub fn build_catalog(rows: &[VoidRow], labels: &ClassLabels) -> EndpointSchema {
    let mut grouped: BTreeMap<&str, BTreeMap<&str, PredicateShape>> = BTreeMap::new();
    for row in rows {
        let class = grouped.entry(row.subject_class.as_str()).or_default();
        if row.predicate == RDF_TYPE {
            continue;
        }
        let shape = class
            .entry(row.predicate.as_str())
            .or_insert_with(|| PredicateShape::new(&row.predicate));
        shape.add(&row.object);
        shape.triples = shape.triples.max(row.triples);
    }

    let classes = grouped
        .into_iter()
        .map(|(class_iri, predicates)| {
            let mut predicates: Vec<PredicateShape> = predicates.into_values().collect();
            predicates.sort_by(|a, b| b.triples.cmp(&a.triples).then_with(|| a.predicate.cmp(&b.predicate)));
            let (label, description) = match labels.get(class_iri) {
                Some(l) if !l.label.is_empty() => (l.label.clone(), l.description.clone()),
                Some(l) => (class_iri.to_string(), l.description.clone()),
                None => (class_iri.to_string(), None),
            };
            let shape = ClassShape {
                class_iri: class_iri.to_string(),
                label,
                description,
                predicates,
            };
            (class_iri.to_string(), shape)
        })
        .collect();
    EndpointSchema { classes }
}
