//! Prefix table used to compact IRIs in shapes and validation messages.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PrefixMap(BTreeMap<String, String>);

impl PrefixMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Common vocabularies of the SIB endpoints plus the W3C basics.
    pub fn common() -> Self {
        [
            ("bibo", "http://purl.org/ontology/bibo/"),
            ("dcterms", "http://purl.org/dc/terms/"),
            ("faldo", "http://biohackathon.org/resource/faldo#"),
            ("genex", "http://purl.org/genex#"),
            ("lscr", "http://purl.org/lscr#"),
            ("obo", "http://purl.obolibrary.org/obo/"),
            ("orth", "http://purl.org/net/orth#"),
            ("owl", "http://www.w3.org/2002/07/owl#"),
            ("rdf", "http://www.w3.org/1999/02/22-rdf-syntax-ns#"),
            ("rdfs", "http://www.w3.org/2000/01/rdf-schema#"),
            ("rh", "http://rdf.rhea-db.org/"),
            ("schema", "https://schema.org/"),
            ("sh", "http://www.w3.org/ns/shacl#"),
            ("skos", "http://www.w3.org/2004/02/skos/core#"),
            ("taxon", "http://purl.uniprot.org/taxonomy/"),
            ("up", "http://purl.uniprot.org/core/"),
            ("void", "http://rdfs.org/ns/void#"),
            ("xsd", "http://www.w3.org/2001/XMLSchema#"),
        ]
        .into_iter()
        .collect()
    }

    pub fn insert(&mut self, prefix: impl Into<String>, namespace: impl Into<String>) {
        self.0.insert(prefix.into(), namespace.into());
    }

    pub fn get(&self, prefix: &str) -> Option<&str> {
        self.0.get(prefix).map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `prefix:local` using the longest matching namespace (ties broken by
    /// prefix name), or `<iri>` when no namespace yields a valid local name.
    pub fn compact(&self, iri: &str) -> String {
        let best = self
            .0
            .iter()
            .filter(|(_, ns)| !ns.is_empty() && iri.starts_with(ns.as_str()))
            .filter(|(_, ns)| is_simple_local(&iri[ns.len()..]))
            .max_by(|(pa, a), (pb, b)| a.len().cmp(&b.len()).then_with(|| pb.cmp(pa)));
        match best {
            Some((prefix, ns)) => format!("{prefix}:{}", &iri[ns.len()..]),
            None => format!("<{iri}>"),
        }
    }

    /// Inverse of [`compact`](Self::compact).
    pub fn expand(&self, compacted: &str) -> Option<String> {
        if let Some(inner) = compacted.strip_prefix('<').and_then(|s| s.strip_suffix('>')) {
            return Some(inner.to_string());
        }
        let (prefix, local) = compacted.split_once(':')?;
        self.get(prefix).map(|ns| format!("{ns}{local}"))
    }
}

impl<K: Into<String>, V: Into<String>> FromIterator<(K, V)> for PrefixMap {
    fn from_iter<I: IntoIterator<Item = (K, V)>>(iter: I) -> Self {
        PrefixMap(iter.into_iter().map(|(k, v)| (k.into(), v.into())).collect())
    }
}

/// Local names that need no escaping in Turtle/SPARQL/ShEx.
fn is_simple_local(local: &str) -> bool {
    let Some(first) = local.chars().next() else {
        return false;
    };
    (first.is_alphanumeric() || first == '_')
        && !local.ends_with('.')
        && local
            .chars()
            .all(|c| c.is_alphanumeric() || matches!(c, '_' | '-' | '.'))
}
