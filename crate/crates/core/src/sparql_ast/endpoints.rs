use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{GraphPattern, Query, Term, TriplePattern};

/// Where a group of triple patterns will be evaluated.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EndpointRef {
    Iri(String),
    /// `SERVICE ?var` (or an unexpanded prefixed name): not validatable.
    Unknown,
}

impl EndpointRef {
    pub fn as_iri(&self) -> Option<&str> {
        match self {
            EndpointRef::Iri(i) => Some(i),
            EndpointRef::Unknown => None,
        }
    }
}

pub type TriplesByEndpoint = BTreeMap<EndpointRef, Vec<TriplePattern>>;

/// Group the query's triple patterns by the endpoint that executes them.
///
/// Patterns outside any SERVICE go to `primary_endpoint`; inside SERVICE the
/// innermost endpoint wins. Only non-empty buckets are returned.
pub fn extract_triples_by_endpoint(q: &Query, primary_endpoint: &str) -> TriplesByEndpoint {
    let mut buckets = TriplesByEndpoint::new();
    walk(
        &q.where_clause,
        &EndpointRef::Iri(primary_endpoint.to_string()),
        &mut buckets,
    );
    buckets
}

fn walk(p: &GraphPattern, current: &EndpointRef, out: &mut TriplesByEndpoint) {
    match p {
        GraphPattern::Service { endpoint, inner, .. } => {
            let target = match endpoint {
                Term::Iri(iri) => EndpointRef::Iri(iri.clone()),
                _ => EndpointRef::Unknown,
            };
            walk(inner, &target, out);
        }
        GraphPattern::Bgp(triples) => {
            if !triples.is_empty() {
                out.entry(current.clone()).or_default().extend(triples.iter().cloned());
            }
        }
        GraphPattern::Group(items) => items.iter().for_each(|i| walk(i, current, out)),
        GraphPattern::Optional(inner) => walk(inner, current, out),
        GraphPattern::Union(left, right) => {
            walk(left, current, out);
            walk(right, current, out);
        }
        GraphPattern::Filter { exists, .. } => {
            if let Some(inner) = exists {
                walk(inner, current, out);
            }
        }
        GraphPattern::SubSelect(q) => walk(&q.where_clause, current, out),
        GraphPattern::Bind { .. } | GraphPattern::Values(_) => {}
    }
}

#[cfg(test)]
mod tests {
    use super::super::{expand_prefixes, parse};
    use super::*;

    const UNIPROT: &str = "https://sparql.uniprot.org/sparql";
    const OMA: &str = "https://sparql.omabrowser.org/sparql";

    fn expanded(src: &str) -> Query {
        expand_prefixes(&parse(src).unwrap()).unwrap()
    }

    #[test]
    fn service_block_goes_to_its_endpoint() {
        let q = expanded(
            "PREFIX up: <http://purl.uniprot.org/core/> PREFIX orth: <http://purl.org/net/orth#>
             SELECT * { ?p a up:Protein . SERVICE <https://sparql.omabrowser.org/sparql> { ?p a orth:Protein } }",
        );
        let buckets = extract_triples_by_endpoint(&q, UNIPROT);
        assert_eq!(buckets.len(), 2);
        let up = &buckets[&EndpointRef::Iri(UNIPROT.into())];
        let oma = &buckets[&EndpointRef::Iri(OMA.into())];
        assert_eq!(up.len(), 1);
        assert_eq!(up[0].object, Term::iri("http://purl.uniprot.org/core/Protein"));
        assert_eq!(oma.len(), 1);
        assert_eq!(oma[0].object, Term::iri("http://purl.org/net/orth#Protein"));
    }

    #[test]
    fn no_service_means_primary_only() {
        let q = expanded("SELECT * { ?s ?p ?o OPTIONAL { ?o ?q ?r } FILTER EXISTS { ?r ?x ?y } }");
        let buckets = extract_triples_by_endpoint(&q, UNIPROT);
        assert_eq!(buckets.len(), 1);
        assert_eq!(buckets[&EndpointRef::Iri(UNIPROT.into())].len(), 3);
    }

    #[test]
    fn variable_service_goes_to_unknown() {
        let q = expanded("SELECT * { SERVICE ?ep { ?s ?p ?o } }");
        let buckets = extract_triples_by_endpoint(&q, UNIPROT);
        assert_eq!(buckets.keys().collect::<Vec<_>>(), vec![&EndpointRef::Unknown]);
    }
}
