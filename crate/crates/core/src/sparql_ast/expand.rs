use std::collections::BTreeMap;

use super::{GraphPattern, Predicate, Query, SparqlError, Term};

/// Prefixes usable without a declaration.
pub fn builtin_prefixes() -> BTreeMap<String, String> {
    [
        ("owl", "http://www.w3.org/2002/07/owl#"),
        ("rdf", "http://www.w3.org/1999/02/22-rdf-syntax-ns#"),
        ("rdfs", "http://www.w3.org/2000/01/rdf-schema#"),
        ("skos", "http://www.w3.org/2004/02/skos/core#"),
        ("xsd", "http://www.w3.org/2001/XMLSchema#"),
    ]
    .into_iter()
    .map(|(p, i)| (p.to_string(), i.to_string()))
    .collect()
}

/// Replace every prefixed name with its absolute IRI. Declared prefixes take
/// precedence over the built-in table. Property paths stay as written.
pub fn expand_prefixes(q: &Query) -> Result<Query, SparqlError> {
    let mut table = builtin_prefixes();
    table.extend(q.prefixes.iter().map(|(k, v)| (k.clone(), v.clone())));
    let mut out = q.clone();
    expand_query(&mut out, &table)?;
    Ok(out)
}

fn expand_query(q: &mut Query, table: &BTreeMap<String, String>) -> Result<(), SparqlError> {
    expand_pattern(&mut q.where_clause, table)
}

fn expand_pattern(p: &mut GraphPattern, table: &BTreeMap<String, String>) -> Result<(), SparqlError> {
    match p {
        GraphPattern::Bgp(triples) => {
            for t in triples {
                expand_term(&mut t.subject, table)?;
                if let Predicate::Term(term) = &mut t.predicate {
                    expand_term(term, table)?;
                }
                expand_term(&mut t.object, table)?;
            }
        }
        GraphPattern::Group(items) => {
            for item in items {
                expand_pattern(item, table)?;
            }
        }
        GraphPattern::Optional(inner) => expand_pattern(inner, table)?,
        GraphPattern::Union(left, right) => {
            expand_pattern(left, table)?;
            expand_pattern(right, table)?;
        }
        GraphPattern::Filter { exists, .. } => {
            if let Some(inner) = exists {
                expand_pattern(inner, table)?;
            }
        }
        GraphPattern::Service { endpoint, inner, .. } => {
            expand_term(endpoint, table)?;
            expand_pattern(inner, table)?;
        }
        GraphPattern::SubSelect(q) => expand_query(q, table)?,
        GraphPattern::Bind { .. } | GraphPattern::Values(_) => {}
    }
    Ok(())
}

fn expand_term(t: &mut Term, table: &BTreeMap<String, String>) -> Result<(), SparqlError> {
    match t {
        Term::PrefixedName { prefix, local } => {
            let ns = table
                .get(prefix.as_str())
                .ok_or_else(|| SparqlError::UndeclaredPrefix(prefix.clone()))?;
            *t = Term::Iri(format!("{ns}{}", unescape_local(local)));
        }
        Term::Literal { datatype: Some(dt), .. } => expand_term(dt, table)?,
        _ => {}
    }
    Ok(())
}

/// Drop the `\` of PN_LOCAL character escapes (`\.` → `.`); `%hh` stays.
fn unescape_local(local: &str) -> String {
    let mut out = String::with_capacity(local.len());
    let mut chars = local.chars();
    while let Some(c) = chars.next() {
        if c == '\\' {
            if let Some(next) = chars.next() {
                out.push(next);
            }
        } else {
            out.push(c);
        }
    }
    out
}
