//! A practical SPARQL 1.1 subset: SELECT/ASK queries with basic graph
//! patterns, OPTIONAL, UNION, FILTER, BIND, VALUES, SERVICE and subqueries.
//!
//! Expressions and property paths are kept as opaque text; only the triple
//! pattern structure is modelled, which is what schema validation needs.
//! See `docs/serialization.md` for the canonical output layout.

mod endpoints;
mod expand;
mod lexer;
mod parser;
mod serialize;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use endpoints::{extract_triples_by_endpoint, EndpointRef, TriplesByEndpoint};
pub use expand::{builtin_prefixes, expand_prefixes};
pub use parser::parse;
pub use serialize::serialize;
pub(crate) use serialize::term as render_term;

pub const RDF_TYPE: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type";
pub const XSD: &str = "http://www.w3.org/2001/XMLSchema#";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SparqlError {
    #[error("syntax error at line {line}, column {column}: {reason}")]
    Syntax { line: usize, column: usize, reason: String },
    #[error("unsupported SPARQL feature: {0}")]
    UnsupportedFeature(String),
    #[error("undeclared prefix: {0}")]
    UndeclaredPrefix(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Term {
    Variable(String),
    Iri(String),
    /// Only present before prefix expansion.
    PrefixedName {
        prefix: String,
        local: String,
    },
    Literal {
        lexical: String,
        /// `Iri` or `PrefixedName`.
        datatype: Option<Box<Term>>,
        lang: Option<String>,
    },
    BlankNode(String),
}

impl Term {
    pub fn iri(s: impl Into<String>) -> Self {
        Term::Iri(s.into())
    }

    pub fn var(s: impl Into<String>) -> Self {
        Term::Variable(s.into())
    }

    pub fn as_iri(&self) -> Option<&str> {
        match self {
            Term::Iri(i) => Some(i),
            _ => None,
        }
    }

    /// Variables and blank nodes: terms that stand for an unknown resource.
    pub fn is_placeholder(&self) -> bool {
        matches!(self, Term::Variable(_) | Term::BlankNode(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Predicate {
    /// A single IRI (or prefixed name before expansion) or a variable.
    /// The keyword `a` is stored as the rdf:type IRI.
    Term(Term),
    /// Any other property path, as normalized source text. Not validatable.
    Path(String),
}

impl Predicate {
    pub fn as_iri(&self) -> Option<&str> {
        match self {
            Predicate::Term(t) => t.as_iri(),
            Predicate::Path(_) => None,
        }
    }

    pub fn is_rdf_type(&self) -> bool {
        self.as_iri() == Some(RDF_TYPE)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TriplePattern {
    pub subject: Term,
    pub predicate: Predicate,
    pub object: Term,
}

impl TriplePattern {
    pub fn new(subject: Term, predicate: Predicate, object: Term) -> Self {
        TriplePattern {
            subject,
            predicate,
            object,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum GraphPattern {
    Bgp(Vec<TriplePattern>),
    Group(Vec<GraphPattern>),
    Optional(Box<GraphPattern>),
    Union(Box<GraphPattern>, Box<GraphPattern>),
    /// `expression` is opaque text. For `FILTER EXISTS { .. }` and
    /// `FILTER NOT EXISTS { .. }` it is `EXISTS` / `NOT EXISTS` and the group
    /// is kept in `exists`.
    Filter {
        expression: String,
        exists: Option<Box<GraphPattern>>,
    },
    Bind {
        expression: String,
        variable: String,
    },
    /// Everything after the `VALUES` keyword, opaque.
    Values(String),
    Service {
        endpoint: Term,
        silent: bool,
        inner: Box<GraphPattern>,
    },
    SubSelect(Box<Query>),
}

impl GraphPattern {
    /// Visit every triple pattern in document order.
    pub fn for_each_triple<'a>(&'a self, f: &mut impl FnMut(&'a TriplePattern)) {
        match self {
            GraphPattern::Bgp(triples) => triples.iter().for_each(f),
            GraphPattern::Group(items) => items.iter().for_each(|p| p.for_each_triple(f)),
            GraphPattern::Optional(inner) => inner.for_each_triple(f),
            GraphPattern::Union(left, right) => {
                left.for_each_triple(f);
                right.for_each_triple(f);
            }
            GraphPattern::Filter { exists, .. } => {
                if let Some(inner) = exists {
                    inner.for_each_triple(f);
                }
            }
            GraphPattern::Service { inner, .. } => inner.for_each_triple(f),
            GraphPattern::SubSelect(q) => q.where_clause.for_each_triple(f),
            GraphPattern::Bind { .. } | GraphPattern::Values(_) => {}
        }
    }

    pub fn triple_count(&self) -> usize {
        let mut n = 0;
        self.for_each_triple(&mut |_| n += 1);
        n
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QueryForm {
    Select,
    Ask,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SelectModifier {
    Distinct,
    Reduced,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProjectionItem {
    Variable(String),
    /// `( expression AS ?var )`, opaque text including the parentheses.
    Expression(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Projection {
    All,
    Items(Vec<ProjectionItem>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub base: Option<String>,
    pub prefixes: BTreeMap<String, String>,
    pub form: QueryForm,
    pub modifier: Option<SelectModifier>,
    pub projection: Projection,
    pub where_clause: GraphPattern,
    /// GROUP BY / HAVING / ORDER BY / LIMIT / OFFSET / trailing VALUES, opaque.
    pub solution_modifiers: String,
}

impl Query {
    pub fn triple_count(&self) -> usize {
        self.where_clause.triple_count()
    }
}
