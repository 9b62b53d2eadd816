//! Parsing, schema extraction, retrieval, validation and evaluation for
//! natural-language to SPARQL generation over federated endpoints.

pub mod endpoint;
pub mod evalsuite;
pub mod generation;
pub mod kb_index;
pub mod prefixes;
pub mod scalar;
pub mod schema_catalog;
pub mod sources;
pub mod sparql_ast;
pub mod sparql_results;
pub mod validator;

/// Single-precision embedding, the default for stored indexes.
pub type Embedding = kb_index::Embedding<f32>;
/// Single-precision vector index.
pub type VectorIndex = kb_index::VectorIndex<f32>;
