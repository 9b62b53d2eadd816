//! Retrievable documents, their embeddings and exact cosine search.
//!
//! The index is a flat list scanned in full on every query. Embeddings are
//! unit vectors so the cosine similarity is a dot product.

mod embed;
mod harvest;
mod store;

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::scalar::Scalar;

pub use embed::{EmbedError, Embedder, HashEmbedder, RemoteEmbedder};
pub use harvest::{
    endpoint_info_from_html, examples_from_results, harvest_endpoint_info, harvest_examples, shape_docs,
    ExampleHarvest, EXAMPLES_QUERY,
};
pub use store::{load, save};

/// Default dimension, matching `BAAI/bge-large-en-v1.5`.
pub const DEFAULT_DIMENSION: usize = 1024;

/// Allowed deviation of a stored or computed embedding norm from 1.
pub const NORM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("embedding dimension {got} does not match index dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("document text to embed is empty")]
    EmptyEmbedText,
    #[error("corrupt index file: {0}")]
    CorruptIndex(String),
    #[error("index built with embedding provider '{found}', expected '{expected}'")]
    ProviderMismatch { expected: String, found: String },
    #[error("index I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Embed(#[from] EmbedError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DocKind {
    ExampleQuery,
    ClassShape,
    EndpointInfo,
}

impl DocKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DocKind::ExampleQuery => "example_query",
            DocKind::ClassShape => "class_shape",
            DocKind::EndpointInfo => "endpoint_info",
        }
    }
}

/// A retrievable unit: what is embedded and what goes into the prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexedDoc {
    pub id: String,
    pub kind: DocKind,
    pub embed_text: String,
    pub payload: String,
    pub endpoint: String,
    pub source_iri: Option<String>,
}

impl IndexedDoc {
    /// The id hashes endpoint, kind and source IRI; documents without a
    /// source IRI hash their texts instead.
    pub fn new(
        kind: DocKind,
        embed_text: impl Into<String>,
        payload: impl Into<String>,
        endpoint: impl Into<String>,
        source_iri: Option<String>,
    ) -> Result<Self, IndexError> {
        let embed_text = embed_text.into();
        if embed_text.trim().is_empty() {
            return Err(IndexError::EmptyEmbedText);
        }
        let payload = payload.into();
        let endpoint = endpoint.into();
        let mut hasher = Sha256::new();
        hasher.update(endpoint.as_bytes());
        hasher.update([0]);
        hasher.update(kind.as_str().as_bytes());
        hasher.update([0]);
        match &source_iri {
            Some(iri) => hasher.update(iri.as_bytes()),
            None => {
                hasher.update(embed_text.as_bytes());
                hasher.update([0]);
                hasher.update(payload.as_bytes());
            }
        }
        let digest = hasher.finalize();
        let id = digest[..16].iter().map(|b| format!("{b:02x}")).collect();
        Ok(IndexedDoc {
            id,
            kind,
            embed_text,
            payload,
            endpoint,
            source_iri,
        })
    }
}

/// A unit-length vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding<S> {
    values: Vec<S>,
}

impl<S: Scalar> Embedding<S> {
    /// L2-normalize `values`; an all-zero (or empty-norm) vector becomes the
    /// first basis vector.
    pub fn normalized(mut values: Vec<S>) -> Self {
        let norm = values.iter().fold(S::zero(), |acc, &v| acc + v * v).sqrt();
        if norm > S::zero() && norm.is_finite() {
            for v in &mut values {
                *v = *v / norm;
            }
        } else {
            values.iter_mut().for_each(|v| *v = S::zero());
            if let Some(first) = values.first_mut() {
                *first = S::one();
            }
        }
        Embedding { values }
    }

    /// Wrap a vector already known to be unit length.
    pub(crate) fn from_unit(values: Vec<S>) -> Self {
        Embedding { values }
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }

    pub fn as_slice(&self) -> &[S] {
        &self.values
    }

    pub fn norm(&self) -> S {
        self.dot(self).sqrt()
    }

    pub fn dot(&self, other: &Self) -> S {
        self.values
            .iter()
            .zip(&other.values)
            .fold(S::zero(), |acc, (&a, &b)| acc + a * b)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexEntry<S> {
    pub doc: IndexedDoc,
    pub embedding: Embedding<S>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchHit<'a, S> {
    pub doc: &'a IndexedDoc,
    pub score: S,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorIndex<S> {
    dimension: usize,
    fingerprint: String,
    entries: Vec<IndexEntry<S>>,
}

impl<S: Scalar> VectorIndex<S> {
    pub fn new(dimension: usize, fingerprint: impl Into<String>) -> Self {
        VectorIndex {
            dimension,
            fingerprint: fingerprint.into(),
            entries: Vec::new(),
        }
    }

    pub fn insert(&mut self, doc: IndexedDoc, embedding: Embedding<S>) -> Result<(), IndexError> {
        self.check_dimension(embedding.dimension())?;
        self.entries.push(IndexEntry { doc, embedding });
        Ok(())
    }

    fn check_dimension(&self, got: usize) -> Result<(), IndexError> {
        if got != self.dimension {
            return Err(IndexError::DimensionMismatch {
                expected: self.dimension,
                got,
            });
        }
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn entries(&self) -> &[IndexEntry<S>] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn count(&self, kind: DocKind) -> usize {
        self.entries.iter().filter(|e| e.doc.kind == kind).count()
    }

    /// Top `k` documents (optionally of one kind) by cosine similarity,
    /// best first, ties broken by ascending id. No similarity threshold.
    pub fn search(
        &self,
        query: &Embedding<S>,
        k: usize,
        kind: Option<DocKind>,
    ) -> Result<Vec<SearchHit<'_, S>>, IndexError> {
        self.check_dimension(query.dimension())?;
        let mut hits: Vec<SearchHit<'_, S>> = self
            .entries
            .iter()
            .filter(|e| kind.is_none_or(|k| e.doc.kind == k))
            .map(|e| SearchHit {
                doc: &e.doc,
                score: e.embedding.dot(query),
            })
            .collect();
        hits.sort_by(|a, b| {
            b.score
                .partial_cmp(&a.score)
                .unwrap_or(Ordering::Equal)
                .then_with(|| a.doc.id.cmp(&b.doc.id))
        });
        hits.truncate(k);
        Ok(hits)
    }
}

/// Embed every document and collect them into a fresh index.
pub async fn build_index<S: Scalar>(
    embedder: &dyn Embedder<S>,
    docs: Vec<IndexedDoc>,
) -> Result<VectorIndex<S>, IndexError> {
    const BATCH: usize = 64;
    let mut index = VectorIndex::new(embedder.dimension(), embedder.fingerprint());
    let mut docs = docs.into_iter().peekable();
    while docs.peek().is_some() {
        let batch: Vec<IndexedDoc> = docs.by_ref().take(BATCH).collect();
        let texts: Vec<String> = batch.iter().map(|d| d.embed_text.clone()).collect();
        let vectors = embedder.embed(&texts).await?;
        for (doc, v) in batch.into_iter().zip(vectors) {
            index.insert(doc, v)?;
        }
    }
    Ok(index)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(i: usize, kind: DocKind) -> IndexedDoc {
        IndexedDoc::new(
            kind,
            format!("text {i}"),
            "payload",
            "http://e/sparql",
            Some(format!("http://e/{i}")),
        )
        .unwrap()
    }

    #[test]
    fn zero_vector_falls_back_to_first_axis() {
        let e = Embedding::<f64>::normalized(vec![0.0, 0.0, 0.0]);
        assert_eq!(e.as_slice(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn search_limits_and_filters() {
        let mut index = VectorIndex::<f32>::new(2, "test");
        index
            .insert(doc(0, DocKind::ExampleQuery), Embedding::normalized(vec![1.0, 0.0]))
            .unwrap();
        index
            .insert(doc(1, DocKind::ClassShape), Embedding::normalized(vec![0.0, 1.0]))
            .unwrap();
        index
            .insert(doc(2, DocKind::ExampleQuery), Embedding::normalized(vec![1.0, 1.0]))
            .unwrap();
        let q = Embedding::normalized(vec![1.0, 0.0]);
        let hits = index.search(&q, 10, Some(DocKind::ExampleQuery)).unwrap();
        assert_eq!(hits.len(), 2);
        assert!((hits[0].score - 1.0).abs() < 1e-6);
        assert!(hits[0].score >= hits[1].score);
        assert_eq!(index.search(&q, 1, None).unwrap().len(), 1);
    }

    #[test]
    fn dimension_mismatch() {
        let index = VectorIndex::<f64>::new(3, "t");
        let err = index.search(&Embedding::normalized(vec![1.0]), 1, None).unwrap_err();
        assert!(matches!(err, IndexError::DimensionMismatch { expected: 3, got: 1 }));
    }

    #[test]
    fn empty_text_rejected() {
        assert!(matches!(
            IndexedDoc::new(DocKind::ExampleQuery, "  ", "q", "e", None),
            Err(IndexError::EmptyEmbedText)
        ));
    }

    #[test]
    fn ties_break_by_id() {
        let mut index = VectorIndex::<f64>::new(1, "t");
        let a = doc(7, DocKind::ExampleQuery);
        let b = doc(8, DocKind::ExampleQuery);
        let first = a.id.clone().min(b.id.clone());
        index.insert(a, Embedding::normalized(vec![1.0])).unwrap();
        index.insert(b, Embedding::normalized(vec![1.0])).unwrap();
        let hits = index.search(&Embedding::normalized(vec![1.0]), 2, None).unwrap();
        assert_eq!(hits[0].doc.id, first);
    }
}
