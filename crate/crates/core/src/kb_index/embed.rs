//! Text embedding providers.

use std::time::Duration;

use async_trait::async_trait;
use serde::Deserialize;
use serde_json::json;
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::Embedding;
use crate::endpoint::excerpt;
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("embedding service returned HTTP {status}: {body}")]
    Remote { status: u16, body: String },
    #[error("embedding service unreachable: {0}")]
    Unreachable(String),
    #[error("embedding service response malformed: {0}")]
    Malformed(String),
    #[error("embedding dimension {got} does not match expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
}

#[async_trait]
pub trait Embedder<S: Scalar>: Send + Sync {
    fn dimension(&self) -> usize;

    /// Identifies the provider and its settings; stored in index files so a
    /// query is never embedded with a different model than the index.
    fn fingerprint(&self) -> String;

    /// One unit vector per text, in order.
    async fn embed(&self, texts: &[String]) -> Result<Vec<Embedding<S>>, EmbedError>;

    async fn embed_one(&self, text: &str) -> Result<Embedding<S>, EmbedError> {
        let mut v = self.embed(&[text.to_string()]).await?;
        v.pop()
            .ok_or_else(|| EmbedError::Malformed("no embedding returned".into()))
    }
}

/// Deterministic offline embedder: hashed bag of lowercase tokens.
#[derive(Debug, Clone)]
pub struct HashEmbedder {
    dimension: usize,
}

impl HashEmbedder {
    pub fn new(dimension: usize) -> Self {
        assert!(dimension > 0, "embedding dimension must be positive");
        HashEmbedder { dimension }
    }

    pub fn embed_text<S: Scalar>(&self, text: &str) -> Embedding<S> {
        let mut acc = vec![0i64; self.dimension];
        for token in text.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()) {
            let token = token.to_lowercase();
            let digest = Sha256::digest(token.as_bytes());
            let mut bucket = [0u8; 8];
            bucket.copy_from_slice(&digest[..8]);
            let slot = (u64::from_le_bytes(bucket) % self.dimension as u64) as usize;
            // Sign comes from a separate part of the digest.
            let sign = if digest[8] & 1 == 0 { 1 } else { -1 };
            acc[slot] += sign;
        }
        let values = acc
            .into_iter()
            .map(|v| S::from_i64(v).unwrap_or_else(S::zero))
            .collect();
        Embedding::normalized(values)
    }
}

#[async_trait]
impl<S: Scalar> Embedder<S> for HashEmbedder {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn fingerprint(&self) -> String {
        format!("hash:v1:d{}", self.dimension)
    }

    async fn embed(&self, texts: &[String]) -> Result<Vec<Embedding<S>>, EmbedError> {
        Ok(texts.iter().map(|t| self.embed_text(t)).collect())
    }
}

/// Client for an OpenAI-compatible `/embeddings` API.
#[derive(Debug, Clone)]
pub struct RemoteEmbedder {
    http: reqwest::Client,
    base_url: String,
    model: String,
    api_key: Option<String>,
    dimension: usize,
}

#[derive(Deserialize)]
struct EmbeddingsResponse {
    data: Vec<EmbeddingItem>,
}

#[derive(Deserialize)]
struct EmbeddingItem {
    embedding: Vec<f64>,
    #[serde(default)]
    index: Option<usize>,
}

impl RemoteEmbedder {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>, dimension: usize) -> Self {
        let http = reqwest::Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .unwrap_or_default();
        RemoteEmbedder {
            http,
            base_url: base_url.into().trim_end_matches('/').to_string(),
            model: model.into(),
            api_key: None,
            dimension,
        }
    }

    pub fn with_api_key(mut self, key: Option<String>) -> Self {
        self.api_key = key.filter(|k| !k.is_empty());
        self
    }
}

#[async_trait]
impl<S: Scalar> Embedder<S> for RemoteEmbedder {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn fingerprint(&self) -> String {
        format!("remote:{}:d{}", self.model, self.dimension)
    }

    async fn embed(&self, texts: &[String]) -> Result<Vec<Embedding<S>>, EmbedError> {
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        let mut req = self
            .http
            .post(format!("{}/embeddings", self.base_url))
            .json(&json!({ "model": self.model, "input": texts }));
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().await.map_err(|e| EmbedError::Unreachable(e.to_string()))?;
        let status = resp.status();
        let body = resp.text().await.map_err(|e| EmbedError::Unreachable(e.to_string()))?;
        if !status.is_success() {
            return Err(EmbedError::Remote {
                status: status.as_u16(),
                body: excerpt(&body),
            });
        }
        let mut parsed: EmbeddingsResponse =
            serde_json::from_str(&body).map_err(|e| EmbedError::Malformed(e.to_string()))?;
        if parsed.data.len() != texts.len() {
            return Err(EmbedError::Malformed(format!(
                "{} embeddings for {} inputs",
                parsed.data.len(),
                texts.len()
            )));
        }
        if parsed.data.iter().all(|d| d.index.is_some()) {
            parsed.data.sort_by_key(|d| d.index);
        }
        parsed
            .data
            .into_iter()
            .map(|item| {
                if item.embedding.len() != self.dimension {
                    return Err(EmbedError::DimensionMismatch {
                        expected: self.dimension,
                        got: item.embedding.len(),
                    });
                }
                let values = item
                    .embedding
                    .into_iter()
                    .map(|v| S::from_f64(v).unwrap_or_else(S::zero))
                    .collect();
                Ok(Embedding::normalized(values))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_text_same_vector() {
        let e = HashEmbedder::new(64);
        let a: Embedding<f64> = e.embed_text("Which proteins cause cancer?");
        let b: Embedding<f64> = e.embed_text("which PROTEINS cause cancer");
        assert_eq!(a, b);
        assert!((a.dot(&b) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_text_is_first_axis() {
        let e: Embedding<f32> = HashEmbedder::new(8).embed_text("");
        assert_eq!(e.as_slice()[0], 1.0);
        assert!(e.as_slice()[1..].iter().all(|v| *v == 0.0));
    }
}
