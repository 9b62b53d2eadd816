//! Loading an index, a catalog and clients from files and flags.

use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use sparqlgen_core::generation::{LlmClient, MockLlm, OpenAiClient};
use sparqlgen_core::kb_index::{self, Embedder, HashEmbedder, RemoteEmbedder};
use sparqlgen_core::schema_catalog::SchemaCatalog;

use crate::api::Snapshot;

pub const ENV_EMBED_URL: &str = "SPARQLGEN_EMBED_URL";
pub const ENV_EMBED_API_KEY: &str = "SPARQLGEN_EMBED_API_KEY";

/// Where embeddings come from: the hashing embedder (`hash:<dim>`) or an
/// OpenAI-compatible service (`<model>` with a base URL).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EmbedderSpec {
    Hash(usize),
    Remote {
        url: String,
        model: String,
        dimension: usize,
    },
}

impl EmbedderSpec {
    pub fn build(&self) -> Arc<dyn Embedder<f32>> {
        match self {
            EmbedderSpec::Hash(d) => Arc::new(HashEmbedder::new(*d)),
            EmbedderSpec::Remote { url, model, dimension } => Arc::new(
                RemoteEmbedder::new(url.clone(), model.clone(), *dimension)
                    .with_api_key(std::env::var(ENV_EMBED_API_KEY).ok()),
            ),
        }
    }

    /// The embedder that produced an index, from its fingerprint.
    pub fn from_fingerprint(fingerprint: &str, embed_url: Option<&str>) -> Result<Self> {
        let dim = |s: &str| -> Result<usize> {
            s.strip_prefix('d')
                .and_then(|d| d.parse().ok())
                .with_context(|| format!("bad dimension in index fingerprint {fingerprint}"))
        };
        if let Some(rest) = fingerprint.strip_prefix("hash:v1:") {
            return Ok(EmbedderSpec::Hash(dim(rest)?));
        }
        if let Some(rest) = fingerprint.strip_prefix("remote:") {
            let (model, d) = rest.rsplit_once(':').context("bad remote fingerprint")?;
            let url = embed_url
                .map(str::to_string)
                .or_else(|| std::env::var(ENV_EMBED_URL).ok())
                .with_context(|| format!("index was built with embedding model {model}; give its base URL with --embed-url or {ENV_EMBED_URL}"))?;
            return Ok(EmbedderSpec::Remote {
                url,
                model: model.to_string(),
                dimension: dim(d)?,
            });
        }
        bail!("unknown embedder fingerprint {fingerprint}")
    }
}

pub fn load_catalog(path: &Path) -> Result<SchemaCatalog> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    SchemaCatalog::from_json(&text).with_context(|| format!("parsing catalog {}", path.display()))
}

pub fn load_snapshot(index: &Path, catalog: &Path) -> Result<Snapshot> {
    let index = kb_index::load(index, None).with_context(|| format!("loading index {}", index.display()))?;
    Ok(Snapshot {
        catalog: load_catalog(catalog)?,
        index,
    })
}

/// A scripted mock when `mock` is given, else an OpenAI-compatible client
/// from flags or the environment.
pub fn llm_client(mock: Option<&Path>, url: Option<String>, model: Option<String>) -> Result<Arc<dyn LlmClient>> {
    if let Some(path) = mock {
        let mut llm = MockLlm::from_file(path)?;
        if let Some(m) = model {
            llm = llm.with_model(m);
        }
        return Ok(Arc::new(llm));
    }
    match OpenAiClient::from_env(url, model) {
        Some(c) => Ok(Arc::new(c)),
        None => bail!("no LLM configured: give --mock-llm, or --llm-url and --model"),
    }
}
