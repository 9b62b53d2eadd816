//! Endpoint source configuration and the catalog + index build pipeline.
//!
//! ```toml
//! [prefixes]
//! up = "http://purl.uniprot.org/core/"
//!
//! [[endpoint]]
//! url = "https://sparql.uniprot.org/sparql"
//! void = "void/uniprot.srj"        # optional, defaults to querying `url`
//! labels = "labels/uniprot.srj"
//! examples = "examples/uniprot.srj"
//! homepage = "homepage/uniprot.html"
//! ```
//!
//! Sources that are not `http(s)://` URLs are paths relative to the config
//! file: `.srj` results for the three queries, HTML for the homepage.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::endpoint::{ResultsSource, SparqlClient};
use crate::kb_index::{
    build_index, endpoint_info_from_html, harvest_endpoint_info, harvest_examples, shape_docs, Embedder, IndexError,
    IndexedDoc, VectorIndex,
};
use crate::prefixes::PrefixMap;
use crate::scalar::Scalar;
use crate::schema_catalog::{build_catalog, fetch_class_labels, fetch_void_rows, ClassLabels, SchemaCatalog};

#[derive(Debug, Error)]
pub enum SourcesError {
    #[error("cannot read sources config {path}: {reason}")]
    Read { path: PathBuf, reason: String },
    #[error("invalid sources config {path}: {reason}")]
    Invalid { path: PathBuf, reason: String },
    #[error(transparent)]
    Index(#[from] IndexError),
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndpointSource {
    pub url: String,
    #[serde(default)]
    pub void: Option<String>,
    #[serde(default)]
    pub labels: Option<String>,
    #[serde(default)]
    pub examples: Option<String>,
    /// Page carrying the schema.org description; defaults to `url`.
    #[serde(default)]
    pub homepage: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourcesConfig {
    /// Added to (and overriding) the common prefixes.
    #[serde(default)]
    pub prefixes: BTreeMap<String, String>,
    #[serde(rename = "endpoint", default)]
    pub endpoints: Vec<EndpointSource>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl SourcesConfig {
    pub fn load(path: &Path) -> Result<Self, SourcesError> {
        let text = std::fs::read_to_string(path).map_err(|e| SourcesError::Read {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        let mut config: SourcesConfig = toml::from_str(&text).map_err(|e| SourcesError::Invalid {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        if config.endpoints.is_empty() {
            return Err(SourcesError::Invalid {
                path: path.to_path_buf(),
                reason: "no [[endpoint]] entries".into(),
            });
        }
        config.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(config)
    }

    pub fn prefix_map(&self) -> PrefixMap {
        let mut map = PrefixMap::common();
        for (k, v) in &self.prefixes {
            map.insert(k.clone(), v.clone());
        }
        map
    }

    fn source(&self, configured: Option<&str>, url: &str) -> ResultsSource {
        match configured {
            Some(s) if !s.starts_with("http://") && !s.starts_with("https://") => {
                ResultsSource::File(self.base_dir.join(s))
            }
            Some(s) => ResultsSource::Endpoint(s.to_string()),
            None => ResultsSource::Endpoint(url.to_string()),
        }
    }
}

/// What a build produced, with every source that failed along the way.
#[derive(Debug)]
pub struct Knowledge<S> {
    pub catalog: SchemaCatalog,
    pub index: VectorIndex<S>,
    pub warnings: Vec<String>,
}

/// Gather the documents and schemas of every endpoint. A failing source is
/// recorded as a warning; the other sources of that endpoint still count.
pub async fn collect_documents(
    config: &SourcesConfig,
    client: &SparqlClient,
) -> (SchemaCatalog, Vec<IndexedDoc>, Vec<String>) {
    let prefixes = config.prefix_map();
    let mut warnings = Vec::new();
    let mut schemas = Vec::new();
    let mut docs = Vec::new();
    for ep in &config.endpoints {
        let url = ep.url.as_str();

        let info = match config.source(ep.homepage.as_deref(), url) {
            ResultsSource::Endpoint(page) => harvest_endpoint_info(client, &page, url).await,
            ResultsSource::File(path) => match std::fs::read_to_string(&path) {
                Ok(html) => endpoint_info_from_html(&html, url),
                Err(e) => {
                    warnings.push(format!("{url}: homepage {}: {e}", path.display()));
                    None
                }
            },
        };
        match info {
            Some(doc) => docs.push(doc),
            None => warnings.push(format!("{url}: no endpoint description")),
        }

        match harvest_examples(client, &config.source(ep.examples.as_deref(), url), url).await {
            Ok(h) => {
                if h.skipped > 0 {
                    warnings.push(format!("{url}: {} examples without a question skipped", h.skipped));
                }
                if h.docs.is_empty() {
                    warnings.push(format!("{url}: no example queries"));
                }
                docs.extend(h.docs);
            }
            Err(e) => warnings.push(format!("{url}: examples: {e}")),
        }

        let labels = match fetch_class_labels(client, &config.source(ep.labels.as_deref(), url)).await {
            Ok(l) => l,
            Err(e) => {
                warnings.push(format!("{url}: labels: {e}"));
                ClassLabels::new()
            }
        };
        match fetch_void_rows(client, &config.source(ep.void.as_deref(), url)).await {
            Ok(rows) => {
                let schema = build_catalog(&rows, &labels);
                docs.extend(shape_docs(&schema, url, &prefixes));
                schemas.push((url.to_string(), schema));
            }
            Err(e) => warnings.push(format!("{url}: VoID: {e}")),
        }
    }
    for w in &warnings {
        tracing::warn!("{w}");
    }
    (SchemaCatalog::new(prefixes, schemas), docs, warnings)
}

pub async fn build_knowledge<S: Scalar>(
    config: &SourcesConfig,
    client: &SparqlClient,
    embedder: &dyn Embedder<S>,
) -> Result<Knowledge<S>, SourcesError> {
    let (catalog, docs, warnings) = collect_documents(config, client).await;
    let index = build_index(embedder, docs).await?;
    Ok(Knowledge {
        catalog,
        index,
        warnings,
    })
}
