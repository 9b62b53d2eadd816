//! SPARQL protocol client.

use std::path::PathBuf;
use std::time::Duration;

use thiserror::Error;

use crate::sparql_results::{MalformedResults, QueryResults, MEDIA_TYPE};

#[derive(Debug, Error)]
pub enum EndpointError {
    #[error("endpoint {endpoint} unreachable: {reason}")]
    Unreachable { endpoint: String, reason: String },
    #[error("endpoint {endpoint} returned HTTP {status}: {body}")]
    Status {
        endpoint: String,
        status: u16,
        body: String,
    },
    #[error(transparent)]
    Malformed(#[from] MalformedResults),
    #[error("cannot read results file {path}: {reason}")]
    File { path: PathBuf, reason: String },
}

impl EndpointError {
    /// HTTP status when the endpoint answered with one.
    pub fn status(&self) -> Option<u16> {
        match self {
            EndpointError::Status { status, .. } => Some(*status),
            _ => None,
        }
    }
}

/// Where a results document comes from: a live endpoint or a `.srj` file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ResultsSource {
    Endpoint(String),
    File(PathBuf),
}

impl ResultsSource {
    /// `http(s)://` strings are endpoints, anything else a file path.
    pub fn from_arg(s: &str) -> Self {
        if s.starts_with("http://") || s.starts_with("https://") {
            ResultsSource::Endpoint(s.to_string())
        } else {
            ResultsSource::File(PathBuf::from(s))
        }
    }
}

#[derive(Debug, Clone)]
pub struct SparqlClient {
    http: reqwest::Client,
}

impl Default for SparqlClient {
    fn default() -> Self {
        Self::new(Duration::from_secs(60))
    }
}

impl SparqlClient {
    pub fn new(timeout: Duration) -> Self {
        let http = reqwest::Client::builder()
            .timeout(timeout)
            .user_agent(concat!("sparqlgen/", env!("CARGO_PKG_VERSION")))
            .build()
            .unwrap_or_default();
        SparqlClient { http }
    }

    /// Run a query with an HTTP POST form request (`query=`).
    pub async fn select(&self, endpoint: &str, query: &str) -> Result<QueryResults, EndpointError> {
        let unreachable = |e: reqwest::Error| EndpointError::Unreachable {
            endpoint: endpoint.to_string(),
            reason: e.to_string(),
        };
        let resp = self
            .http
            .post(endpoint)
            .header(reqwest::header::ACCEPT, MEDIA_TYPE)
            .form(&[("query", query)])
            .send()
            .await
            .map_err(unreachable)?;
        let status = resp.status();
        let body = resp.text().await.map_err(unreachable)?;
        if !status.is_success() {
            return Err(EndpointError::Status {
                endpoint: endpoint.to_string(),
                status: status.as_u16(),
                body: excerpt(&body),
            });
        }
        Ok(QueryResults::parse(&body)?)
    }

    /// Results from a live endpoint, or the stored response in a file.
    pub async fn results(&self, source: &ResultsSource, query: &str) -> Result<QueryResults, EndpointError> {
        match source {
            ResultsSource::Endpoint(url) => self.select(url, query).await,
            ResultsSource::File(path) => {
                let text = tokio::fs::read_to_string(path).await.map_err(|e| EndpointError::File {
                    path: path.clone(),
                    reason: e.to_string(),
                })?;
                Ok(QueryResults::parse(&text)?)
            }
        }
    }

    /// GET a page as text (endpoint homepages).
    pub async fn get_text(&self, url: &str, accept: &str) -> Result<String, EndpointError> {
        let unreachable = |e: reqwest::Error| EndpointError::Unreachable {
            endpoint: url.to_string(),
            reason: e.to_string(),
        };
        let resp = self
            .http
            .get(url)
            .header(reqwest::header::ACCEPT, accept)
            .send()
            .await
            .map_err(unreachable)?;
        let status = resp.status();
        let body = resp.text().await.map_err(unreachable)?;
        if !status.is_success() {
            return Err(EndpointError::Status {
                endpoint: url.to_string(),
                status: status.as_u16(),
                body: excerpt(&body),
            });
        }
        Ok(body)
    }
}

pub(crate) fn excerpt(body: &str) -> String {
    const MAX: usize = 200;
    match body.char_indices().nth(MAX) {
        Some((i, _)) => format!("{}...", &body[..i]),
        None => body.to_string(),
    }
}
