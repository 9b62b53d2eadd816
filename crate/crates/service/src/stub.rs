//! Canned SPARQL endpoints for offline runs.
//!
//! Each endpoint is served at `/{name}/sparql`. A query is answered with the
//! results registered for it, matched on its parsed and re-serialized form so
//! whitespace, comments and keyword case do not matter. Queries that parse but
//! are not registered get an empty result; queries that do not parse get 400.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Form, Router};
use serde::Deserialize;
use sparqlgen_core::kb_index::EXAMPLES_QUERY;
use sparqlgen_core::schema_catalog::{LABELS_QUERY, VOID_QUERY};
use sparqlgen_core::sparql_ast::{parse, serialize};
use sparqlgen_core::sparql_results::{QueryResults, RdfTerm, MEDIA_TYPE};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StubError {
    #[error("{path}: {reason}")]
    Config { path: PathBuf, reason: String },
    #[error("endpoint {endpoint}: {reason}")]
    Entry { endpoint: String, reason: String },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StubFile {
    #[serde(rename = "endpoint", default)]
    pub endpoints: Vec<StubEndpointConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StubEndpointConfig {
    pub name: String,
    /// Results answering the VoID statistics query.
    pub void: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub examples: Option<PathBuf>,
    /// HTML returned to `GET /{name}/sparql` without a query.
    pub homepage: Option<PathBuf>,
    #[serde(rename = "query", default)]
    pub queries: Vec<CannedQuery>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CannedQuery {
    pub query: Option<String>,
    pub query_file: Option<PathBuf>,
    /// A results document.
    pub results: Option<PathBuf>,
    /// Inline results: column names and rows. `<...>` cells are IRIs, other
    /// cells plain literals, empty strings unbound.
    pub vars: Option<Vec<String>>,
    pub rows: Option<Vec<Vec<String>>>,
    /// Answer with this HTTP status instead of results.
    pub status: Option<u16>,
}

#[derive(Debug, Clone)]
enum Answer {
    Results(String),
    Status(u16),
}

#[derive(Debug, Default)]
struct StubEndpoint {
    answers: BTreeMap<String, Answer>,
    homepage: Option<String>,
}

/// Endpoints keyed by name.
#[derive(Debug, Default, Clone)]
pub struct Stub {
    endpoints: Arc<BTreeMap<String, StubEndpoint>>,
}

/// Parse and serialize again; `None` when the text is not a query.
pub fn canonical_query(text: &str) -> Option<String> {
    parse(text).ok().map(|q| serialize(&q))
}

fn inline_results(vars: &[String], rows: &[Vec<String>]) -> String {
    let bindings = rows
        .iter()
        .map(|row| {
            vars.iter()
                .zip(row)
                .filter(|(_, cell)| !cell.is_empty())
                .map(|(v, cell)| {
                    let term = match cell.strip_prefix('<').and_then(|c| c.strip_suffix('>')) {
                        Some(iri) => RdfTerm::uri(iri),
                        None => RdfTerm::literal(cell.as_str()),
                    };
                    (v.clone(), term)
                })
                .collect()
        })
        .collect();
    QueryResults {
        vars: vars.to_vec(),
        bindings,
        boolean: None,
    }
    .to_json()
}

impl Stub {
    pub fn load(path: &Path) -> Result<Self, StubError> {
        let err = |reason: String| StubError::Config {
            path: path.to_path_buf(),
            reason,
        };
        let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        let file: StubFile = toml::from_str(&text).map_err(|e| err(e.to_string()))?;
        Self::from_config(&file, path.parent().unwrap_or(Path::new(".")))
    }

    /// Relative paths are resolved against `base`.
    pub fn from_config(file: &StubFile, base: &Path) -> Result<Self, StubError> {
        let mut endpoints = BTreeMap::new();
        for cfg in &file.endpoints {
            let entry_err = |reason: String| StubError::Entry {
                endpoint: cfg.name.clone(),
                reason,
            };
            let read = |p: &Path| {
                std::fs::read_to_string(base.join(p)).map_err(|e| entry_err(format!("{}: {e}", p.display())))
            };
            let mut ep = StubEndpoint::default();
            let mut register = |query: &str, answer: Answer| -> Result<(), StubError> {
                let key = canonical_query(query).ok_or_else(|| entry_err(format!("query does not parse: {query}")))?;
                ep.answers.insert(key, answer);
                Ok(())
            };
            for (query, file) in [
                (VOID_QUERY, &cfg.void),
                (LABELS_QUERY, &cfg.labels),
                (EXAMPLES_QUERY, &cfg.examples),
            ] {
                if let Some(f) = file {
                    register(query, Answer::Results(read(f)?))?;
                }
            }
            for q in &cfg.queries {
                let text = match (&q.query, &q.query_file) {
                    (Some(t), None) => t.clone(),
                    (None, Some(f)) => read(f)?,
                    _ => return Err(entry_err("give exactly one of query and query_file".into())),
                };
                let answer = match (&q.results, &q.vars, &q.rows, q.status) {
                    (Some(f), None, None, None) => {
                        let body = read(f)?;
                        QueryResults::parse(&body).map_err(|e| entry_err(format!("{}: {e}", f.display())))?;
                        Answer::Results(body)
                    }
                    (None, Some(vars), rows, None) => {
                        Answer::Results(inline_results(vars, rows.as_deref().unwrap_or(&[])))
                    }
                    (None, None, None, Some(status)) => Answer::Status(status),
                    _ => return Err(entry_err("give exactly one of results, vars/rows and status".into())),
                };
                register(&text, answer)?;
            }
            ep.homepage = cfg.homepage.as_deref().map(read).transpose()?;
            if endpoints.insert(cfg.name.clone(), ep).is_some() {
                return Err(entry_err("duplicate endpoint name".into()));
            }
        }
        Ok(Stub {
            endpoints: Arc::new(endpoints),
        })
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.endpoints.keys().map(String::as_str)
    }

    pub fn router(&self) -> Router {
        Router::new()
            .route("/{name}/sparql", get(handle_get).post(handle_post))
            .with_state(self.clone())
    }

    /// Serve on `addr` in a background task; returns the bound address.
    pub async fn spawn(&self, addr: SocketAddr) -> std::io::Result<SocketAddr> {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        let bound = listener.local_addr()?;
        let app = self.router();
        tokio::spawn(async move {
            if let Err(e) = axum::serve(listener, app).await {
                tracing::error!("stub endpoint stopped: {e}");
            }
        });
        Ok(bound)
    }

    fn answer(&self, name: &str, query: &str) -> Response {
        let Some(ep) = self.endpoints.get(name) else {
            return (StatusCode::NOT_FOUND, format!("no endpoint named {name}")).into_response();
        };
        let Some(key) = canonical_query(query) else {
            return (StatusCode::BAD_REQUEST, "query does not parse").into_response();
        };
        match ep.answers.get(&key) {
            Some(Answer::Results(body)) => results_response(body.clone()),
            Some(Answer::Status(s)) => {
                let status = StatusCode::from_u16(*s).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
                (status, "canned failure").into_response()
            }
            None => {
                tracing::debug!(endpoint = name, "no canned answer, returning empty results");
                results_response(QueryResults::default().to_json())
            }
        }
    }
}

fn results_response(body: String) -> Response {
    ([(header::CONTENT_TYPE, MEDIA_TYPE)], body).into_response()
}

#[derive(Deserialize)]
struct QueryParams {
    query: Option<String>,
}

async fn handle_get(
    State(stub): State<Stub>,
    UrlPath(name): UrlPath<String>,
    Query(params): Query<QueryParams>,
    headers: HeaderMap,
) -> Response {
    if let Some(q) = params.query {
        return stub.answer(&name, &q);
    }
    let wants_html = headers
        .get(header::ACCEPT)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.contains("text/html"));
    match stub.endpoints.get(&name).and_then(|e| e.homepage.clone()) {
        Some(html) if wants_html => ([(header::CONTENT_TYPE, "text/html; charset=utf-8")], html).into_response(),
        _ => (StatusCode::BAD_REQUEST, "missing query parameter").into_response(),
    }
}

async fn handle_post(
    State(stub): State<Stub>,
    UrlPath(name): UrlPath<String>,
    Form(params): Form<QueryParams>,
) -> Response {
    match params.query {
        Some(q) => stub.answer(&name, &q),
        None => (StatusCode::BAD_REQUEST, "missing query parameter").into_response(),
    }
}
