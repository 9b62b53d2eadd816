#![allow(dead_code)]

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use sparqlgen::api::{router, AppState, Snapshot};
use sparqlgen::logs::{FeedbackStore, QuestionLog};
use sparqlgen::stub::Stub;
use sparqlgen_core::endpoint::SparqlClient;
use sparqlgen_core::generation::{LlmClient, MockLlm};
use sparqlgen_core::kb_index::HashEmbedder;
use sparqlgen_core::sources::{build_knowledge, SourcesConfig};

pub const UNIPROT: &str = "https://sparql.uniprot.org/sparql";
pub const OMA: &str = "https://sparql.omabrowser.org/sparql";
pub const DIM: usize = 256;

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(rel)
}

/// Index and catalog of the two fixture endpoints, built from files.
pub async fn snapshot() -> Snapshot {
    let config = SourcesConfig::load(&fixture("sources.toml")).unwrap();
    let k = build_knowledge(&config, &SparqlClient::default(), &HashEmbedder::new(DIM))
        .await
        .unwrap();
    assert!(
        k.warnings.iter().all(|w| w.contains("no example queries")),
        "{:?}",
        k.warnings
    );
    Snapshot {
        catalog: k.catalog,
        index: k.index,
    }
}

pub fn mock(rel: &str) -> MockLlm {
    MockLlm::from_file(&fixture(rel)).unwrap()
}

pub fn local() -> SocketAddr {
    "127.0.0.1:0".parse().unwrap()
}

pub struct StubServer {
    pub addr: SocketAddr,
}

impl StubServer {
    pub async fn start(config: &Path) -> Self {
        let stub = Stub::load(config).unwrap();
        StubServer {
            addr: stub.spawn(local()).await.unwrap(),
        }
    }

    pub fn url(&self, name: &str) -> String {
        format!("http://{}/{name}/sparql", self.addr)
    }

    /// The fixture endpoints mapped to this server.
    pub fn overrides(&self) -> BTreeMap<String, String> {
        BTreeMap::from([
            (UNIPROT.to_string(), self.url("uniprot")),
            (OMA.to_string(), self.url("oma")),
        ])
    }
}

pub struct App {
    pub base: String,
    pub state: Arc<AppState>,
    pub logs: tempfile::TempDir,
}

impl App {
    /// Serve with the given model; the snapshot is installed unless
    /// `loaded` is false.
    pub async fn start(llm: Arc<dyn LlmClient>, loaded: bool) -> Self {
        let logs = tempfile::tempdir().unwrap();
        let state = Arc::new(AppState::new(
            Arc::new(HashEmbedder::new(DIM)),
            llm,
            QuestionLog::open(&logs.path().join("questions.jsonl")).unwrap(),
            FeedbackStore::new(&logs.path().join("feedback")),
            UNIPROT,
        ));
        if loaded {
            state.install(snapshot().await);
        }
        let listener = tokio::net::TcpListener::bind(local()).await.unwrap();
        let addr = listener.local_addr().unwrap();
        let app = router(state.clone());
        tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
        App {
            base: format!("http://{addr}"),
            state,
            logs,
        }
    }

    pub fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    pub fn questions_path(&self) -> PathBuf {
        self.logs.path().join("questions.jsonl")
    }

    pub fn feedback_dir(&self) -> PathBuf {
        self.logs.path().join("feedback")
    }
}
