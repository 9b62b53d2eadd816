//! HTTP API: `/chat`, `/feedback`, `/health`, `/check`.

use std::sync::{Arc, RwLock};

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use sparqlgen_core::endpoint::SparqlClient;
use sparqlgen_core::generation::{
    Approach, ChatMessage, GenerationError, Generator, LlmClient, Reference, Role, TokenUsage,
};
use sparqlgen_core::kb_index::Embedder;
use sparqlgen_core::schema_catalog::{check_endpoint_metadata, SchemaCatalog};
use sparqlgen_core::VectorIndex;

use crate::logs::{
    iso_timestamp, ConversationMessage, FeedbackRecord, FeedbackStore, QuestionEntry, QuestionLog, Rating,
};

/// Index and catalog served together. Replaced as a whole.
#[derive(Debug)]
pub struct Snapshot {
    pub catalog: SchemaCatalog,
    pub index: VectorIndex,
}

/// Picks the chat model for a request that names one.
pub type LlmFactory = Box<dyn Fn(&str) -> Option<Arc<dyn LlmClient>> + Send + Sync>;

pub struct AppState {
    snapshot: RwLock<Option<Arc<Snapshot>>>,
    embedder: Arc<dyn Embedder<f32>>,
    llm: Arc<dyn LlmClient>,
    llm_factory: Option<LlmFactory>,
    questions: QuestionLog,
    feedback: FeedbackStore,
    default_endpoint: String,
    max_fix_rounds: usize,
    client: SparqlClient,
}

impl AppState {
    pub fn new(
        embedder: Arc<dyn Embedder<f32>>,
        llm: Arc<dyn LlmClient>,
        questions: QuestionLog,
        feedback: FeedbackStore,
        default_endpoint: impl Into<String>,
    ) -> Self {
        AppState {
            snapshot: RwLock::new(None),
            embedder,
            llm,
            llm_factory: None,
            questions,
            feedback,
            default_endpoint: default_endpoint.into(),
            max_fix_rounds: sparqlgen_core::generation::DEFAULT_MAX_FIX_ROUNDS,
            client: SparqlClient::default(),
        }
    }

    pub fn with_llm_factory(mut self, f: LlmFactory) -> Self {
        self.llm_factory = Some(f);
        self
    }

    pub fn with_max_fix_rounds(mut self, n: usize) -> Self {
        self.max_fix_rounds = n;
        self
    }

    /// Make a new index and catalog visible to requests that start after
    /// this call.
    pub fn install(&self, snapshot: Snapshot) {
        *self.snapshot.write().unwrap_or_else(|e| e.into_inner()) = Some(Arc::new(snapshot));
    }

    pub fn snapshot(&self) -> Option<Arc<Snapshot>> {
        self.snapshot.read().unwrap_or_else(|e| e.into_inner()).clone()
    }

    fn llm_for(&self, model: Option<&str>) -> Option<Arc<dyn LlmClient>> {
        match model {
            None => Some(self.llm.clone()),
            Some(m) if m == self.llm.model() => Some(self.llm.clone()),
            Some(m) => self.llm_factory.as_ref().and_then(|f| f(m)),
        }
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/chat", post(chat))
        .route("/feedback", post(feedback))
        .route("/health", get(health))
        .route("/check", get(check))
        .with_state(state)
}

fn error(status: StatusCode, message: impl ToString) -> Response {
    (status, Json(json!({ "error": message.to_string() }))).into_response()
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChatRequest {
    pub messages: Vec<ChatMessage>,
    #[serde(default)]
    pub model: Option<String>,
    #[serde(default = "default_true")]
    pub validate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationSummary {
    /// Messages of each round, oldest first.
    pub issues: Vec<Vec<String>>,
    pub rounds_used: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub answer: String,
    pub query: Option<String>,
    pub endpoint: String,
    pub references: Vec<Reference>,
    pub validation: ValidationSummary,
    pub usage: TokenUsage,
}

async fn chat(State(state): State<Arc<AppState>>, body: Result<Json<ChatRequest>, JsonRejection>) -> Response {
    let Json(req) = match body {
        Ok(b) => b,
        Err(e) => return error(StatusCode::BAD_REQUEST, e.body_text()),
    };
    let Some((last, history)) = req.messages.split_last() else {
        return error(StatusCode::BAD_REQUEST, "messages is empty");
    };
    if last.role != Role::User || last.content.trim().is_empty() {
        return error(
            StatusCode::BAD_REQUEST,
            "the last message must be a non-empty user message",
        );
    }
    let Some(snapshot) = state.snapshot() else {
        return error(StatusCode::SERVICE_UNAVAILABLE, "index not loaded yet");
    };
    let Some(llm) = state.llm_for(req.model.as_deref()) else {
        return error(
            StatusCode::BAD_REQUEST,
            format!("model {} is not available", req.model.unwrap_or_default()),
        );
    };
    let entry = QuestionEntry {
        timestamp: iso_timestamp(chrono::Utc::now()),
        question: last.content.clone(),
        model: Some(llm.model().to_string()),
    };
    if let Err(e) = state.questions.append(&entry) {
        tracing::error!("cannot write question log {}: {e}", state.questions.path().display());
    }
    let approach = if req.validate {
        Approach::RagValidation
    } else {
        Approach::Rag
    };
    let mut opts = approach.options(&state.default_endpoint);
    opts.max_fix_rounds = state.max_fix_rounds;
    let generator = Generator {
        llm: llm.as_ref(),
        embedder: state.embedder.as_ref(),
        index: &snapshot.index,
        catalog: &snapshot.catalog,
    };
    match generator.generate(&last.content, history, &opts).await {
        Ok(r) => Json(ChatResponse {
            answer: r.answer_text.clone(),
            query: r.query.clone(),
            endpoint: r.endpoint.clone(),
            references: r.context.references(),
            validation: ValidationSummary {
                issues: r.issues_per_round(),
                rounds_used: r.rounds_used,
            },
            usage: r.usage(),
        })
        .into_response(),
        Err(e @ (GenerationError::Llm(_) | GenerationError::Embed(_))) => error(StatusCode::BAD_GATEWAY, e),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e),
    }
}

#[derive(Debug, Clone, Deserialize)]
struct FeedbackRequest {
    rating: String,
    #[serde(default)]
    conversation: Vec<ConversationMessage>,
}

async fn feedback(State(state): State<Arc<AppState>>, body: Result<Json<FeedbackRequest>, JsonRejection>) -> Response {
    let Json(req) = match body {
        Ok(b) => b,
        Err(e) => return error(StatusCode::BAD_REQUEST, e.body_text()),
    };
    let rating = match req.rating.as_str() {
        "like" => Rating::Like,
        "dislike" => Rating::Dislike,
        other => {
            return error(
                StatusCode::BAD_REQUEST,
                format!("rating must be like or dislike, not {other:?}"),
            )
        }
    };
    let now = chrono::Utc::now();
    let record = FeedbackRecord {
        timestamp: iso_timestamp(now),
        rating,
        conversation: req.conversation,
    };
    match state.feedback.store(&record, now) {
        Ok(name) => Json(json!({ "stored": name })).into_response(),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, format!("cannot store feedback: {e}")),
    }
}

async fn health(State(state): State<Arc<AppState>>) -> Response {
    match state.snapshot() {
        Some(s) => Json(json!({
            "status": "ok",
            "documents": s.index.len(),
            "classes": s.catalog.class_count(),
            "endpoints": s.catalog.endpoints().count(),
        }))
        .into_response(),
        None => (StatusCode::SERVICE_UNAVAILABLE, Json(json!({ "status": "loading" }))).into_response(),
    }
}

#[derive(Deserialize)]
struct CheckParams {
    endpoint: String,
}

async fn check(State(state): State<Arc<AppState>>, params: Result<Query<CheckParams>, QueryRejection>) -> Response {
    let Ok(Query(params)) = params else {
        return error(StatusCode::BAD_REQUEST, "missing endpoint parameter");
    };
    match url::Url::parse(&params.endpoint) {
        Ok(u) if matches!(u.scheme(), "http" | "https") && u.has_host() => {}
        _ => {
            return error(
                StatusCode::BAD_REQUEST,
                format!("not an http(s) IRI: {}", params.endpoint),
            )
        }
    }
    Json(check_endpoint_metadata(&state.client, &params.endpoint).await).into_response()
}
