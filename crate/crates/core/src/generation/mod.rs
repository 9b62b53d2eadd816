//! Question to validated SPARQL: retrieval, prompting, extraction and the
//! correction loop.

mod extract;
mod llm;
mod prompt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kb_index::{DocKind, EmbedError, Embedder, IndexError, VectorIndex};
use crate::scalar::Scalar;
use crate::schema_catalog::SchemaCatalog;
use crate::sparql_ast::{expand_prefixes, parse};
use crate::validator::{format_issue, validate, ValidationIssue};

pub use extract::{extract_sparql, target_endpoint};
pub use llm::{
    Completion, LlmClient, LlmError, MockLlm, MockReply, MockRule, OpenAiClient, RetryPolicy, TokenUsage,
    ENV_LLM_API_KEY, ENV_LLM_MODEL, ENV_LLM_URL,
};
pub use prompt::{
    build_bare_prompt, build_prompt, fill, fix_message, ChatMessage, Role, BARE_TEMPLATE, FIX_TEMPLATE,
    GENERATE_TEMPLATE, NONE_MARKER, SYSTEM_TEMPLATE,
};

pub const DEFAULT_MAX_FIX_ROUNDS: usize = 2;

#[derive(Debug, Error)]
pub enum GenerationError {
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Index(#[from] IndexError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetrievalConfig {
    pub k_questions: usize,
    pub k_classes: usize,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        RetrievalConfig {
            k_questions: 20,
            k_classes: 15,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievedExample {
    pub id: String,
    pub question: String,
    pub query: String,
    pub endpoint: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievedShape {
    pub id: String,
    pub class_iri: String,
    pub label: String,
    pub shex: String,
    pub endpoint: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievedInfo {
    pub id: String,
    pub text: String,
    pub endpoint: String,
    pub score: f64,
}

/// A retrieved document as shown to users next to the answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub kind: DocKind,
    pub text: String,
    pub payload: String,
    pub score: f64,
}

/// Everything retrieved for one question, best match first in each list.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PromptContext {
    pub examples: Vec<RetrievedExample>,
    pub shapes: Vec<RetrievedShape>,
    pub endpoint_info: Option<RetrievedInfo>,
}

impl PromptContext {
    /// Endpoint description, then examples, then shapes.
    pub fn references(&self) -> Vec<Reference> {
        let info = self.endpoint_info.iter().map(|i| Reference {
            kind: DocKind::EndpointInfo,
            text: i.endpoint.clone(),
            payload: i.text.clone(),
            score: i.score,
        });
        let examples = self.examples.iter().map(|e| Reference {
            kind: DocKind::ExampleQuery,
            text: e.question.clone(),
            payload: e.query.clone(),
            score: e.score,
        });
        let shapes = self.shapes.iter().map(|s| Reference {
            kind: DocKind::ClassShape,
            text: s.label.clone(),
            payload: s.shex.clone(),
            score: s.score,
        });
        info.chain(examples).chain(shapes).collect()
    }
}

/// Embed the question and take the top examples and shapes plus the best
/// endpoint description. No similarity threshold.
pub async fn retrieve_context<S: Scalar>(
    question: &str,
    index: &VectorIndex<S>,
    embedder: &dyn Embedder<S>,
    cfg: &RetrievalConfig,
) -> Result<PromptContext, GenerationError> {
    let fingerprint = embedder.fingerprint();
    if fingerprint != index.fingerprint() {
        return Err(IndexError::ProviderMismatch {
            expected: fingerprint,
            found: index.fingerprint().to_string(),
        }
        .into());
    }
    let q = embedder.embed_one(question).await?;
    let score = |s: S| s.to_f64().unwrap_or(0.0);
    let examples = index
        .search(&q, cfg.k_questions.max(1), Some(DocKind::ExampleQuery))?
        .into_iter()
        .map(|h| RetrievedExample {
            id: h.doc.id.clone(),
            question: h.doc.embed_text.clone(),
            query: h.doc.payload.clone(),
            endpoint: h.doc.endpoint.clone(),
            score: score(h.score),
        })
        .collect();
    let shapes = index
        .search(&q, cfg.k_classes.max(1), Some(DocKind::ClassShape))?
        .into_iter()
        .map(|h| RetrievedShape {
            id: h.doc.id.clone(),
            class_iri: h.doc.source_iri.clone().unwrap_or_default(),
            label: h.doc.embed_text.lines().next().unwrap_or_default().to_string(),
            shex: h.doc.payload.clone(),
            endpoint: h.doc.endpoint.clone(),
            score: score(h.score),
        })
        .collect();
    let endpoint_info = index
        .search(&q, 1, Some(DocKind::EndpointInfo))?
        .into_iter()
        .next()
        .map(|h| RetrievedInfo {
            id: h.doc.id.clone(),
            text: h.doc.payload.clone(),
            endpoint: h.doc.endpoint.clone(),
            score: score(h.score),
        });
    Ok(PromptContext {
        examples,
        shapes,
        endpoint_info,
    })
}

/// The three configurations compared in evaluations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Approach {
    /// The bare question, no retrieval, no validation.
    NoRag,
    /// Retrieved context, first answer kept.
    Rag,
    /// Retrieved context and the correction loop.
    RagValidation,
}

impl Approach {
    pub fn label(self) -> &'static str {
        match self {
            Approach::NoRag => "No RAG",
            Approach::Rag => "RAG without validation",
            Approach::RagValidation => "RAG with validation",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "norag" | "no-rag" => Some(Approach::NoRag),
            "rag" => Some(Approach::Rag),
            "ragval" | "rag-validation" | "ragvalidation" => Some(Approach::RagValidation),
            _ => None,
        }
    }

    pub fn options(self, default_endpoint: &str) -> GenerateOptions {
        GenerateOptions {
            retrieval: (self != Approach::NoRag).then(RetrievalConfig::default),
            validate: self == Approach::RagValidation,
            max_fix_rounds: DEFAULT_MAX_FIX_ROUNDS,
            default_endpoint: default_endpoint.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenerateOptions {
    /// `None` skips retrieval and uses the bare prompt.
    pub retrieval: Option<RetrievalConfig>,
    pub validate: bool,
    pub max_fix_rounds: usize,
    /// Where a query without an `#+ endpoint:` comment is run.
    pub default_endpoint: String,
}

/// One model call and what the validator made of its answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Round {
    pub answer: String,
    pub query: Option<String>,
    pub endpoint: String,
    pub issues: Vec<ValidationIssue>,
    /// Missing or unparsable query.
    pub problems: Vec<String>,
    pub usage: TokenUsage,
}

impl Round {
    pub fn messages(&self) -> Vec<String> {
        self.problems
            .iter()
            .cloned()
            .chain(self.issues.iter().map(format_issue))
            .collect()
    }

    fn passed(&self) -> bool {
        self.issues.is_empty() && self.problems.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationResult {
    pub answer_text: String,
    pub query: Option<String>,
    /// Endpoint the final query targets.
    pub endpoint: String,
    pub rounds: Vec<Round>,
    pub rounds_used: usize,
    pub validated: bool,
    pub context: PromptContext,
}

impl GenerationResult {
    /// Validation messages of every round; a single empty list when
    /// validation was off.
    pub fn issues_per_round(&self) -> Vec<Vec<String>> {
        if !self.validated {
            return vec![Vec::new()];
        }
        self.rounds.iter().map(Round::messages).collect()
    }

    pub fn final_issues(&self) -> &[ValidationIssue] {
        if !self.validated {
            return &[];
        }
        self.rounds.last().map(|r| r.issues.as_slice()).unwrap_or(&[])
    }

    pub fn usage(&self) -> TokenUsage {
        self.rounds.iter().map(|r| r.usage).sum()
    }
}

/// Shared, read-only inputs of a generation.
pub struct Generator<'a, S> {
    pub llm: &'a dyn LlmClient,
    pub embedder: &'a dyn Embedder<S>,
    pub index: &'a VectorIndex<S>,
    pub catalog: &'a SchemaCatalog,
}

fn check_answer(answer: String, usage: TokenUsage, catalog: &SchemaCatalog, opts: &GenerateOptions) -> Round {
    let query = extract_sparql(&answer);
    let endpoint = query
        .as_deref()
        .and_then(target_endpoint)
        .unwrap_or_else(|| opts.default_endpoint.clone());
    let mut round = Round {
        answer,
        query,
        endpoint,
        issues: Vec::new(),
        problems: Vec::new(),
        usage,
    };
    if !opts.validate {
        return round;
    }
    match round.query.as_deref() {
        None => round
            .problems
            .push("No SPARQL query was found in the answer; give it in a ```sparql code block.".into()),
        Some(text) => match parse(text).and_then(|q| expand_prefixes(&q)) {
            Ok(q) => round.issues = validate(&q, &round.endpoint, catalog),
            Err(e) => round.problems.push(format!("The query is not valid SPARQL: {e}")),
        },
    }
    round
}

impl<S: Scalar> Generator<'_, S> {
    /// Answer `question`. `history` holds earlier turns of the conversation
    /// (without system messages) and is placed between the system message
    /// and the new prompt.
    pub async fn generate(
        &self,
        question: &str,
        history: &[ChatMessage],
        opts: &GenerateOptions,
    ) -> Result<GenerationResult, GenerationError> {
        let context = match &opts.retrieval {
            Some(cfg) => retrieve_context(question, self.index, self.embedder, cfg).await?,
            None => PromptContext::default(),
        };
        let prompt = match opts.retrieval {
            Some(_) => build_prompt(question, &context),
            None => build_bare_prompt(question),
        };
        let mut messages = Vec::with_capacity(prompt.len() + history.len() + 2);
        let mut prompt = prompt.into_iter();
        messages.extend(prompt.next());
        messages.extend(history.iter().filter(|m| m.role != Role::System).cloned());
        messages.extend(prompt);

        let mut rounds = Vec::new();
        loop {
            let completion = self.llm.complete(&messages).await?;
            let round = check_answer(completion.content, completion.usage, self.catalog, opts);
            let done = !opts.validate || round.passed() || rounds.len() >= opts.max_fix_rounds;
            if !done {
                messages.push(ChatMessage::assistant(round.answer.clone()));
                messages.push(fix_message(&round.issues, &round.problems));
            }
            rounds.push(round);
            if done {
                break;
            }
        }
        let last = rounds.last().expect("at least one round");
        Ok(GenerationResult {
            answer_text: last.answer.clone(),
            query: last.query.clone(),
            endpoint: last.endpoint.clone(),
            rounds_used: rounds.len(),
            validated: opts.validate,
            rounds,
            context,
        })
    }
}
