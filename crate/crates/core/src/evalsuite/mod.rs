//! Evaluation runs: question/reference-query cases through the generation
//! approaches, with both queries executed and the outcomes compared.

mod report;
mod results;

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::time::Instant;

use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::endpoint::{EndpointError, SparqlClient};
use crate::generation::{Approach, Generator, TokenUsage};
use crate::scalar::Scalar;
use crate::sparql_ast::parse;

pub use report::{render_markdown, Report, ReportRow, TABLE_HEADER};
pub use results::{categorize, execute_select, row_f1, Category, Cell, ResultSet, Row};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{path}: {reason}")]
    Config { path: PathBuf, reason: String },
    #[error("invalid case {id}: {reason}")]
    InvalidCase { id: String, reason: String },
    #[error("reference query of case {id} failed: {source}")]
    Reference {
        id: String,
        #[source]
        source: EndpointError,
    },
}

/// A question with the query that answers it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalCase {
    pub id: String,
    pub question: String,
    pub reference_query: String,
    pub endpoint: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CaseFile {
    #[serde(rename = "case", default)]
    cases: Vec<EvalCase>,
}

fn config_err(path: &Path, reason: impl ToString) -> EvalError {
    EvalError::Config {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    }
}

/// Check ids are unique, questions non-empty and reference queries parse.
pub fn check_cases(cases: &[EvalCase]) -> Result<(), EvalError> {
    let mut seen = BTreeSet::new();
    for c in cases {
        let invalid = |reason: String| EvalError::InvalidCase {
            id: c.id.clone(),
            reason,
        };
        if !seen.insert(c.id.as_str()) {
            return Err(invalid("duplicate id".into()));
        }
        if c.question.trim().is_empty() {
            return Err(invalid("empty question".into()));
        }
        if c.endpoint.trim().is_empty() {
            return Err(invalid("empty endpoint".into()));
        }
        parse(&c.reference_query).map_err(|e| invalid(format!("reference query: {e}")))?;
    }
    Ok(())
}

/// Read a TOML case file (`[[case]]` tables).
pub fn load_cases(path: &Path) -> Result<Vec<EvalCase>, EvalError> {
    let text = std::fs::read_to_string(path).map_err(|e| config_err(path, e))?;
    let file: CaseFile = toml::from_str(&text).map_err(|e| config_err(path, e))?;
    check_cases(&file.cases)?;
    Ok(file.cases)
}

/// USD per million tokens.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelPrice {
    pub prompt_per_million: f64,
    pub completion_per_million: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriceTable {
    #[serde(default)]
    pub models: BTreeMap<String, ModelPrice>,
}

impl PriceTable {
    pub fn load(path: &Path) -> Result<Self, EvalError> {
        let text = std::fs::read_to_string(path).map_err(|e| config_err(path, e))?;
        let table: PriceTable = toml::from_str(&text).map_err(|e| config_err(path, e))?;
        for (model, p) in &table.models {
            let ok = |v: f64| v.is_finite() && v >= 0.0;
            if !ok(p.prompt_per_million) || !ok(p.completion_per_million) {
                return Err(config_err(path, format!("negative or non-finite price for {model}")));
            }
        }
        Ok(table)
    }

    /// Cost of one request; models missing from the table cost nothing.
    pub fn price(&self, model: &str, usage: TokenUsage) -> f64 {
        match self.models.get(model) {
            Some(p) => {
                (usage.prompt as f64 * p.prompt_per_million + usage.completion as f64 * p.completion_per_million) / 1e6
            }
            None => 0.0,
        }
    }
}

/// What happened to one (case, approach, run).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub case_id: String,
    pub model: String,
    pub approach: Approach,
    /// 1-based.
    pub run: usize,
    pub category: Category,
    pub query: Option<String>,
    pub endpoint: Option<String>,
    pub rounds_used: usize,
    pub latency_ms: u64,
    pub tokens: TokenUsage,
    pub price: f64,
    pub f1: f64,
    pub rows: Option<usize>,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct SuiteOptions {
    pub approaches: Vec<Approach>,
    pub runs: usize,
    pub parallelism: usize,
    pub max_fix_rounds: usize,
    /// Endpoint IRI to the URL actually queried (stub servers, mirrors).
    pub endpoint_overrides: BTreeMap<String, String>,
    /// Record zero latencies so reports are byte-stable.
    pub deterministic: bool,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions {
            approaches: vec![Approach::NoRag, Approach::Rag, Approach::RagValidation],
            runs: 3,
            parallelism: 4,
            max_fix_rounds: crate::generation::DEFAULT_MAX_FIX_ROUNDS,
            endpoint_overrides: BTreeMap::new(),
            deterministic: false,
        }
    }
}

impl SuiteOptions {
    fn resolve<'a>(&'a self, endpoint: &'a str) -> &'a str {
        self.endpoint_overrides
            .get(endpoint)
            .map(String::as_str)
            .unwrap_or(endpoint)
    }
}

#[allow(clippy::too_many_arguments)]
async fn run_one<S: Scalar>(
    case: &EvalCase,
    approach: Approach,
    run: usize,
    reference: &ResultSet,
    generator: &Generator<'_, S>,
    client: &SparqlClient,
    prices: &PriceTable,
    opts: &SuiteOptions,
) -> RunOutcome {
    let model = generator.llm.model().to_string();
    let started = Instant::now();
    let mut outcome = RunOutcome {
        case_id: case.id.clone(),
        model: model.clone(),
        approach,
        run,
        category: Category::Error,
        query: None,
        endpoint: None,
        rounds_used: 0,
        latency_ms: 0,
        tokens: TokenUsage::default(),
        price: 0.0,
        f1: 0.0,
        rows: None,
        error: None,
    };
    let mut gen_opts = approach.options(&case.endpoint);
    gen_opts.max_fix_rounds = opts.max_fix_rounds;
    let executed: Result<ResultSet, String> = match generator.generate(&case.question, &[], &gen_opts).await {
        Err(e) => Err(format!("generation failed: {e}")),
        Ok(g) => {
            outcome.tokens = g.usage();
            outcome.price = prices.price(&model, outcome.tokens);
            outcome.rounds_used = g.rounds_used;
            outcome.endpoint = Some(g.endpoint.clone());
            outcome.query = g.query.clone();
            match g.query.as_deref() {
                None => Err("no SPARQL query in the answer".into()),
                Some(q) => match parse(q) {
                    Err(e) => Err(format!("query does not parse: {e}")),
                    Ok(_) => execute_select(client, opts.resolve(&g.endpoint), q)
                        .await
                        .map_err(|e| e.to_string()),
                },
            }
        }
    };
    let (category, f1) = categorize(executed.as_ref(), reference);
    outcome.category = category;
    outcome.f1 = f1;
    match executed {
        Ok(rs) => outcome.rows = Some(rs.len()),
        Err(e) => outcome.error = Some(e),
    }
    if !opts.deterministic {
        outcome.latency_ms = started.elapsed().as_millis() as u64;
    }
    outcome
}

/// Run every case `opts.runs` times under each approach. Reference queries
/// run once each; a failing reference stops the suite.
pub async fn run_suite<S: Scalar>(
    cases: &[EvalCase],
    generator: &Generator<'_, S>,
    client: &SparqlClient,
    prices: &PriceTable,
    opts: &SuiteOptions,
) -> Result<Report, EvalError> {
    check_cases(cases)?;
    let mut references = Vec::with_capacity(cases.len());
    for c in cases {
        let rs = execute_select(client, opts.resolve(&c.endpoint), &c.reference_query)
            .await
            .map_err(|source| EvalError::Reference {
                id: c.id.clone(),
                source,
            })?;
        references.push(rs);
    }
    let jobs: Vec<(usize, Approach, usize)> = cases
        .iter()
        .enumerate()
        .flat_map(|(i, _)| {
            opts.approaches
                .iter()
                .flat_map(move |&a| (1..=opts.runs).map(move |r| (i, a, r)))
        })
        .collect();
    let references = &references;
    let mut outcomes: Vec<((usize, Approach, usize), RunOutcome)> = stream::iter(jobs)
        .map(|(i, a, r)| async move {
            let o = run_one(&cases[i], a, r, &references[i], generator, client, prices, opts).await;
            ((i, a, r), o)
        })
        .buffer_unordered(opts.parallelism.max(1))
        .collect()
        .await;
    outcomes.sort_by_key(|(key, _)| *key);
    Ok(Report::from_outcomes(outcomes.into_iter().map(|(_, o)| o).collect()))
}
