use std::collections::BTreeMap;
use std::io::Read;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use sparqlgen::api::{router, AppState};
use sparqlgen::logs::{read_feedback, read_questions, FeedbackStore, QuestionLog, Rating};
use sparqlgen::setup::{llm_client, load_catalog, load_snapshot, EmbedderSpec};
use sparqlgen::stub::Stub;
use sparqlgen_core::endpoint::SparqlClient;
use sparqlgen_core::evalsuite::{load_cases, render_markdown, run_suite, PriceTable, Report, SuiteOptions};
use sparqlgen_core::generation::{Approach, Generator, LlmClient, OpenAiClient};
use sparqlgen_core::kb_index::{self, DEFAULT_DIMENSION};
use sparqlgen_core::schema_catalog::{check_endpoint_metadata, render_shex};
use sparqlgen_core::sources::{build_knowledge, SourcesConfig};
use sparqlgen_core::validator::{format_issue, validate_text};

#[derive(Parser)]
#[command(
    name = "sparqlgen",
    version,
    about = "Question to validated SPARQL over federated endpoints"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct EmbedArgs {
    /// Base URL of an OpenAI-compatible embeddings service. Without it the
    /// built-in hashing embedder is used.
    #[arg(long)]
    embed_url: Option<String>,
    #[arg(long)]
    embed_model: Option<String>,
    #[arg(long, default_value_t = DEFAULT_DIMENSION)]
    dimension: usize,
}

#[derive(clap::Args)]
struct LlmArgs {
    /// OpenAI-compatible base URL (or SPARQLGEN_LLM_URL).
    #[arg(long)]
    llm_url: Option<String>,
    /// Model name (or SPARQLGEN_LLM_MODEL).
    #[arg(long)]
    model: Option<String>,
    /// Scripted replies instead of a real model.
    #[arg(long)]
    mock_llm: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Harvest examples, schemas and descriptions into an index and a catalog.
    Index {
        #[arg(long)]
        sources: PathBuf,
        #[arg(long)]
        out_index: PathBuf,
        #[arg(long)]
        out_catalog: PathBuf,
        #[command(flatten)]
        embed: EmbedArgs,
    },
    /// Check a query against the catalog.
    Validate {
        /// Query file, `-` for stdin.
        #[arg(long)]
        query: PathBuf,
        /// Endpoint the query runs on.
        #[arg(long)]
        endpoint: String,
        #[arg(long)]
        catalog: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Run the HTTP API.
    Serve {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        catalog: PathBuf,
        #[command(flatten)]
        llm: LlmArgs,
        #[arg(long)]
        embed_url: Option<String>,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value_t = 8000)]
        port: u16,
        /// Questions go to DIR/questions.jsonl, feedback to DIR/feedback/.
        #[arg(long, default_value = "logs")]
        logs: PathBuf,
        /// Endpoint for answers that do not name one; defaults to the
        /// first endpoint of the catalog.
        #[arg(long)]
        default_endpoint: Option<String>,
    },
    /// Run evaluation cases and write a report.
    Eval {
        #[arg(long)]
        cases: PathBuf,
        #[arg(long, default_value = "norag,rag,ragval", value_delimiter = ',')]
        approaches: Vec<String>,
        #[arg(long, default_value_t = 3)]
        runs: usize,
        #[arg(long)]
        prices: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Also write the markdown table here.
        #[arg(long)]
        markdown: Option<PathBuf>,
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        catalog: PathBuf,
        #[command(flatten)]
        llm: LlmArgs,
        #[arg(long)]
        embed_url: Option<String>,
        /// Query another URL for an endpoint: `IRI=URL`, repeatable.
        #[arg(long = "endpoint-map")]
        endpoint_map: Vec<String>,
        #[arg(long, default_value_t = 4)]
        parallelism: usize,
        #[arg(long, default_value_t = sparqlgen_core::generation::DEFAULT_MAX_FIX_ROUNDS)]
        max_fix_rounds: usize,
        /// Record zero latencies so repeated runs give identical files.
        #[arg(long)]
        deterministic: bool,
    },
    /// Summarize reports, feedback files and the question log.
    Report {
        /// Report JSON files to merge.
        #[arg(long)]
        input: Vec<PathBuf>,
        #[arg(long)]
        feedback: Option<PathBuf>,
        #[arg(long)]
        questions: Option<PathBuf>,
    },
    /// Serve canned SPARQL results.
    StubEndpoint {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value_t = 8890)]
        port: u16,
    },
    /// Report which metadata an endpoint publishes.
    Check {
        #[arg(long)]
        endpoint: String,
    },
    /// Print class shapes of one endpoint.
    Shex {
        #[arg(long)]
        catalog: PathBuf,
        #[arg(long)]
        endpoint: String,
        #[arg(long)]
        class: Option<String>,
    },
}

fn read_query(path: &Path) -> Result<String> {
    if path == Path::new("-") {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s)?;
        return Ok(s);
    }
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn default_endpoint(
    explicit: Option<String>,
    catalog: &sparqlgen_core::schema_catalog::SchemaCatalog,
) -> Result<String> {
    match explicit.or_else(|| catalog.endpoints().next().map(|(e, _)| e.to_string())) {
        Some(e) => Ok(e),
        None => bail!("the catalog has no endpoints; give --default-endpoint"),
    }
}

async fn index(sources: &Path, out_index: &Path, out_catalog: &Path, embed: EmbedArgs) -> Result<()> {
    let config = SourcesConfig::load(sources)?;
    let spec = match (embed.embed_url, embed.embed_model) {
        (Some(url), Some(model)) => EmbedderSpec::Remote {
            url,
            model,
            dimension: embed.dimension,
        },
        (None, None) => EmbedderSpec::Hash(embed.dimension),
        _ => bail!("--embed-url and --embed-model go together"),
    };
    let knowledge = build_knowledge(&config, &SparqlClient::default(), spec.build().as_ref()).await?;
    kb_index::save(&knowledge.index, out_index)?;
    std::fs::write(out_catalog, knowledge.catalog.to_json())?;
    println!(
        "{} documents ({} examples, {} shapes, {} descriptions), {} classes, {} warnings",
        knowledge.index.len(),
        knowledge.index.count(kb_index::DocKind::ExampleQuery),
        knowledge.index.count(kb_index::DocKind::ClassShape),
        knowledge.index.count(kb_index::DocKind::EndpointInfo),
        knowledge.catalog.class_count(),
        knowledge.warnings.len()
    );
    Ok(())
}

fn validate(query: &Path, endpoint: &str, catalog: &Path, json: bool) -> Result<ExitCode> {
    let catalog = load_catalog(catalog)?;
    let issues = validate_text(&read_query(query)?, endpoint, &catalog)?;
    if json {
        println!("{}", serde_json::to_string_pretty(&issues)?);
    } else {
        for i in &issues {
            println!("{}", format_issue(i));
        }
    }
    Ok(if issues.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

async fn serve(
    index: PathBuf,
    catalog: PathBuf,
    llm: LlmArgs,
    embed_url: Option<String>,
    addr: SocketAddr,
    logs: PathBuf,
    default: Option<String>,
) -> Result<()> {
    let client = llm_client(llm.mock_llm.as_deref(), llm.llm_url.clone(), llm.model)?;
    let snapshot = load_snapshot(&index, &catalog)?;
    let embedder = EmbedderSpec::from_fingerprint(snapshot.index.fingerprint(), embed_url.as_deref())?.build();
    let default = default_endpoint(default, &snapshot.catalog)?;
    let mut state = AppState::new(
        embedder,
        client,
        QuestionLog::open(&logs.join("questions.jsonl"))?,
        FeedbackStore::new(&logs.join("feedback")),
        default,
    );
    if llm.mock_llm.is_none() {
        let base = llm
            .llm_url
            .or_else(|| std::env::var(sparqlgen_core::generation::ENV_LLM_URL).ok());
        if let Some(base) = base {
            state = state.with_llm_factory(Box::new(move |model| {
                let c = OpenAiClient::from_env(Some(base.clone()), Some(model.to_string()))?;
                Some(Arc::new(c) as Arc<dyn LlmClient>)
            }));
        }
    }
    state.install(snapshot);
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(Arc::new(state))).await?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
async fn eval(
    cases: PathBuf,
    approaches: Vec<String>,
    runs: usize,
    prices: Option<PathBuf>,
    out: PathBuf,
    markdown: Option<PathBuf>,
    index: PathBuf,
    catalog: PathBuf,
    llm: LlmArgs,
    embed_url: Option<String>,
    endpoint_map: Vec<String>,
    parallelism: usize,
    max_fix_rounds: usize,
    deterministic: bool,
) -> Result<()> {
    let cases = load_cases(&cases)?;
    let approaches = approaches
        .iter()
        .map(|a| Approach::parse(a).with_context(|| format!("unknown approach {a}; use norag, rag or ragval")))
        .collect::<Result<Vec<_>>>()?;
    let mut overrides = BTreeMap::new();
    for m in &endpoint_map {
        let (iri, url) = m
            .split_once('=')
            .with_context(|| format!("--endpoint-map wants IRI=URL, got {m}"))?;
        overrides.insert(iri.to_string(), url.to_string());
    }
    let prices = match prices {
        Some(p) => PriceTable::load(&p)?,
        None => PriceTable::default(),
    };
    let snapshot = load_snapshot(&index, &catalog)?;
    let embedder = EmbedderSpec::from_fingerprint(snapshot.index.fingerprint(), embed_url.as_deref())?.build();
    let llm = llm_client(llm.mock_llm.as_deref(), llm.llm_url, llm.model)?;
    let generator = Generator {
        llm: llm.as_ref(),
        embedder: embedder.as_ref(),
        index: &snapshot.index,
        catalog: &snapshot.catalog,
    };
    let opts = SuiteOptions {
        approaches,
        runs,
        parallelism,
        max_fix_rounds,
        endpoint_overrides: overrides,
        deterministic,
    };
    let report = run_suite(&cases, &generator, &SparqlClient::default(), &prices, &opts).await?;
    std::fs::write(&out, report.to_json())?;
    let table = render_markdown(&report);
    if let Some(md) = markdown {
        std::fs::write(md, &table)?;
    }
    print!("{table}");
    Ok(())
}

fn report(inputs: Vec<PathBuf>, feedback: Option<PathBuf>, questions: Option<PathBuf>) -> Result<()> {
    if !inputs.is_empty() {
        let mut reports = Vec::new();
        for p in &inputs {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            reports.push(Report::from_json(&text).with_context(|| format!("parsing {}", p.display()))?);
        }
        print!("{}", render_markdown(&Report::merge(reports)));
    }
    if let Some(dir) = feedback {
        let records = read_feedback(&dir)?;
        let likes = records.iter().filter(|(_, r)| r.rating == Rating::Like).count();
        println!(
            "\nFeedback: {} files, {} like, {} dislike",
            records.len(),
            likes,
            records.len() - likes
        );
        for (name, r) in &records {
            let question = r
                .conversation
                .iter()
                .find(|m| m.role == sparqlgen_core::generation::Role::User)
                .map(|m| m.content.as_str())
                .unwrap_or("");
            println!(
                "- {} {}: {}",
                r.rating.as_str(),
                name,
                question.lines().next().unwrap_or("")
            );
        }
    }
    if let Some(path) = questions {
        let entries = read_questions(&path)?;
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for e in &entries {
            *counts.entry(e.question.as_str()).or_default() += 1;
        }
        println!("\nQuestions: {} asked, {} distinct", entries.len(), counts.len());
        let mut top: Vec<_> = counts.into_iter().collect();
        top.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        for (q, n) in top.into_iter().take(20) {
            println!("- {n} × {q}");
        }
    }
    Ok(())
}

async fn stub_endpoint(config: &Path, addr: SocketAddr) -> Result<()> {
    let stub = Stub::load(config)?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    let local = listener.local_addr()?;
    for name in stub.names() {
        println!("http://{local}/{name}/sparql");
    }
    axum::serve(listener, stub.router()).await?;
    Ok(())
}

fn shex(catalog: &Path, endpoint: &str, class: Option<&str>) -> Result<()> {
    let catalog = load_catalog(catalog)?;
    let schema = catalog
        .endpoint(endpoint)
        .with_context(|| format!("endpoint {endpoint} is not in the catalog"))?;
    let mut found = false;
    for shape in schema.classes.values() {
        if class.is_none_or(|c| c == shape.class_iri || c == catalog.compact(&shape.class_iri)) {
            println!("{}\n", render_shex(shape, catalog.prefixes()));
            found = true;
        }
    }
    if !found {
        bail!("no matching class");
    }
    Ok(())
}

fn addr(host: &str, port: u16) -> Result<SocketAddr> {
    format!("{host}:{port}")
        .parse()
        .with_context(|| format!("bad listen address {host}:{port}"))
}

async fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Index {
            sources,
            out_index,
            out_catalog,
            embed,
        } => index(&sources, &out_index, &out_catalog, embed).await?,
        Command::Validate {
            query,
            endpoint,
            catalog,
            json,
        } => return validate(&query, &endpoint, &catalog, json),
        Command::Serve {
            index,
            catalog,
            llm,
            embed_url,
            host,
            port,
            logs,
            default_endpoint,
        } => {
            serve(
                index,
                catalog,
                llm,
                embed_url,
                addr(&host, port)?,
                logs,
                default_endpoint,
            )
            .await?
        }
        Command::Eval {
            cases,
            approaches,
            runs,
            prices,
            out,
            markdown,
            index,
            catalog,
            llm,
            embed_url,
            endpoint_map,
            parallelism,
            max_fix_rounds,
            deterministic,
        } => {
            eval(
                cases,
                approaches,
                runs,
                prices,
                out,
                markdown,
                index,
                catalog,
                llm,
                embed_url,
                endpoint_map,
                parallelism,
                max_fix_rounds,
                deterministic,
            )
            .await?
        }
        Command::Report {
            input,
            feedback,
            questions,
        } => report(input, feedback, questions)?,
        Command::StubEndpoint { config, host, port } => stub_endpoint(&config, addr(&host, port)?).await?,
        Command::Check { endpoint } => {
            let report = check_endpoint_metadata(&SparqlClient::default(), &endpoint).await;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Shex {
            catalog,
            endpoint,
            class,
        } => shex(&catalog, &endpoint, class.as_deref())?,
    }
    Ok(ExitCode::SUCCESS)
}

#[tokio::main]
async fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()).await {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
