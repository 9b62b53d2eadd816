mod common;

use std::sync::Arc;

use common::*;
use serde_json::{json, Value};
use sparqlgen::api::ChatResponse;
use sparqlgen::logs::{read_feedback, read_questions, FeedbackRecord};
use sparqlgen_core::generation::{retrieve_context, RetrievalConfig};
use sparqlgen_core::kb_index::{DocKind, HashEmbedder};

fn user(q: &str) -> Value {
    json!({"role": "user", "content": q})
}

async fn post(url: &str, body: Value) -> (u16, Value) {
    let resp = reqwest::Client::new().post(url).json(&body).send().await.unwrap();
    let status = resp.status().as_u16();
    (status, resp.json().await.unwrap_or(Value::Null))
}

async fn get(url: &str) -> (u16, Value) {
    let resp = reqwest::get(url).await.unwrap();
    let status = resp.status().as_u16();
    (status, resp.json().await.unwrap_or(Value::Null))
}

#[tokio::test]
async fn health_flips_when_the_snapshot_lands() {
    let app = App::start(Arc::new(mock("llm/correction.json")), false).await;
    let (status, body) = get(&app.url("/health")).await;
    assert_eq!(status, 503);
    assert_eq!(body["status"], "loading");
    let (status, _) = post(&app.url("/chat"), json!({"messages": [user("Select all taxa")]})).await;
    assert_eq!(status, 503);

    app.state.install(snapshot().await);
    let (status, body) = get(&app.url("/health")).await;
    assert_eq!(status, 200);
    // 25 examples, 20 + 4 class shapes, 2 endpoint descriptions.
    assert_eq!(body["documents"], 51);
    assert_eq!(body["classes"], 24);
    assert_eq!(body["endpoints"], 2);
}

#[tokio::test]
async fn bad_chat_requests_are_400() {
    let app = App::start(Arc::new(mock("llm/correction.json")), true).await;
    let url = app.url("/chat");
    assert_eq!(post(&url, json!({"messages": []})).await.0, 400);
    assert_eq!(
        post(&url, json!({"messages": [{"role": "assistant", "content": "hi"}]}))
            .await
            .0,
        400
    );
    assert_eq!(post(&url, json!({"messages": [user("   ")]})).await.0, 400);
    assert_eq!(
        post(&url, json!({"messages": [{"role": "robot", "content": "x"}]}))
            .await
            .0,
        400
    );
    assert_eq!(post(&url, json!({"question": "x"})).await.0, 400);
    assert_eq!(
        post(&url, json!({"messages": [user("x")], "model": "other"})).await.0,
        400
    );
    let resp = reqwest::Client::new().post(&url).body("not json").send().await.unwrap();
    assert_eq!(resp.status().as_u16(), 400);
    // Rejected requests are not questions.
    assert!(read_questions(&app.questions_path()).unwrap().is_empty());
}

#[tokio::test]
async fn wrong_then_fixed_over_http() {
    let app = App::start(Arc::new(mock("llm/correction.json")), true).await;
    let (status, body) = post(
        &app.url("/chat"),
        json!({"messages": [user("What are the names of all diseases?")]}),
    )
    .await;
    assert_eq!(status, 200, "{body}");
    let r: ChatResponse = serde_json::from_value(body).unwrap();
    assert_eq!(r.validation.rounds_used, 2);
    assert!(r.validation.issues[0][0].contains("does not support the predicate"));
    assert!(r.validation.issues[1].is_empty());
    assert!(r.query.unwrap().contains("skos:prefLabel"));
    assert!(!r.references.is_empty());
    assert!(r.usage.prompt > 0);

    let (_, body) = post(
        &app.url("/chat"),
        json!({"messages": [user("What are the names of all diseases?")], "validate": false}),
    )
    .await;
    let r: ChatResponse = serde_json::from_value(body).unwrap();
    assert_eq!(r.validation.rounds_used, 1);
    assert_eq!(r.validation.issues, vec![Vec::<String>::new()]);
    assert!(r.query.unwrap().contains("rdfs:label"));
}

#[tokio::test]
async fn llm_failure_is_502_and_still_logged() {
    let app = App::start(Arc::new(mock("llm/correction.json")), true).await;
    let (status, body) = post(&app.url("/chat"), json!({"messages": [user("Use the broken service")]})).await;
    assert_eq!(status, 502);
    assert!(body["error"].as_str().unwrap().contains("model overloaded"));
    let log = read_questions(&app.questions_path()).unwrap();
    assert_eq!(log.len(), 1);
    assert_eq!(log[0].question, "Use the broken service");
}

#[tokio::test]
async fn references_are_the_prompt_documents() {
    let app = App::start(Arc::new(mock("llm/echo.json")), true).await;
    let question = "Which human proteins are associated with Alzheimer disease?";
    let (status, body) = post(
        &app.url("/chat"),
        json!({"messages": [user(question)], "validate": false}),
    )
    .await;
    assert_eq!(status, 200);
    let r: ChatResponse = serde_json::from_value(body).unwrap();

    // Retrieval done independently of the service.
    let snap = snapshot().await;
    let ctx = retrieve_context(
        question,
        &snap.index,
        &HashEmbedder::new(DIM),
        &RetrievalConfig::default(),
    )
    .await
    .unwrap();
    assert_eq!(r.references, ctx.references());

    let examples: Vec<_> = r
        .references
        .iter()
        .filter(|x| x.kind == DocKind::ExampleQuery)
        .collect();
    let shapes: Vec<_> = r.references.iter().filter(|x| x.kind == DocKind::ClassShape).collect();
    assert_eq!(examples.len(), 20);
    assert_eq!(shapes.len(), 15);
    // The echoed prompt holds every reference and no other example or shape.
    for x in &r.references {
        assert!(r.answer.contains(&x.payload), "{}", x.text);
    }
    assert_eq!(r.answer.matches("```sparql\n").count(), examples.len());
    assert_eq!(r.answer.matches(" {\n  a [ ").count(), shapes.len());
    for w in r.references.windows(2).filter(|w| w[0].kind == w[1].kind) {
        assert!(w[0].score >= w[1].score);
    }
}

#[tokio::test]
async fn history_reaches_the_model() {
    let app = App::start(Arc::new(mock("llm/echo.json")), true).await;
    let messages = json!([
        user("first question about taxa"),
        {"role": "assistant", "content": "first answer with a query"},
        user("and now for rats?")
    ]);
    let (status, body) = post(&app.url("/chat"), json!({"messages": messages, "validate": false})).await;
    assert_eq!(status, 200);
    let answer = body["answer"].as_str().unwrap();
    let a = answer.find("first question about taxa").unwrap();
    let b = answer.find("first answer with a query").unwrap();
    let c = answer.find("Question:\nand now for rats?").unwrap();
    assert!(a < b && b < c);
}

#[tokio::test]
async fn feedback_round_trips() {
    let app = App::start(Arc::new(mock("llm/correction.json")), true).await;
    let conversation = json!([
        user("What are the names of all diseases?"),
        {
            "role": "assistant",
            "content": "```sparql\nSELECT ?d WHERE { ?d a <http://purl.uniprot.org/core/Disease> }\n```",
            "query": "SELECT ?d WHERE { ?d a <http://purl.uniprot.org/core/Disease> }",
            "references": [{"kind": "example_query", "text": "q", "payload": "SELECT * WHERE {}", "score": 0.8123456789012345}]
        },
        user("thanks")
    ]);
    let (status, body) = post(
        &app.url("/feedback"),
        json!({"rating": "like", "conversation": conversation}),
    )
    .await;
    assert_eq!(status, 200);
    let name = body["stored"].as_str().unwrap().to_string();
    assert!(name.ends_with("-like.json"));
    let path = app.feedback_dir().join(&name);
    let record: FeedbackRecord = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(record.conversation.len(), 3);
    assert_eq!(serde_json::to_value(&record.conversation).unwrap(), conversation);
    let again = serde_json::to_string_pretty(&record).unwrap() + "\n";
    assert_eq!(again, std::fs::read_to_string(&path).unwrap());

    assert_eq!(
        post(&app.url("/feedback"), json!({"rating": "meh", "conversation": []}))
            .await
            .0,
        400
    );

    let url = app.url("/feedback");
    let (a, b) = tokio::join!(
        post(&url, json!({"rating": "dislike", "conversation": []})),
        post(&url, json!({"rating": "dislike", "conversation": []}))
    );
    assert_ne!(a.1["stored"], b.1["stored"]);
    let stored = read_feedback(&app.feedback_dir()).unwrap();
    assert_eq!(stored.len(), 3);
    // No temp files left behind.
    assert_eq!(std::fs::read_dir(app.feedback_dir()).unwrap().count(), 3);
}

#[tokio::test]
async fn concurrent_questions_keep_whole_lines() {
    let app = App::start(Arc::new(mock("llm/correction.json")), true).await;
    let url = app.url("/chat");
    let mut tasks = Vec::new();
    for i in 0..24 {
        let url = url.clone();
        tasks.push(tokio::spawn(async move {
            let q = format!(
                "Select all taxa from the UniProt taxonomy, request {i} {}",
                "padding ".repeat(200)
            );
            post(&url, json!({"messages": [user(&q)]})).await.0
        }));
    }
    for t in tasks {
        assert_eq!(t.await.unwrap(), 200);
    }
    let text = std::fs::read_to_string(app.questions_path()).unwrap();
    assert_eq!(text.lines().count(), 24);
    let mut seen: Vec<usize> = text
        .lines()
        .map(|l| {
            let v: Value = serde_json::from_str(l).unwrap();
            let q = v["question"].as_str().unwrap();
            q.split("request ")
                .nth(1)
                .unwrap()
                .split(' ')
                .next()
                .unwrap()
                .parse()
                .unwrap()
        })
        .collect();
    seen.sort();
    assert_eq!(seen, (0..24).collect::<Vec<_>>());
}

#[tokio::test]
async fn check_endpoint() {
    let app = App::start(Arc::new(mock("llm/correction.json")), true).await;
    let stub = StubServer::start(&fixture("eval/stub.toml")).await;
    let (status, body) = get(&format!("{}?endpoint={}", app.url("/check"), stub.url("uniprot"))).await;
    assert_eq!(status, 200);
    assert_eq!(body["has_examples"]["count"], 25);
    assert_eq!(body["has_void"]["present"], true);
    assert_eq!(get(&app.url("/check?endpoint=not%20an%20iri")).await.0, 400);
    assert_eq!(get(&app.url("/check")).await.0, 400);
}
