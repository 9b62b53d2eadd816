use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use sha2::{Digest, Sha256};
use sparqlgen_core::endpoint::{ResultsSource, SparqlClient};
use sparqlgen_core::kb_index::{
    endpoint_info_from_html, harvest_examples, load, save, DocKind, Embedder, Embedding, HashEmbedder, IndexError,
    VectorIndex,
};
use sparqlgen_core::sources::{build_knowledge, SourcesConfig};

mod support;
use support::*;

const UNIPROT: &str = "https://sparql.uniprot.org/sparql";

fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(rel)
}

async fn examples(rel: &str) -> sparqlgen_core::kb_index::ExampleHarvest {
    harvest_examples(&SparqlClient::default(), &ResultsSource::File(fixture(rel)), UNIPROT)
        .await
        .unwrap()
}

#[tokio::test]
async fn two_examples_two_docs() {
    let h = examples("examples/two.srj").await;
    assert_eq!(h.docs.len(), 2);
    assert_eq!(h.skipped, 0);
    assert!(h.docs.iter().all(|d| d.kind == DocKind::ExampleQuery));
    assert_eq!(h.docs[0].embed_text, "Select all taxa from the UniProt taxonomy");
    assert!(h.docs[0].payload.contains("?taxon a up:Taxon ."));
}

#[tokio::test]
async fn example_without_comment_is_skipped() {
    let h = examples("examples/missing_comment.srj").await;
    assert_eq!(h.docs.len(), 1);
    assert_eq!(h.skipped, 1);
}

#[tokio::test]
async fn no_examples_is_empty() {
    let h = examples("examples/none.srj").await;
    assert!(h.docs.is_empty());
}

/// Ids recomputed by hashing endpoint, kind and example IRI directly.
#[tokio::test]
async fn twenty_five_examples_have_distinct_hash_ids() {
    let h = examples("examples/uniprot.srj").await;
    assert_eq!(h.docs.len(), 25);
    let ids: BTreeSet<&str> = h.docs.iter().map(|d| d.id.as_str()).collect();
    assert_eq!(ids.len(), 25);
    for doc in &h.docs {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(UNIPROT.as_bytes());
        bytes.push(0);
        bytes.extend_from_slice(b"example_query");
        bytes.push(0);
        bytes.extend_from_slice(doc.source_iri.as_deref().unwrap().as_bytes());
        let digest = Sha256::digest(&bytes);
        let expected: String = digest[..16].iter().map(|b| format!("{b:02x}")).collect();
        assert_eq!(doc.id, expected);
    }
}

#[test]
fn homepage_fixtures() {
    let html = std::fs::read_to_string(fixture("homepage/uniprot.html")).unwrap();
    let doc = endpoint_info_from_html(&html, UNIPROT).unwrap();
    assert_eq!(doc.kind, DocKind::EndpointInfo);
    assert!(doc.embed_text.starts_with("UniProt\nThe UniProt knowledgebase"));
    assert!(!doc.embed_text.contains("Consortium"));
    assert!(doc.payload.contains(UNIPROT));

    let oma = std::fs::read_to_string(fixture("homepage/oma.html")).unwrap();
    let doc = endpoint_info_from_html(&oma, "https://sparql.omabrowser.org/sparql").unwrap();
    assert!(doc.embed_text.starts_with("OMA Orthology database\n"));

    let plain = std::fs::read_to_string(fixture("homepage/plain.html")).unwrap();
    assert!(endpoint_info_from_html(&plain, UNIPROT).is_none());
}

fn random_text(rng: &mut StdRng) -> String {
    let words = rng.random_range(0..12);
    (0..words)
        .map(|_| {
            let len = rng.random_range(1..10);
            (0..len)
                .map(|_| rng.random_range(b'a'..=b'z') as char)
                .collect::<String>()
        })
        .collect::<Vec<_>>()
        .join(if rng.random_bool(0.5) { " " } else { "-" })
}

#[tokio::test]
async fn hash_embeddings_are_unit_vectors() {
    let mut rng = StdRng::seed_from_u64(7);
    let texts: Vec<String> = (0..100).map(|_| random_text(&mut rng)).collect();
    let e = HashEmbedder::new(256);
    let v32: Vec<Embedding<f32>> = e.embed(&texts).await.unwrap();
    let v64: Vec<Embedding<f64>> = e.embed(&texts).await.unwrap();
    for (a, b) in v32.iter().zip(&v64) {
        let n32: f64 = a
            .as_slice()
            .iter()
            .map(|&x| (x as f64) * (x as f64))
            .sum::<f64>()
            .sqrt();
        let n64: f64 = b.as_slice().iter().map(|&x| x * x).sum::<f64>().sqrt();
        assert!((n32 - 1.0).abs() <= 1e-6, "{n32}");
        assert!((n64 - 1.0).abs() <= 1e-6, "{n64}");
    }
    let empty: Embedding<f64> = e.embed_one("").await.unwrap();
    assert_eq!(empty.as_slice()[0], 1.0);
}

#[test]
fn search_equals_exhaustive_oracle() {
    let mut rng = StdRng::seed_from_u64(42);
    let (index, raw) = random_index(&mut rng, 1000, 256);
    for _ in 0..100 {
        let q = Embedding::normalized(random_unit(&mut rng, 256));
        for k in [1, 15, 20] {
            for kind in [None, Some(DocKind::ExampleQuery)] {
                let got: Vec<String> = index
                    .search(&q, k, kind)
                    .unwrap()
                    .iter()
                    .map(|h| h.doc.id.clone())
                    .collect();
                assert_eq!(got, search_oracle(&raw, q.as_slice(), k, kind));
            }
        }
    }
}

#[test]
fn scores_are_bounded_and_sorted() {
    let mut rng = StdRng::seed_from_u64(3);
    let (index, _) = random_index(&mut rng, 200, 16);
    let q = Embedding::normalized(random_unit(&mut rng, 16));
    let hits = index.search(&q, 500, None).unwrap();
    assert_eq!(hits.len(), 200);
    for w in hits.windows(2) {
        assert!(w[0].score >= w[1].score);
    }
    assert!(hits.iter().all(|h| (-1.0 - 1e-9..=1.0 + 1e-9).contains(&h.score)));
}

#[test]
fn own_vector_ranks_first() {
    let mut rng = StdRng::seed_from_u64(9);
    let (index, raw) = random_index(&mut rng, 50, 32);
    let q = Embedding::normalized(raw[17].2.clone());
    let hits = index.search(&q, 1, None).unwrap();
    assert_eq!(hits[0].doc.id, raw[17].0);
    assert!((hits[0].score - 1.0).abs() <= 1e-6);
}

fn temp_path(dir: &tempfile::TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

#[test]
fn save_load_preserves_search() {
    let mut rng = StdRng::seed_from_u64(11);
    let (index, _) = random_index(&mut rng, 300, 24);
    let dir = tempfile::tempdir().unwrap();
    let path = temp_path(&dir, "index.bin");
    save(&index, &path).unwrap();
    let loaded: VectorIndex<f64> = load(&path, Some("test")).unwrap();
    assert_eq!(loaded, index);
    for _ in 0..50 {
        let q = Embedding::normalized(random_unit(&mut rng, 24));
        let a: Vec<(String, f64)> = index
            .search(&q, 20, None)
            .unwrap()
            .iter()
            .map(|h| (h.doc.id.clone(), h.score))
            .collect();
        let b: Vec<(String, f64)> = loaded
            .search(&q, 20, None)
            .unwrap()
            .iter()
            .map(|h| (h.doc.id.clone(), h.score))
            .collect();
        assert_eq!(a, b);
    }
}

#[test]
fn empty_index_round_trips() {
    let index = VectorIndex::<f32>::new(8, "hash:v1:d8");
    let dir = tempfile::tempdir().unwrap();
    let path = temp_path(&dir, "empty.bin");
    save(&index, &path).unwrap();
    assert_eq!(load::<f32>(&path, None).unwrap(), index);
}

#[test]
fn truncated_file_is_corrupt_and_provider_checked() {
    let mut rng = StdRng::seed_from_u64(5);
    let (index, _) = random_index(&mut rng, 10, 8);
    let dir = tempfile::tempdir().unwrap();
    let path = temp_path(&dir, "t.bin");
    save(&index, &path).unwrap();
    assert!(matches!(
        load::<f64>(&path, Some("other")),
        Err(IndexError::ProviderMismatch { .. })
    ));
    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() - 5]).unwrap();
    assert!(matches!(load::<f64>(&path, None), Err(IndexError::CorruptIndex(_))));
}

async fn build_file(config: &Path, out: &Path) -> Vec<u8> {
    let config = SourcesConfig::load(config).unwrap();
    let k = build_knowledge::<f32>(&config, &SparqlClient::default(), &HashEmbedder::new(256))
        .await
        .unwrap();
    save(&k.index, out).unwrap();
    std::fs::read(out).unwrap()
}

#[tokio::test]
async fn fixture_pipeline_is_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    let a = build_file(&fixture("sources.toml"), &temp_path(&dir, "a.bin")).await;
    let b = build_file(&fixture("sources.toml"), &temp_path(&dir, "b.bin")).await;
    assert_eq!(a, b);
}

#[tokio::test]
async fn fixture_pipeline_counts() {
    let config = SourcesConfig::load(&fixture("sources.toml")).unwrap();
    let k = build_knowledge::<f32>(&config, &SparqlClient::default(), &HashEmbedder::new(256))
        .await
        .unwrap();
    assert_eq!(k.index.count(DocKind::ExampleQuery), 25);
    assert_eq!(k.index.count(DocKind::ClassShape), 24);
    assert_eq!(k.index.count(DocKind::EndpointInfo), 2);
    assert_eq!(k.catalog.class_count(), 24);
    assert_eq!(k.index.fingerprint(), "hash:v1:d256");

    // Asking an indexed question verbatim finds that example first.
    let question = "Select the UniProtKB entry with the mnemonic 'A4_HUMAN'";
    let q: Embedding<f32> = HashEmbedder::new(256).embed_one(question).await.unwrap();
    let hits = k.index.search(&q, 1, Some(DocKind::ExampleQuery)).unwrap();
    assert_eq!(hits[0].doc.embed_text, question);
    assert!((hits[0].score - 1.0).abs() <= 1e-6);
}
