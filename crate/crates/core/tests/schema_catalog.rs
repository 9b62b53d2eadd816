use std::collections::BTreeSet;
use std::path::PathBuf;

use proptest::prelude::*;
use sparqlgen_core::endpoint::{ResultsSource, SparqlClient};
use sparqlgen_core::prefixes::PrefixMap;
use sparqlgen_core::schema_catalog::{
    build_catalog, fetch_class_labels, fetch_void_rows, labels_from_results, render_shex, void_rows_from_results,
    CatalogError, ClassLabels, ObjectDescriptor, VoidRow,
};
use sparqlgen_core::sparql_results::QueryResults;

const UP: &str = "http://purl.uniprot.org/core/";
const XSD: &str = "http://www.w3.org/2001/XMLSchema#";

fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(rel)
}

fn read(rel: &str) -> String {
    std::fs::read_to_string(fixture(rel)).unwrap()
}

fn uniprot_rows() -> Vec<VoidRow> {
    void_rows_from_results(&QueryResults::parse(&read("void/uniprot.srj")).unwrap())
}

#[test]
fn disease_annotation_matches_golden() {
    let rows: Vec<VoidRow> = uniprot_rows()
        .into_iter()
        .filter(|r| r.subject_class == format!("{UP}Disease_Annotation"))
        .collect();
    let schema = build_catalog(&rows, &ClassLabels::new());
    let shape = schema.class(&format!("{UP}Disease_Annotation")).unwrap();
    assert_eq!(shape.predicates.len(), 3);
    let rendered = render_shex(shape, &PrefixMap::common()) + "\n";
    assert_eq!(rendered, read("golden/disease_annotation.shex"));
}

#[test]
fn all_object_kinds_match_golden() {
    let ex = "http://example.org/ns/";
    let mut prefixes = PrefixMap::common();
    prefixes.insert("ex", ex);
    let r = |p: &str, o: ObjectDescriptor, n: u64| VoidRow {
        subject_class: format!("{ex}Sample"),
        predicate: if p.starts_with("http") {
            p.to_string()
        } else {
            format!("{ex}{p}")
        },
        object: o,
        triples: n,
    };
    let rows = vec![
        r("derivedFrom", ObjectDescriptor::Class(format!("{ex}Tissue")), 50),
        r("derivedFrom", ObjectDescriptor::Class(format!("{ex}Organism")), 50),
        r("collected", ObjectDescriptor::Datatype(format!("{XSD}dateTime")), 40),
        r("collected", ObjectDescriptor::Datatype(format!("{XSD}date")), 40),
        r("homepage", ObjectDescriptor::Iri, 30),
        r("note", ObjectDescriptor::Literal, 20),
        r("http://other.org/mixed/p", ObjectDescriptor::Literal, 10),
        r("http://other.org/mixed/p", ObjectDescriptor::Iri, 10),
        r(
            "http://other.org/mixed/p",
            ObjectDescriptor::Datatype(format!("{XSD}string")),
            10,
        ),
        r(
            "http://other.org/mixed/p",
            ObjectDescriptor::Class(format!("{ex}Organism")),
            10,
        ),
    ];
    let schema = build_catalog(&rows, &ClassLabels::new());
    let shape = schema.class(&format!("{ex}Sample")).unwrap();
    assert_eq!(render_shex(shape, &prefixes) + "\n", read("golden/all_kinds.shex"));
}

#[test]
fn encoded_by_links_protein_to_gene() {
    let rows = uniprot_rows();
    let hits: Vec<_> = rows
        .iter()
        .filter(|r| r.subject_class == format!("{UP}Protein") && r.predicate == format!("{UP}encodedBy"))
        .collect();
    assert_eq!(hits.len(), 1);
    assert_eq!(hits[0].object, ObjectDescriptor::Class(format!("{UP}Gene")));
}

#[tokio::test]
async fn empty_results_file_is_empty_void() {
    let client = SparqlClient::default();
    let err = fetch_void_rows(&client, &ResultsSource::File(fixture("void/empty.srj")))
        .await
        .unwrap_err();
    assert!(matches!(err, CatalogError::EmptyVoid(_)));
}

/// Expected rows written out by reading the ten raw solutions one by one.
#[tokio::test]
async fn split_fixture_rows() {
    let client = SparqlClient::default();
    let rows = fetch_void_rows(&client, &ResultsSource::File(fixture("void/split.srj")))
        .await
        .unwrap();
    let e = "http://example.org/";
    let row = |c: &str, p: &str, o: ObjectDescriptor, n: u64| VoidRow {
        subject_class: format!("{e}{c}"),
        predicate: if p.starts_with("http") {
            p.to_string()
        } else {
            format!("{e}{p}")
        },
        object: o,
        triples: n,
    };
    let class = |c: &str| ObjectDescriptor::Class(format!("{e}{c}"));
    let dt = |d: &str| ObjectDescriptor::Datatype(format!("{XSD}{d}"));
    let expected = vec![
        row("A", "p", class("B"), 10),
        row("A", "p", class("C"), 10),
        row("A", "p", dt("string"), 10),
        row("A", "q", dt("int"), 7),
        row("A", "r", ObjectDescriptor::Literal, 3),
        row("A", "s", ObjectDescriptor::Iri, 2),
        row("B", "http://www.w3.org/1999/02/22-rdf-syntax-ns#type", class("B"), 1),
        row("B", "p", class("A"), 4),
        row("B", "p", dt("date"), 4),
        row("C", "t", dt("string"), 1),
        row("C", "t", ObjectDescriptor::Iri, 1),
    ];
    let mut expected_sorted = expected.clone();
    expected_sorted
        .sort_by(|a, b| (&a.subject_class, &a.predicate, &a.object).cmp(&(&b.subject_class, &b.predicate, &b.object)));
    assert_eq!(rows, expected_sorted);
}

#[tokio::test]
async fn labels_fixture() {
    let client = SparqlClient::default();
    let labels = fetch_class_labels(&client, &ResultsSource::File(fixture("labels/uniprot.srj")))
        .await
        .unwrap();
    assert_eq!(labels[&format!("{UP}Gene")].label, "Gene");
    assert_eq!(labels[&format!("{UP}Protein")].label, "Protein");
    assert_eq!(
        labels[&format!("{UP}Protein")].description.as_deref(),
        Some("Description of a protein.")
    );
    let region = "http://biohackathon.org/resource/faldo#Region";
    assert!(!labels.contains_key(region));
    let schema = build_catalog(&uniprot_rows(), &labels);
    assert_eq!(schema.len(), 20);
    assert_eq!(schema.class(region).unwrap().label, region);
    assert_eq!(schema.class(&format!("{UP}Disease")).unwrap().label, "Disease");
}

fn iris_in_render(text: &str, prefixes: &PrefixMap) -> BTreeSet<String> {
    text.split_whitespace()
        .filter(|t| t.contains(':'))
        .map(|t| prefixes.expand(t).unwrap_or_else(|| panic!("cannot expand {t}")))
        .collect()
}

#[test]
fn rendered_iris_expand_back() {
    let rows = uniprot_rows();
    let schema = build_catalog(&rows, &ClassLabels::new());
    let prefixes = PrefixMap::common();
    for shape in schema.classes.values() {
        let text = render_shex(shape, &prefixes);
        assert!(text.starts_with(&format!("{} {{\n  a [ ", prefixes.compact(&shape.class_iri))));
        let mut expected = BTreeSet::from([shape.class_iri.clone()]);
        for p in &shape.predicates {
            expected.insert(p.predicate.clone());
            expected.extend(p.object_classes.iter().cloned());
            expected.extend(p.object_datatypes.iter().cloned());
        }
        assert_eq!(iris_in_render(&text, &prefixes), expected, "{text}");
    }
}

#[test]
fn oma_labels_are_english() {
    let labels = labels_from_results(&QueryResults::parse(&read("labels/oma.srj")).unwrap());
    assert_eq!(labels.len(), 4);
}

proptest! {
    /// Order and duplication of rows do not change the catalog: compare
    /// against building from the deduplicated row set.
    #[test]
    fn row_order_and_duplicates_do_not_matter(
        picks in proptest::collection::vec(0usize..1000, 0..200),
    ) {
        let base = uniprot_rows();
        let shuffled: Vec<VoidRow> = picks.iter().map(|&i| base[i % base.len()].clone()).collect();
        let set: BTreeSet<VoidRow> = shuffled.iter().cloned().collect();
        let deduped: Vec<VoidRow> = set.into_iter().collect();
        let a = build_catalog(&shuffled, &ClassLabels::new());
        let b = build_catalog(&deduped, &ClassLabels::new());
        prop_assert_eq!(&a, &b);
        let prefixes = PrefixMap::common();
        for (iri, shape) in &a.classes {
            prop_assert_eq!(render_shex(shape, &prefixes), render_shex(&b.classes[iri], &prefixes));
        }
    }
}
