//! Brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::rngs::StdRng;
use rand::Rng;
use sparqlgen_core::kb_index::{DocKind, Embedding, IndexedDoc, VectorIndex};
use sparqlgen_core::prefixes::PrefixMap;
use sparqlgen_core::schema_catalog::{ObjectDescriptor, VoidRow};
use sparqlgen_core::sparql_ast::{Predicate, Term, TriplePattern, RDF_TYPE};

// Randomized equivalence with a brute-force oracle.

pub const EX: &str = "http://ex.org/";

pub struct Instance {
    pub rows: Vec<VoidRow>,
    pub triples: Vec<TriplePattern>,
}

pub fn class_iri(i: usize) -> String {
    format!("{EX}C{i}")
}

pub fn pred_iri(i: usize) -> String {
    format!("{EX}p{i}")
}

pub fn random_instance(rng: &mut StdRng) -> Instance {
    let n_classes = rng.random_range(1..=5);
    let n_preds = rng.random_range(1..=6);
    let mut rows = Vec::new();
    for c in 0..n_classes {
        for p in 0..n_preds {
            if !rng.random_bool(0.45) {
                continue;
            }
            for _ in 0..rng.random_range(1..=2) {
                let object = match rng.random_range(0..4) {
                    0 | 1 => ObjectDescriptor::Class(class_iri(rng.random_range(0..n_classes + 1))),
                    2 => ObjectDescriptor::Iri,
                    _ => ObjectDescriptor::Datatype("http://www.w3.org/2001/XMLSchema#string".into()),
                };
                rows.push(VoidRow {
                    subject_class: class_iri(c),
                    predicate: pred_iri(p),
                    object,
                    triples: rng.random_range(0..5),
                });
            }
        }
        // Classes with no predicates still exist through their type row.
        rows.push(VoidRow {
            subject_class: class_iri(c),
            predicate: RDF_TYPE.into(),
            object: ObjectDescriptor::Class(class_iri(c)),
            triples: 1,
        });
    }
    let n_vars = rng.random_range(1..=4);
    let term = |rng: &mut StdRng| -> Term {
        match rng.random_range(0..10) {
            0 => Term::BlankNode("b0".into()),
            1 => Term::Iri(format!("{EX}thing")),
            _ => Term::var(format!("v{}", rng.random_range(0..n_vars))),
        }
    };
    let n_triples = rng.random_range(0..=8);
    let mut triples = Vec::new();
    for _ in 0..n_triples {
        let subject = term(rng);
        let t = match rng.random_range(0..10) {
            0..=2 => TriplePattern::new(
                subject,
                Predicate::Term(Term::iri(RDF_TYPE)),
                // One more class than the schema has: a type absent from it.
                Term::Iri(class_iri(rng.random_range(0..n_classes + 1))),
            ),
            3 => TriplePattern::new(
                subject,
                Predicate::Path(format!("<{}>/<{}>", pred_iri(0), pred_iri(1))),
                term(rng),
            ),
            4 => TriplePattern::new(subject, Predicate::Term(Term::var("pv")), term(rng)),
            _ => {
                let object = if rng.random_bool(0.2) {
                    Term::Literal {
                        lexical: "x".into(),
                        datatype: None,
                        lang: None,
                    }
                } else {
                    term(rng)
                };
                TriplePattern::new(
                    subject,
                    Predicate::Term(Term::iri(pred_iri(rng.random_range(0..n_preds + 1)))),
                    object,
                )
            }
        };
        triples.push(t);
    }
    Instance { rows, triples }
}

pub type Issue = (String, String, String, String, Vec<String>);

/// Classes recomputed from scratch by repeating the propagation rule more
/// times than any chain can be long, then every (triple, class) pair checked.
pub fn validator_oracle(inst: &Instance, endpoint: &str, prefixes: &PrefixMap) -> BTreeSet<Issue> {
    let mut shape: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut targets: BTreeMap<(String, String), BTreeSet<String>> = BTreeMap::new();
    let mut weights: BTreeMap<(String, String), u64> = BTreeMap::new();
    for r in &inst.rows {
        shape.entry(r.subject_class.clone()).or_default();
        if r.predicate == RDF_TYPE {
            continue;
        }
        let preds = shape.get_mut(&r.subject_class).unwrap();
        if !preds.contains(&r.predicate) {
            preds.push(r.predicate.clone());
        }
        let w = weights
            .entry((r.subject_class.clone(), r.predicate.clone()))
            .or_insert(0);
        *w = (*w).max(r.triples);
        if let ObjectDescriptor::Class(c) = &r.object {
            targets
                .entry((r.subject_class.clone(), r.predicate.clone()))
                .or_default()
                .insert(c.clone());
        }
    }
    for (class, preds) in shape.iter_mut() {
        preds.sort_by(|a, b| {
            weights[&(class.clone(), b.clone())]
                .cmp(&weights[&(class.clone(), a.clone())])
                .then(a.cmp(b))
        });
    }

    let mut declared: BTreeMap<Term, BTreeSet<String>> = BTreeMap::new();
    for t in &inst.triples {
        if let (Predicate::Term(Term::Iri(p)), Term::Iri(c)) = (&t.predicate, &t.object) {
            if p == RDF_TYPE {
                declared.entry(t.subject.clone()).or_default().insert(c.clone());
            }
        }
    }
    let mut inferred: BTreeMap<Term, BTreeSet<String>> = BTreeMap::new();
    let effective = |term: &Term, inferred: &BTreeMap<Term, BTreeSet<String>>| -> BTreeSet<String> {
        match declared.get(term) {
            Some(d) if !d.is_empty() => d.clone(),
            _ => inferred.get(term).cloned().unwrap_or_default(),
        }
    };
    for _ in 0..(inst.triples.len() + 1) * 6 {
        for t in &inst.triples {
            let Predicate::Term(Term::Iri(p)) = &t.predicate else {
                continue;
            };
            if p == RDF_TYPE || !matches!(t.object, Term::Variable(_) | Term::BlankNode(_)) {
                continue;
            }
            for c in effective(&t.subject, &inferred) {
                if let Some(objs) = targets.get(&(c.clone(), p.clone())) {
                    inferred
                        .entry(t.object.clone())
                        .or_default()
                        .extend(objs.iter().cloned());
                }
            }
        }
    }

    let mut issues = BTreeSet::new();
    for t in &inst.triples {
        let Predicate::Term(Term::Iri(p)) = &t.predicate else {
            continue;
        };
        if p == RDF_TYPE {
            continue;
        }
        let cands = effective(&t.subject, &inferred);
        if cands.is_empty() || cands.iter().any(|c| !shape.contains_key(c)) {
            continue;
        }
        if cands.iter().all(|c| !shape[c].contains(p)) {
            let first = cands.iter().next().unwrap();
            let subject = match &t.subject {
                Term::Variable(v) => format!("?{v}"),
                Term::BlankNode(b) => format!("_:{b}"),
                Term::Iri(i) => prefixes.compact(i),
                other => panic!("{other:?}"),
            };
            issues.insert((
                endpoint.to_string(),
                subject,
                prefixes.compact(first),
                prefixes.compact(p),
                shape[first].iter().map(|x| prefixes.compact(x)).collect(),
            ));
        }
    }
    issues
}

// Exact nearest-neighbour search.

pub fn random_unit(rng: &mut StdRng, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-3 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Raw `(id, kind, vector)` triples kept next to the index.
pub type RawDocs = Vec<(String, DocKind, Vec<f64>)>;

pub fn random_index(rng: &mut StdRng, n: usize, d: usize) -> (VectorIndex<f64>, RawDocs) {
    let mut index = VectorIndex::new(d, "test");
    let mut raw = Vec::new();
    for i in 0..n {
        let kind = if i % 3 == 0 {
            DocKind::ClassShape
        } else {
            DocKind::ExampleQuery
        };
        let doc = IndexedDoc::new(
            kind,
            format!("doc {i}"),
            "",
            "http://e/sparql",
            Some(format!("http://e/{i}")),
        )
        .unwrap();
        let v = random_unit(rng, d);
        let e = Embedding::normalized(v);
        raw.push((doc.id.clone(), kind, e.as_slice().to_vec()));
        index.insert(doc, e).unwrap();
    }
    (index, raw)
}

/// Exhaustive scan: score everything, sort, cut.
pub fn search_oracle(raw: &[(String, DocKind, Vec<f64>)], q: &[f64], k: usize, kind: Option<DocKind>) -> Vec<String> {
    let mut scored: Vec<(f64, &str)> = raw
        .iter()
        .filter(|(_, kd, _)| kind.is_none() || kind == Some(*kd))
        .map(|(id, _, v)| {
            let mut s = 0.0;
            for i in 0..v.len() {
                s += v[i] * q[i];
            }
            (s, id.as_str())
        })
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(b.1)));
    scored.into_iter().take(k).map(|(_, id)| id.to_string()).collect()
}
