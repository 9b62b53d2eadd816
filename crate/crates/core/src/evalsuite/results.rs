//! Result sets with variable names dropped, and their comparison.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::endpoint::{EndpointError, SparqlClient};
use crate::sparql_results::{QueryResults, RdfTerm, RdfTermKind};

const XSD_STRING: &str = "http://www.w3.org/2001/XMLSchema#string";
const XSD_BOOLEAN: &str = "http://www.w3.org/2001/XMLSchema#boolean";

/// Above this many tie permutations the canonical column order falls back
/// to the order the columns arrived in.
const MAX_TIE_PERMUTATIONS: usize = 5040;

/// A cell; `None` is an unbound variable.
pub type Cell = Option<RdfTerm>;
pub type Row = Vec<Cell>;

/// Rows of a SELECT result with the column names kept only for display.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ResultSet {
    pub vars: Vec<String>,
    pub rows: Vec<Row>,
}

fn normalize_term(mut t: RdfTerm) -> RdfTerm {
    match t.kind {
        // Blank node labels are local to one response.
        RdfTermKind::Bnode => t.value.clear(),
        RdfTermKind::Literal if t.datatype.as_deref() == Some(XSD_STRING) => t.datatype = None,
        _ => {}
    }
    t
}

impl ResultSet {
    pub fn from_results(results: &QueryResults) -> Self {
        if let Some(b) = results.boolean {
            let term = RdfTerm {
                kind: RdfTermKind::Literal,
                value: b.to_string(),
                datatype: Some(XSD_BOOLEAN.into()),
                lang: None,
            };
            return ResultSet {
                vars: vec!["boolean".into()],
                rows: vec![vec![Some(term)]],
            };
        }
        let mut vars = results.vars.clone();
        for solution in &results.bindings {
            for v in solution.keys() {
                if !vars.contains(v) {
                    vars.push(v.clone());
                }
            }
        }
        let rows = results
            .bindings
            .iter()
            .map(|s| vars.iter().map(|v| s.get(v).cloned().map(normalize_term)).collect())
            .collect();
        ResultSet { vars, rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    fn width(&self) -> usize {
        self.vars.len()
    }

    /// Sorted values of one column.
    fn signature(&self, col: usize) -> Vec<Cell> {
        let mut v: Vec<Cell> = self.rows.iter().map(|r| r[col].clone()).collect();
        v.sort();
        v
    }

    fn project(&self, order: &[usize]) -> Vec<Row> {
        let mut rows: Vec<Row> = self
            .rows
            .iter()
            .map(|r| order.iter().map(|&c| r[c].clone()).collect())
            .collect();
        rows.sort();
        rows
    }

    /// Sorted rows with columns put in an order that depends only on the
    /// data: by column signature, and among columns with equal signatures
    /// by whichever permutation gives the smallest sorted row list.
    pub fn canonical(&self) -> Vec<Row> {
        let mut cols: Vec<(Vec<Cell>, usize)> = (0..self.width()).map(|c| (self.signature(c), c)).collect();
        cols.sort();
        let mut groups: Vec<Vec<usize>> = Vec::new();
        for (i, (sig, col)) in cols.iter().enumerate() {
            if i > 0 && cols[i - 1].0 == *sig {
                groups.last_mut().expect("group").push(*col);
            } else {
                groups.push(vec![*col]);
            }
        }
        let total = groups
            .iter()
            .try_fold(1usize, |acc, g| (1..=g.len()).try_fold(acc, |a, n| a.checked_mul(n)));
        let base: Vec<usize> = groups.iter().flatten().copied().collect();
        if total.is_none_or(|t| t > MAX_TIE_PERMUTATIONS || t == 1) {
            return self.project(&base);
        }
        let mut best: Option<Vec<Row>> = None;
        let mut current = groups.clone();
        loop {
            let order: Vec<usize> = current.iter().flatten().copied().collect();
            let rows = self.project(&order);
            if best.as_ref().is_none_or(|b| rows < *b) {
                best = Some(rows);
            }
            if !next_group_permutation(&mut current) {
                break;
            }
        }
        best.expect("at least one permutation")
    }

    /// Equal up to row order and a renaming/reordering of the columns.
    pub fn equivalent(&self, other: &ResultSet) -> bool {
        self.width() == other.width() && self.len() == other.len() && self.canonical() == other.canonical()
    }
}

/// Advance the groups like an odometer of lexicographic permutations.
fn next_group_permutation(groups: &mut [Vec<usize>]) -> bool {
    for g in groups.iter_mut().rev() {
        if next_permutation(g) {
            return true;
        }
        g.sort();
    }
    false
}

fn next_permutation(v: &mut [usize]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

fn multiset<T: Ord + Clone>(items: impl IntoIterator<Item = T>) -> BTreeMap<T, usize> {
    let mut m = BTreeMap::new();
    for i in items {
        *m.entry(i).or_insert(0) += 1;
    }
    m
}

fn overlap<T: Ord + Clone>(a: &BTreeMap<T, usize>, b: &BTreeMap<T, usize>) -> usize {
    a.iter().map(|(k, n)| (*n).min(b.get(k).copied().unwrap_or(0))).sum()
}

/// For each reference column, the generated column holding the most of the
/// same values (ties: smaller signature, then position), each used once.
fn align(generated: &ResultSet, reference: &ResultSet) -> Vec<Option<usize>> {
    let gen_sets: Vec<_> = (0..generated.width())
        .map(|c| multiset(generated.signature(c)))
        .collect();
    let mut used = vec![false; generated.width()];
    let mut ref_cols: Vec<(Vec<Cell>, usize)> = (0..reference.width()).map(|c| (reference.signature(c), c)).collect();
    ref_cols.sort();
    let mut out = vec![None; reference.width()];
    for (sig, rc) in ref_cols {
        let want = multiset(sig);
        let pick = (0..generated.width())
            .filter(|&g| !used[g])
            .map(|g| (overlap(&gen_sets[g], &want), g))
            .filter(|&(n, _)| n > 0)
            .max_by(|a, b| {
                a.0.cmp(&b.0)
                    .then_with(|| generated.signature(b.1).cmp(&generated.signature(a.1)))
                    .then(b.1.cmp(&a.1))
            });
        if let Some((_, g)) = pick {
            used[g] = true;
            out[rc] = Some(g);
        }
    }
    out
}

/// Row-level F1 of `generated` against `reference` after aligning columns.
pub fn row_f1(generated: &ResultSet, reference: &ResultSet) -> f64 {
    if generated.is_empty() || reference.is_empty() {
        return 0.0;
    }
    let alignment = align(generated, reference);
    let projected = generated
        .rows
        .iter()
        .map(|r| alignment.iter().map(|a| a.and_then(|g| r[g].clone())).collect::<Row>());
    // Extra generated columns make the rows different.
    let extra = generated.width() > alignment.iter().flatten().count();
    if extra {
        return 0.0;
    }
    let hits = overlap(&multiset(projected), &multiset(reference.rows.iter().cloned()));
    if hits == 0 {
        return 0.0;
    }
    let precision = hits as f64 / generated.len() as f64;
    let recall = hits as f64 / reference.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

/// Outcome classes of one generated query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    Success,
    DifferentResult,
    NoResult,
    Error,
}

impl Category {
    pub const ALL: [Category; 4] = [
        Category::Success,
        Category::DifferentResult,
        Category::NoResult,
        Category::Error,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Category::Success => "Success",
            Category::DifferentResult => "Different Result",
            Category::NoResult => "No Result",
            Category::Error => "Error",
        }
    }
}

/// Category and F1 of a generated result (`Err` when anything before
/// comparison failed).
pub fn categorize<E>(generated: Result<&ResultSet, E>, reference: &ResultSet) -> (Category, f64) {
    match generated {
        Err(_) => (Category::Error, 0.0),
        Ok(g) if g.is_empty() => (Category::NoResult, 0.0),
        Ok(g) if g.equivalent(reference) => (Category::Success, 1.0),
        Ok(g) => (Category::DifferentResult, row_f1(g, reference)),
    }
}

/// Run a query and normalize its results.
pub async fn execute_select(client: &SparqlClient, endpoint: &str, query: &str) -> Result<ResultSet, EndpointError> {
    Ok(ResultSet::from_results(&client.select(endpoint, query).await?))
}
