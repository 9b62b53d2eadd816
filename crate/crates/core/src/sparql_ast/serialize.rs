use std::fmt::Write;

use super::lexer::{tokenize, TokenKind};
use super::{
    GraphPattern, Predicate, Projection, ProjectionItem, Query, QueryForm, SelectModifier, Term, RDF_TYPE, XSD,
};

const INDENT: &str = "  ";

/// Render a query in the canonical layout: sorted prologue, one triple per
/// line, two spaces of indentation per nesting level, trailing newline.
pub fn serialize(q: &Query) -> String {
    let mut out = String::new();
    if let Some(base) = &q.base {
        let _ = writeln!(out, "BASE <{base}>");
    }
    for (prefix, iri) in &q.prefixes {
        let _ = writeln!(out, "PREFIX {prefix}: <{iri}>");
    }
    if q.base.is_some() || !q.prefixes.is_empty() {
        out.push('\n');
    }
    write_query(&mut out, q, 0);
    out
}

fn pad(out: &mut String, level: usize) {
    for _ in 0..level {
        out.push_str(INDENT);
    }
}

fn write_query(out: &mut String, q: &Query, level: usize) {
    pad(out, level);
    match q.form {
        QueryForm::Select => {
            out.push_str("SELECT ");
            match q.modifier {
                Some(SelectModifier::Distinct) => out.push_str("DISTINCT "),
                Some(SelectModifier::Reduced) => out.push_str("REDUCED "),
                None => {}
            }
            match &q.projection {
                Projection::All => out.push('*'),
                Projection::Items(items) => {
                    let rendered: Vec<String> = items
                        .iter()
                        .map(|item| match item {
                            ProjectionItem::Variable(v) => format!("?{v}"),
                            ProjectionItem::Expression(e) => e.clone(),
                        })
                        .collect();
                    out.push_str(&rendered.join(" "));
                }
            }
            out.push_str(" WHERE {\n");
        }
        QueryForm::Ask => out.push_str("ASK WHERE {\n"),
    }
    write_body(out, &q.where_clause, level + 1);
    pad(out, level);
    out.push_str("}\n");
    if !q.solution_modifiers.is_empty() {
        pad(out, level);
        out.push_str(&q.solution_modifiers);
        out.push('\n');
    }
}

/// Contents of a `{ }` block.
fn write_body(out: &mut String, pattern: &GraphPattern, level: usize) {
    match pattern {
        GraphPattern::Bgp(triples) => {
            for t in triples {
                pad(out, level);
                let _ = writeln!(
                    out,
                    "{} {} {} .",
                    term(&t.subject),
                    predicate(&t.predicate),
                    term(&t.object)
                );
            }
        }
        GraphPattern::Group(items) => {
            let mut previous_was_bgp = false;
            for item in items {
                let is_bgp = matches!(item, GraphPattern::Bgp(_));
                write_element(out, item, level, previous_was_bgp);
                previous_was_bgp = is_bgp;
            }
        }
        GraphPattern::SubSelect(q) => write_query(out, q, level),
        other => write_element(out, other, level, false),
    }
}

fn write_braced(out: &mut String, pattern: &GraphPattern, level: usize) {
    out.push_str("{\n");
    write_body(out, pattern, level + 1);
    pad(out, level);
    out.push('}');
}

/// One element of a group. A basic graph pattern directly after another one
/// (or an empty one) is braced so it does not merge on re-parse.
fn write_element(out: &mut String, pattern: &GraphPattern, level: usize, after_bgp: bool) {
    match pattern {
        GraphPattern::Bgp(triples) if !after_bgp && !triples.is_empty() => {
            write_body(out, pattern, level);
        }
        GraphPattern::Bgp(_) | GraphPattern::Group(_) | GraphPattern::SubSelect(_) => {
            pad(out, level);
            write_braced(out, pattern, level);
            out.push('\n');
        }
        GraphPattern::Optional(inner) => {
            pad(out, level);
            out.push_str("OPTIONAL ");
            write_braced(out, inner, level);
            out.push('\n');
        }
        GraphPattern::Union(..) => {
            pad(out, level);
            write_union(out, pattern, level);
            out.push('\n');
        }
        GraphPattern::Filter { expression, exists } => {
            pad(out, level);
            let _ = write!(out, "FILTER {expression}");
            if let Some(inner) = exists {
                out.push(' ');
                write_braced(out, inner, level);
            }
            out.push('\n');
        }
        GraphPattern::Bind { expression, variable } => {
            pad(out, level);
            let _ = writeln!(out, "BIND ({expression} AS ?{variable})");
        }
        GraphPattern::Values(block) => {
            pad(out, level);
            let _ = writeln!(out, "VALUES {block}");
        }
        GraphPattern::Service {
            endpoint,
            silent,
            inner,
        } => {
            pad(out, level);
            out.push_str("SERVICE ");
            if *silent {
                out.push_str("SILENT ");
            }
            out.push_str(&term(endpoint));
            out.push(' ');
            write_braced(out, inner, level);
            out.push('\n');
        }
    }
}

fn write_union(out: &mut String, pattern: &GraphPattern, level: usize) {
    match pattern {
        GraphPattern::Union(left, right) => {
            write_union(out, left, level);
            out.push('\n');
            pad(out, level);
            out.push_str("UNION\n");
            pad(out, level);
            write_braced(out, right, level);
        }
        branch => write_braced(out, branch, level),
    }
}

fn predicate(p: &Predicate) -> String {
    match p {
        Predicate::Term(Term::Iri(iri)) if iri == RDF_TYPE => "a".to_string(),
        Predicate::Term(t) => term(t),
        Predicate::Path(text) => text.clone(),
    }
}

pub(crate) fn term(t: &Term) -> String {
    match t {
        Term::Variable(v) => format!("?{v}"),
        Term::Iri(iri) => format!("<{iri}>"),
        Term::PrefixedName { prefix, local } => format!("{prefix}:{local}"),
        Term::BlankNode(label) => format!("_:{label}"),
        Term::Literal {
            lexical,
            datatype,
            lang,
        } => {
            if let Some(Term::Iri(dt)) = datatype.as_deref() {
                if is_bare_literal(lexical, dt) {
                    return lexical.clone();
                }
            }
            let mut s = quote(lexical);
            if let Some(lang) = lang {
                s.push('@');
                s.push_str(lang);
            } else if let Some(dt) = datatype {
                s.push_str("^^");
                s.push_str(&term(dt));
            }
            s
        }
    }
}

/// Numbers and booleans print bare when the lexer would read them back as
/// the same typed literal.
fn is_bare_literal(lexical: &str, datatype: &str) -> bool {
    let Some(local) = datatype.strip_prefix(XSD) else {
        return false;
    };
    if local == "boolean" {
        return lexical == "true" || lexical == "false";
    }
    let unsigned = lexical.strip_prefix(['+', '-']).unwrap_or(lexical);
    match tokenize(unsigned).as_deref() {
        Ok([tok]) => matches!(&tok.kind, TokenKind::Number(text, dt) if text == unsigned && *dt == local),
        _ => false,
    }
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            '\u{8}' => out.push_str("\\b"),
            '\u{c}' => out.push_str("\\f"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

#[cfg(test)]
mod tests {
    use super::super::parse;
    use super::*;

    #[test]
    fn empty_bgp_layout() {
        assert_eq!(serialize(&parse("SELECT * WHERE {}").unwrap()), "SELECT * WHERE {\n}\n");
    }

    #[test]
    fn canonical_layout() {
        let q = parse(
            "PREFIX up: <http://purl.uniprot.org/core/> PREFIX a: <http://a/>\nSELECT ?disease ?label WHERE { ?disease a up:Disease ; rdfs:label ?label OPTIONAL { ?disease up:x \"a\\\"b\"@en } } LIMIT 10",
        )
        .unwrap();
        assert_eq!(
            serialize(&q),
            "PREFIX a: <http://a/>\n\
             PREFIX up: <http://purl.uniprot.org/core/>\n\
             \n\
             SELECT ?disease ?label WHERE {\n\
             \x20 ?disease a up:Disease .\n\
             \x20 ?disease rdfs:label ?label .\n\
             \x20 OPTIONAL {\n\
             \x20   ?disease up:x \"a\\\"b\"@en .\n\
             \x20 }\n\
             }\n\
             LIMIT 10\n"
        );
    }

    #[test]
    fn adjacent_bgps_stay_separate() {
        let q = parse("SELECT * { ?a ?b ?c . { ?d ?e ?f } }").unwrap();
        let text = serialize(&q);
        assert_eq!(parse(&text).unwrap(), q);
    }

    #[test]
    fn literals() {
        assert_eq!(term(&parse_obj("-1.5")), "-1.5");
        assert_eq!(term(&parse_obj("true")), "true");
        assert_eq!(term(&parse_obj("\"7\"^^xsd:integer")), "\"7\"^^xsd:integer");
        assert_eq!(
            term(&parse_obj("\"7\"^^<http://www.w3.org/2001/XMLSchema#integer>")),
            "7"
        );
        assert_eq!(
            term(&parse_obj("\"x\"^^<http://www.w3.org/2001/XMLSchema#integer>")),
            "\"x\"^^<http://www.w3.org/2001/XMLSchema#integer>"
        );
    }

    fn parse_obj(src: &str) -> Term {
        let q = parse(&format!("SELECT * {{ ?s ?p {src} }}")).unwrap();
        let GraphPattern::Bgp(t) = q.where_clause else { panic!() };
        t[0].object.clone()
    }
}
