use std::collections::BTreeMap;

use super::lexer::{line_col, tokenize, Token, TokenKind};
use super::{
    GraphPattern, Predicate, Projection, ProjectionItem, Query, QueryForm, SelectModifier, SparqlError, Term,
    TriplePattern, RDF_TYPE, XSD,
};

/// Nesting bound for groups, blank-node lists and paths.
const MAX_DEPTH: usize = 128;

const UNSUPPORTED_FORMS: &[&str] = &[
    "CONSTRUCT",
    "DESCRIBE",
    "INSERT",
    "DELETE",
    "LOAD",
    "CLEAR",
    "CREATE",
    "DROP",
    "COPY",
    "MOVE",
    "ADD",
    "WITH",
];

const MODIFIER_KEYWORDS: &[&str] = &["GROUP", "HAVING", "ORDER", "LIMIT", "OFFSET", "VALUES"];

/// Parse SPARQL source text into a [`Query`].
///
/// Comments are dropped. Blank-node property lists become fresh blank nodes
/// labelled `anon0`, `anon1`, ... in document order.
pub fn parse(text: &str) -> Result<Query, SparqlError> {
    let tokens = tokenize(text)?;
    let mut parser = Parser {
        src: text,
        tokens,
        pos: 0,
        depth: 0,
        anon: 0,
    };
    parser.query(true)
}

struct Parser<'a> {
    src: &'a str,
    tokens: Vec<Token>,
    pos: usize,
    depth: usize,
    anon: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn peek_at(&self, n: usize) -> Option<&Token> {
        self.tokens.get(self.pos + n)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn at_punct(&self, p: &str) -> bool {
        self.peek().is_some_and(|t| t.is_punct(p))
    }

    fn at_keyword(&self, kw: &str) -> bool {
        self.peek().is_some_and(|t| t.is_keyword(kw))
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.at_punct(p) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        if self.at_keyword(kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn error_here(&self, reason: impl Into<String>) -> SparqlError {
        let offset = self.peek().map_or(self.src.len(), |t| t.offset);
        let (line, column) = line_col(self.src, offset);
        SparqlError::Syntax {
            line,
            column,
            reason: reason.into(),
        }
    }

    fn unexpected(&self, expected: &str) -> SparqlError {
        match self.peek() {
            Some(t) => self.error_here(format!("expected {expected}, found '{}'", t.text)),
            None => self.error_here(format!("expected {expected}, found end of input")),
        }
    }

    fn expect_punct(&mut self, p: &str) -> Result<(), SparqlError> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            Err(self.unexpected(&format!("'{p}'")))
        }
    }

    fn enter(&mut self) -> Result<(), SparqlError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(self.error_here("nesting too deep"));
        }
        Ok(())
    }

    fn leave(&mut self) {
        self.depth -= 1;
    }

    /// Token range rendered as text: tokens separated by one space where the
    /// source had whitespace or a comment between them.
    fn opaque(&self, from: usize, to: usize) -> String {
        let mut out = String::new();
        for (i, tok) in self.tokens[from..to].iter().enumerate() {
            if i > 0 && tok.spaced {
                out.push(' ');
            }
            out.push_str(&tok.text);
        }
        out
    }

    /// Skip a bracketed token run starting at the current opening bracket.
    /// Returns the index one past the matching closer.
    fn skip_balanced(&mut self) -> Result<usize, SparqlError> {
        let mut stack: Vec<&'static str> = Vec::new();
        loop {
            let Some(tok) = self.peek() else {
                return Err(self.error_here("unbalanced brackets"));
            };
            match &tok.kind {
                TokenKind::Punct(p @ ("(" | "[" | "{")) => stack.push(closer(p)),
                TokenKind::Punct(p @ (")" | "]" | "}")) => {
                    if stack.pop() != Some(*p) {
                        return Err(self.error_here(format!("unexpected '{p}'")));
                    }
                }
                _ if stack.is_empty() => return Err(self.unexpected("'(', '[' or '{'")),
                _ => {}
            }
            self.pos += 1;
            if stack.is_empty() {
                return Ok(self.pos);
            }
        }
    }

    fn query(&mut self, top_level: bool) -> Result<Query, SparqlError> {
        let mut base = None;
        let mut prefixes = BTreeMap::new();
        if top_level {
            loop {
                if self.eat_keyword("BASE") {
                    match self.next().map(|t| t.kind) {
                        Some(TokenKind::IriRef(iri)) => base = Some(iri),
                        _ => return Err(self.error_at_prev("expected IRI after BASE")),
                    }
                } else if self.eat_keyword("PREFIX") {
                    let name = match self.next().map(|t| t.kind) {
                        Some(TokenKind::PrefixedName(p, l)) if l.is_empty() => p,
                        _ => return Err(self.error_at_prev("expected prefix name after PREFIX")),
                    };
                    match self.next().map(|t| t.kind) {
                        Some(TokenKind::IriRef(iri)) => {
                            prefixes.insert(name, iri);
                        }
                        _ => return Err(self.error_at_prev("expected IRI in PREFIX declaration")),
                    }
                } else {
                    break;
                }
            }
        }

        let form = match self.peek().map(|t| &t.kind) {
            Some(TokenKind::Word(w)) if w.eq_ignore_ascii_case("SELECT") => QueryForm::Select,
            Some(TokenKind::Word(w)) if w.eq_ignore_ascii_case("ASK") && top_level => QueryForm::Ask,
            Some(TokenKind::Word(w)) => {
                let upper = w.to_ascii_uppercase();
                if UNSUPPORTED_FORMS.contains(&upper.as_str()) {
                    return Err(SparqlError::UnsupportedFeature(upper));
                }
                return Err(self.unexpected("SELECT or ASK"));
            }
            _ => return Err(self.unexpected("SELECT or ASK")),
        };
        self.pos += 1;

        let mut modifier = None;
        let projection = if form == QueryForm::Select {
            if self.eat_keyword("DISTINCT") {
                modifier = Some(SelectModifier::Distinct);
            } else if self.eat_keyword("REDUCED") {
                modifier = Some(SelectModifier::Reduced);
            }
            self.projection()?
        } else {
            Projection::Items(Vec::new())
        };

        if self.at_keyword("FROM") {
            return Err(SparqlError::UnsupportedFeature("FROM".into()));
        }
        self.eat_keyword("WHERE");
        if !self.at_punct("{") {
            return Err(self.unexpected("'{'"));
        }
        let where_clause = self.group_graph_pattern()?;
        let solution_modifiers = self.solution_modifiers(top_level)?;

        Ok(Query {
            base,
            prefixes,
            form,
            modifier,
            projection,
            where_clause,
            solution_modifiers,
        })
    }

    fn error_at_prev(&self, reason: &str) -> SparqlError {
        let offset = self
            .tokens
            .get(self.pos.saturating_sub(1))
            .map_or(self.src.len(), |t| t.offset);
        let (line, column) = line_col(self.src, offset);
        SparqlError::Syntax {
            line,
            column,
            reason: reason.into(),
        }
    }

    fn projection(&mut self) -> Result<Projection, SparqlError> {
        if self.eat_punct("*") {
            return Ok(Projection::All);
        }
        let mut items = Vec::new();
        loop {
            match self.peek().map(|t| &t.kind) {
                Some(TokenKind::Var(v)) => {
                    items.push(ProjectionItem::Variable(v.clone()));
                    self.pos += 1;
                }
                Some(TokenKind::Punct("(")) => {
                    let start = self.pos;
                    let end = self.skip_balanced()?;
                    items.push(ProjectionItem::Expression(self.opaque(start, end)));
                }
                _ => break,
            }
        }
        if items.is_empty() {
            return Err(self.unexpected("'*' or a projection variable"));
        }
        Ok(Projection::Items(items))
    }

    fn solution_modifiers(&mut self, top_level: bool) -> Result<String, SparqlError> {
        let start = self.pos;
        match self.peek() {
            None => return Ok(String::new()),
            Some(t) if t.is_punct("}") && !top_level => return Ok(String::new()),
            Some(t) => {
                let ok = matches!(&t.kind, TokenKind::Word(w)
                    if MODIFIER_KEYWORDS.iter().any(|k| w.eq_ignore_ascii_case(k)));
                if !ok {
                    return Err(self.error_here(format!("unexpected '{}' after query pattern", t.text)));
                }
            }
        }
        loop {
            match self.peek() {
                None => break,
                Some(t) if t.is_punct("}") => {
                    if top_level {
                        return Err(self.error_here("unexpected '}'"));
                    }
                    break;
                }
                Some(t) if t.is_punct(")") || t.is_punct("]") => {
                    return Err(self.error_here(format!("unexpected '{}'", t.text)));
                }
                Some(t) if t.is_punct("(") || t.is_punct("[") || t.is_punct("{") => {
                    self.skip_balanced()?;
                }
                Some(_) => self.pos += 1,
            }
        }
        Ok(self.opaque(start, self.pos))
    }

    /// `{ ... }`: a subquery or a group body. A body made of a single basic
    /// graph pattern (or nothing) collapses to that `Bgp`.
    fn group_graph_pattern(&mut self) -> Result<GraphPattern, SparqlError> {
        self.expect_punct("{")?;
        self.enter()?;
        let pattern = if self.at_keyword("SELECT") {
            let sub = self.query(false)?;
            GraphPattern::SubSelect(Box::new(sub))
        } else {
            self.group_body()?
        };
        self.expect_punct("}")?;
        self.leave();
        Ok(pattern)
    }

    fn group_body(&mut self) -> Result<GraphPattern, SparqlError> {
        let mut items: Vec<GraphPattern> = Vec::new();
        let mut triples: Vec<TriplePattern> = Vec::new();

        fn flush(items: &mut Vec<GraphPattern>, triples: &mut Vec<TriplePattern>) {
            if !triples.is_empty() {
                items.push(GraphPattern::Bgp(std::mem::take(triples)));
            }
        }

        loop {
            let Some(tok) = self.peek() else {
                return Err(self.unexpected("'}'"));
            };
            if tok.is_punct("}") {
                break;
            }
            if tok.is_punct(".") {
                self.pos += 1;
                continue;
            }
            if tok.is_punct("{") {
                flush(&mut items, &mut triples);
                let mut pattern = self.group_graph_pattern()?;
                while self.eat_keyword("UNION") {
                    if !self.at_punct("{") {
                        return Err(self.unexpected("'{' after UNION"));
                    }
                    let right = self.group_graph_pattern()?;
                    pattern = GraphPattern::Union(Box::new(pattern), Box::new(right));
                }
                items.push(pattern);
                continue;
            }
            if let TokenKind::Word(w) = &tok.kind {
                let upper = w.to_ascii_uppercase();
                match upper.as_str() {
                    "OPTIONAL" => {
                        flush(&mut items, &mut triples);
                        self.pos += 1;
                        let inner = self.group_graph_pattern()?;
                        items.push(GraphPattern::Optional(Box::new(inner)));
                        continue;
                    }
                    "FILTER" => {
                        flush(&mut items, &mut triples);
                        self.pos += 1;
                        items.push(self.filter()?);
                        continue;
                    }
                    "BIND" => {
                        flush(&mut items, &mut triples);
                        self.pos += 1;
                        items.push(self.bind()?);
                        continue;
                    }
                    "VALUES" => {
                        flush(&mut items, &mut triples);
                        self.pos += 1;
                        items.push(self.values()?);
                        continue;
                    }
                    "SERVICE" => {
                        flush(&mut items, &mut triples);
                        self.pos += 1;
                        items.push(self.service()?);
                        continue;
                    }
                    "MINUS" | "GRAPH" => return Err(SparqlError::UnsupportedFeature(upper)),
                    "UNION" => return Err(self.error_here("UNION must follow a group pattern")),
                    _ => {}
                }
            }
            self.triples_same_subject(&mut triples)?;
            if !self.eat_punct(".") && !self.at_punct("}") && !self.at_group_keyword() {
                return Err(self.unexpected("'.' or '}'"));
            }
        }
        flush(&mut items, &mut triples);

        Ok(match items.len() {
            0 => GraphPattern::Bgp(Vec::new()),
            1 if matches!(items[0], GraphPattern::Bgp(_)) => items.pop().unwrap_or(GraphPattern::Bgp(Vec::new())),
            _ => GraphPattern::Group(items),
        })
    }

    fn at_group_keyword(&self) -> bool {
        ["OPTIONAL", "FILTER", "BIND", "VALUES", "SERVICE", "MINUS", "GRAPH"]
            .iter()
            .any(|k| self.at_keyword(k))
            || self.at_punct("{")
    }

    fn filter(&mut self) -> Result<GraphPattern, SparqlError> {
        let negated = self.at_keyword("NOT") && self.peek_at(1).is_some_and(|t| t.is_keyword("EXISTS"));
        if negated || self.at_keyword("EXISTS") {
            self.pos += if negated { 2 } else { 1 };
            let inner = self.group_graph_pattern()?;
            return Ok(GraphPattern::Filter {
                expression: if negated { "NOT EXISTS" } else { "EXISTS" }.to_string(),
                exists: Some(Box::new(inner)),
            });
        }
        let start = self.pos;
        match self.peek().map(|t| &t.kind) {
            Some(TokenKind::Punct("(")) => {}
            Some(TokenKind::Word(_) | TokenKind::PrefixedName(..) | TokenKind::IriRef(_)) => {
                self.pos += 1;
                if !self.at_punct("(") {
                    return Err(self.unexpected("'(' after function name"));
                }
            }
            _ => return Err(self.unexpected("filter constraint")),
        }
        let end = self.skip_balanced()?;
        Ok(GraphPattern::Filter {
            expression: self.opaque(start, end),
            exists: None,
        })
    }

    fn bind(&mut self) -> Result<GraphPattern, SparqlError> {
        if !self.at_punct("(") {
            return Err(self.unexpected("'(' after BIND"));
        }
        let open = self.pos;
        let end = self.skip_balanced()?;
        // find the top-level AS
        let mut depth = 0usize;
        let mut as_at = None;
        for i in open + 1..end - 1 {
            let t = &self.tokens[i];
            match &t.kind {
                TokenKind::Punct("(" | "[" | "{") => depth += 1,
                TokenKind::Punct(")" | "]" | "}") => depth = depth.saturating_sub(1),
                TokenKind::Word(w) if depth == 0 && w.eq_ignore_ascii_case("AS") => as_at = Some(i),
                _ => {}
            }
        }
        let Some(as_at) = as_at.filter(|&i| i > open + 1 && i + 3 == end) else {
            self.pos = open;
            return Err(self.error_here("expected BIND ( expression AS ?variable )"));
        };
        let TokenKind::Var(variable) = self.tokens[as_at + 1].kind.clone() else {
            self.pos = as_at + 1;
            return Err(self.unexpected("variable after AS"));
        };
        Ok(GraphPattern::Bind {
            expression: self.opaque(open + 1, as_at),
            variable,
        })
    }

    fn values(&mut self) -> Result<GraphPattern, SparqlError> {
        let start = self.pos;
        match self.peek().map(|t| &t.kind) {
            Some(TokenKind::Var(_)) => self.pos += 1,
            Some(TokenKind::Punct("(")) => {
                self.skip_balanced()?;
            }
            _ => return Err(self.unexpected("variable or '(' after VALUES")),
        }
        if !self.at_punct("{") {
            return Err(self.unexpected("'{' in VALUES block"));
        }
        let end = self.skip_balanced()?;
        Ok(GraphPattern::Values(self.opaque(start, end)))
    }

    fn service(&mut self) -> Result<GraphPattern, SparqlError> {
        let silent = self.eat_keyword("SILENT");
        let endpoint = match self.next().map(|t| t.kind) {
            Some(TokenKind::IriRef(iri)) => Term::Iri(iri),
            Some(TokenKind::Var(v)) => Term::Variable(v),
            Some(TokenKind::PrefixedName(prefix, local)) => Term::PrefixedName { prefix, local },
            _ => return Err(self.error_at_prev("expected IRI or variable after SERVICE")),
        };
        if !self.at_punct("{") {
            return Err(self.unexpected("'{' after SERVICE endpoint"));
        }
        let inner = self.group_graph_pattern()?;
        Ok(GraphPattern::Service {
            endpoint,
            silent,
            inner: Box::new(inner),
        })
    }

    fn fresh_blank(&mut self) -> Term {
        let t = Term::BlankNode(format!("anon{}", self.anon));
        self.anon += 1;
        t
    }

    fn triples_same_subject(&mut self, out: &mut Vec<TriplePattern>) -> Result<(), SparqlError> {
        if self.at_punct("[") {
            let subject = self.blank_node_property_list(out)?;
            // `[ :p :o ] .` is a complete triples block on its own
            if self.at_punct(".") || self.at_punct("}") {
                return Ok(());
            }
            return self.property_list(&subject, out);
        }
        let subject = self.term()?;
        self.property_list(&subject, out)
    }

    fn blank_node_property_list(&mut self, out: &mut Vec<TriplePattern>) -> Result<Term, SparqlError> {
        self.expect_punct("[")?;
        self.enter()?;
        let node = self.fresh_blank();
        if !self.eat_punct("]") {
            self.property_list(&node, out)?;
            self.expect_punct("]")?;
        }
        self.leave();
        Ok(node)
    }

    fn property_list(&mut self, subject: &Term, out: &mut Vec<TriplePattern>) -> Result<(), SparqlError> {
        loop {
            let predicate = self.verb()?;
            loop {
                let mut nested = Vec::new();
                let object = if self.at_punct("[") {
                    self.blank_node_property_list(&mut nested)?
                } else {
                    self.term()?
                };
                out.push(TriplePattern::new(subject.clone(), predicate.clone(), object));
                out.append(&mut nested);
                if !self.eat_punct(",") {
                    break;
                }
            }
            if !self.eat_punct(";") {
                return Ok(());
            }
            while self.eat_punct(";") {}
            if self.at_punct(".") || self.at_punct("]") || self.at_punct("}") {
                return Ok(());
            }
        }
    }

    fn verb(&mut self) -> Result<Predicate, SparqlError> {
        if let Some(TokenKind::Var(v)) = self.peek().map(|t| &t.kind) {
            let v = v.clone();
            self.pos += 1;
            return Ok(Predicate::Term(Term::Variable(v)));
        }
        let start = self.pos;
        self.path_alternative()?;
        if self.pos == start + 1 {
            let tok = &self.tokens[start];
            match &tok.kind {
                TokenKind::IriRef(iri) => return Ok(Predicate::Term(Term::Iri(iri.clone()))),
                TokenKind::PrefixedName(prefix, local) => {
                    return Ok(Predicate::Term(Term::PrefixedName {
                        prefix: prefix.clone(),
                        local: local.clone(),
                    }))
                }
                TokenKind::Word(w) if w == "a" => return Ok(Predicate::Term(Term::iri(RDF_TYPE))),
                _ => {}
            }
        }
        Ok(Predicate::Path(self.opaque(start, self.pos)))
    }

    fn path_alternative(&mut self) -> Result<(), SparqlError> {
        self.enter()?;
        self.path_sequence()?;
        while self.eat_punct("|") {
            self.path_sequence()?;
        }
        self.leave();
        Ok(())
    }

    fn path_sequence(&mut self) -> Result<(), SparqlError> {
        self.path_element()?;
        while self.eat_punct("/") {
            self.path_element()?;
        }
        Ok(())
    }

    fn path_element(&mut self) -> Result<(), SparqlError> {
        self.eat_punct("^");
        match self.peek().map(|t| &t.kind) {
            Some(TokenKind::IriRef(_) | TokenKind::PrefixedName(..)) => self.pos += 1,
            Some(TokenKind::Word(w)) if w == "a" => self.pos += 1,
            Some(TokenKind::Punct("(")) => {
                self.pos += 1;
                self.path_alternative()?;
                self.expect_punct(")")?;
            }
            Some(TokenKind::Punct("!")) => {
                self.pos += 1;
                if self.eat_punct("(") {
                    if !self.eat_punct(")") {
                        self.path_one_in_set()?;
                        while self.eat_punct("|") {
                            self.path_one_in_set()?;
                        }
                        self.expect_punct(")")?;
                    }
                } else {
                    self.path_one_in_set()?;
                }
            }
            _ => return Err(self.unexpected("predicate")),
        }
        if self.at_punct("?") || self.at_punct("*") || self.at_punct("+") {
            self.pos += 1;
        }
        Ok(())
    }

    fn path_one_in_set(&mut self) -> Result<(), SparqlError> {
        self.eat_punct("^");
        match self.peek().map(|t| &t.kind) {
            Some(TokenKind::IriRef(_) | TokenKind::PrefixedName(..)) => {
                self.pos += 1;
                Ok(())
            }
            Some(TokenKind::Word(w)) if w == "a" => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.unexpected("IRI in negated property set")),
        }
    }

    fn term(&mut self) -> Result<Term, SparqlError> {
        let Some(tok) = self.next() else {
            return Err(self.unexpected("term"));
        };
        match tok.kind {
            TokenKind::Var(v) => Ok(Term::Variable(v)),
            TokenKind::IriRef(iri) => Ok(Term::Iri(iri)),
            TokenKind::PrefixedName(prefix, local) => Ok(Term::PrefixedName { prefix, local }),
            TokenKind::BlankLabel(label) => Ok(Term::BlankNode(label)),
            TokenKind::Str(lexical) => {
                if let Some(TokenKind::LangTag(lang)) = self.peek().map(|t| &t.kind) {
                    let lang = lang.clone();
                    self.pos += 1;
                    return Ok(Term::Literal {
                        lexical,
                        datatype: None,
                        lang: Some(lang),
                    });
                }
                if self.eat_punct("^^") {
                    let datatype = match self.next().map(|t| t.kind) {
                        Some(TokenKind::IriRef(iri)) => Term::Iri(iri),
                        Some(TokenKind::PrefixedName(prefix, local)) => Term::PrefixedName { prefix, local },
                        _ => return Err(self.error_at_prev("expected datatype IRI after '^^'")),
                    };
                    return Ok(Term::Literal {
                        lexical,
                        datatype: Some(Box::new(datatype)),
                        lang: None,
                    });
                }
                Ok(Term::Literal {
                    lexical,
                    datatype: None,
                    lang: None,
                })
            }
            TokenKind::Number(text, dt) => Ok(number_literal(text, dt)),
            TokenKind::Punct(sign @ ("+" | "-")) => match self.peek().map(|t| (&t.kind, t.spaced)) {
                Some((TokenKind::Number(text, dt), false)) => {
                    let lit = number_literal(format!("{sign}{text}"), dt);
                    self.pos += 1;
                    Ok(lit)
                }
                _ => Err(self.error_at_prev(&format!("unexpected '{sign}'"))),
            },
            TokenKind::Word(w) if w == "true" || w == "false" => Ok(Term::Literal {
                lexical: w,
                datatype: Some(Box::new(Term::Iri(format!("{XSD}boolean")))),
                lang: None,
            }),
            TokenKind::Punct("(") => Err(SparqlError::UnsupportedFeature("RDF collection".into())),
            _ => {
                self.pos -= 1;
                Err(self.unexpected("term"))
            }
        }
    }
}

fn closer(open: &str) -> &'static str {
    match open {
        "(" => ")",
        "[" => "]",
        _ => "}",
    }
}

fn number_literal(text: String, datatype: &str) -> Term {
    Term::Literal {
        lexical: text,
        datatype: Some(Box::new(Term::Iri(format!("{XSD}{datatype}")))),
        lang: None,
    }
}
