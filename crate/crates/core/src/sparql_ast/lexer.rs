//! Tokenizer for the supported SPARQL subset.
//!
//! Tokens keep their raw source text so opaque constructs (expressions,
//! property paths, VALUES blocks) can be reproduced without a full
//! expression grammar.

use super::SparqlError;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum TokenKind {
    /// `<...>` with the brackets stripped.
    IriRef(String),
    /// `prefix:local`; `local` may be empty.
    PrefixedName(String, String),
    /// `?name` / `$name` without the sigil.
    Var(String),
    /// `_:label` without the `_:`.
    BlankLabel(String),
    /// Decoded string literal content.
    Str(String),
    /// `@lang` without the `@`.
    LangTag(String),
    /// Unsigned numeric literal, raw text, with its xsd datatype local name.
    Number(String, &'static str),
    /// Bare word: keywords, function names, `a`, `true`, `false`.
    Word(String),
    /// Punctuation and operators.
    Punct(&'static str),
}

#[derive(Debug, Clone)]
pub(crate) struct Token {
    pub kind: TokenKind,
    /// Raw source text of the token (comments never included).
    pub text: String,
    /// Byte offset of the first character.
    pub offset: usize,
    /// Whitespace or a comment separates this token from the previous one.
    pub spaced: bool,
}

impl Token {
    pub fn is_punct(&self, p: &str) -> bool {
        matches!(&self.kind, TokenKind::Punct(q) if *q == p)
    }

    pub fn is_keyword(&self, kw: &str) -> bool {
        matches!(&self.kind, TokenKind::Word(w) if w.eq_ignore_ascii_case(kw))
    }
}

/// Convert a byte offset to a 1-based (line, column) pair, counting columns in chars.
pub(crate) fn line_col(src: &str, offset: usize) -> (usize, usize) {
    let offset = offset.min(src.len());
    let mut line = 1;
    let mut col = 1;
    for (i, c) in src.char_indices() {
        if i >= offset {
            break;
        }
        if c == '\n' {
            line += 1;
            col = 1;
        } else {
            col += 1;
        }
    }
    (line, col)
}

fn syntax(src: &str, offset: usize, reason: impl Into<String>) -> SparqlError {
    let (line, column) = line_col(src, offset);
    SparqlError::Syntax {
        line,
        column,
        reason: reason.into(),
    }
}

const PUNCTS: &[&str] = &[
    "^^", "&&", "||", "!=", "<=", ">=", "{", "}", "(", ")", "[", "]", ".", ",", ";", "=", "<", ">", "!", "+", "-", "*",
    "/", "^", "|", "?",
];

fn is_pn_chars_base(c: char) -> bool {
    c.is_alphabetic()
}

fn is_pn_chars(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '-' || c == '\u{00B7}'
}

fn is_iri_char(c: char) -> bool {
    !(c <= ' ' || matches!(c, '<' | '>' | '"' | '{' | '}' | '|' | '^' | '`' | '\\'))
}

pub(crate) fn tokenize(src: &str) -> Result<Vec<Token>, SparqlError> {
    let mut lexer = Lexer {
        src,
        pos: 0,
        tokens: Vec::new(),
    };
    lexer.run()?;
    Ok(lexer.tokens)
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
    tokens: Vec<Token>,
}

impl<'a> Lexer<'a> {
    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn peek_nth(&self, n: usize) -> Option<char> {
        self.rest().chars().nth(n)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn push(&mut self, kind: TokenKind, start: usize, spaced: bool) {
        self.tokens.push(Token {
            kind,
            text: self.src[start..self.pos].to_string(),
            offset: start,
            spaced,
        });
    }

    /// Skip whitespace and `#` comments; returns whether anything was skipped.
    fn skip_trivia(&mut self) -> bool {
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.bump();
            } else if c == '#' {
                while let Some(c) = self.bump() {
                    if c == '\n' {
                        break;
                    }
                }
            } else {
                break;
            }
        }
        self.pos > start
    }

    fn run(&mut self) -> Result<(), SparqlError> {
        loop {
            let spaced = self.skip_trivia() || self.tokens.is_empty();
            let Some(c) = self.peek() else {
                return Ok(());
            };
            let start = self.pos;
            match c {
                '<' => {
                    if let Some(iri) = self.try_iri_ref() {
                        self.push(TokenKind::IriRef(iri), start, spaced);
                    } else {
                        self.punct(start, spaced)?;
                    }
                }
                '?' | '$' => {
                    self.bump();
                    let name = self.take_while(|c| c.is_alphanumeric() || c == '_' || c == '\u{00B7}');
                    if name.is_empty() {
                        if c == '$' {
                            return Err(syntax(self.src, start, "expected variable name after '$'"));
                        }
                        self.push(TokenKind::Punct("?"), start, spaced);
                    } else {
                        self.push(TokenKind::Var(name), start, spaced);
                    }
                }
                '"' | '\'' => {
                    let value = self.string_literal()?;
                    self.push(TokenKind::Str(value), start, spaced);
                }
                '@' => {
                    self.bump();
                    let tag = self.take_while(|c| c.is_ascii_alphanumeric() || c == '-');
                    if tag.is_empty() {
                        return Err(syntax(self.src, start, "expected language tag after '@'"));
                    }
                    self.push(TokenKind::LangTag(tag), start, spaced);
                }
                '_' if self.peek_nth(1) == Some(':') => {
                    self.bump();
                    self.bump();
                    let label = self.pn_local();
                    if label.is_empty() {
                        return Err(syntax(self.src, start, "expected blank node label after '_:'"));
                    }
                    self.push(TokenKind::BlankLabel(label), start, spaced);
                }
                c if c.is_ascii_digit() || (c == '.' && self.peek_nth(1).is_some_and(|d| d.is_ascii_digit())) => {
                    let datatype = self.number();
                    let text = self.src[start..self.pos].to_string();
                    self.push(TokenKind::Number(text, datatype), start, spaced);
                }
                ':' => {
                    self.bump();
                    let local = self.pn_local();
                    self.push(TokenKind::PrefixedName(String::new(), local), start, spaced);
                }
                c if is_pn_chars_base(c) => {
                    let candidate = self.take_while(|c| is_pn_chars(c) || c == '.');
                    let prefix = candidate.trim_end_matches('.');
                    self.pos = start + prefix.len();
                    if self.peek() == Some(':') {
                        self.bump();
                        let local = self.pn_local();
                        self.push(TokenKind::PrefixedName(prefix.to_string(), local), start, spaced);
                    } else {
                        self.pos = start;
                        let word = self.take_while(is_pn_chars);
                        self.push(TokenKind::Word(word), start, spaced);
                    }
                }
                _ => self.punct(start, spaced)?,
            }
        }
    }

    fn punct(&mut self, start: usize, spaced: bool) -> Result<(), SparqlError> {
        let rest = self.rest();
        for p in PUNCTS {
            if rest.starts_with(p) {
                self.pos += p.len();
                self.push(TokenKind::Punct(p), start, spaced);
                return Ok(());
            }
        }
        let c = self.peek().unwrap_or('\0');
        Err(syntax(self.src, start, format!("unexpected character {c:?}")))
    }

    fn take_while(&mut self, pred: impl Fn(char) -> bool) -> String {
        let start = self.pos;
        while let Some(c) = self.peek() {
            if !pred(c) {
                break;
            }
            self.bump();
        }
        self.src[start..self.pos].to_string()
    }

    /// `<iri>` when the bracketed text is a valid IRIREF, otherwise None (operator `<`).
    fn try_iri_ref(&mut self) -> Option<String> {
        let rest = &self.rest()[1..];
        let end = rest.find(|c: char| !is_iri_char(c))?;
        if rest[end..].starts_with('>') {
            let iri = rest[..end].to_string();
            self.pos += end + 2;
            Some(iri)
        } else {
            None
        }
    }

    /// PN_LOCAL, including `%hh` and `\` escapes; a trailing '.' is not consumed.
    fn pn_local(&mut self) -> String {
        let start = self.pos;
        loop {
            match self.peek() {
                Some(c) if is_pn_chars(c) || c == ':' || c == '.' => {
                    self.bump();
                }
                Some('%')
                    if self.peek_nth(1).is_some_and(|c| c.is_ascii_hexdigit())
                        && self.peek_nth(2).is_some_and(|c| c.is_ascii_hexdigit()) =>
                {
                    self.bump();
                    self.bump();
                    self.bump();
                }
                Some('\\') if self.peek_nth(1).is_some_and(|c| "_~.-!$&'()*+,;=/?#@%".contains(c)) => {
                    self.bump();
                    self.bump();
                }
                _ => break,
            }
        }
        while self.src[start..self.pos].ends_with('.') {
            self.pos -= 1;
        }
        self.src[start..self.pos].to_string()
    }

    fn number(&mut self) -> &'static str {
        let mut datatype = "integer";
        self.take_while(|c| c.is_ascii_digit());
        if self.peek() == Some('.') && self.peek_nth(1).is_some_and(|c| c.is_ascii_digit()) {
            self.bump();
            self.take_while(|c| c.is_ascii_digit());
            datatype = "decimal";
        }
        if matches!(self.peek(), Some('e' | 'E')) {
            let save = self.pos;
            self.bump();
            if matches!(self.peek(), Some('+' | '-')) {
                self.bump();
            }
            if self.peek().is_some_and(|c| c.is_ascii_digit()) {
                self.take_while(|c| c.is_ascii_digit());
                datatype = "double";
            } else {
                self.pos = save;
            }
        }
        datatype
    }

    fn string_literal(&mut self) -> Result<String, SparqlError> {
        let start = self.pos;
        let quote = self.bump().unwrap_or('"');
        let long = self.peek() == Some(quote) && self.peek_nth(1) == Some(quote);
        if long {
            self.bump();
            self.bump();
        }
        let mut value = String::new();
        loop {
            let Some(c) = self.bump() else {
                return Err(syntax(self.src, start, "unterminated string literal"));
            };
            if c == quote {
                if !long {
                    return Ok(value);
                }
                if self.peek() == Some(quote) && self.peek_nth(1) == Some(quote) {
                    self.bump();
                    self.bump();
                    // """a"""" : extra quotes belong to the content
                    while self.peek() == Some(quote) {
                        value.push(quote);
                        self.bump();
                    }
                    return Ok(value);
                }
                value.push(c);
            } else if c == '\\' {
                let esc_at = self.pos - 1;
                let decoded = match self.bump() {
                    Some('t') => '\t',
                    Some('n') => '\n',
                    Some('r') => '\r',
                    Some('b') => '\u{8}',
                    Some('f') => '\u{c}',
                    Some('"') => '"',
                    Some('\'') => '\'',
                    Some('\\') => '\\',
                    Some(u @ ('u' | 'U')) => {
                        let n = if u == 'u' { 4 } else { 8 };
                        let hex: String = (0..n).filter_map(|_| self.bump()).collect();
                        u32::from_str_radix(&hex, 16)
                            .ok()
                            .filter(|_| hex.len() == n)
                            .and_then(char::from_u32)
                            .ok_or_else(|| syntax(self.src, esc_at, "invalid unicode escape"))?
                    }
                    _ => return Err(syntax(self.src, esc_at, "invalid escape sequence")),
                };
                value.push(decoded);
            } else if !long && (c == '\n' || c == '\r') {
                return Err(syntax(self.src, start, "newline in short string literal"));
            } else {
                value.push(c);
            }
        }
    }
}
