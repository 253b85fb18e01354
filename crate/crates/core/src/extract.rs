//! Method-level unit extraction.
//!
//! Recognition is driven by the token stream: a scope stack tracks class
//! bodies, method bodies and plain blocks, and a member header ending in
//! `name(...) [throws ...] {` inside a class body opens a method unit.
//! Anonymous and local classes push a fresh class-body scope, so methods
//! declared inside them become units of their own.

use std::path::Path;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;
use walkdir::WalkDir;

use crate::lex::{lex, LexError, LexToken, TokenKind};

/// Half-open byte range `[start, end)` into a unit's text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(from = "[usize; 2]", into = "[usize; 2]")]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.start < other.end && other.start < self.end
    }

    pub fn contains(&self, other: &Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }
}

impl From<[usize; 2]> for Span {
    fn from([start, end]: [usize; 2]) -> Self {
        Span { start, end }
    }
}

impl From<Span> for [usize; 2] {
    fn from(s: Span) -> Self {
        [s.start, s.end]
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnitSpans {
    pub javadoc: Option<Span>,
    pub comments: Vec<Span>,
    pub annotations: Vec<Span>,
    pub strings: Vec<Span>,
    pub signature: Span,
    pub body: Span,
}


/// One extracted method or constructor together with its attached
/// Javadoc, comments and annotations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodUnit {
    pub id: String,
    pub project: String,
    pub path: String,
    pub start_line: usize,
    pub end_line: usize,
    /// Byte offset of `text` within the source file.
    #[serde(default)]
    pub offset: usize,
    pub text: String,
    pub spans: UnitSpans,
}

impl MethodUnit {
    pub fn contains_line(&self, line: usize) -> bool {
        self.start_line <= line && line <= self.end_line
    }

    pub fn line_count(&self) -> usize {
        self.end_line - self.start_line + 1
    }
}

/// Stable identifier derived from project, path and start line.
pub fn unit_id(project: &str, path: &str, start_line: usize) -> String {
    let mut hasher = Sha256::new();
    hasher.update(project.as_bytes());
    hasher.update([0]);
    hasher.update(path.as_bytes());
    hasher.update([0]);
    hasher.update(start_line.to_string().as_bytes());
    let digest = hasher.finalize();
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error(transparent)]
    Lex(#[from] LexError),
    #[error("unmatched closing brace at line {line}")]
    UnmatchedClose { line: usize },
    #[error("{open} unclosed brace(s) at end of file")]
    Unclosed { open: usize },
}

const CLASS_KEYWORDS: &[&str] = &["class", "interface", "enum", "record"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ScopeKind {
    Type { is_enum: bool, in_constants: bool },
    Method { pending: usize },
    Block,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum OnClose {
    /// The enclosing member declaration is complete.
    EndMember,
    /// The enclosing member continues (anonymous class in an initializer etc.).
    Continue,
}

#[derive(Debug)]
struct Scope {
    kind: ScopeKind,
    on_close: OnClose,
    /// Type scopes: significant index where the current member header began.
    header_start: Option<usize>,
    header_depth: i32,
    /// Block scopes: a class keyword has been seen in the current statement.
    pending_class: Option<bool>,
}

impl Scope {
    fn new(kind: ScopeKind, on_close: OnClose) -> Self {
        Scope {
            kind,
            on_close,
            header_start: None,
            header_depth: 0,
            pending_class: None,
        }
    }

    fn reset_header(&mut self) {
        self.header_start = None;
        self.header_depth = 0;
    }
}

struct PendingUnit {
    /// Token index of the first attached token (trivia or header).
    first_tok: usize,
    javadoc_tok: Option<usize>,
    annotation_toks: Vec<(usize, usize)>,
    signature_toks: (usize, usize),
    open_tok: usize,
}

struct Extractor<'a> {
    tokens: &'a [LexToken],
    /// Indices into `tokens` of non-trivia tokens.
    sig: Vec<usize>,
    /// For each significant `)`, the significant index of its `(`.
    open_paren: Vec<Option<usize>>,
}

impl<'a> Extractor<'a> {
    fn new(tokens: &'a [LexToken]) -> Self {
        let sig: Vec<usize> = (0..tokens.len())
            .filter(|&i| !tokens[i].kind.is_trivia())
            .collect();
        let mut open_paren = vec![None; sig.len()];
        let mut stack = Vec::new();
        for (si, &ti) in sig.iter().enumerate() {
            if tokens[ti].is_punct("(") {
                stack.push(si);
            } else if tokens[ti].is_punct(")") {
                open_paren[si] = stack.pop();
            }
        }
        Extractor {
            tokens,
            sig,
            open_paren,
        }
    }

    fn tok(&self, si: usize) -> &LexToken {
        &self.tokens[self.sig[si]]
    }

    fn is_word(&self, si: usize, word: &str) -> bool {
        self.tok(si).is(TokenKind::Word, word)
    }

    fn follows_dot(&self, si: usize) -> bool {
        si > 0 && self.tok(si - 1).is_punct(".")
    }

    /// `Some(is_enum)` if the word at `si` opens a type declaration.
    fn class_keyword_at(&self, si: usize) -> Option<bool> {
        let t = self.tok(si);
        if t.kind != TokenKind::Word || !CLASS_KEYWORDS.contains(&t.text.as_str()) {
            return None;
        }
        if self.follows_dot(si) {
            return None;
        }
        if t.text == "record" {
            // contextual keyword: `record Name(` or `record Name<`
            let name = si + 1 < self.sig.len() && self.tok(si + 1).kind == TokenKind::Word;
            let next = si + 2 < self.sig.len()
                && (self.tok(si + 2).is_punct("(") || self.tok(si + 2).is_punct("<"));
            if !(name && next) {
                return None;
            }
        }
        Some(t.text == "enum")
    }

    /// `{` at `si` opens the body of an anonymous class: `new T<..>(..) {`.
    fn is_anonymous_body(&self, si: usize) -> bool {
        if si == 0 || !self.tok(si - 1).is_punct(")") {
            return false;
        }
        let Some(open) = self.open_paren[si - 1] else {
            return false;
        };
        let mut k = open;
        while k > 0 {
            k -= 1;
            let t = self.tok(k);
            match t.kind {
                TokenKind::Word if t.text == "new" => return true,
                TokenKind::Word => {}
                TokenKind::Punct if matches!(t.text.as_str(), "." | "<" | ">" | "," | "?" | "&") => {}
                _ => return false,
            }
        }
        false
    }

    /// Classifies the member header `sig[start..brace)` in a class body.
    fn header_kind(&self, start: usize, brace: usize) -> HeaderKind {
        let mut depth = 0i32;
        let mut throws_at = None;
        for si in start..brace {
            let t = self.tok(si);
            match t.text.as_str() {
                "(" if t.kind == TokenKind::Punct => depth += 1,
                ")" if t.kind == TokenKind::Punct => depth -= 1,
                "=" | "->" if t.kind == TokenKind::Punct && depth == 0 => {
                    return HeaderKind::Expression
                }
                "throws" if t.kind == TokenKind::Word && depth == 0 => {
                    throws_at.get_or_insert(si);
                }
                _ => {}
            }
            if depth == 0 {
                if let Some(is_enum) = self.class_keyword_at(si) {
                    return HeaderKind::Type { is_enum };
                }
            }
        }
        let sig_end = throws_at.unwrap_or(brace);
        if sig_end == 0 || sig_end <= start || !self.tok(sig_end - 1).is_punct(")") {
            return HeaderKind::Initializer;
        }
        match self.open_paren[sig_end - 1] {
            Some(open) if open > start && self.tok(open - 1).kind == TokenKind::Word => {
                HeaderKind::Method { name: open - 1 }
            }
            _ => HeaderKind::Initializer,
        }
    }

    /// Annotation ranges (significant indices, inclusive) in `sig[start..end)`.
    fn annotations(&self, start: usize, end: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let mut si = start;
        while si < end {
            if self.tok(si).kind == TokenKind::AnnotationAt
                && si + 1 < end
                && self.tok(si + 1).kind == TokenKind::Word
                && !self.is_word(si + 1, "interface")
            {
                let begin = si;
                let mut last = si + 1;
                while last + 2 < end && self.tok(last + 1).is_punct(".") && self.tok(last + 2).kind == TokenKind::Word {
                    last += 2;
                }
                if last + 1 < end && self.tok(last + 1).is_punct("(") {
                    let mut depth = 0;
                    let mut k = last + 1;
                    while k < end {
                        if self.tok(k).is_punct("(") {
                            depth += 1;
                        } else if self.tok(k).is_punct(")") {
                            depth -= 1;
                            if depth == 0 {
                                break;
                            }
                        }
                        k += 1;
                    }
                    last = k.min(end - 1);
                }
                out.push((begin, last));
                si = last + 1;
            } else {
                si += 1;
            }
        }
        out
    }

    /// Token index of the first comment attached before token `first`.
    /// Comments attach when only whitespace separates them from the header,
    /// unless they trail code on the same line.
    fn attached_start(&self, first: usize) -> (usize, Option<usize>) {
        let mut start = first;
        let mut javadoc = None;
        let mut ti = first;
        while ti > 0 {
            ti -= 1;
            let t = &self.tokens[ti];
            match t.kind {
                TokenKind::Whitespace => continue,
                k if k.is_comment() => {
                    let trailing = self.tokens[..ti]
                        .iter()
                        .rev()
                        .find(|p| p.kind != TokenKind::Whitespace)
                        .is_some_and(|p| !p.kind.is_comment() && p.end.line == t.start.line);
                    if trailing {
                        break;
                    }
                    if k == TokenKind::Javadoc && javadoc.is_none() {
                        javadoc = Some(ti);
                    }
                    start = ti;
                }
                _ => break,
            }
        }
        (start, javadoc)
    }

    fn run(&self) -> Result<Vec<(PendingUnit, usize)>, ExtractError> {
        let mut stack = vec![Scope::new(
            ScopeKind::Type {
                is_enum: false,
                in_constants: false,
            },
            OnClose::EndMember,
        )];
        let mut finished: Vec<(PendingUnit, usize)> = Vec::new();
        let mut slots: Vec<Option<PendingUnit>> = Vec::new();

        for si in 0..self.sig.len() {
            let t = self.tok(si);
            let is_open = t.is_punct("{");
            let is_close = t.is_punct("}");
            let top = stack.last_mut().expect("root scope");
            match top.kind {
                ScopeKind::Type {
                    is_enum,
                    in_constants,
                } => {
                    if is_close {
                        self.pop(&mut stack, &mut slots, &mut finished, si)?;
                        continue;
                    }
                    if t.is_punct(";") {
                        top.reset_header();
                        if in_constants {
                            top.kind = ScopeKind::Type {
                                is_enum,
                                in_constants: false,
                            };
                        }
                        continue;
                    }
                    if is_open {
                        let start = top.header_start.unwrap_or(si);
                        let (kind, on_close) = if in_constants || self.is_anonymous_body(si) {
                            (Self::plain_type(false), OnClose::Continue)
                        } else {
                            match self.header_kind(start, si) {
                                HeaderKind::Type { is_enum } => (
                                    ScopeKind::Type {
                                        is_enum,
                                        in_constants: is_enum,
                                    },
                                    OnClose::EndMember,
                                ),
                                HeaderKind::Expression => (ScopeKind::Block, OnClose::Continue),
                                HeaderKind::Initializer => (ScopeKind::Block, OnClose::EndMember),
                                HeaderKind::Method { name } => {
                                    let first_tok = self.sig[start];
                                    let (first_tok, javadoc_tok) = self.attached_start(first_tok);
                                    let annotations = self.annotations(start, name);
                                    // leading annotations are not part of the signature
                                    let mut sig_start = start;
                                    for &(a, b) in &annotations {
                                        if a == sig_start {
                                            sig_start = b + 1;
                                        }
                                    }
                                    let unit = PendingUnit {
                                        first_tok,
                                        javadoc_tok,
                                        annotation_toks: annotations
                                            .iter()
                                            .map(|&(a, b)| (self.sig[a], self.sig[b]))
                                            .collect(),
                                        signature_toks: (self.sig[sig_start], self.sig[si - 1]),
                                        open_tok: self.sig[si],
                                    };
                                    slots.push(Some(unit));
                                    (
                                        ScopeKind::Method {
                                            pending: slots.len() - 1,
                                        },
                                        OnClose::EndMember,
                                    )
                                }
                            }
                        };
                        stack.push(Scope::new(kind, on_close));
                        continue;
                    }
                    if top.header_start.is_none() {
                        top.header_start = Some(si);
                    }
                    if t.is_punct("(") {
                        top.header_depth += 1;
                    } else if t.is_punct(")") {
                        top.header_depth -= 1;
                    } else if t.is_punct(",") && in_constants && top.header_depth == 0 {
                        top.reset_header();
                    }
                }
                ScopeKind::Method { .. } | ScopeKind::Block => {
                    if is_close {
                        self.pop(&mut stack, &mut slots, &mut finished, si)?;
                        continue;
                    }
                    if is_open {
                        let kind = if self.is_anonymous_body(si) {
                            Self::plain_type(false)
                        } else if let Some(is_enum) = top.pending_class.take() {
                            ScopeKind::Type {
                                is_enum,
                                in_constants: is_enum,
                            }
                        } else {
                            ScopeKind::Block
                        };
                        stack.push(Scope::new(kind, OnClose::Continue));
                        continue;
                    }
                    if t.is_punct(";") {
                        top.pending_class = None;
                    } else if let Some(is_enum) = self.class_keyword_at(si) {
                        top.pending_class = Some(is_enum);
                    }
                }
            }
        }
        if stack.len() != 1 {
            return Err(ExtractError::Unclosed {
                open: stack.len() - 1,
            });
        }
        Ok(finished)
    }

    fn plain_type(is_enum: bool) -> ScopeKind {
        ScopeKind::Type {
            is_enum,
            in_constants: is_enum,
        }
    }

    fn pop(
        &self,
        stack: &mut Vec<Scope>,
        slots: &mut [Option<PendingUnit>],
        finished: &mut Vec<(PendingUnit, usize)>,
        si: usize,
    ) -> Result<(), ExtractError> {
        if stack.len() == 1 {
            return Err(ExtractError::UnmatchedClose {
                line: self.tok(si).start.line,
            });
        }
        let closed = stack.pop().expect("checked length");
        if let ScopeKind::Method { pending } = closed.kind {
            if let Some(unit) = slots[pending].take() {
                finished.push((unit, self.sig[si]));
            }
        }
        let parent = stack.last_mut().expect("root scope");
        match parent.kind {
            ScopeKind::Type { .. } if closed.on_close == OnClose::EndMember => parent.reset_header(),
            ScopeKind::Method { .. } | ScopeKind::Block => {
                if matches!(closed.kind, ScopeKind::Type { .. }) {
                    parent.pending_class = None;
                }
            }
            _ => {}
        }
        Ok(())
    }
}

enum HeaderKind {
    Type { is_enum: bool },
    Method { name: usize },
    Expression,
    Initializer,
}

/// Extracts one unit per concrete method or constructor body in `source`.
/// Units are ordered by their position in the file.
pub fn extract_methods(
    path: &str,
    project: &str,
    source: &str,
) -> Result<Vec<MethodUnit>, ExtractError> {
    let tokens = lex(source)?;
    let extractor = Extractor::new(&tokens);
    let mut found = extractor.run()?;
    found.sort_by_key(|(u, _)| u.first_tok);

    let units = found
        .into_iter()
        .map(|(p, close_tok)| build_unit(&tokens, source, path, project, &p, close_tok))
        .collect();
    Ok(units)
}

fn build_unit(
    tokens: &[LexToken],
    source: &str,
    path: &str,
    project: &str,
    p: &PendingUnit,
    close_tok: usize,
) -> MethodUnit {
    let first = &tokens[p.first_tok];
    let last = &tokens[close_tok];
    let base = first.offset;
    let end = last.offset + last.text.len();
    let rel = |ti: usize| {
        let r = tokens[ti].byte_range();
        Span::new(r.start - base, r.end - base)
    };
    let range = |a: usize, b: usize| Span::new(tokens[a].offset - base, tokens[b].byte_range().end - base);

    let mut comments = Vec::new();
    let mut strings = Vec::new();
    for ti in p.first_tok..=close_tok {
        match tokens[ti].kind {
            TokenKind::LineComment | TokenKind::BlockComment => comments.push(rel(ti)),
            TokenKind::StringLit => strings.push(rel(ti)),
            _ => {}
        }
    }
    let start_line = first.start.line;
    MethodUnit {
        id: unit_id(project, path, start_line),
        project: project.to_string(),
        path: path.to_string(),
        start_line,
        end_line: last.end.line,
        offset: base,
        text: source[base..end].to_string(),
        spans: UnitSpans {
            javadoc: p.javadoc_tok.map(rel),
            comments,
            annotations: p.annotation_toks.iter().map(|&(a, b)| range(a, b)).collect(),
            strings,
            signature: range(p.signature_toks.0, p.signature_toks.1),
            body: range(p.open_tok, close_tok),
        },
    }
}

/// Innermost unit in `path` whose line span contains `line`.
pub fn locate_method<'u>(units: &'u [MethodUnit], path: &str, line: usize) -> Option<&'u MethodUnit> {
    units
        .iter()
        .filter(|u| u.path == path && u.contains_line(line))
        .min_by_key(|u| (u.line_count(), std::cmp::Reverse(u.offset)))
}

/// Result of walking a source tree.
#[derive(Debug, Default)]
pub struct TreeExtraction {
    pub units: Vec<MethodUnit>,
    pub files: usize,
    /// Files that were skipped, with the reason.
    pub skipped: Vec<(String, String)>,
}

/// Extracts every `.java` file under `root`. Files that are not UTF-8 or
/// fail to extract are skipped and reported; other files are unaffected.
pub fn extract_tree(root: &Path, project: &str) -> std::io::Result<TreeExtraction> {
    let mut files = Vec::new();
    for entry in WalkDir::new(root).sort_by_file_name() {
        let entry = entry.map_err(std::io::Error::other)?;
        if entry.file_type().is_file() && entry.path().extension().is_some_and(|e| e == "java") {
            files.push(entry.into_path());
        }
    }
    let results: Vec<_> = files
        .par_iter()
        .map(|file| {
            let rel = file
                .strip_prefix(root)
                .unwrap_or(file)
                .components()
                .map(|c| c.as_os_str().to_string_lossy())
                .collect::<Vec<_>>()
                .join("/");
            let outcome = match std::fs::read(file) {
                Err(e) => Err(e.to_string()),
                Ok(bytes) => match String::from_utf8(bytes) {
                    Err(_) => Err("not valid UTF-8".to_string()),
                    Ok(text) => extract_methods(&rel, project, &text).map_err(|e| e.to_string()),
                },
            };
            (rel, outcome)
        })
        .collect();

    let mut out = TreeExtraction {
        files: files.len(),
        ..Default::default()
    };
    for (rel, outcome) in results {
        match outcome {
            Ok(units) => out.units.extend(units),
            Err(reason) => {
                warn!("skipping {rel}: {reason}");
                out.skipped.push((rel, reason));
            }
        }
    }
    out.units
        .sort_by(|a, b| (&a.path, a.start_line, a.offset).cmp(&(&b.path, b.start_line, b.offset)));
    Ok(out)
}
