//! Input formats: remove comments (RC), remove Javadoc (RJ) and replace
//! string literals (RS), in any combination, followed by truncation.
//!
//! Each operation acts on one lexer token class, so the operations commute.
//! A line that becomes blank only because something was removed from it is
//! dropped along with its line break; pre-existing blank lines are kept.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extract::MethodUnit;
use crate::lex::{lex, LexError, TokenKind};

pub const DEFAULT_PLACEHOLDER: &str = "<stringliteral>";
pub const DEFAULT_MAX_TOKENS: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct InputFormat {
    pub rc: bool,
    pub rj: bool,
    pub rs: bool,
}

impl InputFormat {
    pub const UNMODIFIED: InputFormat = InputFormat::new(false, false, false);
    pub const RJ: InputFormat = InputFormat::new(false, true, false);
    pub const RC_RJ: InputFormat = InputFormat::new(true, true, false);
    pub const ALL_OPS: InputFormat = InputFormat::new(true, true, true);

    pub const fn new(rc: bool, rj: bool, rs: bool) -> Self {
        InputFormat { rc, rj, rs }
    }

    /// The eight formats in canonical order.
    pub fn all() -> [InputFormat; 8] {
        [
            InputFormat::new(false, false, false),
            InputFormat::new(true, false, false),
            InputFormat::new(false, true, false),
            InputFormat::new(false, false, true),
            InputFormat::new(true, true, false),
            InputFormat::new(true, false, true),
            InputFormat::new(false, true, true),
            InputFormat::new(true, true, true),
        ]
    }

    pub fn code(&self) -> String {
        let parts: Vec<&str> = [(self.rc, "RC"), (self.rj, "RJ"), (self.rs, "RS")]
            .into_iter()
            .filter_map(|(on, name)| on.then_some(name))
            .collect();
        if parts.is_empty() {
            "Unmodified".to_string()
        } else {
            parts.join("+")
        }
    }
}

impl fmt::Display for InputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.code())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown input format {0:?}; expected Unmodified or a '+'-joined subset of RC, RJ, RS")]
pub struct FormatParseError(pub String);

impl FromStr for InputFormat {
    type Err = FormatParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let trimmed = s.trim();
        if trimmed.eq_ignore_ascii_case("unmodified") || trimmed.eq_ignore_ascii_case("none") {
            return Ok(InputFormat::UNMODIFIED);
        }
        let mut fmt = InputFormat::UNMODIFIED;
        for part in trimmed.split('+') {
            let flag = match part.trim().to_ascii_uppercase().as_str() {
                "RC" => &mut fmt.rc,
                "RJ" => &mut fmt.rj,
                "RS" => &mut fmt.rs,
                _ => return Err(FormatParseError(s.to_string())),
            };
            if *flag {
                return Err(FormatParseError(s.to_string()));
            }
            *flag = true;
        }
        Ok(fmt)
    }
}

impl Serialize for InputFormat {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.code())
    }
}

impl<'de> Deserialize<'de> for InputFormat {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormattedSample {
    pub method_id: String,
    pub format: InputFormat,
    pub text: String,
    /// Code tokens after transformation, before truncation.
    pub token_count: usize,
    pub truncated: bool,
}

#[derive(Debug, Clone)]
pub struct TransformOptions {
    pub placeholder: String,
    pub max_tokens: usize,
}

impl Default for TransformOptions {
    fn default() -> Self {
        TransformOptions {
            placeholder: DEFAULT_PLACEHOLDER.to_string(),
            max_tokens: DEFAULT_MAX_TOKENS,
        }
    }
}

/// Accumulates output lines, dropping lines emptied by a removal.
struct LineWriter {
    out: String,
    line: String,
    touched: bool,
}

impl LineWriter {
    fn new(capacity: usize) -> Self {
        LineWriter {
            out: String::with_capacity(capacity),
            line: String::new(),
            touched: false,
        }
    }

    fn push_kept(&mut self, text: &str) {
        let mut rest = text;
        while let Some(nl) = rest.find('\n') {
            self.line.push_str(&rest[..nl]);
            self.end_line(true);
            rest = &rest[nl + 1..];
        }
        self.line.push_str(rest);
    }

    fn end_line(&mut self, newline: bool) {
        let dropped = self.touched && self.line.trim().is_empty();
        if !dropped {
            self.out.push_str(&self.line);
            if newline {
                self.out.push('\n');
            }
        }
        self.line.clear();
        self.touched = false;
    }

    fn finish(mut self) -> String {
        if !self.line.is_empty() || self.touched {
            self.end_line(false);
        }
        self.out
    }
}

fn strip(text: &str, remove: impl Fn(TokenKind) -> bool) -> Result<String, LexError> {
    let tokens = lex(text)?;
    if !tokens.iter().any(|t| remove(t.kind)) {
        return Ok(text.to_string());
    }
    let mut w = LineWriter::new(text.len());
    for t in &tokens {
        if remove(t.kind) {
            w.touched = true;
        } else {
            w.push_kept(&t.text);
        }
    }
    Ok(w.finish())
}

/// Removes line and block comments; Javadoc is kept.
pub fn remove_comments_text(text: &str) -> Result<String, LexError> {
    strip(text, |k| matches!(k, TokenKind::LineComment | TokenKind::BlockComment))
}

/// Removes Javadoc comments; other comments are kept.
pub fn remove_javadoc_text(text: &str) -> Result<String, LexError> {
    strip(text, |k| k == TokenKind::Javadoc)
}

/// Replaces every string literal with `placeholder`.
pub fn replace_strings_text(text: &str, placeholder: &str) -> Result<String, LexError> {
    let tokens = lex(text)?;
    let mut out = String::with_capacity(text.len());
    for t in &tokens {
        if t.kind == TokenKind::StringLit {
            out.push_str(placeholder);
        } else {
            out.push_str(&t.text);
        }
    }
    Ok(out)
}

pub fn remove_comments(unit: &MethodUnit) -> Result<String, LexError> {
    remove_comments_text(&unit.text)
}

pub fn remove_javadoc(unit: &MethodUnit) -> Result<String, LexError> {
    remove_javadoc_text(&unit.text)
}

pub fn replace_strings(unit: &MethodUnit, placeholder: &str) -> Result<String, LexError> {
    replace_strings_text(&unit.text, placeholder)
}

/// Applies `fmt` to `text` (RJ, then RC, then RS) and truncates the result
/// to the first `max_tokens` code tokens. A placeholder counts as one token.
pub fn format_text(
    text: &str,
    fmt: InputFormat,
    opts: &TransformOptions,
) -> Result<(String, usize, bool), LexError> {
    let mut current = text.to_string();
    if fmt.rj {
        current = remove_javadoc_text(&current)?;
    }
    if fmt.rc {
        current = remove_comments_text(&current)?;
    }
    let tokens = lex(&current)?;
    let mut out = String::with_capacity(current.len());
    let mut count = 0usize;
    let mut cut_at = None;
    for t in &tokens {
        if t.kind != TokenKind::Whitespace {
            count += 1;
            if count == opts.max_tokens + 1 && cut_at.is_none() {
                cut_at = Some(out.len());
            }
        }
        if fmt.rs && t.kind == TokenKind::StringLit {
            out.push_str(&opts.placeholder);
        } else {
            out.push_str(&t.text);
        }
    }
    let truncated = count > opts.max_tokens;
    if let Some(cut) = cut_at {
        out.truncate(cut);
        let kept = out.trim_end().len();
        out.truncate(kept);
    }
    Ok((out, count, truncated))
}

pub fn apply_format(
    unit: &MethodUnit,
    fmt: InputFormat,
    opts: &TransformOptions,
) -> Result<FormattedSample, LexError> {
    let (text, token_count, truncated) = format_text(&unit.text, fmt, opts)?;
    Ok(FormattedSample {
        method_id: unit.id.clone(),
        format: fmt,
        text,
        token_count,
        truncated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extract::extract_methods;
    use crate::fixtures::PRINTER_METHOD;
    use crate::lex::code_token_count;

    fn printer() -> MethodUnit {
        extract_methods("Printer.java", "demo", PRINTER_METHOD).unwrap().remove(0)
    }

    fn fixture(name: &str) -> String {
        let path = format!("{}/tests/fixtures/printer/{name}", env!("CARGO_MANIFEST_DIR"));
        std::fs::read_to_string(path).unwrap().trim_end().to_string()
    }

    /// Independent classification count straight from the lexer.
    fn count_kind(text: &str, kind: TokenKind) -> usize {
        lex(text).unwrap().iter().filter(|t| t.kind == kind).count()
    }

    #[test]
    fn format_codes_round_trip() {
        for f in InputFormat::all() {
            assert_eq!(f.code().parse::<InputFormat>().unwrap(), f);
        }
        assert_eq!("rj+rc".parse::<InputFormat>().unwrap(), InputFormat::RC_RJ);
        assert!("RC+RC".parse::<InputFormat>().is_err());
        assert!("RX".parse::<InputFormat>().is_err());
        assert_eq!(InputFormat::ALL_OPS.code(), "RC+RJ+RS");
    }

    #[test]
    fn reference_formats() {
        let u = printer();
        assert_eq!(remove_comments(&u).unwrap(), fixture("rc.txt"));
        assert_eq!(remove_javadoc(&u).unwrap(), fixture("rj.txt"));
        assert_eq!(replace_strings(&u, DEFAULT_PLACEHOLDER).unwrap(), fixture("rs.txt"));
        let all = apply_format(&u, InputFormat::ALL_OPS, &TransformOptions::default()).unwrap();
        assert_eq!(all.text, fixture("all_ops.txt"));
        assert!(!all.truncated);
    }

    #[test]
    fn identity_cases() {
        let plain = "int f() {\n    return 1;\n}";
        assert_eq!(remove_comments_text(plain).unwrap(), plain);
        assert_eq!(remove_javadoc_text(plain).unwrap(), plain);
        assert_eq!(replace_strings_text(plain, "<s>").unwrap(), plain);
        let u = printer();
        let s = apply_format(&u, InputFormat::UNMODIFIED, &TransformOptions::default()).unwrap();
        assert_eq!(s.text, u.text);
    }

    #[test]
    fn comment_markers_inside_strings_survive() {
        let src = "void f() {\n    log(\"// not a comment\"); // real\n    s = \"/** fake */\";\n}";
        let rc = remove_comments_text(src).unwrap();
        assert!(rc.contains("\"// not a comment\""));
        assert!(!rc.contains("// real"));
        assert_eq!(count_kind(&rc, TokenKind::LineComment), 0);
        assert_eq!(count_kind(&rc, TokenKind::StringLit), count_kind(src, TokenKind::StringLit));
        let rj = remove_javadoc_text(src).unwrap();
        assert_eq!(rj, src);
        assert!(rj.contains("\"/** fake */\""));
    }

    #[test]
    fn three_strings_with_escaped_quote() {
        let src = "void f() { a(\"x\"); b(\"a\\\"b\"); c(\"\"); }";
        assert_eq!(count_kind(src, TokenKind::StringLit), 3);
        let out = replace_strings_text(src, DEFAULT_PLACEHOLDER).unwrap();
        assert_eq!(out.matches(DEFAULT_PLACEHOLDER).count(), 3);
        assert_eq!(out, "void f() { a(<stringliteral>); b(<stringliteral>); c(<stringliteral>); }");
    }

    #[test]
    fn trailing_comment_keeps_code_line() {
        let src = "void f() {\n    x = 1; // set\n\n    /* block\n       spans */\n    y();\n}";
        assert_eq!(
            remove_comments_text(src).unwrap(),
            "void f() {\n    x = 1; \n\n    y();\n}"
        );
    }

    #[test]
    fn truncation_counts_code_tokens() {
        // 600 code tokens: `{` + 298 × `a;` + `}`
        let mut src = String::from("{");
        for _ in 0..299 {
            src.push_str(" a;");
        }
        src.push_str(" }");
        let n = code_token_count(&lex(&src).unwrap());
        assert_eq!(n, 600);
        let (text, count, truncated) =
            format_text(&src, InputFormat::UNMODIFIED, &TransformOptions::default()).unwrap();
        assert_eq!(count, 600);
        assert!(truncated);
        assert_eq!(code_token_count(&lex(&text).unwrap()), 512);
        assert!(src.starts_with(&text));
    }

    #[test]
    fn placeholder_counts_as_one_token() {
        let opts = TransformOptions {
            max_tokens: 3,
            ..Default::default()
        };
        let (text, count, truncated) = format_text("f(\"a b c\")", InputFormat::new(false, false, true), &opts).unwrap();
        assert_eq!(count, 4);
        assert!(truncated);
        assert_eq!(text, "f(<stringliteral>");
    }
}
