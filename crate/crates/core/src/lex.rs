//! A lossless lexer for Java source text.
//!
//! Every byte of the input belongs to exactly one token, so joining the
//! token texts reproduces the input. The lexer only classifies; it never
//! interprets (there is no keyword table here, see [`crate::extract`]).

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TokenKind {
    Word,
    Number,
    Punct,
    StringLit,
    CharLit,
    LineComment,
    BlockComment,
    Javadoc,
    AnnotationAt,
    Whitespace,
}

impl TokenKind {
    pub fn is_comment(self) -> bool {
        matches!(
            self,
            TokenKind::LineComment | TokenKind::BlockComment | TokenKind::Javadoc
        )
    }

    /// Whitespace and comments: everything a parser would skip.
    pub fn is_trivia(self) -> bool {
        self == TokenKind::Whitespace || self.is_comment()
    }
}

/// A source position. Lines are 1-based, columns count chars from 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LexToken {
    pub kind: TokenKind,
    pub text: String,
    /// Byte offset of the first byte in the lexed input.
    pub offset: usize,
    pub start: Pos,
    /// Position just past the last char.
    pub end: Pos,
}

impl LexToken {
    pub fn byte_range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.text.len()
    }

    pub fn is(&self, kind: TokenKind, text: &str) -> bool {
        self.kind == kind && self.text == text
    }

    pub fn is_punct(&self, text: &str) -> bool {
        self.is(TokenKind::Punct, text)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LexError {
    #[error("unterminated block comment starting at {}:{}", .0.line, .0.col)]
    UnterminatedComment(Pos),
    #[error("unterminated string literal starting at {}:{}", .0.line, .0.col)]
    UnterminatedString(Pos),
    #[error("unterminated char literal starting at {}:{}", .0.line, .0.col)]
    UnterminatedChar(Pos),
}

/// Multi-char operators, longest first. `<<`/`>>` are deliberately absent so
/// that nested generic closers stay one `>` per token.
const OPERATORS: &[&str] = &[
    "...", "->", "::", "==", "!=", "<=", ">=", "&&", "||", "++", "--", "+=", "-=", "*=", "/=",
    "%=", "&=", "|=", "^=",
];

struct Cursor<'a> {
    src: &'a str,
    offset: usize,
    pos: Pos,
}

impl<'a> Cursor<'a> {
    fn rest(&self) -> &'a str {
        &self.src[self.offset..]
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn peek_nth(&self, n: usize) -> Option<char> {
        self.rest().chars().nth(n)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.offset += c.len_utf8();
        if c == '\n' {
            self.pos.line += 1;
            self.pos.col = 0;
        } else {
            self.pos.col += 1;
        }
        Some(c)
    }

    fn bump_n(&mut self, n: usize) {
        for _ in 0..n {
            self.bump();
        }
    }

    fn bump_while(&mut self, mut pred: impl FnMut(char) -> bool) {
        while let Some(c) = self.peek() {
            if !pred(c) {
                break;
            }
            self.bump();
        }
    }
}

fn is_ident_start(c: char) -> bool {
    c.is_alphabetic() || c == '_' || c == '$'
}

fn is_ident_continue(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '$'
}

/// Splits `source` into tokens. Concatenating the returned token texts
/// yields `source` exactly.
pub fn lex(source: &str) -> Result<Vec<LexToken>, LexError> {
    let mut cur = Cursor {
        src: source,
        offset: 0,
        pos: Pos { line: 1, col: 0 },
    };
    let mut tokens = Vec::new();

    while let Some(c) = cur.peek() {
        let start_offset = cur.offset;
        let start = cur.pos;
        let kind = if c.is_whitespace() {
            cur.bump_while(char::is_whitespace);
            TokenKind::Whitespace
        } else if cur.rest().starts_with("//") {
            cur.bump_while(|c| c != '\n');
            // a trailing \r belongs to the line break, not the comment
            if cur.src[start_offset..cur.offset].ends_with('\r') {
                cur.offset -= 1;
                cur.pos.col -= 1;
            }
            TokenKind::LineComment
        } else if cur.rest().starts_with("/*") {
            let rest = cur.rest();
            let javadoc = rest.starts_with("/**") && !rest.starts_with("/**/");
            cur.bump_n(2);
            loop {
                if cur.rest().starts_with("*/") {
                    cur.bump_n(2);
                    break;
                }
                if cur.bump().is_none() {
                    return Err(LexError::UnterminatedComment(start));
                }
            }
            if javadoc {
                TokenKind::Javadoc
            } else {
                TokenKind::BlockComment
            }
        } else if cur.rest().starts_with("\"\"\"") {
            lex_text_block(&mut cur, start)?;
            TokenKind::StringLit
        } else if c == '"' {
            if !lex_quoted(&mut cur, '"') {
                return Err(LexError::UnterminatedString(start));
            }
            TokenKind::StringLit
        } else if c == '\'' {
            if !lex_quoted(&mut cur, '\'') {
                return Err(LexError::UnterminatedChar(start));
            }
            TokenKind::CharLit
        } else if c == '@' {
            cur.bump();
            TokenKind::AnnotationAt
        } else if is_ident_start(c) {
            cur.bump_while(is_ident_continue);
            TokenKind::Word
        } else if c.is_ascii_digit()
            || (c == '.' && cur.peek_nth(1).is_some_and(|d| d.is_ascii_digit()))
        {
            lex_number(&mut cur);
            TokenKind::Number
        } else {
            match OPERATORS.iter().find(|op| cur.rest().starts_with(*op)) {
                Some(op) => cur.bump_n(op.chars().count()),
                None => {
                    cur.bump();
                }
            }
            TokenKind::Punct
        };
        tokens.push(LexToken {
            kind,
            text: source[start_offset..cur.offset].to_string(),
            offset: start_offset,
            start,
            end: cur.pos,
        });
    }
    Ok(tokens)
}

/// Consumes a quoted literal; false if it is not closed on the same line.
fn lex_quoted(cur: &mut Cursor<'_>, quote: char) -> bool {
    cur.bump();
    loop {
        match cur.bump() {
            None | Some('\n') => return false,
            Some('\\') => {
                if cur.bump().is_none() {
                    return false;
                }
            }
            Some(c) if c == quote => return true,
            Some(_) => {}
        }
    }
}

fn lex_text_block(cur: &mut Cursor<'_>, start: Pos) -> Result<(), LexError> {
    cur.bump_n(3);
    loop {
        if cur.rest().starts_with("\"\"\"") {
            cur.bump_n(3);
            return Ok(());
        }
        match cur.bump() {
            None => return Err(LexError::UnterminatedString(start)),
            Some('\\') => {
                if cur.bump().is_none() {
                    return Err(LexError::UnterminatedString(start));
                }
            }
            Some(_) => {}
        }
    }
}

fn lex_number(cur: &mut Cursor<'_>) {
    let rest = cur.rest();
    if rest.starts_with("0x") || rest.starts_with("0X") || rest.starts_with("0b") || rest.starts_with("0B") {
        cur.bump_n(2);
        cur.bump_while(|c| c.is_ascii_hexdigit() || c == '_');
        cur.bump_while(|c| matches!(c, 'l' | 'L'));
        return;
    }
    cur.bump_while(|c| c.is_ascii_digit() || c == '_');
    if cur.peek() == Some('.') && cur.peek_nth(1).is_none_or(|c| !is_ident_start(c) && c != '.') {
        cur.bump();
        cur.bump_while(|c| c.is_ascii_digit() || c == '_');
    }
    if matches!(cur.peek(), Some('e' | 'E'))
        && cur
            .peek_nth(1)
            .is_some_and(|c| c.is_ascii_digit() || ((c == '+' || c == '-') && cur.peek_nth(2).is_some_and(|d| d.is_ascii_digit())))
    {
        cur.bump();
        if matches!(cur.peek(), Some('+' | '-')) {
            cur.bump();
        }
        cur.bump_while(|c| c.is_ascii_digit() || c == '_');
    }
    cur.bump_while(|c| matches!(c, 'l' | 'L' | 'f' | 'F' | 'd' | 'D'));
}

/// Number of tokens that a model would see: everything except whitespace.
pub fn code_token_count(tokens: &[LexToken]) -> usize {
    tokens
        .iter()
        .filter(|t| t.kind != TokenKind::Whitespace)
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<TokenKind> {
        lex(src).unwrap().into_iter().map(|t| t.kind).collect()
    }

    fn joined(src: &str) -> String {
        lex(src).unwrap().into_iter().map(|t| t.text).collect()
    }

    #[test]
    fn string_contents_are_opaque() {
        let toks = lex("\"a//b\"").unwrap();
        assert_eq!(toks.len(), 1);
        assert_eq!(toks[0].kind, TokenKind::StringLit);
    }

    #[test]
    fn javadoc_then_declaration() {
        use TokenKind::*;
        assert_eq!(
            kinds("/** doc */ int x;"),
            vec![Javadoc, Whitespace, Word, Whitespace, Word, Punct]
        );
    }

    #[test]
    fn comment_kinds() {
        use TokenKind::*;
        assert_eq!(kinds("/* a */"), vec![BlockComment]);
        assert_eq!(kinds("/**/"), vec![BlockComment]);
        assert_eq!(kinds("/***/"), vec![Javadoc]);
        assert_eq!(kinds("// x\r\ny"), vec![LineComment, Whitespace, Word]);
    }

    #[test]
    fn escapes_and_chars() {
        use TokenKind::*;
        assert_eq!(kinds(r#""a\"b""#), vec![StringLit]);
        assert_eq!(kinds(r"'\''"), vec![CharLit]);
        assert_eq!(kinds(r#"'"'"#), vec![CharLit]);
        assert_eq!(kinds(r#""\\""#), vec![StringLit]);
    }

    #[test]
    fn text_block_is_one_string() {
        let src = "String s = \"\"\"\n  hello \"quoted\"\n  \"\"\";";
        let toks = lex(src).unwrap();
        let strings: Vec<_> = toks.iter().filter(|t| t.kind == TokenKind::StringLit).collect();
        assert_eq!(strings.len(), 1);
        assert!(strings[0].text.starts_with("\"\"\"") && strings[0].text.ends_with("\"\"\""));
        assert_eq!(joined(src), src);
    }

    #[test]
    fn numbers() {
        use TokenKind::*;
        assert_eq!(kinds("1_000L"), vec![Number]);
        assert_eq!(kinds("0xFFL"), vec![Number]);
        assert_eq!(kinds("1.5e-3f"), vec![Number]);
        assert_eq!(kinds(".5"), vec![Number]);
        assert_eq!(kinds("a.b"), vec![Word, Punct, Word]);
        assert_eq!(kinds("1..2"), vec![Number, Punct, Number]);
    }

    #[test]
    fn positions() {
        let toks = lex("a\n  bc").unwrap();
        assert_eq!(toks[2].start, Pos { line: 2, col: 2 });
        assert_eq!(toks[2].end, Pos { line: 2, col: 4 });
        assert_eq!(toks[2].offset, 4);
    }

    #[test]
    fn unterminated_inputs() {
        assert_eq!(
            lex("int x;\n/* open").unwrap_err(),
            LexError::UnterminatedComment(Pos { line: 2, col: 0 })
        );
        assert_eq!(
            lex("s = \"abc").unwrap_err(),
            LexError::UnterminatedString(Pos { line: 1, col: 4 })
        );
        assert!(matches!(lex("s = \"a\nb\""), Err(LexError::UnterminatedString(_))));
        assert!(matches!(lex("c = 'a"), Err(LexError::UnterminatedChar(_))));
    }

    #[test]
    fn generics_keep_single_closers() {
        let toks = lex("Map<String, List<String>>").unwrap();
        assert_eq!(toks.iter().filter(|t| t.text == ">").count(), 2);
    }

    proptest::proptest! {
        #[test]
        fn round_trip_when_lexable(src in "[a-z0-9 \\n\\t{}();/*\"'\\\\.@<>=+-]{0,80}") {
            if let Ok(tokens) = lex(&src) {
                let joined: String = tokens.iter().map(|t| t.text.as_str()).collect();
                proptest::prop_assert_eq!(joined, src.clone());
                let mut expected = 0;
                for t in &tokens {
                    proptest::prop_assert_eq!(t.offset, expected);
                    proptest::prop_assert!(!t.text.is_empty());
                    expected += t.text.len();
                }
            }
        }
    }
}
