//! A small total scanner for Python-like code.

use serde::{Deserialize, Serialize};

/// The 35 reserved words of Python 3.
pub const PYTHON_KEYWORDS: [&str; 35] = [
    "False", "None", "True", "and", "as", "assert", "async", "await", "break", "class", "continue",
    "def", "del", "elif", "else", "except", "finally", "for", "from", "global", "if", "import", "in",
    "is", "lambda", "nonlocal", "not", "or", "pass", "raise", "return", "try", "while", "with", "yield",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenKind {
    Identifier,
    Keyword,
    Punctuation,
    Literal,
    Comment,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Token<'a> {
    pub kind: TokenKind,
    pub text: &'a str,
}

/// Tokens plus bracket balance (opens minus closes, outside strings and
/// comments) for `()`, `[]` and `{}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LexicalSummary<'a> {
    pub tokens: Vec<Token<'a>>,
    pub paren_balance: i32,
    pub bracket_balance: i32,
    pub brace_balance: i32,
}

impl LexicalSummary<'_> {
    pub fn keyword_count(&self) -> usize {
        self.count(TokenKind::Keyword)
    }

    pub fn has_comment(&self) -> bool {
        self.count(TokenKind::Comment) > 0
    }

    pub fn count(&self, kind: TokenKind) -> usize {
        self.tokens.iter().filter(|t| t.kind == kind).count()
    }
}

pub fn keyword_index(word: &str) -> Option<usize> {
    PYTHON_KEYWORDS.iter().position(|k| *k == word)
}

fn is_ident_start(c: char) -> bool {
    c == '_' || c.is_alphabetic()
}

fn is_ident_continue(c: char) -> bool {
    c == '_' || c.is_alphanumeric()
}

/// Scans `text` into tokens. Never fails: an unterminated string runs to the
/// end of its line (or of the text, for triple quotes).
pub fn lexical_scan(text: &str) -> LexicalSummary<'_> {
    let mut tokens = Vec::new();
    let (mut paren, mut bracket, mut brace) = (0i32, 0i32, 0i32);
    let mut chars = text.char_indices().peekable();

    while let Some((start, c)) = chars.next() {
        if c.is_whitespace() {
            continue;
        }
        let mut end = start + c.len_utf8();
        let kind = if c == '#' {
            while let Some(&(i, ch)) = chars.peek() {
                if ch == '\n' {
                    break;
                }
                end = i + ch.len_utf8();
                chars.next();
            }
            TokenKind::Comment
        } else if c == '"' || c == '\'' {
            let triple = text[start..].starts_with(&c.to_string().repeat(3));
            if triple {
                chars.next();
                chars.next();
                end = start + 3;
            }
            let mut run = 0;
            let mut escaped = false;
            while let Some(&(i, ch)) = chars.peek() {
                if !triple && ch == '\n' {
                    break;
                }
                chars.next();
                end = i + ch.len_utf8();
                if escaped {
                    escaped = false;
                    run = 0;
                    continue;
                }
                if ch == '\\' {
                    escaped = true;
                    run = 0;
                } else if ch == c {
                    run += 1;
                    if !triple || run == 3 {
                        break;
                    }
                } else {
                    run = 0;
                }
            }
            TokenKind::Literal
        } else if c.is_ascii_digit() {
            while let Some(&(i, ch)) = chars.peek() {
                if ch.is_alphanumeric() || ch == '_' || ch == '.' {
                    end = i + ch.len_utf8();
                    chars.next();
                } else {
                    break;
                }
            }
            TokenKind::Literal
        } else if is_ident_start(c) {
            while let Some(&(i, ch)) = chars.peek() {
                if is_ident_continue(ch) {
                    end = i + ch.len_utf8();
                    chars.next();
                } else {
                    break;
                }
            }
            if keyword_index(&text[start..end]).is_some() {
                TokenKind::Keyword
            } else {
                TokenKind::Identifier
            }
        } else {
            match c {
                '(' => paren += 1,
                ')' => paren -= 1,
                '[' => bracket += 1,
                ']' => bracket -= 1,
                '{' => brace += 1,
                '}' => brace -= 1,
                _ => {}
            }
            TokenKind::Punctuation
        };
        tokens.push(Token {
            kind,
            text: &text[start..end],
        });
    }
    LexicalSummary {
        tokens,
        paren_balance: paren,
        bracket_balance: bracket,
        brace_balance: brace,
    }
}
