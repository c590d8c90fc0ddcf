//! Line-oriented tokenizer shared by the spec and rules file parsers.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Tok {
    Ident(String),
    Str(String),
    Num(String),
    Arrow,
    Punct(char),
}

impl Tok {
    pub(crate) fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => alloc::format!("`{s}`"),
            Tok::Str(s) => alloc::format!("string \"{s}\""),
            Tok::Num(s) => alloc::format!("number {s}"),
            Tok::Arrow => "`->`".to_string(),
            Tok::Punct(c) => alloc::format!("`{c}`"),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Token {
    pub tok: Tok,
    pub col: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct Line {
    /// 1-based.
    pub number: usize,
    pub indented: bool,
    pub tokens: Vec<Token>,
    /// Column just past the last significant character.
    pub end_col: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct LexError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

/// Splits `text` into non-empty lines of tokens. Blank and comment-only lines are dropped.
pub(crate) fn lex(text: &str) -> Result<Vec<Line>, LexError> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let number = idx + 1;
        let chars: Vec<char> = raw.chars().collect();
        let indented = matches!(chars.first(), Some(' ') | Some('\t'));
        let mut tokens = Vec::new();
        let mut i = 0;
        let mut end_col = 1;
        while i < chars.len() {
            let c = chars[i];
            let col = i + 1;
            if c == '#' {
                break;
            }
            if c.is_whitespace() {
                i += 1;
                continue;
            }
            if c.is_ascii_alphabetic() || c == '_' {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                tokens.push(Token { tok: Tok::Ident(chars[start..i].iter().collect()), col });
            } else if c.is_ascii_digit()
                || (c == '-' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()))
            {
                let start = i;
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                if i < chars.len() && chars[i] == '.' {
                    i += 1;
                    let frac = i;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                    if i == frac {
                        return Err(LexError {
                            line: number,
                            col: i + 1,
                            msg: "expected digits after decimal point".to_string(),
                        });
                    }
                }
                tokens.push(Token { tok: Tok::Num(chars[start..i].iter().collect()), col });
            } else if c == '-' && chars.get(i + 1) == Some(&'>') {
                i += 2;
                tokens.push(Token { tok: Tok::Arrow, col });
            } else if c == '"' {
                i += 1;
                let mut s = String::new();
                loop {
                    match chars.get(i) {
                        None => {
                            return Err(LexError {
                                line: number,
                                col,
                                msg: "unterminated string literal".to_string(),
                            })
                        }
                        Some('"') => {
                            i += 1;
                            break;
                        }
                        Some('\\') => {
                            match chars.get(i + 1) {
                                Some(&e @ ('"' | '\\')) => s.push(e),
                                Some('n') => s.push('\n'),
                                Some('t') => s.push('\t'),
                                _ => {
                                    return Err(LexError {
                                        line: number,
                                        col: i + 1,
                                        msg: "invalid escape in string literal".to_string(),
                                    })
                                }
                            }
                            i += 2;
                        }
                        Some(&other) => {
                            s.push(other);
                            i += 1;
                        }
                    }
                }
                tokens.push(Token { tok: Tok::Str(s), col });
            } else if "(),:*[]{};".contains(c) {
                i += 1;
                tokens.push(Token { tok: Tok::Punct(c), col });
            } else {
                return Err(LexError {
                    line: number,
                    col,
                    msg: alloc::format!("unexpected character `{c}`"),
                });
            }
            end_col = i + 1;
        }
        if !tokens.is_empty() {
            out.push(Line { number, indented, tokens, end_col });
        }
    }
    Ok(out)
}

/// Cursor over the tokens of a single line.
pub(crate) struct Cursor<'a> {
    line: &'a Line,
    pos: usize,
}

impl<'a> Cursor<'a> {
    pub(crate) fn new(line: &'a Line) -> Self {
        Cursor { line, pos: 0 }
    }

    pub(crate) fn line(&self) -> usize {
        self.line.number
    }

    pub(crate) fn peek(&self) -> Option<&'a Tok> {
        self.line.tokens.get(self.pos).map(|t| &t.tok)
    }

    pub(crate) fn peek_at(&self, ahead: usize) -> Option<&'a Tok> {
        self.line.tokens.get(self.pos + ahead).map(|t| &t.tok)
    }

    /// Column of the next token, or of the end of line.
    pub(crate) fn col(&self) -> usize {
        self.line.tokens.get(self.pos).map_or(self.line.end_col, |t| t.col)
    }

    pub(crate) fn next(&mut self) -> Option<&'a Tok> {
        let t = self.peek();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    pub(crate) fn at_end(&self) -> bool {
        self.pos >= self.line.tokens.len()
    }

    pub(crate) fn eat_punct(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Punct(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    pub(crate) fn found(&self) -> String {
        self.peek().map_or_else(|| "end of line".to_string(), Tok::describe)
    }

    pub(crate) fn error(&self, msg: impl Into<String>) -> LexError {
        LexError { line: self.line.number, col: self.col(), msg: msg.into() }
    }

    pub(crate) fn expect_punct(&mut self, c: char) -> Result<(), LexError> {
        if self.eat_punct(c) {
            Ok(())
        } else {
            Err(self.error(alloc::format!("expected `{c}`, found {}", self.found())))
        }
    }

    pub(crate) fn expect_ident(&mut self, what: &str) -> Result<&'a str, LexError> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.error(alloc::format!("expected {what}, found {}", self.found()))),
        }
    }

    pub(crate) fn expect_end(&self) -> Result<(), LexError> {
        if self.at_end() {
            Ok(())
        } else {
            Err(self.error(alloc::format!("unexpected {} at end of line", self.found())))
        }
    }
}
