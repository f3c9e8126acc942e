//! Tokenizer for `.smrl` sources.

use std::fmt;

use thiserror::Error;

use super::ast::Span;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    // Keywords
    Package,
    Import,
    Mr,
    For,
    Var,
    True,
    False,
    // Literals and names
    Ident(String),
    Int(i64),
    Str(String),
    // Punctuation
    LParen,
    RParen,
    LBrace,
    RBrace,
    Semi,
    Comma,
    Colon,
    Dot,
    DotDot,
    Assign,
    EqEq,
    NotEq,
    Lt,
    Le,
    Gt,
    Ge,
    Plus,
    Minus,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Package => write!(f, "package"),
            Tok::Import => write!(f, "import"),
            Tok::Mr => write!(f, "MR"),
            Tok::For => write!(f, "for"),
            Tok::Var => write!(f, "var"),
            Tok::True => write!(f, "true"),
            Tok::False => write!(f, "false"),
            Tok::Ident(s) => write!(f, "identifier {s:?}"),
            Tok::Int(n) => write!(f, "integer {n}"),
            Tok::Str(s) => write!(f, "string {s:?}"),
            Tok::LParen => write!(f, "'('"),
            Tok::RParen => write!(f, "')'"),
            Tok::LBrace => write!(f, "'{{'"),
            Tok::RBrace => write!(f, "'}}'"),
            Tok::Semi => write!(f, "';'"),
            Tok::Comma => write!(f, "','"),
            Tok::Colon => write!(f, "':'"),
            Tok::Dot => write!(f, "'.'"),
            Tok::DotDot => write!(f, "'..'"),
            Tok::Assign => write!(f, "'='"),
            Tok::EqEq => write!(f, "'=='"),
            Tok::NotEq => write!(f, "'!='"),
            Tok::Lt => write!(f, "'<'"),
            Tok::Le => write!(f, "'<='"),
            Tok::Gt => write!(f, "'>'"),
            Tok::Ge => write!(f, "'>='"),
            Tok::Plus => write!(f, "'+'"),
            Tok::Minus => write!(f, "'-'"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

#[derive(Debug, Clone, Error, PartialEq)]
#[error("{line}:{col}: {message}")]
pub struct LexError {
    pub line: u32,
    pub col: u32,
    pub message: String,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
    line: u32,
    col: u32,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            src: src.as_bytes(),
            pos: 0,
            line: 1,
            col: 1,
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn peek2(&self) -> Option<u8> {
        self.src.get(self.pos + 1).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let c = self.peek()?;
        self.pos += 1;
        if c == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn error(&self, line: u32, col: u32, message: impl Into<String>) -> LexError {
        LexError {
            line,
            col,
            message: message.into(),
        }
    }

    fn skip_trivia(&mut self) -> Result<(), LexError> {
        loop {
            match self.peek() {
                Some(c) if c.is_ascii_whitespace() => {
                    self.bump();
                }
                Some(b'/') if self.peek2() == Some(b'/') => {
                    while let Some(c) = self.peek() {
                        if c == b'\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                Some(b'/') if self.peek2() == Some(b'*') => {
                    let (line, col) = (self.line, self.col);
                    self.bump();
                    self.bump();
                    loop {
                        match self.peek() {
                            Some(b'*') if self.peek2() == Some(b'/') => {
                                self.bump();
                                self.bump();
                                break;
                            }
                            Some(_) => {
                                self.bump();
                            }
                            None => {
                                return Err(self.error(line, col, "unterminated block comment"))
                            }
                        }
                    }
                }
                _ => return Ok(()),
            }
        }
    }

    fn string(&mut self, line: u32, col: u32) -> Result<Tok, LexError> {
        let mut out = String::new();
        loop {
            match self.bump() {
                Some(b'"') => return Ok(Tok::Str(out)),
                Some(b'\\') => match self.bump() {
                    Some(b'"') => out.push('"'),
                    Some(b'\\') => out.push('\\'),
                    Some(b'n') => out.push('\n'),
                    Some(b't') => out.push('\t'),
                    Some(b'r') => out.push('\r'),
                    Some(c) => {
                        return Err(self.error(
                            line,
                            col,
                            format!("unsupported escape '\\{}'", c as char),
                        ))
                    }
                    None => return Err(self.error(line, col, "unterminated string literal")),
                },
                Some(b'\n') | None => {
                    return Err(self.error(line, col, "unterminated string literal"))
                }
                Some(c) => out.push(c as char),
            }
        }
    }

    fn run(mut self) -> Result<Vec<Token>, LexError> {
        let mut tokens = Vec::new();
        loop {
            self.skip_trivia()?;
            let (line, col) = (self.line, self.col);
            let span = Span::new(line, col);
            let c = match self.peek() {
                None => return Ok(tokens),
                Some(c) => c,
            };
            let tok = match c {
                b'(' => {
                    self.bump();
                    Tok::LParen
                }
                b')' => {
                    self.bump();
                    Tok::RParen
                }
                b'{' => {
                    self.bump();
                    Tok::LBrace
                }
                b'}' => {
                    self.bump();
                    Tok::RBrace
                }
                b';' => {
                    self.bump();
                    Tok::Semi
                }
                b',' => {
                    self.bump();
                    Tok::Comma
                }
                b':' => {
                    self.bump();
                    Tok::Colon
                }
                b'+' => {
                    self.bump();
                    Tok::Plus
                }
                b'-' => {
                    self.bump();
                    Tok::Minus
                }
                b'.' => {
                    self.bump();
                    if self.peek() == Some(b'.') {
                        self.bump();
                        Tok::DotDot
                    } else {
                        Tok::Dot
                    }
                }
                b'=' => {
                    self.bump();
                    if self.peek() == Some(b'=') {
                        self.bump();
                        Tok::EqEq
                    } else {
                        Tok::Assign
                    }
                }
                b'!' => {
                    self.bump();
                    if self.peek() == Some(b'=') {
                        self.bump();
                        Tok::NotEq
                    } else {
                        return Err(self.error(line, col, "unexpected character '!'"));
                    }
                }
                b'<' => {
                    self.bump();
                    if self.peek() == Some(b'=') {
                        self.bump();
                        Tok::Le
                    } else {
                        Tok::Lt
                    }
                }
                b'>' => {
                    self.bump();
                    if self.peek() == Some(b'=') {
                        self.bump();
                        Tok::Ge
                    } else {
                        Tok::Gt
                    }
                }
                b'"' => {
                    self.bump();
                    self.string(line, col)?
                }
                b'0'..=b'9' => {
                    let mut text = String::new();
                    while let Some(c @ b'0'..=b'9') = self.peek() {
                        text.push(c as char);
                        self.bump();
                    }
                    match text.parse::<i64>() {
                        Ok(n) => Tok::Int(n),
                        Err(_) => {
                            return Err(self.error(line, col, format!("integer {text} overflows")))
                        }
                    }
                }
                c if c == b'_' || c.is_ascii_alphabetic() => {
                    let mut text = String::new();
                    while let Some(c) = self.peek() {
                        if c == b'_' || c.is_ascii_alphanumeric() {
                            text.push(c as char);
                            self.bump();
                        } else {
                            break;
                        }
                    }
                    match text.as_str() {
                        "package" => Tok::Package,
                        "import" => Tok::Import,
                        "MR" => Tok::Mr,
                        "for" => Tok::For,
                        "var" => Tok::Var,
                        "true" => Tok::True,
                        "false" => Tok::False,
                        _ => Tok::Ident(text),
                    }
                }
                other => {
                    return Err(self.error(
                        line,
                        col,
                        format!("unexpected character {:?}", other as char),
                    ))
                }
            };
            tokens.push(Token { tok, span });
        }
    }
}

/// Tokenizes a source text, reporting the first lexical error with its
/// 1-based line and column.
pub fn tokenize(src: &str) -> Result<Vec<Token>, LexError> {
    Lexer::new(src).run()
}
