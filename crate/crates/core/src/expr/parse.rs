//! Recursive-descent parser.
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' INT)?
//! primary := NUMBER | IDENT | IDENT '(' args ')' | '(' expr ')'
//! ```

use std::collections::HashSet;
use std::fmt;

use thiserror::Error;

use super::{Expr, FuncKind};

const FUNCTIONS: [&str; 6] = ["exp", "ln", "sin", "cos", "sqrt", "powr"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseErrorKind {
    Lexical,
    UnknownIdentifier,
    Arity,
    Syntax,
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ParseErrorKind::Lexical => "lexical error",
            ParseErrorKind::UnknownIdentifier => "unknown identifier",
            ParseErrorKind::Arity => "arity error",
            ParseErrorKind::Syntax => "syntax error",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{kind} at byte {offset}: {message}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub offset: usize,
    pub message: String,
}

impl ParseError {
    fn new(kind: ParseErrorKind, offset: usize, message: impl Into<String>) -> Self {
        Self {
            kind,
            offset,
            message: message.into(),
        }
    }
}

/// Name of the independent variable and, optionally, the closed set of
/// identifiers the text may reference.
#[derive(Debug, Clone)]
pub struct ParseContext {
    pub indep: String,
    pub known: Option<HashSet<String>>,
}

impl Default for ParseContext {
    fn default() -> Self {
        Self {
            indep: "v".to_string(),
            known: None,
        }
    }
}

impl ParseContext {
    pub fn new(indep: &str) -> Self {
        Self {
            indep: indep.to_string(),
            known: None,
        }
    }

    pub fn with_known<I, S>(mut self, names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.known = Some(names.into_iter().map(Into::into).collect());
        self
    }
}

/// Parses with independent variable `v` and no identifier restrictions.
pub fn parse(text: &str) -> Result<Expr, ParseError> {
    parse_with(text, &ParseContext::default())
}

pub fn parse_with(text: &str, ctx: &ParseContext) -> Result<Expr, ParseError> {
    let tokens = lex(text)?;
    let mut p = Parser {
        tokens,
        pos: 0,
        ctx,
        end: text.len(),
    };
    let e = p.expr()?;
    if let Some(t) = p.peek() {
        return Err(ParseError::new(
            ParseErrorKind::Syntax,
            t.offset,
            format!("unexpected {}", t.tok.describe()),
        ));
    }
    Ok(e)
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num { value: f64, integer: Option<u32> },
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num { value, .. } => format!("number {value}"),
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Caret => "`^`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    offset: usize,
}

fn lex(text: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let simple = match c {
            b'+' => Some(Tok::Plus),
            b'-' => Some(Tok::Minus),
            b'*' => Some(Tok::Star),
            b'/' => Some(Tok::Slash),
            b'^' => Some(Tok::Caret),
            b'(' => Some(Tok::LParen),
            b')' => Some(Tok::RParen),
            b',' => Some(Tok::Comma),
            _ => None,
        };
        if let Some(tok) = simple {
            out.push(Token { tok, offset: start });
            i += 1;
            continue;
        }
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == b'.' {
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            let mut integer = true;
            if i < bytes.len() && bytes[i] == b'.' {
                integer = false;
                i += 1;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    integer = false;
                    i = j;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let lit = &text[start..i];
            let value: f64 = lit
                .parse()
                .map_err(|_| ParseError::new(ParseErrorKind::Lexical, start, format!("malformed number `{lit}`")))?;
            let integer = if integer { lit.parse::<u32>().ok() } else { None };
            out.push(Token {
                tok: Tok::Num { value, integer },
                offset: start,
            });
        } else if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(Token {
                tok: Tok::Ident(text[start..i].to_string()),
                offset: start,
            });
        } else {
            let ch = text[start..].chars().next().unwrap_or('?');
            return Err(ParseError::new(
                ParseErrorKind::Lexical,
                start,
                format!("unexpected character `{ch}`"),
            ));
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    ctx: &'a ParseContext,
    end: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn peek_tok(&self) -> Option<&Tok> {
        self.peek().map(|t| &t.tok)
    }

    fn offset(&self) -> usize {
        self.peek().map_or(self.end, |t| t.offset)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn expect(&mut self, want: Tok) -> Result<(), ParseError> {
        let offset = self.offset();
        match self.next() {
            Some(t) if t.tok == want => Ok(()),
            Some(t) => Err(ParseError::new(
                ParseErrorKind::Syntax,
                offset,
                format!("expected {}, found {}", want.describe(), t.tok.describe()),
            )),
            None => Err(ParseError::new(
                ParseErrorKind::Syntax,
                offset,
                format!("expected {}, found end of input", want.describe()),
            )),
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek_tok() {
                Some(Tok::Plus) => {
                    self.pos += 1;
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(Tok::Minus) => {
                    self.pos += 1;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek_tok() {
                Some(Tok::Star) => {
                    self.pos += 1;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Some(Tok::Slash) => {
                    self.pos += 1;
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.peek_tok() == Some(&Tok::Minus) {
            self.pos += 1;
            // A literal directly after the sign folds into a negative constant.
            if let Some(Tok::Num { value, .. }) = self.peek_tok().cloned() {
                if self.tokens.get(self.pos + 1).map(|t| &t.tok) != Some(&Tok::Caret) {
                    self.pos += 1;
                    return Ok(Expr::Const(-value));
                }
            }
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if self.peek_tok() == Some(&Tok::Caret) {
            self.pos += 1;
            let offset = self.offset();
            match self.next().map(|t| t.tok) {
                Some(Tok::Num { integer: Some(n), .. }) => return Ok(Expr::Pow(Box::new(base), n)),
                _ => {
                    return Err(ParseError::new(
                        ParseErrorKind::Syntax,
                        offset,
                        "exponent after `^` must be a non-negative integer literal",
                    ))
                }
            }
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let offset = self.offset();
        let Some(token) = self.next() else {
            return Err(ParseError::new(
                ParseErrorKind::Syntax,
                offset,
                "unexpected end of input",
            ));
        };
        match token.tok {
            Tok::Num { value, .. } => Ok(Expr::Const(value)),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if self.peek_tok() == Some(&Tok::LParen) {
                    self.call(&name, offset)
                } else if FUNCTIONS.contains(&name.as_str()) {
                    Err(ParseError::new(
                        ParseErrorKind::Arity,
                        offset,
                        format!("function `{name}` used without arguments"),
                    ))
                } else if name == self.ctx.indep {
                    Ok(Expr::Indep)
                } else {
                    if let Some(known) = &self.ctx.known {
                        if !known.contains(&name) {
                            return Err(ParseError::new(
                                ParseErrorKind::UnknownIdentifier,
                                offset,
                                format!("`{name}` is not declared"),
                            ));
                        }
                    }
                    Ok(Expr::Var(name))
                }
            }
            other => Err(ParseError::new(
                ParseErrorKind::Syntax,
                offset,
                format!("unexpected {}", other.describe()),
            )),
        }
    }

    fn call(&mut self, name: &str, offset: usize) -> Result<Expr, ParseError> {
        if !FUNCTIONS.contains(&name) {
            return Err(ParseError::new(
                ParseErrorKind::UnknownIdentifier,
                offset,
                format!("unknown function `{name}`"),
            ));
        }
        self.expect(Tok::LParen)?;
        let mut args = vec![(self.offset(), self.expr()?)];
        while self.peek_tok() == Some(&Tok::Comma) {
            self.pos += 1;
            args.push((self.offset(), self.expr()?));
        }
        self.expect(Tok::RParen)?;

        let want = if name == "powr" { 2 } else { 1 };
        if args.len() != want {
            return Err(ParseError::new(
                ParseErrorKind::Arity,
                offset,
                format!("`{name}` takes {want} argument(s), got {}", args.len()),
            ));
        }
        let mut args = args.into_iter();
        let (_, arg) = args.next().unwrap();
        let kind = match name {
            "exp" => FuncKind::Exp,
            "ln" => FuncKind::Ln,
            "sin" => FuncKind::Sin,
            "cos" => FuncKind::Cos,
            "sqrt" => FuncKind::Sqrt,
            _ => {
                let (at, exponent) = args.next().unwrap();
                let r = exponent
                    .const_value()
                    .filter(|r| r.is_finite())
                    .ok_or_else(|| ParseError::new(ParseErrorKind::Syntax, at, "powr exponent must be a constant"))?;
                FuncKind::Powr(r)
            }
        };
        Ok(Expr::Func(kind, Box::new(arg)))
    }
}
