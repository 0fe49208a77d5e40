//! Lexer and Pratt parser for the expression language.
//!
//! Grammar (documented in EBNF in `docs/grammar.md`):
//!
//! ```text
//! expr    = term { ("+" | "-") term }
//! term    = factor { ("*" | "/") factor }
//! factor  = "-" factor | power
//! power   = atom [ "^" factor ]          (right-associative)
//! atom    = number | ident | func "(" expr ")" | "(" expr ")"
//! ```
//!
//! with the twist that `^` binds tighter than unary minus, so `-x^2` is
//! `-(x^2)` and `x^-2` is legal. Identifiers outside `{t,x,v,u,z,s}` are
//! parameters; the function names `sin cos exp ln sqrt` are reserved.

use thiserror::Error;

use super::{BinOp, Func, Node, Var};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown function '{name}' at byte {offset}")]
    UnknownFunction { offset: usize, name: String },
}

impl ParseError {
    fn syntax(offset: usize, message: impl Into<String>) -> ParseError {
        ParseError::Syntax {
            offset,
            message: message.into(),
        }
    }

    /// Byte offset into the source where the error was detected.
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Syntax { offset, .. } | ParseError::UnknownFunction { offset, .. } => {
                *offset
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(n) => format!("number {n}"),
            Tok::Ident(s) => format!("identifier '{s}'"),
            Tok::Plus => "'+'".into(),
            Tok::Minus => "'-'".into(),
            Tok::Star => "'*'".into(),
            Tok::Slash => "'/'".into(),
            Tok::Caret => "'^'".into(),
            Tok::LParen => "'('".into(),
            Tok::RParen => "')'".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            src: src.as_bytes(),
            pos: 0,
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    /// Next token and its starting byte offset.
    fn next(&mut self) -> Result<(Tok, usize), ParseError> {
        self.skip_ws();
        let start = self.pos;
        if self.pos >= self.src.len() {
            return Ok((Tok::Eof, start));
        }
        let c = self.src[self.pos];
        let simple = match c {
            b'+' => Some(Tok::Plus),
            b'-' => Some(Tok::Minus),
            b'*' => Some(Tok::Star),
            b'/' => Some(Tok::Slash),
            b'^' => Some(Tok::Caret),
            b'(' => Some(Tok::LParen),
            b')' => Some(Tok::RParen),
            _ => None,
        };
        if let Some(tok) = simple {
            self.pos += 1;
            return Ok((tok, start));
        }
        if c.is_ascii_digit() || (c == b'.' && self.peek_digit(self.pos + 1)) {
            return self.lex_number(start);
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            while self.pos < self.src.len()
                && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
            {
                self.pos += 1;
            }
            let name = std::str::from_utf8(&self.src[start..self.pos])
                .expect("ascii identifier")
                .to_string();
            return Ok((Tok::Ident(name), start));
        }
        Err(ParseError::syntax(
            start,
            format!("unexpected character '{}'", char::from(c)),
        ))
    }

    fn peek_digit(&self, at: usize) -> bool {
        at < self.src.len() && self.src[at].is_ascii_digit()
    }

    fn lex_number(&mut self, start: usize) -> Result<(Tok, usize), ParseError> {
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_digit() || self.src[self.pos] == b'.')
        {
            self.pos += 1;
        }
        // exponent part only when it is unambiguously numeric: e/E followed
        // by digits or a signed digit ("2e3", "2e-3"); a bare "2e" leaves
        // "e" to lex as an identifier and fail as a stray token later
        if self.pos < self.src.len() && matches!(self.src[self.pos], b'e' | b'E') {
            let mut k = self.pos + 1;
            if k < self.src.len() && matches!(self.src[k], b'+' | b'-') {
                k += 1;
            }
            if k < self.src.len() && self.src[k].is_ascii_digit() {
                self.pos = k;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii number");
        let value: f64 = text
            .parse()
            .map_err(|_| ParseError::syntax(start, format!("invalid number literal '{text}'")))?;
        if !value.is_finite() {
            return Err(ParseError::syntax(
                start,
                format!("number literal '{text}' overflows"),
            ));
        }
        Ok((Tok::Num(value), start))
    }
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    at: usize,
}

// Binding powers. Caret's right power is below its left power (right
// associativity); unary minus sits between caret and the multiplicative
// level so that -x^2 = -(x^2) while -x*y = (-x)*y.
const NEG_RBP: u8 = 5;

fn infix_bp(tok: &Tok) -> Option<(BinOp, u8, u8)> {
    match tok {
        Tok::Plus => Some((BinOp::Add, 1, 2)),
        Tok::Minus => Some((BinOp::Sub, 1, 2)),
        Tok::Star => Some((BinOp::Mul, 3, 4)),
        Tok::Slash => Some((BinOp::Div, 3, 4)),
        Tok::Caret => Some((BinOp::Pow, 8, 7)),
        _ => None,
    }
}

impl Parser {
    fn peek(&self) -> &(Tok, usize) {
        &self.toks[self.at]
    }

    fn advance(&mut self) -> (Tok, usize) {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn expr(&mut self, min_bp: u8) -> Result<Node, ParseError> {
        let (tok, off) = self.advance();
        let mut lhs = match tok {
            Tok::Num(n) => Node::Num(n),
            Tok::Ident(name) => {
                if self.peek().0 == Tok::LParen {
                    let func = Func::from_name(&name)
                        .ok_or(ParseError::UnknownFunction { offset: off, name })?;
                    self.advance(); // consume '('
                    let arg = self.expr(0)?;
                    self.expect_rparen()?;
                    Node::Call(func, Box::new(arg))
                } else if let Some(var) = Var::from_name(&name) {
                    Node::Var(var)
                } else if Func::from_name(&name).is_some() {
                    return Err(ParseError::syntax(
                        off,
                        format!("function '{name}' needs parenthesized arguments"),
                    ));
                } else {
                    Node::Param(name)
                }
            }
            Tok::Minus => Node::Neg(Box::new(self.expr(NEG_RBP)?)),
            Tok::LParen => {
                let inner = self.expr(0)?;
                self.expect_rparen()?;
                inner
            }
            other => {
                return Err(ParseError::syntax(
                    off,
                    format!("expected an expression, found {}", other.describe()),
                ))
            }
        };
        while let Some((op, l_bp, r_bp)) = infix_bp(&self.peek().0) {
            if l_bp < min_bp {
                break;
            }
            self.advance();
            let rhs = self.expr(r_bp)?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        let (tok, off) = self.advance();
        if tok == Tok::RParen {
            Ok(())
        } else {
            Err(ParseError::syntax(
                off,
                format!("expected ')', found {}", tok.describe()),
            ))
        }
    }
}

pub(crate) fn parse(source: &str) -> Result<Node, ParseError> {
    let mut lexer = Lexer::new(source);
    let mut toks = Vec::new();
    loop {
        let (tok, off) = lexer.next()?;
        let done = tok == Tok::Eof;
        toks.push((tok, off));
        if done {
            break;
        }
    }
    let mut parser = Parser { toks, at: 0 };
    let node = parser.expr(0)?;
    let (trailing, off) = parser.peek();
    if *trailing != Tok::Eof {
        return Err(ParseError::syntax(
            *off,
            format!("unexpected {} after expression", trailing.describe()),
        ));
    }
    Ok(node)
}
