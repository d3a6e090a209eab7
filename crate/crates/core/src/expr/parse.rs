//! Text form of expressions.
//!
//! Grammar, lowest precedence first:
//!
//! ```text
//! sum     := product (('+' | '-') product)*
//! product := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := atom ('^' INTEGER)*
//! atom    := NUMBER | 't' | FUNC '(' sum ')' | '(' sum ')'
//! FUNC    := cos | sin | log | exp
//! ```
//!
//! Unary minus folds into a literal (`-2` is `Const(-2)`); on anything else it
//! becomes multiplication by `-1`. The printer emits the minimal parentheses
//! needed for `parse(print(e)) == e`.

use std::fmt;

use thiserror::Error;

use super::{BinaryOp, Expr, UnaryOp, MAX_EXPONENT, MIN_EXPONENT};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("{message} at position {position}")]
    Syntax { position: usize, message: String },
    #[error("exponent at position {position} must be an integer literal")]
    ExponentNotInteger { position: usize },
    #[error("exponent {value} at position {position} outside {MIN_EXPONENT}..={MAX_EXPONENT}")]
    ExponentOutOfRange { position: usize, value: String },
    #[error("constant at position {position} is not finite")]
    NonFiniteConstant { position: usize },
}

impl ParseError {
    pub fn position(&self) -> usize {
        match self {
            ParseError::Syntax { position, .. }
            | ParseError::ExponentNotInteger { position }
            | ParseError::ExponentOutOfRange { position, .. }
            | ParseError::NonFiniteConstant { position } => *position,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Token {
    Number(String),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    End,
}

fn tokenize(text: &str) -> Result<Vec<(Token, usize)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'+' | b'-' | b'*' | b'/' | b'^' => {
                out.push((Token::Op(c as char), start));
                i += 1;
            }
            b'(' => {
                out.push((Token::LParen, start));
                i += 1;
            }
            b')' => {
                out.push((Token::RParen, start));
                i += 1;
            }
            b'0'..=b'9' | b'.' => {
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                out.push((Token::Number(text[start..i].to_string()), start));
            }
            c if c.is_ascii_alphabetic() => {
                while i < bytes.len() && bytes[i].is_ascii_alphanumeric() {
                    i += 1;
                }
                out.push((Token::Ident(text[start..i].to_string()), start));
            }
            _ => {
                let ch = text[start..].chars().next().unwrap_or('?');
                return Err(ParseError::Syntax {
                    position: start,
                    message: format!("unexpected character `{ch}`"),
                });
            }
        }
    }
    out.push((Token::End, text.len()));
    Ok(out)
}

struct Parser {
    tokens: Vec<(Token, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos].0
    }

    fn position(&self) -> usize {
        self.tokens[self.pos].1
    }

    fn advance(&mut self) -> (Token, usize) {
        let tok = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        tok
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError::Syntax { position: self.position(), message: message.into() })
    }

    fn sum(&mut self) -> Result<Expr, ParseError> {
        let mut left = self.product()?;
        loop {
            let op = match self.peek() {
                Token::Op('+') => BinaryOp::Add,
                Token::Op('-') => BinaryOp::Sub,
                _ => return Ok(left),
            };
            self.advance();
            let right = self.product()?;
            left = Expr::binary(op, left, right);
        }
    }

    fn product(&mut self) -> Result<Expr, ParseError> {
        let mut left = self.unary()?;
        loop {
            let op = match self.peek() {
                Token::Op('*') => BinaryOp::Mul,
                Token::Op('/') => BinaryOp::Div,
                _ => return Ok(left),
            };
            self.advance();
            let right = self.unary()?;
            left = Expr::binary(op, left, right);
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.peek() == &Token::Op('-') {
            self.advance();
            return Ok(match self.unary()? {
                Expr::Const(c) => Expr::Const(-c),
                other => Expr::mul(Expr::Const(-1.0), other),
            });
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let mut base = self.atom()?;
        while self.peek() == &Token::Op('^') {
            self.advance();
            let position = self.position();
            let text = match self.peek() {
                Token::Number(text) => text.clone(),
                _ => return Err(ParseError::ExponentNotInteger { position }),
            };
            if !text.bytes().all(|b| b.is_ascii_digit()) {
                return Err(ParseError::ExponentNotInteger { position });
            }
            let exponent = match text.parse::<u8>() {
                Ok(k) if (MIN_EXPONENT..=MAX_EXPONENT).contains(&k) => k,
                _ => return Err(ParseError::ExponentOutOfRange { position, value: text }),
            };
            self.advance();
            base = Expr::pow(base, exponent);
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let (token, position) = self.advance();
        match token {
            Token::Number(text) => {
                let value: f64 = text.parse().map_err(|_| ParseError::Syntax {
                    position,
                    message: format!("malformed number `{text}`"),
                })?;
                if !value.is_finite() {
                    return Err(ParseError::NonFiniteConstant { position });
                }
                Ok(Expr::Const(value))
            }
            Token::Ident(name) if name == "t" => Ok(Expr::Time),
            Token::Ident(name) => {
                let op = UnaryOp::from_name(&name).ok_or_else(|| ParseError::Syntax {
                    position,
                    message: format!("unknown identifier `{name}`"),
                })?;
                if self.peek() != &Token::LParen {
                    return self.error(format!("expected `(` after `{name}`"));
                }
                self.advance();
                let inner = self.sum()?;
                self.expect_close()?;
                Ok(Expr::unary(op, inner))
            }
            Token::LParen => {
                let inner = self.sum()?;
                self.expect_close()?;
                Ok(inner)
            }
            Token::End => Err(ParseError::Syntax { position, message: "unexpected end of input".into() }),
            Token::Op(c) => Err(ParseError::Syntax { position, message: format!("unexpected `{c}`") }),
            Token::RParen => Err(ParseError::Syntax { position, message: "unexpected `)`".into() }),
        }
    }

    fn expect_close(&mut self) -> Result<(), ParseError> {
        if self.peek() != &Token::RParen {
            return self.error("expected `)`");
        }
        self.advance();
        Ok(())
    }
}

pub fn parse(text: &str) -> Result<Expr, ParseError> {
    let mut parser = Parser { tokens: tokenize(text)?, pos: 0 };
    let expr = parser.sum()?;
    if parser.peek() != &Token::End {
        return parser.error("unexpected trailing input");
    }
    Ok(expr)
}

const PREC_SUM: u8 = 1;
const PREC_PRODUCT: u8 = 2;
const PREC_POWER: u8 = 4;
const PREC_ATOM: u8 = 5;

fn precedence(e: &Expr) -> u8 {
    match e {
        Expr::Binary(BinaryOp::Add | BinaryOp::Sub, ..) => PREC_SUM,
        Expr::Binary(BinaryOp::Mul | BinaryOp::Div, ..) => PREC_PRODUCT,
        Expr::Pow(..) => PREC_POWER,
        Expr::Const(_) | Expr::Time | Expr::Unary(..) => PREC_ATOM,
    }
}

/// Shortest text that parses back to exactly `c` (for `c >= 0`).
fn format_magnitude(c: f64) -> String {
    if c == 0.0 || (1e-4..1e16).contains(&c) {
        format!("{c}")
    } else {
        format!("{c:e}")
    }
}

fn write_child(e: &Expr, parens: bool, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if parens {
        f.write_str("(")?;
        write_expr(e, f)?;
        f.write_str(")")
    } else {
        write_expr(e, f)
    }
}

pub(super) fn write_expr(e: &Expr, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match e {
        Expr::Const(c) if c.is_sign_negative() => write!(f, "(-{})", format_magnitude(-c)),
        Expr::Const(c) => f.write_str(&format_magnitude(*c)),
        Expr::Time => f.write_str("t"),
        Expr::Unary(op, x) => {
            write!(f, "{}(", op.name())?;
            write_expr(x, f)?;
            f.write_str(")")
        }
        Expr::Pow(x, k) => {
            write_child(x, precedence(x) < PREC_ATOM, f)?;
            write!(f, "^{k}")
        }
        Expr::Binary(op, a, b) => {
            let p = precedence(e);
            write_child(a, precedence(a) < p, f)?;
            match op {
                BinaryOp::Add | BinaryOp::Sub => write!(f, " {} ", op.symbol())?,
                BinaryOp::Mul | BinaryOp::Div => write!(f, "{}", op.symbol())?,
            }
            write_child(b, precedence(b) <= p, f)
        }
    }
}
