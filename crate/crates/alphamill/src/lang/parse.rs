//! Expression parser. Surface grammar (EBNF):
//!
//! ```text
//! expr  := term  (("+" | "-") term)*
//! term  := unary (("*" | "/") unary)*
//! unary := "-" unary | atom
//! atom  := IDENT "(" expr ("," expr)* ")" | IDENT | INTEGER | "(" expr ")"
//! IDENT := [a-z_][a-z0-9_]*
//! ```
//!
//! Infix `+ - * /` and unary `-` desugar to add/subtract/multiply/divide/neg.
//! Calls resolve against the catalog at parse time: integer arguments become
//! window parameters or literals depending on the slot, and arity and window
//! ranges are checked here. Field existence and domain agreement are left to
//! `validate`.

use thiserror::Error;

use super::catalog::{Op, Slot, WINDOW_MAX, WINDOW_MIN};
use super::AlphaExpr;

#[derive(Debug, Error, PartialEq)]
pub enum ParseError {
    #[error("syntax error at byte {pos}: {message}")]
    Syntax { pos: usize, message: String },
    #[error("unknown operator `{name}` at byte {pos}")]
    UnknownOperator { name: String, pos: usize },
    #[error("`{op}` expects {expected} arguments, found {found}")]
    Arity {
        op: String,
        expected: usize,
        found: usize,
        pos: usize,
    },
    #[error("window argument of `{op}` out of range: {value} (allowed {WINDOW_MIN}..={WINDOW_MAX})")]
    WindowOutOfRange { op: String, value: i64, pos: usize },
    #[error("bad parameter for `{op}`: {message}")]
    BadParameter {
        op: String,
        message: String,
        pos: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Ident(String),
    Int(i64),
    Plus,
    Minus,
    Star,
    Slash,
    LParen,
    RParen,
    Comma,
}

fn lex(text: &str) -> Result<Vec<(Token, usize)>, ParseError> {
    let bytes = text.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '+' => {
                tokens.push((Token::Plus, i));
                i += 1;
            }
            '-' => {
                tokens.push((Token::Minus, i));
                i += 1;
            }
            '*' => {
                tokens.push((Token::Star, i));
                i += 1;
            }
            '/' => {
                tokens.push((Token::Slash, i));
                i += 1;
            }
            '(' => {
                tokens.push((Token::LParen, i));
                i += 1;
            }
            ')' => {
                tokens.push((Token::RParen, i));
                i += 1;
            }
            ',' => {
                tokens.push((Token::Comma, i));
                i += 1;
            }
            'a'..='z' | '_' => {
                let start = i;
                while i < bytes.len()
                    && matches!(bytes[i] as char, 'a'..='z' | '0'..='9' | '_')
                {
                    i += 1;
                }
                tokens.push((Token::Ident(text[start..i].to_string()), start));
            }
            '0'..='9' => {
                let start = i;
                while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                    i += 1;
                }
                let value: i64 =
                    text[start..i]
                        .parse()
                        .map_err(|_| ParseError::Syntax {
                            pos: start,
                            message: "integer too large".to_string(),
                        })?;
                tokens.push((Token::Int(value), start));
            }
            other => {
                return Err(ParseError::Syntax {
                    pos: i,
                    message: format!("unexpected character `{other}`"),
                })
            }
        }
    }
    Ok(tokens)
}

/// Raw tree before slot resolution: integers and negations are still
/// undifferentiated.
#[derive(Debug, Clone)]
enum Raw {
    Ident(String),
    Int(i64, usize),
    Neg(Box<Raw>, usize),
    Call(String, Vec<Raw>, usize),
    Infix(Op, Box<Raw>, Box<Raw>),
}

struct Parser {
    tokens: Vec<(Token, usize)>,
    pos: usize,
    len: usize,
}

impl Parser {
    fn peek(&self) -> Option<&(Token, usize)> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<(Token, usize)> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn expect(&mut self, want: Token, what: &str) -> Result<(), ParseError> {
        match self.next() {
            Some((tok, _)) if tok == want => Ok(()),
            Some((_, p)) => Err(ParseError::Syntax {
                pos: p,
                message: format!("expected {what}"),
            }),
            None => Err(ParseError::Syntax {
                pos: self.len,
                message: format!("expected {what}, found end of input"),
            }),
        }
    }

    fn expr(&mut self) -> Result<Raw, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some((Token::Plus, _)) => Op::Add,
                Some((Token::Minus, _)) => Op::Subtract,
                _ => break,
            };
            self.next();
            let rhs = self.term()?;
            lhs = Raw::Infix(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Raw, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some((Token::Star, _)) => Op::Multiply,
                Some((Token::Slash, _)) => Op::Divide,
                _ => break,
            };
            self.next();
            let rhs = self.unary()?;
            lhs = Raw::Infix(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Raw, ParseError> {
        if let Some((Token::Minus, p)) = self.peek().cloned() {
            self.next();
            let inner = self.unary()?;
            return Ok(Raw::Neg(Box::new(inner), p));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Raw, ParseError> {
        match self.next() {
            Some((Token::Ident(name), p)) => {
                if let Some((Token::LParen, _)) = self.peek() {
                    self.next();
                    let mut args = Vec::new();
                    if let Some((Token::RParen, _)) = self.peek() {
                        self.next();
                        return Ok(Raw::Call(name, args, p));
                    }
                    loop {
                        args.push(self.expr()?);
                        match self.next() {
                            Some((Token::Comma, _)) => continue,
                            Some((Token::RParen, _)) => break,
                            Some((_, q)) => {
                                return Err(ParseError::Syntax {
                                    pos: q,
                                    message: "expected `,` or `)`".to_string(),
                                })
                            }
                            None => {
                                return Err(ParseError::Syntax {
                                    pos: self.len,
                                    message: "unclosed call".to_string(),
                                })
                            }
                        }
                    }
                    Ok(Raw::Call(name, args, p))
                } else {
                    Ok(Raw::Ident(name))
                }
            }
            Some((Token::Int(v), p)) => Ok(Raw::Int(v, p)),
            Some((Token::LParen, _)) => {
                let inner = self.expr()?;
                self.expect(Token::RParen, "`)`")?;
                Ok(inner)
            }
            Some((_, p)) => Err(ParseError::Syntax {
                pos: p,
                message: "expected expression".to_string(),
            }),
            None => Err(ParseError::Syntax {
                pos: self.len,
                message: "expected expression, found end of input".to_string(),
            }),
        }
    }
}

/// Integer value of a raw node, looking through unary minus. None for
/// anything that is not a literal integer.
fn raw_int(raw: &Raw) -> Option<(i64, usize)> {
    match raw {
        Raw::Int(v, p) => Some((*v, *p)),
        Raw::Neg(inner, p) => raw_int(inner).map(|(v, _)| (-v, *p)),
        _ => None,
    }
}

fn resolve(raw: Raw) -> Result<AlphaExpr, ParseError> {
    match raw {
        Raw::Ident(name) => Ok(AlphaExpr::Field(name)),
        Raw::Int(v, _) => Ok(AlphaExpr::Literal(v as f64)),
        Raw::Neg(inner, _) => match raw_int(&inner) {
            Some((v, _)) => Ok(AlphaExpr::Literal(-(v as f64))),
            None => Ok(AlphaExpr::Call(Op::Neg, vec![resolve(*inner)?])),
        },
        Raw::Infix(op, lhs, rhs) => Ok(AlphaExpr::Call(
            op,
            vec![resolve(*lhs)?, resolve(*rhs)?],
        )),
        Raw::Call(name, args, pos) => {
            let op = Op::from_name(&name).ok_or(ParseError::UnknownOperator {
                name: name.clone(),
                pos,
            })?;
            let slots = op.signature().slots;
            if args.len() != slots.len() {
                return Err(ParseError::Arity {
                    op: name,
                    expected: slots.len(),
                    found: args.len(),
                    pos,
                });
            }
            let mut resolved = Vec::with_capacity(args.len());
            for (arg, slot) in args.into_iter().zip(slots) {
                match slot {
                    Slot::Window => {
                        let (value, p) =
                            raw_int(&arg).ok_or_else(|| ParseError::BadParameter {
                                op: name.clone(),
                                message: "window argument must be an integer literal".to_string(),
                                pos,
                            })?;
                        if value < i64::from(WINDOW_MIN) || value > i64::from(WINDOW_MAX) {
                            return Err(ParseError::WindowOutOfRange {
                                op: name,
                                value,
                                pos: p,
                            });
                        }
                        resolved.push(AlphaExpr::Window(value as u32));
                    }
                    Slot::Const => {
                        let (value, _) =
                            raw_int(&arg).ok_or_else(|| ParseError::BadParameter {
                                op: name.clone(),
                                message: "parameter must be an integer literal".to_string(),
                                pos,
                            })?;
                        resolved.push(AlphaExpr::Literal(value as f64));
                    }
                    Slot::Series | Slot::Bool | Slot::SeriesOrConst => {
                        resolved.push(resolve(arg)?)
                    }
                }
            }
            Ok(AlphaExpr::Call(op, resolved))
        }
    }
}

/// Parse expression text into an AST resolved against the catalog.
pub fn parse(text: &str) -> Result<AlphaExpr, ParseError> {
    let tokens = lex(text)?;
    if tokens.is_empty() {
        return Err(ParseError::Syntax {
            pos: 0,
            message: "empty input".to_string(),
        });
    }
    let mut parser = Parser {
        tokens,
        pos: 0,
        len: text.len(),
    };
    let raw = parser.expr()?;
    if let Some((_, p)) = parser.peek() {
        return Err(ParseError::Syntax {
            pos: *p,
            message: "trailing input".to_string(),
        });
    }
    resolve(raw)
}
