//! Hand-rolled lexer and precedence-climbing parser.

use super::{BinOp, Func, Node};
use std::sync::Arc;

/// Positioned parse failure. Lines and columns are 1-based.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("syntax error at {line}:{column}: expected {expected}")]
pub struct SyntaxError {
    pub line: u32,
    pub column: u32,
    pub expected: String,
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
    End,
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: u32,
    column: u32,
}

fn lex(source: &str) -> Result<Vec<Spanned>, SyntaxError> {
    let mut out = Vec::new();
    let mut line = 1u32;
    let mut column = 1u32;
    let mut chars = source.chars().peekable();
    while let Some(&c) = chars.peek() {
        let (tline, tcol) = (line, column);
        let mut bump = |chars: &mut std::iter::Peekable<std::str::Chars>| {
            let c = chars.next().unwrap();
            if c == '\n' {
                line += 1;
                column = 1;
            } else {
                column += 1;
            }
            c
        };
        match c {
            ' ' | '\t' | '\r' | '\n' => {
                bump(&mut chars);
            }
            '+' | '-' | '*' | '/' | '^' | '(' | ')' => {
                bump(&mut chars);
                let tok = match c {
                    '+' => Tok::Plus,
                    '-' => Tok::Minus,
                    '*' => Tok::Star,
                    '/' => Tok::Slash,
                    '^' => Tok::Caret,
                    '(' => Tok::LParen,
                    _ => Tok::RParen,
                };
                out.push(Spanned {
                    tok,
                    line: tline,
                    column: tcol,
                });
            }
            '0'..='9' | '.' => {
                let mut text = String::new();
                while let Some(&d) = chars.peek() {
                    if d.is_ascii_digit() || d == '.' {
                        text.push(bump(&mut chars));
                    } else if (d == 'e' || d == 'E')
                        && !text.is_empty()
                        && !text.ends_with('e')
                        && !text.ends_with('E')
                    {
                        text.push(bump(&mut chars));
                        if let Some(&s) = chars.peek() {
                            if s == '+' || s == '-' {
                                text.push(bump(&mut chars));
                            }
                        }
                    } else {
                        break;
                    }
                }
                let value: f64 = text.parse().map_err(|_| SyntaxError {
                    line: tline,
                    column: tcol,
                    expected: "a numeric literal".into(),
                })?;
                out.push(Spanned {
                    tok: Tok::Num(value),
                    line: tline,
                    column: tcol,
                });
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut text = String::new();
                while let Some(&d) = chars.peek() {
                    if d.is_ascii_alphanumeric() || d == '_' {
                        text.push(bump(&mut chars));
                    } else {
                        break;
                    }
                }
                out.push(Spanned {
                    tok: Tok::Ident(text),
                    line: tline,
                    column: tcol,
                });
            }
            other => {
                return Err(SyntaxError {
                    line: tline,
                    column: tcol,
                    expected: format!("a token (found {other:?})"),
                })
            }
        }
    }
    out.push(Spanned {
        tok: Tok::End,
        line,
        column,
    });
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<Spanned>,
    pos: usize,
    symbols: &'a Arc<Vec<String>>,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &Spanned {
        &self.toks[self.pos]
    }

    fn advance(&mut self) -> Spanned {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &str) -> SyntaxError {
        let t = self.peek();
        SyntaxError {
            line: t.line,
            column: t.column,
            expected: expected.into(),
        }
    }

    // Precedence climbing: level 0 = + -, level 1 = * /, level 2 = ^ (right).
    fn expression(&mut self, min_level: u8) -> Result<Node, SyntaxError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek().tok {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                Tok::Caret => BinOp::Pow,
                _ => break,
            };
            let level = match op {
                BinOp::Add | BinOp::Sub => 0,
                BinOp::Mul | BinOp::Div => 1,
                BinOp::Pow => 2,
            };
            if level < min_level {
                break;
            }
            self.advance();
            // right-associative ^ re-enters at the same level
            let rhs = self.expression(if op == BinOp::Pow { level } else { level + 1 })?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node, SyntaxError> {
        if self.peek().tok == Tok::Minus {
            self.advance();
            // unary minus binds looser than ^: -x^2 = -(x^2)
            let inner = self.expression(2)?;
            return Ok(Node::Neg(Box::new(inner)));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Node, SyntaxError> {
        match self.peek().tok.clone() {
            Tok::Num(v) => {
                self.advance();
                Ok(Node::Num(v))
            }
            Tok::LParen => {
                self.advance();
                let inner = self.expression(0)?;
                if self.peek().tok != Tok::RParen {
                    return Err(self.error("')'"));
                }
                self.advance();
                Ok(inner)
            }
            Tok::Ident(name) => {
                self.advance();
                if self.peek().tok == Tok::LParen {
                    let func = Func::from_name(&name).ok_or_else(|| SyntaxError {
                        line: self.peek().line,
                        column: self.peek().column,
                        expected: format!("a known function (found {name:?})"),
                    })?;
                    self.advance();
                    let arg = self.expression(0)?;
                    if self.peek().tok != Tok::RParen {
                        return Err(self.error("')'"));
                    }
                    self.advance();
                    Ok(Node::Call(func, Box::new(arg)))
                } else {
                    let idx = self
                        .symbols
                        .iter()
                        .position(|s| *s == name)
                        .ok_or_else(|| SyntaxError {
                            line: self.peek().line,
                            column: self.peek().column,
                            expected: format!("a declared symbol (found {name:?})"),
                        })?;
                    Ok(Node::Sym(idx))
                }
            }
            _ => Err(self.error("a number, symbol, function call, or '('")),
        }
    }
}

pub(super) fn parse(source: &str, symbols: &Arc<Vec<String>>) -> Result<Node, SyntaxError> {
    let toks = lex(source)?;
    let mut parser = Parser {
        toks,
        pos: 0,
        symbols,
    };
    let root = parser.expression(0)?;
    if parser.peek().tok != Tok::End {
        return Err(parser.error("end of input"));
    }
    Ok(root)
}
