//! Minimal arithmetic expressions over named coordinates.
//!
//! Grammar (`^` is right-associative and binds tighter than unary minus):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' unary)?
//! atom   := number | ident | ident '(' expr ')' | '(' expr ')'
//! ```
//!
//! Functions: `exp`, `log`, `sqrt`. The constant `pi` is predefined.

use std::fmt;

use crate::error::{FbstError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Log,
    Sqrt,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    /// Parses `src`, resolving identifiers against `names` (coordinate order).
    pub fn parse(src: &str, names: &[String]) -> Result<Expr> {
        let mut p = Parser {
            tokens: tokenize(src)?,
            pos: 0,
            names,
        };
        let e = p.expr()?;
        if let Some(tok) = p.tokens.get(p.pos) {
            return Err(FbstError::Parse {
                position: tok.offset,
                message: format!("unexpected `{}`", tok.kind),
            });
        }
        Ok(e)
    }

    pub fn eval(&self, theta: &[f64]) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Var(i) => theta[*i],
            Expr::Neg(a) => -a.eval(theta),
            Expr::Add(a, b) => a.eval(theta) + b.eval(theta),
            Expr::Sub(a, b) => a.eval(theta) - b.eval(theta),
            Expr::Mul(a, b) => a.eval(theta) * b.eval(theta),
            Expr::Div(a, b) => a.eval(theta) / b.eval(theta),
            Expr::Pow(a, b) => a.eval(theta).powf(b.eval(theta)),
            Expr::Call(f, a) => {
                let x = a.eval(theta);
                match f {
                    Func::Exp => x.exp(),
                    Func::Log => {
                        if x > 0.0 {
                            x.ln()
                        } else if x == 0.0 {
                            f64::NEG_INFINITY
                        } else {
                            f64::NAN
                        }
                    }
                    Func::Sqrt => x.sqrt(),
                }
            }
        }
    }

    /// If the expression is affine in the coordinates, returns `(a, b)` with
    /// `expr(θ) = a·θ + b` exactly.
    pub fn affine_form(&self, dim: usize) -> Option<(Vec<f64>, f64)> {
        match self {
            Expr::Num(v) => Some((vec![0.0; dim], *v)),
            Expr::Var(i) => {
                let mut a = vec![0.0; dim];
                a[*i] = 1.0;
                Some((a, 0.0))
            }
            Expr::Neg(e) => e.affine_form(dim).map(|(a, b)| scale(a, b, -1.0)),
            Expr::Add(l, r) | Expr::Sub(l, r) => {
                let (a1, b1) = l.affine_form(dim)?;
                let (a2, b2) = r.affine_form(dim)?;
                let sign = if matches!(self, Expr::Add(..)) { 1.0 } else { -1.0 };
                let a = a1.iter().zip(&a2).map(|(x, y)| x + sign * y).collect();
                Some((a, b1 + sign * b2))
            }
            Expr::Mul(l, r) => {
                let (a1, b1) = l.affine_form(dim)?;
                let (a2, b2) = r.affine_form(dim)?;
                if is_const(&a1) {
                    Some(scale(a2, b2, b1))
                } else if is_const(&a2) {
                    Some(scale(a1, b1, b2))
                } else {
                    None
                }
            }
            Expr::Div(l, r) => {
                let (a1, b1) = l.affine_form(dim)?;
                let (a2, b2) = r.affine_form(dim)?;
                if is_const(&a2) && b2 != 0.0 {
                    Some(scale(a1, b1, 1.0 / b2))
                } else {
                    None
                }
            }
            Expr::Pow(l, r) => {
                let (a1, b1) = l.affine_form(dim)?;
                let (a2, b2) = r.affine_form(dim)?;
                if !is_const(&a2) {
                    return None;
                }
                if b2 == 1.0 {
                    Some((a1, b1))
                } else if is_const(&a1) {
                    Some((a1, b1.powf(b2)))
                } else {
                    None
                }
            }
            Expr::Call(f, e) => {
                let (a, b) = e.affine_form(dim)?;
                if !is_const(&a) {
                    return None;
                }
                let v = Expr::Call(*f, Box::new(Expr::Num(b))).eval(&[]);
                Some((a, v))
            }
        }
    }
}

fn is_const(a: &[f64]) -> bool {
    a.iter().all(|&x| x == 0.0)
}

fn scale(a: Vec<f64>, b: f64, k: f64) -> (Vec<f64>, f64) {
    (a.into_iter().map(|x| x * k).collect(), b * k)
}

#[derive(Debug, Clone, PartialEq)]
enum TokKind {
    Num(f64),
    Ident(String),
    Op(char),
}

impl fmt::Display for TokKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokKind::Num(v) => write!(f, "{v}"),
            TokKind::Ident(s) => write!(f, "{s}"),
            TokKind::Op(c) => write!(f, "{c}"),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokKind,
    offset: usize,
}

fn tokenize(src: &str) -> Result<Vec<Token>> {
    let mut out = Vec::new();
    let mut chars = src.char_indices().peekable();
    while let Some(&(i, c)) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            let mut end = i;
            let mut prev = ' ';
            while let Some(&(j, d)) = chars.peek() {
                let exp_sign = (d == '+' || d == '-') && (prev == 'e' || prev == 'E');
                if d.is_ascii_digit() || d == '.' || d == 'e' || d == 'E' || exp_sign {
                    end = j + d.len_utf8();
                    prev = d;
                    chars.next();
                } else {
                    break;
                }
            }
            let text = &src[start..end];
            let v: f64 = text.parse().map_err(|_| FbstError::Parse {
                position: start,
                message: format!("bad number `{text}`"),
            })?;
            out.push(Token {
                kind: TokKind::Num(v),
                offset: start,
            });
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            let mut end = i;
            while let Some(&(j, d)) = chars.peek() {
                if d.is_alphanumeric() || d == '_' {
                    end = j + d.len_utf8();
                    chars.next();
                } else {
                    break;
                }
            }
            out.push(Token {
                kind: TokKind::Ident(src[start..end].to_string()),
                offset: start,
            });
        } else {
            let op = match c {
                '\u{2212}' => '-',
                '+' | '-' | '*' | '/' | '^' | '(' | ')' => c,
                _ => {
                    return Err(FbstError::Parse {
                        position: i,
                        message: format!("unexpected character `{c}`"),
                    })
                }
            };
            chars.next();
            out.push(Token {
                kind: TokKind::Op(op),
                offset: i,
            });
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    names: &'a [String],
}

impl Parser<'_> {
    fn peek_op(&self) -> Option<char> {
        match self.tokens.get(self.pos) {
            Some(Token {
                kind: TokKind::Op(c),
                ..
            }) => Some(*c),
            _ => None,
        }
    }

    fn offset(&self) -> usize {
        self.tokens
            .get(self.pos)
            .map(|t| t.offset)
            .unwrap_or_else(|| self.tokens.last().map_or(0, |t| t.offset + 1))
    }

    fn expect(&mut self, op: char) -> Result<()> {
        if self.peek_op() == Some(op) {
            self.pos += 1;
            Ok(())
        } else {
            Err(FbstError::Parse {
                position: self.offset(),
                message: format!("expected `{op}`"),
            })
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        while let Some(op @ ('+' | '-')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if op == '+' {
                Expr::Add(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Sub(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while let Some(op @ ('*' | '/')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = if op == '*' {
                Expr::Mul(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Div(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.peek_op() == Some('-') {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.peek_op() == Some('+') {
            self.pos += 1;
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.peek_op() == Some('^') {
            self.pos += 1;
            let exponent = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        let offset = self.offset();
        let tok = self.tokens.get(self.pos).cloned().ok_or(FbstError::Parse {
            position: offset,
            message: "unexpected end of expression".into(),
        })?;
        self.pos += 1;
        match tok.kind {
            TokKind::Num(v) => Ok(Expr::Num(v)),
            TokKind::Op('(') => {
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            TokKind::Ident(name) => {
                if self.peek_op() == Some('(') {
                    let func = match name.as_str() {
                        "exp" => Func::Exp,
                        "log" => Func::Log,
                        "sqrt" => Func::Sqrt,
                        _ => {
                            return Err(FbstError::Parse {
                                position: tok.offset,
                                message: format!("unknown function `{name}`"),
                            })
                        }
                    };
                    self.pos += 1;
                    let arg = self.expr()?;
                    self.expect(')')?;
                    return Ok(Expr::Call(func, Box::new(arg)));
                }
                if let Some(i) = self.names.iter().position(|n| *n == name) {
                    Ok(Expr::Var(i))
                } else if name == "pi" {
                    Ok(Expr::Num(std::f64::consts::PI))
                } else {
                    Err(FbstError::Parse {
                        position: tok.offset,
                        message: format!("unknown identifier `{name}`"),
                    })
                }
            }
            TokKind::Op(c) => Err(FbstError::Parse {
                position: tok.offset,
                message: format!("unexpected `{c}`"),
            }),
        }
    }
}
