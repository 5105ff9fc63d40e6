//! Prefix (s-expression) syntax for fields.
//!
//! ```text
//! expr := number | pi | name | (var name)
//!       | (+ expr...) | (* expr...) | (- expr) | (- expr expr)
//!       | (/ expr expr [radius]) | (^ expr exponent)
//!       | (sin expr) | (cos expr) | (exp expr) | (digamma expr)
//! ```
//!
//! Exponents and division radii must be variable-free.

use super::{Expr, Tape};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Token<'a> {
    Open,
    Close,
    Atom(&'a str),
}

fn tokenize(src: &str) -> Vec<(usize, Token<'_>)> {
    let mut out = Vec::new();
    let bytes = src.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'(' => {
                out.push((i, Token::Open));
                i += 1;
            }
            b')' => {
                out.push((i, Token::Close));
                i += 1;
            }
            c if c.is_ascii_whitespace() => i += 1,
            _ => {
                let start = i;
                while i < bytes.len()
                    && !bytes[i].is_ascii_whitespace()
                    && bytes[i] != b'('
                    && bytes[i] != b')'
                {
                    i += 1;
                }
                out.push((start, Token::Atom(&src[start..i])));
            }
        }
    }
    out
}

enum Names<'n> {
    Fixed(&'n [String]),
    Collect(Vec<String>),
}

impl Names<'_> {
    fn lookup(&mut self, name: &str, pos: usize) -> Result<usize> {
        match self {
            Names::Fixed(list) => list.iter().position(|n| n == name).ok_or(Error::Parse {
                position: pos,
                message: format!("unknown variable `{name}`"),
            }),
            Names::Collect(list) => Ok(match list.iter().position(|n| n == name) {
                Some(i) => i,
                None => {
                    list.push(name.to_string());
                    list.len() - 1
                }
            }),
        }
    }
}

struct Parser<'a, 'n> {
    tokens: Vec<(usize, Token<'a>)>,
    pos: usize,
    end: usize,
    names: Names<'n>,
}

impl<'a> Parser<'a, '_> {
    fn err<T>(&self, position: usize, message: impl Into<String>) -> Result<T> {
        Err(Error::Parse {
            position,
            message: message.into(),
        })
    }

    fn here(&self) -> usize {
        self.tokens.get(self.pos).map_or(self.end, |t| t.0)
    }

    fn next(&mut self) -> Result<(usize, Token<'a>)> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        match t {
            Some(t) => Ok(t),
            None => self.err(self.end, "unexpected end of input"),
        }
    }

    fn peek_close(&self) -> bool {
        matches!(self.tokens.get(self.pos), Some((_, Token::Close)))
    }

    fn expect_close(&mut self) -> Result<()> {
        match self.next()? {
            (_, Token::Close) => Ok(()),
            (p, _) => self.err(p, "expected `)`"),
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        match self.next()? {
            (p, Token::Close) => self.err(p, "unexpected `)`"),
            (p, Token::Atom(a)) => self.atom(a, p),
            (_, Token::Open) => {
                let (p, head) = match self.next()? {
                    (p, Token::Atom(a)) => (p, a),
                    (p, _) => return self.err(p, "expected an operator"),
                };
                self.form(head, p)
            }
        }
    }

    fn atom(&mut self, a: &str, p: usize) -> Result<Expr> {
        if a == "pi" {
            return Ok(Expr::Const(std::f64::consts::PI));
        }
        if let Ok(v) = a.parse::<f64>() {
            return Ok(Expr::Const(v));
        }
        if a.chars().next().is_some_and(|c| c.is_alphabetic() || c == '_') {
            return Ok(Expr::Var(self.names.lookup(a, p)?));
        }
        self.err(p, format!("cannot parse atom `{a}`"))
    }

    fn args(&mut self) -> Result<Vec<Expr>> {
        let mut v = Vec::new();
        while !self.peek_close() {
            if self.pos >= self.tokens.len() {
                return self.err(self.end, "unexpected end of input");
            }
            v.push(self.expr()?);
        }
        self.expect_close()?;
        Ok(v)
    }

    fn constant(&self, e: &Expr, p: usize, what: &str) -> Result<f64> {
        if e.max_var().is_some() {
            return self.err(p, format!("{what} must not depend on variables"));
        }
        Tape::compile(e, 0)
            .eval(&[], &mut Vec::new())
            .or_else(|_| self.err(p, format!("{what} does not evaluate to a finite number")))
    }

    fn form(&mut self, head: &str, p: usize) -> Result<Expr> {
        if head == "var" {
            let name = match self.next()? {
                (q, Token::Atom(a)) => (q, a),
                (q, _) => return self.err(q, "expected a variable name"),
            };
            let idx = self.names.lookup(name.1, name.0)?;
            self.expect_close()?;
            return Ok(Expr::Var(idx));
        }
        let args_at = self.here();
        let mut args = self.args()?;
        let arity = |lo: usize, hi: usize, args: &[Expr]| -> Result<()> {
            if args.len() < lo || args.len() > hi {
                return Err(Error::Parse {
                    position: p,
                    message: format!("`{head}` takes {lo}..={hi} arguments, got {}", args.len()),
                });
            }
            Ok(())
        };
        match head {
            "+" | "*" => {
                arity(1, usize::MAX, &args)?;
                let mut it = args.into_iter();
                let first = it.next().unwrap();
                Ok(it.fold(first, |acc, e| if head == "+" { acc + e } else { acc * e }))
            }
            "-" => {
                arity(1, 2, &args)?;
                let b = args.pop().unwrap();
                Ok(match args.pop() {
                    Some(a) => a - b,
                    None => -b,
                })
            }
            "/" => {
                arity(2, 3, &args)?;
                let radius = if args.len() == 3 {
                    let r = args.pop().unwrap();
                    let r = self.constant(&r, args_at, "division radius")?;
                    if r < 0.0 {
                        return self.err(p, "division radius must be non-negative");
                    }
                    r
                } else {
                    0.0
                };
                let den = args.pop().unwrap();
                let num = args.pop().unwrap();
                Ok(num.guarded_div(den, radius))
            }
            "^" => {
                arity(2, 2, &args)?;
                let e = args.pop().unwrap();
                let e = self.constant(&e, args_at, "exponent")?;
                Ok(args.pop().unwrap().powf(e))
            }
            "sin" | "cos" | "exp" | "digamma" | "psi" => {
                arity(1, 1, &args)?;
                let a = args.pop().unwrap();
                Ok(match head {
                    "sin" => a.sin(),
                    "cos" => a.cos(),
                    "exp" => a.exp(),
                    _ => a.digamma(),
                })
            }
            other => self.err(p, format!("unknown operator `{other}`")),
        }
    }
}

fn run<'n>(src: &str, names: Names<'n>) -> Result<(Expr, Names<'n>)> {
    let mut parser = Parser {
        tokens: tokenize(src),
        pos: 0,
        end: src.len(),
        names,
    };
    let e = parser.expr()?;
    if parser.pos < parser.tokens.len() {
        let p = parser.here();
        return parser.err(p, "trailing input after expression");
    }
    Ok((e, parser.names))
}

/// Parses `src` resolving variable names against `names` (index = position).
pub fn parse_expr(src: &str, names: &[String]) -> Result<Expr> {
    run(src, Names::Fixed(names)).map(|(e, _)| e)
}

/// Parses `src`, assigning variable indices in order of first appearance.
pub(crate) fn parse_expr_collecting(src: &str) -> Result<(Expr, Vec<String>)> {
    let (e, names) = run(src, Names::Collect(Vec::new()))?;
    match names {
        Names::Collect(v) => Ok((e, v)),
        Names::Fixed(_) => unreachable!(),
    }
}
