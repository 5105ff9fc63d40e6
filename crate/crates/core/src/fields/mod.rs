//! Differentiable scalar fields over named real variables.
//!
//! A field is an immutable expression tree ([`Expr`]) compiled once into a
//! flat instruction tape. The tape is evaluated either on plain `f64`s or on
//! second-order forward-mode jets that carry the exact gradient and the
//! packed upper triangle of the Hessian alongside the value.

mod digamma;
mod parse;
mod tape;

use std::cell::RefCell;
use std::fmt;
use std::ops;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use digamma::{digamma, tetragamma, trigamma, EULER_GAMMA};
pub use parse::parse_expr;
pub(crate) use tape::Tape;

/// Expression node.
///
/// Division carries an exclusion radius: evaluating with
/// `|denominator| <= exclusion` is a [`Error::DomainViolation`] instead of
/// an infinity or NaN. Powers have constant exponents.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div {
        num: Box<Expr>,
        den: Box<Expr>,
        exclusion: f64,
    },
    Pow(Box<Expr>, f64),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Exp(Box<Expr>),
    Digamma(Box<Expr>),
}

impl Expr {
    pub fn constant(c: f64) -> Self {
        Expr::Const(c)
    }

    pub fn var(index: usize) -> Self {
        Expr::Var(index)
    }

    pub fn powf(self, exponent: f64) -> Self {
        Expr::Pow(Box::new(self), exponent)
    }

    pub fn square(self) -> Self {
        self.powf(2.0)
    }

    pub fn sin(self) -> Self {
        Expr::Sin(Box::new(self))
    }

    pub fn cos(self) -> Self {
        Expr::Cos(Box::new(self))
    }

    pub fn exp(self) -> Self {
        Expr::Exp(Box::new(self))
    }

    pub fn digamma(self) -> Self {
        Expr::Digamma(Box::new(self))
    }

    /// `self / den`, failing whenever `|den| <= exclusion`.
    pub fn guarded_div(self, den: Expr, exclusion: f64) -> Self {
        Expr::Div {
            num: Box::new(self),
            den: Box::new(den),
            exclusion,
        }
    }

    /// Largest variable index referenced, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Const(_) => None,
            Expr::Var(i) => Some(*i),
            Expr::Neg(a)
            | Expr::Pow(a, _)
            | Expr::Sin(a)
            | Expr::Cos(a)
            | Expr::Exp(a)
            | Expr::Digamma(a) => a.max_var(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => a.max_var().max(b.max_var()),
            Expr::Div { num, den, .. } => num.max_var().max(den.max_var()),
        }
    }

    /// Replaces every `Var(i)` by `subst(i)`.
    pub fn substitute(&self, subst: &impl Fn(usize) -> Expr) -> Expr {
        let rec = |e: &Expr| Box::new(e.substitute(subst));
        match self {
            Expr::Const(c) => Expr::Const(*c),
            Expr::Var(i) => subst(*i),
            Expr::Neg(a) => Expr::Neg(rec(a)),
            Expr::Add(a, b) => Expr::Add(rec(a), rec(b)),
            Expr::Sub(a, b) => Expr::Sub(rec(a), rec(b)),
            Expr::Mul(a, b) => Expr::Mul(rec(a), rec(b)),
            Expr::Div {
                num,
                den,
                exclusion,
            } => Expr::Div {
                num: rec(num),
                den: rec(den),
                exclusion: *exclusion,
            },
            Expr::Pow(a, p) => Expr::Pow(rec(a), *p),
            Expr::Sin(a) => Expr::Sin(rec(a)),
            Expr::Cos(a) => Expr::Cos(rec(a)),
            Expr::Exp(a) => Expr::Exp(rec(a)),
            Expr::Digamma(a) => Expr::Digamma(rec(a)),
        }
    }

    /// Renumbers variables through `map[i]`.
    pub fn remap_vars(&self, map: &[usize]) -> Expr {
        self.substitute(&|i| Expr::Var(map[i]))
    }

    /// Structural check that the tree is a non-negative combination of
    /// squares: `(^ e 2)`, sums of such terms, non-negative constants and
    /// non-negative constant multiples.
    pub fn is_sum_of_squares(&self) -> bool {
        match self {
            Expr::Const(c) => *c >= 0.0,
            Expr::Pow(_, p) => *p == 2.0,
            Expr::Add(a, b) => a.is_sum_of_squares() && b.is_sum_of_squares(),
            Expr::Mul(a, b) => match (a.as_ref(), b.as_ref()) {
                (Expr::Const(c), other) | (other, Expr::Const(c)) => {
                    *c >= 0.0 && other.is_sum_of_squares()
                }
                _ => false,
            },
            _ => false,
        }
    }

    /// Sum of the given terms (`0` when empty).
    pub fn sum(terms: impl IntoIterator<Item = Expr>) -> Expr {
        terms
            .into_iter()
            .reduce(|acc, t| acc + t)
            .unwrap_or(Expr::Const(0.0))
    }

    /// Prefix rendering using `names` for variables.
    pub fn to_prefix(&self, names: &[String]) -> String {
        let mut out = String::new();
        self.write_prefix(names, &mut out);
        out
    }

    fn write_prefix(&self, names: &[String], out: &mut String) {
        let call = |op: &str, args: &[&Expr], out: &mut String| {
            out.push('(');
            out.push_str(op);
            for a in args {
                out.push(' ');
                a.write_prefix(names, out);
            }
            out.push(')');
        };
        match self {
            Expr::Const(c) => out.push_str(&format_number(*c)),
            Expr::Var(i) => {
                let name = names.get(*i).cloned().unwrap_or_else(|| format!("v{i}"));
                out.push_str(&format!("(var {name})"));
            }
            Expr::Neg(a) => call("-", &[a], out),
            Expr::Add(a, b) => call("+", &[a, b], out),
            Expr::Sub(a, b) => call("-", &[a, b], out),
            Expr::Mul(a, b) => call("*", &[a, b], out),
            Expr::Div {
                num,
                den,
                exclusion,
            } => {
                call("/", &[num, den], out);
                if *exclusion > 0.0 {
                    out.pop();
                    out.push(' ');
                    out.push_str(&format_number(*exclusion));
                    out.push(')');
                }
            }
            Expr::Pow(a, p) => {
                call("^", &[a, &Expr::Const(*p)], out);
            }
            Expr::Sin(a) => call("sin", &[a], out),
            Expr::Cos(a) => call("cos", &[a], out),
            Expr::Exp(a) => call("exp", &[a], out),
            Expr::Digamma(a) => call("digamma", &[a], out),
        }
    }
}

fn format_number(c: f64) -> String {
    if c == std::f64::consts::PI {
        "pi".to_string()
    } else {
        format!("{c:?}")
    }
}

impl From<f64> for Expr {
    fn from(c: f64) -> Self {
        Expr::Const(c)
    }
}

macro_rules! binary_op {
    ($trait:ident, $method:ident, $variant:ident) => {
        impl ops::$trait for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::$variant(Box::new(self), Box::new(rhs))
            }
        }
        impl ops::$trait<f64> for Expr {
            type Output = Expr;
            fn $method(self, rhs: f64) -> Expr {
                Expr::$variant(Box::new(self), Box::new(Expr::Const(rhs)))
            }
        }
        impl ops::$trait<Expr> for f64 {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::$variant(Box::new(Expr::Const(self)), Box::new(rhs))
            }
        }
    };
}

binary_op!(Add, add, Add);
binary_op!(Sub, sub, Sub);
binary_op!(Mul, mul, Mul);

impl ops::Div for Expr {
    type Output = Expr;
    fn div(self, rhs: Expr) -> Expr {
        self.guarded_div(rhs, 0.0)
    }
}

impl ops::Div<Expr> for f64 {
    type Output = Expr;
    fn div(self, rhs: Expr) -> Expr {
        Expr::Const(self).guarded_div(rhs, 0.0)
    }
}

impl ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::Neg(Box::new(self))
    }
}

/// Closed interval `[lo, hi]` with `lo < hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidArgument(format!(
                "interval needs finite lo < hi, got [{lo}, {hi}]"
            )));
        }
        Ok(Self { lo, hi })
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn excludes_zero(&self) -> bool {
        self.lo > 0.0 || self.hi < 0.0
    }
}

/// The y-interval 𝓐 of a phase integral; construction guarantees 0 ∉ 𝓐.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Interval", into = "Interval")]
pub struct YRange(Interval);

impl YRange {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        Self::try_from(Interval::new(lo, hi)?)
    }

    pub fn interval(&self) -> Interval {
        self.0
    }

    pub fn lo(&self) -> f64 {
        self.0.lo
    }

    pub fn hi(&self) -> f64 {
        self.0.hi
    }

    /// max y² over the range.
    pub fn max_y2(&self) -> f64 {
        self.0.lo.powi(2).max(self.0.hi.powi(2))
    }
}

impl Default for YRange {
    fn default() -> Self {
        YRange(Interval { lo: 1.0, hi: 2.0 })
    }
}

impl TryFrom<Interval> for YRange {
    type Error = Error;
    fn try_from(iv: Interval) -> Result<Self> {
        if !iv.excludes_zero() {
            return Err(Error::DomainViolation(format!(
                "the y-range [{}, {}] must exclude 0",
                iv.lo, iv.hi
            )));
        }
        Ok(YRange(iv))
    }
}

impl From<YRange> for Interval {
    fn from(y: YRange) -> Interval {
        y.0
    }
}

/// Axis-aligned box, one interval per variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    pub intervals: Vec<Interval>,
}

impl BoxDomain {
    pub fn new(intervals: Vec<Interval>) -> Self {
        Self { intervals }
    }

    pub fn from_bounds(bounds: &[(f64, f64)]) -> Result<Self> {
        bounds
            .iter()
            .map(|&(lo, hi)| Interval::new(lo, hi))
            .collect::<Result<Vec<_>>>()
            .map(Self::new)
    }

    pub fn dim(&self) -> usize {
        self.intervals.len()
    }

    pub fn diameter(&self) -> f64 {
        self.intervals
            .iter()
            .map(|iv| iv.width().powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn volume(&self) -> f64 {
        self.intervals.iter().map(Interval::width).product()
    }

    pub fn center(&self) -> Vec<f64> {
        self.intervals.iter().map(Interval::midpoint).collect()
    }

    /// Membership with a relative slack of `rel` times each width.
    pub fn contains_with_slack(&self, point: &[f64], rel: f64) -> bool {
        point.len() == self.dim()
            && self.intervals.iter().zip(point).all(|(iv, &x)| {
                let s = rel * iv.width();
                x >= iv.lo - s && x <= iv.hi + s
            })
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        self.contains_with_slack(point, 1e-12)
    }

    /// Strict interior test keeping a margin of `rel` times each width.
    pub fn interior_with_margin(&self, point: &[f64], rel: f64) -> bool {
        point.len() == self.dim()
            && self.intervals.iter().zip(point).all(|(iv, &x)| {
                let s = rel * iv.width();
                x > iv.lo + s && x < iv.hi - s
            })
    }

    /// Concatenation `self × other`.
    pub fn product(&self, other: &BoxDomain) -> BoxDomain {
        let mut intervals = self.intervals.clone();
        intervals.extend_from_slice(&other.intervals);
        BoxDomain { intervals }
    }
}

/// Symmetric matrix stored as its packed upper triangle (row-major).
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    packed: Vec<f64>,
}

pub(crate) fn packed_index(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * (2 * n - i + 1) / 2 + (j - i)
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            packed: vec![0.0; n * (n + 1) / 2],
        }
    }

    pub(crate) fn from_packed(n: usize, packed: Vec<f64>) -> Self {
        debug_assert_eq!(packed.len(), n * (n + 1) / 2);
        Self { n, packed }
    }

    /// Builds from dense rows, reading only the upper triangle.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in i..n {
                m.set(i, j, rows[i][j]);
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.packed[packed_index(self.n, i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = packed_index(self.n, i, j);
        self.packed[k] = v;
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j)).collect())
            .collect()
    }

    pub fn to_dmatrix(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    pub fn frobenius_norm(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                s += self.get(i, j).powi(2);
            }
        }
        s.sqrt()
    }
}

impl Serialize for SymMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for SymMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        if rows.iter().any(|r| r.len() != rows.len()) {
            return Err(serde::de::Error::custom("Hessian rows must be square"));
        }
        Ok(SymMatrix::from_rows(&rows))
    }
}

/// Derivative order requested from [`ExpressionField::evaluate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Order {
    Value,
    Gradient,
    Hessian,
}

impl TryFrom<u8> for Order {
    type Error = Error;
    fn try_from(k: u8) -> Result<Self> {
        match k {
            0 => Ok(Order::Value),
            1 => Ok(Order::Gradient),
            2 => Ok(Order::Hessian),
            _ => Err(Error::InvalidArgument(format!("order must be 0, 1 or 2, got {k}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub value: f64,
    pub gradient: Option<Vec<f64>>,
    pub hessian: Option<SymMatrix>,
}

/// A differentiable scalar expression over named real variables, with an
/// optional declared domain.
#[derive(Clone)]
pub struct ExpressionField {
    expr: Expr,
    tape: Tape,
    names: Vec<String>,
    domain: Option<BoxDomain>,
}

impl fmt::Debug for ExpressionField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExpressionField")
            .field("expr", &self.to_prefix())
            .field("names", &self.names)
            .field("domain", &self.domain)
            .finish()
    }
}

impl ExpressionField {
    pub fn new(expr: Expr, names: Vec<String>) -> Result<Self> {
        if let Some(max) = expr.max_var() {
            if max >= names.len() {
                return Err(Error::DimensionMismatch {
                    expected: names.len(),
                    got: max + 1,
                });
            }
        }
        let tape = Tape::compile(&expr, names.len());
        Ok(Self {
            expr,
            tape,
            names,
            domain: None,
        })
    }

    /// Convenience constructor naming variables `x0, x1, …`.
    pub fn with_arity(expr: Expr, arity: usize) -> Result<Self> {
        Self::new(expr, (0..arity).map(|i| format!("x{i}")).collect())
    }

    /// Parses prefix syntax with the given variable order.
    pub fn parse(src: &str, names: &[&str]) -> Result<Self> {
        let names: Vec<String> = names.iter().map(|s| s.to_string()).collect();
        let expr = parse_expr(src, &names)?;
        Self::new(expr, names)
    }

    /// Parses prefix syntax, numbering variables by first appearance.
    pub fn parse_auto(src: &str) -> Result<Self> {
        let (expr, names) = parse::parse_expr_collecting(src)?;
        Self::new(expr, names)
    }

    pub fn with_domain(mut self, domain: BoxDomain) -> Result<Self> {
        if domain.dim() != self.arity() {
            return Err(Error::DimensionMismatch {
                expected: self.arity(),
                got: domain.dim(),
            });
        }
        self.domain = Some(domain);
        Ok(self)
    }

    pub fn arity(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn domain(&self) -> Option<&BoxDomain> {
        self.domain.as_ref()
    }

    pub fn to_prefix(&self) -> String {
        self.expr.to_prefix(&self.names)
    }

    fn check_point(&self, point: &[f64]) -> Result<()> {
        if point.len() != self.arity() {
            return Err(Error::DimensionMismatch {
                expected: self.arity(),
                got: point.len(),
            });
        }
        if let Some(domain) = &self.domain {
            if !domain.contains(point) {
                return Err(Error::DomainViolation(format!(
                    "point {point:?} lies outside the declared box"
                )));
            }
        }
        Ok(())
    }

    /// Value, and optionally exact gradient and Hessian, at `point`.
    pub fn evaluate(&self, point: &[f64], order: Order) -> Result<Evaluation> {
        self.check_point(point)?;
        self.evaluate_unchecked(point, order)
    }

    /// As [`evaluate`](Self::evaluate) without the domain-membership test.
    /// Guarded singularities are still reported.
    pub fn evaluate_unchecked(&self, point: &[f64], order: Order) -> Result<Evaluation> {
        if point.len() != self.arity() {
            return Err(Error::DimensionMismatch {
                expected: self.arity(),
                got: point.len(),
            });
        }
        if order == Order::Value {
            let value = self.tape.eval(point, &mut Vec::new())?;
            return Ok(Evaluation {
                value,
                gradient: None,
                hessian: None,
            });
        }
        self.tape.eval_jet(point, order)
    }

    pub fn value(&self, point: &[f64]) -> Result<f64> {
        self.check_point(point)?;
        self.tape.eval(point, &mut Vec::new())
    }

    /// Value without the domain-membership test, using a thread-local
    /// scratch buffer. Guarded singularities are still reported.
    pub fn value_unchecked(&self, point: &[f64]) -> Result<f64> {
        thread_local! {
            static SCRATCH: RefCell<Vec<f64>> = const { RefCell::new(Vec::new()) };
        }
        if point.len() != self.arity() {
            return Err(Error::DimensionMismatch {
                expected: self.arity(),
                got: point.len(),
            });
        }
        SCRATCH.with(|s| self.tape.eval(point, &mut s.borrow_mut()))
    }

    /// Reusable evaluator for hot loops; skips the domain test.
    pub fn evaluator(&self) -> FieldEvaluator<'_> {
        FieldEvaluator {
            tape: &self.tape,
            scratch: Vec::with_capacity(self.tape.len()),
        }
    }
}

/// Value-only evaluator with a private scratch buffer.
pub struct FieldEvaluator<'a> {
    tape: &'a Tape,
    scratch: Vec<f64>,
}

impl FieldEvaluator<'_> {
    pub fn value(&mut self, point: &[f64]) -> Result<f64> {
        self.tape.eval(point, &mut self.scratch)
    }
}
