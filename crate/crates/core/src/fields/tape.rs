//! Flat SSA tape compiled from an [`Expr`], with a plain `f64` evaluator
//! and a second-order forward-mode jet evaluator.

use super::digamma::{digamma, tetragamma, trigamma};
use super::{Evaluation, Expr, Order, SymMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
enum Op {
    Const(f64),
    Var(usize),
    Neg(usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Div(usize, usize, f64),
    Square(usize),
    PowI(usize, i32),
    PowF(usize, f64),
    Sin(usize),
    Cos(usize),
    Exp(usize),
    Digamma(usize),
}

#[derive(Debug, Clone)]
pub(crate) struct Tape {
    ops: Vec<Op>,
    arity: usize,
}

impl Tape {
    pub(crate) fn compile(expr: &Expr, arity: usize) -> Self {
        let mut ops = Vec::new();
        emit(expr, &mut ops);
        Self { ops, arity }
    }

    pub(crate) fn len(&self) -> usize {
        self.ops.len()
    }

    pub(crate) fn eval(&self, x: &[f64], slots: &mut Vec<f64>) -> Result<f64> {
        slots.clear();
        for op in &self.ops {
            let v = match *op {
                Op::Const(c) => c,
                Op::Var(i) => x[i],
                Op::Neg(a) => -slots[a],
                Op::Add(a, b) => slots[a] + slots[b],
                Op::Sub(a, b) => slots[a] - slots[b],
                Op::Mul(a, b) => slots[a] * slots[b],
                Op::Div(a, b, excl) => {
                    let den = slots[b];
                    check_denominator(den, excl)?;
                    slots[a] / den
                }
                Op::Square(a) => slots[a] * slots[a],
                Op::PowI(a, n) => {
                    check_power_base(slots[a], n as f64)?;
                    slots[a].powi(n)
                }
                Op::PowF(a, p) => {
                    check_power_base(slots[a], p)?;
                    slots[a].powf(p)
                }
                Op::Sin(a) => slots[a].sin(),
                Op::Cos(a) => slots[a].cos(),
                Op::Exp(a) => slots[a].exp(),
                Op::Digamma(a) => digamma(slots[a])?,
            };
            slots.push(v);
        }
        let v = *slots.last().expect("tape is never empty");
        if !v.is_finite() {
            return Err(Error::NonFinite(format!("field value at {x:?}")));
        }
        Ok(v)
    }

    pub(crate) fn eval_jet(&self, x: &[f64], order: Order) -> Result<Evaluation> {
        let n = self.arity;
        let hess = order == Order::Hessian;
        let stride = 1 + n + if hess { n * (n + 1) / 2 } else { 0 };
        let mut buf = vec![0.0; self.ops.len() * stride];
        let mut tmp = vec![0.0; stride];
        for (k, op) in self.ops.iter().enumerate() {
            let (before, after) = buf.split_at_mut(k * stride);
            let out = &mut after[..stride];
            let slot = |i: usize| &before[i * stride..(i + 1) * stride];
            match *op {
                Op::Const(c) => {
                    out.fill(0.0);
                    out[0] = c;
                }
                Op::Var(i) => {
                    out.fill(0.0);
                    out[0] = x[i];
                    out[1 + i] = 1.0;
                }
                Op::Neg(a) => {
                    for (o, u) in out.iter_mut().zip(slot(a)) {
                        *o = -u;
                    }
                }
                Op::Add(a, b) => {
                    for ((o, u), v) in out.iter_mut().zip(slot(a)).zip(slot(b)) {
                        *o = u + v;
                    }
                }
                Op::Sub(a, b) => {
                    for ((o, u), v) in out.iter_mut().zip(slot(a)).zip(slot(b)) {
                        *o = u - v;
                    }
                }
                Op::Mul(a, b) => mul_jet(out, slot(a), slot(b), n, hess),
                Op::Div(a, b, excl) => {
                    let den = slot(b);
                    let d = den[0];
                    check_denominator(d, excl)?;
                    let r = 1.0 / d;
                    unary_jet(&mut tmp, den, n, hess, r, -r * r, 2.0 * r * r * r);
                    mul_jet(out, slot(a), &tmp, n, hess);
                }
                Op::Square(a) => {
                    let u = slot(a)[0];
                    unary_jet(out, slot(a), n, hess, u * u, 2.0 * u, 2.0);
                }
                Op::PowI(a, p) => {
                    let u = slot(a)[0];
                    check_power_base(u, p as f64)?;
                    let pf = p as f64;
                    let f1 = if p == 0 { 0.0 } else { pf * u.powi(p - 1) };
                    let f2 = if p == 0 || p == 1 {
                        0.0
                    } else {
                        pf * (pf - 1.0) * u.powi(p - 2)
                    };
                    unary_jet(out, slot(a), n, hess, u.powi(p), f1, f2);
                }
                Op::PowF(a, p) => {
                    let u = slot(a)[0];
                    check_power_base(u, p)?;
                    let f0 = u.powf(p);
                    let f1 = p * u.powf(p - 1.0);
                    let f2 = p * (p - 1.0) * u.powf(p - 2.0);
                    unary_jet(out, slot(a), n, hess, f0, f1, f2);
                }
                Op::Sin(a) => {
                    let (s, c) = slot(a)[0].sin_cos();
                    unary_jet(out, slot(a), n, hess, s, c, -s);
                }
                Op::Cos(a) => {
                    let (s, c) = slot(a)[0].sin_cos();
                    unary_jet(out, slot(a), n, hess, c, -s, -c);
                }
                Op::Exp(a) => {
                    let e = slot(a)[0].exp();
                    unary_jet(out, slot(a), n, hess, e, e, e);
                }
                Op::Digamma(a) => {
                    let u = slot(a)[0];
                    let f0 = digamma(u)?;
                    let f1 = trigamma(u)?;
                    let f2 = if hess { tetragamma(u)? } else { 0.0 };
                    unary_jet(out, slot(a), n, hess, f0, f1, f2);
                }
            }
        }
        let last = &buf[(self.ops.len() - 1) * stride..];
        if last.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("field derivatives at {x:?}")));
        }
        Ok(Evaluation {
            value: last[0],
            gradient: Some(last[1..1 + n].to_vec()),
            hessian: hess.then(|| SymMatrix::from_packed(n, last[1 + n..].to_vec())),
        })
    }
}

fn check_denominator(den: f64, exclusion: f64) -> Result<()> {
    if den.abs() <= exclusion || den == 0.0 {
        return Err(Error::DomainViolation(format!(
            "denominator {den} inside the exclusion radius {exclusion}"
        )));
    }
    Ok(())
}

fn check_power_base(u: f64, p: f64) -> Result<()> {
    let integral = p.fract() == 0.0;
    if (!integral && u < 0.0) || (u == 0.0 && p < 0.0) {
        return Err(Error::DomainViolation(format!("{u}^{p} is undefined")));
    }
    Ok(())
}

/// Chain rule for `f(u)`: value f0, gradient f′∇u, Hessian f′H_u + f″∇u∇uᵀ.
fn unary_jet(out: &mut [f64], u: &[f64], n: usize, hess: bool, f0: f64, f1: f64, f2: f64) {
    out[0] = f0;
    for i in 0..n {
        out[1 + i] = f1 * u[1 + i];
    }
    if hess {
        let off = 1 + n;
        let mut p = 0;
        for i in 0..n {
            let gi = u[1 + i];
            for j in i..n {
                out[off + p] = f1 * u[off + p] + f2 * gi * u[1 + j];
                p += 1;
            }
        }
    }
}

fn mul_jet(out: &mut [f64], a: &[f64], b: &[f64], n: usize, hess: bool) {
    let (a0, b0) = (a[0], b[0]);
    out[0] = a0 * b0;
    for i in 0..n {
        out[1 + i] = a0 * b[1 + i] + b0 * a[1 + i];
    }
    if hess {
        let off = 1 + n;
        let mut p = 0;
        for i in 0..n {
            for j in i..n {
                out[off + p] = a0 * b[off + p]
                    + b0 * a[off + p]
                    + a[1 + i] * b[1 + j]
                    + a[1 + j] * b[1 + i];
                p += 1;
            }
        }
    }
}

fn emit(expr: &Expr, ops: &mut Vec<Op>) -> usize {
    let op = match expr {
        Expr::Const(c) => Op::Const(*c),
        Expr::Var(i) => Op::Var(*i),
        Expr::Neg(a) => Op::Neg(emit(a, ops)),
        Expr::Add(a, b) => {
            let (a, b) = (emit(a, ops), emit(b, ops));
            Op::Add(a, b)
        }
        Expr::Sub(a, b) => {
            let (a, b) = (emit(a, ops), emit(b, ops));
            Op::Sub(a, b)
        }
        Expr::Mul(a, b) => {
            let (a, b) = (emit(a, ops), emit(b, ops));
            Op::Mul(a, b)
        }
        Expr::Div {
            num,
            den,
            exclusion,
        } => {
            let (a, b) = (emit(num, ops), emit(den, ops));
            Op::Div(a, b, *exclusion)
        }
        Expr::Pow(a, p) => {
            let a = emit(a, ops);
            if *p == 2.0 {
                Op::Square(a)
            } else if p.fract() == 0.0 && p.abs() <= 64.0 {
                Op::PowI(a, *p as i32)
            } else {
                Op::PowF(a, *p)
            }
        }
        Expr::Sin(a) => Op::Sin(emit(a, ops)),
        Expr::Cos(a) => Op::Cos(emit(a, ops)),
        Expr::Exp(a) => Op::Exp(emit(a, ops)),
        Expr::Digamma(a) => Op::Digamma(emit(a, ops)),
    };
    ops.push(op);
    ops.len() - 1
}
