use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use num_traits::{Float, ToPrimitive};

use super::{Expr, Node, Rational};

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("even root of negative value {0}")]
    EvenRootOfNegative(f64),
    #[error("non-finite result")]
    NonFinite,
    #[error("variable {0} is not bound by the point")]
    Unbound(usize),
}

fn rational_to_f64(r: Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

fn finite(v: f64) -> Result<f64, EvalError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(EvalError::NonFinite)
    }
}

fn divide(a: f64, b: f64) -> Result<f64, EvalError> {
    if b == 0.0 {
        return Err(EvalError::DivisionByZero);
    }
    finite(a / b)
}

/// Real power with sign-aware odd roots.
fn real_pow(u: f64, p: i64, q: i64) -> Result<f64, EvalError> {
    if q == 1 {
        if u == 0.0 && p < 0 {
            return Err(EvalError::DivisionByZero);
        }
        return match i32::try_from(p) {
            Ok(k) => finite(Float::powi(u, k)),
            Err(_) => finite(Float::powf(u, p as f64)),
        };
    }
    if u < 0.0 && q % 2 == 0 {
        return Err(EvalError::EvenRootOfNegative(u));
    }
    if u == 0.0 {
        return if p < 0 {
            Err(EvalError::DivisionByZero)
        } else {
            Ok(0.0)
        };
    }
    let mag = Float::powf(u.abs(), p as f64 / q as f64);
    let negative = u < 0.0 && p % 2 != 0;
    finite(if negative { -mag } else { mag })
}

pub(super) fn evaluate(e: &Expr, point: &[f64]) -> Result<f64, EvalError> {
    let v = match e.node() {
        Node::Const(r) => rational_to_f64(*r),
        Node::Var(i) => *point.get(*i).ok_or(EvalError::Unbound(*i))?,
        Node::Add(a, b) => evaluate(a, point)? + evaluate(b, point)?,
        Node::Sub(a, b) => evaluate(a, point)? - evaluate(b, point)?,
        Node::Mul(a, b) => evaluate(a, point)? * evaluate(b, point)?,
        Node::Div(a, b) => divide(evaluate(a, point)?, evaluate(b, point)?)?,
        Node::Pow(a, r) => real_pow(evaluate(a, point)?, *r.numer(), *r.denom())?,
        Node::Neg(a) => -evaluate(a, point)?,
        Node::Sin(a) => Float::sin(evaluate(a, point)?),
        Node::Cos(a) => Float::cos(evaluate(a, point)?),
        Node::Exp(a) => Float::exp(evaluate(a, point)?),
    };
    finite(v)
}

#[derive(Debug, Clone)]
enum Op {
    Const(f64),
    Var(usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Div(usize, usize),
    Pow(usize, i64, i64),
    Neg(usize),
    Sin(usize),
    Cos(usize),
    Exp(usize),
}

/// A batch of expressions compiled into a flat instruction list.
///
/// Shared subexpressions are emitted once, so evaluating every component
/// of a tensor at a point costs one pass over the shared graph.
#[derive(Debug, Clone)]
pub struct Tape {
    ops: Vec<Op>,
    outputs: Vec<usize>,
}

impl Tape {
    pub fn compile<'a, I: IntoIterator<Item = &'a Expr>>(exprs: I) -> Tape {
        let mut ops = Vec::new();
        let mut slots: BTreeMap<usize, usize> = BTreeMap::new();
        let mut keep: Vec<Expr> = Vec::new();
        let mut outputs = Vec::new();
        for e in exprs {
            outputs.push(emit(e, &mut ops, &mut slots, &mut keep));
        }
        Tape { ops, outputs }
    }

    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }

    pub fn instructions(&self) -> usize {
        self.ops.len()
    }

    /// Evaluates every output at `point`.
    pub fn eval(&self, point: &[f64]) -> Result<Vec<f64>, EvalError> {
        let mut reg = Vec::with_capacity(self.ops.len());
        for op in &self.ops {
            let v = match *op {
                Op::Const(c) => c,
                Op::Var(i) => *point.get(i).ok_or(EvalError::Unbound(i))?,
                Op::Add(a, b) => reg[a] + reg[b],
                Op::Sub(a, b) => reg[a] - reg[b],
                Op::Mul(a, b) => reg[a] * reg[b],
                Op::Div(a, b) => divide(reg[a], reg[b])?,
                Op::Pow(a, p, q) => real_pow(reg[a], p, q)?,
                Op::Neg(a) => -reg[a],
                Op::Sin(a) => Float::sin(reg[a]),
                Op::Cos(a) => Float::cos(reg[a]),
                Op::Exp(a) => Float::exp(reg[a]),
            };
            reg.push(finite(v)?);
        }
        Ok(self.outputs.iter().map(|&i| reg[i]).collect())
    }
}

fn emit(
    e: &Expr,
    ops: &mut Vec<Op>,
    slots: &mut BTreeMap<usize, usize>,
    keep: &mut Vec<Expr>,
) -> usize {
    if let Some(&s) = slots.get(&e.id()) {
        return s;
    }
    let op = match e.node() {
        Node::Const(r) => Op::Const(rational_to_f64(*r)),
        Node::Var(i) => Op::Var(*i),
        Node::Add(a, b) => Op::Add(emit(a, ops, slots, keep), emit(b, ops, slots, keep)),
        Node::Sub(a, b) => Op::Sub(emit(a, ops, slots, keep), emit(b, ops, slots, keep)),
        Node::Mul(a, b) => Op::Mul(emit(a, ops, slots, keep), emit(b, ops, slots, keep)),
        Node::Div(a, b) => Op::Div(emit(a, ops, slots, keep), emit(b, ops, slots, keep)),
        Node::Pow(a, r) => Op::Pow(emit(a, ops, slots, keep), *r.numer(), *r.denom()),
        Node::Neg(a) => Op::Neg(emit(a, ops, slots, keep)),
        Node::Sin(a) => Op::Sin(emit(a, ops, slots, keep)),
        Node::Cos(a) => Op::Cos(emit(a, ops, slots, keep)),
        Node::Exp(a) => Op::Exp(emit(a, ops, slots, keep)),
    };
    ops.push(op);
    let slot = ops.len() - 1;
    slots.insert(e.id(), slot);
    keep.push(e.clone());
    slot
}
