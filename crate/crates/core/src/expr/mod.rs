//! Exact scalar expressions over chart coordinates.
//!
//! Expressions are immutable trees with shared (`Arc`) children. All
//! construction goes through simplifying constructors, so constants are
//! folded exactly as rationals and the usual 0/1 identities are applied
//! eagerly. The simplifier is best-effort: two equal functions may have
//! different trees, and nothing downstream relies on canonical forms.

mod diff;
mod eval;
mod parse;
mod print;

use alloc::sync::Arc;
use core::fmt;
use core::ops;

use num_integer::Roots;
use num_rational::Ratio;
use num_traits::{CheckedAdd, CheckedDiv, CheckedMul, CheckedSub, One, Zero};

pub use diff::Differentiator;
pub use eval::{EvalError, Tape};
pub use parse::{parse_expression, ParseError};
pub use print::Printer;

/// Exact rational constant stored in expressions.
pub type Rational = Ratio<i64>;

/// Names reserved for built-in functions; never valid as variable names.
pub const RESERVED: [&str; 4] = ["sin", "cos", "exp", "pow"];

#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    Const(Rational),
    /// Index into the variable list the expression was parsed against.
    Var(usize),
    Add(Expr, Expr),
    Sub(Expr, Expr),
    Mul(Expr, Expr),
    Div(Expr, Expr),
    Pow(Expr, Rational),
    Neg(Expr),
    Sin(Expr),
    Cos(Expr),
    Exp(Expr),
}

/// A shared, immutable expression node.
#[derive(Clone)]
pub struct Expr(Arc<Node>);

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || *self.0 == *other.0
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(&*self.0, f)
    }
}

impl Default for Expr {
    fn default() -> Self {
        Expr::zero()
    }
}

fn int(v: i64) -> Rational {
    Rational::from_integer(v)
}

impl Expr {
    fn new(node: Node) -> Self {
        Expr(Arc::new(node))
    }

    pub fn node(&self) -> &Node {
        &self.0
    }

    /// Address of the shared node; stable for the lifetime of the expression.
    pub(crate) fn id(&self) -> usize {
        Arc::as_ptr(&self.0) as usize
    }

    pub fn constant(r: Rational) -> Self {
        Expr::new(Node::Const(r))
    }

    pub fn int(v: i64) -> Self {
        Expr::constant(int(v))
    }

    pub fn ratio(num: i64, den: i64) -> Self {
        Expr::constant(Rational::new(num, den))
    }

    pub fn zero() -> Self {
        Expr::int(0)
    }

    pub fn one() -> Self {
        Expr::int(1)
    }

    pub fn var(index: usize) -> Self {
        Expr::new(Node::Var(index))
    }

    pub fn as_const(&self) -> Option<Rational> {
        match self.node() {
            Node::Const(r) => Some(*r),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.node(), Node::Const(r) if r.is_zero())
    }

    pub fn is_one(&self) -> bool {
        matches!(self.node(), Node::Const(r) if r.is_one())
    }

    /// Splits `e` into `coeff * rest` where `coeff` is a rational factor
    /// pulled out of `Mul(_, Const)` and `Neg(_)` wrappers.
    fn split_coeff(&self) -> (Rational, Expr) {
        match self.node() {
            Node::Const(r) => (*r, Expr::one()),
            Node::Neg(inner) => {
                let (c, rest) = inner.split_coeff();
                (-c, rest)
            }
            Node::Mul(a, b) => match b.as_const() {
                Some(c) => {
                    let (ca, ra) = a.split_coeff();
                    match ca.checked_mul(&c) {
                        Some(p) => (p, ra),
                        None => (int(1), self.clone()),
                    }
                }
                None => (int(1), self.clone()),
            },
            _ => (int(1), self.clone()),
        }
    }

    /// Rebuilds `coeff * rest` in normal form.
    fn with_coeff(coeff: Rational, rest: Expr) -> Expr {
        if coeff.is_zero() {
            return Expr::zero();
        }
        if rest.is_one() {
            return Expr::constant(coeff);
        }
        if coeff.is_one() {
            rest
        } else if coeff == -int(1) {
            Expr::new(Node::Neg(rest))
        } else {
            Expr::new(Node::Mul(rest, Expr::constant(coeff)))
        }
    }

    pub fn add(a: &Expr, b: &Expr) -> Expr {
        if let (Some(x), Some(y)) = (a.as_const(), b.as_const()) {
            if let Some(s) = x.checked_add(&y) {
                return Expr::constant(s);
            }
        }
        if a.is_zero() {
            return b.clone();
        }
        if b.is_zero() {
            return a.clone();
        }
        if let Node::Neg(nb) = b.node() {
            return Expr::sub(a, nb);
        }
        if let Node::Neg(na) = a.node() {
            return Expr::sub(b, na);
        }
        Expr::new(Node::Add(a.clone(), b.clone()))
    }

    pub fn sub(a: &Expr, b: &Expr) -> Expr {
        if let (Some(x), Some(y)) = (a.as_const(), b.as_const()) {
            if let Some(s) = x.checked_sub(&y) {
                return Expr::constant(s);
            }
        }
        if b.is_zero() {
            return a.clone();
        }
        if a.is_zero() {
            return Expr::neg(b);
        }
        if a == b {
            return Expr::zero();
        }
        if let Node::Neg(nb) = b.node() {
            return Expr::add(a, nb);
        }
        Expr::new(Node::Sub(a.clone(), b.clone()))
    }

    pub fn mul(a: &Expr, b: &Expr) -> Expr {
        if a.is_zero() || b.is_zero() {
            return Expr::zero();
        }
        let (ca, ra) = a.split_coeff();
        let (cb, rb) = b.split_coeff();
        let coeff = match ca.checked_mul(&cb) {
            Some(c) => c,
            None => return Expr::new(Node::Mul(a.clone(), b.clone())),
        };
        let rest = if ra.is_one() {
            rb
        } else if rb.is_one() {
            ra
        } else {
            Expr::new(Node::Mul(ra, rb))
        };
        Expr::with_coeff(coeff, rest)
    }

    pub fn div(a: &Expr, b: &Expr) -> Expr {
        if let Some(d) = b.as_const() {
            if d.is_zero() {
                // kept unevaluated; evaluation reports the division by zero
                return Expr::new(Node::Div(a.clone(), b.clone()));
            }
            if d.is_one() {
                return a.clone();
            }
            if a.is_zero() {
                return Expr::zero();
            }
            if d == -int(1) {
                return Expr::neg(a);
            }
            let (c, rest) = a.split_coeff();
            if rest.is_one() || !c.is_one() {
                if let Some(q) = c.checked_div(&d) {
                    return Expr::with_coeff(q, rest);
                }
            }
            return Expr::new(Node::Div(a.clone(), b.clone()));
        }
        if a.is_zero() {
            return Expr::zero();
        }
        if a == b {
            return Expr::one();
        }
        Expr::new(Node::Div(a.clone(), b.clone()))
    }

    pub fn neg(a: &Expr) -> Expr {
        match a.node() {
            Node::Const(r) => Expr::constant(-*r),
            Node::Neg(inner) => inner.clone(),
            Node::Mul(rest, c) if c.as_const().is_some() => {
                Expr::with_coeff(-c.as_const().unwrap_or_else(|| int(1)), rest.clone())
            }
            _ => Expr::new(Node::Neg(a.clone())),
        }
    }

    pub fn pow(base: &Expr, exponent: Rational) -> Expr {
        if exponent.is_zero() {
            return Expr::one();
        }
        if exponent.is_one() {
            return base.clone();
        }
        if let Some(b) = base.as_const() {
            if let Some(v) = rational_pow(b, exponent) {
                return Expr::constant(v);
            }
        }
        if exponent.is_integer() {
            if let Node::Pow(inner, e) = base.node() {
                if let Some(merged) = e.checked_mul(&exponent) {
                    return Expr::pow(inner, merged);
                }
            }
        }
        Expr::new(Node::Pow(base.clone(), exponent))
    }

    pub fn powi(base: &Expr, exponent: i64) -> Expr {
        Expr::pow(base, int(exponent))
    }

    pub fn sin(a: &Expr) -> Expr {
        if a.is_zero() {
            return Expr::zero();
        }
        Expr::new(Node::Sin(a.clone()))
    }

    pub fn cos(a: &Expr) -> Expr {
        if a.is_zero() {
            return Expr::one();
        }
        Expr::new(Node::Cos(a.clone()))
    }

    pub fn exp(a: &Expr) -> Expr {
        if a.is_zero() {
            return Expr::one();
        }
        Expr::new(Node::Exp(a.clone()))
    }

    /// Sum of a sequence of terms, skipping zeros.
    pub fn sum<'a, I: IntoIterator<Item = &'a Expr>>(terms: I) -> Expr {
        terms
            .into_iter()
            .fold(Expr::zero(), |acc, t| Expr::add(&acc, t))
    }

    /// Largest variable index referenced, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self.node() {
            Node::Const(_) => None,
            Node::Var(i) => Some(*i),
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                match (a.max_var(), b.max_var()) {
                    (Some(x), Some(y)) => Some(x.max(y)),
                    (x, y) => x.or(y),
                }
            }
            Node::Pow(a, _) | Node::Neg(a) | Node::Sin(a) | Node::Cos(a) | Node::Exp(a) => {
                a.max_var()
            }
        }
    }

    /// Exact partial derivative with respect to variable `var`.
    pub fn differentiate(&self, var: usize) -> Expr {
        Differentiator::new(var).derive(self)
    }

    /// Evaluates at `point` (values indexed like the variable list).
    pub fn evaluate(&self, point: &[f64]) -> Result<f64, EvalError> {
        eval::evaluate(self, point)
    }

    /// Renders the expression with the given variable names.
    pub fn display<'a, S: AsRef<str>>(&'a self, names: &'a [S]) -> Printer<'a, S> {
        Printer { expr: self, names }
    }
}

/// Exact `base^exponent` when the result is rational and representable.
fn rational_pow(base: Rational, exponent: Rational) -> Option<Rational> {
    let p = *exponent.numer();
    let q = *exponent.denom();
    let rooted = if q == 1 {
        base
    } else {
        let num = *base.numer();
        let den = *base.denom();
        if num < 0 && q % 2 == 0 {
            return None;
        }
        let q32 = u32::try_from(q).ok()?;
        let rn = num.abs().nth_root(q32);
        let rd = den.nth_root(q32);
        if rn.checked_pow(q32)? != num.abs() || rd.checked_pow(q32)? != den {
            return None;
        }
        Rational::new(if num < 0 { -rn } else { rn }, rd)
    };
    if rooted.is_zero() && p < 0 {
        return None;
    }
    let mag = u32::try_from(p.unsigned_abs()).ok()?;
    let mut acc = int(1);
    for _ in 0..mag {
        acc = acc.checked_mul(&rooted)?;
    }
    if p < 0 {
        acc = int(1).checked_div(&acc)?;
    }
    Some(acc)
}

impl From<i64> for Expr {
    fn from(v: i64) -> Self {
        Expr::int(v)
    }
}

impl From<Rational> for Expr {
    fn from(r: Rational) -> Self {
        Expr::constant(r)
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident, $ctor:ident) => {
        impl ops::$trait<&Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                Expr::$ctor(self, rhs)
            }
        }
        impl ops::$trait<Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::$ctor(&self, &rhs)
            }
        }
        impl ops::$trait<&Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                Expr::$ctor(&self, rhs)
            }
        }
        impl ops::$trait<Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::$ctor(self, &rhs)
            }
        }
    };
}

binop!(Add, add, add);
binop!(Sub, sub, sub);
binop!(Mul, mul, mul);
binop!(Div, div, div);

impl ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(&self)
    }
}

impl ops::Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(self)
    }
}
