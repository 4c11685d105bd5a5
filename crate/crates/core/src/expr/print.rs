use core::fmt;

use num_traits::{One, Signed};

use super::{Expr, Node};

/// Displays an expression in the input grammar.
///
/// Parentheses follow the tree exactly, so reparsing the output rebuilds
/// the same operations in the same order.
pub struct Printer<'a, S> {
    pub(super) expr: &'a Expr,
    pub(super) names: &'a [S],
}

const SUM: u8 = 1;
const PRODUCT: u8 = 2;
const ATOM: u8 = 3;

fn precedence(e: &Expr) -> u8 {
    match e.node() {
        Node::Add(..) | Node::Sub(..) => SUM,
        Node::Mul(..) | Node::Div(..) => PRODUCT,
        _ => ATOM,
    }
}

impl<S: AsRef<str>> Printer<'_, S> {
    fn write(&self, e: &Expr, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match e.node() {
            Node::Const(r) => {
                if r.denom().is_one() && !r.is_negative() {
                    write!(f, "{}", r.numer())
                } else if r.denom().is_one() {
                    write!(f, "({})", r.numer())
                } else {
                    write!(f, "({}/{})", r.numer(), r.denom())
                }
            }
            Node::Var(i) => match self.names.get(*i) {
                Some(name) => f.write_str(name.as_ref()),
                None => write!(f, "_{i}"),
            },
            Node::Add(a, b) => self.binary(a, "+", b, SUM, false, f),
            Node::Sub(a, b) => self.binary(a, "-", b, SUM, true, f),
            Node::Mul(a, b) => self.binary(a, "*", b, PRODUCT, true, f),
            Node::Div(a, b) => self.binary(a, "/", b, PRODUCT, true, f),
            Node::Pow(a, r) => {
                if r.denom().is_one() && r.is_positive() {
                    self.operand(a, ATOM, false, f)?;
                    write!(f, "^{}", r.numer())
                } else {
                    f.write_str("pow(")?;
                    self.write(a, f)?;
                    if r.denom().is_one() {
                        write!(f, ", {})", r.numer())
                    } else {
                        write!(f, ", {}/{})", r.numer(), r.denom())
                    }
                }
            }
            Node::Neg(a) => {
                f.write_str("-(")?;
                self.write(a, f)?;
                f.write_str(")")
            }
            Node::Sin(a) => self.call("sin", a, f),
            Node::Cos(a) => self.call("cos", a, f),
            Node::Exp(a) => self.call("exp", a, f),
        }
    }

    fn call(&self, name: &str, a: &Expr, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{name}(")?;
        self.write(a, f)?;
        f.write_str(")")
    }

    fn binary(
        &self,
        a: &Expr,
        op: &str,
        b: &Expr,
        level: u8,
        strict_right: bool,
        f: &mut fmt::Formatter<'_>,
    ) -> fmt::Result {
        self.operand(a, level, false, f)?;
        write!(f, " {op} ")?;
        self.operand(b, level, strict_right, f)
    }

    fn operand(
        &self,
        e: &Expr,
        level: u8,
        strict: bool,
        f: &mut fmt::Formatter<'_>,
    ) -> fmt::Result {
        let p = precedence(e);
        // a leading minus would swallow the rest of the term when reparsed
        let wrap = p < level || (strict && p == level) || (level == ATOM && p != ATOM);
        let wrap = wrap || (level == ATOM && matches!(e.node(), Node::Neg(_) | Node::Pow(..)));
        if wrap {
            f.write_str("(")?;
            self.write(e, f)?;
            f.write_str(")")
        } else {
            self.write(e, f)
        }
    }
}

impl<S: AsRef<str>> fmt::Display for Printer<'_, S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write(self.expr, f)
    }
}
