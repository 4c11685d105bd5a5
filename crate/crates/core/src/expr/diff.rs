use alloc::collections::BTreeMap;

use num_traits::One;

use super::{Expr, Node};

/// Symbolic partial derivative with respect to one variable.
///
/// Results are memoized per shared node, so differentiating many
/// expressions that share subtrees (tensor components built from the
/// same frame data) stays linear in the size of the shared graph.
#[derive(Clone)]
pub struct Differentiator {
    var: usize,
    memo: BTreeMap<usize, (Expr, Expr)>,
}

impl Differentiator {
    pub fn new(var: usize) -> Self {
        Differentiator {
            var,
            memo: BTreeMap::new(),
        }
    }

    pub fn var(&self) -> usize {
        self.var
    }

    pub fn derive(&mut self, e: &Expr) -> Expr {
        if let Some((_, d)) = self.memo.get(&e.id()) {
            return d.clone();
        }
        let d = match e.node() {
            Node::Const(_) => Expr::zero(),
            Node::Var(i) => {
                if *i == self.var {
                    Expr::one()
                } else {
                    Expr::zero()
                }
            }
            Node::Add(a, b) => {
                let (da, db) = (self.derive(a), self.derive(b));
                &da + &db
            }
            Node::Sub(a, b) => {
                let (da, db) = (self.derive(a), self.derive(b));
                &da - &db
            }
            Node::Mul(a, b) => {
                let (da, db) = (self.derive(a), self.derive(b));
                &(&da * b) + &(a * &db)
            }
            Node::Div(a, b) => {
                let (da, db) = (self.derive(a), self.derive(b));
                if db.is_zero() {
                    &da / b
                } else {
                    let num = &(&da * b) - &(a * &db);
                    &num / &Expr::powi(b, 2)
                }
            }
            Node::Pow(u, r) => {
                let du = self.derive(u);
                if du.is_zero() {
                    Expr::zero()
                } else {
                    let lowered = Expr::pow(u, *r - super::Rational::one());
                    &(&lowered * &Expr::constant(*r)) * &du
                }
            }
            Node::Neg(a) => -self.derive(a),
            Node::Sin(a) => {
                let da = self.derive(a);
                &Expr::cos(a) * &da
            }
            Node::Cos(a) => {
                let da = self.derive(a);
                -(&Expr::sin(a) * &da)
            }
            Node::Exp(a) => {
                let da = self.derive(a);
                e * &da
            }
        };
        // keep `e` alive alongside its id so the address cannot be reused
        self.memo.insert(e.id(), (e.clone(), d.clone()));
        d
    }
}
