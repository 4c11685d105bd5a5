//! The canonical metric, torsion-free connection of a special structure,
//! its curvature, and covariant derivatives of curvature and `d(alpha)`.
//!
//! Directions are frame indices `0..2n` with `2n` standing for `xi`.
//! `gamma[d][k][j]` is the `e_k` component of `nabla_{E_d} e_j`.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::expr::{Differentiator, EvalError, Expr, Rational, Tape};
use crate::frame::{ContactStructure, FrameError, SpecialReport};
use crate::tensor::{HTensor, NTensor};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConnectionError {
    #[error("structure is not special (residuals {:e}, {:e})", .0.horizontal_residual, .0.killing_residual)]
    NotSpecial(SpecialReport),
    #[error("connection axioms fail after construction: {check} residual {residual:e}")]
    Axioms { check: &'static str, residual: f64 },
    #[error("order {requested} exceeds the bound {limit}")]
    OrderBound { requested: usize, limit: usize },
    #[error("tensor of order {order} has {components} components, above the budget {budget}")]
    Budget {
        order: usize,
        components: usize,
        budget: usize,
    },
    #[error("tensor arity mismatch: {0}")]
    Arity(&'static str),
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error("evaluation failed at {point:?}: {source}")]
    Eval { point: Vec<f64>, source: EvalError },
}

pub(crate) fn eval_err(point: &[f64]) -> impl Fn(EvalError) -> ConnectionError + '_ {
    move |source| ConnectionError::Eval {
        point: point.to_vec(),
        source,
    }
}

/// Derivatives along the adapted fields, memoized across calls.
#[derive(Clone)]
pub struct Deriver {
    fields: Vec<Vec<Expr>>,
    lie: bool,
    by_var: Vec<Differentiator>,
    memo: BTreeMap<(usize, usize), (Expr, Expr)>,
}

impl core::fmt::Debug for Deriver {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("Deriver").field("memo", &self.memo.len()).finish()
    }
}

impl Deriver {
    pub fn new(s: &ContactStructure) -> Self {
        let fields = (0..=s.rank()).map(|d| s.adapted(d).clone()).collect();
        Deriver {
            fields,
            lie: s.is_lie(),
            by_var: (0..s.dim()).map(Differentiator::new).collect(),
            memo: BTreeMap::new(),
        }
    }

    /// `E_d(f)` for `d` in `0..=2n`.
    pub fn along(&mut self, d: usize, f: &Expr) -> Expr {
        if self.lie || f.as_const().is_some() {
            return Expr::zero();
        }
        if let Some((_, r)) = self.memo.get(&(d, f.id())) {
            return r.clone();
        }
        let mut terms = Vec::new();
        for (i, c) in self.fields[d].iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let di = self.by_var[i].derive(f);
            if !di.is_zero() {
                terms.push(c * &di);
            }
        }
        let r = Expr::sum(&terms);
        self.memo.insert((d, f.id()), (f.clone(), r.clone()));
        r
    }
}

/// Canonical connection coefficients in frame components.
#[derive(Debug, Clone)]
pub struct Connection {
    s: ContactStructure,
    gamma: Vec<Vec<Vec<Expr>>>,
}

impl Connection {
    /// Builds the connection, refusing non-special structures and
    /// re-checking metricity and torsion at `samples`.
    pub fn new(s: ContactStructure, samples: &[Vec<f64>], tol: f64) -> Result<Self, ConnectionError> {
        let special = s.check_special(samples, tol)?;
        if !special.special {
            return Err(ConnectionError::NotSpecial(special));
        }
        let c = Self::koszul(&s);
        let conn = Connection { s, gamma: c };
        for (check, residual) in conn.axiom_residuals(samples)? {
            if !(residual < tol) {
                return Err(ConnectionError::Axioms { check, residual });
            }
        }
        Ok(conn)
    }

    fn koszul(s: &ContactStructure) -> Vec<Vec<Vec<Expr>>> {
        let r = s.rank();
        let b = s.brackets();
        let half = Expr::ratio(1, 2);
        let mut gamma = vec![vec![vec![Expr::zero(); r]; r]; r + 1];
        for a in 0..r {
            for j in 0..r {
                for k in 0..r {
                    let sum = &(&b.h[k][a][j] - &b.h[j][a][k]) - &b.h[a][j][k];
                    gamma[a][k][j] = &sum * &half;
                }
            }
        }
        for j in 0..r {
            for k in 0..r {
                gamma[r][k][j] = b.xi[k][j].clone();
            }
        }
        gamma
    }

    /// Wraps arbitrary coefficients without any checks.
    pub fn from_parts(s: ContactStructure, gamma: Vec<Vec<Vec<Expr>>>) -> Self {
        Connection { s, gamma }
    }

    /// A copy with `gamma[d][k][j] += delta`.
    pub fn perturbed(&self, d: usize, k: usize, j: usize, delta: Rational) -> Self {
        let mut c = self.clone();
        c.gamma[d][k][j] = &c.gamma[d][k][j] + &Expr::constant(delta);
        c
    }

    pub fn structure(&self) -> &ContactStructure {
        &self.s
    }

    pub fn rank(&self) -> usize {
        self.s.rank()
    }

    /// `gamma[d][k][j]`.
    pub fn gamma(&self) -> &[Vec<Vec<Expr>>] {
        &self.gamma
    }

    /// `[E_a, E_b]` in adapted components (`2n+1` entries, last is `xi`).
    pub fn bracket_components(&self, a: usize, b: usize) -> Vec<Expr> {
        let r = self.rank();
        let br = self.s.brackets();
        let mut out = vec![Expr::zero(); r + 1];
        if a == b {
            return out;
        }
        if a < r && b < r {
            for (m, o) in out.iter_mut().enumerate().take(r) {
                *o = br.h[m][a][b].clone();
            }
            out[r] = br.v[a][b].clone();
        } else if a == r {
            for (m, o) in out.iter_mut().enumerate().take(r) {
                *o = br.xi[m][b].clone();
            }
            out[r] = br.xi_v[b].clone();
        } else {
            out = self.bracket_components(b, a).iter().map(|e| -e).collect();
        }
        out
    }

    /// Max residuals of metricity and horizontal torsion over `points`.
    pub fn axiom_residuals(&self, points: &[Vec<f64>]) -> Result<Vec<(&'static str, f64)>, ConnectionError> {
        let r = self.rank();
        let b = self.s.brackets();
        let mut metric = Vec::new();
        for d in 0..=r {
            for k in 0..r {
                for j in k..r {
                    metric.push(&self.gamma[d][k][j] + &self.gamma[d][j][k]);
                }
            }
        }
        let mut torsion = Vec::new();
        for a in 0..r {
            for j in 0..r {
                for k in 0..r {
                    torsion.push(&(&self.gamma[a][k][j] - &self.gamma[j][k][a]) - &b.h[k][a][j]);
                }
            }
        }
        let m = metric.len();
        let tape = Tape::compile(metric.iter().chain(&torsion));
        let (mut rm, mut rt) = (0.0f64, 0.0f64);
        for p in self.s.sample_points(points) {
            let v = tape.eval(&p).map_err(eval_err(&p))?;
            rm = v[..m].iter().fold(rm, |acc, x| acc.max(x.abs()));
            rt = v[m..].iter().fold(rt, |acc, x| acc.max(x.abs()));
        }
        Ok(vec![("metricity", rm), ("torsion", rt)])
    }

    /// Covariant derivative of a horizontal tensor in direction `d`
    /// (`d = 2n` is `xi`). Slots of the result match `t`.
    pub fn covariant_derivative(&self, t: &HTensor, d: usize, der: &mut Deriver) -> Result<HTensor, ConnectionError> {
        let r = self.rank();
        if t.dim != r || t.upper > 1 {
            return Err(ConnectionError::Arity("tensor dimension must equal the horizontal rank"));
        }
        if d > r {
            return Err(ConnectionError::Arity("direction out of range"));
        }
        let g = &self.gamma[d];
        let rank = t.rank();
        let mut out = HTensor::zeros(t.upper, t.lower, r);
        let mut idx2 = vec![0; rank];
        for flat in 0..t.len() {
            let idx = t.index(flat);
            let mut terms = vec![der.along(d, &t.data[flat])];
            for slot in 0..rank {
                idx2.copy_from_slice(&idx);
                for m in 0..r {
                    idx2[slot] = m;
                    let coeff = if slot < t.upper { &g[idx[slot]][m] } else { &g[m][idx[slot]] };
                    if coeff.is_zero() {
                        continue;
                    }
                    let comp = t.get(&idx2);
                    if comp.is_zero() {
                        continue;
                    }
                    let term = coeff * comp;
                    terms.push(if slot < t.upper { term } else { -term });
                }
            }
            out.data[flat] = Expr::sum(&terms);
        }
        Ok(out)
    }

    /// Full horizontal differential: derivative slot prepended to the lower indices.
    pub fn differential(&self, t: &HTensor, der: &mut Deriver) -> Result<HTensor, ConnectionError> {
        let r = self.rank();
        let parts: Vec<HTensor> = (0..r)
            .map(|d| self.covariant_derivative(t, d, der))
            .collect::<Result<_, _>>()?;
        Ok(HTensor::from_fn(t.upper, t.lower + 1, r, |idx| {
            let d = idx[t.upper];
            let mut rest: Vec<usize> = Vec::with_capacity(t.rank());
            rest.extend_from_slice(&idx[..t.upper]);
            rest.extend_from_slice(&idx[t.upper + 1..]);
            parts[d].get(&rest).clone()
        }))
    }

    /// `R(E_a, E_b) e_j` in the `e_k` direction from
    /// `R(Z,W) = nabla_Z nabla_W - nabla_W nabla_Z - nabla_[Z,W]`,
    /// for any directions `a, b` in `0..=2n`.
    pub fn curvature_component(&self, a: usize, b: usize, k: usize, j: usize, der: &mut Deriver) -> Expr {
        let r = self.rank();
        let g = &self.gamma;
        let mut terms = vec![der.along(a, &g[b][k][j]), -der.along(b, &g[a][k][j])];
        for m in 0..r {
            terms.push(&g[a][k][m] * &g[b][m][j]);
            terms.push(-(&g[b][k][m] * &g[a][m][j]));
        }
        let br = self.bracket_components(a, b);
        for (m, c) in br.iter().enumerate() {
            if !c.is_zero() {
                terms.push(-(c * &g[m][k][j]));
            }
        }
        Expr::sum(&terms)
    }

    /// Curvature as a `(1,3)` tensor `R^k_{ab,j}` stored as `[k][a][b][j]`.
    pub fn curvature(&self, der: &mut Deriver) -> HTensor {
        let r = self.rank();
        let mut t = HTensor::zeros(1, 3, r);
        for k in 0..r {
            for a in 0..r {
                for b in a + 1..r {
                    for j in 0..r {
                        let c = self.curvature_component(a, b, k, j, der);
                        t.set(&[k, b, a, j], -&c);
                        t.set(&[k, a, b, j], c);
                    }
                }
            }
        }
        t
    }

    /// `d(alpha)` on the frame as a `(0,2)` tensor.
    pub fn d_alpha(&self) -> HTensor {
        let r = self.rank();
        let v = &self.s.brackets().v;
        HTensor::from_fn(0, 2, r, |i| -&v[i[0]][i[1]])
    }
}

/// Bounds on how far the derivative cache may grow.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    /// Highest derivative order of `R` and `d(alpha)` that may be built.
    pub max_order: usize,
    /// Largest number of components of a single cached tensor.
    pub max_components: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_order: 7,
            max_components: 1 << 20,
        }
    }
}

/// Numeric values at one point of the cached tensors of a given order.
#[derive(Debug, Clone)]
pub struct OrderValues {
    pub r: NTensor,
    pub r_xi: NTensor,
    pub da: NTensor,
    pub da_xi: NTensor,
}

/// Curvature, `d(alpha)`, their iterated horizontal differentials and
/// one-step `xi`-derivatives, extended lazily.
#[derive(Debug, Clone)]
pub struct Curvature {
    conn: Connection,
    der: Deriver,
    limits: Limits,
    r: Vec<HTensor>,
    r_xi: Vec<HTensor>,
    da: Vec<HTensor>,
    da_xi: Vec<HTensor>,
    tapes: Vec<Tape>,
}

impl Curvature {
    pub fn new(conn: Connection) -> Self {
        Self::with_limits(conn, Limits::default())
    }

    pub fn with_limits(conn: Connection, limits: Limits) -> Self {
        let mut der = Deriver::new(conn.structure());
        let r0 = conn.curvature(&mut der);
        let da0 = conn.d_alpha();
        Curvature {
            conn,
            der,
            limits,
            r: vec![r0],
            r_xi: Vec::new(),
            da: vec![da0],
            da_xi: Vec::new(),
            tapes: Vec::new(),
        }
    }

    pub fn connection(&self) -> &Connection {
        &self.conn
    }

    pub fn structure(&self) -> &ContactStructure {
        self.conn.structure()
    }

    pub fn limits(&self) -> Limits {
        self.limits
    }

    pub fn deriver(&mut self) -> &mut Deriver {
        &mut self.der
    }

    /// Makes `nabla^i R`, `nabla^i d(alpha)` and their `xi`-derivatives
    /// available for `i <= order`.
    pub fn ensure(&mut self, order: usize) -> Result<(), ConnectionError> {
        if order > self.limits.max_order {
            return Err(ConnectionError::OrderBound {
                requested: order,
                limit: self.limits.max_order,
            });
        }
        let dim = self.conn.rank();
        let components = dim.pow((4 + order) as u32);
        if components > self.limits.max_components {
            return Err(ConnectionError::Budget {
                order,
                components,
                budget: self.limits.max_components,
            });
        }
        while self.r.len() <= order {
            let next = self.conn.differential(self.r.last().unwrap(), &mut self.der)?;
            self.r.push(next);
            let next = self.conn.differential(self.da.last().unwrap(), &mut self.der)?;
            self.da.push(next);
        }
        while self.r_xi.len() <= order {
            let i = self.r_xi.len();
            let x = self.conn.covariant_derivative(&self.r[i], dim, &mut self.der)?;
            self.r_xi.push(x);
            let x = self.conn.covariant_derivative(&self.da[i], dim, &mut self.der)?;
            self.da_xi.push(x);
        }
        while self.tapes.len() <= order {
            let i = self.tapes.len();
            let exprs = self.r[i]
                .data
                .iter()
                .chain(&self.r_xi[i].data)
                .chain(&self.da[i].data)
                .chain(&self.da_xi[i].data);
            self.tapes.push(Tape::compile(exprs));
        }
        Ok(())
    }

    /// `nabla^i R`; call [`Curvature::ensure`] first.
    pub fn r(&self, i: usize) -> &HTensor {
        &self.r[i]
    }

    pub fn r_xi(&self, i: usize) -> &HTensor {
        &self.r_xi[i]
    }

    pub fn da(&self, i: usize) -> &HTensor {
        &self.da[i]
    }

    pub fn da_xi(&self, i: usize) -> &HTensor {
        &self.da_xi[i]
    }

    /// Highest order currently cached for every family.
    pub fn cached_order(&self) -> Option<usize> {
        self.tapes.len().checked_sub(1)
    }

    /// Numeric values of the order-`i` tensors at `q`.
    pub fn values(&mut self, i: usize, q: &[f64]) -> Result<OrderValues, ConnectionError> {
        self.ensure(i)?;
        let v = self.tapes[i].eval(q).map_err(eval_err(q))?;
        let (a, b, c) = (self.r[i].len(), self.r_xi[i].len(), self.da[i].len());
        Ok(OrderValues {
            r: self.r[i].with_values(v[..a].to_vec()),
            r_xi: self.r_xi[i].with_values(v[a..a + b].to_vec()),
            da: self.da[i].with_values(v[a + b..a + b + c].to_vec()),
            da_xi: self.da_xi[i].with_values(v[a + b + c..].to_vec()),
        })
    }

    /// Identity residuals over `points`.
    pub fn verify_geometry(&mut self, points: &[Vec<f64>], tol: f64) -> Result<Vec<Check>, ConnectionError> {
        self.ensure(1)?;
        let r = self.conn.rank();
        let pts = self.structure().sample_points(points);
        let mut out = Vec::new();
        for (name, res) in self.conn.axiom_residuals(&pts)? {
            out.push(Check::new(name, res, pts.len(), tol));
        }

        let mut bianchi1 = Vec::new();
        let mut bianchi2 = Vec::new();
        let mut dbianchi = Vec::new();
        let r0 = &self.r[0];
        let r1 = &self.r[1];
        let d1 = &self.da[1];
        for a in 0..r {
            for b in 0..r {
                for c in 0..r {
                    for k in 0..r {
                        bianchi1.push(Expr::sum([r0.get(&[k, a, b, c]), r0.get(&[k, b, c, a]), r0.get(&[k, c, a, b])]));
                        for j in 0..r {
                            bianchi2.push(Expr::sum([
                                r1.get(&[k, a, b, c, j]),
                                r1.get(&[k, b, c, a, j]),
                                r1.get(&[k, c, a, b, j]),
                            ]));
                        }
                    }
                    dbianchi.push(Expr::sum([d1.get(&[a, b, c]), d1.get(&[b, c, a]), d1.get(&[c, a, b])]));
                }
            }
        }
        let mut reeb_curv = Vec::new();
        for b in 0..=r {
            for k in 0..r {
                for j in 0..r {
                    reeb_curv.push(self.conn.curvature_component(r, b, k, j, &mut self.der));
                }
            }
        }
        let mut skew = Vec::new();
        for a in 0..=r {
            for b in 0..=r {
                for k in 0..r {
                    for j in k..r {
                        let (x, y) = if a < r && b < r {
                            (self.r[0].get(&[k, a, b, j]).clone(), self.r[0].get(&[j, a, b, k]).clone())
                        } else {
                            (
                                self.conn.curvature_component(a, b, k, j, &mut self.der),
                                self.conn.curvature_component(a, b, j, k, &mut self.der),
                            )
                        };
                        skew.push(&x + &y);
                    }
                }
            }
        }
        let groups: [(&'static str, &Vec<Expr>); 5] = [
            ("first_bianchi", &bianchi1),
            ("second_bianchi", &bianchi2),
            ("reeb_curvature", &reeb_curv),
            ("curvature_skewness", &skew),
            ("d_alpha_bianchi", &dbianchi),
        ];
        for (name, exprs) in groups {
            out.push(Check::new(name, max_over(exprs, &pts)?, pts.len(), tol));
        }
        Ok(out)
    }
}

pub(crate) fn max_over(exprs: &[Expr], pts: &[Vec<f64>]) -> Result<f64, ConnectionError> {
    let tape = Tape::compile(exprs);
    let mut m = 0.0f64;
    for p in pts {
        let v = tape.eval(p).map_err(eval_err(p))?;
        m = v.iter().fold(m, |acc, x| acc.max(x.abs()));
    }
    Ok(m)
}

/// One named residual check.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub max_residual: f64,
    pub points: usize,
    pub pass: bool,
}

impl Check {
    pub fn new(name: &'static str, max_residual: f64, points: usize, tol: f64) -> Self {
        Check {
            name,
            max_residual,
            points,
            pass: max_residual < tol,
        }
    }
}
