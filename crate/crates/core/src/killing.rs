//! Infinitesimal isometries: the operator `A_Z`, generator spaces,
//! transport of generators along curves and reconstruction of fields.
//!
//! A generator is a triple `(X, A, c)` with `X` horizontal, `A` skew and
//! `c` scalar, all in frame components at a point. `A[k][j]` acts on
//! column vectors, so `A e_j = sum_k A[k][j] e_k`. The unknown vector used
//! for kernels is `(X, a, c)` where `a` lists the strictly lower triangle
//! of `A` row by row.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use crate::connection::{eval_err, max_over, Check, ConnectionError, Curvature};
use crate::expr::{EvalError, Expr, Tape};
use crate::frame::{pair, ContactStructure, Field};
use crate::linalg::{self, DMat};
use crate::tensor::{HTensor, NTensor};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum KillingError {
    #[error(transparent)]
    Connection(#[from] ConnectionError),
    #[error("field has {got} components, expected {expected}")]
    Arity { got: usize, expected: usize },
    #[error("transport needs a coordinate chart")]
    LieTransport,
    #[error("curve starts at {start:?}, generator is based at {base:?}")]
    StartMismatch { start: Vec<f64>, base: Vec<f64> },
    #[error("curves do not share endpoints: {0:?} vs {1:?}")]
    EndpointMismatch(Vec<f64>, Vec<f64>),
    #[error("curve is not horizontal at t = {t}: |alpha(velocity)| = {value:e}")]
    NotHorizontal { t: f64, value: f64 },
    #[error("step must be positive, got {0}")]
    Step(f64),
    #[error("curve evaluation failed at t = {t}: {source}")]
    Curve { t: f64, source: EvalError },
    #[error("generator is not in the generator space at its base point (residual {0:e})")]
    NotMember(f64),
    #[error("point has {got} coordinates, expected {expected}")]
    Point { got: usize, expected: usize },
}

/// A triple `(X, A, c)` based at `q`.
#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    pub x: Vec<f64>,
    pub a: Vec<Vec<f64>>,
    pub c: f64,
    pub q: Vec<f64>,
}

/// Dimension of `H_q + E_q + R` for horizontal rank `r = 2n`.
pub fn unknowns(r: usize) -> usize {
    r + r * (r - 1) / 2 + 1
}

impl Generator {
    pub fn zero(r: usize, q: Vec<f64>) -> Self {
        Generator {
            x: vec![0.0; r],
            a: vec![vec![0.0; r]; r],
            c: 0.0,
            q,
        }
    }

    /// The generator of the Reeb field.
    pub fn reeb(r: usize, q: Vec<f64>) -> Self {
        Generator {
            c: 1.0,
            ..Generator::zero(r, q)
        }
    }

    pub fn rank(&self) -> usize {
        self.x.len()
    }

    /// `(X, strictly lower A, c)`.
    pub fn to_vector(&self) -> Vec<f64> {
        let r = self.rank();
        let mut v = self.x.clone();
        for k in 1..r {
            for l in 0..k {
                v.push(self.a[k][l]);
            }
        }
        v.push(self.c);
        v
    }

    pub fn from_vector(r: usize, v: &[f64], q: Vec<f64>) -> Self {
        let mut g = Generator::zero(r, q);
        g.x.copy_from_slice(&v[..r]);
        let mut i = r;
        for k in 1..r {
            for l in 0..k {
                g.a[k][l] = v[i];
                g.a[l][k] = -v[i];
                i += 1;
            }
        }
        g.c = v[i];
        g
    }

    /// `max |A + A^T|`.
    pub fn skew_defect(&self) -> f64 {
        let r = self.rank();
        let mut m = 0.0f64;
        for k in 0..r {
            for j in 0..r {
                m = m.max((self.a[k][j] + self.a[j][k]).abs());
            }
        }
        m
    }

    /// Componentwise max distance, including every entry of `A`.
    pub fn distance(&self, other: &Generator) -> f64 {
        let mut m = (self.c - other.c).abs();
        for (a, b) in self.x.iter().zip(&other.x) {
            m = m.max((a - b).abs());
        }
        for (ra, rb) in self.a.iter().zip(&other.a) {
            for (a, b) in ra.iter().zip(rb) {
                m = m.max((a - b).abs());
            }
        }
        m
    }

    /// The derivation `nabla_{X + c xi} + A` applied to a tensor, given
    /// its value `t`, horizontal differential `dt` and `xi`-derivative `t_xi`.
    pub fn apply(&self, t: &NTensor, dt: &NTensor, t_xi: &NTensor) -> NTensor {
        let mut out = dt.contract_direction(&self.x);
        let act = t.act(&self.a);
        for ((o, a), x) in out.data.iter_mut().zip(&act.data).zip(&t_xi.data) {
            *o += a + self.c * x;
        }
        out
    }
}

/// The operator data of a vector field `Z` as symbolic fields.
#[derive(Debug, Clone)]
pub struct AzField {
    /// Frame components of `PZ`.
    pub x: Vec<Expr>,
    /// `A[k][j]`: `e_k` component of `[Z, e_j] - nabla_Z e_j`.
    pub a: Vec<Vec<Expr>>,
    /// `alpha(Z)`.
    pub c: Expr,
    /// `alpha([Z, e_j])`; vanishes iff `Z` is contact.
    pub contact: Vec<Expr>,
    /// `[Z, e_j]` in ambient components.
    pub brackets: Vec<Field>,
}

/// `(PZ, A_Z, alpha(Z))` for an ambient field `Z`.
pub fn a_z_field(curv: &Curvature, z: &[Expr]) -> Result<AzField, KillingError> {
    let conn = curv.connection();
    let s = conn.structure();
    if z.len() != s.dim() {
        return Err(KillingError::Arity {
            got: z.len(),
            expected: s.dim(),
        });
    }
    let r = s.rank();
    let x: Vec<Expr> = s.coframe().iter().map(|t| pair(t, z)).collect();
    let c = pair(s.alpha(), z);
    let g = conn.gamma();
    let brackets: Vec<Field> = (0..r).map(|j| s.bracket(z, &s.frame()[j])).collect();
    let mut a = vec![vec![Expr::zero(); r]; r];
    for j in 0..r {
        for k in 0..r {
            let mut terms = vec![pair(&s.coframe()[k], &brackets[j])];
            for (d, xd) in x.iter().enumerate() {
                if !g[d][k][j].is_zero() {
                    terms.push(-(xd * &g[d][k][j]));
                }
            }
            if !g[r][k][j].is_zero() {
                terms.push(-(&c * &g[r][k][j]));
            }
            a[k][j] = Expr::sum(&terms);
        }
    }
    let contact = brackets.iter().map(|b| pair(s.alpha(), b)).collect();
    Ok(AzField {
        x,
        a,
        c,
        contact,
        brackets,
    })
}

/// Evaluates `A_Z` data at `q`; returns the generator and the largest
/// contact residual `|alpha([Z, e_j])|` there.
pub fn a_z_matrix(curv: &Curvature, z: &[Expr], q: &[f64]) -> Result<(Generator, f64), KillingError> {
    let f = a_z_field(curv, z)?;
    f.at(q)
}

impl AzField {
    pub fn at(&self, q: &[f64]) -> Result<(Generator, f64), KillingError> {
        let r = self.x.len();
        let tape = Tape::compile(
            self.x
                .iter()
                .chain(self.a.iter().flatten())
                .chain(core::iter::once(&self.c))
                .chain(&self.contact),
        );
        let v = tape.eval(q).map_err(eval_err(q))?;
        let mut g = Generator::zero(r, q.to_vec());
        g.x.copy_from_slice(&v[..r]);
        for k in 0..r {
            g.a[k].copy_from_slice(&v[r + k * r..r + (k + 1) * r]);
        }
        g.c = v[r + r * r];
        let contact = v[r + r * r + 1..].iter().fold(0.0f64, |m, x| m.max(x.abs()));
        Ok((g, contact))
    }
}

/// Rank decision parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankOptions {
    /// Relative singular value threshold.
    pub rel: f64,
    /// Absolute floor on the threshold.
    pub floor: f64,
    /// Largest order tried before giving up on certification.
    pub m_max: usize,
}

impl Default for RankOptions {
    fn default() -> Self {
        RankOptions {
            rel: 1e-9,
            floor: 1e-12,
            m_max: 6,
        }
    }
}

/// Which orders to include.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Order {
    /// Increase until three consecutive dimensions agree.
    Auto,
    Fixed(usize),
}

/// Basis and dimensions of the generator spaces at a point.
#[derive(Debug, Clone)]
pub struct GeneratorSpace {
    pub q: Vec<f64>,
    pub m_used: usize,
    /// `dims[i]` is the dimension using orders `0..=i`.
    pub dims: Vec<usize>,
    /// Orthonormal (in unknown coordinates) basis of the last space.
    pub basis: Vec<Generator>,
    /// Singular values of the final stacked matrix, decreasing.
    pub singular_values: Vec<f64>,
    pub threshold: f64,
    /// Three consecutive equal dimensions were observed.
    pub certified: bool,
    /// Why the search stopped early, if it did.
    pub stopped: Option<String>,
}

impl GeneratorSpace {
    pub fn dim(&self) -> usize {
        *self.dims.last().unwrap_or(&0)
    }

    /// Distance of a generator (as an unknown vector) from the span.
    pub fn membership_residual(&self, g: &Generator) -> f64 {
        let basis: Vec<Vec<f64>> = self.basis.iter().map(Generator::to_vector).collect();
        linalg::residual_to_span(&g.to_vector(), &basis)
    }
}

/// Rows of `f_q` contributed by order `i`, one column per unknown.
pub fn f_q_block(curv: &mut Curvature, q: &[f64], i: usize) -> Result<DMat, KillingError> {
    let r = curv.structure().rank();
    let now = curv.values(i, q)?;
    let next = curv.values(i + 1, q)?;
    let n_unk = unknowns(r);
    let mut cols = Vec::with_capacity(n_unk);
    for e in 0..n_unk {
        let mut u = vec![0.0; n_unk];
        u[e] = 1.0;
        let g = Generator::from_vector(r, &u, q.to_vec());
        let mut col = g.apply(&now.r, &next.r, &now.r_xi).data;
        col.extend(g.apply(&now.da, &next.da, &now.da_xi).data);
        cols.push(col);
    }
    let rows = cols[0].len();
    let mut m = DMat::zeros(rows, n_unk);
    for (j, col) in cols.iter().enumerate() {
        for (i, v) in col.iter().enumerate() {
            m.set(i, j, *v);
        }
    }
    Ok(m)
}

fn stack(a: &DMat, b: &DMat) -> DMat {
    let mut out = DMat::zeros(a.rows + b.rows, a.cols);
    out.data[..a.data.len()].copy_from_slice(&a.data);
    out.data[a.data.len()..].copy_from_slice(&b.data);
    out
}

/// Dimensions of the generator spaces at `q` and a basis of the last one.
pub fn generator_space(
    curv: &mut Curvature,
    q: &[f64],
    order: Order,
    opts: RankOptions,
) -> Result<GeneratorSpace, KillingError> {
    let s = curv.structure();
    let r = s.rank();
    let q: Vec<f64> = if s.is_lie() { Vec::new() } else { q.to_vec() };
    if !s.is_lie() && q.len() != s.dim() {
        return Err(KillingError::Point {
            got: q.len(),
            expected: s.dim(),
        });
    }
    let last = match order {
        Order::Auto => opts.m_max,
        Order::Fixed(m) => m,
    };
    let mut dims = Vec::new();
    let mut mat = DMat::zeros(0, unknowns(r));
    let mut svd = linalg::svd(&mat);
    let mut stopped = None;
    for m in 0..=last {
        let block = match f_q_block(curv, &q, m) {
            Ok(b) => b,
            Err(KillingError::Connection(e @ (ConnectionError::OrderBound { .. } | ConnectionError::Budget { .. }))) => {
                stopped = Some(alloc::format!("{e}"));
                break;
            }
            Err(e) => return Err(e),
        };
        mat = stack(&mat, &block);
        svd = linalg::svd(&mat);
        dims.push(svd.kernel(opts.rel, opts.floor).len());
        let k = dims.len();
        let stable = k >= 3 && dims[k - 1] == dims[k - 2] && dims[k - 2] == dims[k - 3];
        if order == Order::Auto && stable {
            break;
        }
    }
    let k = dims.len();
    let certified = k >= 3 && dims[k - 1] == dims[k - 2] && dims[k - 2] == dims[k - 3];
    if order == Order::Auto && !certified && stopped.is_none() {
        stopped = Some(alloc::format!("no stabilization up to order {last}"));
    }
    let basis = svd
        .kernel(opts.rel, opts.floor)
        .iter()
        .map(|v| Generator::from_vector(r, v, q.clone()))
        .collect();
    Ok(GeneratorSpace {
        q,
        m_used: k.saturating_sub(1),
        dims,
        basis,
        threshold: svd.threshold(opts.rel, opts.floor),
        singular_values: svd.values,
        certified,
        stopped,
    })
}

/// A parametrized curve in chart coordinates.
pub trait Curve {
    fn range(&self) -> (f64, f64);
    /// Position and velocity at `t`.
    fn eval(&self, t: f64) -> Result<(Vec<f64>, Vec<f64>), EvalError>;
}

/// A curve given by coordinate expressions in the single variable `t`.
#[derive(Debug, Clone)]
pub struct ExprCurve {
    pub gamma: Vec<Expr>,
    pub t0: f64,
    pub t1: f64,
    tape: Tape,
}

impl ExprCurve {
    /// `gamma` are expressions in variable index 0 (the parameter).
    pub fn new(gamma: Vec<Expr>, t0: f64, t1: f64) -> Self {
        let vel: Vec<Expr> = gamma.iter().map(|g| g.differentiate(0)).collect();
        let tape = Tape::compile(gamma.iter().chain(&vel));
        ExprCurve { gamma, t0, t1, tape }
    }
}

impl Curve for ExprCurve {
    fn range(&self) -> (f64, f64) {
        (self.t0, self.t1)
    }

    fn eval(&self, t: f64) -> Result<(Vec<f64>, Vec<f64>), EvalError> {
        let mut v = self.tape.eval(&[t])?;
        let vel = v.split_off(self.gamma.len());
        Ok((v, vel))
    }
}

/// Straight segment `from -> to` over `t in [0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub from: Vec<f64>,
    pub to: Vec<f64>,
}

impl Curve for Segment {
    fn range(&self) -> (f64, f64) {
        (0.0, 1.0)
    }

    fn eval(&self, t: f64) -> Result<(Vec<f64>, Vec<f64>), EvalError> {
        let p = self.from.iter().zip(&self.to).map(|(a, b)| a + t * (b - a)).collect();
        let v = self.from.iter().zip(&self.to).map(|(a, b)| b - a).collect();
        Ok((p, v))
    }
}

/// Pointwise coefficients of the transport system.
struct Coefficients {
    r: usize,
    dim: usize,
    tape: Tape,
}

struct CoeffValues {
    coframe: Vec<f64>,
    alpha: Vec<f64>,
    gamma: Vec<f64>,
    curv: Vec<f64>,
    da: Vec<f64>,
}

impl Coefficients {
    fn new(curv: &Curvature) -> Self {
        let conn = curv.connection();
        let s = conn.structure();
        let tape = Tape::compile(
            s.coframe()
                .iter()
                .flatten()
                .chain(s.alpha())
                .chain(conn.gamma().iter().flatten().flatten())
                .chain(&curv.r(0).data)
                .chain(&curv.da(0).data),
        );
        Coefficients {
            r: s.rank(),
            dim: s.dim(),
            tape,
        }
    }

    fn at(&self, p: &[f64]) -> Result<CoeffValues, EvalError> {
        let mut v = self.tape.eval(p)?;
        let (r, dim) = (self.r, self.dim);
        let da = v.split_off(v.len() - r * r);
        let curv = v.split_off(v.len() - r * r * r * r);
        let gamma = v.split_off(r * dim + dim);
        let alpha = v.split_off(r * dim);
        Ok(CoeffValues {
            coframe: v,
            alpha,
            gamma,
            curv,
            da,
        })
    }
}

/// State layout: `x` (r), `A` row-major (r*r), `c`.
fn rhs(cv: &CoeffValues, r: usize, vel: &[f64], y: &[f64]) -> (Vec<f64>, f64) {
    let dim = vel.len();
    let v: Vec<f64> = (0..r)
        .map(|k| (0..dim).map(|i| cv.coframe[k * dim + i] * vel[i]).sum())
        .collect();
    let v0: f64 = (0..dim).map(|i| cv.alpha[i] * vel[i]).sum();
    // G = sum_d v^d Gamma_d + v0 Gamma_xi
    let mut g = vec![0.0; r * r];
    for d in 0..=r {
        let w = if d < r { v[d] } else { v0 };
        if w == 0.0 {
            continue;
        }
        for kj in 0..r * r {
            g[kj] += w * cv.gamma[d * r * r + kj];
        }
    }
    let x = &y[..r];
    let a = &y[r..r + r * r];
    let mut out = vec![0.0; r + r * r + 1];
    for k in 0..r {
        let mut s = 0.0;
        for j in 0..r {
            s -= a[k * r + j] * v[j] + g[k * r + j] * x[j];
        }
        out[k] = s;
    }
    for k in 0..r {
        for j in 0..r {
            let mut s = 0.0;
            for p in 0..r {
                for b in 0..r {
                    s += x[p] * v[b] * cv.curv[((k * r + p) * r + b) * r + j];
                }
            }
            for m in 0..r {
                s += a[k * r + m] * g[m * r + j] - g[k * r + m] * a[m * r + j];
            }
            out[r + k * r + j] = s;
        }
    }
    let mut c = 0.0;
    for p in 0..r {
        for b in 0..r {
            c -= x[p] * v[b] * cv.da[p * r + b];
        }
    }
    out[r + r * r] = c;
    (out, v0)
}

/// Transport options.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransportOptions {
    /// Step per unit parameter.
    pub step: f64,
    /// Tolerance on `|alpha(velocity)|` when horizontality is required.
    pub horizontal_tol: Option<f64>,
}

impl Default for TransportOptions {
    fn default() -> Self {
        TransportOptions {
            step: 1e-3,
            horizontal_tol: None,
        }
    }
}

/// Endpoint of a transport and diagnostics.
#[derive(Debug, Clone)]
pub struct Transported {
    /// Endpoint with `A` re-skewed as `(A - A^T)/2`.
    pub end: Generator,
    /// Endpoint `A` as integrated.
    pub raw_a: Vec<Vec<f64>>,
    /// Max of `|A + A^T|` over all steps.
    pub skew_drift: f64,
    pub steps: usize,
    /// Max of `|alpha(velocity)|` over evaluation nodes.
    pub max_vertical_speed: f64,
}

/// Classical RK4 integration of the prolongation system along a curve.
pub fn transport(
    curv: &Curvature,
    gen: &Generator,
    curve: &dyn Curve,
    opts: TransportOptions,
) -> Result<Transported, KillingError> {
    let s = curv.structure();
    if s.is_lie() {
        return Err(KillingError::LieTransport);
    }
    if !(opts.step > 0.0) {
        return Err(KillingError::Step(opts.step));
    }
    let r = s.rank();
    let (t0, t1) = curve.range();
    let (start, _) = curve.eval(t0).map_err(|source| KillingError::Curve { t: t0, source })?;
    if start.len() != s.dim() {
        return Err(KillingError::Point {
            got: start.len(),
            expected: s.dim(),
        });
    }
    let mismatch = start.iter().zip(&gen.q).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    if gen.q.len() != start.len() || mismatch >= 1e-9 {
        return Err(KillingError::StartMismatch {
            start,
            base: gen.q.clone(),
        });
    }
    let coeffs = Coefficients::new(curv);
    let steps = Float::ceil((t1 - t0).abs() / opts.step).max(1.0) as usize;
    let h = (t1 - t0) / steps as f64;

    let mut y = vec![0.0; r + r * r + 1];
    y[..r].copy_from_slice(&gen.x);
    for k in 0..r {
        y[r + k * r..r + (k + 1) * r].copy_from_slice(&gen.a[k]);
    }
    y[r + r * r] = gen.c;

    let mut drift = 0.0f64;
    let mut vertical = 0.0f64;
    let mut field = |t: f64, y: &[f64]| -> Result<Vec<f64>, KillingError> {
        let (p, vel) = curve.eval(t).map_err(|source| KillingError::Curve { t, source })?;
        let cv = coeffs.at(&p).map_err(|source| KillingError::Curve { t, source })?;
        let (dy, v0) = rhs(&cv, r, &vel, y);
        vertical = vertical.max(v0.abs());
        if let Some(tol) = opts.horizontal_tol {
            if v0.abs() >= tol {
                return Err(KillingError::NotHorizontal { t, value: v0.abs() });
            }
        }
        Ok(dy)
    };
    let axpy = |y: &[f64], k: &[f64], s: f64| -> Vec<f64> { y.iter().zip(k).map(|(a, b)| a + s * b).collect() };
    for i in 0..steps {
        let t = t0 + i as f64 * h;
        let k1 = field(t, &y)?;
        let k2 = field(t + 0.5 * h, &axpy(&y, &k1, 0.5 * h))?;
        let k3 = field(t + 0.5 * h, &axpy(&y, &k2, 0.5 * h))?;
        let k4 = field(t + h, &axpy(&y, &k3, h))?;
        for j in 0..y.len() {
            y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        for k in 0..r {
            for j in 0..r {
                drift = drift.max((y[r + k * r + j] + y[r + j * r + k]).abs());
            }
        }
    }
    let (end_point, _) = curve.eval(t1).map_err(|source| KillingError::Curve { t: t1, source })?;
    let raw_a: Vec<Vec<f64>> = (0..r).map(|k| y[r + k * r..r + (k + 1) * r].to_vec()).collect();
    let mut end = Generator::zero(r, end_point);
    end.x.copy_from_slice(&y[..r]);
    for k in 0..r {
        for j in 0..r {
            end.a[k][j] = 0.5 * (raw_a[k][j] - raw_a[j][k]);
        }
    }
    end.c = y[r + r * r];
    Ok(Transported {
        end,
        raw_a,
        skew_drift: drift,
        steps,
        max_vertical_speed: vertical,
    })
}

/// Endpoint deviation of transports along two curves with common ends.
#[derive(Debug, Clone)]
pub struct PathCheck {
    pub first: Transported,
    pub second: Transported,
    pub deviation: f64,
}

pub fn path_independence(
    curv: &Curvature,
    gen: &Generator,
    c1: &dyn Curve,
    c2: &dyn Curve,
    opts: TransportOptions,
) -> Result<PathCheck, KillingError> {
    let ends = |c: &dyn Curve| -> Result<(Vec<f64>, Vec<f64>), KillingError> {
        let (t0, t1) = c.range();
        let a = c.eval(t0).map_err(|source| KillingError::Curve { t: t0, source })?.0;
        let b = c.eval(t1).map_err(|source| KillingError::Curve { t: t1, source })?.0;
        Ok((a, b))
    };
    let (a1, b1) = ends(c1)?;
    let (a2, b2) = ends(c2)?;
    let far = |u: &[f64], v: &[f64]| u.iter().zip(v).any(|(x, y)| (x - y).abs() >= 1e-9);
    if far(&a1, &a2) {
        return Err(KillingError::EndpointMismatch(a1, a2));
    }
    if far(&b1, &b2) {
        return Err(KillingError::EndpointMismatch(b1, b2));
    }
    let first = transport(curv, gen, c1, opts)?;
    let second = transport(curv, gen, c2, opts)?;
    let deviation = first.end.distance(&second.end);
    Ok(PathCheck {
        first,
        second,
        deviation,
    })
}

/// A rectangular coordinate grid.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Grid {
    pub axes: Vec<Vec<f64>>,
}

impl Grid {
    /// `count` evenly spaced values on `[lo, hi]` per axis.
    pub fn uniform(spec: &[(f64, f64, usize)]) -> Self {
        let axes = spec
            .iter()
            .map(|&(lo, hi, n)| match n {
                0 => Vec::new(),
                1 => vec![lo],
                _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
            })
            .collect();
        Grid { axes }
    }

    pub fn len(&self) -> usize {
        if self.axes.is_empty() {
            0
        } else {
            self.axes.iter().map(Vec::len).product()
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(Vec::len).collect()
    }

    /// Multi-index of a flat (lexicographic, last axis fastest) index.
    pub fn multi(&self, mut flat: usize) -> Vec<usize> {
        let shape = self.shape();
        let mut idx = vec![0; shape.len()];
        for (slot, n) in idx.iter_mut().zip(&shape).rev() {
            *slot = flat % n;
            flat /= n;
        }
        idx
    }

    pub fn flat(&self, idx: &[usize]) -> usize {
        idx.iter().zip(self.shape()).fold(0, |acc, (i, n)| acc * n + i)
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        self.multi(flat).iter().zip(&self.axes).map(|(&i, ax)| ax[i]).collect()
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    /// Flat indices of the axis neighbours of a point.
    pub fn neighbours(&self, flat: usize) -> Vec<usize> {
        let idx = self.multi(flat);
        let shape = self.shape();
        let mut out = Vec::new();
        for ax in 0..idx.len() {
            if idx[ax] > 0 {
                let mut j = idx.clone();
                j[ax] -= 1;
                out.push(self.flat(&j));
            }
            if idx[ax] + 1 < shape[ax] {
                let mut j = idx.clone();
                j[ax] += 1;
                out.push(self.flat(&j));
            }
        }
        out
    }

    /// True when the point has both neighbours along every axis.
    pub fn is_interior(&self, flat: usize) -> bool {
        let idx = self.multi(flat);
        idx.iter().zip(self.shape()).all(|(&i, n)| i > 0 && i + 1 < n)
    }
}

/// One reconstructed sample.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSample {
    pub q: Vec<f64>,
    pub x: Vec<f64>,
    pub a: Vec<Vec<f64>>,
    pub c: f64,
    /// Ambient components of `Z = X + c xi`.
    pub z: Vec<f64>,
}

/// A field reconstructed on a grid from a generator.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteField {
    pub grid: Grid,
    pub samples: Vec<FieldSample>,
}

/// Transports `gen` to every grid point along two straight legs: first
/// along the last coordinate, then directly to the point.
pub fn reconstruct_field(
    curv: &mut Curvature,
    gen: &Generator,
    grid: &Grid,
    opts: TransportOptions,
    rank: RankOptions,
) -> Result<DiscreteField, KillingError> {
    let space = generator_space(curv, &gen.q, Order::Auto, rank)?;
    let residual = space.membership_residual(gen);
    if !(residual < 1e-8) {
        return Err(KillingError::NotMember(residual));
    }
    let s = curv.structure();
    if s.is_lie() {
        return Err(KillingError::LieTransport);
    }
    let dim = s.dim();
    if grid.axes.len() != dim {
        return Err(KillingError::Point {
            got: grid.axes.len(),
            expected: dim,
        });
    }
    let frame_tape = Tape::compile(s.frame().iter().flatten().chain(s.reeb()));
    let r = s.rank();
    let mut first_leg: Vec<(f64, Generator)> = Vec::new();
    let mut samples = Vec::with_capacity(grid.len());
    for q in grid.points() {
        let last = q[dim - 1];
        let mid = match first_leg.iter().find(|(z, _)| *z == last) {
            Some((_, g)) => g.clone(),
            None => {
                let mut target = gen.q.clone();
                target[dim - 1] = last;
                let g = transport(
                    curv,
                    gen,
                    &Segment {
                        from: gen.q.clone(),
                        to: target,
                    },
                    opts,
                )?
                .end;
                first_leg.push((last, g.clone()));
                g
            }
        };
        let end = transport(
            curv,
            &mid,
            &Segment {
                from: mid.q.clone(),
                to: q.clone(),
            },
            opts,
        )?
        .end;
        let fv = frame_tape.eval(&q).map_err(eval_err(&q))?;
        let z = (0..dim)
            .map(|i| {
                let mut acc = end.c * fv[r * dim + i];
                for k in 0..r {
                    acc += end.x[k] * fv[k * dim + i];
                }
                acc
            })
            .collect();
        samples.push(FieldSample {
            q,
            x: end.x.clone(),
            a: end.a.clone(),
            c: end.c,
            z,
        });
    }
    Ok(DiscreteField {
        grid: grid.clone(),
        samples,
    })
}

/// Residuals of the three first-order equations a reconstructed field
/// must satisfy, with derivatives by central differences on interior
/// grid points.
pub fn verify_discrete(curv: &Curvature, field: &DiscreteField, tol: f64) -> Result<Vec<Check>, KillingError> {
    let conn = curv.connection();
    let s = conn.structure();
    let (r, dim) = (s.rank(), s.dim());
    let coeffs = Tape::compile(
        s.frame()
            .iter()
            .flatten()
            .chain(conn.gamma().iter().flatten().flatten())
            .chain(&curv.r(0).data)
            .chain(&curv.da(0).data),
    );
    let grid = &field.grid;
    let (mut rx, mut ra, mut rc) = (0.0f64, 0.0f64, 0.0f64);
    let mut tested = 0;
    for flat in 0..grid.len() {
        if !grid.is_interior(flat) {
            continue;
        }
        tested += 1;
        let smp = &field.samples[flat];
        let v = coeffs.eval(&smp.q).map_err(eval_err(&smp.q))?;
        let fr = &v[..r * dim];
        let gm = &v[r * dim..r * dim + (r + 1) * r * r];
        let rt = &v[r * dim + (r + 1) * r * r..r * dim + (r + 1) * r * r + r * r * r * r];
        let da = &v[v.len() - r * r..];
        let idx = grid.multi(flat);
        // coordinate partials of (x, a, c)
        let mut partial = vec![vec![0.0; r + r * r + 1]; dim];
        for (ax, p) in partial.iter_mut().enumerate() {
            let mut lo = idx.clone();
            lo[ax] -= 1;
            let mut hi = idx.clone();
            hi[ax] += 1;
            let (a, b) = (&field.samples[grid.flat(&lo)], &field.samples[grid.flat(&hi)]);
            let width = grid.axes[ax][hi[ax]] - grid.axes[ax][lo[ax]];
            let pack = |f: &FieldSample| {
                let mut w = f.x.clone();
                w.extend(f.a.iter().flatten());
                w.push(f.c);
                w
            };
            let (wa, wb) = (pack(a), pack(b));
            for ((o, x), y) in p.iter_mut().zip(&wa).zip(&wb) {
                *o = (y - x) / width;
            }
        }
        for ya in 0..r {
            // Y = e_ya; Y(F) = sum_i e_ya^i dF/dx^i
            let yf = |slot: usize| -> f64 { (0..dim).map(|i| fr[ya * dim + i] * partial[i][slot]).sum() };
            let g = |k: usize, j: usize| gm[(ya * r + k) * r + j];
            for k in 0..r {
                let mut e = yf(k) + smp.a[k][ya];
                for m in 0..r {
                    e += g(k, m) * smp.x[m];
                }
                rx = rx.max(e.abs());
                for j in 0..r {
                    let mut rxy = 0.0;
                    for b in 0..r {
                        rxy += smp.x[b] * rt[((k * r + b) * r + ya) * r + j];
                    }
                    let mut nab = yf(r + k * r + j);
                    for m in 0..r {
                        nab += g(k, m) * smp.a[m][j] - smp.a[k][m] * g(m, j);
                    }
                    ra = ra.max((rxy - nab).abs());
                }
            }
            let mut e = yf(r + r * r);
            for b in 0..r {
                e += smp.x[b] * da[b * r + ya];
            }
            rc = rc.max(e.abs());
        }
    }
    Ok(vec![
        Check::new("eqs_y_position", rx, tested, tol),
        Check::new("eqs_y_operator", ra, tested, tol),
        Check::new("eqs_y_function", rc, tested, tol),
    ])
}

/// Killing-field identity residuals for an expression-valued field.
pub fn verify_killing(
    curv: &mut Curvature,
    z: &[Expr],
    points: &[Vec<f64>],
    tol: f64,
) -> Result<Vec<Check>, KillingError> {
    let az = a_z_field(curv, z)?;
    let conn = curv.connection().clone();
    let s = conn.structure();
    let r = s.rank();
    let pts = s.sample_points(points);
    let mut groups: Vec<(&'static str, Vec<Expr>)> = Vec::new();

    let cz = pair(s.alpha(), z);
    groups.push((
        "contact",
        (0..r)
            .map(|j| &s.d_alpha(z, &s.frame()[j]) + &s.derive(&s.frame()[j], &cz))
            .collect(),
    ));
    let mut killing = Vec::new();
    for i in 0..r {
        for j in i..r {
            killing.push(&pair(&s.coframe()[j], &az.brackets[i]) + &pair(&s.coframe()[i], &az.brackets[j]));
        }
    }
    groups.push(("killing", killing));
    let mut skew = Vec::new();
    for k in 0..r {
        for j in k..r {
            skew.push(&az.a[k][j] + &az.a[j][k]);
        }
    }
    groups.push(("a_skew", skew));

    let a_t = HTensor::from_fn(1, 1, r, |i| az.a[i[0]][i[1]].clone());
    let der = curv.deriver();
    let a_xi = conn.covariant_derivative(&a_t, r, der)?;
    groups.push(("a_reeb_parallel", a_xi.data.clone()));

    let mut curv_terms = Vec::new();
    for a in 0..r {
        let na = conn.covariant_derivative(&a_t, a, der)?;
        for k in 0..r {
            for j in 0..r {
                let mut terms = vec![na.get(&[k, j]).clone()];
                for b in 0..r {
                    let c = conn.curvature_component(b, a, k, j, der);
                    terms.push(-(&az.x[b] * &c));
                }
                let c = conn.curvature_component(r, a, k, j, der);
                terms.push(-(&az.c * &c));
                curv_terms.push(Expr::sum(&terms));
            }
        }
    }
    groups.push(("a_derivative_curvature", curv_terms));

    let x_t = HTensor::from_fn(1, 0, r, |i| az.x[i[0]].clone());
    let mut proj_terms = Vec::new();
    for d in 0..=r {
        let nx = conn.covariant_derivative(&x_t, d, der)?;
        for k in 0..r {
            let e = nx.get(&[k]).clone();
            proj_terms.push(if d < r { &e + &az.a[k][d] } else { e });
        }
    }
    groups.push(("projection_derivative", proj_terms));

    groups.push(("reeb_commutes", s.bracket(s.reeb(), z)));

    let mut lie_alpha = Vec::new();
    for d in 0..=r {
        let v = s.adapted(d);
        let av = pair(s.alpha(), v);
        let b = s.bracket(z, v);
        lie_alpha.push(&s.derive(z, &av) - &pair(s.alpha(), &b));
    }
    groups.push(("lie_alpha", lie_alpha));

    let mut out = Vec::new();
    for (name, exprs) in &groups {
        out.push(Check::new(name, max_over(exprs, &pts)?, pts.len(), tol));
    }
    Ok(out)
}

/// Killing equation for the Riemannian metric making `(e_1..e_2n, xi)`
/// orthonormal.
pub fn riemannian_extension_check(
    s: &ContactStructure,
    z: &[Expr],
    points: &[Vec<f64>],
    tol: f64,
) -> Result<Check, KillingError> {
    if z.len() != s.dim() {
        return Err(KillingError::Arity {
            got: z.len(),
            expected: s.dim(),
        });
    }
    let r = s.rank();
    let dual = |k: usize| if k < r { &s.coframe()[k] } else { s.alpha() };
    let brackets: Vec<Field> = (0..=r).map(|u| s.bracket(z, s.adapted(u))).collect();
    let mut exprs = Vec::new();
    for u in 0..=r {
        for v in u..=r {
            exprs.push(&pair(dual(v), &brackets[u]) + &pair(dual(u), &brackets[v]));
        }
    }
    let pts = s.sample_points(points);
    Ok(Check::new("riemannian_killing", max_over(&exprs, &pts)?, pts.len(), tol))
}

/// Dimension data of a regularity scan.
#[derive(Debug, Clone, Default)]
pub struct RegularityMap {
    pub points: Vec<Vec<f64>>,
    pub dims: Vec<usize>,
    pub orders: Vec<usize>,
    pub certified: Vec<bool>,
    /// All axis neighbours share the point's dimension.
    pub regular: Vec<bool>,
    /// Pairs `(q0, p)` with `dim i_{m0}(p) > dim i(q0)` for a neighbour `p`.
    pub semicontinuity_violations: Vec<(usize, usize)>,
}

/// Dimension of `i(q)` over a grid, regularity flags and the
/// semicontinuity check. Lie mode evaluates a single point.
pub fn scan_regularity(
    curv: &mut Curvature,
    grid: &Grid,
    rank: RankOptions,
) -> Result<RegularityMap, KillingError> {
    let lie = curv.structure().is_lie();
    let points = if lie { vec![Vec::new()] } else { grid.points() };
    let mut spaces = Vec::with_capacity(points.len());
    for p in &points {
        spaces.push(generator_space(curv, p, Order::Auto, rank)?);
    }
    let mut map = RegularityMap {
        points: points.clone(),
        dims: spaces.iter().map(GeneratorSpace::dim).collect(),
        orders: spaces.iter().map(|s| s.m_used).collect(),
        certified: spaces.iter().map(|s| s.certified).collect(),
        ..RegularityMap::default()
    };
    for i in 0..points.len() {
        let nb = if lie { Vec::new() } else { grid.neighbours(i) };
        map.regular.push(nb.iter().all(|&j| map.dims[j] == map.dims[i]));
        let m0 = spaces[i].m_used;
        for &j in &nb {
            let dj = &spaces[j].dims;
            let at_m0 = dj[m0.min(dj.len() - 1)];
            if at_m0 > map.dims[i] {
                map.semicontinuity_violations.push((i, j));
            }
        }
    }
    Ok(map)
}
