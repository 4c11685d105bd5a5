//! Contact structures given by an orthonormal horizontal frame.
//!
//! A structure lives either on a coordinate chart (frame coefficients are
//! expressions in the coordinates) or on a Lie algebra (left-invariant
//! frame given by structure constants). Lie mode reuses the chart
//! machinery with constant coefficients: directional derivatives vanish
//! and brackets come from the structure constants.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::expr::{EvalError, Expr, Rational, Tape};
use crate::linalg;

/// A vector field or covector as coefficients in the ambient basis.
pub type Field = Vec<Expr>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FrameError {
    #[error("n must be at least 1")]
    ZeroDimension,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("structure constants violate the Jacobi identity for ({0},{1},{2})")]
    Jacobi(usize, usize, usize),
    #[error("frame is linearly dependent at {0:?}")]
    Degenerate(Vec<f64>),
    #[error("distribution is not contact at {0:?} (wedge power of d(alpha0) vanishes)")]
    NonContact(Vec<f64>),
    #[error(
        "orientation mismatch at {point:?}: wedge power is {value} < 0 with n even; \
         negate one frame field to reverse the orientation"
    )]
    Orientation { point: Vec<f64>, value: f64 },
    #[error("Reeb system is singular at {0:?} (internal inconsistency)")]
    SingularReeb(Vec<f64>),
    #[error("the opposite orientation exists only for even n")]
    OddOrientation,
    #[error("evaluation failed at {point:?}: {source}")]
    Eval { point: Vec<f64>, source: EvalError },
}

/// How vector fields are represented.
#[derive(Debug, Clone, PartialEq)]
pub enum Mode {
    /// Coefficients in the coordinate basis of a chart.
    Chart { coords: Vec<String> },
    /// Components in a Lie algebra basis; `constants[i][j][k]` is the
    /// coefficient of `b_k` in `[b_i, b_j]`.
    Lie { constants: Vec<Vec<Vec<Rational>>> },
}

impl Mode {
    pub fn is_lie(&self) -> bool {
        matches!(self, Mode::Lie { .. })
    }

    /// `V(f)`.
    pub fn derive(&self, v: &[Expr], f: &Expr) -> Expr {
        match self {
            Mode::Lie { .. } => Expr::zero(),
            Mode::Chart { .. } => {
                let terms: Vec<Expr> = v
                    .iter()
                    .enumerate()
                    .filter(|(_, vi)| !vi.is_zero())
                    .map(|(i, vi)| vi * &f.differentiate(i))
                    .collect();
                Expr::sum(&terms)
            }
        }
    }

    /// Jacobi-Lie bracket `[V, W]`.
    pub fn bracket(&self, v: &[Expr], w: &[Expr]) -> Field {
        match self {
            Mode::Chart { .. } => (0..w.len())
                .map(|k| &self.derive(v, &w[k]) - &self.derive(w, &v[k]))
                .collect(),
            Mode::Lie { constants } => {
                let dim = v.len();
                (0..dim)
                    .map(|k| {
                        let mut terms = Vec::new();
                        for i in 0..dim {
                            for j in 0..dim {
                                let c = constants[i][j][k];
                                if c != Rational::from_integer(0) {
                                    terms.push(&(&v[i] * &w[j]) * &Expr::constant(c));
                                }
                            }
                        }
                        Expr::sum(&terms)
                    })
                    .collect()
            }
        }
    }
}

/// Contraction `a(V) = sum a_i V^i`.
pub fn pair(a: &[Expr], v: &[Expr]) -> Expr {
    let terms: Vec<Expr> = a.iter().zip(v).map(|(x, y)| x * y).collect();
    Expr::sum(&terms)
}

fn scale(f: &Expr, v: &[Expr]) -> Field {
    v.iter().map(|x| f * x).collect()
}

/// Input to normalization: dimension, mode and horizontal frame.
#[derive(Debug, Clone)]
pub struct RawStructure {
    pub n: usize,
    pub mode: Mode,
    /// `2n` fields with `2n+1` coefficients each.
    pub frame: Vec<Field>,
}

impl RawStructure {
    /// A chart structure from frame coefficients.
    pub fn chart(n: usize, coords: Vec<String>, frame: Vec<Field>) -> Result<Self, FrameError> {
        let raw = RawStructure {
            n,
            mode: Mode::Chart { coords },
            frame,
        };
        raw.validate()?;
        Ok(raw)
    }

    /// A left-invariant structure with `H` spanned by the first `2n`
    /// basis vectors. `brackets` lists `(i, j, k, c)` meaning `c` is the
    /// `b_k` coefficient of `[b_i, b_j]` (zero-based, `i < j`).
    pub fn lie(n: usize, brackets: &[(usize, usize, usize, Rational)]) -> Result<Self, FrameError> {
        if n == 0 {
            return Err(FrameError::ZeroDimension);
        }
        let dim = 2 * n + 1;
        let zero = Rational::from_integer(0);
        let mut c = vec![vec![vec![zero; dim]; dim]; dim];
        for &(i, j, k, v) in brackets {
            if i >= j || j >= dim || k >= dim {
                return Err(FrameError::Dimension(alloc::format!(
                    "bracket index ({i},{j},{k}) out of range or not increasing"
                )));
            }
            c[i][j][k] = v;
            c[j][i][k] = -v;
        }
        for i in 0..dim {
            for j in i + 1..dim {
                for k in j + 1..dim {
                    for l in 0..dim {
                        let mut s = zero;
                        for m in 0..dim {
                            s += c[j][k][m] * c[i][m][l]
                                + c[k][i][m] * c[j][m][l]
                                + c[i][j][m] * c[k][m][l];
                        }
                        if s != zero {
                            return Err(FrameError::Jacobi(i, j, k));
                        }
                    }
                }
            }
        }
        let frame = (0..2 * n)
            .map(|i| (0..dim).map(|k| if k == i { Expr::one() } else { Expr::zero() }).collect())
            .collect();
        Ok(RawStructure {
            n,
            mode: Mode::Lie { constants: c },
            frame,
        })
    }

    pub fn dim(&self) -> usize {
        2 * self.n + 1
    }

    fn validate(&self) -> Result<(), FrameError> {
        if self.n == 0 {
            return Err(FrameError::ZeroDimension);
        }
        let dim = self.dim();
        if let Mode::Chart { coords } = &self.mode {
            if coords.len() != dim {
                return Err(FrameError::Dimension(alloc::format!(
                    "expected {dim} coordinates, got {}",
                    coords.len()
                )));
            }
        }
        if self.frame.len() != 2 * self.n {
            return Err(FrameError::Dimension(alloc::format!(
                "expected {} frame fields, got {}",
                2 * self.n,
                self.frame.len()
            )));
        }
        if let Some(bad) = self.frame.iter().position(|f| f.len() != dim) {
            return Err(FrameError::Dimension(alloc::format!(
                "frame field {} has {} coefficients, expected {dim}",
                bad + 1,
                self.frame[bad].len()
            )));
        }
        Ok(())
    }
}

/// Frame components of all brackets among `e_1..e_2n, xi`.
///
/// Indices are zero-based frame indices; `h[k][i][j]` is the `e_k`
/// component of `[e_i, e_j]`, `v[i][j]` its `xi` component, `xi[k][j]`
/// the `e_k` component of `[xi, e_j]` and `xi_v[j]` its `xi` component.
#[derive(Debug, Clone)]
pub struct Brackets {
    pub h: Vec<Vec<Vec<Expr>>>,
    pub v: Vec<Vec<Expr>>,
    pub xi: Vec<Vec<Expr>>,
    pub xi_v: Vec<Expr>,
}

/// A normalized contact sub-Riemannian structure.
#[derive(Debug, Clone)]
pub struct ContactStructure {
    n: usize,
    mode: Mode,
    frame: Vec<Field>,
    alpha0: Field,
    wedge0: Expr,
    alpha: Field,
    reeb: Field,
    coframe: Vec<Field>,
    orientation_sign: i8,
    brackets: Brackets,
}

/// `n!`-normalized wedge power of a 2-form given by its frame matrix.
///
/// Sums over all permutations of `0..2n` (fixed lexicographic order, so
/// results are reproducible) with the determinant convention
/// `(w1 ^ .. ^ wn)(v1..v2n) = 2^-n sum_s sgn(s) prod_k w(v_s(2k-1), v_s(2k))`.
pub fn wedge_power(m: &[Vec<Expr>]) -> Expr {
    let size = m.len();
    let n = size / 2;
    let mut perm: Vec<usize> = (0..size).collect();
    let mut terms = Vec::new();
    permutations(&mut perm, 0, 1, &mut |p, sign| {
        let mut prod = Expr::int(sign);
        for k in 0..n {
            prod = &prod * &m[p[2 * k]][p[2 * k + 1]];
            if prod.is_zero() {
                return;
            }
        }
        terms.push(prod);
    });
    &Expr::sum(&terms) * &Expr::ratio(1, 1i64 << n)
}

fn permutations(p: &mut [usize], start: usize, sign: i64, f: &mut dyn FnMut(&[usize], i64)) {
    if start == p.len() {
        f(p, sign);
        return;
    }
    for i in start..p.len() {
        p.swap(start, i);
        let s = if i == start { sign } else { -sign };
        permutations(p, start + 1, s, f);
        p.swap(start, i);
    }
}

impl ContactStructure {
    /// Normalizes the contact form, solves for the Reeb field and derives
    /// the structure functions. Preconditions are checked at `samples`
    /// (ignored in Lie mode, where everything is constant).
    pub fn new(raw: RawStructure, samples: &[Vec<f64>]) -> Result<Self, FrameError> {
        raw.validate()?;
        let RawStructure { n, mode, frame } = raw;
        let dim = 2 * n + 1;
        let points: Vec<Vec<f64>> = if mode.is_lie() || samples.is_empty() {
            vec![Vec::new()]
        } else {
            samples.to_vec()
        };
        let chart_points = !mode.is_lie() && !samples.is_empty();

        // alpha0(V) = det[e_1; ..; e_2n; V]
        let mut rows: Vec<Vec<Expr>> = frame.clone();
        rows.push(vec![Expr::zero(); dim]);
        let alpha0: Field = (0..dim).map(|i| linalg::cofactor(&rows, 2 * n, i)).collect();

        // d(alpha0)(e_i, e_j) = -alpha0([e_i, e_j]) on the frame
        let mut d0 = vec![vec![Expr::zero(); 2 * n]; 2 * n];
        let mut frame_brackets = vec![vec![Vec::new(); 2 * n]; 2 * n];
        for i in 0..2 * n {
            for j in i + 1..2 * n {
                let b = mode.bracket(&frame[i], &frame[j]);
                let v = -pair(&alpha0, &b);
                d0[j][i] = -&v;
                d0[i][j] = v;
                frame_brackets[i][j] = b;
            }
        }
        let wedge0 = wedge_power(&d0);

        if chart_points || mode.is_lie() {
            let tape = Tape::compile(alpha0.iter().chain(core::iter::once(&wedge0)));
            for p in &points {
                let vals = tape.eval(p).map_err(|e| FrameError::Eval {
                    point: p.clone(),
                    source: e,
                })?;
                if vals[..dim].iter().all(|v| v.abs() < 1e-12) {
                    return Err(FrameError::Degenerate(p.clone()));
                }
                let v = vals[dim];
                if v.abs() < 1e-12 {
                    return Err(FrameError::NonContact(p.clone()));
                }
                if n % 2 == 0 && v < 0.0 {
                    return Err(FrameError::Orientation {
                        point: p.clone(),
                        value: v,
                    });
                }
            }
        } else if wedge0.is_zero() {
            return Err(FrameError::NonContact(Vec::new()));
        }

        let f = Expr::pow(&wedge0, Rational::new(-1, n as i64));
        let alpha = scale(&f, &alpha0);

        let mut s = ContactStructure {
            n,
            mode,
            frame,
            alpha0,
            wedge0,
            alpha,
            reeb: Vec::new(),
            coframe: Vec::new(),
            orientation_sign: 1,
            brackets: Brackets {
                h: Vec::new(),
                v: Vec::new(),
                xi: Vec::new(),
                xi_v: Vec::new(),
            },
        };
        s.finish(&frame_brackets, &points, chart_points || s.mode.is_lie())?;
        Ok(s)
    }

    /// Reeb field, coframe and structure functions from `alpha`.
    fn finish(
        &mut self,
        frame_brackets: &[Vec<Field>],
        points: &[Vec<f64>],
        check: bool,
    ) -> Result<(), FrameError> {
        let (n, dim) = (self.n, self.dim());
        // rows: d(alpha)(b_i, e_j) for each frame field, then alpha itself;
        // alpha(e_j) vanishes identically, so d(alpha)(b_i, e_j) reduces to
        // -e_j(alpha_i) - alpha([b_i, e_j])
        let mut m = vec![vec![Expr::zero(); dim]; dim];
        for j in 0..2 * n {
            for i in 0..dim {
                let bi: Field = (0..dim).map(|k| if k == i { Expr::one() } else { Expr::zero() }).collect();
                let br = self.mode.bracket(&bi, &self.frame[j]);
                m[j][i] = &(-self.mode.derive(&self.frame[j], &self.alpha[i])) - &pair(&self.alpha, &br);
            }
        }
        m[2 * n] = self.alpha.clone();
        let det_m = Expr::sum(
            &(0..dim)
                .map(|i| &m[2 * n][i] * &linalg::cofactor(&m, 2 * n, i))
                .collect::<Vec<_>>(),
        );
        let reeb: Field = (0..dim)
            .map(|i| &linalg::cofactor(&m, 2 * n, i) / &det_m)
            .collect();
        if check {
            let tape = Tape::compile([&det_m]);
            for p in points {
                let v = tape.eval(p).map_err(|e| FrameError::Eval {
                    point: p.clone(),
                    source: e,
                })?[0];
                if v.abs() < 1e-12 {
                    return Err(FrameError::SingularReeb(p.clone()));
                }
            }
        }
        self.reeb = reeb;

        // coframe: rows of [e_1 .. e_2n xi]^-1
        let b: Vec<Vec<Expr>> = (0..dim)
            .map(|r| {
                (0..dim)
                    .map(|c| if c < 2 * n { self.frame[c][r].clone() } else { self.reeb[r].clone() })
                    .collect()
            })
            .collect();
        let det_b = linalg::det(&b);
        let adj = linalg::adjugate(&b);
        self.coframe = (0..2 * n)
            .map(|k| adj[k].iter().map(|a| a / &det_b).collect())
            .collect();

        let mut h = vec![vec![vec![Expr::zero(); 2 * n]; 2 * n]; 2 * n];
        let mut v = vec![vec![Expr::zero(); 2 * n]; 2 * n];
        for i in 0..2 * n {
            for j in i + 1..2 * n {
                let br = &frame_brackets[i][j];
                for k in 0..2 * n {
                    let c = pair(&self.coframe[k], br);
                    h[k][j][i] = -&c;
                    h[k][i][j] = c;
                }
                let c = pair(&self.alpha, br);
                v[j][i] = -&c;
                v[i][j] = c;
            }
        }
        let mut xi = vec![vec![Expr::zero(); 2 * n]; 2 * n];
        let mut xi_v = vec![Expr::zero(); 2 * n];
        for j in 0..2 * n {
            let br = self.mode.bracket(&self.reeb, &self.frame[j]);
            for k in 0..2 * n {
                xi[k][j] = pair(&self.coframe[k], &br);
            }
            xi_v[j] = pair(&self.alpha, &br);
        }
        self.brackets = Brackets { h, v, xi, xi_v };
        Ok(())
    }

    /// The other normalized form `-alpha` (with Reeb field `-xi`), which
    /// exists only when `n` is even.
    pub fn with_opposite_orientation(&self) -> Result<Self, FrameError> {
        if !self.n.is_multiple_of(2) {
            return Err(FrameError::OddOrientation);
        }
        let mut s = self.clone();
        s.alpha = self.alpha.iter().map(|a| -a).collect();
        s.orientation_sign = -self.orientation_sign;
        let dim = self.dim();
        let n = self.n;
        let mut frame_brackets = vec![vec![Vec::new(); 2 * n]; 2 * n];
        for i in 0..2 * n {
            for j in i + 1..2 * n {
                frame_brackets[i][j] = self.mode.bracket(&self.frame[i], &self.frame[j]);
            }
        }
        debug_assert_eq!(dim, self.alpha.len());
        s.finish(&frame_brackets, &[], false)?;
        Ok(s)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Manifold dimension `2n+1`.
    pub fn dim(&self) -> usize {
        2 * self.n + 1
    }

    /// Horizontal rank `2n`.
    pub fn rank(&self) -> usize {
        2 * self.n
    }

    pub fn mode(&self) -> &Mode {
        &self.mode
    }

    pub fn is_lie(&self) -> bool {
        self.mode.is_lie()
    }

    pub fn coords(&self) -> Option<&[String]> {
        match &self.mode {
            Mode::Chart { coords } => Some(coords),
            Mode::Lie { .. } => None,
        }
    }

    pub fn frame(&self) -> &[Field] {
        &self.frame
    }

    /// Unnormalized annihilator built from frame cofactors.
    pub fn alpha0(&self) -> &Field {
        &self.alpha0
    }

    /// `n`-th wedge power of `d(alpha0)` on the frame.
    pub fn wedge0(&self) -> &Expr {
        &self.wedge0
    }

    pub fn alpha(&self) -> &Field {
        &self.alpha
    }

    pub fn reeb(&self) -> &Field {
        &self.reeb
    }

    /// Dual 1-forms `theta^k` with `theta^k(e_j) = delta`, `theta^k(xi) = 0`.
    pub fn coframe(&self) -> &[Field] {
        &self.coframe
    }

    pub fn orientation_sign(&self) -> i8 {
        self.orientation_sign
    }

    pub fn brackets(&self) -> &Brackets {
        &self.brackets
    }

    /// The `k`-th adapted field: `e_k` for `k < 2n`, `xi` for `k = 2n`.
    pub fn adapted(&self, k: usize) -> &Field {
        if k < self.rank() {
            &self.frame[k]
        } else {
            &self.reeb
        }
    }

    /// Components of `V` in the adapted basis `(e_1..e_2n, xi)`.
    pub fn components(&self, v: &[Expr]) -> Field {
        let mut out: Field = self.coframe.iter().map(|t| pair(t, v)).collect();
        out.push(pair(&self.alpha, v));
        out
    }

    /// Ambient field from adapted components.
    pub fn assemble(&self, comps: &[Expr]) -> Field {
        let dim = self.dim();
        (0..dim)
            .map(|i| {
                let terms: Vec<Expr> = comps
                    .iter()
                    .enumerate()
                    .map(|(k, c)| c * &self.adapted(k)[i])
                    .collect();
                Expr::sum(&terms)
            })
            .collect()
    }

    /// Horizontal projection: drops the `xi` component.
    pub fn project(&self, v: &[Expr]) -> Field {
        let a = pair(&self.alpha, v);
        v.iter().zip(&self.reeb).map(|(vi, xi)| vi - &(&a * xi)).collect()
    }

    pub fn derive(&self, v: &[Expr], f: &Expr) -> Expr {
        self.mode.derive(v, f)
    }

    pub fn bracket(&self, v: &[Expr], w: &[Expr]) -> Field {
        self.mode.bracket(v, w)
    }

    /// Exterior derivative of `alpha` on two ambient fields (Cartan formula).
    pub fn d_alpha(&self, v: &[Expr], w: &[Expr]) -> Expr {
        let av = pair(&self.alpha, v);
        let aw = pair(&self.alpha, w);
        let b = self.bracket(v, w);
        &(&self.derive(v, &aw) - &self.derive(w, &av)) - &pair(&self.alpha, &b)
    }

    /// Residuals of the special condition over `points`.
    pub fn check_special(&self, points: &[Vec<f64>], tol: f64) -> Result<SpecialReport, FrameError> {
        let r = self.rank();
        let b = &self.brackets;
        let mut exprs: Vec<Expr> = b.xi_v.clone();
        for i in 0..r {
            for j in i..r {
                exprs.push(&b.xi[j][i] + &b.xi[i][j]);
            }
        }
        let tape = Tape::compile(&exprs);
        let pts = self.sample_points(points);
        let (mut r1, mut r2) = (0.0f64, 0.0f64);
        for p in &pts {
            let vals = tape.eval(p).map_err(|e| FrameError::Eval {
                point: p.clone(),
                source: e,
            })?;
            r1 = vals[..r].iter().fold(r1, |m, v| m.max(v.abs()));
            r2 = vals[r..].iter().fold(r2, |m, v| m.max(v.abs()));
        }
        Ok(SpecialReport {
            horizontal_residual: r1,
            killing_residual: r2,
            points: pts.len(),
            special: r1 < tol && r2 < tol,
        })
    }

    /// Lie mode evaluates at the single empty point.
    pub fn sample_points(&self, points: &[Vec<f64>]) -> Vec<Vec<f64>> {
        if self.is_lie() {
            vec![Vec::new()]
        } else {
            points.to_vec()
        }
    }
}

/// Residuals of the special condition.
#[derive(Debug, Clone, PartialEq)]
pub struct SpecialReport {
    /// `max |alpha([xi, e_j])|`.
    pub horizontal_residual: f64,
    /// `max |<[xi,e_i],e_j> + <e_i,[xi,e_j]>|`.
    pub killing_residual: f64,
    pub points: usize,
    pub special: bool,
}
