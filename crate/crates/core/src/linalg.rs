//! Small dense linear algebra: symbolic determinants and cofactors for
//! frame matrices, and SVD-based kernel extraction.

use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use crate::expr::Expr;

/// Determinant of a square matrix of expressions by cofactor expansion.
///
/// Expansion runs along the first row; zero entries are skipped, which
/// keeps sparse frame matrices cheap.
pub fn det(m: &[Vec<Expr>]) -> Expr {
    let n = m.len();
    let cols: Vec<usize> = (0..n).collect();
    det_minor(m, 0, &cols)
}

fn det_minor(m: &[Vec<Expr>], row: usize, cols: &[usize]) -> Expr {
    match cols.len() {
        0 => Expr::one(),
        1 => m[row][cols[0]].clone(),
        _ => {
            let mut acc = Expr::zero();
            for (pos, &c) in cols.iter().enumerate() {
                let entry = &m[row][c];
                if entry.is_zero() {
                    continue;
                }
                let rest: Vec<usize> = cols.iter().copied().filter(|&k| k != c).collect();
                let term = entry * &det_minor(m, row + 1, &rest);
                acc = if pos % 2 == 0 { &acc + &term } else { &acc - &term };
            }
            acc
        }
    }
}

/// Signed cofactor `(-1)^(i+j) det(M without row i, column j)`.
pub fn cofactor(m: &[Vec<Expr>], i: usize, j: usize) -> Expr {
    let rows: Vec<Vec<Expr>> = m
        .iter()
        .enumerate()
        .filter(|(r, _)| *r != i)
        .map(|(_, row)| {
            row.iter()
                .enumerate()
                .filter(|(c, _)| *c != j)
                .map(|(_, e)| e.clone())
                .collect()
        })
        .collect();
    let d = det(&rows);
    if (i + j).is_multiple_of(2) {
        d
    } else {
        -d
    }
}

/// Adjugate (transpose of the cofactor matrix).
pub fn adjugate(m: &[Vec<Expr>]) -> Vec<Vec<Expr>> {
    let n = m.len();
    (0..n)
        .map(|i| (0..n).map(|j| cofactor(m, j, i)).collect())
        .collect()
}

/// Row-major dense real matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DMat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl DMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DMat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut m = DMat::zeros(r, c);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), c, "ragged matrix");
            m.data[i * c..(i + 1) * c].copy_from_slice(row);
        }
        m
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Singular values and right singular vectors of a matrix.
#[derive(Debug, Clone)]
pub struct Svd {
    /// Sorted in decreasing order.
    pub values: Vec<f64>,
    /// `vectors[i]` is the right singular vector for `values[i]`.
    pub vectors: Vec<Vec<f64>>,
}

impl Svd {
    /// Right singular vectors whose singular value is at or below
    /// `max(rel * sigma_max, floor)`.
    pub fn kernel(&self, rel: f64, floor: f64) -> Vec<Vec<f64>> {
        let t = self.threshold(rel, floor);
        self.values
            .iter()
            .zip(&self.vectors)
            .filter(|(s, _)| **s <= t)
            .map(|(_, v)| v.clone())
            .collect()
    }

    pub fn threshold(&self, rel: f64, floor: f64) -> f64 {
        let smax = self.values.first().copied().unwrap_or(0.0);
        (rel * smax).max(floor)
    }
}

/// Singular value decomposition with a full set of right singular vectors.
///
/// Wide matrices are padded with zero rows first, so the surplus
/// directions show up as zero singular values and the kernel is always
/// the span of the vectors with small values.
pub fn svd(a: &DMat) -> Svd {
    let (m, n) = (a.rows, a.cols);
    if n == 0 {
        return Svd {
            values: Vec::new(),
            vectors: Vec::new(),
        };
    }
    let rows = m.max(n);
    let mat = nalgebra::DMatrix::from_fn(rows, n, |i, j| if i < m { a.get(i, j) } else { 0.0 });
    let d = nalgebra::linalg::SVD::new(mat, false, true);
    let vt = d.v_t.expect("right singular vectors requested");
    let mut order: Vec<(f64, usize)> = d.singular_values.iter().copied().zip(0..).collect();
    // stable: equal values keep their position, so output is deterministic
    order.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    Svd {
        values: order.iter().map(|(s, _)| *s).collect(),
        vectors: order.iter().map(|(_, i)| vt.row(*i).iter().copied().collect()).collect(),
    }
}

/// Distance from `v` to the span of an orthonormal family.
pub fn residual_to_span(v: &[f64], basis: &[Vec<f64>]) -> f64 {
    let mut r = v.to_vec();
    for b in basis {
        let dot: f64 = r.iter().zip(b).map(|(x, y)| x * y).sum();
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri -= dot * bi;
        }
    }
    Float::sqrt(r.iter().map(|x| x * x).sum::<f64>())
}
