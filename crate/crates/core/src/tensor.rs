//! Horizontal tensors in frame components.
//!
//! A tensor has at most one upper index followed by `lower` lower
//! indices, each ranging over the `2n` horizontal frame directions.
//! Components are stored row-major with the upper index first.

use alloc::vec;
use alloc::vec::Vec;

use crate::expr::{EvalError, Expr, Tape};

fn offset(dim: usize, idx: &[usize]) -> usize {
    idx.iter().fold(0, |acc, &i| {
        debug_assert!(i < dim);
        acc * dim + i
    })
}

fn unflatten(dim: usize, rank: usize, mut flat: usize) -> Vec<usize> {
    let mut idx = vec![0; rank];
    for slot in idx.iter_mut().rev() {
        *slot = flat % dim;
        flat /= dim;
    }
    idx
}

/// Symbolic horizontal tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct HTensor {
    pub upper: usize,
    pub lower: usize,
    pub dim: usize,
    pub data: Vec<Expr>,
}

impl HTensor {
    pub fn zeros(upper: usize, lower: usize, dim: usize) -> Self {
        assert!(upper <= 1, "at most one upper index");
        HTensor {
            upper,
            lower,
            dim,
            data: vec![Expr::zero(); dim.pow((upper + lower) as u32)],
        }
    }

    /// Builds a tensor from a function of the full index.
    pub fn from_fn(upper: usize, lower: usize, dim: usize, mut f: impl FnMut(&[usize]) -> Expr) -> Self {
        let mut t = HTensor::zeros(upper, lower, dim);
        let rank = upper + lower;
        for (flat, slot) in t.data.iter_mut().enumerate() {
            *slot = f(&unflatten(dim, rank, flat));
        }
        t
    }

    pub fn rank(&self) -> usize {
        self.upper + self.lower
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, idx: &[usize]) -> &Expr {
        debug_assert_eq!(idx.len(), self.rank());
        &self.data[offset(self.dim, idx)]
    }

    pub fn set(&mut self, idx: &[usize], e: Expr) {
        let o = offset(self.dim, idx);
        self.data[o] = e;
    }

    pub fn index(&self, flat: usize) -> Vec<usize> {
        unflatten(self.dim, self.rank(), flat)
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(Expr::is_zero)
    }

    pub fn tape(&self) -> Tape {
        Tape::compile(&self.data)
    }

    pub fn evaluate(&self, point: &[f64]) -> Result<NTensor, EvalError> {
        Ok(self.with_values(self.tape().eval(point)?))
    }

    pub fn with_values(&self, data: Vec<f64>) -> NTensor {
        debug_assert_eq!(data.len(), self.len());
        NTensor {
            upper: self.upper,
            lower: self.lower,
            dim: self.dim,
            data,
        }
    }
}

/// Numeric horizontal tensor at a point, same layout as [`HTensor`].
#[derive(Debug, Clone, PartialEq)]
pub struct NTensor {
    pub upper: usize,
    pub lower: usize,
    pub dim: usize,
    pub data: Vec<f64>,
}

impl NTensor {
    pub fn zeros(upper: usize, lower: usize, dim: usize) -> Self {
        NTensor {
            upper,
            lower,
            dim,
            data: vec![0.0; dim.pow((upper + lower) as u32)],
        }
    }

    pub fn rank(&self) -> usize {
        self.upper + self.lower
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[offset(self.dim, idx)]
    }

    pub fn index(&self, flat: usize) -> Vec<usize> {
        unflatten(self.dim, self.rank(), flat)
    }

    /// Derivation action of an endomorphism `a` (`a[k][j]` acts on column
    /// vectors): `+a` on the upper slot, `-(. o a)` on each lower slot.
    pub fn act(&self, a: &[Vec<f64>]) -> NTensor {
        let mut out = NTensor::zeros(self.upper, self.lower, self.dim);
        let rank = self.rank();
        let mut idx2 = vec![0; rank];
        for (flat, o) in out.data.iter_mut().enumerate() {
            let idx = unflatten(self.dim, rank, flat);
            let mut s = 0.0;
            for slot in 0..rank {
                idx2.copy_from_slice(&idx);
                for m in 0..self.dim {
                    idx2[slot] = m;
                    let coeff = if slot < self.upper { a[idx[slot]][m] } else { -a[m][idx[slot]] };
                    if coeff != 0.0 {
                        s += coeff * self.get(&idx2);
                    }
                }
            }
            *o = s;
        }
        out
    }

    /// Contraction of the leading lower slot of a derivative tensor with `x`.
    ///
    /// For `t = nabla T` (derivative slot right after the upper index),
    /// returns `nabla_x T`.
    pub fn contract_direction(&self, x: &[f64]) -> NTensor {
        assert!(self.lower >= 1);
        let mut out = NTensor::zeros(self.upper, self.lower - 1, self.dim);
        let rank = out.rank();
        let mut full = vec![0; self.rank()];
        for (flat, o) in out.data.iter_mut().enumerate() {
            let idx = unflatten(self.dim, rank, flat);
            full[..self.upper].copy_from_slice(&idx[..self.upper]);
            full[self.upper + 1..].copy_from_slice(&idx[self.upper..]);
            let mut s = 0.0;
            for (d, xd) in x.iter().enumerate() {
                if *xd != 0.0 {
                    full[self.upper] = d;
                    s += xd * self.get(&full);
                }
            }
            *o = s;
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}
