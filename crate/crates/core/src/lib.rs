//! Symbolic and numerical core for special contact sub-Riemannian
//! structures: frames, the canonical connection, curvature, and the
//! linear machinery behind infinitesimal isometries.
//!
//! The crate is `no_std` with `alloc`; file formats, reports and the
//! command line live in the companion `srkilling` crate.

#![no_std]
// index loops mirror the tensor notation; negated comparisons reject NaN
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod connection;
pub mod expr;
pub mod frame;
pub mod killing;
pub mod linalg;
pub mod tensor;
