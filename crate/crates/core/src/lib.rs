//! Column-pivoted QR decompositions of dense snapshot matrices by the
//! reduced-basis greedy algorithm.
#![no_std]
// `!(x > t)` is how NaN gets rejected throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod dense;
pub mod eim;
pub mod estimators;
pub mod exec;
pub mod greedy;
pub mod matrix;
pub mod mgs;
pub mod models;
pub mod ortho;
pub mod scalar;
pub mod svd;
