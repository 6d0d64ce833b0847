//! Dense matrices, tape-based reverse-mode differentiation, Adam and a
//! finite-difference gradient checker.

mod adam;
mod gradcheck;
mod sparse;
mod tape;
mod tensor;

use thiserror::Error;

pub use adam::AdamState;
pub use gradcheck::{grad_check, GradCheckReport};
pub use sparse::SparseMatrix;
pub use tape::{sigmoid, softplus, Gradients, Tape, Var, LOG_CLAMP};
pub use tensor::Tensor;

pub(crate) use tape::softmax_in_place;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericError {
    #[error("{op}: incompatible shapes {lhs:?} and {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },
    #[error("tensor of shape {shape:?} given {len} values")]
    DataLength { shape: (usize, usize), len: usize },
    #[error("rows of unequal length: expected {expected}, found {found}")]
    RaggedRows { expected: usize, found: usize },
    #[error("expected a scalar, got shape {shape:?}")]
    NotScalar { shape: (usize, usize) },
    #[error("{op}: empty input")]
    Empty { op: &'static str },
    #[error("{op}: index {index} out of bounds for {bound}")]
    Index {
        op: &'static str,
        index: usize,
        bound: usize,
    },
    #[error("{op}: {reason}")]
    InvalidArgument { op: &'static str, reason: String },
}
