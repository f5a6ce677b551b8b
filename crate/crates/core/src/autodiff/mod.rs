//! Dense reverse-mode differentiation over `f64` matrices, plus Adam.
//!
//! A [`Tape`] records each operation together with its inputs; calling
//! [`Tape::backward`] walks it in reverse and yields [`Gradients`], which can
//! be accumulated into a [`ParamStore`]. Every op checks its result for
//! NaN/Inf and fails immediately instead of propagating garbage.

mod adam;
mod gradcheck;
mod params;
mod tape;
mod tensor;

use thiserror::Error;

pub use adam::{adam_step, AdamState};
pub use gradcheck::{grad_check, relative_error, GradCheckReport, RELATIVE_FLOOR};
pub use params::{Checkpoint, CheckpointEntry, ParamId, ParamStore, Parameter, CHECKPOINT_FORMAT};
pub use tape::{logistic, Gradients, Tape, Var, COSINE_EPS};
pub use tensor::Tensor;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AutodiffError {
    #[error("{op}: shape mismatch {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: [usize; 2],
        right: [usize; 2],
    },
    #[error("{op}: non-finite value produced")]
    NonFinite { op: &'static str },
    #[error("{op}: empty input")]
    EmptyInput { op: &'static str },
    #[error("{op}: index {index} out of range for length {len}")]
    IndexOutOfRange {
        op: &'static str,
        index: usize,
        len: usize,
    },
    #[error("backward requires a scalar output, got shape {shape:?}")]
    NonScalar { shape: [usize; 2] },
    #[error("no parameter has a gradient")]
    MissingGradients,
    #[error("duplicate parameter name {0:?}")]
    DuplicateParameter(String),
    #[error("unknown parameter {0:?}")]
    UnknownParameter(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

#[cfg(test)]
mod tests;
