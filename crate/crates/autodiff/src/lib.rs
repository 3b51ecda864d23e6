//! Reverse-mode differentiation over dense `f64` matrices.
//!
//! Graphs are recorded on a [`Tape`] that is rebuilt every step. [`Mlp`] parameters live
//! outside the tape and are bound to it per step, either as leaves (to be trained) or as
//! constants (frozen, gradients still flow to the inputs). [`Mlp::predict`] runs the same
//! network without recording.

pub mod checkpoint;
pub mod error;
pub mod gradcheck;
pub mod nn;
pub mod tape;
pub mod tensor;

pub use checkpoint::Checkpoint;
pub use error::{AutodiffError, Result};
pub use nn::{soft_update, Adam, BoundMlp, Mlp, OutputActivation};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;
