//! Dense tensors, a define-by-run reverse-mode tape, and Adam.

mod adam;
mod graph;
mod tensor;

pub use adam::{adam_step, AdamState};
pub use graph::{Graph, Var};
pub use tensor::Tensor;
