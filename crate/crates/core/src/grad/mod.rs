//! Dense tensors with reverse-mode automatic differentiation.
//!
//! Everything here is double precision. A [`Graph`] is a tape confined to one
//! thread; build one per forward/backward pass.

mod adam;
pub mod check;
mod gemm;
mod graph;
mod tensor;

pub use adam::Adam;
pub use graph::{gaussian_logpdf, gaussian_logpdf_scalar, Graph, Var};
pub use tensor::Tensor;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum GradError {
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("usage error: {0}")]
    Usage(String),
}

#[cfg(test)]
mod tests;
