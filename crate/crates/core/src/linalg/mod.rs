//! Dense kernels: one-sided Jacobi SVD and Cholesky.

mod cholesky;
mod svd;

pub use cholesky::{cholesky, cholesky_with_jitter};
pub use svd::Svd;
