//! Exact-arithmetic engine for Birman–Murakami–Wenzl type R-matrices and the
//! orthogonal/symplectic quantum matrix algebras built from them.

pub mod error;
pub mod exact;
pub mod projectors;
pub mod qma;
pub mod report;
pub mod rmatrix;
pub mod specvars;
pub mod stdrmat;
pub mod tensor;

pub use error::{Error, Result};
pub use exact::{QContext, Scalar, Series};
pub use tensor::TensorOp;
