//! Exact computations with derived manifolds presented as bundles of curved
//! L∞[1]-algebras over affine polynomial charts.

pub mod cdga;
pub mod cli;
pub mod compose;
pub mod error;
pub mod geometry;
pub mod graded;
pub mod intersection;
pub mod io;
pub mod linfty;
pub mod matrix;
pub mod multiop;
pub mod pathspace;
pub mod poly;
pub mod samples;
pub mod transfer;

pub use error::{Error, Result};
pub use graded::{Chart, FVec, GradedBundle};
pub use multiop::{MultiMap, MultiOp, OpFamily};
pub use poly::{Poly, Q};
