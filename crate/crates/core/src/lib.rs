//! Weighted least-squares sampling recovery of scalar- and Bochner-valued maps in
//! tensorized Hermite and Jacobi polynomial chaos bases.

pub mod basis;
pub mod error;
pub mod harness;
pub mod indexing;
pub mod least_squares;
pub mod pde;
pub mod sampling;

pub use error::{Error, Result};
