//! Arithmetic and resolution machinery for cyclic covers of wild quotient
//! singularities over ramified p-adic rings.

pub mod dvr;
pub mod error;
pub mod field;
pub mod linalg;
pub mod poly;
pub mod cover;
pub mod blowup;
pub mod resolver;
pub mod congruence;
pub mod scenario;

pub use error::{Error, Result};
