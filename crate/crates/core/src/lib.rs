pub mod cli;
pub mod error;
pub mod estimator;
pub mod functional;
pub mod numeric;
pub mod quadrature;
pub mod rng;
pub mod simlab;
pub mod tensor;
pub mod validate;
pub mod smoothing;
pub mod ustat;

pub use error::{HodseError, Result};
