//! Numerics for the L-deformed chiral Gaussian unitary ensemble with an
//! external source: averaged (inverse) characteristic polynomials, ratios,
//! the correlation kernel, their bulk-edge limits, and independent oracles
//! (Gram determinants, Monte Carlo) to check them against.

pub mod asym;
pub mod cli;
pub mod error;
pub mod exact;
pub mod linalg;
pub mod mc;
pub mod oracle;
pub mod par;
pub mod quad;
pub mod specfun;

pub use error::{Error, Result};
pub use num_complex::Complex64;
