//! Reduction of generalized metrics by group actions and submanifold
//! restriction, with pointwise verification of the reduced geometry and of
//! supersymmetric localization identities.

pub mod calculus;
pub mod chart;
pub mod dual;
pub mod error;
pub mod euler;
pub mod generalized;
pub mod gk;
pub mod grassmann;
pub mod linalg;
pub mod localization;
pub mod oracles;
pub mod quotient;
pub mod runner;
pub mod scenarios;
pub mod submanifold;

pub use error::{GeomError, Result};
