//! Built-in scenarios.

pub mod closed;
pub mod custom;
pub mod hopf;
pub mod kahler_hopf;
pub mod product;
pub mod s3xs1;
pub mod sphere_in_flat;
