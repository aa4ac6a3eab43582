//! Exact second-order-cone-representable convex hulls of a quadratic surface
//! intersected with a bounded polyhedron, with a built-in conic solver and a
//! brute-force verification oracle.

pub mod affine;
pub mod cli;
pub mod config;
pub mod conicsolve;
pub mod densela;
pub mod error;
pub mod hullcore;
pub mod oracle;
pub mod polytope;
pub mod socmodel;
pub mod reduction;

pub use config::Config;
pub use error::{Error, Result};
