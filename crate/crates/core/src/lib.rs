pub mod assembly;
pub mod cli;
pub mod config;
pub mod analytic;
pub mod error;
pub mod fit;
pub mod geometry;
pub mod krylov;
pub mod linalg;
pub mod probes;
pub mod quadrature;
pub mod report;
pub mod selftest;
pub mod specfun;
pub mod studies;

pub use error::{Error, Result};
