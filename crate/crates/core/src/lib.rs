//! Matrix-free geometric multigrid for Poisson-like equations on disk-like
//! domains described by curvilinear polar mappings.

pub mod config;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod linalg;
pub mod multigrid;
pub mod problem;
pub mod runner;
pub mod smoother;
pub mod stencil;

pub use error::{Error, Result};
