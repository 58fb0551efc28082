//! Energy-based physics-informed neural networks for thermo-elastic boundary
//! value problems on homogeneous and functionally graded bodies.

pub mod autodiff;
pub mod error;
pub mod fields;
pub mod gradcheck;
pub mod loss;
pub mod metrics;
pub mod network;
pub mod physics;
pub mod plot;
pub mod problems;
pub mod reference;
pub mod report;
pub mod sampling;
pub mod trainer;

pub use error::{Error, Result};
