//! Automatic differentiation.
//!
//! [`tape`] is a scalar reverse-mode tape with [`SpatialDual`] numbers layered
//! on top of it, suited to small networks and to checking the batched engine.
//! [`graph`] records the same forward-over-reverse scheme on whole matrices
//! and is what training runs on.

mod activation;
pub mod graph;
pub mod tape;

pub use activation::Activation;
pub use graph::{Adjoints, Graph, Node};
pub use tape::{dual_lift, SpatialDual, Tape, TapeNode, Var};
