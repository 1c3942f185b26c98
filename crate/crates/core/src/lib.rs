//! Over-squashing measures and mixing bounds for message-passing neural networks.
//!
//! The crate is organised bottom-up:
//!
//! * [`graph`] - undirected simple graphs, generators, file formats and combinatorial primitives.
//! * [`spectral`] - Jacobi eigensolver, normalized Laplacian, pseudo-inverse, commute times.
//! * [`bounds`] - the `S` operator, Hessian mixing bounds, `OSQ` proxies and capacity bounds.
//! * [`mpnn`] - an executable MPNN with certified constants and finite-difference oracles.
//!
//! Quantities that may be infinite (reciprocals of vanishing bounds) use [`Extended`].

pub mod bounds;
mod error;
mod extended;
pub mod graph;
pub mod matrix;
pub mod mpnn;
pub mod spectral;

pub use error::{Error, Result};
pub use extended::{Extended, SignedExtended};
pub use graph::{Graph, GraphKind, NodePair};
pub use matrix::Matrix;
