//! Quantum Birkhoff normal forms of the Laplacian at non-degenerate closed
//! geodesics, the wave invariants they determine, and the inverse map from
//! iterate wave invariants back to the normal form.

pub mod birkhoff;
pub mod catalog;
pub mod cli;
pub mod config;
pub mod error;
pub mod floquet;
pub mod inverse;
pub mod jacobi;
pub mod laplacian;
pub mod pipeline;
pub mod report;
pub mod wave;
pub mod weyl;

pub use error::{Error, Result};
