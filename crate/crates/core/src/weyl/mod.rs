//! Weyl symbol calculus on polynomial symbols with periodic coefficients.

pub mod action;
pub mod cpoly;
pub mod op;
pub mod symbol;
pub mod trig;

pub use action::{ActionKind, ActionPolynomial, Block, BlockLayout, EigenCoordinateMap};
pub use cpoly::CPoly;
pub use op::{Op, OpAlgebra};
pub use symbol::SymbolPolynomial;
pub use trig::Trig;
