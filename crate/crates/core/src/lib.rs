//! Approximate counting of integer solutions of linear constraint systems.
//!
//! A polytope `P = {x : A x ≤ b}` is enclosed in its integer bounding box
//! `P_0`, a chain `P_0 ⊃ P_1 ⊃ … ⊃ P_l = P` is built whose successive lattice
//! ratios are close to one half, and each ratio is estimated from near-uniform
//! lattice samples drawn by coordinate hit-and-run with rejection. Sampling
//! continues until a variance-based stopping rule certifies the requested
//! `(ε, δ)` relative error bound.

pub mod bench;
pub mod chain;
pub mod cli;
pub mod error;
pub mod estimator;
pub mod lp;
pub mod model;
pub mod oracle;
pub mod rng;
pub mod rounding;
pub mod sampler;

pub use error::{Error, Result};
pub use model::{Halfspace, InputFormat, LatticePoint, Polytope};
