//! Numerical laboratory for the steady p-curl system
//!
//! ```text
//! curl(|curl u|^{p-2} curl u) = f,   div u = 0   in Ω,
//! u × ν = 0                                        on ∂Ω,
//! ```
//!
//! on axis-aligned boxes. The system is solved as the minimiser of
//! `J(u) = ∫ (1/p)|curl u|^p − f·u` over divergence-free fields with vanishing
//! tangential trace, discretised on a staggered grid where the constraints
//! are structural. The [`harness`] measures both sides of the a-priori curl
//! estimates `‖curl u‖_{L∞}, ‖curl u‖_{L^p} ≤ C ‖f‖_{L^{3,1}}^{1/(p−1)}`.

pub mod calculus;
pub mod cli;
pub mod dump;
pub mod error;
pub mod grid;
pub mod harness;
pub mod lorentz;
pub mod oracle2d;
pub mod par;
pub mod solver;

pub use error::{Error, Result};
pub use grid::{Array3, Axis, BoxDomain, CellField, EdgeField, Extent, FaceField, NodeField};
