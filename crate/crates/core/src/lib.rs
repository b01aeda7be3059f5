//! Optimal almost-everywhere stabilization of discrete-time controlled
//! systems.
//!
//! The pipeline discretizes a controlled map `x' = T(x, u)` on a cell
//! partition (Ulam's method), checks stabilizability with a backward
//! reachability tree, solves the Lyapunov-measure linear program and its
//! dual, extracts a deterministic cell-wise feedback, and certifies it
//! through the closed-loop Lyapunov measure equation, spectral bounds and
//! rollouts of the original map.

pub mod dense;
pub mod discretization;
pub mod error;
pub mod feasibility;
pub mod lp;
pub mod simulate;
pub mod sparse;
pub mod spectral;
pub mod stabilization;
pub mod synthesis;
pub mod systems;

pub use error::{Error, Result};
