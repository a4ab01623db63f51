//! Anisotropic Willmore flow of closed polygonal curves.
//!
//! The flow is discretized in time by a nested variational scheme: each step
//! minimizes an anisotropic squared distance from the previous curve plus an
//! implicit curvature energy, where the curvature is replaced by the
//! discrete speed of an inner, fully implicit anisotropic curvature-motion
//! step. Space is discretized with piecewise affine fields on polygons; the
//! per-step saddle-point system is solved by a step-size controlled Newton
//! method on the associated Lagrangian.
//!
//! Crate layout:
//! - [`anisotropy`]: direction weights, dual norms, duality maps, dual-ball
//!   sampling.
//! - [`geometry`]: polygonal curves and triangle meshes, element normal
//!   maps and their derivative tensors, mesh I/O.
//! - [`assembly`]: discrete anisotropic quadratic form and area with all
//!   derivative families, and the step energies built from them.
//! - [`lagrangian`]: the per-step saddle-point system (gradient + Hessian).
//! - [`solver`]: inner solve, multiplier solve, Newton time step, flow loop.
//! - [`analysis`]: self-similar reference solutions, error metric,
//!   experimental orders of convergence, refinement studies.
//! - [`verify`]: finite-difference and oracle verification suite.
//! - [`config`] / [`cli`]: run configuration and the command-line driver.

pub mod analysis;
pub mod anisotropy;
pub mod assembly;
pub mod cli;
pub mod config;
pub mod error;
pub mod geometry;
pub mod lagrangian;
pub mod linalg;
pub mod solver;
pub mod verify;

pub use error::{Error, Result};
