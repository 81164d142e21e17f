//! Numerical machinery for first-order convex Hamilton-Jacobi equations
//! `du/dt + H(x, grad u) = 0` on truncated one- and two-dimensional grids.
//!
//! The crate provides, on top of a small grid/interpolation layer:
//!
//! * forward and backward solution operators (value-function semigroups)
//!   under three schemes: a direct infimal-convolution formula for
//!   x-independent Hamiltonians, a semi-Lagrangian marcher, and a monotone
//!   Lax-Friedrichs marcher ([`solver`]);
//! * backward characteristics and the first-order sensitivity of the forward
//!   operator with respect to its initial condition ([`characteristics`]);
//! * transport of densities along the induced velocity field, including the
//!   measure-valued limit at the initial time where characteristics cross
//!   ([`transport`]);
//! * gradient-based reconstruction of initial conditions from a prescribed
//!   terminal state ([`inverse`]);
//! * reachability tests and constrained L2 projection for quadratic
//!   x-independent Hamiltonians ([`reachability`]).
//!
//! All operations are deterministic: random sampling is seeded explicitly and
//! parallel loops never reduce floating-point values in nondeterministic
//! order.

// Coordinate loops over fixed-size `[f64; 2]` points index several arrays by
// the same axis; iterator-zip rewrites of those read worse, not better.
#![allow(clippy::needless_range_loop)]

/// Library version, re-exported so front ends can stamp artifacts.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub mod characteristics;
pub mod fixtures;
pub mod geometry;
pub mod grid;
pub mod hamiltonian;
pub mod io;
pub mod inverse;
pub mod reachability;
pub mod solver;
pub mod transport;

use thiserror::Error;

/// Unified error type for the crate.
///
/// Variants are grouped by how a front end should classify them:
/// configuration mistakes (bad arguments, scheme/model mismatches, CFL
/// violations), domain errors (an operation invoked outside the model class
/// it is valid for), and numerical failures (escape, non-convergence,
/// stalled line search).
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input: wrong lengths, non-finite values, empty windows, ...
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The requested scheme cannot be applied to the given model
    /// (e.g. the direct formula with an x-dependent Hamiltonian).
    #[error("scheme mismatch: {0}")]
    SchemeMismatch(String),

    /// An explicit time step violates the stability bound.
    #[error("CFL violation: dt = {dt:.6e} exceeds stable limit {limit:.6e}")]
    CflViolation { dt: f64, limit: f64 },

    /// A numerical Legendre transform saturated its search radius; the
    /// declared model constants are inconsistent with the requested slope.
    #[error("Legendre search saturated at radius {radius:.6e} for |q| = {q_norm:.6e}")]
    BoundarySaturation { radius: f64, q_norm: f64 },

    /// A characteristic left the inflated computational box.
    #[error("characteristic escaped the computational box at |x| = {reach:.6e} (bound {bound:.6e})")]
    Escape { reach: f64, bound: f64 },

    /// A finite-difference stencil would read outside the grid.
    #[error("stencil out of range at node {node} (direction {dir})")]
    Stencil { node: usize, dir: &'static str },

    /// The operation was invoked outside its validity domain
    /// (dimension/model-family restrictions).
    #[error("outside validity domain: {0}")]
    ValidityDomain(String),

    /// A structural hypothesis on the Hamiltonian is violated.
    #[error("hypothesis violation: {0}")]
    Hypothesis(String),

    /// An iterative solver exhausted its budget.
    #[error("no convergence after {iterations} iterations (residual {residual:.6e})")]
    NonConvergence { iterations: usize, residual: f64 },

    /// A descent step could not make progress.
    #[error("descent stalled: {0}")]
    Stall(String),

    /// File I/O failure.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed on-disk artifact.
    #[error("parse error: {0}")]
    Parse(String),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
