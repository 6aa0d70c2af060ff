//! Mixed C0 finite element solver for the p-Bilaplacian
//! `div(grad(|Δu|^{p-2} Δu)) = f` on intervals and rectangles.
//!
//! The fourth-order problem is rewritten as a first-order saddle-point
//! system in the primal variable `u` and the auxiliary variable
//! `w = |Δu|^{p-2} Δu`, discretised with continuous Lagrange elements of
//! degree 1 or 2 for both fields. A regularised damped-Newton iteration
//! solves the nonlinear system for fixed `p`, and a continuation driver
//! marches `p` upward to produce candidate minimisers of `‖Δu‖_∞`.
//!
//! Crate layout:
//! - [`mesh`]: interval and criss-cross triangulations, refinement, metrics
//! - [`quadrature`]: Gauss rules on segments and triangles
//! - [`space`]: P1/P2 spaces, interpolation, evaluation, Ritz projection
//! - [`assembly`]: sparse matrices and the discrete saddle-point forms
//! - [`solver`]: sparse LU, damped Newton, p-continuation
//! - [`analysis`]: manufactured problems, error norms, EOC, limit diagnostics
//! - [`io`]: VTK / CSV / gnuplot / MatrixMarket writers
//! - [`cli`]: the `pbilap` command line front end

pub mod analysis;
pub mod assembly;
pub mod cli;
pub mod error;
pub mod io;
pub mod mesh;
pub mod quadrature;
pub mod solver;
pub mod space;

pub use error::Error;

pub type Result<T> = std::result::Result<T, Error>;
