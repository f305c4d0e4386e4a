//! Distributed relative localization with a Tikhonov-regularized
//! gradient-descent estimator.
//!
//! Nodes of a connected graph hold unknown scalars `x̄_i`; every edge
//! `(u, v)` yields a noisy measurement `x̄_v - x̄_u + n_e`. Each node also
//! knows a prior `x̄ ~ (x0, ν² I)`. The crate provides
//!
//! - [`graph`]: graph families, incidence matrix, Laplacian and its spectrum;
//! - [`problem`]: the statistical model and seeded sampling of realizations;
//! - [`solver`]: the regularized iteration `x[t+1] = Q x[t] + w`, the
//!   unregularized baseline, and the exact regularized optimum;
//! - [`analysis`]: the closed-form mean-square error `H_t`, its limit, the
//!   near-optimal stopping time and its graph-independent bound;
//! - [`montecarlo`]: empirical MSE curves over many realizations;
//! - [`cli`]: the `relloc` experiment runner (config parsing, CSV output).

pub mod analysis;
pub mod cli;
pub mod error;
pub mod graph;
pub mod montecarlo;
pub mod problem;
pub mod solver;

pub use error::{Error, Result};
pub use graph::{Graph, IncidenceMatrix, LaplacianSpectrum};
pub use problem::{ProblemSpec, Realization};
pub use solver::{Algorithm, SolverConfig, Trajectory};
