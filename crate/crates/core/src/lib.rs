//! Finite-difference solver for the ternary macromolecular-microsphere
//! composite Cahn-Hilliard system on a doubly periodic square.
//!
//! The free energy couples Flory-Huggins entropy, a quadratic interaction and
//! deGennes gradient terms with coefficient `1/(36 phi)`. Time stepping uses a
//! convex-concave splitting; each step is a strictly convex minimization solved
//! by full-approximation-storage multigrid.

pub mod diagnostics;
pub mod elliptic;
pub mod energy;
pub mod error;
pub mod grid;
pub mod init;
pub mod rng;
pub mod stepper;

pub use diagnostics::{convergence_study, observe, ConvergenceRow, ConvergenceStudy, StepDiagnostics};
pub use energy::{Component, ModelParams, ModelSettings, PhaseState};
pub use error::{Error, Result};
pub use grid::{Axis, CellField, EdgeField, EdgeVectorField, GridSpec};
pub use init::{init_cosine, init_random};
pub use stepper::{step, Fallback, SolverConfig, StepResult};
