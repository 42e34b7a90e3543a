//! First-order optimisation with an adaptive heavy ball method, baseline
//! solvers, proximal point machinery and numerical certificates for growth
//! error bounds and Kurdyka–Łojasiewicz inequalities.

// `!(x > 0.0)` style guards deliberately reject NaN too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certify;
pub mod error;
pub mod linalg;
pub mod objective;
pub mod prox;
pub mod radon;
pub mod solvers;
pub mod trace;

pub use error::{Error, Result};
pub use objective::{Objective, ProblemKind, ProblemSpec, Vector};
pub use solvers::{run_solver, Method, SolverConfig, SolverState};
pub use trace::{IterationRecord, Trace};
