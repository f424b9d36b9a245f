//! Solver library for nonlinear matrix decompositions `X ~ f(WH)`.
//!
//! A global alternating-direction scheme factors a data matrix through an
//! entrywise nonlinearity `f` (ReLU, component-wise square, MinMax clamp, or
//! modulus) under a Frobenius, l1, or Kullback-Leibler loss — twelve model
//! combinations in total. The factor updates are ridge-regularized least
//! squares; the auxiliary-variable update decomposes into independent scalar
//! subproblems with closed-form solutions; the penalty parameter adapts to
//! balance primal and dual residuals. Missing data is supported for matrix
//! completion.
//!
//! The [`oracle`] module re-derives every scalar update by brute force and
//! is the correctness gate for the closed forms.

pub mod cubic;
pub mod error;
pub mod io;
pub mod linalg;
pub mod mask;
pub mod matrix;
pub mod model;
pub mod noise;
pub mod oracle;
pub mod prox;
pub mod solver;
pub mod synth;

pub use error::{Error, Result};
pub use mask::{make_mask, rmse_on, split_train_test, CompletionSplit, ObservationMask};
pub use matrix::DenseMatrix;
pub use model::{
    apply_nonlinearity, kl_scalar, loss_value, relative_objective, relative_objective_masked, Loss,
    ModelSpec, Nonlinearity,
};
pub use prox::{
    missing_entry_update, solve_scalar, update_t, Branch, ProxResult, ScalarSubproblem,
};
pub use solver::{
    adapt_rho, compute_residuals, init_state, run, update_dual, update_h, update_w, InitMode,
    IterationRecord, Residuals, RunResult, SolverConfig, SolverState,
};
