//! Discrete operators, Krylov solvers and the field advance.

pub mod krylov;
pub mod maxwell;
pub mod ops;

pub use krylov::{cg_solve, gmres_solve, DenseMatrix, FnOperator, LinearOperator, SolverReport};
pub use maxwell::{
    divergence_clean, gauss_residual, maxwell_advance, maxwell_advance_implicit, CleanReport,
    ImplicitAdvance, MaxwellParams, SpeciesMoments,
};
pub use ops::{binomial_smooth, curl, curl_flux, divergence, gradient, laplacian};
