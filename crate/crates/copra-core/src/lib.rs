//! Ridge-parameter selection via the COPRA characteristic function.
//!
//! The pipeline: decompose the linear model (H, y) into spectral energies,
//! locate the operative positive root of the characteristic function with a
//! safeguarded Newton iteration, rescale to the applied regularizer, and
//! solve the regularized least-squares problem. Baseline estimators (LS,
//! oracle LMMSE, GCV, quasi-optimality) and a seeded Monte-Carlo benchmark
//! harness round out the crate.

pub mod bench;
pub mod error;
pub mod estimators;
pub mod io;
pub mod qam;
pub mod solver;
pub mod spectral;

pub use error::{CopraError, Result};
pub use estimators::{
    copra_estimate, gcv_select, lmmse_estimate, ls_estimate, quasiopt_select, rls_solve, Estimate,
    Method,
};
pub use solver::{
    estimate_epsilon, monotonicity_diagnostic, newton_solve, scan_roots, EpsilonEstimate,
    RootScan, SelectionResult, SolverConfig,
};
pub use spectral::{
    component_eval, copra_derivative, copra_eval, copra_general_eval, decompose,
    delta_square_case, Decomposition, DeltaPair, SpectralData,
};
