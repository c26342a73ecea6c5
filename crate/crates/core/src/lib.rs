//! Heredity-constrained nonnegative garrote for designed experiments, with
//! initial estimates from a Gaussian-process-induced generalized ridge
//! regression.

pub mod datasets;
pub mod design;
pub mod error;
pub mod garrote;
pub mod hyperfit;
pub mod io;
mod linalg;
pub mod optim;
pub mod prior;
pub mod qp;
pub mod report;
pub mod reproduce;
pub mod simulate;

pub use design::{
    build_model_matrix, center_response, coding_matrix, heredity_constraints, heredity_constraints_with,
    CenteredResponse, Coding, Component, DesignTable, EffectColumn, FactorKind, FactorSpec, HeredityConstraint,
    HeredityMode, ModelMatrix, Scope,
};
pub use error::{Error, Result, Stage};
pub use garrote::{
    gcv_value, higarrote, ls_refit, m_grid, shrinkage_qp, Effect, FitReport, Garrote, GarroteOptions, GarroteSolution,
    GridRange, PathPoint, ScopeChoice, Timings, SELECTION_EPS,
};
pub use hyperfit::{
    fit_hyperparams, fit_hyperparams_report, initial_estimate, nll, nll_grad, ridge_estimate, FitOptions,
    InitialEstimate, Likelihood,
};
pub use io::{design_to_csv, parse_design, read_design, DesignConfig};
pub use prior::{prior_diag, run_correlation, Hyperparams, PriorDiagonal};
pub use qp::{QpProblem, QpSolution};
pub use report::Report;
pub use simulate::{run_simulation, SimSpec, SimSummary};
