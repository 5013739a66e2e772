//! Implicit-explicit Runge-Kutta time integration.

pub mod solver;
pub mod stepper;
pub mod tableau;

pub use solver::{solve_implicit_stage, StageSolver, STAGE_RESIDUAL_TOL};
pub use stepper::{
    integrate, step, EnergyTrace, ExplicitFn, ImexIntegrator, ImexSplitProblem, Integration,
    StepInfo,
};
pub use tableau::{tableau_by_order, tableau_imex1, tableau_imex2, tableau_imex3, ImexTableau};
