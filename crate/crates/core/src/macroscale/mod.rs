//! Macroscale plane-strain Newton solver with pluggable micro evaluators.

pub mod benchmark;
pub mod case;
pub mod evaluators;
pub mod solver;

pub use benchmark::{benchmark, field_errors, relative_l2_error, BenchmarkRow};
pub use case::{build_macro_case, build_macro_case_with_load, CaseName, MacroCase};
pub use evaluators::{Fe2Evaluator, LinearElasticEvaluator, SurrogateEvaluator};
pub use solver::{macro_newton_solve, MacroSolution, MicroEvaluator, SolverOptions};
