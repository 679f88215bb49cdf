//! Representative volume element: mesh, strain sampling, periodic solver
//! and snapshot generation.

pub mod mesh;
pub mod sampling;
pub mod snapshots;
pub mod solver;

pub use mesh::{build_rve_mesh, build_rve_mesh_with_length, RveDomain, RveMesh};
pub use sampling::{lhs_sample, SampleSet};
pub use solver::{homogenize_stress, solve_micro, MicroSolution, MicroSolver};
pub use snapshots::{generate_snapshots, SnapshotMatrix};
