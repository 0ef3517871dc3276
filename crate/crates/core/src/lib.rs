//! Mapping task graphs onto heterogeneous CPU/GPU/FPGA platforms.
//!
//! The crate models applications as memory-augmented task graphs, estimates
//! execution and transfer costs on a platform description, simulates the
//! makespan of a mapping, and searches for good mappings through MILP
//! formulations solved by an in-crate branch-and-bound.

pub mod appgraph;
pub mod evaluator;
pub mod platform;
pub mod timing;
pub mod workbench;
pub mod milp;
pub mod solver;
