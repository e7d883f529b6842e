//! Prioritized (lexicographic) least-squares control of planar rigid chains.
//!
//! The crate is organised bottom-up:
//!
//! * [`robot_model`]: planar chain kinematics, task Hessians and dynamics.
//! * [`hlsp`]: active-set solver for hierarchies of linear least-squares levels.
//! * [`control`]: compiles declarative tasks into priority levels each cycle,
//!   including the second-order (hierarchical Hessian) augmentation.
//! * [`sim`]: closed-loop simulator and the canonical scenarios.
//! * [`validation`]: finite-difference and oracle suites shared by the CLI.
//!
//! All numeric code is generic over [`Real`]; the `*64` aliases below pin it
//! to `f64`, which is what the simulator and CLI use.

pub mod control;
pub mod hlsp;
pub mod robot_model;
pub mod scalar;
pub mod sim;
pub mod validation;

pub use scalar::Real;

pub type PlanarChain64 = robot_model::PlanarChain<f64>;
pub type Hierarchy64 = hlsp::Hierarchy<f64>;
pub type PriorityLevel64 = hlsp::PriorityLevel<f64>;
pub type HlspSolution64 = hlsp::HlspSolution<f64>;
pub type TaskSpec64 = control::TaskSpec<f64>;
pub type Scenario64 = sim::Scenario<f64>;
pub type TrajectoryLog64 = sim::TrajectoryLog<f64>;
