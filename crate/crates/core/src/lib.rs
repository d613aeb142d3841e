//! Reach-avoid differential dynamic programming on integer lattices.
//!
//! The crate solves finite-horizon minimax reach-avoid games on boxes of
//! integer states, extracts feedback policies from the value tables, and
//! plays a route of waypoints segment by segment against an adversary.

pub mod audit;
pub mod error;
pub mod export;
pub mod fixtures;
pub mod game;
pub mod lattice;
pub mod oracle;
pub mod player;
pub mod scope;
pub mod solver;
pub mod taskfile;
pub mod wellformed;

pub use error::{Error, Result};
pub use game::{
    CostWeights, DoubleIntegrator, Dynamics, GameDef, GameSpace, Kinematic, ModalGame, Role, Value,
};
pub use lattice::{MoveSet, Region, ScopeBox, StateVec, Trajectory};
pub use solver::{
    ddp_solve, FixpointMode, Policy, PolicyKind, PolicyMode, Solution, SolveOptions, ValueTable,
};
