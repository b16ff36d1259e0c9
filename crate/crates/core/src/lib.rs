//! Drift-plus-penalty control of stochastic networks with finite buffers.
//!
//! The floating-queue algorithm keeps real packets in a buffer of size `B`
//! and a fake-packet counter beside it; the controller sees the sum, so its
//! decisions coincide with those taken on unbounded queues. This crate
//! provides the network model, the controller, both queue implementations,
//! the deterministic dual and its multipliers, sample-path checkers, and a
//! seeded simulator with a command-line front end.

pub mod controller;
pub mod dual;
pub mod error;
pub mod model;
pub mod par;
pub mod pathcheck;
pub mod queues;
pub mod sim;

pub use controller::{decide, dpp_weight, ControllerConfig, Decision, TieBreak};
pub use dual::{brute_force_dual, dual_subgradient, dual_value, solve_dual, DualSolution, RandomizedPolicy, SolverConfig, StepRule};
pub use error::{Error, Result};
pub use model::{ActionSpec, NetworkState, Scenario, ScenarioSpec, ServiceMatrix};
pub use par::Execution;
