//! Weighted link scheduling under the SINR interference model, plus a
//! time-slotted queueing simulator that drives the schedulers.

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bridging;
pub mod cli;
pub mod io;
pub mod model;
pub mod power;
pub mod schedulers;
pub mod separation;
pub mod simulator;

pub use bridging::{bridge, MwisdSolver, WeightedLink};
pub use model::{
    check_feasible, sinr, Link, Node, PhysicalParams, Point, PowerAssignment, Topology,
};
pub use schedulers::{run_policy, Policy, Schedule, SchedulerOptions};
pub use simulator::{run, sweep, SimConfig, Verdict};
