//! Goal-oriented resource allocation for sensing-communication-computing-control
//! (SC³) loops that share one edge information hub.
//!
//! Each loop uploads sensing data, has it processed at the hub, and receives
//! control commands on the downlink. The amount of task information that
//! survives the whole cycle bounds the loop's LQR cost from below. This crate
//! allocates bandwidth, transmission time and CPU frequency within and across
//! loops to minimize the summed bound.
//!
//! Modules, bottom-up:
//!
//! - [`model`]: domain types, link budget helpers, scenario files.
//! - [`control`]: Riccati fixed point, entropy power, the LQR lower bound.
//! - [`intraloop`]: closed-form split of one loop's bandwidth and cycle time.
//! - [`interloop`]: successive convex approximation across loops, the
//!   adequate-CPU closed form, and the comparison schemes.
//! - [`oracle`]: brute-force verifiers used by the tests and `sc3 verify`.

// `!(a > b)` is used on purpose so that NaN takes the infeasible branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod control;
pub mod interloop;
pub mod intraloop;
pub mod model;
pub mod oracle;

pub use control::{ControlMatrices, ControlSummary, Cost};
pub use interloop::{Objective, Scheme, SolverConfig, SystemSolution};
pub use intraloop::{IntraAllocation, LoopRates};
pub use model::{Budget, LinkSpec, LoopSpec, Scenario};
