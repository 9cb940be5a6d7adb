//! Multi-loop allocation of the hub's bandwidth and CPU.
//!
//! The proposed scheme runs successive convex approximation over per-loop
//! bandwidth and CPU shares. Each convexified round is separable once the two
//! budgets are priced, so it is solved by dual decomposition with a scalar
//! convex problem per loop. The comparison schemes reuse the same machinery
//! with some variables frozen, or are closed forms.

mod config;
mod pipes;
mod sca;
mod schemes;
mod subproblem;
mod theorem2;

pub use config::{BaselineParams, Objective, Scheme, SolverConfig, SubproblemMethod};
pub use sca::sca_optimize;
pub use schemes::{baseline, kkt_residual, solve};
pub use subproblem::{solve_subproblem, SubproblemSolution};
pub use theorem2::{adequate_cpu_kkt_residual, closed_form_bandwidth, closed_form_bandwidth_literal, ClosedForm};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::Cost;
use crate::intraloop::IntraAllocation;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InterloopError {
    #[error("invalid problem: {0}")]
    Config(String),
    #[error("infeasible: {reason} (binding loops: {loops:?})")]
    Infeasible { loops: Vec<usize>, reason: String },
    #[error("no convergence within {iterations} outer iterations; objective history {history:?}")]
    NotConverged { iterations: usize, history: Vec<f64> },
    #[error("per-loop solve failed for loop {loop_index}: {reason}")]
    InnerSolve { loop_index: usize, reason: String },
    #[error("{resource} price search failed: bracket [{lo:e}, {hi:e}], budget gap {gap:e}")]
    DualSearch {
        resource: &'static str,
        lo: f64,
        hi: f64,
        gap: f64,
    },
}

impl InterloopError {
    pub fn is_infeasible(&self) -> bool {
        matches!(self, InterloopError::Infeasible { .. })
    }
}

/// Outcome of one loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoopResult {
    pub loop_id: usize,
    /// Hub bandwidth the loop consumes, Hz (time-averaged for TDD).
    pub bandwidth_hz: f64,
    /// Hub CPU the loop consumes, cycles/s (time-averaged for TDD).
    pub cpu_hz: f64,
    pub d_sc3: f64,
    pub cost: Cost,
    pub allocation: IntraAllocation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub scheme: Scheme,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after each outer round. Total LQR cost for cost-driven
    /// schemes, negated total information for max-sum and max-min.
    pub objective_history: Vec<f64>,
    /// Bandwidth price per Hz of the last round.
    pub dual_bandwidth: f64,
    /// CPU price per cycle/s of the last round.
    pub dual_cpu: f64,
    pub kkt_residual: Option<f64>,
    /// Point of the last linearization, bits per loop.
    pub linearization_point: Vec<f64>,
    pub warnings: Vec<String>,
}

impl Diagnostics {
    pub(crate) fn closed_form(scheme: Scheme) -> Self {
        Self {
            scheme,
            iterations: 0,
            converged: true,
            objective_history: Vec::new(),
            dual_bandwidth: 0.0,
            dual_cpu: 0.0,
            kkt_residual: None,
            linearization_point: Vec::new(),
            warnings: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSolution {
    pub loops: Vec<LoopResult>,
    pub diagnostics: Diagnostics,
}

impl SystemSolution {
    pub fn total_cost(&self) -> Cost {
        self.loops.iter().map(|l| l.cost).sum()
    }

    pub fn total_bandwidth(&self) -> f64 {
        self.loops.iter().map(|l| l.bandwidth_hz).sum()
    }

    pub fn total_cpu(&self) -> f64 {
        self.loops.iter().map(|l| l.cpu_hz).sum()
    }

    pub fn total_info(&self) -> f64 {
        self.loops.iter().map(|l| l.d_sc3).sum()
    }

    /// Bandwidth of each loop as a fraction of the total in use.
    pub fn bandwidth_shares(&self) -> Vec<f64> {
        let total = self.total_bandwidth();
        self.loops.iter().map(|l| l.bandwidth_hz / total).collect()
    }

    pub fn scheme(&self) -> Scheme {
        self.diagnostics.scheme
    }
}
