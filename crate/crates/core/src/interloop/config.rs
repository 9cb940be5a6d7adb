use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Allocation schemes the solver and CLI understand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Joint bandwidth/CPU allocation minimizing total LQR cost.
    Proposed,
    /// Per-loop equal budget shares, UL/DL bandwidth split in half.
    Equal,
    /// Per-loop equal budget shares, UL/DL bandwidth split as `1 : ρ`.
    Proportional,
    /// Each loop owns the whole hub for `T/K`.
    Tdd,
    /// Downlink frozen, uplink bandwidth and CPU optimized.
    UlComp,
    /// Uplink frozen, downlink bandwidth and CPU optimized.
    DlComp,
    /// CPU frozen at `f_max/K`, bandwidth optimized.
    Uldl,
    /// Maximize summed closed-loop information under a cost requirement.
    MaxSum,
    /// Maximize the smallest closed-loop information under a cost requirement.
    MaxMin,
    /// Adequate-CPU closed-form bandwidth, CPU optimized for that bandwidth.
    Theorem2,
}

impl Scheme {
    pub const ALL: [Scheme; 10] = [
        Scheme::Proposed,
        Scheme::Equal,
        Scheme::Proportional,
        Scheme::Tdd,
        Scheme::UlComp,
        Scheme::DlComp,
        Scheme::Uldl,
        Scheme::MaxSum,
        Scheme::MaxMin,
        Scheme::Theorem2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Proposed => "proposed",
            Scheme::Equal => "equal",
            Scheme::Proportional => "proportional",
            Scheme::Tdd => "tdd",
            Scheme::UlComp => "ul-comp",
            Scheme::DlComp => "dl-comp",
            Scheme::Uldl => "uldl",
            Scheme::MaxSum => "max-sum",
            Scheme::MaxMin => "max-min",
            Scheme::Theorem2 => "theorem2",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scheme::ALL
            .into_iter()
            .find(|scheme| scheme.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Scheme::ALL.iter().map(|s| s.name()).collect();
                format!("unknown scheme {s:?}, expected one of {}", names.join(", "))
            })
    }
}

/// What the outer SCA loop optimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Objective {
    MinTotalLqr,
    MaxSumInfo,
    MaxMinInfo,
}

/// Solver used for each convexified subproblem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SubproblemMethod {
    /// Two scalar prices found by nested root finding, per-loop 1-D Newton.
    #[default]
    DualDecomposition,
    /// Projected gradient on the two share simplices with Armijo steps.
    ProjectedGradient,
}

/// Free parameters of the comparison schemes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineParams {
    /// Downlink time of the equal/proportional schemes as a fraction of `T`.
    pub dl_time_fraction: f64,
    /// Frozen downlink time of the UL&computing scheme, seconds.
    pub ul_comp_dl_time_s: f64,
    /// Frozen uplink time of the DL&computing scheme, seconds.
    pub dl_comp_ul_time_s: f64,
    /// Fraction of `B_max` split equally over loops for the frozen link.
    pub frozen_link_share: f64,
}

impl Default for BaselineParams {
    fn default() -> Self {
        Self {
            dl_time_fraction: 1.0 / 3.0,
            ul_comp_dl_time_s: 1e-3,
            dl_comp_ul_time_s: 4e-3,
            frozen_link_share: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub scheme: Scheme,
    /// Relative objective change that stops the outer loop.
    pub delta: f64,
    pub max_outer_iters: usize,
    /// Relative budget gap accepted by the price search.
    pub dual_tol: f64,
    /// Relative tolerance of the per-loop 1-D solves.
    pub inner_tol: f64,
    /// Bits added to `log2|det A|` for the first linearization point.
    pub d_init_offset: f64,
    /// Bits by which every iterate must clear `log2|det A|`.
    pub stability_margin: f64,
    pub subproblem: SubproblemMethod,
    /// Per-loop LQR requirement of the communication-oriented schemes; a
    /// single value applies to every loop.
    pub lqr_requirement: Option<Vec<f64>>,
    pub riccati_tol: f64,
    pub riccati_max_iter: usize,
    /// Ratio between task-level UL and DL efficiencies treated as dominance
    /// by the weak-link approximation.
    pub weak_link_dominance: f64,
    pub baseline: BaselineParams,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::Proposed,
            delta: 1e-3,
            max_outer_iters: 100,
            dual_tol: 1e-10,
            inner_tol: 1e-13,
            d_init_offset: 1.0,
            stability_margin: 1e-6,
            subproblem: SubproblemMethod::DualDecomposition,
            lqr_requirement: None,
            riccati_tol: crate::control::RICCATI_TOL,
            riccati_max_iter: crate::control::RICCATI_MAX_ITER,
            weak_link_dominance: 100.0,
            baseline: BaselineParams::default(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("delta", self.delta),
            ("dual_tol", self.dual_tol),
            ("inner_tol", self.inner_tol),
            ("d_init_offset", self.d_init_offset),
            ("stability_margin", self.stability_margin),
            ("riccati_tol", self.riccati_tol),
            ("weak_link_dominance", self.weak_link_dominance),
            ("baseline.ul_comp_dl_time", self.baseline.ul_comp_dl_time_s),
            ("baseline.dl_comp_ul_time", self.baseline.dl_comp_ul_time_s),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("solver.{name} must be positive, got {v}"));
            }
        }
        for (name, v) in [
            ("baseline.dl_time_fraction", self.baseline.dl_time_fraction),
            ("baseline.frozen_link_share", self.baseline.frozen_link_share),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(format!("solver.{name} must be in (0, 1), got {v}"));
            }
        }
        if self.max_outer_iters == 0 || self.riccati_max_iter == 0 {
            return Err("solver iteration caps must be positive".into());
        }
        if let Some(req) = &self.lqr_requirement {
            if req.is_empty() || req.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                return Err("solver.lqr_requirement must hold positive values".into());
            }
        }
        Ok(())
    }

    /// Requirement of loop `k`, broadcasting a single value.
    pub fn requirement_for(&self, k: usize) -> Option<f64> {
        let req = self.lqr_requirement.as_ref()?;
        if req.len() == 1 {
            Some(req[0])
        } else {
            req.get(k).copied()
        }
    }
}
