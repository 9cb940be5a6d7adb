//! Normalized per-loop models shared by every SCA-based scheme.
//!
//! A loop holding shares `x` of a bandwidth pool and `y` of a CPU pool
//! delivers `min(cap, 1/g(x, y))` bits per cycle with
//! `g = c0 + 1/(x κ_b) + 1/(y κ_f)`. Frozen resources drop their term into
//! the constant `c0`; a frozen link of fixed capacity becomes `cap`.

use crate::control::ControlSummary;
use crate::intraloop::{allocate, IntraAllocation, LoopRates};
use crate::model::{Budget, LoopSpec};

use super::{InterloopError, Scheme, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Pipe {
    pub kb: f64,
    pub kf: f64,
    pub free_b: bool,
    pub free_f: bool,
    pub c0: f64,
    pub cap: f64,
    pub floor: f64,
    pub summary: ControlSummary,
}

impl Pipe {
    pub fn g(&self, x: f64, y: f64) -> f64 {
        let mut g = self.c0;
        if self.free_b {
            g += 1.0 / (x * self.kb);
        }
        if self.free_f {
            g += 1.0 / (y * self.kf);
        }
        g
    }

    pub fn info(&self, x: f64, y: f64) -> f64 {
        (1.0 / self.g(x, y)).min(self.cap)
    }

    /// Best information with the whole of both pools.
    pub fn info_alone(&self) -> f64 {
        self.info(1.0, 1.0)
    }
}

/// How the shares of a scheme map back onto physical resources.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Layout {
    /// Shares of `B_max` and `f_max`.
    Joint,
    /// CPU fixed per loop, bandwidth shares of `B_max`.
    FixedCpu(Vec<f64>),
    /// Bandwidth fixed per loop, CPU shares of `f_max`.
    FixedBandwidth(Vec<f64>),
    /// Downlink frozen at `b_fixed` for `t_fixed`; shares of the UL pool.
    FrozenDownlink { b_fixed: f64, t_fixed: f64 },
    /// Uplink frozen at `b_fixed` for `t_fixed`; shares of the DL pool.
    FrozenUplink { b_fixed: f64, t_fixed: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct PipeProblem {
    pub pipes: Vec<Pipe>,
    pub b_pool: f64,
    pub f_pool: f64,
    pub layout: Layout,
}

pub(crate) fn stability_floors(loops: &[LoopSpec], cfg: &SolverConfig) -> Vec<f64> {
    loops
        .iter()
        .map(|l| l.control.log2_det_a + cfg.stability_margin)
        .collect()
}

/// Information floors of the communication-oriented schemes.
pub(crate) fn requirement_floors(
    loops: &[LoopSpec],
    cfg: &SolverConfig,
    requirement: Option<&[f64]>,
) -> Result<Vec<f64>, InterloopError> {
    loops
        .iter()
        .enumerate()
        .map(|(k, l)| {
            let req = match requirement {
                Some(r) if r.len() == 1 => r[0],
                Some(r) => *r.get(k).ok_or_else(|| {
                    InterloopError::Config(format!(
                        "lqr requirement has {} entries for {} loops",
                        r.len(),
                        loops.len()
                    ))
                })?,
                None => cfg.requirement_for(k).unwrap_or(DEFAULT_LQR_REQUIREMENT),
            };
            let floor = l
                .control
                .info_for_cost(req)
                .map_err(|e| InterloopError::Config(format!("loop {k}: {e}")))?;
            Ok(floor.max(l.control.log2_det_a + cfg.stability_margin))
        })
        .collect()
}

/// LQR requirement of max-sum and max-min when none is configured.
pub(crate) const DEFAULT_LQR_REQUIREMENT: f64 = 5.0;

fn joint_pipe(l: &LoopSpec, b_pool: f64, f_pool: f64, floor: f64) -> Pipe {
    let r = LoopRates::of(l);
    let t = l.cycle_time_s;
    Pipe {
        kb: b_pool * t * r.r_comm,
        kf: f_pool * t * r.r_comp,
        free_b: true,
        free_f: true,
        c0: 0.0,
        cap: f64::INFINITY,
        floor,
        summary: l.control,
    }
}

pub(crate) fn joint_problem(loops: &[LoopSpec], budget: &Budget, floors: &[f64]) -> PipeProblem {
    let (b, f) = (budget.total_bandwidth_hz, budget.total_cpu_hz);
    PipeProblem {
        pipes: loops
            .iter()
            .zip(floors)
            .map(|(l, &fl)| joint_pipe(l, b, f, fl))
            .collect(),
        b_pool: b,
        f_pool: f,
        layout: Layout::Joint,
    }
}

pub(crate) fn fixed_cpu_problem(loops: &[LoopSpec], budget: &Budget, floors: &[f64]) -> PipeProblem {
    let (b, f) = (budget.total_bandwidth_hz, budget.total_cpu_hz);
    let f_k = f / loops.len() as f64;
    let pipes = loops
        .iter()
        .zip(floors)
        .map(|(l, &fl)| {
            let r = LoopRates::of(l);
            Pipe {
                free_f: false,
                kf: 0.0,
                c0: 1.0 / (f_k * l.cycle_time_s * r.r_comp),
                ..joint_pipe(l, b, f, fl)
            }
        })
        .collect();
    PipeProblem {
        pipes,
        b_pool: b,
        f_pool: f,
        layout: Layout::FixedCpu(vec![f_k; loops.len()]),
    }
}

/// CPU-only problem for loops whose bandwidth is already decided.
pub(crate) fn fixed_bandwidth_problem(
    loops: &[LoopSpec],
    budget: &Budget,
    bandwidth: &[f64],
    floors: &[f64],
) -> PipeProblem {
    let (b, f) = (budget.total_bandwidth_hz, budget.total_cpu_hz);
    let pipes = loops
        .iter()
        .zip(floors)
        .zip(bandwidth)
        .map(|((l, &fl), &b_k)| {
            let r = LoopRates::of(l);
            Pipe {
                free_b: false,
                kb: 0.0,
                c0: 1.0 / (b_k * l.cycle_time_s * r.r_comm),
                ..joint_pipe(l, b, f, fl)
            }
        })
        .collect();
    PipeProblem {
        pipes,
        b_pool: b,
        f_pool: f,
        layout: Layout::FixedBandwidth(bandwidth.to_vec()),
    }
}

fn shortened_cycles(loops: &[LoopSpec], t_fixed: f64, what: &str) -> Result<Vec<f64>, InterloopError> {
    loops
        .iter()
        .enumerate()
        .map(|(k, l)| {
            let rest = l.cycle_time_s - t_fixed;
            if rest > 0.0 {
                Ok(rest)
            } else {
                Err(InterloopError::Config(format!(
                    "loop {k}: frozen {what} time {t_fixed} s leaves no room in T = {} s",
                    l.cycle_time_s
                )))
            }
        })
        .collect()
}

/// Downlink frozen; uplink bandwidth and CPU optimized in the rest of `T`.
pub(crate) fn frozen_downlink_problem(
    loops: &[LoopSpec],
    budget: &Budget,
    cfg: &SolverConfig,
    floors: &[f64],
) -> Result<PipeProblem, InterloopError> {
    let k = loops.len() as f64;
    let share = cfg.baseline.frozen_link_share;
    let b_fixed = share * budget.total_bandwidth_hz / k;
    let b_pool = (1.0 - share) * budget.total_bandwidth_hz;
    let f_pool = budget.total_cpu_hz;
    let t_fixed = cfg.baseline.ul_comp_dl_time_s;
    let rest = shortened_cycles(loops, t_fixed, "downlink")?;
    let pipes = loops
        .iter()
        .zip(floors)
        .zip(rest)
        .map(|((l, &floor), t)| {
            let rho = l.extraction_ratio;
            Pipe {
                kb: b_pool * t * rho * l.r_ul(),
                kf: f_pool * t * rho / l.processing_difficulty,
                free_b: true,
                free_f: true,
                c0: 0.0,
                cap: b_fixed * t_fixed * l.r_dl(),
                floor,
                summary: l.control,
            }
        })
        .collect();
    Ok(PipeProblem {
        pipes,
        b_pool,
        f_pool,
        layout: Layout::FrozenDownlink { b_fixed, t_fixed },
    })
}

/// Uplink frozen; computing and downlink optimized in the rest of `T`.
pub(crate) fn frozen_uplink_problem(
    loops: &[LoopSpec],
    budget: &Budget,
    cfg: &SolverConfig,
    floors: &[f64],
) -> Result<PipeProblem, InterloopError> {
    let k = loops.len() as f64;
    let share = cfg.baseline.frozen_link_share;
    let b_fixed = share * budget.total_bandwidth_hz / k;
    let b_pool = (1.0 - share) * budget.total_bandwidth_hz;
    let f_pool = budget.total_cpu_hz;
    let t_fixed = cfg.baseline.dl_comp_ul_time_s;
    let rest = shortened_cycles(loops, t_fixed, "uplink")?;
    let pipes = loops
        .iter()
        .zip(floors)
        .zip(rest)
        .map(|((l, &floor), t)| {
            let rho = l.extraction_ratio;
            Pipe {
                kb: b_pool * t * l.r_dl(),
                kf: f_pool * t * rho / l.processing_difficulty,
                free_b: true,
                free_f: true,
                c0: 0.0,
                cap: rho * b_fixed * t_fixed * l.r_ul(),
                floor,
                summary: l.control,
            }
        })
        .collect();
    Ok(PipeProblem {
        pipes,
        b_pool,
        f_pool,
        layout: Layout::FrozenUplink { b_fixed, t_fixed },
    })
}

impl PipeProblem {
    pub fn len(&self) -> usize {
        self.pipes.len()
    }

    /// Physical allocation of loop `k` at shares `(x, y)`, with the
    /// resources it consumes from the hub.
    pub fn recover(&self, spec: &LoopSpec, k: usize, x: f64, y: f64) -> (IntraAllocation, f64, f64) {
        let f = y * self.f_pool;
        match &self.layout {
            Layout::Joint => {
                let b = x * self.b_pool;
                (allocate(spec, b, f), b, f)
            }
            Layout::FixedCpu(cpu) => {
                let b = x * self.b_pool;
                (allocate(spec, b, cpu[k]), b, cpu[k])
            }
            Layout::FixedBandwidth(bw) => (allocate(spec, bw[k], f), bw[k], f),
            Layout::FrozenDownlink { b_fixed, t_fixed } => {
                let b_ul = x * self.b_pool;
                let rest = spec.cycle_time_s - t_fixed;
                let (t_ul, t_comp) = if b_ul > 0.0 && f > 0.0 {
                    let t_ul = rest / (1.0 + spec.processing_difficulty * b_ul * spec.r_ul() / f);
                    (t_ul, rest - t_ul)
                } else {
                    (0.0, 0.0)
                };
                let a = IntraAllocation::evaluate(spec, b_ul, *b_fixed, t_ul, t_comp, *t_fixed, f);
                (a, b_ul + b_fixed, f)
            }
            Layout::FrozenUplink { b_fixed, t_fixed } => {
                let b_dl = x * self.b_pool;
                let rest = spec.cycle_time_s - t_fixed;
                let (t_comp, t_dl) = if b_dl > 0.0 && f > 0.0 {
                    let comp = spec.processing_difficulty / (spec.extraction_ratio * f);
                    let dl = 1.0 / (b_dl * spec.r_dl());
                    let t_comp = comp / (comp + dl) * rest;
                    (t_comp, rest - t_comp)
                } else {
                    (0.0, 0.0)
                };
                let a = IntraAllocation::evaluate(spec, *b_fixed, b_dl, *t_fixed, t_comp, t_dl, f);
                (a, b_dl + b_fixed, f)
            }
        }
    }

    /// Shares `(x, y)` a reported loop result corresponds to.
    pub fn shares_of(&self, bandwidth_hz: f64, cpu_hz: f64) -> (f64, f64) {
        let x = match &self.layout {
            Layout::FrozenDownlink { b_fixed, .. } | Layout::FrozenUplink { b_fixed, .. } => {
                (bandwidth_hz - b_fixed) / self.b_pool
            }
            Layout::FixedBandwidth(_) => 0.0,
            _ => bandwidth_hz / self.b_pool,
        };
        let y = match &self.layout {
            Layout::FixedCpu(_) => 0.0,
            _ => cpu_hz / self.f_pool,
        };
        (x, y)
    }

    pub fn has_free_b(&self) -> bool {
        self.pipes.iter().any(|p| p.free_b)
    }

    pub fn has_free_f(&self) -> bool {
        self.pipes.iter().any(|p| p.free_f)
    }

    /// Same problem restricted to the loops in `keep`.
    pub fn subset(&self, keep: &[usize]) -> PipeProblem {
        let pick = |v: &Vec<f64>| keep.iter().map(|&k| v[k]).collect();
        PipeProblem {
            pipes: keep.iter().map(|&k| self.pipes[k]).collect(),
            b_pool: self.b_pool,
            f_pool: self.f_pool,
            layout: match &self.layout {
                Layout::FixedCpu(v) => Layout::FixedCpu(pick(v)),
                Layout::FixedBandwidth(v) => Layout::FixedBandwidth(pick(v)),
                other => other.clone(),
            },
        }
    }
}

/// Whether a scheme is solved on the share model.
pub(crate) fn uses_sca(scheme: Scheme) -> bool {
    !matches!(scheme, Scheme::Equal | Scheme::Proportional | Scheme::Tdd)
}
