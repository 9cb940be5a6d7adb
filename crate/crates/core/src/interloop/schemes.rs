use super::pipes::{
    fixed_bandwidth_problem, fixed_cpu_problem, frozen_downlink_problem, frozen_uplink_problem, joint_problem,
    requirement_floors, stability_floors, uses_sca, PipeProblem,
};
use super::sca::{assemble, run, sca_optimize, ScaRun};
use super::subproblem::{linearized_info, Phi};
use super::theorem2::closed_form_bandwidth;
use super::{Diagnostics, InterloopError, LoopResult, Objective, Scheme, SolverConfig, SystemSolution};
use crate::intraloop::{allocate, IntraAllocation};
use crate::model::{Budget, LoopSpec};

pub(crate) fn check_inputs(loops: &[LoopSpec], budget: &Budget, cfg: &SolverConfig) -> Result<(), InterloopError> {
    if loops.is_empty() {
        return Err(InterloopError::Config("at least one loop is required".into()));
    }
    for (k, l) in loops.iter().enumerate() {
        l.validate()
            .map_err(|e| InterloopError::Config(format!("loop {k}: {e}")))?;
        l.control
            .validate()
            .map_err(|e| InterloopError::Config(format!("loop {k}: {e}")))?;
    }
    budget.validate().map_err(|e| InterloopError::Config(e.to_string()))?;
    cfg.validate().map_err(InterloopError::Config)
}

/// Runs `cfg.scheme`.
pub fn solve(loops: &[LoopSpec], budget: &Budget, cfg: &SolverConfig) -> Result<SystemSolution, InterloopError> {
    baseline(cfg.scheme, loops, budget, cfg)
}

/// Runs any scheme, including the proposed one.
pub fn baseline(
    scheme: Scheme,
    loops: &[LoopSpec],
    budget: &Budget,
    cfg: &SolverConfig,
) -> Result<SystemSolution, InterloopError> {
    check_inputs(loops, budget, cfg)?;
    let req = cfg.lqr_requirement.as_deref();
    match scheme {
        Scheme::Proposed => sca_optimize(loops, budget, cfg, Objective::MinTotalLqr, None),
        Scheme::MaxSum => sca_optimize(loops, budget, cfg, Objective::MaxSumInfo, req),
        Scheme::MaxMin => sca_optimize(loops, budget, cfg, Objective::MaxMinInfo, req),
        Scheme::Equal => Ok(fixed_split(loops, budget, cfg, scheme, |_| 0.5)),
        Scheme::Proportional => Ok(fixed_split(loops, budget, cfg, scheme, |l| {
            1.0 / (1.0 + l.extraction_ratio)
        })),
        Scheme::Tdd => Ok(tdd(loops, budget)),
        Scheme::Uldl => {
            let problem = fixed_cpu_problem(loops, budget, &stability_floors(loops, cfg));
            Ok(frozen_scheme(&problem, loops, cfg, scheme))
        }
        Scheme::UlComp => {
            let problem = frozen_downlink_problem(loops, budget, cfg, &stability_floors(loops, cfg))?;
            Ok(frozen_scheme(&problem, loops, cfg, scheme))
        }
        Scheme::DlComp => {
            let problem = frozen_uplink_problem(loops, budget, cfg, &stability_floors(loops, cfg))?;
            Ok(frozen_scheme(&problem, loops, cfg, scheme))
        }
        Scheme::Theorem2 => {
            let cf = closed_form_bandwidth(loops, budget.total_bandwidth_hz);
            let problem = fixed_bandwidth_problem(loops, budget, &cf.bandwidth_hz, &stability_floors(loops, cfg));
            let mut sol = frozen_scheme(&problem, loops, cfg, scheme);
            sol.diagnostics.warnings.extend(cf.warnings);
            Ok(sol)
        }
    }
}

/// SCA on a scheme with frozen variables. Loops that cannot be stabilized
/// even with whole pools get nothing and infinite cost; if the rest is still
/// jointly infeasible every loop gets an equal share.
fn frozen_scheme(problem: &PipeProblem, loops: &[LoopSpec], cfg: &SolverConfig, scheme: Scheme) -> SystemSolution {
    let n = loops.len();
    let hopeless: Vec<usize> = (0..n)
        .filter(|&k| {
            let p = &problem.pipes[k];
            !(p.info_alone() > p.floor) || !p.c0.is_finite()
        })
        .collect();
    let keep: Vec<usize> = (0..n).filter(|k| !hopeless.contains(k)).collect();
    let mut warnings: Vec<String> = hopeless
        .iter()
        .map(|k| format!("loop {k} cannot be stabilized under {scheme} and gets no pooled resources"))
        .collect();

    let outcome = if keep.is_empty() {
        Err(InterloopError::Infeasible {
            loops: hopeless.clone(),
            reason: "no loop can be stabilized".into(),
        })
    } else {
        run(&problem.subset(&keep), Objective::MinTotalLqr, cfg)
    };
    let full = match outcome {
        Ok(sub) => {
            let mut x = vec![0.0; n];
            let mut y = vec![0.0; n];
            let mut point = vec![0.0; n];
            for (i, &k) in keep.iter().enumerate() {
                x[k] = sub.x[i];
                y[k] = sub.y[i];
                point[k] = sub.point[i];
            }
            warnings.extend(sub.warnings);
            ScaRun {
                x,
                y,
                point,
                warnings,
                ..sub
            }
        }
        Err(e) => {
            warnings.push(format!("{scheme}: {e}; falling back to equal shares"));
            log::warn!("{}", warnings.last().unwrap());
            ScaRun {
                x: vec![1.0 / n as f64; n],
                y: vec![1.0 / n as f64; n],
                point: Vec::new(),
                history: Vec::new(),
                lambda_x: 0.0,
                lambda_y: 0.0,
                warnings,
            }
        }
    };
    let mut sol = assemble(problem, loops, &full, scheme, cfg);
    if full.history.is_empty() {
        sol.diagnostics.converged = false;
        sol.diagnostics.kkt_residual = None;
    }
    sol
}

fn result(k: usize, spec: &LoopSpec, allocation: IntraAllocation, bandwidth_hz: f64, cpu_hz: f64) -> LoopResult {
    LoopResult {
        loop_id: k,
        bandwidth_hz,
        cpu_hz,
        d_sc3: allocation.d_sc3,
        cost: spec.control.lqr_lower_bound(allocation.d_sc3),
        allocation,
    }
}

/// Equal per-loop budgets with a fixed UL share of each loop's bandwidth,
/// a fixed DL time, and UL/computing time balanced in the rest of the cycle.
fn fixed_split(
    loops: &[LoopSpec],
    budget: &Budget,
    cfg: &SolverConfig,
    scheme: Scheme,
    ul_share: impl Fn(&LoopSpec) -> f64,
) -> SystemSolution {
    let k = loops.len() as f64;
    let b_k = budget.total_bandwidth_hz / k;
    let f_k = budget.total_cpu_hz / k;
    let results = loops
        .iter()
        .enumerate()
        .map(|(i, l)| {
            let b_ul = b_k * ul_share(l);
            let b_dl = b_k - b_ul;
            let t_dl = cfg.baseline.dl_time_fraction * l.cycle_time_s;
            let rest = l.cycle_time_s - t_dl;
            let t_ul = rest / (1.0 + l.processing_difficulty * b_ul * l.r_ul() / f_k);
            let a = IntraAllocation::evaluate(l, b_ul, b_dl, t_ul, rest - t_ul, t_dl, f_k);
            result(i, l, a, b_k, f_k)
        })
        .collect();
    SystemSolution {
        loops: results,
        diagnostics: Diagnostics::closed_form(scheme),
    }
}

/// Each loop owns the whole hub during a `T/K` slot.
fn tdd(loops: &[LoopSpec], budget: &Budget) -> SystemSolution {
    let k = loops.len() as f64;
    let results = loops
        .iter()
        .enumerate()
        .map(|(i, l)| {
            let slot = LoopSpec {
                cycle_time_s: l.cycle_time_s / k,
                ..*l
            };
            let a = allocate(&slot, budget.total_bandwidth_hz, budget.total_cpu_hz);
            result(i, l, a, budget.total_bandwidth_hz / k, budget.total_cpu_hz / k)
        })
        .collect();
    SystemSolution {
        loops: results,
        diagnostics: Diagnostics::closed_form(Scheme::Tdd),
    }
}

fn problem_for(
    scheme: Scheme,
    loops: &[LoopSpec],
    budget: &Budget,
    cfg: &SolverConfig,
    solution: &SystemSolution,
) -> Result<PipeProblem, InterloopError> {
    let stab = stability_floors(loops, cfg);
    Ok(match scheme {
        Scheme::MaxSum | Scheme::MaxMin => joint_problem(
            loops,
            budget,
            &requirement_floors(loops, cfg, cfg.lqr_requirement.as_deref())?,
        ),
        Scheme::Uldl => fixed_cpu_problem(loops, budget, &stab),
        Scheme::UlComp => frozen_downlink_problem(loops, budget, cfg, &stab)?,
        Scheme::DlComp => frozen_uplink_problem(loops, budget, cfg, &stab)?,
        Scheme::Theorem2 => {
            let b: Vec<f64> = solution.loops.iter().map(|l| l.bandwidth_hz).collect();
            fixed_bandwidth_problem(loops, budget, &b, &stab)
        }
        _ => joint_problem(loops, budget, &stab),
    })
}

/// Scaled KKT residual of a solution for the last convexified round of its
/// scheme: spread of the per-loop marginal values of each resource around
/// the implied price, budget violation and slack, and floor violations.
/// Schemes without rounds are checked on the joint model linearized at
/// their own information levels.
pub fn kkt_residual(solution: &SystemSolution, loops: &[LoopSpec], budget: &Budget, cfg: &SolverConfig) -> f64 {
    let scheme = solution.scheme();
    let scheme = if uses_sca(scheme) { scheme } else { Scheme::Proposed };
    match problem_for(scheme, loops, budget, cfg, solution) {
        Ok(problem) => kkt_on(&problem, solution, cfg, scheme),
        Err(_) => f64::INFINITY,
    }
}

pub(crate) fn kkt_on(problem: &PipeProblem, solution: &SystemSolution, _cfg: &SolverConfig, scheme: Scheme) -> f64 {
    let phi = if matches!(scheme, Scheme::MaxSum | Scheme::MaxMin) {
        Phi::NegInfo
    } else {
        Phi::Lqr
    };
    let n = problem.len();
    let shares: Vec<(f64, f64)> = solution
        .loops
        .iter()
        .map(|l| problem.shares_of(l.bandwidth_hz, l.cpu_hz))
        .collect();
    let point = &solution.diagnostics.linearization_point;
    let point: Vec<f64> = if point.len() == n && point.iter().all(|d| *d > 0.0) {
        point.clone()
    } else {
        (0..n)
            .map(|k| problem.pipes[k].info(shares[k].0, shares[k].1))
            .collect()
    };

    let mut residual: f64 = 0.0;
    let mut mx: Vec<(f64, bool)> = Vec::new();
    let mut my: Vec<(f64, bool)> = Vec::new();
    for (k, p) in problem.pipes.iter().enumerate() {
        let (x, y) = shares[k];
        if (p.free_b && x <= 0.0) || (p.free_f && y <= 0.0) {
            continue;
        }
        let dp = point[k];
        let g = p.g(x, y);
        let d = linearized_info(p, dp, g);
        residual = residual.max((p.floor - d).max(0.0) / p.floor.abs().max(1.0));
        if p.cap.is_finite() && dp * (2.0 - dp * g) >= p.cap {
            continue;
        }
        let at_floor = (d - p.floor).abs() <= 1e-9 * p.floor.abs().max(1.0);
        let w = -phi.slope(p, d) * dp * dp;
        if p.free_b {
            mx.push((w / (x * x * p.kb), at_floor));
        }
        if p.free_f {
            my.push((w / (y * y * p.kf), at_floor));
        }
    }
    for (marg, used) in [
        (&mx, shares.iter().map(|s| s.0).sum::<f64>()),
        (&my, shares.iter().map(|s| s.1).sum::<f64>()),
    ] {
        if marg.is_empty() {
            continue;
        }
        residual = residual.max(used - 1.0);
        let interior: Vec<f64> = marg.iter().filter(|(_, f)| !f).map(|(m, _)| *m).collect();
        if interior.is_empty() {
            continue;
        }
        let lambda = interior.iter().sum::<f64>() / interior.len() as f64;
        residual = residual.max((used - 1.0).abs());
        for &(m, at_floor) in marg.iter() {
            let r = if at_floor {
                ((m - lambda) / lambda).max(0.0)
            } else {
                (m - lambda).abs() / lambda
            };
            residual = residual.max(r);
        }
    }
    residual
}
