use super::pipes::{joint_problem, requirement_floors, stability_floors, PipeProblem};
use super::subproblem::{max_min, min_resource, solve_linearized, Linearized, Phi};
use super::{Diagnostics, InterloopError, LoopResult, Objective, Scheme, SolverConfig, SystemSolution};
use crate::model::{Budget, LoopSpec};

/// Raw outcome of the outer loop in share units.
#[derive(Debug, Clone)]
pub(crate) struct ScaRun {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub point: Vec<f64>,
    pub history: Vec<f64>,
    pub lambda_x: f64,
    pub lambda_y: f64,
    pub warnings: Vec<String>,
}

/// Successive convex approximation of the multi-loop problem on the joint
/// model. For the information objectives `lqr_requirement` (one value or one
/// per loop) is turned into per-loop information floors; when absent the
/// configured requirement, or 5, is used.
pub fn sca_optimize(
    loops: &[LoopSpec],
    budget: &Budget,
    cfg: &SolverConfig,
    objective: Objective,
    lqr_requirement: Option<&[f64]>,
) -> Result<SystemSolution, InterloopError> {
    super::schemes::check_inputs(loops, budget, cfg)?;
    let (scheme, floors) = match objective {
        Objective::MinTotalLqr => (Scheme::Proposed, stability_floors(loops, cfg)),
        Objective::MaxSumInfo => (Scheme::MaxSum, requirement_floors(loops, cfg, lqr_requirement)?),
        Objective::MaxMinInfo => (Scheme::MaxMin, requirement_floors(loops, cfg, lqr_requirement)?),
    };
    let problem = joint_problem(loops, budget, &floors);
    let run = run(&problem, objective, cfg)?;
    Ok(assemble(&problem, loops, &run, scheme, cfg))
}

/// First linearization point of the outer loop.
fn initial_point(problem: &PipeProblem, objective: Objective, cfg: &SolverConfig) -> Vec<f64> {
    match objective {
        Objective::MinTotalLqr => problem
            .pipes
            .iter()
            .map(|p| (p.summary.log2_det_a + cfg.d_init_offset).max(p.floor + cfg.stability_margin))
            .collect(),
        // A common starting level keeps symmetric loops symmetric.
        _ => {
            let top = problem.pipes.iter().map(|p| p.floor).fold(f64::MIN, f64::max);
            vec![top + cfg.d_init_offset; problem.len()]
        }
    }
}

/// Strictly feasible point used when the default start admits no
/// allocation: every loop gets its floor plus half the largest common
/// margin.
fn feasible_start(problem: &PipeProblem) -> Result<Vec<f64>, InterloopError> {
    let floors: Vec<f64> = problem.pipes.iter().map(|p| p.floor).collect();
    let base = min_resource(&problem.pipes, &floors).map_err(|loops| InterloopError::Infeasible {
        reason: "these loops cannot be stabilized even with the whole hub".into(),
        loops,
    })?;
    if !base.feasible() {
        return Err(InterloopError::Infeasible {
            loops: (0..problem.len()).collect(),
            reason: format!(
                "the loops jointly need {:.6} of the bandwidth and {:.6} of the CPU just to meet their floors",
                base.sum_x, base.sum_y
            ),
        });
    }
    let room = problem
        .pipes
        .iter()
        .map(|p| p.info_alone() - p.floor)
        .fold(f64::INFINITY, f64::min);
    let at = |tau: f64| {
        let targets: Vec<f64> = floors.iter().map(|f| f + tau).collect();
        min_resource(&problem.pipes, &targets).ok().filter(|r| r.feasible())
    };
    let (mut lo, mut hi) = (0.0, room);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if at(mid).is_some() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let r = at(0.5 * lo).unwrap_or(base);
    Ok(problem
        .pipes
        .iter()
        .enumerate()
        .map(|(k, p)| p.info(r.x[k], r.y[k]))
        .collect())
}

/// Information actually delivered by the shares of a round; the next
/// tangent point. It dominates the linearized value, so the surrogate of
/// the next round is tighter while the current shares stay feasible.
fn true_info(problem: &PipeProblem, sol: &Linearized) -> Vec<f64> {
    problem
        .pipes
        .iter()
        .enumerate()
        .map(|(k, p)| p.info(sol.x[k], sol.y[k]))
        .collect()
}

pub(crate) fn run(problem: &PipeProblem, objective: Objective, cfg: &SolverConfig) -> Result<ScaRun, InterloopError> {
    let Some(phi) = Phi::of(objective) else {
        let (t, r) = max_min(problem)?;
        let point = problem
            .pipes
            .iter()
            .enumerate()
            .map(|(k, p)| p.info(r.x[k], r.y[k]))
            .collect();
        return Ok(ScaRun {
            x: r.x,
            y: r.y,
            point,
            history: vec![-t],
            lambda_x: 0.0,
            lambda_y: 0.0,
            warnings: Vec::new(),
        });
    };
    let total = |s: &Linearized| -> f64 { problem.pipes.iter().zip(&s.d).map(|(p, &d)| phi.value(p, d)).sum() };

    let mut warnings = Vec::new();
    let mut point = initial_point(problem, objective, cfg);
    let mut history: Vec<f64> = Vec::new();
    let mut last: Option<(Linearized, Vec<f64>)> = None;
    for round in 1..=cfg.max_outer_iters {
        let sol = match solve_linearized(problem, &point, phi, cfg) {
            Ok(s) => s,
            Err(e) if round == 1 && e.is_infeasible() => {
                point = feasible_start(problem)?;
                warnings.push("default starting point infeasible; started from a feasible interior point".into());
                solve_linearized(problem, &point, phi, cfg)?
            }
            Err(e) => return Err(e),
        };
        let obj = total(&sol);
        if let Some(&prev) = history.last() {
            if obj > prev {
                // Only rounding can raise the objective; keep the previous round.
                log::debug!("round {round}: objective rose from {prev} to {obj}, stopping");
                break;
            }
            history.push(obj);
            let next = true_info(problem, &sol);
            last = Some((sol, std::mem::replace(&mut point, next)));
            if (prev - obj).abs() <= cfg.delta * prev.abs() {
                break;
            }
        } else {
            history.push(obj);
            let next = true_info(problem, &sol);
            last = Some((sol, std::mem::replace(&mut point, next)));
        }
        log::debug!("round {round}: objective {obj}");
        if round == cfg.max_outer_iters {
            return Err(InterloopError::NotConverged {
                iterations: round,
                history,
            });
        }
    }
    let (sol, point) = last.expect("at least one round");
    Ok(ScaRun {
        x: sol.x,
        y: sol.y,
        point,
        history,
        lambda_x: sol.lambda_x,
        lambda_y: sol.lambda_y,
        warnings,
    })
}

pub(crate) fn assemble(
    problem: &PipeProblem,
    loops: &[LoopSpec],
    run: &ScaRun,
    scheme: Scheme,
    cfg: &SolverConfig,
) -> SystemSolution {
    let results = loops
        .iter()
        .enumerate()
        .map(|(k, spec)| {
            let (allocation, bandwidth_hz, cpu_hz) = problem.recover(spec, k, run.x[k], run.y[k]);
            LoopResult {
                loop_id: k,
                bandwidth_hz,
                cpu_hz,
                d_sc3: allocation.d_sc3,
                cost: spec.control.lqr_lower_bound(allocation.d_sc3),
                allocation,
            }
        })
        .collect();
    let mut solution = SystemSolution {
        loops: results,
        diagnostics: Diagnostics {
            scheme,
            iterations: run.history.len(),
            converged: true,
            objective_history: run.history.clone(),
            dual_bandwidth: run.lambda_x / problem.b_pool,
            dual_cpu: run.lambda_y / problem.f_pool,
            kkt_residual: None,
            linearization_point: run.point.clone(),
            warnings: run.warnings.clone(),
        },
    };
    if scheme != Scheme::MaxMin {
        solution.diagnostics.kkt_residual = Some(super::schemes::kkt_on(problem, &solution, cfg, scheme));
    }
    solution
}
