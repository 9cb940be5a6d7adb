use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use sc3_core::interloop::{baseline, InterloopError};
use sc3_core::intraloop::solve_single_loop;
use sc3_core::model::{load_scenario, parse_quantity};
use sc3_core::oracle::{grid_interloop, grid_intraloop, GridSpec};
use sc3_core::{Budget, LinkSpec, LoopSpec, Scenario, Scheme, SystemSolution};
use serde_json::{json, Value};

use crate::output::{self, num};

/// Invalid command-line input that is not a scenario file problem.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// A verification or reproduction check that did not hold.
#[derive(Debug)]
pub struct CheckFailed(pub Vec<String>);

impl fmt::Display for CheckFailed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} check(s) failed: {}", self.0.len(), self.0.join("; "))
    }
}

impl std::error::Error for CheckFailed {}

pub fn read_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading scenario {}", path.display()))?;
    let scenario = load_scenario(&text).with_context(|| format!("loading scenario {}", path.display()))?;
    for w in &scenario.warnings {
        log::warn!("{w}");
    }
    Ok(scenario)
}

/// `solve`: one scheme, one CSV row per loop plus a JSON summary next to it.
pub fn solve(scenario_path: &Path, scheme: Option<Scheme>, out: &Path) -> Result<()> {
    let mut scenario = read_scenario(scenario_path)?;
    if let Some(s) = scheme {
        scenario.solver.scheme = s;
    }
    let cfg = &scenario.solver;
    let sol = baseline(cfg.scheme, &scenario.loops, &scenario.budget, cfg)?;
    for w in &sol.diagnostics.warnings {
        log::warn!("{w}");
    }
    let digest = output::digest(&scenario);
    let mut csv = output::provenance_header(&digest, cfg);
    csv.push_str(output::LOOP_COLUMNS);
    csv.push('\n');
    for r in &sol.loops {
        csv.push_str(&output::loop_fields(r));
        csv.push('\n');
    }
    output::write(out, &csv)?;
    let summary = output::record(&digest, cfg, output::solution_json(&sol));
    output::write_json(&summary_path(out), &summary)?;
    println!(
        "{}: total LQR cost {} over {} loops ({} iterations)",
        cfg.scheme,
        num(sol.total_cost().value()),
        sol.loops.len(),
        sol.diagnostics.iterations
    );
    Ok(())
}

/// `results.csv` gets its summary in `results.summary.json`.
pub fn summary_path(out: &Path) -> PathBuf {
    out.with_extension("summary.json")
}

fn loop_field(l: &mut LoopSpec, field: &str, v: f64) -> Result<()> {
    match field {
        "T" => l.cycle_time_s = v,
        "rho" => l.extraction_ratio = v,
        "alpha" => l.processing_difficulty = v,
        "ul.se" => l.ul = LinkSpec::new(v)?,
        "dl.se" => l.dl = LinkSpec::new(v)?,
        "control.log2_det_A" => l.control.log2_det_a = v,
        _ => bail!(UsageError(format!(
            "unknown loop parameter {field:?}; expected T, rho, alpha, ul.se, dl.se or control.log2_det_A"
        ))),
    }
    Ok(())
}

/// Sets the parameter at a dotted path: `budget.bandwidth`, `budget.cpu`,
/// `solver.delta`, `loops.<field>` for every loop or `loops[i].<field>`.
pub fn apply_param(s: &mut Scenario, path: &str, v: f64) -> Result<()> {
    match path {
        "budget.bandwidth" => s.budget = Budget::new(v, s.budget.total_cpu_hz)?,
        "budget.cpu" => s.budget = Budget::new(s.budget.total_bandwidth_hz, v)?,
        "solver.delta" => s.solver.delta = v,
        _ => {
            if let Some(field) = path.strip_prefix("loops.") {
                for l in &mut s.loops {
                    loop_field(l, field, v)?;
                }
            } else if let Some(rest) = path.strip_prefix("loops[") {
                let (idx, field) = rest
                    .split_once("].")
                    .ok_or_else(|| UsageError(format!("cannot parse parameter path {path:?}")))?;
                let k: usize = idx
                    .parse()
                    .map_err(|_| UsageError(format!("bad loop index in {path:?}")))?;
                let n = s.loops.len();
                let l = s
                    .loops
                    .get_mut(k)
                    .ok_or_else(|| UsageError(format!("{path:?}: scenario has {n} loops")))?;
                loop_field(l, field, v)?;
            } else {
                bail!(UsageError(format!(
                    "unknown parameter {path:?}; expected budget.bandwidth, budget.cpu, solver.delta, loops.<field> or loops[i].<field>"
                )));
            }
        }
    }
    Ok(())
}

pub fn parse_value(text: &str) -> Result<f64> {
    parse_quantity(text).map_err(|m| UsageError(m).into())
}

fn sweep_points(from: f64, to: f64, steps: usize) -> Vec<f64> {
    if steps <= 1 {
        return vec![from];
    }
    (0..steps)
        .map(|i| from + (to - from) * i as f64 / (steps - 1) as f64)
        .collect()
}

fn status_of(e: &InterloopError) -> &'static str {
    match e {
        InterloopError::Infeasible { .. } => "infeasible",
        InterloopError::NotConverged { .. } => "not-converged",
        InterloopError::Config(_) => "config-error",
        _ => "solver-error",
    }
}

pub const SWEEP_COLUMNS: &str =
    "param_value,scheme,loop_id,b_ul_hz,b_dl_hz,t_ul_s,t_comp_s,t_dl_s,f_hz,d_sc3_bits,lqr_cost,status";

/// Rows of one (parameter value, scheme) cell of a sweep.
pub fn sweep_rows(value: f64, scheme: Scheme, outcome: &Result<SystemSolution, InterloopError>) -> String {
    let prefix = format!("{},{}", num(value), scheme.name());
    let mut out = String::new();
    match outcome {
        Ok(sol) => {
            let status = if sol.diagnostics.converged { "ok" } else { "fallback" };
            for r in &sol.loops {
                out.push_str(&format!("{prefix},{},{status}\n", output::loop_fields(r)));
            }
            let sum =
                |f: fn(&sc3_core::IntraAllocation) -> f64| -> f64 { sol.loops.iter().map(|r| f(&r.allocation)).sum() };
            out.push_str(&format!(
                "{prefix},TOTAL,{},{},,,,{},{},{},{status}\n",
                num(sum(|a| a.b_ul)),
                num(sum(|a| a.b_dl)),
                num(sol.total_cpu()),
                num(sol.total_info()),
                num(sol.total_cost().value()),
            ));
        }
        Err(e) => {
            log::warn!("{} at {}: {e}", scheme, num(value));
            out.push_str(&format!("{prefix},TOTAL,,,,,,,,,{}\n", status_of(e)));
        }
    }
    out
}

/// `sweep`: every scheme at every point, long-format CSV.
pub fn sweep(
    scenario_path: &Path,
    param: &str,
    from: f64,
    to: f64,
    steps: usize,
    schemes: &[Scheme],
    out: &Path,
) -> Result<()> {
    let scenario = read_scenario(scenario_path)?;
    if steps == 0 {
        bail!(UsageError("--steps must be at least 1".into()));
    }
    let points = sweep_points(from, to, steps);
    let mut scenarios = Vec::with_capacity(points.len());
    for &v in &points {
        let mut s = scenario.clone();
        apply_param(&mut s, param, v).with_context(|| format!("setting {param} = {}", num(v)))?;
        scenarios.push(s);
    }
    let schemes: Vec<Scheme> = if schemes.is_empty() {
        vec![scenario.solver.scheme]
    } else {
        schemes.to_vec()
    };
    let cells: Vec<(usize, Scheme)> = (0..points.len())
        .flat_map(|i| schemes.iter().map(move |&s| (i, s)))
        .collect();
    let rows: Vec<String> = cells
        .par_iter()
        .map(|&(i, scheme)| {
            let s = &scenarios[i];
            sweep_rows(points[i], scheme, &baseline(scheme, &s.loops, &s.budget, &s.solver))
        })
        .collect();

    let digest = output::digest(&scenario);
    let mut csv = output::provenance_header(&digest, &scenario.solver);
    csv.push_str(&format!(
        "# sweep: {param} from {} to {} in {steps} steps\n",
        num(from),
        num(to)
    ));
    csv.push_str(SWEEP_COLUMNS);
    csv.push('\n');
    for r in rows {
        csv.push_str(&r);
    }
    output::write(out, &csv)?;
    println!(
        "{} points x {} schemes written to {}",
        points.len(),
        schemes.len(),
        out.display()
    );
    Ok(())
}

/// Test hook for `verify`: adds 1% of the bandwidth budget to loop 0.
pub const FAULT_SHARE: f64 = 0.01;

struct Check {
    name: String,
    pass: bool,
    detail: String,
}

/// `verify`: closed forms and the proposed scheme against brute force.
pub fn verify(
    scenario_path: &Path,
    grid_points: usize,
    subset: Option<&[usize]>,
    inject_fault: bool,
    out: Option<&Path>,
) -> Result<()> {
    let scenario = read_scenario(scenario_path)?;
    let loops: Vec<LoopSpec> = match subset {
        Some(idx) => idx
            .iter()
            .map(|&k| {
                scenario
                    .loops
                    .get(k)
                    .copied()
                    .ok_or_else(|| UsageError(format!("--loops: no loop {k}")))
            })
            .collect::<Result<_, _>>()?,
        None => scenario.loops.clone(),
    };
    let budget = scenario.budget;
    let b_max = budget.total_bandwidth_hz;
    let mut checks = Vec::new();

    let grid = GridSpec::intraloop(grid_points);
    for (k, l) in loops.iter().enumerate() {
        let (mut closed, _) = solve_single_loop(l, &budget);
        if inject_fault && k == 0 {
            closed.b_ul += FAULT_SHARE * b_max;
        }
        let g = grid_intraloop(l, &budget, &grid).map_err(|e| UsageError(e.to_string()))?;
        let feasible = closed.bandwidth() <= b_max * (1.0 + 1e-12)
            && closed.total_time() <= l.cycle_time_s * (1.0 + 1e-12)
            && closed.f <= budget.total_cpu_hz * (1.0 + 1e-12);
        let gap = closed.d_sc3 - g.d_sc3;
        checks.push(Check {
            name: format!("loop {k} alone: closed form feasible and at least the grid best"),
            pass: feasible && closed.d_sc3 >= g.d_sc3 * (1.0 - 1e-12),
            detail: format!(
                "closed {} bits, grid {} bits, bandwidth {} of {} Hz",
                num(closed.d_sc3),
                num(g.d_sc3),
                num(closed.bandwidth()),
                num(b_max)
            ),
        });
        checks.push(Check {
            name: format!("loop {k} alone: within the grid resolution bound"),
            pass: gap <= g.resolution_bound,
            detail: format!("gap {} bits, bound {} bits", num(gap), num(g.resolution_bound)),
        });
    }

    if loops.len() <= 3 {
        let mut sol = baseline(Scheme::Proposed, &loops, &budget, &scenario.solver)?;
        if inject_fault {
            sol.loops[0].bandwidth_hz += FAULT_SHARE * b_max;
        }
        let g = grid_interloop(&loops, &budget, &GridSpec::interloop(grid_points))
            .map_err(|e| UsageError(e.to_string()))?;
        let total = sol.total_cost().value();
        let feasible =
            sol.total_bandwidth() <= b_max * (1.0 + 1e-9) && sol.total_cpu() <= budget.total_cpu_hz * (1.0 + 1e-9);
        let bound = g.total_cost.value() + g.resolution_bound;
        checks.push(Check {
            name: "proposed scheme within budget and no worse than the share grid".into(),
            pass: feasible && total <= bound + 1e-9 * total,
            detail: format!(
                "solver {}, grid {} (+{} resolution), bandwidth {} of {} Hz",
                num(total),
                num(g.total_cost.value()),
                num(g.resolution_bound),
                num(sol.total_bandwidth()),
                num(b_max)
            ),
        });
    } else {
        println!(
            "SKIP inter-loop check: {} loops exceed the exhaustive limit of 3; select a subset with --loops",
            loops.len()
        );
    }

    let mut failed = Vec::new();
    for c in &checks {
        println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
        if !c.pass {
            failed.push(c.name.clone());
        }
    }
    if let Some(path) = out {
        let report: Vec<Value> = checks
            .iter()
            .map(|c| json!({"check": c.name, "pass": c.pass, "detail": c.detail}))
            .collect();
        let body = json!({
            "grid_points": grid_points,
            "loops": subset.map(|s| s.to_vec()),
            "checks": report,
        });
        output::write_json(
            path,
            &output::record(&output::digest(&scenario), &scenario.solver, body),
        )?;
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CheckFailed(failed).into())
    }
}
