//! One convexified round: minimize `Σ φ_k(D_k)` over bandwidth and CPU
//! shares with each `D_k` bounded by the first-order restriction
//! `D_k ≤ D̂_k (2 − D̂_k g_k(x_k, y_k))` around the point `D̂`.
//!
//! With prices `λx`, `λy` on the two pools the cheapest way for a loop to
//! reach `g_k = u` costs `s²/(u − c0)` with `s = √(λx/κ_b) + √(λy/κ_f)`, so
//! each loop solves a convex problem in the single scalar `u`. The prices
//! come from nested monotone root finding on the budget gaps.

use serde::{Deserialize, Serialize};

use super::pipes::{joint_problem, stability_floors, Pipe, PipeProblem};
use super::{InterloopError, Objective, SolverConfig, SubproblemMethod};
use crate::model::{Budget, LoopSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Phi {
    Lqr,
    NegInfo,
}

impl Phi {
    pub fn value(self, p: &Pipe, d: f64) -> f64 {
        match self {
            Phi::Lqr => p.summary.lqr_lower_bound(d).value(),
            Phi::NegInfo => -d,
        }
    }

    pub fn slope(self, p: &Pipe, d: f64) -> f64 {
        match self {
            Phi::Lqr => p.summary.bound_slope(d),
            Phi::NegInfo => -1.0,
        }
    }

    fn curvature(self, p: &Pipe, d: f64) -> f64 {
        match self {
            Phi::Lqr => p.summary.bound_curvature(d),
            Phi::NegInfo => 0.0,
        }
    }

    pub fn of(objective: Objective) -> Option<Phi> {
        match objective {
            Objective::MinTotalLqr => Some(Phi::Lqr),
            Objective::MaxSumInfo => Some(Phi::NegInfo),
            Objective::MaxMinInfo => None,
        }
    }
}

/// Result of one convexified round in share units.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Linearized {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Linearized information of each loop.
    pub d: Vec<f64>,
    /// Price per unit share of each pool.
    pub lambda_x: f64,
    pub lambda_y: f64,
}

/// Public view of a convexified round on the joint model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubproblemSolution {
    pub bandwidth_hz: Vec<f64>,
    pub cpu_hz: Vec<f64>,
    pub d: Vec<f64>,
    pub dual_bandwidth: f64,
    pub dual_cpu: f64,
    /// Largest of `λ·|budget gap|` over both budgets, relative to the price.
    pub slackness_residual: f64,
}

/// Solves one convexified round of the joint problem linearized at `d_prev`,
/// with `D_k ≥ info_floor_k`.
pub fn solve_subproblem(
    loops: &[LoopSpec],
    budget: &Budget,
    d_prev: &[f64],
    objective: Objective,
    info_floor: &[f64],
    cfg: &SolverConfig,
) -> Result<SubproblemSolution, InterloopError> {
    if loops.is_empty() || d_prev.len() != loops.len() || info_floor.len() != loops.len() {
        return Err(InterloopError::Config(
            "loops, d_prev and info_floor must be nonempty and of equal length".into(),
        ));
    }
    let phi = Phi::of(objective)
        .ok_or_else(|| InterloopError::Config("max-min has no linearized round; use sca_optimize".into()))?;
    let stab = stability_floors(loops, cfg);
    let floors: Vec<f64> = info_floor.iter().zip(&stab).map(|(a, b)| a.max(*b)).collect();
    let problem = joint_problem(loops, budget, &floors);
    for (k, &d) in d_prev.iter().enumerate() {
        if !(d > 0.0 && d.is_finite()) {
            return Err(InterloopError::Config(format!("d_prev[{k}] must be positive, got {d}")));
        }
    }
    let sol = solve_linearized(&problem, d_prev, phi, cfg)?;
    let gap_x = (sol.x.iter().sum::<f64>() - 1.0).abs();
    let gap_y = (sol.y.iter().sum::<f64>() - 1.0).abs();
    Ok(SubproblemSolution {
        bandwidth_hz: sol.x.iter().map(|x| x * problem.b_pool).collect(),
        cpu_hz: sol.y.iter().map(|y| y * problem.f_pool).collect(),
        d: sol.d,
        dual_bandwidth: sol.lambda_x / problem.b_pool,
        dual_cpu: sol.lambda_y / problem.f_pool,
        slackness_residual: gap_x.max(gap_y),
    })
}

/// Range of `g` a loop may take: `lo` keeps it from paying for information
/// beyond its cap, `hi` keeps it above its floor.
fn g_range(p: &Pipe, dp: f64) -> Option<(f64, f64)> {
    let hi = (2.0 * dp - p.floor) / (dp * dp);
    let cap_lo = if p.cap.is_finite() {
        (2.0 * dp - p.cap) / (dp * dp)
    } else {
        f64::NEG_INFINITY
    };
    let lo = p.c0.max(cap_lo);
    (hi > p.c0 && lo <= hi).then_some((lo, hi))
}

pub(crate) fn linearized_info(p: &Pipe, dp: f64, g: f64) -> f64 {
    (dp * (2.0 - dp * g)).min(p.cap)
}

pub(crate) fn solve_linearized(
    problem: &PipeProblem,
    dp: &[f64],
    phi: Phi,
    cfg: &SolverConfig,
) -> Result<Linearized, InterloopError> {
    let mut ranges = Vec::with_capacity(problem.len());
    for (k, p) in problem.pipes.iter().enumerate() {
        match g_range(p, dp[k]) {
            Some(r) => ranges.push(r),
            None => {
                return Err(InterloopError::Infeasible {
                    loops: vec![k],
                    reason: format!(
                        "loop {k} cannot reach its floor of {:.6} bits around {:.6} bits",
                        p.floor, dp[k]
                    ),
                })
            }
        }
    }
    let targets: Vec<f64> = ranges.iter().map(|(_, hi)| 1.0 / hi).collect();
    let need = min_resource(&problem.pipes, &targets).map_err(|loops| InterloopError::Infeasible {
        reason: "the linearized round has no feasible point".into(),
        loops,
    })?;
    if !need.feasible() {
        return Err(InterloopError::Infeasible {
            loops: (0..problem.len()).collect(),
            reason: format!(
                "the linearized round needs {:.6} of the bandwidth pool and {:.6} of the CPU pool",
                need.sum_x, need.sum_y
            ),
        });
    }
    match cfg.subproblem {
        SubproblemMethod::DualDecomposition => dual_decomposition(problem, dp, &ranges, phi, cfg),
        SubproblemMethod::ProjectedGradient => projected_gradient(problem, dp, &ranges, &need, phi, cfg),
    }
}

/// Minimizer over `u ∈ [lo, hi]` of `φ(D̂(2 − D̂u)) + s²/(u − c0)`.
fn solve_loop(p: &Pipe, dp: f64, phi: Phi, s2: f64, (lo, hi): (f64, f64), tol: f64) -> Result<f64, String> {
    let c0 = p.c0;
    let dp2 = dp * dp;
    let dpsi = |v: f64| -dp2 * phi.slope(p, dp * (2.0 - dp * (c0 + v))) - s2 / (v * v);
    let d2psi = |v: f64| dp2 * dp2 * phi.curvature(p, dp * (2.0 - dp * (c0 + v))) + 2.0 * s2 / (v * v * v);
    let (mut a, mut b) = (lo - c0, hi - c0);
    if dpsi(b) <= 0.0 {
        return Ok(hi);
    }
    if a > 0.0 && dpsi(a) >= 0.0 {
        return Ok(lo);
    }
    let mut v = b;
    let mut width = b - a;
    for it in 0..500 {
        let f = dpsi(v);
        if f == 0.0 {
            return Ok(c0 + v);
        }
        if f < 0.0 {
            a = v;
        } else {
            b = v;
        }
        if b - a <= tol * b {
            return Ok(c0 + 0.5 * (a + b));
        }
        let newton = v - f / d2psi(v);
        let shrinking = it % 3 != 2 || b - a < 0.5 * width;
        if it % 3 == 2 {
            width = b - a;
        }
        v = if newton > a && newton < b && shrinking {
            if (newton - v).abs() <= 0.25 * tol * newton {
                return Ok(c0 + newton);
            }
            newton
        } else if a <= 0.0 {
            b * 1e-3
        } else if b > 4.0 * a {
            (a * b).sqrt()
        } else {
            0.5 * (a + b)
        };
    }
    Err(format!("no convergence in [{a:e}, {b:e}]"))
}

struct Demand {
    x: Vec<f64>,
    y: Vec<f64>,
    u: Vec<f64>,
}

impl Demand {
    fn sum_x(&self) -> f64 {
        self.x.iter().sum()
    }
    fn sum_y(&self) -> f64 {
        self.y.iter().sum()
    }
}

fn demand(
    problem: &PipeProblem,
    dp: &[f64],
    ranges: &[(f64, f64)],
    phi: Phi,
    lx: f64,
    ly: f64,
    tol: f64,
) -> Result<Demand, InterloopError> {
    let n = problem.len();
    let mut d = Demand {
        x: vec![0.0; n],
        y: vec![0.0; n],
        u: vec![0.0; n],
    };
    for (k, p) in problem.pipes.iter().enumerate() {
        let mut s = 0.0;
        if p.free_b {
            s += (lx / p.kb).sqrt();
        }
        if p.free_f {
            s += (ly / p.kf).sqrt();
        }
        let u = solve_loop(p, dp[k], phi, s * s, ranges[k], tol)
            .map_err(|reason| InterloopError::InnerSolve { loop_index: k, reason })?;
        let v = u - p.c0;
        if p.free_b {
            d.x[k] = s / v / (lx * p.kb).sqrt();
        }
        if p.free_f {
            d.y[k] = s / v / (ly * p.kf).sqrt();
        }
        d.u[k] = u;
    }
    Ok(d)
}

const LN_MIN: f64 = -700.0;
const LN_MAX: f64 = 700.0;

/// Root of a decreasing function of `ℓ = ln λ`, found by geometric bracket
/// expansion from `start` and Illinois regula falsi. A function still
/// negative at the lowest price returns that price.
fn decreasing_root(
    resource: &'static str,
    start: f64,
    tol: f64,
    mut f: impl FnMut(f64) -> Result<f64, InterloopError>,
) -> Result<f64, InterloopError> {
    let f0 = f(start)?;
    if f0.abs() <= tol {
        return Ok(start);
    }
    let dir = if f0 > 0.0 { 1.0 } else { -1.0 };
    let mut step = 2.0;
    let (mut a, mut fa) = (start, f0);
    let (mut b, mut fb);
    loop {
        b = (a + dir * step).clamp(LN_MIN, LN_MAX);
        fb = f(b)?;
        if fb.abs() <= tol {
            return Ok(b);
        }
        if (fb > 0.0) != (f0 > 0.0) {
            break;
        }
        if b == LN_MIN && fb < 0.0 {
            // Demand stays below the pool at a negligible price: the budget is slack.
            return Ok(b);
        }
        if b == LN_MAX {
            return Err(InterloopError::DualSearch {
                resource,
                lo: LN_MIN.exp(),
                hi: LN_MAX.exp(),
                gap: fb.exp_m1(),
            });
        }
        a = b;
        fa = fb;
        step *= 2.0;
    }
    for _ in 0..300 {
        let lo = a.min(b);
        let hi = a.max(b);
        let mut c = b - fb * (b - a) / (fb - fa);
        if !(c > lo && c < hi) {
            c = 0.5 * (lo + hi);
        }
        let fc = f(c)?;
        if fc.abs() <= tol || hi - lo <= 4.0 * f64::EPSILON * hi.abs().max(1.0) {
            return Ok(c);
        }
        if (fc > 0.0) != (fb > 0.0) {
            a = b;
            fa = fb;
        } else {
            fa *= 0.5;
        }
        b = c;
        fb = fc;
    }
    Err(InterloopError::DualSearch {
        resource,
        lo: a.min(b).exp(),
        hi: a.max(b).exp(),
        gap: fb.exp_m1(),
    })
}

fn price_scale(problem: &PipeProblem, dp: &[f64], phi: Phi) -> f64 {
    let s: f64 = problem
        .pipes
        .iter()
        .zip(dp)
        .map(|(p, &d)| (phi.slope(p, d) * d).abs())
        .sum();
    if s.is_finite() && s > 0.0 {
        s
    } else {
        1.0
    }
}

fn dual_decomposition(
    problem: &PipeProblem,
    dp: &[f64],
    ranges: &[(f64, f64)],
    phi: Phi,
    cfg: &SolverConfig,
) -> Result<Linearized, InterloopError> {
    let tol = cfg.inner_tol;
    let ell0 = price_scale(problem, dp, phi).ln();
    let (has_x, has_y) = (problem.has_free_b(), problem.has_free_f());
    let gap_tol = cfg.dual_tol;

    let (lx, ly) = match (has_x, has_y) {
        (true, true) => {
            let mut ell_x = ell0;
            let inner = |ly: f64, ell_x: &mut f64| -> Result<f64, InterloopError> {
                let lx = decreasing_root("bandwidth", *ell_x, 0.01 * gap_tol, |l| {
                    Ok(demand(problem, dp, ranges, phi, l.exp(), ly, tol)?.sum_x().ln())
                })?
                .exp();
                *ell_x = lx.ln();
                Ok(lx)
            };
            let ell_y = decreasing_root("cpu", ell0, gap_tol, |l| {
                let ly = l.exp();
                let lx = inner(ly, &mut ell_x)?;
                Ok(demand(problem, dp, ranges, phi, lx, ly, tol)?.sum_y().ln())
            })?;
            let ly = ell_y.exp();
            (inner(ly, &mut ell_x)?, ly)
        }
        (true, false) => {
            let l = decreasing_root("bandwidth", ell0, gap_tol, |l| {
                Ok(demand(problem, dp, ranges, phi, l.exp(), 0.0, tol)?.sum_x().ln())
            })?;
            (l.exp(), 0.0)
        }
        (false, true) => {
            let l = decreasing_root("cpu", ell0, gap_tol, |l| {
                Ok(demand(problem, dp, ranges, phi, 0.0, l.exp(), tol)?.sum_y().ln())
            })?;
            (0.0, l.exp())
        }
        (false, false) => (0.0, 0.0),
    };

    let mut dem = demand(problem, dp, ranges, phi, lx, ly, tol)?;
    normalize(&mut dem.x);
    normalize(&mut dem.y);
    let d = problem
        .pipes
        .iter()
        .enumerate()
        .map(|(k, p)| {
            if p.free_b || p.free_f {
                linearized_info(p, dp[k], p.g(dem.x[k], dem.y[k]))
            } else {
                linearized_info(p, dp[k], dem.u[k])
            }
        })
        .collect();
    Ok(Linearized {
        x: dem.x,
        y: dem.y,
        d,
        lambda_x: lx,
        lambda_y: ly,
    })
}

fn normalize(v: &mut [f64]) {
    let s: f64 = v.iter().sum();
    if s > 0.0 {
        v.iter_mut().for_each(|x| *x /= s);
    }
}

/// Euclidean projection of `v` onto `{z ≥ 0, Σz = 1}`.
fn project_simplex(v: &mut [f64]) {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (i, &s) in sorted.iter().enumerate() {
        cum += s;
        let t = (cum - 1.0) / (i + 1) as f64;
        if s - t > 0.0 {
            theta = t;
        }
    }
    v.iter_mut().for_each(|x| *x = (*x - theta).max(0.0));
}

fn projected_gradient(
    problem: &PipeProblem,
    dp: &[f64],
    ranges: &[(f64, f64)],
    need: &MinResource,
    phi: Phi,
    cfg: &SolverConfig,
) -> Result<Linearized, InterloopError> {
    let n = problem.len();
    let pipes = &problem.pipes;
    let free_b: Vec<usize> = (0..n).filter(|&k| pipes[k].free_b).collect();
    let free_f: Vec<usize> = (0..n).filter(|&k| pipes[k].free_f).collect();

    let spread = |min: &[f64], idx: &[usize]| -> Vec<f64> {
        let mut v = min.to_vec();
        if !idx.is_empty() {
            let rest = (1.0 - idx.iter().map(|&k| min[k]).sum::<f64>()) / idx.len() as f64;
            idx.iter().for_each(|&k| v[k] += rest);
        }
        v
    };
    let mut x = spread(&need.x, &free_b);
    let mut y = spread(&need.y, &free_f);

    let objective = |x: &[f64], y: &[f64]| -> f64 {
        let mut total = 0.0;
        for (k, p) in pipes.iter().enumerate() {
            if (p.free_b && x[k] <= 0.0) || (p.free_f && y[k] <= 0.0) {
                return f64::INFINITY;
            }
            let g = p.g(x[k], y[k]);
            if g > ranges[k].1 * (1.0 + 1e-15) {
                return f64::INFINITY;
            }
            total += phi.value(p, linearized_info(p, dp[k], g));
        }
        total
    };
    let gradient = |x: &[f64], y: &[f64]| -> (Vec<f64>, Vec<f64>) {
        let mut gx = vec![0.0; n];
        let mut gy = vec![0.0; n];
        for (k, p) in pipes.iter().enumerate() {
            let g = p.g(x[k], y[k]);
            if g < ranges[k].0 {
                continue;
            }
            let w = phi.slope(p, linearized_info(p, dp[k], g)) * dp[k] * dp[k];
            if p.free_b {
                gx[k] = w / (x[k] * x[k] * p.kb);
            }
            if p.free_f {
                gy[k] = w / (y[k] * y[k] * p.kf);
            }
        }
        (gx, gy)
    };
    let project = |v: &mut Vec<f64>, idx: &[usize]| {
        if idx.is_empty() {
            return;
        }
        let mut sub: Vec<f64> = idx.iter().map(|&k| v[k]).collect();
        project_simplex(&mut sub);
        idx.iter().zip(sub).for_each(|(&k, s)| v[k] = s);
    };

    let mut fval = objective(&x, &y);
    let mut step = 1e-3 / price_scale(problem, dp, phi);
    let mut quiet = 0;
    for _ in 0..100_000 {
        let (gx, gy) = gradient(&x, &y);
        let mut accepted = false;
        for _ in 0..80 {
            let mut xn: Vec<f64> = x.iter().zip(&gx).map(|(a, g)| a - step * g).collect();
            let mut yn: Vec<f64> = y.iter().zip(&gy).map(|(a, g)| a - step * g).collect();
            project(&mut xn, &free_b);
            project(&mut yn, &free_f);
            let decrease: f64 = gx
                .iter()
                .zip(x.iter().zip(&xn))
                .chain(gy.iter().zip(y.iter().zip(&yn)))
                .map(|(g, (a, b))| g * (a - b))
                .sum();
            let fn_ = objective(&xn, &yn);
            if fn_ <= fval - 1e-4 * decrease {
                let rel = (fval - fn_).abs() / fval.abs().max(1e-300);
                x = xn;
                y = yn;
                fval = fn_;
                step *= 2.0;
                accepted = true;
                quiet = if rel <= cfg.inner_tol { quiet + 1 } else { 0 };
                break;
            }
            step *= 0.5;
        }
        if !accepted || quiet >= 5 {
            break;
        }
    }

    let (gx, gy) = gradient(&x, &y);
    let mean = |g: &[f64], idx: &[usize]| -> f64 {
        let act: Vec<f64> = idx.iter().map(|&k| -g[k]).filter(|v| *v > 0.0).collect();
        if act.is_empty() {
            0.0
        } else {
            act.iter().sum::<f64>() / act.len() as f64
        }
    };
    let d = pipes
        .iter()
        .enumerate()
        .map(|(k, p)| linearized_info(p, dp[k], p.g(x[k], y[k])))
        .collect();
    Ok(Linearized {
        lambda_x: mean(&gx, &free_b),
        lambda_y: mean(&gy, &free_f),
        x,
        y,
        d,
    })
}

/// Cheapest shares that give every loop at least its target information.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct MinResource {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub sum_x: f64,
    pub sum_y: f64,
}

impl MinResource {
    pub fn feasible(&self) -> bool {
        self.sum_x <= 1.0 + 1e-12 && self.sum_y <= 1.0 + 1e-12
    }
}

/// Among all allocations reaching `targets` with at most the whole
/// bandwidth pool, the one using the least CPU. `Err` lists loops that
/// cannot reach their target at all.
pub(crate) fn min_resource(pipes: &[Pipe], targets: &[f64]) -> Result<MinResource, Vec<usize>> {
    let mut impossible = Vec::new();
    let mut vbar = Vec::with_capacity(pipes.len());
    for (k, (p, &t)) in pipes.iter().zip(targets).enumerate() {
        let v = 1.0 / t - p.c0;
        if t > p.cap * (1.0 + 1e-12) || v <= 0.0 || p.info_alone() < t * (1.0 - 1e-12) {
            impossible.push(k);
        }
        vbar.push(v);
    }
    if !impossible.is_empty() {
        return Err(impossible);
    }
    // With price μ on bandwidth and 1 on CPU, the bandwidth demand is
    // a + c/√μ in closed form.
    let mut a = 0.0;
    let mut c = 0.0;
    for (p, &v) in pipes.iter().zip(&vbar) {
        match (p.free_b, p.free_f) {
            (true, true) => {
                a += 1.0 / (p.kb * v);
                c += 1.0 / ((p.kb * p.kf).sqrt() * v);
            }
            (true, false) => a += 1.0 / (p.kb * v),
            _ => {}
        }
    }
    let sqrt_mu = if c > 0.0 && a < 1.0 {
        c / (1.0 - a)
    } else {
        f64::INFINITY
    };
    let mut x = vec![0.0; pipes.len()];
    let mut y = vec![0.0; pipes.len()];
    for (k, (p, &v)) in pipes.iter().zip(&vbar).enumerate() {
        match (p.free_b, p.free_f) {
            (true, true) => {
                x[k] = (1.0 / p.kb + 1.0 / (sqrt_mu * (p.kb * p.kf).sqrt())) / v;
                y[k] = (sqrt_mu / (p.kb * p.kf).sqrt() + 1.0 / p.kf) / v;
            }
            (true, false) => x[k] = 1.0 / (p.kb * v),
            (false, true) => y[k] = 1.0 / (p.kf * v),
            (false, false) => {}
        }
    }
    let sum_x = x.iter().sum();
    let sum_y = y.iter().sum();
    Ok(MinResource { x, y, sum_x, sum_y })
}

/// Largest common information level `t` such that every loop can get
/// `max(t, floor_k)`. Returns the level and the allocation reaching it.
pub(crate) fn max_min(problem: &PipeProblem) -> Result<(f64, MinResource), InterloopError> {
    let floors: Vec<f64> = problem.pipes.iter().map(|p| p.floor).collect();
    let base = min_resource(&problem.pipes, &floors).map_err(|loops| InterloopError::Infeasible {
        reason: "some loops cannot meet their information floor even with the whole hub".into(),
        loops,
    })?;
    if !base.feasible() {
        return Err(InterloopError::Infeasible {
            loops: (0..problem.len()).collect(),
            reason: format!(
                "the floors need {:.6} of the bandwidth pool and {:.6} of the CPU pool",
                base.sum_x, base.sum_y
            ),
        });
    }
    let targets = |t: f64| -> Vec<f64> { floors.iter().map(|f| f.max(t)).collect() };
    let check = |t: f64| -> Option<MinResource> {
        min_resource(&problem.pipes, &targets(t))
            .ok()
            .filter(MinResource::feasible)
    };
    let mut lo = floors.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut hi = problem.pipes.iter().map(Pipe::info_alone).fold(f64::INFINITY, f64::min);
    let mut best = base;
    if let Some(r) = check(hi) {
        return Ok((hi, r));
    }
    while hi - lo > 1e-13 * hi {
        let mid = 0.5 * (lo + hi);
        match check(mid) {
            Some(r) => {
                lo = mid;
                best = r;
            }
            None => hi = mid,
        }
    }
    Ok((lo, best))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::ControlSummary;

    fn pipe(kb: f64, kf: f64, l: f64) -> Pipe {
        Pipe {
            kb,
            kf,
            free_b: true,
            free_f: true,
            c0: 0.0,
            cap: f64::INFINITY,
            floor: l + 1e-6,
            summary: ControlSummary {
                n: 100,
                log2_det_a: l,
                entropy_power: 0.01,
                det_m_nth_root: 1.0,
                trace_sigma_s: 1.0,
            },
        }
    }

    fn problem(pipes: Vec<Pipe>) -> PipeProblem {
        PipeProblem {
            pipes,
            b_pool: 1.0,
            f_pool: 1.0,
            layout: super::super::pipes::Layout::Joint,
        }
    }

    #[test]
    fn simplex_projection() {
        let mut v = vec![0.5, 0.5];
        project_simplex(&mut v);
        assert_eq!(v, vec![0.5, 0.5]);
        let mut v = vec![2.0, 0.0, 0.0];
        project_simplex(&mut v);
        assert_eq!(v, vec![1.0, 0.0, 0.0]);
        let mut v = vec![0.4, 0.4, 0.4];
        project_simplex(&mut v);
        assert!(v.iter().all(|x| (x - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn loop_solve_matches_closed_form_for_information() {
        // ψ' = D̂² − s²/v² vanishes at v = s/D̂.
        let p = pipe(100.0, 100.0, 1.0);
        let (dp, s2) = (5.0, 0.09);
        let u = solve_loop(&p, dp, Phi::NegInfo, s2, (0.0, 0.3), 1e-14).unwrap();
        assert!((u - 0.3 / 5.0).abs() < 1e-14);
        // clamped at the floor side
        let u = solve_loop(&p, dp, Phi::NegInfo, 100.0, (0.0, 0.3), 1e-14).unwrap();
        assert_eq!(u, 0.3);
    }

    #[test]
    fn min_resource_single_loop_uses_whole_pools_at_capacity() {
        let p = pipe(100.0, 300.0, 1.0);
        let full = p.info_alone();
        let r = min_resource(&[p], &[full]).unwrap();
        assert!((r.sum_x - 1.0).abs() < 1e-12);
        assert!((r.sum_y - 1.0).abs() < 1e-12, "{}", r.sum_y);
        assert!(min_resource(&[p], &[full * 1.01]).is_err());
    }

    #[test]
    fn max_min_equalizes_identical_loops() {
        let pr = problem(vec![pipe(100.0, 300.0, 1.0); 3]);
        let (t, r) = max_min(&pr).unwrap();
        assert!((t - pr.pipes[0].info(1.0 / 3.0, 1.0 / 3.0)).abs() < 1e-10 * t);
        assert!(r.x.iter().all(|x| (x - 1.0 / 3.0).abs() < 1e-9));
    }

    #[test]
    fn dual_decomposition_and_projected_gradient_agree() {
        let pr = problem(vec![
            pipe(400.0, 900.0, 10.0),
            pipe(700.0, 500.0, 30.0),
            pipe(300.0, 2000.0, 5.0),
        ]);
        let dp = [60.0, 80.0, 40.0];
        let mut cfg = SolverConfig::default();
        let a = solve_linearized(&pr, &dp, Phi::Lqr, &cfg).unwrap();
        cfg.subproblem = SubproblemMethod::ProjectedGradient;
        let b = solve_linearized(&pr, &dp, Phi::Lqr, &cfg).unwrap();
        let obj = |s: &Linearized| -> f64 { pr.pipes.iter().zip(&s.d).map(|(p, &d)| Phi::Lqr.value(p, d)).sum() };
        assert!(obj(&a) <= obj(&b) * (1.0 + 1e-9), "{} {}", obj(&a), obj(&b));
        assert!((obj(&a) - obj(&b)).abs() <= 1e-6 * obj(&a));
        assert!((a.x.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((a.y.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
