//! Brute-force verifiers for the closed forms and the multi-loop solver.
//!
//! Grids are regular lattices: an axis with `P` points over `[lo, hi]`
//! holds `lo + (hi − lo)·i/P` for `i < P`, so doubling `P` refines the
//! lattice without dropping any point. Share simplices hold every
//! composition of `P` steps. Evaluation runs in parallel; reductions are
//! sequential in index order, so results are deterministic.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::Cost;
use crate::intraloop::{closed_loop_info, IntraAllocation, LoopRates};
use crate::model::{Budget, LoopSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("invalid grid: {0}")]
    BadGrid(String),
    #[error("exhaustive search over {loops} loops is too large; use at most 3 loops or verify a subset")]
    TooManyLoops { loops: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub points_per_axis: usize,
    pub axes: Vec<Axis>,
}

pub const MIN_POINTS: usize = 16;

impl GridSpec {
    /// UL bandwidth fraction, UL time fraction and DL time fraction.
    pub fn intraloop(points_per_axis: usize) -> Self {
        let axis = |name: &str| Axis {
            name: name.into(),
            lower: 0.0,
            upper: 1.0,
        };
        Self {
            points_per_axis,
            axes: vec![axis("b_ul_fraction"), axis("t_ul_fraction"), axis("t_dl_fraction")],
        }
    }

    /// Bandwidth and CPU share simplices.
    pub fn interloop(points_per_axis: usize) -> Self {
        let axis = |name: &str| Axis {
            name: name.into(),
            lower: 0.0,
            upper: 1.0,
        };
        Self {
            points_per_axis,
            axes: vec![axis("bandwidth_share"), axis("cpu_share")],
        }
    }

    pub fn validate(&self) -> Result<(), OracleError> {
        if self.points_per_axis < MIN_POINTS {
            return Err(OracleError::BadGrid(format!(
                "points_per_axis must be at least {MIN_POINTS}, got {}",
                self.points_per_axis
            )));
        }
        for a in &self.axes {
            if !(a.lower.is_finite() && a.upper.is_finite() && a.lower < a.upper) {
                return Err(OracleError::BadGrid(format!(
                    "axis {} needs finite bounds with lower < upper",
                    a.name
                )));
            }
        }
        Ok(())
    }

    fn coord(&self, axis: usize, i: usize) -> f64 {
        let a = &self.axes[axis];
        a.lower + (a.upper - a.lower) * i as f64 / self.points_per_axis as f64
    }

    fn step(&self, axis: usize) -> f64 {
        let a = &self.axes[axis];
        (a.upper - a.lower) / self.points_per_axis as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntraGridResult {
    pub best: IntraAllocation,
    pub d_sc3: f64,
    /// Lipschitz estimate times the cell diagonal.
    pub resolution_bound: f64,
    pub evaluated: usize,
    pub feasible: usize,
}

/// Exhaustive search over UL bandwidth fraction and UL/DL time fractions
/// at full CPU; points with `t_ul + t_dl > T` are skipped.
pub fn grid_intraloop(spec: &LoopSpec, budget: &Budget, grid: &GridSpec) -> Result<IntraGridResult, OracleError> {
    grid.validate()?;
    if grid.axes.len() != 3 {
        return Err(OracleError::BadGrid("intraloop grid needs exactly three axes".into()));
    }
    if grid.axes.iter().any(|a| a.lower < 0.0 || a.upper > 1.0) {
        return Err(OracleError::BadGrid(
            "intraloop axes are fractions within [0, 1]".into(),
        ));
    }
    let p = grid.points_per_axis;
    let b = budget.total_bandwidth_hz;
    let f = budget.total_cpu_hz;
    let t = spec.cycle_time_s;
    let eval = |i: usize, j: usize, l: usize| -> Option<IntraAllocation> {
        let (xb, xu, xd) = (grid.coord(0, i), grid.coord(1, j), grid.coord(2, l));
        let comp = 1.0 - xu - xd;
        (comp >= 0.0).then(|| IntraAllocation::evaluate(spec, xb * b, (1.0 - xb) * b, xu * t, comp * t, xd * t, f))
    };
    let values: Vec<Option<IntraAllocation>> = (0..p * p * p)
        .into_par_iter()
        .map(|idx| eval(idx / (p * p), (idx / p) % p, idx % p))
        .collect();

    let mut best: Option<IntraAllocation> = None;
    let mut feasible = 0;
    for a in values.iter().flatten() {
        feasible += 1;
        if best.is_none_or(|b| a.d_sc3 > b.d_sc3) {
            best = Some(*a);
        }
    }
    let best = best.ok_or_else(|| OracleError::BadGrid("no feasible grid point".into()))?;

    // Largest forward difference along each axis among feasible neighbours.
    let at = |i: usize, j: usize, l: usize| values[(i * p + j) * p + l].map(|a| a.d_sc3);
    let lipschitz: Vec<f64> = (0..3)
        .map(|axis| {
            let h = grid.step(axis);
            (0..p * p * p)
                .into_par_iter()
                .map(|idx| {
                    let mut c = [idx / (p * p), (idx / p) % p, idx % p];
                    let Some(v0) = at(c[0], c[1], c[2]) else { return 0.0 };
                    if c[axis] + 1 >= p {
                        return 0.0;
                    }
                    c[axis] += 1;
                    at(c[0], c[1], c[2]).map_or(0.0, |v1| (v1 - v0).abs() / h)
                })
                .reduce(|| 0.0, f64::max)
        })
        .collect();
    let lip = lipschitz.iter().map(|l| l * l).sum::<f64>().sqrt();
    let diag = (0..3).map(|a| grid.step(a).powi(2)).sum::<f64>().sqrt();
    Ok(IntraGridResult {
        d_sc3: best.d_sc3,
        best,
        resolution_bound: lip * diag,
        evaluated: p * p * p,
        feasible,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterGridResult {
    pub bandwidth_hz: Vec<f64>,
    pub cpu_hz: Vec<f64>,
    pub d_sc3: Vec<f64>,
    pub total_cost: Cost,
    /// Largest cost change to a neighbouring grid point of the best one,
    /// scaled by the number of free share coordinates.
    pub resolution_bound: f64,
    pub evaluated: usize,
}

/// Compositions of `steps` into `parts` nonnegative integers, in
/// lexicographic order.
fn compositions(steps: usize, parts: usize) -> Vec<Vec<usize>> {
    if parts == 1 {
        return vec![vec![steps]];
    }
    let mut out = Vec::new();
    for first in 0..=steps {
        for mut rest in compositions(steps - first, parts - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

fn total_cost(loops: &[LoopSpec], budget: &Budget, xs: &[usize], ys: &[usize], steps: f64) -> (Cost, Vec<f64>) {
    let mut total = Cost::Finite(0.0);
    let mut ds = Vec::with_capacity(loops.len());
    for (k, l) in loops.iter().enumerate() {
        let b = budget.total_bandwidth_hz * xs[k] as f64 / steps;
        let f = budget.total_cpu_hz * ys[k] as f64 / steps;
        let d = closed_loop_info(LoopRates::of(l), b, f, l.cycle_time_s);
        ds.push(d);
        total = total + l.control.lqr_lower_bound(d);
    }
    (total, ds)
}

/// Exhaustive search over bandwidth and CPU share compositions with
/// `points_per_axis` steps each, scoring each point by its exact total cost.
pub fn grid_interloop(loops: &[LoopSpec], budget: &Budget, grid: &GridSpec) -> Result<InterGridResult, OracleError> {
    grid.validate()?;
    if loops.len() > 3 {
        return Err(OracleError::TooManyLoops { loops: loops.len() });
    }
    if loops.is_empty() {
        return Err(OracleError::BadGrid("no loops".into()));
    }
    let steps = grid.points_per_axis;
    let comps = compositions(steps, loops.len());
    let n = comps.len();
    let s = steps as f64;
    let costs: Vec<Cost> = (0..n * n)
        .into_par_iter()
        .map(|idx| total_cost(loops, budget, &comps[idx / n], &comps[idx % n], s).0)
        .collect();
    let mut best = 0;
    for (i, c) in costs.iter().enumerate() {
        if *c < costs[best] {
            best = i;
        }
    }
    let (bx, by) = (&comps[best / n], &comps[best % n]);
    let (cost, d) = total_cost(loops, budget, bx, by, s);

    // Neighbours move one step of one resource between two loops.
    let mut spread: f64 = 0.0;
    let k = loops.len();
    for res in 0..2 {
        for from in 0..k {
            for to in 0..k {
                let base = if res == 0 { bx } else { by };
                if from == to || base[from] == 0 {
                    continue;
                }
                let mut moved = base.clone();
                moved[from] -= 1;
                moved[to] += 1;
                let (c, _) = if res == 0 {
                    total_cost(loops, budget, &moved, by, s)
                } else {
                    total_cost(loops, budget, bx, &moved, s)
                };
                if c.is_finite() && cost.is_finite() {
                    spread = spread.max((c.value() - cost.value()).abs());
                } else if c.is_finite() != cost.is_finite() {
                    spread = f64::INFINITY;
                }
            }
        }
    }
    let free = (2 * (k - 1)).max(1) as f64;
    Ok(InterGridResult {
        bandwidth_hz: bx.iter().map(|&i| budget.total_bandwidth_hz * i as f64 / s).collect(),
        cpu_hz: by.iter().map(|&i| budget.total_cpu_hz * i as f64 / s).collect(),
        d_sc3: d,
        total_cost: cost,
        resolution_bound: if k == 1 { 0.0 } else { spread * free.sqrt() },
        evaluated: n * n,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexityReport {
    pub samples: usize,
    pub violations: usize,
    /// Largest `f(mid) − (f(a) + f(b))/2` seen, relative to the endpoint scale.
    pub worst_excess: f64,
}

/// Counts midpoint-convexity violations of `f` over `samples` random pairs
/// drawn uniformly from the box `domain`, with relative slack `1e-12`.
pub fn convexity_probe<F>(f: F, domain: &[(f64, f64)], samples: usize, seed: u64) -> ConvexityReport
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let dim = domain.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..samples)
        .map(|_| {
            let mut draw = || -> Vec<f64> { domain.iter().map(|&(lo, hi)| rng.gen_range(lo..=hi)).collect() };
            (draw(), draw())
        })
        .collect();
    let excess: Vec<f64> = pairs
        .par_iter()
        .map(|(a, b)| {
            let mid: Vec<f64> = (0..dim).map(|i| 0.5 * (a[i] + b[i])).collect();
            let (fa, fb, fm) = (f(a), f(b), f(&mid));
            let scale = fa.abs().max(fb.abs()).max(f64::MIN_POSITIVE);
            (fm - 0.5 * (fa + fb)) / scale
        })
        .collect();
    let mut report = ConvexityReport {
        samples,
        violations: 0,
        worst_excess: f64::NEG_INFINITY,
    };
    for e in excess {
        if e > 1e-12 {
            report.violations += 1;
        }
        report.worst_excess = report.worst_excess.max(e);
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::ControlSummary;
    use crate::model::LinkSpec;

    fn spec(rho: f64, alpha: f64, ru: f64, rd: f64, l: f64) -> LoopSpec {
        LoopSpec {
            cycle_time_s: 0.01,
            extraction_ratio: rho,
            processing_difficulty: alpha,
            ul: LinkSpec::new(ru).unwrap(),
            dl: LinkSpec::new(rd).unwrap(),
            control: ControlSummary {
                n: 100,
                log2_det_a: l,
                entropy_power: 0.01,
                det_m_nth_root: 1.0,
                trace_sigma_s: 1.0,
            },
        }
    }

    #[test]
    fn grid_validation() {
        assert!(GridSpec::intraloop(8).validate().is_err());
        let mut g = GridSpec::intraloop(16);
        g.axes[1].upper = -1.0;
        assert!(g.validate().is_err());
        let loops = vec![spec(1.0, 1.0, 4.0, 4.0, 1.0); 4];
        let b = Budget::new(1e6, 1e9).unwrap();
        assert_eq!(
            grid_interloop(&loops, &b, &GridSpec::interloop(16)),
            Err(OracleError::TooManyLoops { loops: 4 })
        );
    }

    #[test]
    fn compositions_enumerate_simplex() {
        let c = compositions(4, 3);
        assert_eq!(c.len(), 15);
        assert!(c.iter().all(|v| v.iter().sum::<usize>() == 4));
        assert_eq!(c[0], vec![0, 0, 4]);
    }

    #[test]
    fn symmetric_intraloop_best_at_midpoint() {
        let s = spec(1.0, 1e-6, 6.0, 6.0, 1.0);
        let r = grid_intraloop(&s, &Budget::new(1e6, 1e12).unwrap(), &GridSpec::intraloop(32)).unwrap();
        // t_comp needs a cell of its own, so b_ul ties between the two middle cells
        assert!((r.best.b_ul / 1e6 - 0.5).abs() <= 1.0 / 32.0);
        assert!((r.best.t_ul - r.best.t_dl).abs() <= 0.01 / 32.0 + 1e-15);
    }

    #[test]
    fn symmetric_interloop_best_at_equal_shares() {
        let loops = vec![spec(0.5, 10.0, 8.0, 6.0, 10.0); 2];
        let r = grid_interloop(&loops, &Budget::new(2e4, 1e9).unwrap(), &GridSpec::interloop(32)).unwrap();
        assert_eq!(r.bandwidth_hz, vec![1e4, 1e4]);
        assert_eq!(r.cpu_hz, vec![0.5e9, 0.5e9]);
    }

    #[test]
    fn probe_controls() {
        let concave = convexity_probe(|x| -x[0] * x[0], &[(-1.0, 1.0)], 1000, 1);
        assert!(concave.violations > 900);
        let affine = convexity_probe(|x| 3.0 * x[0] - 2.0 * x[1] + 1.0, &[(-5.0, 5.0), (0.0, 1.0)], 1000, 2);
        assert_eq!(affine.violations, 0);
        let a = convexity_probe(|x| x[0].exp(), &[(0.0, 3.0)], 100, 7);
        let b = convexity_probe(|x| x[0].exp(), &[(0.0, 3.0)], 100, 7);
        assert_eq!(a, b);
    }
}
