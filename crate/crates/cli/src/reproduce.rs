//! Built-in experiments: each writes its plot data as CSV, checks its
//! qualitative claims and writes the check results as JSON.

use std::path::Path;

use anyhow::Result;
use clap::ValueEnum;
use rayon::prelude::*;
use sc3_core::interloop::{adequate_cpu_kkt_residual, baseline, closed_form_bandwidth, sca_optimize};
use sc3_core::intraloop::{bandwidth_for_cpu, closed_loop_info, LoopRates};
use sc3_core::model::presets::{
    adequate_cpu_budget, efficiency_spread_loops, entropy_spread_loops, random_distance_loops, reference_budget,
    reference_loops, spread_budget, REFERENCE_CPU_HZ,
};
use sc3_core::{Budget, LoopSpec, Objective, Scenario, Scheme, SolverConfig, SystemSolution};
use serde_json::{json, Value};

use crate::commands::CheckFailed;
use crate::output::{self, num};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Figure {
    /// UL/DL balance of single loops under three bandwidth splits.
    Fig4,
    /// Bandwidth needed to give up 1 MHz of CPU at various working points.
    Fig5,
    /// Outer-iteration counts over random link distances.
    Fig6,
    /// Total cost of every scheme against the bandwidth budget.
    Fig7,
    /// Closed-form bandwidth split against the solver with ample CPU.
    Fig8,
    /// Bandwidth shares under the goal- and rate-oriented schemes.
    Fig9,
    All,
}

impl Figure {
    fn name(self) -> &'static str {
        match self {
            Figure::Fig4 => "fig4",
            Figure::Fig5 => "fig5",
            Figure::Fig6 => "fig6",
            Figure::Fig7 => "fig7",
            Figure::Fig8 => "fig8",
            Figure::Fig9 => "fig9",
            Figure::All => "all",
        }
    }

    const EACH: [Figure; 6] = [
        Figure::Fig4,
        Figure::Fig5,
        Figure::Fig6,
        Figure::Fig7,
        Figure::Fig8,
        Figure::Fig9,
    ];
}

pub const DEFAULT_SEED: u64 = 42;
pub const TRIALS: u64 = 100;
/// Low end, high end and step count of the bandwidth sweeps.
const SWEEP: (f64, f64, usize) = (0.6e6, 2.0e6, 15);

pub struct Check {
    pub claim: &'static str,
    pub pass: bool,
    pub observed: String,
}

struct Outcome {
    csv_header: &'static str,
    rows: Vec<String>,
    checks: Vec<Check>,
    scenario: Scenario,
    extra: Vec<(&'static str, String)>,
}

fn scenario(loops: Vec<LoopSpec>, budget: Budget) -> Scenario {
    Scenario {
        loops,
        budget,
        solver: SolverConfig::default(),
        pathloss_log_base: Default::default(),
        warnings: Vec::new(),
    }
}

fn sweep_values() -> Vec<f64> {
    let (lo, hi, n) = SWEEP;
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn imbalance(sol: &SystemSolution, k: usize, rho: f64) -> f64 {
    let a = &sol.loops[k].allocation;
    let (u, d) = (rho * a.d_ul, a.d_dl);
    (u - d).abs() / u.max(d)
}

fn fig4() -> Result<Outcome> {
    let loops = reference_loops();
    let budget = Budget::new(5e5, 5e8)?;
    let cfg = SolverConfig::default();
    let schemes = [Scheme::Proposed, Scheme::Equal, Scheme::Proportional];
    let mut rows = Vec::new();
    let (mut balanced, mut unbalanced, mut cheapest, mut ordered) = (true, true, true, true);
    let mut worst_balance: f64 = 0.0;
    for (k, l) in loops.iter().enumerate() {
        let sols: Vec<SystemSolution> = schemes
            .iter()
            .map(|&s| baseline(s, std::slice::from_ref(l), &budget, &cfg))
            .collect::<Result<_, _>>()?;
        for (s, sol) in schemes.iter().zip(&sols) {
            let a = &sol.loops[0].allocation;
            rows.push(format!(
                "{k},{},{},{},{},{},{}",
                s.name(),
                num(l.extraction_ratio * a.d_ul),
                num(a.d_dl),
                num(a.d_sc3),
                num(sol.loops[0].cost.value()),
                num(imbalance(sol, 0, l.extraction_ratio))
            ));
        }
        let im: Vec<f64> = sols.iter().map(|s| imbalance(s, 0, l.extraction_ratio)).collect();
        let cost: Vec<f64> = sols.iter().map(|s| s.total_cost().value()).collect();
        worst_balance = worst_balance.max(im[0]);
        balanced &= im[0] <= 1e-9;
        unbalanced &= im[1] > 1e-3 && im[2] > 1e-3;
        cheapest &= cost[0] <= cost[1] && cost[0] <= cost[2];
        ordered &= (im[1] > im[2]) == (cost[1] >= cost[2]);
    }
    Ok(Outcome {
        csv_header: "loop_id,scheme,rho_d_ul_bits,d_dl_bits,d_sc3_bits,lqr_cost,imbalance",
        rows,
        checks: vec![
            Check {
                claim: "proposed split balances rho*D_ul and D_dl on every loop",
                pass: balanced,
                observed: format!("largest relative imbalance {}", num(worst_balance)),
            },
            Check {
                claim: "equal and proportional splits leave every loop unbalanced",
                pass: unbalanced,
                observed: "see imbalance column".into(),
            },
            Check {
                claim: "proposed split has the lowest cost on every loop",
                pass: cheapest,
                observed: "see lqr_cost column".into(),
            },
            Check {
                claim: "the more unbalanced fixed split costs more",
                pass: ordered,
                observed: "see imbalance and lqr_cost columns".into(),
            },
        ],
        scenario: scenario(loops, budget),
        extra: Vec::new(),
    })
}

fn fig5() -> Result<Outcome> {
    let delta_f = 1e6;
    let bs = [0.5e6, 1e6, 1.5e6, 2e6];
    let fs = [0.5e9, 1e9, 1.5e9, 2e9];
    let ratios = [1e4, 2.5e4, 5e4, 1e5];
    let at = |b: f64, f: f64, ratio: f64| -> Option<f64> {
        bandwidth_for_cpu(
            b,
            f,
            LoopRates {
                r_comm: ratio,
                r_comp: 1.0,
            },
            delta_f,
        )
        .ok()
    };
    let mut rows = Vec::new();
    let mut worst_invariance: f64 = 0.0;
    for &b in &bs {
        for &f in &fs {
            for &ratio in &ratios {
                let db = at(b, f, ratio);
                if let Some(db) = db {
                    let rates = LoopRates {
                        r_comm: ratio,
                        r_comp: 1.0,
                    };
                    let before = closed_loop_info(rates, b, f, 1.0);
                    let after = closed_loop_info(rates, b + db, f - delta_f, 1.0);
                    worst_invariance = worst_invariance.max((after - before).abs() / before);
                }
                rows.push(format!(
                    "{},{},{},{}",
                    num(b),
                    num(f),
                    num(ratio),
                    num(db.unwrap_or(f64::INFINITY))
                ));
            }
        }
    }
    let monotone_b = fs.iter().all(|&f| {
        ratios.iter().all(|&r| {
            let v: Vec<f64> = bs.iter().filter_map(|&b| at(b, f, r)).collect();
            v.windows(2).all(|w| w[1] > w[0])
        })
    });
    let monotone_ratio = bs.iter().all(|&b| {
        fs.iter().all(|&f| {
            let v: Vec<f64> = ratios.iter().filter_map(|&r| at(b, f, r)).collect();
            v.windows(2).all(|w| w[1] > w[0])
        })
    });
    let p1 = at(1e6, 2e9, 5e4).unwrap_or(f64::NAN);
    let p2 = at(2e6, 1e9, 1e5).unwrap_or(f64::NAN);
    Ok(Outcome {
        csv_header: "bandwidth_hz,cpu_hz,comm_to_comp_ratio,delta_b_hz",
        rows,
        checks: vec![
            Check {
                claim: "12.6 kHz buys 1 MHz of CPU at (1 MHz, 2 GHz, 5e4), within 2%",
                pass: (p1 - 12.6e3).abs() / 12.6e3 <= 0.02,
                observed: format!("{} Hz", num(p1)),
            },
            Check {
                claim: "500 kHz buys 1 MHz of CPU at (2 MHz, 1 GHz, 1e5), within 2%",
                pass: (p2 - 500e3).abs() / 500e3 <= 0.02,
                observed: format!("{} Hz", num(p2)),
            },
            Check {
                claim: "required bandwidth grows with the bandwidth already held",
                pass: monotone_b,
                observed: "see delta_b_hz column".into(),
            },
            Check {
                claim: "required bandwidth grows with the comm-to-comp efficiency ratio",
                pass: monotone_ratio,
                observed: "see delta_b_hz column".into(),
            },
            Check {
                claim: "closed-loop information is unchanged by every exchange, to 1e-9",
                pass: worst_invariance <= 1e-9,
                observed: format!("largest relative change {}", num(worst_invariance)),
            },
        ],
        scenario: scenario(reference_loops(), reference_budget()),
        extra: Vec::new(),
    })
}

/// Link distances of one random trial and its solution.
type Trial = (Vec<(f64, f64)>, Result<SystemSolution, String>);

fn fig6(seed: u64) -> Result<Outcome> {
    let cfg = SolverConfig::default();
    let budget = reference_budget();
    let trials: Vec<Trial> = (0..TRIALS)
        .into_par_iter()
        .map(|t| {
            let (loops, dist) = random_distance_loops(seed, t);
            let sol = sca_optimize(&loops, &budget, &cfg, Objective::MinTotalLqr, None).map_err(|e| e.to_string());
            (dist, sol)
        })
        .collect();
    let mut rows = Vec::new();
    let mut iterations = Vec::new();
    let (mut all_converged, mut monotone) = (true, true);
    for (t, (dist, sol)) in trials.iter().enumerate() {
        let d: Vec<String> = dist.iter().flat_map(|(u, d)| [num(*u), num(*d)]).collect();
        match sol {
            Ok(s) => {
                let h = &s.diagnostics.objective_history;
                monotone &= h.windows(2).all(|w| w[1] <= w[0]);
                all_converged &= s.diagnostics.converged;
                iterations.push(s.diagnostics.iterations);
                rows.push(format!(
                    "{t},{},{},true,{}",
                    d.join(","),
                    s.diagnostics.iterations,
                    num(s.total_cost().value())
                ));
            }
            Err(e) => {
                log::warn!("trial {t}: {e}");
                all_converged = false;
                rows.push(format!("{t},{},,false,", d.join(",")));
            }
        }
    }
    let mut sorted = iterations.clone();
    sorted.sort_unstable();
    let median = if sorted.is_empty() {
        f64::INFINITY
    } else if sorted.len() % 2 == 1 {
        sorted[sorted.len() / 2] as f64
    } else {
        0.5 * (sorted[sorted.len() / 2 - 1] + sorted[sorted.len() / 2]) as f64
    };
    let max_iter = sorted.last().copied().unwrap_or(0);
    let mut histogram = String::from("iterations,count\n");
    for it in 1..=max_iter {
        histogram.push_str(&format!("{it},{}\n", sorted.iter().filter(|&&v| v == it).count()));
    }
    Ok(Outcome {
        csv_header: "trial,d_ul_km_0,d_dl_km_0,d_ul_km_1,d_dl_km_1,d_ul_km_2,d_dl_km_2,d_ul_km_3,d_dl_km_3,iterations,converged,total_lqr_cost",
        rows,
        checks: vec![
            Check {
                claim: "every trial converges",
                pass: all_converged,
                observed: format!("{} of {TRIALS} converged", iterations.len()),
            },
            Check {
                claim: "objective history is non-increasing in every trial",
                pass: monotone,
                observed: String::new(),
            },
            Check {
                claim: "median outer-iteration count is at most 6",
                pass: median <= 6.0,
                observed: format!("median {}, max {max_iter}", num(median)),
            },
        ],
        scenario: scenario(reference_loops(), budget),
        extra: vec![("histogram", histogram)],
    })
}

fn cost_of(r: &Result<SystemSolution, sc3_core::interloop::InterloopError>) -> f64 {
    r.as_ref().map_or(f64::INFINITY, |s| s.total_cost().value())
}

fn fig7() -> Result<Outcome> {
    let loops = reference_loops();
    let cfg = SolverConfig::default();
    let values = sweep_values();
    let cells: Vec<(usize, Scheme)> = (0..values.len())
        .flat_map(|i| Scheme::ALL.into_iter().map(move |s| (i, s)))
        .collect();
    let results: Vec<_> = cells
        .par_iter()
        .map(|&(i, s)| {
            baseline(
                s,
                &loops,
                &Budget::new(values[i], REFERENCE_CPU_HZ).expect("valid budget"),
                &cfg,
            )
        })
        .collect();
    let cost = |i: usize, s: Scheme| -> f64 {
        let j = i * Scheme::ALL.len() + Scheme::ALL.iter().position(|&x| x == s).expect("listed scheme");
        cost_of(&results[j])
    };
    let mut rows = Vec::new();
    for ((i, s), r) in cells.iter().zip(&results) {
        let status = match r {
            Ok(sol) if sol.diagnostics.converged => "ok".to_string(),
            Ok(_) => "fallback".to_string(),
            Err(e) => e.to_string().replace(',', ";"),
        };
        rows.push(format!(
            "{},{},{},{status}",
            num(values[*i]),
            s.name(),
            num(cost(*i, *s))
        ));
    }

    let mut lowest = true;
    let mut lowest_margin = f64::INFINITY;
    for i in 0..values.len() {
        let p = cost(i, Scheme::Proposed);
        for s in Scheme::ALL {
            lowest &= p <= cost(i, s);
            if s != Scheme::Proposed {
                lowest_margin = lowest_margin.min(cost(i, s) - p);
            }
        }
    }
    let limited_edge = SWEEP.0 + (SWEEP.1 - SWEEP.0) / 3.0;
    // Every scheme that optimizes something; equal and proportional are fixed splits.
    let optimized: Vec<Scheme> = Scheme::ALL
        .into_iter()
        .filter(|s| !matches!(s, Scheme::Equal | Scheme::Proportional | Scheme::DlComp))
        .collect();
    let dl_worst = (0..values.len())
        .filter(|&i| values[i] <= limited_edge)
        .all(|i| optimized.iter().all(|&s| cost(i, Scheme::DlComp) >= cost(i, s)));
    let sum_worse = (0..values.len())
        .filter(|&i| values[i] >= 1e6 - 1e-6)
        .all(|i| cost(i, Scheme::MaxSum) >= cost(i, Scheme::MaxMin));
    let falling = (1..values.len()).all(|i| cost(i, Scheme::Proposed) <= cost(i - 1, Scheme::Proposed));
    Ok(Outcome {
        csv_header: "bandwidth_hz,scheme,total_lqr_cost,status",
        rows,
        checks: vec![
            Check {
                claim: "proposed scheme has the lowest total cost at every bandwidth",
                pass: lowest,
                observed: format!("smallest margin to another scheme {}", num(lowest_margin)),
            },
            Check {
                claim: "DL&computing is the worst optimized scheme in the bandwidth-limited third",
                pass: dl_worst,
                observed: format!("bandwidths up to {} Hz", num(limited_edge)),
            },
            Check {
                claim: "max-sum costs at least as much as max-min from 1 MHz on",
                pass: sum_worse,
                observed: String::new(),
            },
            Check {
                claim: "proposed cost does not rise with bandwidth",
                pass: falling,
                observed: String::new(),
            },
        ],
        scenario: scenario(loops, reference_budget()),
        extra: Vec::new(),
    })
}

fn fig8() -> Result<Outcome> {
    let loops = reference_loops();
    let cfg = SolverConfig::default();
    let values = sweep_values();
    let results: Vec<(f64, f64, f64)> = values
        .par_iter()
        .map(|&b| -> Result<(f64, f64, f64)> {
            let budget = adequate_cpu_budget(b);
            let p = baseline(Scheme::Proposed, &loops, &budget, &cfg)?.total_cost().value();
            let t = baseline(Scheme::Theorem2, &loops, &budget, &cfg)?.total_cost().value();
            let cf = closed_form_bandwidth(&loops, b);
            Ok((p, t, adequate_cpu_kkt_residual(&loops, &cf.bandwidth_hz, b)))
        })
        .collect::<Result<_>>()?;
    let rows = values
        .iter()
        .zip(&results)
        .map(|(b, (p, t, k))| format!("{},{},{},{},{}", num(*b), num(*p), num(*t), num(t / p - 1.0), num(*k)))
        .collect();
    let gap = |r: &(f64, f64, f64)| r.1 / r.0 - 1.0;
    let low = gap(&results[0]);
    let high = gap(results.last().expect("nonempty sweep"));
    let worst_kkt = results.iter().map(|r| r.2).fold(0.0, f64::max);
    Ok(Outcome {
        csv_header: "bandwidth_hz,proposed_lqr_cost,closed_form_lqr_cost,relative_gap,closed_form_kkt_residual",
        rows,
        checks: vec![
            Check {
                claim: "closed-form gap below 5% at the low end of the sweep",
                pass: low < 0.05,
                observed: format!("gap {}", num(low)),
            },
            Check {
                claim: "closed-form gap below 1% at the high end of the sweep",
                pass: high < 0.01,
                observed: format!("gap {}", num(high)),
            },
            Check {
                claim: "closed-form allocation meets its own KKT conditions to 1e-8",
                pass: worst_kkt <= 1e-8,
                observed: format!("largest residual {}", num(worst_kkt)),
            },
        ],
        scenario: scenario(loops, adequate_cpu_budget(SWEEP.0)),
        extra: Vec::new(),
    })
}

fn fig9() -> Result<Outcome> {
    let cfg = SolverConfig::default();
    let budget = spread_budget();
    let objectives = [
        (Scheme::Proposed, Objective::MinTotalLqr),
        (Scheme::MaxSum, Objective::MaxSumInfo),
        (Scheme::MaxMin, Objective::MaxMinInfo),
    ];
    let mut rows = Vec::new();
    let mut shares = Vec::new();
    for (panel, loops) in [
        ("entropy", entropy_spread_loops()),
        ("efficiency", efficiency_spread_loops()),
    ] {
        for (scheme, objective) in objectives {
            let s = sca_optimize(&loops, &budget, &cfg, objective, None)?.bandwidth_shares();
            for (k, x) in s.iter().enumerate() {
                rows.push(format!("{panel},{},{k},{}", scheme.name(), num(*x)));
            }
            shares.push(s);
        }
    }
    let increasing = |v: &[f64]| v.windows(2).all(|w| w[1] > w[0]);
    let decreasing = |v: &[f64]| v.windows(2).all(|w| w[1] < w[0]);
    let flat = |v: &[f64]| {
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().all(|x| (x - mean).abs() <= 1e-6 * mean)
    };
    Ok(Outcome {
        csv_header: "panel,scheme,loop_id,bandwidth_share",
        rows,
        checks: vec![
            Check {
                claim: "proposed shares increase with intrinsic entropy",
                pass: increasing(&shares[0]),
                observed: format!("{:?}", shares[0].iter().map(|x| num(*x)).collect::<Vec<_>>()),
            },
            Check {
                claim: "max-sum and max-min shares are equal across loops of equal SE, to 1e-6",
                pass: flat(&shares[1]) && flat(&shares[2]),
                observed: String::new(),
            },
            Check {
                claim: "proposed and max-min shares decrease with closed-loop SE",
                pass: decreasing(&shares[3]) && decreasing(&shares[5]),
                observed: String::new(),
            },
        ],
        scenario: scenario(entropy_spread_loops(), budget),
        extra: Vec::new(),
    })
}

fn run_one(figure: Figure, seed: u64) -> Result<Outcome> {
    match figure {
        Figure::Fig4 => fig4(),
        Figure::Fig5 => fig5(),
        Figure::Fig6 => fig6(seed),
        Figure::Fig7 => fig7(),
        Figure::Fig8 => fig8(),
        Figure::Fig9 => fig9(),
        Figure::All => unreachable!("expanded by the caller"),
    }
}

/// `reproduce`: writes `<fig>.csv`, any auxiliary tables and
/// `<fig>.checks.json` into `out_dir`.
pub fn reproduce(figure: Figure, out_dir: &Path, seed: u64) -> Result<()> {
    let figures: Vec<Figure> = if figure == Figure::All {
        Figure::EACH.to_vec()
    } else {
        vec![figure]
    };
    let mut failed = Vec::new();
    for f in figures {
        let o = run_one(f, seed)?;
        let name = f.name();
        let digest = output::digest(&o.scenario);
        let header = output::provenance_header(&digest, &o.scenario.solver);
        let seed_line = if f == Figure::Fig6 {
            format!("# seed: {seed}\n")
        } else {
            String::new()
        };
        let mut csv = format!("{header}{seed_line}{}\n", o.csv_header);
        for r in &o.rows {
            csv.push_str(r);
            csv.push('\n');
        }
        output::write(&out_dir.join(format!("{name}.csv")), &csv)?;
        for (suffix, table) in &o.extra {
            output::write(
                &out_dir.join(format!("{name}_{suffix}.csv")),
                &format!("{header}{seed_line}{table}"),
            )?;
        }
        let checks: Vec<Value> = o
            .checks
            .iter()
            .map(|c| json!({"claim": c.claim, "pass": c.pass, "observed": c.observed}))
            .collect();
        let mut body = json!({"figure": name, "checks": checks});
        if f == Figure::Fig6 {
            body["seed"] = json!(seed);
            body["trials"] = json!(TRIALS);
        }
        output::write_json(
            &out_dir.join(format!("{name}.checks.json")),
            &output::record(&digest, &o.scenario.solver, body),
        )?;
        for c in &o.checks {
            let mark = if c.pass { "PASS" } else { "FAIL" };
            if c.observed.is_empty() {
                println!("{name} {mark} {}", c.claim);
            } else {
                println!("{name} {mark} {} ({})", c.claim, c.observed);
            }
            if !c.pass {
                failed.push(format!("{name}: {}", c.claim));
            }
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CheckFailed(failed).into())
    }
}
