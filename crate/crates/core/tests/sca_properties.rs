use proptest::prelude::*;
use sc3_core::interloop::{kkt_residual, sca_optimize, solve_subproblem, SubproblemMethod};
use sc3_core::intraloop::solve_single_loop;
use sc3_core::model::presets::{random_distance_loops, reference_budget, reference_loops, summary};
use sc3_core::oracle::{grid_interloop, GridSpec};
use sc3_core::{Budget, LinkSpec, LoopSpec, Objective, SolverConfig};

fn spec(rho: f64, alpha: f64, ru: f64, rd: f64, l: f64) -> LoopSpec {
    LoopSpec {
        cycle_time_s: 0.01,
        extraction_ratio: rho,
        processing_difficulty: alpha,
        ul: LinkSpec::new(ru).unwrap(),
        dl: LinkSpec::new(rd).unwrap(),
        control: summary(l),
    }
}

fn proposed(loops: &[LoopSpec], budget: &Budget) -> sc3_core::SystemSolution {
    sca_optimize(loops, budget, &SolverConfig::default(), Objective::MinTotalLqr, None).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs())
}

#[test]
fn single_loop_takes_everything() {
    let l = reference_loops()[1];
    let budget = reference_budget();
    let s = proposed(&[l], &budget);
    let (alone, _) = solve_single_loop(&l, &budget);
    assert!(rel(s.loops[0].bandwidth_hz, budget.total_bandwidth_hz) < 1e-9);
    assert!(rel(s.loops[0].cpu_hz, budget.total_cpu_hz) < 1e-9);
    assert!(rel(s.loops[0].d_sc3, alone.d_sc3) < 1e-9);
}

#[test]
fn identical_loops_share_equally() {
    let loops = vec![reference_loops()[2]; 3];
    let s = proposed(&loops, &reference_budget());
    for l in &s.loops {
        assert!(rel(l.bandwidth_hz, s.loops[0].bandwidth_hz) < 1e-9);
        assert!(rel(l.cpu_hz, s.loops[0].cpu_hz) < 1e-9);
    }
}

#[test]
fn budgets_saturate_and_kkt_holds() {
    let loops = reference_loops();
    for b in [0.6e6, 1e6, 2e6] {
        let budget = Budget::new(b, 2e9).unwrap();
        let s = proposed(&loops, &budget);
        assert!(rel(s.total_bandwidth(), b) < 1e-9);
        assert!(rel(s.total_cpu(), 2e9) < 1e-9);
        let kkt = s.diagnostics.kkt_residual.unwrap();
        assert!(kkt <= 1e-6, "{kkt}");
        assert!((kkt_residual(&s, &loops, &budget, &SolverConfig::default()) - kkt).abs() < 1e-15);
    }
}

#[test]
fn perturbed_allocation_has_larger_residual() {
    let loops = reference_loops();
    let budget = reference_budget();
    let mut s = proposed(&loops, &budget);
    let before = s.diagnostics.kkt_residual.unwrap();
    s.loops[0].bandwidth_hz += 0.01 * budget.total_bandwidth_hz;
    let after = kkt_residual(&s, &loops, &budget, &SolverConfig::default());
    assert!(after > before, "{after} <= {before}");
}

#[test]
fn history_is_non_increasing_on_random_geometries() {
    for trial in 0..20 {
        let (loops, _) = random_distance_loops(7, trial);
        let s = proposed(&loops, &reference_budget());
        let h = &s.diagnostics.objective_history;
        assert!(h.windows(2).all(|w| w[1] <= w[0]), "{h:?}");
        assert!(s.diagnostics.converged);
    }
}

#[test]
fn scaling_time_against_rates_keeps_the_allocation() {
    let loops = reference_loops();
    let budget = reference_budget();
    let base = proposed(&loops, &budget);
    let c = 2.5;
    let scaled: Vec<LoopSpec> = loops
        .iter()
        .map(|l| LoopSpec {
            cycle_time_s: l.cycle_time_s * c,
            processing_difficulty: l.processing_difficulty * c,
            ul: LinkSpec::new(l.r_ul() / c).unwrap(),
            dl: LinkSpec::new(l.r_dl() / c).unwrap(),
            ..*l
        })
        .collect();
    let other = proposed(&scaled, &budget);
    for (a, b) in base.loops.iter().zip(&other.loops) {
        assert!(rel(a.bandwidth_hz, b.bandwidth_hz) < 1e-6);
        assert!(rel(a.cpu_hz, b.cpu_hz) < 1e-6);
    }
}

#[test]
fn subproblem_methods_agree() {
    let loops = reference_loops();
    let budget = reference_budget();
    let point: Vec<f64> = loops.iter().map(|l| l.control.log2_det_a + 60.0).collect();
    let floors: Vec<f64> = loops.iter().map(|l| l.control.log2_det_a).collect();
    let dual = solve_subproblem(
        &loops,
        &budget,
        &point,
        Objective::MinTotalLqr,
        &floors,
        &SolverConfig::default(),
    )
    .unwrap();
    let cfg = SolverConfig {
        subproblem: SubproblemMethod::ProjectedGradient,
        ..SolverConfig::default()
    };
    let pg = solve_subproblem(&loops, &budget, &point, Objective::MinTotalLqr, &floors, &cfg).unwrap();
    for k in 0..loops.len() {
        assert!(rel(dual.bandwidth_hz[k], pg.bandwidth_hz[k]) < 1e-4);
        assert!(rel(dual.cpu_hz[k], pg.cpu_hz[k]) < 1e-4);
    }
    assert!(dual.slackness_residual < 1e-9);
}

#[test]
fn previous_iterate_is_feasible_for_the_next_round() {
    // The round linearized at the information a solution delivers admits
    // that very solution, so it can only improve on it.
    let loops = reference_loops();
    let budget = reference_budget();
    let s = proposed(&loops, &budget);
    let d: Vec<f64> = s.loops.iter().map(|l| l.d_sc3).collect();
    let floors: Vec<f64> = loops.iter().map(|l| l.control.log2_det_a).collect();
    let next = solve_subproblem(
        &loops,
        &budget,
        &d,
        Objective::MinTotalLqr,
        &floors,
        &SolverConfig::default(),
    )
    .unwrap();
    let cost = |d: &[f64]| -> f64 {
        loops
            .iter()
            .zip(d)
            .map(|(l, &d)| l.control.lqr_lower_bound(d).value())
            .sum()
    };
    assert!(cost(&next.d) <= cost(&d) * (1.0 + 1e-9));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn two_loops_beat_the_share_grid(
        rho in prop::array::uniform2(0.05f64..1.0),
        alpha in prop::array::uniform2(1.0f64..50.0),
        ru in prop::array::uniform2(2.0f64..12.0),
        rd in prop::array::uniform2(2.0f64..12.0),
        l in prop::array::uniform2(5.0f64..40.0),
    ) {
        let loops = [
            spec(rho[0], alpha[0], ru[0], rd[0], l[0]),
            spec(rho[1], alpha[1], ru[1], rd[1], l[1]),
        ];
        let budget = Budget::new(1e5, 2e7).unwrap();
        let grid = grid_interloop(&loops, &budget, &GridSpec::interloop(32)).unwrap();
        prop_assume!(grid.total_cost.is_finite());
        let s = proposed(&loops, &budget);
        let total = s.total_cost().value();
        prop_assert!(total <= grid.total_cost.value() + grid.resolution_bound + 1e-9 * total,
            "sca {} grid {} bound {}", total, grid.total_cost.value(), grid.resolution_bound);
    }
}
