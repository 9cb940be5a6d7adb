//! Single-loop closed forms: UL/DL bandwidth and time split, the loop's
//! effective rates, and the bandwidth/CPU exchange curve.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::Cost;
use crate::model::{Budget, LoopSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntraError {
    #[error("infeasible exchange: giving up {delta_f} cycles/s cannot be compensated (denominator {denominator})")]
    InfeasibleExchange { delta_f: f64, denominator: f64 },
    #[error("delta_f must lie in (0, f), got {delta_f} with f = {f}")]
    BadExchange { delta_f: f64, f: f64 },
}

/// One loop's internal split of its bandwidth, cycle time and CPU.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct IntraAllocation {
    pub b_ul: f64,
    pub b_dl: f64,
    pub t_ul: f64,
    pub t_comp: f64,
    pub t_dl: f64,
    pub f: f64,
    pub d_ul: f64,
    pub d_dl: f64,
    pub d_sc3: f64,
}

impl IntraAllocation {
    /// Evaluates an arbitrary split. The closed-loop information is capped
    /// by what the CPU can process within `t_comp`.
    #[allow(clippy::too_many_arguments)]
    pub fn evaluate(spec: &LoopSpec, b_ul: f64, b_dl: f64, t_ul: f64, t_comp: f64, t_dl: f64, f: f64) -> Self {
        let rho = spec.extraction_ratio;
        let d_ul = b_ul * t_ul * spec.r_ul();
        let d_dl = b_dl * t_dl * spec.r_dl();
        let processed = f * t_comp / spec.processing_difficulty;
        Self {
            b_ul,
            b_dl,
            t_ul,
            t_comp,
            t_dl,
            f,
            d_ul,
            d_dl,
            d_sc3: (rho * d_ul.min(processed)).min(d_dl),
        }
    }

    pub fn bandwidth(&self) -> f64 {
        self.b_ul + self.b_dl
    }

    pub fn total_time(&self) -> f64 {
        self.t_ul + self.t_comp + self.t_dl
    }
}

/// Closed-loop SE and computing efficiency of a loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoopRates {
    /// bits/s/Hz
    pub r_comm: f64,
    /// bits/cycle
    pub r_comp: f64,
}

impl LoopRates {
    pub fn of(spec: &LoopSpec) -> Self {
        loop_rates(
            spec.extraction_ratio,
            spec.processing_difficulty,
            spec.r_ul(),
            spec.r_dl(),
        )
    }
}

pub fn optimal_bandwidth_split(rho: f64, r_ul: f64, r_dl: f64, b_total: f64) -> (f64, f64) {
    let (su, sd) = ((rho * r_ul).sqrt(), r_dl.sqrt());
    let b_ul = sd * b_total / (su + sd);
    (b_ul, b_total - b_ul)
}

/// Time split balancing task-level UL and DL bits; returns `(t_ul, t_comp, t_dl)`.
#[allow(clippy::too_many_arguments)]
pub fn optimal_time_split(
    rho: f64,
    alpha: f64,
    r_ul: f64,
    r_dl: f64,
    b_ul: f64,
    b_dl: f64,
    f: f64,
    t: f64,
) -> (f64, f64, f64) {
    let ul = 1.0 / (rho * b_ul * r_ul);
    let comp = alpha / (rho * f);
    let dl = 1.0 / (b_dl * r_dl);
    let den = ul + comp + dl;
    let t_ul = ul / den * t;
    let t_dl = dl / den * t;
    (t_ul, t - t_ul - t_dl, t_dl)
}

pub fn loop_rates(rho: f64, alpha: f64, r_ul: f64, r_dl: f64) -> LoopRates {
    let s = (rho * r_ul).sqrt() + r_dl.sqrt();
    LoopRates {
        r_comm: rho * r_ul * r_dl / (s * s),
        r_comp: rho / alpha,
    }
}

/// Bits per cycle of a loop holding `b` Hz and `f` cycles/s for `t` seconds.
pub fn closed_loop_info(rates: LoopRates, b: f64, f: f64, t: f64) -> f64 {
    if b <= 0.0 || f <= 0.0 || t <= 0.0 {
        return 0.0;
    }
    t / (1.0 / (b * rates.r_comm) + 1.0 / (f * rates.r_comp))
}

/// Weak-link approximation of the closed-loop SE, for reporting only.
pub fn weak_link_se(rho: f64, r_ul: f64, r_dl: f64, dominance: f64) -> f64 {
    let (u, d) = (rho * r_ul, r_dl);
    if u.max(d) > dominance * u.min(d) {
        u.min(d)
    } else {
        u / 4.0
    }
}

/// Bandwidth that compensates for taking `delta_f` cycles/s away from a
/// loop working at `(b, f)`.
pub fn bandwidth_for_cpu(b: f64, f: f64, rates: LoopRates, delta_f: f64) -> Result<f64, IntraError> {
    if !(delta_f > 0.0 && delta_f < f) {
        return Err(IntraError::BadExchange { delta_f, f });
    }
    let den = rates.r_comp / rates.r_comm * (f * f / (delta_f * b) - f / b) - 1.0;
    if !(den > 0.0 && den.is_finite()) {
        return Err(IntraError::InfeasibleExchange {
            delta_f,
            denominator: den,
        });
    }
    Ok(b / den)
}

/// Optimal split of a loop that owns `b` Hz and `f` cycles/s. Degenerate
/// resources give the all-zero allocation.
pub fn allocate(spec: &LoopSpec, b: f64, f: f64) -> IntraAllocation {
    let t = spec.cycle_time_s;
    if !(b > 0.0 && f > 0.0 && t > 0.0) {
        return IntraAllocation {
            f: f.max(0.0),
            ..IntraAllocation::default()
        };
    }
    let rho = spec.extraction_ratio;
    let alpha = spec.processing_difficulty;
    let (b_ul, b_dl) = optimal_bandwidth_split(rho, spec.r_ul(), spec.r_dl(), b);
    let (t_ul, t_comp, t_dl) = optimal_time_split(rho, alpha, spec.r_ul(), spec.r_dl(), b_ul, b_dl, f, t);
    let d_ul = b_ul * t_ul * spec.r_ul();
    let d_dl = b_dl * t_dl * spec.r_dl();
    IntraAllocation {
        b_ul,
        b_dl,
        t_ul,
        t_comp,
        t_dl,
        f,
        d_ul,
        d_dl,
        d_sc3: (rho * d_ul).min(d_dl),
    }
}

/// A loop alone on the hub: full CPU, full bandwidth, optimal splits.
pub fn solve_single_loop(spec: &LoopSpec, budget: &Budget) -> (IntraAllocation, Cost) {
    let alloc = allocate(spec, budget.total_bandwidth_hz, budget.total_cpu_hz);
    let cost = spec.control.lqr_lower_bound(alloc.d_sc3);
    (alloc, cost)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::ControlSummary;
    use crate::model::LinkSpec;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn spec(rho: f64, alpha: f64, ru: f64, rd: f64, t: f64, l: f64) -> LoopSpec {
        LoopSpec {
            cycle_time_s: t,
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
    fn bandwidth_split_examples() {
        let (u, d) = optimal_bandwidth_split(1.0, 5.0, 5.0, 2.0);
        assert_relative_eq!(u, 1.0, max_relative = 1e-15);
        assert_relative_eq!(d, 1.0, max_relative = 1e-15);
        let (u, d) = optimal_bandwidth_split(0.01, 10.5, 12.2, 5e5);
        assert!((u / 5e5 - 0.915).abs() < 1e-3, "{}", u / 5e5);
        assert!((u - 457.6e3).abs() < 100.0);
        assert_eq!(u + d, 5e5);
        let (u, _) = optimal_bandwidth_split(1e-12, 10.0, 10.0, 1.0);
        assert!(u > 1.0 - 1e-6);
    }

    #[test]
    fn time_split_examples() {
        let (u, c, d) = optimal_time_split(1.0, 1e-12, 4.0, 4.0, 1.0, 1.0, 1.0, 1.0);
        assert_relative_eq!(u, 0.5, max_relative = 1e-9);
        assert_relative_eq!(d, 0.5, max_relative = 1e-9);
        assert!(c < 1e-9);

        let (bu, bd) = optimal_bandwidth_split(0.01, 10.5, 12.2, 5e5);
        let (u, c, d) = optimal_time_split(0.01, 100.0, 10.5, 12.2, bu, bd, 0.5e9, 0.01);
        assert_relative_eq!(0.01 * bu * u * 10.5, bd * d * 12.2, max_relative = 1e-12);
        assert_relative_eq!(u + c + d, 0.01, max_relative = 1e-12);

        let (u, c, d) = optimal_time_split(0.5, 1.0, 3.0, 7.0, 2.0, 3.0, 1e30, 1.0);
        assert!(c < 1e-20);
        assert_relative_eq!(u / d, (3.0 * 7.0) / (0.5 * 2.0 * 3.0), max_relative = 1e-12);
    }

    #[test]
    fn rates_examples() {
        let r = loop_rates(0.01, 100.0, 10.5, 12.2);
        assert!((r.r_comm - 0.0879).abs() < 5e-5, "{}", r.r_comm);
        assert_relative_eq!(r.r_comp, 1e-4, max_relative = 1e-15);
        // rho r_ul = r_dl gives a quarter of either
        let r = loop_rates(0.5, 1.0, 8.0, 4.0);
        assert_relative_eq!(r.r_comm, 1.0, max_relative = 1e-15);
    }

    #[test]
    fn closed_loop_info_examples() {
        let r = loop_rates(0.01, 100.0, 10.5, 12.2);
        let d = closed_loop_info(r, 5e5, 5e8, 0.01);
        assert!((d - 233.9).abs() < 0.2, "{d}");
        let d = closed_loop_info(r, 5e5, 1e300, 0.01);
        assert_relative_eq!(d, 0.01 * 5e5 * r.r_comm, max_relative = 1e-12);
        let d = closed_loop_info(r, 1e300, 5e8, 0.01);
        assert_relative_eq!(d, 0.01 * 5e8 * r.r_comp, max_relative = 1e-12);
    }

    #[test]
    fn weak_link_examples() {
        assert_eq!(weak_link_se(0.01, 10.0, 12.0, 100.0), 0.1);
        assert_eq!(weak_link_se(1.0, 8.0, 8.0, 100.0), 2.0);
    }

    #[test]
    fn exchange_points() {
        // r_comm / r_comp = 5e4
        let r = LoopRates {
            r_comm: 5e4,
            r_comp: 1.0,
        };
        let db = bandwidth_for_cpu(1e6, 2e9, r, 1e6).unwrap();
        assert!((db - 12.6e3).abs() / 12.6e3 < 0.02, "{db}");
        let r = LoopRates {
            r_comm: 1e5,
            r_comp: 1.0,
        };
        let db = bandwidth_for_cpu(2e6, 1e9, r, 1e6).unwrap();
        assert!((db - 500e3).abs() / 500e3 < 0.02, "{db}");
    }

    #[test]
    fn exchange_rejects_bad_input() {
        let r = LoopRates {
            r_comm: 1.0,
            r_comp: 1.0,
        };
        assert!(matches!(
            bandwidth_for_cpu(1.0, 1.0, r, 2.0),
            Err(IntraError::BadExchange { .. })
        ));
        // Giving up nearly everything: no bandwidth compensates.
        let r = LoopRates {
            r_comm: 1.0,
            r_comp: 1e-9,
        };
        assert!(matches!(
            bandwidth_for_cpu(1.0, 1.0, r, 0.999),
            Err(IntraError::InfeasibleExchange { .. })
        ));
    }

    #[test]
    fn single_loop_examples() {
        let s = spec(0.01, 100.0, 10.5, 12.2, 0.01, 10.0);
        let (a, cost) = solve_single_loop(&s, &Budget::new(5e5, 5e8).unwrap());
        assert!((a.d_sc3 - 233.9).abs() < 0.2);
        assert!(cost.is_finite());
        assert_relative_eq!(a.bandwidth(), 5e5, max_relative = 1e-15);
        let s_hard = spec(0.01, 100.0, 10.5, 12.2, 0.01, 250.0);
        assert!(!solve_single_loop(&s_hard, &Budget::new(5e5, 5e8).unwrap())
            .1
            .is_finite());

        let a = allocate(&s, 0.0, 5e8);
        assert_eq!(a.d_sc3, 0.0);
        assert!(!s.control.lqr_lower_bound(a.d_sc3).is_finite());

        let sym = spec(1.0, 1e-9, 6.0, 6.0, 1.0, 1.0);
        let (a, _) = solve_single_loop(&sym, &Budget::new(1.0, 1e9).unwrap());
        assert_relative_eq!(a.b_ul, a.b_dl, max_relative = 1e-12);
        assert_relative_eq!(a.d_sc3, 6.0 / 4.0, max_relative = 1e-6);
    }

    fn arb_spec() -> impl Strategy<Value = LoopSpec> {
        (1e-3f64..=1.0, 1e-2f64..1e3, 0.5f64..15.0, 0.5f64..15.0, 1e-3f64..0.1)
            .prop_map(|(rho, a, ru, rd, t)| spec(rho, a, ru, rd, t, 1.0))
    }

    proptest! {
        #[test]
        fn balance_and_exhaustion(s in arb_spec(), b in 1e3f64..1e8, f in 1e6f64..1e11) {
            let a = allocate(&s, b, f);
            let rho_ul = s.extraction_ratio * a.d_ul;
            prop_assert!((rho_ul - a.d_dl).abs() <= 1e-12 * a.d_dl.max(rho_ul));
            prop_assert!((a.bandwidth() - b).abs() <= 1e-12 * b);
            prop_assert!((a.total_time() - s.cycle_time_s).abs() <= 1e-12 * s.cycle_time_s);
            let d = closed_loop_info(LoopRates::of(&s), b, f, s.cycle_time_s);
            prop_assert!((a.d_sc3 - d).abs() <= 1e-12 * d);
            // computing never binds below the balanced value
            let processed = f * a.t_comp / s.processing_difficulty;
            prop_assert!(s.extraction_ratio * processed >= a.d_sc3 * (1.0 - 1e-12));
        }

        #[test]
        fn monotone_in_resources(s in arb_spec(), b in 1e3f64..1e8, f in 1e6f64..1e11, k in 1.0f64..3.0) {
            let r = LoopRates::of(&s);
            let t = s.cycle_time_s;
            let d = closed_loop_info(r, b, f, t);
            prop_assert!(closed_loop_info(r, b * k, f, t) >= d);
            prop_assert!(closed_loop_info(r, b, f * k, t) >= d);
            prop_assert!(closed_loop_info(r, b, f, t * k) >= d);
            let up = |rho: f64, a: f64, ru: f64, rd: f64| closed_loop_info(loop_rates(rho, a, ru, rd), b, f, t);
            let (rho, a, ru, rd) = (s.extraction_ratio, s.processing_difficulty, s.r_ul(), s.r_dl());
            prop_assert!(up((rho * k).min(1.0), a, ru, rd) >= d * (1.0 - 1e-12));
            prop_assert!(up(rho, a * k, ru, rd) <= d * (1.0 + 1e-12));
            prop_assert!(up(rho, a, ru * k, rd) >= d * (1.0 - 1e-12));
            prop_assert!(up(rho, a, ru, rd * k) >= d * (1.0 - 1e-12));
        }

        #[test]
        fn r_comm_below_weak_link(rho in 1e-3f64..=1.0, ru in 0.1f64..20.0, rd in 0.1f64..20.0) {
            let r = loop_rates(rho, 1.0, ru, rd);
            prop_assert!(r.r_comm <= (rho * ru).min(rd));
            prop_assert!(r.r_comm >= (rho * ru).min(rd) / 4.0 * (1.0 - 1e-12));
        }

        #[test]
        fn exchange_preserves_information(
            b in 1e4f64..1e7, f in 1e8f64..1e10, rc in 1e-3f64..10.0, rp in 1e-6f64..1e-2, frac in 1e-4f64..0.5
        ) {
            let r = LoopRates { r_comm: rc, r_comp: rp };
            let df = f * frac;
            if let Ok(db) = bandwidth_for_cpu(b, f, r, df) {
                let before = closed_loop_info(r, b, f, 1.0);
                let after = closed_loop_info(r, b + db, f - df, 1.0);
                prop_assert!((before - after).abs() <= 1e-9 * before);
            }
        }
    }
}
