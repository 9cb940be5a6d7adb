//! Closed-form bandwidth split for a hub whose CPU is never the bottleneck.
//!
//! Dropping the computing term and the `−1` of the bound turns the problem
//! into `min Σ c_k 2^{−(2/n)(T_k b_k r_k − L_k)}` under `Σ b_k = B_max`,
//! whose stationarity gives `b_k = a_k (β_k − log2 λ)` with
//! `a_k = n/(2 T_k r_k)` and `β_k = e_k + log2(2 ln2 T_k r_k)`.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::intraloop::LoopRates;
use crate::model::LoopSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedForm {
    pub bandwidth_hz: Vec<f64>,
    pub log2_lambda: f64,
    /// Loops whose unconstrained share was negative and were set to zero.
    pub clamped: Vec<usize>,
    pub warnings: Vec<String>,
}

fn coefficients(l: &LoopSpec) -> (f64, f64) {
    let tr = l.cycle_time_s * LoopRates::of(l).r_comm;
    let a = l.control.n as f64 / (2.0 * tr);
    let beta = l.control.control_parameter() + (2.0 * LN_2 * tr).log2();
    (a, beta)
}

/// Dual-form evaluation with zero-clamping of negative shares, re-solved on
/// the remaining loops until every share is nonnegative.
pub fn closed_form_bandwidth(loops: &[LoopSpec], b_max: f64) -> ClosedForm {
    let coef: Vec<(f64, f64)> = loops.iter().map(coefficients).collect();
    let mut active = vec![true; loops.len()];
    let mut clamped = Vec::new();
    loop {
        let (sa, sab) = coef
            .iter()
            .zip(&active)
            .filter(|(_, &on)| on)
            .fold((0.0, 0.0), |(sa, sab), ((a, b), _)| (sa + a, sab + a * b));
        let log2_lambda = (sab - b_max) / sa;
        let b: Vec<f64> = coef
            .iter()
            .zip(&active)
            .map(|((a, beta), &on)| if on { a * (beta - log2_lambda) } else { 0.0 })
            .collect();
        let negative: Vec<usize> = (0..loops.len()).filter(|&k| active[k] && b[k] < 0.0).collect();
        if negative.is_empty() {
            let warnings = clamped
                .iter()
                .map(|k| format!("loop {k}: closed-form share was negative and is set to zero"))
                .collect::<Vec<_>>();
            for w in &warnings {
                log::warn!("{w}");
            }
            return ClosedForm {
                bandwidth_hz: b,
                log2_lambda,
                clamped,
                warnings,
            };
        }
        for k in negative {
            active[k] = false;
            clamped.push(k);
        }
        clamped.sort_unstable();
    }
}

/// The pairwise-difference form, evaluated term by term without clamping.
pub fn closed_form_bandwidth_literal(loops: &[LoopSpec], b_max: f64) -> Vec<f64> {
    let rt: Vec<f64> = loops.iter().map(|l| LoopRates::of(l).r_comm * l.cycle_time_s).collect();
    let a: Vec<f64> = loops
        .iter()
        .zip(&rt)
        .map(|(l, r)| l.control.n as f64 / (2.0 * r))
        .collect();
    let e: Vec<f64> = loops.iter().map(|l| l.control.control_parameter()).collect();
    let sum_a: f64 = a.iter().sum();
    (0..loops.len())
        .map(|k| {
            let num: f64 = (0..loops.len())
                .filter(|&i| i != k)
                .map(|i| a[i] * ((e[k] - e[i]) + (rt[k] / rt[i]).log2()))
                .sum::<f64>()
                + b_max;
            a[k] * num / sum_a
        })
        .collect()
}

/// Scaled KKT residual of a bandwidth vector for the CPU-adequate problem:
/// spread of the marginal values over loops with bandwidth, excess marginal
/// value of loops without, and the budget gap.
pub fn adequate_cpu_kkt_residual(loops: &[LoopSpec], bandwidth: &[f64], b_max: f64) -> f64 {
    let marginal: Vec<f64> = loops
        .iter()
        .zip(bandwidth)
        .map(|(l, &b)| {
            let c = &l.control;
            let k = 2.0 / c.n as f64;
            let tr = l.cycle_time_s * LoopRates::of(l).r_comm;
            c.scale() * k * LN_2 * tr * (-k * LN_2 * (tr * b - c.log2_det_a)).exp()
        })
        .collect();
    let active: Vec<f64> = marginal
        .iter()
        .zip(bandwidth)
        .filter(|(_, &b)| b > 0.0)
        .map(|(m, _)| *m)
        .collect();
    if active.is_empty() {
        return f64::INFINITY;
    }
    let lambda = active.iter().sum::<f64>() / active.len() as f64;
    let mut r = (bandwidth.iter().sum::<f64>() - b_max).abs() / b_max;
    for (m, &b) in marginal.iter().zip(bandwidth) {
        let v = if b > 0.0 {
            (m - lambda).abs() / lambda
        } else {
            ((m - lambda) / lambda).max(0.0).max(-b / b_max)
        };
        r = r.max(v);
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::ControlSummary;
    use crate::model::LinkSpec;

    fn spec(l: f64, r: f64) -> LoopSpec {
        LoopSpec {
            cycle_time_s: 0.01,
            extraction_ratio: 1.0,
            processing_difficulty: 1.0,
            ul: LinkSpec::new(4.0 * r).unwrap(),
            dl: LinkSpec::new(4.0 * r).unwrap(),
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
    fn symmetric_loops_split_evenly() {
        let loops = vec![spec(20.0, 0.1); 4];
        let cf = closed_form_bandwidth(&loops, 1e6);
        for b in &cf.bandwidth_hz {
            assert!((b - 2.5e5).abs() < 1e-6);
        }
        assert!(cf.clamped.is_empty());
    }

    #[test]
    fn orderings() {
        let cf = closed_form_bandwidth(&[spec(10.0, 0.1), spec(20.0, 0.1)], 1e6);
        assert!(cf.bandwidth_hz[1] > cf.bandwidth_hz[0]);
        let cf = closed_form_bandwidth(&[spec(20.0, 0.08), spec(20.0, 0.1)], 1e6);
        assert!(cf.bandwidth_hz[0] > cf.bandwidth_hz[1]);
    }

    #[test]
    fn literal_form_agrees_with_dual_form() {
        let loops = [spec(10.0, 0.08), spec(20.0, 0.1), spec(100.0, 0.12), spec(200.0, 0.14)];
        let a = closed_form_bandwidth(&loops, 2e6);
        let b = closed_form_bandwidth_literal(&loops, 2e6);
        assert!(a.clamped.is_empty());
        for (x, y) in a.bandwidth_hz.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-9 * 2e6, "{x} {y}");
        }
        assert!(adequate_cpu_kkt_residual(&loops, &a.bandwidth_hz, 2e6) < 1e-10);
    }

    #[test]
    fn negative_shares_are_clamped_and_redistributed() {
        let loops = [spec(1.0, 0.1), spec(400.0, 0.1)];
        let raw = closed_form_bandwidth_literal(&loops, 1e5);
        assert!(raw[0] < 0.0);
        let cf = closed_form_bandwidth(&loops, 1e5);
        assert_eq!(cf.clamped, vec![0]);
        assert_eq!(cf.bandwidth_hz[0], 0.0);
        assert!((cf.bandwidth_hz[1] - 1e5).abs() < 1e-6);
        assert_eq!(cf.warnings.len(), 1);
        assert!(adequate_cpu_kkt_residual(&loops, &cf.bandwidth_hz, 1e5) < 1e-10);
    }

    #[test]
    fn perturbation_raises_residual() {
        let loops = [spec(10.0, 0.1), spec(20.0, 0.12)];
        let mut b = closed_form_bandwidth(&loops, 1e6).bandwidth_hz;
        let r0 = adequate_cpu_kkt_residual(&loops, &b, 1e6);
        b[0] += 1e4;
        assert!(adequate_cpu_kkt_residual(&loops, &b, 1e6) > r0);
    }
}
