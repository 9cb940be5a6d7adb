//! Built-in scenarios used by the experiment harness and the test suites.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Budget, ChannelGeometry, LinkSpec, LogBase, LoopSpec, DEFAULT_NOISE_DBM, DEFAULT_TX_POWER_DBM};
use crate::control::ControlSummary;

/// Uplink spectral efficiencies of the four reference loops, bits/s/Hz.
pub const REFERENCE_R_UL: [f64; 4] = [10.5, 9.9, 9.5, 9.2];
/// Downlink spectral efficiencies of the four reference loops, bits/s/Hz.
pub const REFERENCE_R_DL: [f64; 4] = [12.2, 12.0, 11.8, 11.6];
pub const REFERENCE_ALPHA: [f64; 4] = [100.0, 200.0, 1000.0, 50.0];
pub const REFERENCE_LOG2_DET_A: [f64; 4] = [10.0, 20.0, 30.0, 40.0];
pub const REFERENCE_RHO: f64 = 0.01;
pub const REFERENCE_T_S: f64 = 0.01;
pub const REFERENCE_STATE_DIM: usize = 100;
pub const REFERENCE_BANDWIDTH_HZ: f64 = 1e6;
pub const REFERENCE_CPU_HZ: f64 = 2e9;
/// CPU multiplier that makes computing time negligible.
pub const ADEQUATE_CPU_FACTOR: f64 = 100.0;
pub const CARRIER_MHZ: f64 = 2000.0;

/// Control constants with unit-determinant weights, noise entropy power
/// 0.01 and unit noise trace.
pub fn summary(log2_det_a: f64) -> ControlSummary {
    ControlSummary {
        n: REFERENCE_STATE_DIM,
        log2_det_a,
        entropy_power: 0.01,
        det_m_nth_root: 1.0,
        trace_sigma_s: 1.0,
    }
}

fn build(rho: f64, alpha: f64, r_ul: f64, r_dl: f64, log2_det_a: f64) -> LoopSpec {
    LoopSpec {
        cycle_time_s: REFERENCE_T_S,
        extraction_ratio: rho,
        processing_difficulty: alpha,
        ul: LinkSpec::new(r_ul).expect("positive SE"),
        dl: LinkSpec::new(r_dl).expect("positive SE"),
        control: summary(log2_det_a),
    }
}

/// The four heterogeneous reference loops.
pub fn reference_loops() -> Vec<LoopSpec> {
    (0..4)
        .map(|k| {
            build(
                REFERENCE_RHO,
                REFERENCE_ALPHA[k],
                REFERENCE_R_UL[k],
                REFERENCE_R_DL[k],
                REFERENCE_LOG2_DET_A[k],
            )
        })
        .collect()
}

pub fn reference_budget() -> Budget {
    Budget::new(REFERENCE_BANDWIDTH_HZ, REFERENCE_CPU_HZ).expect("valid budget")
}

/// Reference loops at `f_max` scaled so that computing time is negligible.
pub fn adequate_cpu_budget(bandwidth_hz: f64) -> Budget {
    Budget::new(bandwidth_hz, REFERENCE_CPU_HZ * ADEQUATE_CPU_FACTOR).expect("valid budget")
}

/// Loops with `ρ = α = 1` and both SEs at `4·r_comm`, so the closed-loop SE
/// equals `r_comm` exactly.
pub fn comm_loop(r_comm: f64, log2_det_a: f64) -> LoopSpec {
    build(1.0, 1.0, 4.0 * r_comm, 4.0 * r_comm, log2_det_a)
}

/// Equal closed-loop SE, intrinsic entropy 10, 20, 100 and 200 bits.
pub fn entropy_spread_loops() -> Vec<LoopSpec> {
    [10.0, 20.0, 100.0, 200.0]
        .into_iter()
        .map(|l| comm_loop(0.1, l))
        .collect()
}

/// Equal intrinsic entropy, closed-loop SE 0.08 to 0.14.
pub fn efficiency_spread_loops() -> Vec<LoopSpec> {
    [0.08, 0.10, 0.12, 0.14]
        .into_iter()
        .map(|r| comm_loop(r, 20.0))
        .collect()
}

/// Budget of the allocation-ordering experiments.
pub fn spread_budget() -> Budget {
    adequate_cpu_budget(REFERENCE_BANDWIDTH_HZ)
}

fn link_at(distance_km: f64) -> LinkSpec {
    let geometry = ChannelGeometry {
        distance_km,
        carrier_freq_mhz: CARRIER_MHZ,
        noise_power_dbm: DEFAULT_NOISE_DBM,
        pathloss_log_base: LogBase::Log10,
    };
    LinkSpec::from_geometry(&geometry, DEFAULT_TX_POWER_DBM).expect("valid geometry")
}

/// Reference loops with UL and DL distances drawn uniformly from
/// `[0.5, 5]` km. Trial `i` of seed `s` always draws the same distances.
pub fn random_distance_loops(seed: u64, trial: u64) -> (Vec<LoopSpec>, Vec<(f64, f64)>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    let mut loops = reference_loops();
    let mut distances = Vec::with_capacity(loops.len());
    for l in &mut loops {
        let du = rng.gen_range(0.5..=5.0);
        let dd = rng.gen_range(0.5..=5.0);
        l.ul = link_at(du);
        l.dl = link_at(dd);
        distances.push((du, dd));
    }
    (loops, distances)
}
