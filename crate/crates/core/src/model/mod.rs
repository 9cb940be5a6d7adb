//! Domain types shared by every solver, link-budget helpers and scenario files.

mod link;
pub mod presets;
mod scenario;

pub use link::{
    link_bits, pathloss_db, received_snr_db, spectral_efficiency, ChannelGeometry, LogBase, DEFAULT_NOISE_DBM,
    DEFAULT_TX_POWER_DBM,
};
pub use scenario::{load_scenario, parse_matrix, parse_quantity, Scenario, ScenarioError};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::ControlSummary;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("{field} must be {requirement}, got {value}")]
    OutOfRange {
        field: &'static str,
        requirement: &'static str,
        value: f64,
    },
}

pub(crate) fn require(ok: bool, field: &'static str, requirement: &'static str, value: f64) -> Result<(), ModelError> {
    if ok {
        Ok(())
    } else {
        Err(ModelError::OutOfRange {
            field,
            requirement,
            value,
        })
    }
}

/// Spectral efficiency of one direction of a loop, in bits/s/Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkSpec {
    pub spectral_efficiency: f64,
}

impl LinkSpec {
    pub fn new(spectral_efficiency: f64) -> Result<Self, ModelError> {
        require(
            spectral_efficiency > 0.0 && spectral_efficiency.is_finite(),
            "spectral_efficiency",
            "positive and finite",
            spectral_efficiency,
        )?;
        Ok(Self { spectral_efficiency })
    }

    /// Link whose SNR follows from the path loss of `geometry`.
    pub fn from_geometry(geometry: &ChannelGeometry, tx_power_dbm: f64) -> Result<Self, ModelError> {
        let snr_db = received_snr_db(geometry, tx_power_dbm)?;
        Self::new(spectral_efficiency(10f64.powf(snr_db / 10.0))?)
    }
}

/// One SC³ loop: cycle time, extraction and processing parameters, both
/// links and the control constants of the plant it closes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoopSpec {
    /// Cycle time `T` in seconds.
    pub cycle_time_s: f64,
    /// Share `ρ` of uplink bits that carry task information.
    pub extraction_ratio: f64,
    /// CPU cycles per uplink bit, `α`.
    pub processing_difficulty: f64,
    pub ul: LinkSpec,
    pub dl: LinkSpec,
    pub control: ControlSummary,
}

impl LoopSpec {
    pub fn validate(&self) -> Result<(), ModelError> {
        require(
            self.cycle_time_s > 0.0 && self.cycle_time_s.is_finite(),
            "T",
            "positive",
            self.cycle_time_s,
        )?;
        require(
            self.extraction_ratio > 0.0 && self.extraction_ratio <= 1.0,
            "rho",
            "in (0, 1]",
            self.extraction_ratio,
        )?;
        require(
            self.processing_difficulty > 0.0 && self.processing_difficulty.is_finite(),
            "alpha",
            "positive",
            self.processing_difficulty,
        )?;
        LinkSpec::new(self.ul.spectral_efficiency)?;
        LinkSpec::new(self.dl.spectral_efficiency)?;
        Ok(())
    }

    pub fn r_ul(&self) -> f64 {
        self.ul.spectral_efficiency
    }

    pub fn r_dl(&self) -> f64 {
        self.dl.spectral_efficiency
    }
}

/// Shared totals of the hub.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    /// `B_max` in Hz.
    pub total_bandwidth_hz: f64,
    /// `f_max` in cycles/s.
    pub total_cpu_hz: f64,
}

impl Budget {
    pub fn new(total_bandwidth_hz: f64, total_cpu_hz: f64) -> Result<Self, ModelError> {
        let b = Self {
            total_bandwidth_hz,
            total_cpu_hz,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        require(
            self.total_bandwidth_hz > 0.0 && self.total_bandwidth_hz.is_finite(),
            "budget.bandwidth",
            "positive",
            self.total_bandwidth_hz,
        )?;
        require(
            self.total_cpu_hz > 0.0 && self.total_cpu_hz.is_finite(),
            "budget.cpu",
            "positive",
            self.total_cpu_hz,
        )
    }
}
