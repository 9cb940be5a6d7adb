use serde::{Deserialize, Serialize};

use super::{require, ModelError};

/// Receiver noise power used when a scenario does not set one.
pub const DEFAULT_NOISE_DBM: f64 = -107.0;
/// Unit (1 W) transmit power.
pub const DEFAULT_TX_POWER_DBM: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogBase {
    #[default]
    Log10,
    Log2,
}

impl LogBase {
    fn log(self, x: f64) -> f64 {
        match self {
            LogBase::Log10 => x.log10(),
            LogBase::Log2 => x.log2(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LogBase::Log10 => "log10",
            LogBase::Log2 => "log2",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelGeometry {
    pub distance_km: f64,
    pub carrier_freq_mhz: f64,
    pub noise_power_dbm: f64,
    pub pathloss_log_base: LogBase,
}

impl ChannelGeometry {
    pub fn validate(&self) -> Result<(), ModelError> {
        require(
            self.distance_km > 0.0 && self.distance_km.is_finite(),
            "d_km",
            "positive",
            self.distance_km,
        )?;
        require(
            self.carrier_freq_mhz > 0.0 && self.carrier_freq_mhz.is_finite(),
            "fc_mhz",
            "positive",
            self.carrier_freq_mhz,
        )?;
        require(
            self.noise_power_dbm.is_finite(),
            "noise_dbm",
            "finite",
            self.noise_power_dbm,
        )
    }
}

/// Free-space style path loss `32.4 + 20 log(d_km) + 20 log(fc_MHz)` in dB.
pub fn pathloss_db(geometry: &ChannelGeometry) -> Result<f64, ModelError> {
    geometry.validate()?;
    let base = geometry.pathloss_log_base;
    Ok(32.4 + 20.0 * base.log(geometry.distance_km) + 20.0 * base.log(geometry.carrier_freq_mhz))
}

/// Received SNR in dB for a transmitter at `tx_power_dbm` whose small-scale
/// fading is inverted by power control.
pub fn received_snr_db(geometry: &ChannelGeometry, tx_power_dbm: f64) -> Result<f64, ModelError> {
    Ok(tx_power_dbm - pathloss_db(geometry)? - geometry.noise_power_dbm)
}

/// Shannon spectral efficiency `log2(1 + snr)` in bits/s/Hz.
pub fn spectral_efficiency(snr_linear: f64) -> Result<f64, ModelError> {
    require(snr_linear >= 0.0, "snr", "nonnegative", snr_linear)?;
    Ok(snr_linear.ln_1p() / std::f64::consts::LN_2)
}

/// Bits carried by a link in one cycle.
pub fn link_bits(bandwidth_hz: f64, time_s: f64, se_bits_per_s_per_hz: f64) -> f64 {
    bandwidth_hz * time_s * se_bits_per_s_per_hz
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn geo(d: f64, fc: f64, base: LogBase) -> ChannelGeometry {
        ChannelGeometry {
            distance_km: d,
            carrier_freq_mhz: fc,
            noise_power_dbm: DEFAULT_NOISE_DBM,
            pathloss_log_base: base,
        }
    }

    #[test]
    fn pathloss_examples() {
        let v = pathloss_db(&geo(1.0, 2000.0, LogBase::Log10)).unwrap();
        assert_relative_eq!(v, 32.4 + 20.0 * 2000f64.log10(), max_relative = 1e-15);
        assert!((v - 98.42).abs() < 0.01);
        assert_eq!(pathloss_db(&geo(1.0, 1.0, LogBase::Log10)).unwrap(), 32.4);
        let v2 = pathloss_db(&geo(2.0, 2000.0, LogBase::Log2)).unwrap();
        assert!((v2 - 271.7).abs() < 0.05, "{v2}");
    }

    #[test]
    fn pathloss_rejects_nonpositive_inputs() {
        assert!(pathloss_db(&geo(0.0, 2000.0, LogBase::Log10)).is_err());
        assert!(pathloss_db(&geo(1.0, -1.0, LogBase::Log10)).is_err());
    }

    #[test]
    fn spectral_efficiency_examples() {
        assert_eq!(spectral_efficiency(0.0).unwrap(), 0.0);
        assert_eq!(spectral_efficiency(1.0).unwrap(), 1.0);
        assert!((spectral_efficiency(7177.0).unwrap() - 12.81).abs() < 0.005);
        assert!(spectral_efficiency(-0.1).is_err());
    }

    #[test]
    fn unit_power_snr_at_one_km() {
        // 30 dBm - 98.42 dB + 107 dBm = 38.58 dB, about 7.2e3 linear.
        let snr = received_snr_db(&geo(1.0, 2000.0, LogBase::Log10), DEFAULT_TX_POWER_DBM).unwrap();
        assert!((snr - 38.58).abs() < 0.01);
        let se = spectral_efficiency(10f64.powf(snr / 10.0)).unwrap();
        assert!((se - 12.81).abs() < 0.01);
    }

    #[test]
    fn link_bits_examples() {
        assert_eq!(link_bits(0.0, 0.3, 5.0), 0.0);
        assert_relative_eq!(link_bits(5e5, 1e-3, 10.0), 5000.0, max_relative = 1e-15);
        assert_eq!(link_bits(1.0, 1.0, 1.0), 1.0);
    }

    proptest! {
        #[test]
        fn pathloss_increasing(d in 0.01f64..100.0, fc in 1.0f64..1e5, k in 1.001f64..10.0, log2 in any::<bool>()) {
            let base = if log2 { LogBase::Log2 } else { LogBase::Log10 };
            let p = pathloss_db(&geo(d, fc, base)).unwrap();
            prop_assert!(pathloss_db(&geo(d * k, fc, base)).unwrap() > p);
            prop_assert!(pathloss_db(&geo(d, fc * k, base)).unwrap() > p);
        }

        #[test]
        fn spectral_efficiency_increasing_concave(x in 0.0f64..1e6, h in 1e-3f64..1e3) {
            let (a, b, c) = (
                spectral_efficiency(x).unwrap(),
                spectral_efficiency(x + h).unwrap(),
                spectral_efficiency(x + 2.0 * h).unwrap(),
            );
            prop_assert!(b > a);
            prop_assert!(b - a >= c - b - 1e-12 * c.abs());
        }

        #[test]
        fn link_bits_multilinear(b in 0.0f64..1e7, t in 0.0f64..1.0, r in 0.0f64..20.0) {
            let base = link_bits(b, t, r);
            let tol = 1e-12 * base.abs().max(1e-300);
            prop_assert!((link_bits(2.0 * b, t, r) - 2.0 * base).abs() <= tol);
            prop_assert!((link_bits(b, 2.0 * t, r) - 2.0 * base).abs() <= tol);
            prop_assert!((link_bits(b, t, 2.0 * r) - 2.0 * base).abs() <= tol);
        }
    }
}
