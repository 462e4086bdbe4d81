//! Scenario, sounding and recovery parameters.
//!
//! All structs deserialize from TOML with unknown keys rejected; key names
//! carry their unit where one applies.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical parameters of the UE→IRS link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// IRS UPA element count along the width (azimuth) axis.
    pub irs_width: usize,
    /// IRS UPA element count along the height (elevation) axis.
    pub irs_height: usize,
    #[serde(default = "one")]
    pub ue_width: usize,
    #[serde(default = "one")]
    pub ue_height: usize,
    /// Number of UE pilot streams (columns of the per-slot precoder).
    #[serde(default = "one")]
    pub ue_streams: usize,
    /// Number of OFDM subcarriers `K`.
    pub subcarriers: usize,
    /// Number of multipath components `L`.
    pub paths: usize,
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    /// Cyclic-prefix length in samples; also the number of stored delay taps.
    pub cyclic_prefix: usize,
    #[serde(default = "half")]
    pub element_spacing_wavelengths: f64,
    #[serde(default = "default_rolloff")]
    pub pulse_rolloff: f64,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> usize {
    1
}

fn half() -> f64 {
    0.5
}

fn default_rolloff() -> f64 {
    0.8
}

impl ScenarioConfig {
    /// 8×8 IRS, K = 64, L_CP = 16. Small enough for CI.
    pub fn desk() -> Self {
        Self {
            irs_width: 8,
            irs_height: 8,
            ue_width: 1,
            ue_height: 1,
            ue_streams: 1,
            subcarriers: 64,
            paths: 6,
            carrier_hz: 28e9,
            bandwidth_hz: 100e6,
            cyclic_prefix: 16,
            element_spacing_wavelengths: 0.5,
            pulse_rolloff: 0.8,
            seed: 0,
        }
    }

    /// 16×16 IRS, K = 256, L_CP = 32.
    pub fn paper() -> Self {
        Self {
            irs_width: 16,
            irs_height: 16,
            subcarriers: 256,
            cyclic_prefix: 32,
            ..Self::desk()
        }
    }

    /// The larger 24×24 IRS used for the aperture comparison.
    pub fn paper_large() -> Self {
        Self {
            irs_width: 24,
            irs_height: 24,
            ..Self::paper()
        }
    }

    pub fn irs_elements(&self) -> usize {
        self.irs_width * self.irs_height
    }

    pub fn ue_elements(&self) -> usize {
        self.ue_width * self.ue_height
    }

    /// Sampling period `T_s = 1 / f_BW` in seconds.
    pub fn sample_period(&self) -> f64 {
        1.0 / self.bandwidth_hz
    }

    /// Largest path delay, `L_CP / f_BW`.
    pub fn max_delay(&self) -> f64 {
        self.cyclic_prefix as f64 / self.bandwidth_hz
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("irs_width", self.irs_width),
            ("irs_height", self.irs_height),
            ("ue_width", self.ue_width),
            ("ue_height", self.ue_height),
            ("ue_streams", self.ue_streams),
            ("subcarriers", self.subcarriers),
            ("paths", self.paths),
            ("cyclic_prefix", self.cyclic_prefix),
        ];
        for (name, value) in positive {
            if value == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        if self.cyclic_prefix > self.subcarriers {
            return Err(Error::Config(format!(
                "cyclic_prefix ({}) exceeds subcarriers ({})",
                self.cyclic_prefix, self.subcarriers
            )));
        }
        if !(self.bandwidth_hz > 0.0 && self.bandwidth_hz.is_finite()) {
            return Err(Error::Config("bandwidth_hz must be positive".into()));
        }
        if self.element_spacing_wavelengths.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
            return Err(Error::Config(
                "element_spacing_wavelengths must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.pulse_rolloff) {
            return Err(Error::Config("pulse_rolloff must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Where the active IRS elements sit during training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Placement {
    /// Uniform random subset without replacement.
    #[default]
    Random,
    /// Evenly spaced element indices.
    Grid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SoundingConfig {
    /// Total measurements `M = B · N_RF`.
    pub measurements: usize,
    pub rf_chains: usize,
    /// Receive SNR in dB; `inf` sounds without noise.
    pub snr_db: f64,
    pub placement: Placement,
}

impl SoundingConfig {
    pub fn slots(&self) -> Result<usize> {
        if self.rf_chains == 0 || self.measurements == 0 {
            return Err(Error::Config(
                "measurements and rf_chains must be positive".into(),
            ));
        }
        if !self.measurements.is_multiple_of(self.rf_chains) {
            return Err(Error::Config(format!(
                "measurements ({}) is not a multiple of rf_chains ({})",
                self.measurements, self.rf_chains
            )));
        }
        Ok(self.measurements / self.rf_chains)
    }
}

impl Default for SoundingConfig {
    fn default() -> Self {
        Self {
            measurements: 32,
            rf_chains: 1,
            snr_db: 10.0,
            placement: Placement::Random,
        }
    }
}

/// Angle-grid parameterization of the redundant dictionary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridKind {
    /// Uniform grid over the direction cosines `(sin φ cos ψ, sin ψ)`.
    #[default]
    DirectionCosine,
    /// Uniform grid over the angles `(φ, ψ)` themselves.
    Angle,
}

/// Atom scoring across subcarriers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scoring {
    /// Sum of absolute correlations.
    #[default]
    L1,
    /// Root of the summed squared correlations.
    L2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecoveryConfig {
    /// Dictionary oversampling rate `β`.
    pub beta: usize,
    pub grid: GridKind,
    pub scoring: Scoring,
    /// Margin `δ` in the residual threshold `√(M σ²)(1 + δ)`.
    pub residual_margin: f64,
    /// Largest dense `ΦΨ` (in entries) before falling back to matrix-free products.
    pub dense_cap: usize,
}

impl Default for RecoveryConfig {
    fn default() -> Self {
        Self {
            beta: 2,
            grid: GridKind::DirectionCosine,
            scoring: Scoring::L1,
            residual_margin: 0.1,
            dense_cap: 1 << 20,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for cfg in [
            ScenarioConfig::desk(),
            ScenarioConfig::paper(),
            ScenarioConfig::paper_large(),
        ] {
            cfg.validate().unwrap();
        }
        assert_eq!(ScenarioConfig::paper().irs_elements(), 256);
        assert_eq!(ScenarioConfig::paper().paths, 6);
    }

    #[test]
    fn rejects_unknown_keys() {
        let text = r#"
            irs_width = 4
            irs_height = 4
            subcarriers = 16
            paths = 2
            carrier_hz = 28e9
            bandwidth_hz = 1e8
            cyclic_prefix = 4
            bandwith_hz = 1e8
        "#;
        let err = toml::from_str::<ScenarioConfig>(text).unwrap_err();
        assert!(err.to_string().contains("bandwith_hz"), "{err}");
    }

    #[test]
    fn cyclic_prefix_bounded_by_subcarriers() {
        let cfg = ScenarioConfig {
            cyclic_prefix: 65,
            ..ScenarioConfig::desk()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn slots_require_divisibility() {
        let s = SoundingConfig {
            measurements: 30,
            rf_chains: 4,
            ..Default::default()
        };
        assert!(s.slots().is_err());
        let s = SoundingConfig {
            measurements: 32,
            rf_chains: 4,
            ..Default::default()
        };
        assert_eq!(s.slots().unwrap(), 8);
    }
}
