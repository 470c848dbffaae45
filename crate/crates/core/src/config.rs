//! System constants shared by every stage of the simulator.

use serde::{de, Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;

use crate::error::{Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// ADC resolution per real dimension.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Resolution {
    Bits(u32),
    /// No quantization; the estimator switches to a Gaussian likelihood.
    Unquantized,
}

impl Resolution {
    pub fn bits(self) -> Option<u32> {
        match self {
            Resolution::Bits(b) => Some(b),
            Resolution::Unquantized => None,
        }
    }
}

impl fmt::Display for Resolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Resolution::Bits(b) => write!(f, "{b}"),
            Resolution::Unquantized => f.write_str("inf"),
        }
    }
}

impl std::str::FromStr for Resolution {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinite" | "unquantized" => Ok(Resolution::Unquantized),
            other => other
                .parse::<u32>()
                .map(Resolution::Bits)
                .map_err(|_| Error::InvalidConfig(format!("bad ADC resolution {s:?}"))),
        }
    }
}

impl Serialize for Resolution {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Resolution::Bits(b) => s.serialize_u32(*b),
            Resolution::Unquantized => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Resolution {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl de::Visitor<'_> for V {
            type Value = Resolution;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a bit count or \"inf\"")
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Resolution, E> {
                u32::try_from(v).map(Resolution::Bits).map_err(E::custom)
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Resolution, E> {
                u32::try_from(v).map(Resolution::Bits).map_err(E::custom)
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Resolution, E> {
                v.parse().map_err(E::custom)
            }
        }
        d.deserialize_any(V)
    }
}

/// Physical and system parameters of one simulated link.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    /// Element spacing in meters; half a carrier wavelength when absent.
    pub antenna_spacing_m: Option<f64>,
    pub speed_of_light: f64,
    pub antennas: usize,
    pub users: usize,
    pub rf_chains: usize,
    pub adc: Resolution,
    /// Delay spread in symbols.
    pub delay_spread: usize,
    pub paths_per_user: Vec<usize>,
    /// Average per-user transmit power in dB (noise variance is one).
    pub snr_db: f64,
    /// Power ratio between consecutive users in dB; zero gives equal powers.
    pub power_step_db: f64,
    pub frames: usize,
    pub frame_len: usize,
    /// Cyclic prefix length; the minimum guard when absent.
    pub prefix_len: Option<usize>,
    /// Cyclic suffix length; the minimum guard when absent.
    pub suffix_len: Option<usize>,
    pub rolloff: f64,
    pub zc_root: u64,
    pub angle_oversampling: usize,
    pub delay_oversampling: usize,
    pub cv_fraction: f64,
    pub rng_seed: u64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            carrier_hz: 28e9,
            bandwidth_hz: 600e6,
            antenna_spacing_m: None,
            speed_of_light: SPEED_OF_LIGHT,
            antennas: 16,
            users: 2,
            rf_chains: 8,
            adc: Resolution::Bits(3),
            delay_spread: 4,
            paths_per_user: vec![2, 2],
            snr_db: 0.0,
            power_step_db: 0.0,
            frames: 20,
            frame_len: 16,
            prefix_len: None,
            suffix_len: None,
            rolloff: 0.35,
            zc_root: 1,
            angle_oversampling: 2,
            delay_oversampling: 2,
            cv_fraction: 0.2,
            rng_seed: 0,
        }
    }
}

impl SystemConfig {
    pub fn sampling_period(&self) -> f64 {
        1.0 / self.bandwidth_hz
    }

    pub fn wavelength(&self) -> f64 {
        self.speed_of_light / self.carrier_hz
    }

    pub fn spacing(&self) -> f64 {
        self.antenna_spacing_m.unwrap_or(0.5 * self.wavelength())
    }

    /// Aperture delay across the array in sampling periods.
    pub fn aperture_delay_symbols(&self) -> f64 {
        (self.antennas.saturating_sub(1)) as f64 * self.spacing() / (self.speed_of_light * self.sampling_period())
    }

    pub fn snr_linear(&self) -> f64 {
        10f64.powf(self.snr_db / 10.0)
    }

    /// Per-user transmit powers. Consecutive users differ by `power_step_db`
    /// and the powers average to the configured SNR.
    pub fn user_powers(&self) -> Vec<f64> {
        let ratios: Vec<f64> = (0..self.users).map(|k| 10f64.powf(self.power_step_db * k as f64 / 10.0)).collect();
        let total: f64 = ratios.iter().sum();
        let first = self.users as f64 * self.snr_linear() / total;
        ratios.iter().map(|r| first * r).collect()
    }

    pub fn total_paths(&self) -> usize {
        self.paths_per_user.iter().sum()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.carrier_hz > 0.0 && self.bandwidth_hz > 0.0 && self.speed_of_light > 0.0) {
            return bad("carrier, bandwidth and speed of light must be positive".into());
        }
        if let Some(d) = self.antenna_spacing_m {
            if d.is_nan() || d <= 0.0 {
                return bad(format!("antenna spacing {d} must be positive"));
            }
        }
        if self.antennas == 0 || self.users == 0 || self.rf_chains == 0 {
            return bad("antennas, users and RF chains must be positive".into());
        }
        if self.rf_chains > self.antennas {
            return bad(format!("{} RF chains exceed {} antennas", self.rf_chains, self.antennas));
        }
        if self.delay_spread == 0 {
            return bad("delay spread must be at least one symbol".into());
        }
        if self.paths_per_user.len() != self.users {
            return bad(format!("paths_per_user has {} entries for {} users", self.paths_per_user.len(), self.users));
        }
        if let Resolution::Bits(0) = self.adc {
            return bad("ADC resolution must be at least one bit".into());
        }
        if self.frames == 0 || self.frame_len == 0 {
            return bad("frame count and frame length must be positive".into());
        }
        if !(self.rolloff > 0.0 && self.rolloff <= 1.0) {
            return bad(format!("roll-off {} outside (0, 1]", self.rolloff));
        }
        if self.angle_oversampling == 0 || self.delay_oversampling == 0 {
            return bad("grid oversampling factors must be at least one".into());
        }
        if !(self.cv_fraction > 0.0 && self.cv_fraction < 1.0) {
            return bad(format!("cv_fraction {} outside (0, 1)", self.cv_fraction));
        }
        if !self.snr_db.is_finite() || !self.power_step_db.is_finite() {
            return bad("SNR and power step must be finite".into());
        }
        Ok(())
    }
}
