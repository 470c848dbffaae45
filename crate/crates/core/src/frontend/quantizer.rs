use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::partition::DataPartition;
use crate::config::{Resolution, SystemConfig};
use crate::error::{Error, Result};
use crate::numerics::{ln_normal_pdf, normal_cdf};

/// Minimum-MSE uniform step for a unit-variance Gaussian input, 1 to 4 bits.
pub const OPTIMAL_STEP: [f64; 4] = [1.5956, 0.9957, 0.5860, 0.3352];

/// Symmetric mid-rise uniform quantizer applied to each real dimension.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantizerSpec {
    pub resolution: Resolution,
    pub step: f64,
}

impl QuantizerSpec {
    pub fn new(resolution: Resolution, step: f64) -> Result<Self> {
        if let Resolution::Bits(b) = resolution {
            if b == 0 || b > 30 {
                return Err(Error::InvalidConfig(format!("unsupported ADC resolution {b}")));
            }
            if !(step > 0.0 && step.is_finite()) {
                return Err(Error::InvalidConfig(format!("quantizer step {step} must be positive")));
            }
        }
        Ok(Self { resolution, step })
    }

    pub fn levels(&self) -> Option<i64> {
        self.resolution.bits().map(|b| 1i64 << b)
    }

    fn half(&self) -> i64 {
        self.levels().map_or(0, |l| l / 2)
    }

    /// Output cell of `x`, counted from the most negative cell.
    pub fn cell(&self, x: f64) -> i64 {
        let levels = self.levels().expect("cell() needs a finite resolution");
        let mut c = (x / self.step).floor() as i64 + self.half();
        c = c.clamp(0, levels - 1);
        let (lo, up) = self.bounds(c);
        if x < lo {
            c -= 1;
        } else if x >= up {
            c += 1;
        }
        c.clamp(0, levels - 1)
    }

    pub fn point(&self, cell: i64) -> f64 {
        (cell - self.half()) as f64 * self.step + 0.5 * self.step
    }

    /// `[lo, up)` of a cell; the outermost cells are unbounded.
    pub fn bounds(&self, cell: i64) -> (f64, f64) {
        let levels = self.levels().expect("bounds() needs a finite resolution");
        let lo = if cell == 0 { f64::NEG_INFINITY } else { (cell - self.half()) as f64 * self.step };
        let up = if cell == levels - 1 { f64::INFINITY } else { (cell + 1 - self.half()) as f64 * self.step };
        (lo, up)
    }

    pub fn quantize_real(&self, x: f64) -> f64 {
        match self.resolution {
            Resolution::Unquantized => x,
            Resolution::Bits(_) => self.point(self.cell(x)),
        }
    }

    /// `(lo, up)` for a quantized value; equal to the value when unquantized.
    pub fn thresholds_of(&self, value: f64) -> (f64, f64) {
        match self.resolution {
            Resolution::Unquantized => (value, value),
            Resolution::Bits(_) => self.bounds(self.cell(value)),
        }
    }
}

/// Mean squared error of the quantizer with `bits` and `step` on N(0, 1).
pub fn gaussian_mse(bits: u32, step: f64) -> f64 {
    let q = QuantizerSpec { resolution: Resolution::Bits(bits), step };
    let pdf = |z: f64| if z.is_finite() { ln_normal_pdf(z).exp() } else { 0.0 };
    let zpdf = |z: f64| if z.is_finite() { z * ln_normal_pdf(z).exp() } else { 0.0 };
    (0..q.levels().unwrap())
        .map(|c| {
            let (a, b) = q.bounds(c);
            let p = q.point(c);
            let mass = normal_cdf(b) - normal_cdf(a);
            mass * (1.0 + p * p) + zpdf(a) - zpdf(b) - 2.0 * p * (pdf(a) - pdf(b))
        })
        .sum()
}

/// Minimum-MSE step for a unit-variance Gaussian. Tabulated up to 4 bits,
/// searched by golden section beyond.
pub fn optimal_step(bits: u32) -> f64 {
    if (1..=4).contains(&bits) {
        return OPTIMAL_STEP[bits as usize - 1];
    }
    golden_min(|s| gaussian_mse(bits, s), 1e-4, 2.0)
}

pub(crate) fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
        if (b - a).abs() < 1e-12 {
            break;
        }
    }
    0.5 * (a + b)
}

/// Expected received signal power per antenna before noise: every path has
/// unit mean gain and user `k` transmits with power `rho_k`.
pub fn received_signal_power(cfg: &SystemConfig) -> f64 {
    cfg.user_powers().iter().zip(&cfg.paths_per_user).map(|(p, &l)| p * l as f64).sum()
}

/// Per-complex-dimension variance of a combined sample (signal plus unit noise).
pub fn signal_variance(cfg: &SystemConfig) -> f64 {
    received_signal_power(cfg) + 1.0
}

pub fn make_quantizer(cfg: &SystemConfig, signal_variance: f64) -> Result<QuantizerSpec> {
    match cfg.adc {
        Resolution::Unquantized => QuantizerSpec::new(Resolution::Unquantized, 0.0),
        Resolution::Bits(b) => {
            if signal_variance.is_nan() || signal_variance <= 0.0 {
                return Err(Error::InvalidConfig(format!("signal variance {signal_variance}")));
            }
            QuantizerSpec::new(Resolution::Bits(b), optimal_step(b) * (signal_variance / 2.0).sqrt())
        }
    }
}

/// Quantized samples with their real-form cell bounds and data split.
///
/// Real index `i < RN` refers to `Re(values[i])`, and `i >= RN` to
/// `Im(values[i - RN])`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "ObservationRecord", into = "ObservationRecord")]
pub struct QuantizedObservation {
    pub spec: QuantizerSpec,
    pub values: Vec<Complex64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub partition: DataPartition,
}

#[derive(Serialize, Deserialize)]
struct ObservationRecord {
    spec: QuantizerSpec,
    values: Vec<Complex64>,
    partition: DataPartition,
}

impl From<ObservationRecord> for QuantizedObservation {
    fn from(r: ObservationRecord) -> Self {
        QuantizedObservation::from_values(r.spec, r.values, r.partition)
    }
}

impl From<QuantizedObservation> for ObservationRecord {
    fn from(q: QuantizedObservation) -> Self {
        ObservationRecord { spec: q.spec, values: q.values, partition: q.partition }
    }
}

impl QuantizedObservation {
    fn from_values(spec: QuantizerSpec, values: Vec<Complex64>, partition: DataPartition) -> Self {
        let n = values.len();
        let mut lower = vec![0.0; 2 * n];
        let mut upper = vec![0.0; 2 * n];
        for (i, v) in values.iter().enumerate() {
            (lower[i], upper[i]) = spec.thresholds_of(v.re);
            (lower[n + i], upper[n + i]) = spec.thresholds_of(v.im);
        }
        Self { spec, values, lower, upper, partition }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_quantized(&self) -> bool {
        self.spec.resolution != Resolution::Unquantized
    }

    pub fn real_value(&self, i: usize) -> f64 {
        let n = self.len();
        if i < n {
            self.values[i].re
        } else {
            self.values[i - n].im
        }
    }
}

pub fn quantize(y: &[Complex64], spec: &QuantizerSpec, partition: DataPartition) -> Result<QuantizedObservation> {
    if partition.rows() != y.len() {
        return Err(Error::Dimension(format!(
            "partition covers {} samples, observation has {}",
            partition.rows(),
            y.len()
        )));
    }
    let values = y.iter().map(|v| Complex64::new(spec.quantize_real(v.re), spec.quantize_real(v.im))).collect();
    Ok(QuantizedObservation::from_values(*spec, values, partition))
}
