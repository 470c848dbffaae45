//! Monte-Carlo probes of the asymptotic held-out log-likelihood
//!
//! `f(h_hat) = E[ log P(q(a^T h + v) | a^T h_hat) ]` for real sensing rows `a`
//! and noise `v ~ N(0, 1/2)`. The expectation over the noise is taken exactly
//! by summing over quantizer cells, so only the sensing rows are sampled.
//! All candidate points share the same rows, which makes differences between
//! points far less noisy than the values themselves.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{E, PI};
use std::path::Path;

use crate::error::{Error, Result};
use crate::estimator::NOISE_STD;
use crate::frontend::optimal_step;
use crate::numerics::log_cdf_diff;

/// Cells lighter than this under the true mean are skipped.
const CELL_PRUNE: f64 = 1e-14;
/// Half-width, in noise standard deviations, of the cell window of an
/// unbounded quantizer.
const WINDOW: f64 = 8.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeQuantizer {
    /// `2^bits` cells with the minimum-MSE step for the received variance and
    /// unbounded outer cells.
    Saturating(u32),
    /// Infinitely many cells of width `step`, edges at multiples of `step`.
    Unbounded { step: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvProbeConfig {
    /// True channel in real form.
    pub truth: Vec<f64>,
    /// Variance of each real sensing entry.
    pub row_variance: f64,
    pub quantizer: ProbeQuantizer,
    pub draws: usize,
    /// Lattice points per axis (2-dim truth only).
    pub lattice_points: usize,
    /// Lattice spacing around the truth.
    pub lattice_step: f64,
    pub segments: usize,
}

impl Default for CvProbeConfig {
    fn default() -> Self {
        Self {
            truth: vec![5.0, 5.0],
            row_variance: 1.0,
            quantizer: ProbeQuantizer::Saturating(1),
            draws: 100_000,
            lattice_points: 21,
            lattice_step: 0.5,
            segments: 100,
        }
    }
}

/// Monte-Carlo mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
}

impl McEstimate {
    fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0).max(1.0);
        Self { mean, stderr: (var / n).sqrt() }
    }
}

#[derive(Clone, Debug)]
struct Cell {
    lo: f64,
    hi: f64,
    weight: f64,
}

/// Sensing rows with the exact noise distribution over cells under the truth.
#[derive(Clone, Debug)]
pub struct ProbeSample {
    pub config: CvProbeConfig,
    /// Cell width.
    pub step: f64,
    rows: Vec<Vec<f64>>,
    cells: Vec<Vec<Cell>>,
}

impl CvProbeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.truth.is_empty() {
            return Err(Error::InvalidConfig("probe truth is empty".into()));
        }
        if self.row_variance.is_nan() || self.row_variance <= 0.0 {
            return Err(Error::InvalidConfig(format!("row variance {}", self.row_variance)));
        }
        if self.draws < 2 {
            return Err(Error::InvalidConfig("probe needs at least two draws".into()));
        }
        match self.quantizer {
            ProbeQuantizer::Saturating(b) if b == 0 || b > 16 => {
                Err(Error::InvalidConfig(format!("probe resolution {b}")))
            }
            ProbeQuantizer::Unbounded { step } if !(step > 0.0 && step.is_finite()) => {
                Err(Error::InvalidConfig(format!("probe step {step}")))
            }
            _ => Ok(()),
        }
    }

    /// Per-real-dimension variance of a received sample.
    pub fn received_variance(&self) -> f64 {
        self.row_variance * self.truth.iter().map(|v| v * v).sum::<f64>() + NOISE_STD * NOISE_STD
    }

    pub fn step(&self) -> f64 {
        match self.quantizer {
            ProbeQuantizer::Saturating(b) => optimal_step(b) * self.received_variance().sqrt(),
            ProbeQuantizer::Unbounded { step } => step,
        }
    }
}

impl ProbeSample {
    /// Draws the sensing rows sequentially from `rng`.
    pub fn draw<R: Rng + ?Sized>(config: &CvProbeConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let normal = Normal::new(0.0, config.row_variance.sqrt()).expect("positive variance");
        let n = config.truth.len();
        let rows: Vec<Vec<f64>> = (0..config.draws).map(|_| (0..n).map(|_| normal.sample(rng)).collect()).collect();
        let step = config.step();
        let cells = rows.par_iter().map(|a| cells_at(dot(a, &config.truth), config.quantizer, step)).collect();
        Ok(Self { config: config.clone(), step, rows, cells })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Per-row expected log-likelihood at `h_hat`.
    pub fn values(&self, h_hat: &[f64]) -> Vec<f64> {
        self.rows
            .par_iter()
            .zip(&self.cells)
            .map(|(a, cells)| {
                let mu = dot(a, h_hat);
                cells.iter().map(|c| c.weight * log_cdf_diff(c.lo, c.hi, mu, NOISE_STD)).sum()
            })
            .collect()
    }

    pub fn fcv(&self, h_hat: &[f64]) -> McEstimate {
        McEstimate::of(&self.values(h_hat))
    }

    /// `sum_i c_i f(p_i)` estimated on the shared rows.
    pub fn combination(&self, terms: &[(f64, &[f64])]) -> McEstimate {
        let mut acc = vec![0.0; self.len()];
        for (c, p) in terms {
            for (a, v) in acc.iter_mut().zip(self.values(p)) {
                *a += c * v;
            }
        }
        McEstimate::of(&acc)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn cells_at(mu: f64, q: ProbeQuantizer, step: f64) -> Vec<Cell> {
    let s = NOISE_STD;
    let edges: Vec<(f64, f64)> = match q {
        ProbeQuantizer::Saturating(b) => {
            let levels = 1i64 << b;
            let half = levels / 2;
            (0..levels)
                .map(|c| {
                    let lo = if c == 0 { f64::NEG_INFINITY } else { (c - half) as f64 * step };
                    let hi = if c == levels - 1 { f64::INFINITY } else { (c + 1 - half) as f64 * step };
                    (lo, hi)
                })
                .collect()
        }
        ProbeQuantizer::Unbounded { .. } => {
            let first = ((mu - WINDOW * s) / step).floor() as i64;
            let last = ((mu + WINDOW * s) / step).floor() as i64;
            (first..=last).map(|i| (i as f64 * step, (i + 1) as f64 * step)).collect()
        }
    };
    edges
        .into_iter()
        .filter_map(|(lo, hi)| {
            let weight = log_cdf_diff(lo, hi, mu, s).exp();
            (weight >= CELL_PRUNE).then_some(Cell { lo, hi, weight })
        })
        .collect()
}

/// Estimate of the asymptotic held-out log-likelihood per real sample at `h_hat`.
pub fn empirical_fcv<R: Rng + ?Sized>(h_hat: &[f64], probe: &CvProbeConfig, rng: &mut R) -> Result<McEstimate> {
    if h_hat.len() != probe.truth.len() {
        return Err(Error::Dimension(format!("{} coordinates for a {}-dim truth", h_hat.len(), probe.truth.len())));
    }
    Ok(ProbeSample::draw(probe, rng)?.fcv(h_hat))
}

/// One probed line segment and its midpoint concavity gap
/// `f(mid) - (f(p) + f(q)) / 2`, which is nonnegative for a concave function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentCheck {
    pub start: Vec<f64>,
    pub end: Vec<f64>,
    pub gap: McEstimate,
    pub violation: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcavityReport {
    pub segments: Vec<SegmentCheck>,
    pub violations: usize,
}

/// Lattice box `truth +- half-width` along every axis.
fn lattice_box(probe: &CvProbeConfig) -> (Vec<f64>, f64) {
    let half = probe.lattice_step * (probe.lattice_points.max(1) - 1) as f64 / 2.0;
    (probe.truth.clone(), half)
}

/// Midpoint concavity along random segments inside the lattice box. With
/// `negate`, the detector is run on `-f` instead.
pub fn concavity_probe_on(sample: &ProbeSample, segments: &[(Vec<f64>, Vec<f64>)], negate: bool) -> ConcavityReport {
    let sign = if negate { -1.0 } else { 1.0 };
    let checks: Vec<SegmentCheck> = segments
        .iter()
        .map(|(p, q)| {
            let mid: Vec<f64> = p.iter().zip(q).map(|(a, b)| 0.5 * (a + b)).collect();
            let gap = sample.combination(&[(sign, &mid), (-0.5 * sign, p), (-0.5 * sign, q)]);
            let violation = gap.mean < -3.0 * gap.stderr && gap.mean < -1e-12;
            SegmentCheck { start: p.clone(), end: q.clone(), gap, violation }
        })
        .collect();
    let violations = checks.iter().filter(|c| c.violation).count();
    ConcavityReport { segments: checks, violations }
}

/// Random segments with endpoints uniform in the lattice box.
pub fn random_segments<R: Rng + ?Sized>(probe: &CvProbeConfig, count: usize, rng: &mut R) -> Vec<(Vec<f64>, Vec<f64>)> {
    let (center, half) = lattice_box(probe);
    let point = |rng: &mut R| -> Vec<f64> {
        center.iter().map(|c| c + if half > 0.0 { rng.random_range(-half..=half) } else { 0.0 }).collect()
    };
    (0..count).map(|_| (point(rng), point(rng))).collect()
}

pub fn concavity_probe<R: Rng + ?Sized>(probe: &CvProbeConfig, rng: &mut R) -> Result<ConcavityReport> {
    let sample = ProbeSample::draw(probe, rng)?;
    let segments = random_segments(probe, probe.segments, rng);
    Ok(concavity_probe_on(&sample, &segments, false))
}

/// Residual of the fine-quantization approximation
/// `f(h_hat) ~ -|h_hat - h|^2 - log(pi e) / 2 + log(step)` at one step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub step: f64,
    pub fcv: McEstimate,
    pub residual: McEstimate,
    /// `residual / step`.
    pub ratio: f64,
}

/// Gaussian reference term of one row: the unquantized log-density with the
/// cell width folded in.
fn reference_value(a: &[f64], truth: &[f64], h_hat: &[f64], step: f64) -> f64 {
    let e = dot(a, truth) - dot(a, h_hat);
    -0.5 * (PI * E).ln() - e * e + step.ln()
}

/// Residuals for unbounded uniform quantizers of the given steps. Each step
/// uses its own row draw; the Gaussian reference of every row is subtracted
/// inside the average, which leaves only the quantization effect in the
/// Monte-Carlo error.
pub fn delta_scaling_check<R: Rng + ?Sized>(
    truth: &[f64],
    h_hat: &[f64],
    steps: &[f64],
    probe: &CvProbeConfig,
    rng: &mut R,
) -> Result<Vec<DeltaRow>> {
    if h_hat.len() != truth.len() {
        return Err(Error::Dimension("estimate and truth differ in length".into()));
    }
    let err2: f64 = truth.iter().zip(h_hat).map(|(a, b)| (a - b) * (a - b)).sum();
    steps
        .iter()
        .map(|&step| {
            let cfg =
                CvProbeConfig { truth: truth.to_vec(), quantizer: ProbeQuantizer::Unbounded { step }, ..probe.clone() };
            let sample = ProbeSample::draw(&cfg, rng)?;
            let values = sample.values(h_hat);
            let diffs: Vec<f64> =
                values.iter().zip(&sample.rows).map(|(v, a)| v - reference_value(a, truth, h_hat, step)).collect();
            let mut residual = McEstimate::of(&diffs);
            // The reference averages to -row_variance * err2 rather than -err2.
            residual.mean -= (cfg.row_variance - 1.0) * err2;
            Ok(DeltaRow { step, fcv: McEstimate::of(&values), residual, ratio: residual.mean / step })
        })
        .collect()
}

/// One lattice point: its value and the paired difference to the truth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticePoint {
    pub h_hat: Vec<f64>,
    pub fcv: McEstimate,
    /// `f(h_hat) - f(truth)` on shared rows.
    pub minus_truth: McEstimate,
}

/// Square lattice centered on a 2-dim truth.
pub fn lattice_points(probe: &CvProbeConfig) -> Result<Vec<Vec<f64>>> {
    if probe.truth.len() != 2 {
        return Err(Error::Dimension(format!("lattice needs a 2-dim truth, got {}", probe.truth.len())));
    }
    let (c, half) = lattice_box(probe);
    let n = probe.lattice_points.max(1);
    let coord = |i: usize, axis: usize| c[axis] - half + probe.lattice_step * i as f64;
    Ok((0..n).flat_map(|i| (0..n).map(move |j| vec![coord(i, 0), coord(j, 1)])).collect())
}

pub fn fcv_lattice(sample: &ProbeSample) -> Result<Vec<LatticePoint>> {
    let truth = sample.config.truth.clone();
    let base = sample.values(&truth);
    Ok(lattice_points(&sample.config)?
        .into_iter()
        .map(|p| {
            let v = sample.values(&p);
            let d: Vec<f64> = v.iter().zip(&base).map(|(a, b)| a - b).collect();
            LatticePoint { h_hat: p, fcv: McEstimate::of(&v), minus_truth: McEstimate::of(&d) }
        })
        .collect())
}

/// Writes `h1,h2,fcv,stderr` rows for contour plotting.
pub fn write_lattice_csv(points: &[LatticePoint], path: &Path) -> Result<()> {
    let csv_err = |source| Error::Csv { path: path.to_path_buf(), source };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["h1", "h2", "fcv", "stderr"]).map_err(csv_err)?;
    for p in points {
        w.write_record([
            p.h_hat[0].to_string(),
            p.h_hat[1].to_string(),
            p.fcv.mean.to_string(),
            p.fcv.stderr.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
