use num_complex::Complex64;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::frontend::{QuantizedObservation, Subset};
use crate::numerics::{ln_normal_interval, ln_normal_pdf};

/// Per-real-dimension noise standard deviation.
pub const NOISE_STD: f64 = FRAC_1_SQRT_2;

/// Log-probability of real observation `i` given mean `mean`, with its first
/// and second derivatives in the mean.
///
/// Quantized samples use the probability of their cell; unquantized samples
/// use the Gaussian density with variance 1/2.
pub fn term(obs: &QuantizedObservation, i: usize, mean: f64) -> (f64, f64, f64) {
    if !obs.is_quantized() {
        let r = obs.real_value(i) - mean;
        return (-0.5 * PI.ln() - r * r, 2.0 * r, -2.0);
    }
    let s = NOISE_STD;
    let a = (obs.lower[i] - mean) / s;
    let b = (obs.upper[i] - mean) / s;
    let lz = ln_normal_interval(a, b);
    let ratio = |z: f64| if z.is_finite() { (ln_normal_pdf(z) - lz).exp() } else { 0.0 };
    let (ra, rb) = (ratio(a), ratio(b));
    let za = if a.is_finite() { a * ra } else { 0.0 };
    let zb = if b.is_finite() { b * rb } else { 0.0 };
    let score = -(rb - ra) / s;
    let curv = (-(zb - za) / (s * s) - score * score).min(0.0);
    (lz, score, curv)
}

fn real_mean(mean: &[Complex64], i: usize) -> f64 {
    let n = mean.len();
    if i < n {
        mean[i].re
    } else {
        mean[i - n].im
    }
}

/// Log-likelihood of the samples in `subset` given the complex mean vector.
pub fn loglik_mean(mean: &[Complex64], obs: &QuantizedObservation, subset: Subset) -> f64 {
    let n = obs.len();
    (0..2 * n).filter(|&i| obs.partition.includes(subset, i)).map(|i| term(obs, i, real_mean(mean, i)).0).sum()
}

/// Mean vector `sum_p gains[p] * atoms[p]`.
pub fn mean_of(atoms: &[Vec<Complex64>], gains: &[Complex64], rows: usize) -> Vec<Complex64> {
    let mut mean = vec![Complex64::new(0.0, 0.0); rows];
    for (a, g) in atoms.iter().zip(gains) {
        for (m, v) in mean.iter_mut().zip(a) {
            *m += g * v;
        }
    }
    mean
}

/// Log-likelihood of `gains` on the atom columns `atoms`.
pub fn loglik(gains: &[Complex64], atoms: &[Vec<Complex64>], obs: &QuantizedObservation, subset: Subset) -> f64 {
    loglik_mean(&mean_of(atoms, gains, obs.len()), obs, subset)
}

/// Scores and curvatures at `mean`, packed as complex vectors (real part for
/// the in-phase sample, imaginary part for the quadrature sample). Samples
/// outside `subset` contribute zeros.
pub fn score_curvature(
    mean: &[Complex64],
    obs: &QuantizedObservation,
    subset: Subset,
) -> (Vec<Complex64>, Vec<Complex64>, f64) {
    let n = obs.len();
    let mut score = vec![Complex64::new(0.0, 0.0); n];
    let mut curv = vec![Complex64::new(0.0, 0.0); n];
    let mut total = 0.0;
    for i in 0..n {
        if !obs.partition.includes(subset, i) {
            continue;
        }
        let (l1, s1, c1) = term(obs, i, mean[i].re);
        let (l2, s2, c2) = term(obs, n + i, mean[i].im);
        score[i] = Complex64::new(s1, s2);
        curv[i] = Complex64::new(c1, c2);
        total += l1 + l2;
    }
    (score, curv, total)
}
