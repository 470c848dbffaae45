//! Numerical kernels shared by the channel model, front end and estimator.
//!
//! Real-form embedding of complex vectors and matrices, the raised-cosine
//! pulse with analytic derivatives, a tail-safe log-probability of a normal
//! interval, and Zadoff-Chu sequences.

use nalgebra::DMatrix;
use num_complex::Complex64;
use statrs::function::erf::erfc;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{Error, Result};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// `[Re(x); Im(x)]`.
pub fn real_form_vec(x: &[Complex64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * x.len());
    out.extend(x.iter().map(|z| z.re));
    out.extend(x.iter().map(|z| z.im));
    out
}

/// Inverse of [`real_form_vec`].
pub fn complex_from_real(x: &[f64]) -> Vec<Complex64> {
    let n = x.len() / 2;
    (0..n).map(|i| Complex64::new(x[i], x[n + i])).collect()
}

/// Block form `[[Re X, -Im X], [Im X, Re X]]`.
pub fn real_form_mat(x: &DMatrix<Complex64>) -> DMatrix<f64> {
    let (r, c) = x.shape();
    DMatrix::from_fn(2 * r, 2 * c, |i, j| {
        let z = x[(i % r, j % c)];
        match (i < r, j < c) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    })
}

/// Normalized sinc, `sin(pi x) / (pi x)`.
pub fn sinc(x: f64) -> f64 {
    sinc_jet(x)[0]
}

/// `[sinc, sinc', sinc'']` at `x`.
pub fn sinc_jet(x: f64) -> [f64; 3] {
    if x.abs() < 0.1 {
        // Taylor series; the closed forms cancel badly near zero.
        let (mut s, mut ds, mut dds) = (0.0, 0.0, 0.0);
        let px2 = (PI * x) * (PI * x);
        let mut term = 1.0; // (-1)^n (pi x)^{2n} / (2n+1)!
        for n in 0..10 {
            let nf = n as f64;
            s += term;
            if n >= 1 {
                ds += term * 2.0 * nf / x;
                dds += term * 2.0 * nf * (2.0 * nf - 1.0) / (x * x);
            }
            term *= -px2 / ((2.0 * nf + 2.0) * (2.0 * nf + 3.0));
        }
        if x == 0.0 {
            return [1.0, 0.0, -PI * PI / 3.0];
        }
        return [s, ds, dds];
    }
    let (sn, cs) = (PI * x).sin_cos();
    let s = sn / (PI * x);
    let ds = (cs - s) / x;
    let dds = -PI * PI * s - 2.0 * ds / x;
    [s, ds, dds]
}

/// Raised-cosine pulse with period `ts` and roll-off `beta`.
pub fn rc_pulse(t: f64, ts: f64, beta: f64) -> f64 {
    rc_pulse_jet(t / ts, beta)[0]
}

/// Raised-cosine pulse and its first two derivatives with respect to the
/// normalized time `x = t / T_s`.
///
/// Uses `cos(pi b x) / (1 - 4 b^2 x^2) = (pi/2) sinc(b|x| - 1/2) / (1 + 2 b|x|)`,
/// which has no removable singularity.
pub fn rc_pulse_jet(x: f64, beta: f64) -> [f64; 3] {
    let s = sinc_jet(x);
    let sign = if x < 0.0 { -1.0 } else { 1.0 };
    let ax = x.abs();
    let w = sinc_jet(beta * ax - 0.5);
    let den = 1.0 + 2.0 * beta * ax;
    let half_pi = 0.5 * PI;
    let g = half_pi * w[0] / den;
    let ga = half_pi * (beta * w[1] / den - 2.0 * beta * w[0] / (den * den));
    let gaa = half_pi
        * (beta * beta * w[2] / den - 4.0 * beta * beta * w[1] / (den * den)
            + 8.0 * beta * beta * w[0] / (den * den * den));
    let (g1, g2) = (sign * ga, gaa);
    [s[0] * g, s[1] * g + s[0] * g1, s[2] * g + 2.0 * s[1] * g1 + s[0] * g2]
}

/// `ln phi(z)` for the standard normal density.
pub fn ln_normal_pdf(z: f64) -> f64 {
    -0.5 * z * z - LN_SQRT_2PI
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z * FRAC_1_SQRT_2)
}

/// `ln Phi(z)`, finite for every finite `z`.
pub fn ln_normal_cdf(z: f64) -> f64 {
    if z == f64::INFINITY {
        0.0
    } else if z == f64::NEG_INFINITY {
        f64::NEG_INFINITY
    } else if z > 5.0 {
        (-normal_cdf(-z)).ln_1p()
    } else if z > -25.0 {
        normal_cdf(z).ln()
    } else {
        // Mills-ratio asymptotic series.
        let r = 1.0 / (z * z);
        let mut series = 1.0;
        let mut term = 1.0;
        for k in 1..8 {
            term *= -((2 * k - 1) as f64) * r;
            series += term;
        }
        ln_normal_pdf(z) - (-z).ln() + series.ln()
    }
}

/// `ln(exp(a) - exp(b))` for `a > b`.
fn ln_sub_exp(a: f64, b: f64) -> f64 {
    if b == f64::NEG_INFINITY {
        return a;
    }
    a + (-(b - a).exp_m1()).ln()
}

// 10-point Gauss-Legendre on [-1, 1].
const GL_NODES: [f64; 5] = [
    0.148_874_338_981_631_2,
    0.433_395_394_129_247_2,
    0.679_409_568_299_024_4,
    0.865_063_366_688_984_5,
    0.973_906_528_517_171_7,
];
const GL_WEIGHTS: [f64; 5] = [
    0.295_524_224_714_752_87,
    0.269_266_719_309_996_35,
    0.219_086_362_515_982_04,
    0.149_451_349_150_580_6,
    0.066_671_344_308_688_14,
];

/// `ln(Phi(b) - Phi(a))` for standardized bounds `a < b`.
pub fn ln_normal_interval(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() || a >= b {
        return f64::NEG_INFINITY;
    }
    let a_inf = a == f64::NEG_INFINITY;
    let b_inf = b == f64::INFINITY;
    match (a_inf, b_inf) {
        (true, true) => return 0.0,
        (true, false) => return ln_normal_cdf(b),
        (false, true) => return ln_normal_cdf(-a),
        _ => {}
    }
    if (b - a) * (1.0 + a.abs().max(b.abs())) <= 1.0 {
        // Narrow interval: integrate the density relative to its peak.
        let m = 0.0f64.clamp(a, b);
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        let mut acc = 0.0;
        for (x, w) in GL_NODES.iter().zip(GL_WEIGHTS.iter()) {
            for t in [mid - half * x, mid + half * x] {
                acc += w * (-0.5 * (t * t - m * m)).exp();
            }
        }
        return ln_normal_pdf(m) + (acc * half).ln();
    }
    if a >= 0.0 {
        ln_sub_exp(ln_normal_cdf(-a), ln_normal_cdf(-b))
    } else if b <= 0.0 {
        ln_sub_exp(ln_normal_cdf(b), ln_normal_cdf(a))
    } else {
        (-(normal_cdf(a) + normal_cdf(-b))).ln_1p()
    }
}

/// `ln(Phi((hi - mu)/sigma) - Phi((lo - mu)/sigma))`.
pub fn log_cdf_diff(lo: f64, hi: f64, mu: f64, sigma: f64) -> f64 {
    ln_normal_interval((lo - mu) / sigma, (hi - mu) / sigma)
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Zadoff-Chu sequence of length `n` and root `root`, circularly shifted left
/// by `shift` so that element `i` is the base sequence at `(i + shift) mod n`.
pub fn zc_sequence(n: usize, root: u64, shift: usize) -> Result<Vec<Complex64>> {
    if n == 0 {
        return Err(Error::InvalidConfig("Zadoff-Chu length must be positive".into()));
    }
    if gcd(root % n as u64, n as u64) != 1 {
        return Err(Error::NonCoprimeRoot { root, len: n });
    }
    if shift >= n {
        return Err(Error::InvalidConfig(format!("Zadoff-Chu shift {shift} out of range for length {n}")));
    }
    let nn = n as u64;
    let modulus = 2 * nn;
    let u = root % modulus;
    Ok((0..n)
        .map(|i| {
            let j = ((i + shift) % n) as u64;
            let q = if nn % 2 == 1 { j * (j + 1) } else { j * j } % modulus;
            let num = (u * q) % modulus;
            Complex64::from_polar(1.0, -PI * num as f64 / n as f64)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rc_direct(x: f64, beta: f64) -> f64 {
        let s = if x == 0.0 { 1.0 } else { (PI * x).sin() / (PI * x) };
        s * (PI * beta * x).cos() / (1.0 - (2.0 * beta * x).powi(2))
    }

    #[test]
    fn real_form_examples() {
        assert_eq!(real_form_vec(&[Complex64::new(1.0, 2.0)]), vec![1.0, 2.0]);
        let x = DMatrix::from_element(1, 1, Complex64::new(0.0, 1.0));
        let r = real_form_mat(&x);
        assert_eq!(r.as_slice(), &[0.0, 1.0, -1.0, 0.0]);
    }

    #[test]
    fn real_form_matches_complex_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut c = || Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
        let x = DMatrix::from_fn(4, 3, |_, _| c());
        let z: Vec<Complex64> = (0..3).map(|_| c()).collect();
        let y: Vec<Complex64> = (0..4).map(|i| (0..3).map(|j| x[(i, j)] * z[j]).sum()).collect();
        let lhs = real_form_mat(&x) * nalgebra::DVector::from_vec(real_form_vec(&z));
        for (a, b) in lhs.iter().zip(real_form_vec(&y)) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(complex_from_real(&real_form_vec(&z)), z);
    }

    #[test]
    fn pulse_values() {
        assert_eq!(rc_pulse(0.0, 1.0, 0.35), 1.0);
        for k in 1..6 {
            assert!(rc_pulse(k as f64 * 2.5e-9, 2.5e-9, 0.35).abs() < 1e-15);
            assert!(rc_pulse(-(k as f64) * 2.5e-9, 2.5e-9, 0.35).abs() < 1e-15);
        }
        for &x in &[0.03, 0.4, -0.77, 1.3, 2.9, -3.6, 7.1] {
            assert!((rc_pulse(x, 1.0, 0.35) - rc_direct(x, 0.35)).abs() < 1e-12);
        }
    }

    #[test]
    fn pulse_singular_point() {
        let beta = 0.35;
        let xs = 1.0 / (2.0 * beta);
        let limit = PI / 4.0 * (xs * PI).sin() / (xs * PI);
        assert!((rc_pulse(xs, 1.0, beta) - limit).abs() < 1e-14);
        assert!((rc_pulse(-xs, 1.0, beta) - limit).abs() < 1e-14);
        for eps in [1e-9, 1e-7, 1e-6] {
            for s in [-1.0, 1.0] {
                let d = (rc_pulse(xs + s * eps, 1.0, beta) - limit).abs();
                assert!(d <= 2.0 * eps, "eps {eps}: {d}");
            }
        }
        // Away from the singular point, but close enough that the direct formula is still accurate.
        let off = xs + 1e-3;
        assert!((rc_pulse(off, 1.0, beta) - rc_direct(off, beta)).abs() < 1e-10);
    }

    #[test]
    fn pulse_derivatives_match_differences() {
        let beta = 0.35;
        let h = 1e-5;
        for &x in &[0.0, 1e-4, 0.05, 0.3, 1.0 / 0.7, -1.0 / 0.7, 1.9, -2.4, 0.099, 0.101] {
            let j = rc_pulse_jet(x, beta);
            let jp = rc_pulse_jet(x + h, beta);
            let jm = rc_pulse_jet(x - h, beta);
            assert!((j[1] - (jp[0] - jm[0]) / (2.0 * h)).abs() < 1e-8, "p' at {x}");
            assert!((j[2] - (jp[1] - jm[1]) / (2.0 * h)).abs() < 1e-8, "p'' at {x}");
        }
    }

    #[test]
    fn sinc_series_matches_closed_form_at_switch() {
        let a = sinc_jet(0.0999999);
        let b = sinc_jet(0.1000001);
        for i in 0..3 {
            assert!((a[i] - b[i]).abs() < 1e-5);
        }
    }

    // Composite Simpson on the density, in extended steps; independent of erfc.
    fn simpson_mass(a: f64, b: f64) -> f64 {
        let n = 20_000;
        let h = (b - a) / n as f64;
        let f = |t: f64| (-0.5 * t * t).exp() / (2.0 * PI).sqrt();
        let mut s = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(a + i as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn interval_log_probability() {
        let inf = f64::INFINITY;
        assert_eq!(log_cdf_diff(-inf, inf, 0.3, 2.0), 0.0);
        assert!((log_cdf_diff(-inf, 1.5, 1.5, 0.7) - 0.5f64.ln()).abs() < 1e-15);
        let v = log_cdf_diff(10.0, 11.0, 0.0, 1.0);
        let oracle = simpson_mass(10.0, 11.0).ln();
        assert!(((v - oracle) / oracle).abs() < 1e-10, "{v} vs {oracle}");
        for &(a, b) in &[(-0.3, 0.2), (0.5, 2.0), (-3.0, -1.0), (-1.0, 4.0), (2.0, 2.01), (-6.0, -5.5)] {
            let oracle = simpson_mass(a, b).ln();
            let v = ln_normal_interval(a, b);
            assert!(((v - oracle) / oracle).abs() < 1e-10, "[{a},{b}]: {v} vs {oracle}");
        }
    }

    #[test]
    fn far_tail_stays_finite() {
        let v = ln_normal_interval(40.0, 41.0);
        assert!(v.is_finite());
        // ln Phi(-40) from the asymptotic form dominates the interval mass.
        assert!((v - ln_normal_cdf(-40.0)).abs() < 1e-10);
        assert!(ln_normal_interval(-1e3, -999.0).is_finite());
        assert!(ln_normal_cdf(-30.0).is_finite());
        assert!((ln_normal_cdf(-24.99) - ln_normal_cdf(-25.01)).abs() < 0.6);
        let (x, y) = (ln_normal_cdf(-25.0 + 1e-9), ln_normal_cdf(-25.0 - 1e-9));
        assert!((x - y).abs() < 1e-6);
    }

    #[test]
    fn interval_partition_sums_to_one() {
        let cuts = [-30.0, -4.0, -1.0, -0.2, 0.0, 0.1, 0.8, 3.0, 9.0];
        let mut bounds = vec![f64::NEG_INFINITY];
        bounds.extend_from_slice(&cuts);
        bounds.push(f64::INFINITY);
        let total: f64 = bounds.windows(2).map(|w| log_cdf_diff(w[0], w[1], 0.37, 1.3).exp()).sum();
        assert!((total - 1.0).abs() < 1e-13);
    }

    #[test]
    fn zc_properties() {
        let n = 11;
        let seqs: Vec<_> = (0..n).map(|s| zc_sequence(n, 1, s).unwrap()).collect();
        assert_eq!(seqs[0][0], Complex64::new(1.0, 0.0));
        for a in 0..n {
            for b in 0..n {
                let ip: Complex64 = seqs[a].iter().zip(&seqs[b]).map(|(x, y)| x.conj() * y).sum();
                let want = if a == b { n as f64 } else { 0.0 };
                assert!((ip - want).norm() <= 1e-10 * n as f64);
            }
        }
        for n in [4usize, 7, 12, 16, 31] {
            let z = zc_sequence(n, 1, 0).unwrap();
            assert!(z.iter().all(|v| (v.norm() - 1.0).abs() < 1e-14));
        }
        assert!(matches!(zc_sequence(12, 4, 0), Err(Error::NonCoprimeRoot { .. })));
        assert!(zc_sequence(12, 5, 0).is_ok());
    }

    proptest::proptest! {
        #[test]
        fn interval_monotone(lo in -40.0f64..40.0, w1 in 1e-6f64..5.0, w2 in 1e-6f64..5.0, mu in -3.0f64..3.0) {
            let hi = lo + w1;
            let v = log_cdf_diff(lo, hi, mu, 0.7);
            proptest::prop_assert!(v.is_finite());
            proptest::prop_assert!(log_cdf_diff(lo, hi + w2, mu, 0.7) >= v);
            proptest::prop_assert!(log_cdf_diff(lo - w2, hi, mu, 0.7) >= v);
        }

        #[test]
        fn real_form_is_homomorphism(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut c = || Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
            let x = DMatrix::from_fn(3, 2, |_, _| c());
            let y = DMatrix::from_fn(2, 4, |_, _| c());
            let lhs = real_form_mat(&(&x * &y));
            let rhs = real_form_mat(&x) * real_form_mat(&y);
            proptest::prop_assert!((lhs - rhs).amax() < 1e-12);
        }

        #[test]
        fn zc_shifts_orthogonal(n in 2usize..40, a in 0usize..40, b in 0usize..40) {
            let (a, b) = (a % n, b % n);
            proptest::prop_assume!(a != b);
            let za = zc_sequence(n, 1, a).unwrap();
            let zb = zc_sequence(n, 1, b).unwrap();
            let ip: Complex64 = za.iter().zip(&zb).map(|(x, y)| x.conj() * y).sum();
            proptest::prop_assert!(ip.norm() <= 1e-10 * n as f64);
        }
    }
}
