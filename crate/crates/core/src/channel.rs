//! Discrete-time spatial-wideband multipath channel and its narrowband reduction.
//!
//! Tap `d` of a path seen at antenna `m` is the raised-cosine pulse sampled at
//! `d T_s` minus that antenna's propagation delay, times the carrier phase of
//! the same delay. The tap matrix is laid out tap-major then user-major, and
//! the channel vector is its column-major vectorization.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

use crate::config::SystemConfig;
use crate::numerics::{rc_pulse, rc_pulse_jet};

/// Integer tap indices `lo..=up` that carry channel energy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TapSupport {
    pub lo: i64,
    pub up: i64,
}

impl TapSupport {
    pub fn len(&self) -> usize {
        (self.up - self.lo + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.up < self.lo
    }

    pub fn taps(&self) -> impl Iterator<Item = i64> {
        self.lo..=self.up
    }

    /// Position of tap `d` inside the support.
    pub fn position(&self, d: i64) -> Option<usize> {
        (self.lo..=self.up).contains(&d).then(|| (d - self.lo) as usize)
    }
}

pub fn tap_support(cfg: &SystemConfig) -> TapSupport {
    // Guard against the ratio landing a rounding error above an integer.
    let spread = (cfg.aperture_delay_symbols() - 1e-9).ceil().max(0.0) as i64;
    TapSupport { lo: -spread, up: cfg.delay_spread as i64 - 1 + spread }
}

/// Delay of a path at antenna `m` (zero-based; antenna 0 is the reference).
pub fn propagation_delay(tau: f64, theta: f64, m: usize, cfg: &SystemConfig) -> f64 {
    tau + m as f64 * cfg.spacing() * theta.sin() / cfg.speed_of_light
}

/// Which array response the dictionary uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ArrayModel {
    /// Per-antenna pulse offsets across the aperture.
    #[default]
    SpatialWideband,
    /// Common pulse offset for all antennas, evaluated on the full tap support.
    Narrowband,
    /// Common pulse offset, taps outside `0..D` forced to zero.
    NarrowbandConventional,
}

/// Per-antenna derivatives of one steering tap with respect to the angle and
/// the normalized delay `u = tau / T_s`.
#[derive(Clone, Debug)]
pub struct TapJet {
    pub value: Vec<Complex64>,
    pub d_theta: Vec<Complex64>,
    pub d_u: Vec<Complex64>,
    pub d_theta_theta: Vec<Complex64>,
    pub d_theta_u: Vec<Complex64>,
    pub d_u_u: Vec<Complex64>,
}

impl TapJet {
    fn zeros(m: usize) -> Self {
        let z = vec![Complex64::new(0.0, 0.0); m];
        Self {
            value: z.clone(),
            d_theta: z.clone(),
            d_u: z.clone(),
            d_theta_theta: z.clone(),
            d_theta_u: z.clone(),
            d_u_u: z,
        }
    }
}

/// Array constants needed to evaluate steering taps quickly.
#[derive(Clone, Debug)]
pub struct ArrayGeometry {
    pub antennas: usize,
    pub support: TapSupport,
    pub delay_spread: usize,
    /// Inter-element delay in sampling periods (for `sin theta = 1`).
    pub delay_step: f64,
    /// Inter-element carrier phase in radians (for `sin theta = 1`).
    pub phase_step: f64,
    pub rolloff: f64,
    pub sampling_period: f64,
}

impl ArrayGeometry {
    pub fn new(cfg: &SystemConfig) -> Self {
        let d = cfg.spacing();
        Self {
            antennas: cfg.antennas,
            support: tap_support(cfg),
            delay_spread: cfg.delay_spread,
            delay_step: d / (cfg.speed_of_light * cfg.sampling_period()),
            phase_step: 2.0 * PI * cfg.carrier_hz * d / cfg.speed_of_light,
            rolloff: cfg.rolloff,
            sampling_period: cfg.sampling_period(),
        }
    }

    fn tap_active(&self, model: ArrayModel, d: i64) -> bool {
        model != ArrayModel::NarrowbandConventional || (0..self.delay_spread as i64).contains(&d)
    }

    fn pulse_offset(&self, model: ArrayModel) -> f64 {
        match model {
            ArrayModel::SpatialWideband => self.delay_step,
            _ => 0.0,
        }
    }

    /// Tap `d` of the unit-gain response at angle `theta`, normalized delay `u`.
    pub fn tap_into(&self, model: ArrayModel, theta: f64, u: f64, d: i64, out: &mut [Complex64]) {
        if !self.tap_active(model, d) {
            out.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
            return;
        }
        let s = theta.sin();
        let step = Complex64::from_polar(1.0, -self.phase_step * s);
        let mut phasor = Complex64::new(1.0, 0.0);
        let kappa = self.pulse_offset(model) * s;
        for (m, v) in out.iter_mut().enumerate().take(self.antennas) {
            let x = d as f64 - u - kappa * m as f64;
            *v = phasor * rc_pulse_jet(x, self.rolloff)[0];
            phasor *= step;
        }
    }

    pub fn tap(&self, model: ArrayModel, theta: f64, u: f64, d: i64) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.antennas];
        self.tap_into(model, theta, u, d, &mut out);
        out
    }

    /// Tap `d` and its first and second partial derivatives.
    pub fn tap_jet(&self, model: ArrayModel, theta: f64, u: f64, d: i64) -> TapJet {
        let mut jet = TapJet::zeros(self.antennas);
        if !self.tap_active(model, d) {
            return jet;
        }
        let (s, c) = theta.sin_cos();
        let off = self.pulse_offset(model);
        let j = Complex64::new(0.0, 1.0);
        for m in 0..self.antennas {
            let mf = m as f64;
            let phase = -self.phase_step * mf * s;
            let ph_t = -self.phase_step * mf * c;
            let ph_tt = self.phase_step * mf * s;
            let x = d as f64 - u - off * mf * s;
            let x_t = -off * mf * c;
            let x_tt = off * mf * s;
            let [p, p1, p2] = rc_pulse_jet(x, self.rolloff);
            let e = Complex64::from_polar(1.0, phase);
            jet.value[m] = e * p;
            jet.d_theta[m] = e * (j * ph_t * p + p1 * x_t);
            jet.d_u[m] = -e * p1;
            jet.d_theta_theta[m] =
                e * (-ph_t * ph_t * p + 2.0 * j * ph_t * p1 * x_t + j * ph_tt * p + p2 * x_t * x_t + p1 * x_tt);
            jet.d_theta_u[m] = -e * (j * ph_t * p1 + p2 * x_t);
            jet.d_u_u[m] = e * p2;
        }
        jet
    }
}

/// Spatial-wideband steering vector of tap `d` (delay in seconds).
pub fn steering_vec(theta: f64, tau: f64, d: i64, cfg: &SystemConfig) -> Vec<Complex64> {
    let g = ArrayGeometry::new(cfg);
    g.tap(ArrayModel::SpatialWideband, theta, tau / cfg.sampling_period(), d)
}

/// Conventional narrowband steering vector of tap `d`: a single pulse sample
/// shared by every antenna.
pub fn narrowband_steering_vec(theta: f64, tau: f64, d: i64, cfg: &SystemConfig) -> Vec<Complex64> {
    let g = ArrayGeometry::new(cfg);
    g.tap(ArrayModel::Narrowband, theta, tau / cfg.sampling_period(), d)
}

/// One propagation path. `gain` already includes the carrier phase of the delay.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathParams {
    pub gain: Complex64,
    pub theta: f64,
    pub tau: f64,
    pub user: usize,
}

/// Draws i.i.d. paths: CN(0,1) gains, uniform angles over the half plane and
/// uniform delays over the delay spread.
pub fn sample_paths<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> Vec<PathParams> {
    let ts = cfg.sampling_period();
    let max_delay = (cfg.delay_spread as f64 - 1.0) * ts;
    let mut out = Vec::with_capacity(cfg.total_paths());
    for (user, &count) in cfg.paths_per_user.iter().enumerate() {
        for _ in 0..count {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            let gain = Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2;
            let theta = rng.random_range(-FRAC_PI_2..=FRAC_PI_2);
            let tau = if max_delay > 0.0 { rng.random_range(0.0..=max_delay) } else { 0.0 };
            out.push(PathParams { gain, theta, tau, user });
        }
    }
    out
}

/// Channel taps for all users plus the paths that generated them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    pub antennas: usize,
    pub users: usize,
    pub support: TapSupport,
    /// Column-major vectorization of the `M x |D|K` tap matrix.
    pub h: Vec<Complex64>,
    pub paths: Vec<PathParams>,
}

impl Channel {
    pub fn zeros(antennas: usize, users: usize, support: TapSupport) -> Self {
        Self {
            antennas,
            users,
            support,
            h: vec![Complex64::new(0.0, 0.0); antennas * support.len() * users],
            paths: Vec::new(),
        }
    }

    /// Column of the tap matrix holding tap position `j` of user `k`.
    pub fn column(&self, j: usize, k: usize) -> usize {
        j * self.users + k
    }

    pub fn block(&self, j: usize, k: usize) -> &[Complex64] {
        let c = self.column(j, k) * self.antennas;
        &self.h[c..c + self.antennas]
    }

    pub fn taps(&self) -> DMatrix<Complex64> {
        DMatrix::from_column_slice(self.antennas, self.support.len() * self.users, &self.h)
    }

    pub fn energy(&self) -> f64 {
        self.h.iter().map(|v| v.norm_sqr()).sum()
    }
}

/// Superposes the responses of `paths` under `model`.
pub fn synthesize(paths: &[PathParams], cfg: &SystemConfig, model: ArrayModel) -> Channel {
    let geom = ArrayGeometry::new(cfg);
    let mut ch = Channel::zeros(cfg.antennas, cfg.users, geom.support);
    let ts = cfg.sampling_period();
    let mut buf = vec![Complex64::new(0.0, 0.0); cfg.antennas];
    for p in paths {
        for (j, d) in geom.support.taps().enumerate() {
            geom.tap_into(model, p.theta, p.tau / ts, d, &mut buf);
            let c = ch.column(j, p.user) * cfg.antennas;
            for (dst, v) in ch.h[c..c + cfg.antennas].iter_mut().zip(&buf) {
                *dst += p.gain * v;
            }
        }
    }
    ch.paths = paths.to_vec();
    ch
}

pub fn build_channel(paths: &[PathParams], cfg: &SystemConfig) -> Channel {
    synthesize(paths, cfg, ArrayModel::SpatialWideband)
}

/// Pulse value at the sampling instant of tap `d` for a path of delay `tau` at antenna `m`.
pub fn tap_pulse(tau: f64, theta: f64, m: usize, d: i64, cfg: &SystemConfig) -> f64 {
    rc_pulse(
        d as f64 * cfg.sampling_period() - propagation_delay(tau, theta, m, cfg),
        cfg.sampling_period(),
        cfg.rolloff,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg(m: usize, d: usize) -> SystemConfig {
        SystemConfig {
            antennas: m,
            delay_spread: d,
            users: 1,
            paths_per_user: vec![1],
            rf_chains: 1,
            ..Default::default()
        }
    }

    #[test]
    fn support_examples() {
        assert_eq!(tap_support(&cfg(1, 4)), TapSupport { lo: 0, up: 3 });
        let s = tap_support(&cfg(32, 4));
        assert_eq!((s.lo, s.up, s.len()), (-1, 4, 6));
        let s = tap_support(&cfg(256, 2));
        assert_eq!((s.lo, s.up, s.len()), (-3, 4, 8));
        for m in [1, 2, 16, 64, 100, 128, 400] {
            let c = cfg(m, 3);
            let n = c.aperture_delay_symbols().ceil() as usize;
            assert_eq!(tap_support(&c).len(), 3 + 2 * n);
        }
    }

    #[test]
    fn delay_examples() {
        let c = cfg(4, 2);
        assert_eq!(propagation_delay(1e-9, 0.7, 0, &c), 1e-9);
        assert_eq!(propagation_delay(1e-9, 0.0, 3, &c), 1e-9);
        let dt = propagation_delay(0.0, FRAC_PI_2, 1, &c);
        assert!((dt - 1.0 / (2.0 * c.carrier_hz)).abs() < 1e-18, "{dt}");
        assert!((dt - 17.86e-12).abs() < 0.01e-12);
    }

    #[test]
    fn steering_matches_scalar_formula() {
        let c = cfg(24, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let theta = rng.random_range(-FRAC_PI_2..FRAC_PI_2);
            let tau = rng.random_range(0.0..2.0) * c.sampling_period();
            let d = rng.random_range(-1i64..=3);
            let v = steering_vec(theta, tau, d, &c);
            for (m, e) in v.iter().enumerate() {
                let phase = -2.0 * PI * c.carrier_hz * m as f64 * c.spacing() * theta.sin() / c.speed_of_light;
                let want = Complex64::from_polar(1.0, phase) * tap_pulse(tau, theta, m, d, &c);
                assert!((e - want).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn boresight_and_single_antenna() {
        let c = cfg(8, 4);
        let tau = 1.3 * c.sampling_period();
        for d in 0..4 {
            let v = steering_vec(0.0, tau, d, &c);
            let p = rc_pulse(d as f64 * c.sampling_period() - tau, c.sampling_period(), 0.35);
            assert!(v.iter().all(|e| (e - p).norm() < 1e-15));
            assert_eq!(v, narrowband_steering_vec(0.0, tau, d, &c));
        }
        let c1 = cfg(1, 4);
        assert_eq!(steering_vec(0.9, tau, 2, &c1), narrowband_steering_vec(0.9, tau, 2, &c1));
    }

    #[test]
    fn mismatch_grows_with_antenna_index() {
        let c = cfg(64, 4);
        let tau = 1.5 * c.sampling_period();
        let a = steering_vec(PI / 3.0, tau, 1, &c);
        let b = narrowband_steering_vec(PI / 3.0, tau, 1, &c);
        let diff: Vec<f64> = a.iter().zip(&b).map(|(x, y)| (x - y).norm()).collect();
        assert_eq!(diff[0], 0.0);
        assert!(diff[8] < diff[32] && diff[32] < diff[63]);
    }

    #[test]
    fn narrowband_limit() {
        let mut c = cfg(16, 3);
        // Shrink the aperture delay below a hundredth of a symbol.
        c.bandwidth_hz = 0.009 / ((c.antennas - 1) as f64 * c.spacing() / c.speed_of_light);
        assert!(c.aperture_delay_symbols() < 0.01);
        // The ceiling still adds one guard tap on each side for any nonzero aperture.
        assert_eq!(tap_support(&c), TapSupport { lo: -1, up: 3 });
        let tau = 0.8 * c.sampling_period();
        let (mut err, mut nrm) = (0.0, 0.0);
        for d in 0..3 {
            let a = steering_vec(1.1, tau, d, &c);
            let b = narrowband_steering_vec(1.1, tau, d, &c);
            err += a.iter().zip(&b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>();
            nrm += b.iter().map(|x| x.norm_sqr()).sum::<f64>();
        }
        assert!(err.sqrt() <= 1e-2 * nrm.sqrt(), "{}", (err / nrm).sqrt());
    }

    #[test]
    fn mirrored_angle_negates_phase() {
        let c = cfg(12, 2);
        let tau = 0.4 * c.sampling_period();
        let a = steering_vec(0.6, tau, 1, &c);
        let b = steering_vec(-0.6, tau, 1, &c);
        for m in 0..12 {
            let pa = tap_pulse(tau, 0.6, m, 1, &c);
            let pb = tap_pulse(tau, -0.6, m, 1, &c);
            let (ua, ub) = (a[m] / pa, b[m] / pb);
            assert!((ua.norm() - 1.0).abs() < 1e-12);
            assert!((ub - ua.conj()).norm() < 1e-12);
        }
    }

    #[test]
    fn sampling_is_deterministic_and_unbiased() {
        let c = SystemConfig { users: 1, paths_per_user: vec![100_000], ..Default::default() };
        let a = sample_paths(&c, &mut ChaCha8Rng::seed_from_u64(5));
        let b = sample_paths(&c, &mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(a, b);
        let p = a.iter().map(|p| p.gain.norm_sqr()).sum::<f64>() / a.len() as f64;
        assert!((0.98..=1.02).contains(&p), "{p}");
        assert!(a.iter().all(|p| p.theta.abs() <= FRAC_PI_2));
        assert!(a.iter().all(|p| p.tau >= 0.0 && p.tau <= 3.0 * c.sampling_period()));
        let none = SystemConfig { paths_per_user: vec![0, 0], ..Default::default() };
        assert!(sample_paths(&none, &mut ChaCha8Rng::seed_from_u64(1)).is_empty());
    }

    #[test]
    fn channel_structure() {
        let c = SystemConfig { antennas: 8, users: 2, paths_per_user: vec![2, 1], ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let paths = sample_paths(&c, &mut rng);
        let ch = build_channel(&paths, &c);
        let a = build_channel(&paths[..1], &c);
        let b = build_channel(&paths[1..], &c);
        for i in 0..ch.h.len() {
            assert!((ch.h[i] - a.h[i] - b.h[i]).norm() < 1e-14);
        }
        assert_eq!(build_channel(&[], &c).energy(), 0.0);
        // Single path: stacked steering vectors in the user's columns only.
        let p = paths[2];
        let one = build_channel(&[p], &c);
        for (j, d) in one.support.taps().enumerate() {
            let sv = steering_vec(p.theta, p.tau, d, &c);
            for (m, s) in sv.iter().enumerate() {
                assert!((one.block(j, 1)[m] - p.gain * s).norm() < 1e-14);
                assert_eq!(one.block(j, 0)[m], Complex64::new(0.0, 0.0));
            }
        }
        let t = one.taps();
        assert_eq!(t.shape(), (8, one.support.len() * 2));
    }

    #[test]
    fn jet_matches_differences() {
        let c = cfg(20, 3);
        let g = ArrayGeometry::new(&c);
        let h = 1e-6;
        for model in [ArrayModel::SpatialWideband, ArrayModel::Narrowband] {
            for &(theta, u, d) in &[(0.3, 0.7, 1i64), (-1.2, 1.9, 2), (0.05, 0.0, 0), (1.4, 1.2, -1)] {
                let jet = g.tap_jet(model, theta, u, d);
                let tp = g.tap_jet(model, theta + h, u, d);
                let tm = g.tap_jet(model, theta - h, u, d);
                let up = g.tap_jet(model, theta, u + h, d);
                let um = g.tap_jet(model, theta, u - h, d);
                let scale = 1.0 + g.phase_step * 20.0;
                for m in 0..20 {
                    let fd = |a: &[Complex64], b: &[Complex64]| (a[m] - b[m]) / (2.0 * h);
                    assert!((jet.d_theta[m] - fd(&tp.value, &tm.value)).norm() < 1e-6 * scale);
                    assert!((jet.d_u[m] - fd(&up.value, &um.value)).norm() < 1e-6);
                    assert!((jet.d_theta_theta[m] - fd(&tp.d_theta, &tm.d_theta)).norm() < 1e-5 * scale * scale);
                    assert!((jet.d_theta_u[m] - fd(&up.d_theta, &um.d_theta)).norm() < 1e-5 * scale);
                    assert!((jet.d_u_u[m] - fd(&up.d_u, &um.d_u)).norm() < 1e-6);
                    assert!((jet.value[m] - g.tap(model, theta, u, d)[m]).norm() < 1e-12);
                }
            }
        }
    }

    // Received samples from a continuous-time convolution of the symbol stream
    // with each path's delayed pulse, evaluated on an 8x oversampled time grid
    // and decimated to the symbol instants.
    #[test]
    fn taps_match_continuous_time_convolution() {
        let c = SystemConfig { antennas: 32, users: 1, paths_per_user: vec![3], delay_spread: 6, ..Default::default() };
        let ts = c.sampling_period();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let paths = sample_paths(&c, &mut rng);
        let ch = build_channel(&paths, &c);
        let n_sym = 400;
        let sym: Vec<Complex64> =
            (0..n_sym).map(|_| Complex64::from_polar(1.0, rng.random_range(0.0..2.0 * PI))).collect();
        let os = 8;
        let (mut err, mut energy) = (0.0, 0.0);
        for fine in (100 * os..300 * os).step_by(os) {
            let t = fine as f64 * ts / os as f64;
            let n = fine / os;
            for m in 0..c.antennas {
                let mut oracle = Complex64::new(0.0, 0.0);
                for p in &paths {
                    let tm = propagation_delay(p.tau, p.theta, m, &c);
                    let carrier = Complex64::from_polar(1.0, -2.0 * PI * c.carrier_hz * (tm - p.tau));
                    for (i, s) in sym.iter().enumerate() {
                        oracle += p.gain * carrier * s * rc_pulse(t - i as f64 * ts - tm, ts, c.rolloff);
                    }
                }
                let mut model = Complex64::new(0.0, 0.0);
                for (j, d) in ch.support.taps().enumerate() {
                    model += ch.block(j, 0)[m] * sym[(n as i64 - d) as usize];
                }
                err += (oracle - model).norm_sqr();
                energy += oracle.norm_sqr();
            }
        }
        let rel = err / energy;
        assert!(rel <= 0.02, "relative error {rel}");
    }
}
