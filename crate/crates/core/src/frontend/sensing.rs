use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_1_SQRT_2;

use super::combiner::CombinerSchedule;
use super::training::TrainingSchedule;
use crate::channel::{ArrayGeometry, ArrayModel, Channel, TapSupport};
use crate::error::{Error, Result};

/// Linear map from the channel vector to the combined, unquantized samples.
///
/// Stored in factored form: the frame training matrix and the per-frame
/// combiners. Output sample `(t, n, r)` (frame, instant, RF chain) sits at
/// index `(t N_f + n) R + r`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensingOperator {
    pub antennas: usize,
    pub users: usize,
    pub rf_chains: usize,
    pub support: TapSupport,
    pub frame_len: usize,
    /// `N_f x |D|K`.
    pub training: DMatrix<Complex64>,
    /// One `M x R` combiner per frame.
    pub combiners: Vec<DMatrix<Complex64>>,
}

pub fn assemble_sensing(
    schedule: &TrainingSchedule,
    combiners: &CombinerSchedule,
    antennas: usize,
) -> Result<SensingOperator> {
    if combiners.frames.len() != schedule.frames {
        return Err(Error::Dimension(format!(
            "{} combiner frames for {} training frames",
            combiners.frames.len(),
            schedule.frames
        )));
    }
    if combiners.antennas != antennas {
        return Err(Error::Dimension("combiner and array sizes differ".into()));
    }
    Ok(SensingOperator {
        antennas,
        users: schedule.users,
        rf_chains: combiners.rf_chains,
        support: schedule.support,
        frame_len: schedule.frame_len,
        training: schedule.frame_matrix(),
        combiners: combiners.frames.clone(),
    })
}

impl SensingOperator {
    pub fn frames(&self) -> usize {
        self.combiners.len()
    }

    pub fn rows(&self) -> usize {
        self.rf_chains * self.frame_len * self.frames()
    }

    pub fn cols(&self) -> usize {
        self.antennas * self.support.len() * self.users
    }

    /// Samples per frame.
    pub fn frame_block(&self) -> usize {
        self.rf_chains * self.frame_len
    }

    pub fn apply(&self, h: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(h.len(), self.cols(), "channel length");
        let hm = DMatrix::from_column_slice(self.antennas, self.support.len() * self.users, h);
        let x = hm * self.training.transpose();
        let mut y = Vec::with_capacity(self.rows());
        for w in &self.combiners {
            y.extend_from_slice(w.ad_mul(&x).as_slice());
        }
        y
    }

    pub fn adjoint(&self, y: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(y.len(), self.rows(), "observation length");
        let block = self.frame_block();
        let mut acc = DMatrix::<Complex64>::zeros(self.antennas, self.frame_len);
        for (t, w) in self.combiners.iter().enumerate() {
            let yt = DMatrix::from_column_slice(self.rf_chains, self.frame_len, &y[t * block..(t + 1) * block]);
            acc += w * yt;
        }
        let z = acc * self.training.map(|v| v.conj());
        z.as_slice().to_vec()
    }

    /// Column of the operator for a unit-gain path of user `k`.
    pub fn atom(&self, geom: &ArrayGeometry, model: ArrayModel, theta: f64, u: f64, k: usize) -> Vec<Complex64> {
        let m = self.antennas;
        let mut x = DMatrix::<Complex64>::zeros(m, self.frame_len);
        let mut tap = vec![Complex64::new(0.0, 0.0); m];
        for (j, d) in self.support.taps().enumerate() {
            geom.tap_into(model, theta, u, d, &mut tap);
            let col = j * self.users + k;
            for n in 0..self.frame_len {
                let s = self.training[(n, col)];
                for (i, v) in tap.iter().enumerate() {
                    x[(i, n)] += v * s;
                }
            }
        }
        let mut y = Vec::with_capacity(self.rows());
        for w in &self.combiners {
            y.extend_from_slice(w.ad_mul(&x).as_slice());
        }
        y
    }

    /// Explicit `RN x M|D|K` matrix with rows `s_n^T kron W_t^H`.
    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let (m, r, nf) = (self.antennas, self.rf_chains, self.frame_len);
        let mut a = DMatrix::zeros(self.rows(), self.cols());
        for (t, w) in self.combiners.iter().enumerate() {
            for n in 0..nf {
                for rr in 0..r {
                    let row = (t * nf + n) * r + rr;
                    for c in 0..self.training.ncols() {
                        let s = self.training[(n, c)];
                        for i in 0..m {
                            a[(row, c * m + i)] = s * w[(i, rr)].conj();
                        }
                    }
                }
            }
        }
        a
    }

    /// `sum_t W_t W_t^H` over the given frames.
    pub fn combiner_gram(&self, frames: impl Iterator<Item = usize>) -> DMatrix<Complex64> {
        let mut p = DMatrix::zeros(self.antennas, self.antennas);
        for t in frames {
            let w = &self.combiners[t];
            p += w * w.adjoint();
        }
        p
    }

    /// `|D| x |D|` Gram of user `k`'s training columns.
    pub fn training_gram(&self, k: usize) -> DMatrix<Complex64> {
        let nd = self.support.len();
        DMatrix::from_fn(nd, nd, |j, jj| {
            let (a, b) = (j * self.users + k, jj * self.users + k);
            (0..self.frame_len).map(|n| self.training[(n, a)].conj() * self.training[(n, b)]).sum()
        })
    }
}

/// `y = A h + v` with `v ~ CN(0, I)`; pass `None` for noiseless samples.
pub fn simulate_rx<R: Rng + ?Sized>(op: &SensingOperator, h: &[Complex64], rng: Option<&mut R>) -> Vec<Complex64> {
    let mut y = op.apply(h);
    if let Some(rng) = rng {
        for v in &mut y {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            *v += Complex64::new(re, im) * FRAC_1_SQRT_2;
        }
    }
    y
}

/// Time-domain reference receiver: convolves the transmitted streams
/// (guards included) with the channel taps and combines the body samples of
/// every frame. `streams[k]` holds user `k`'s full transmission.
pub fn receive_streams(
    channel: &Channel,
    streams: &[Vec<Complex64>],
    schedule: &TrainingSchedule,
    combiners: &CombinerSchedule,
) -> Vec<Complex64> {
    let m = channel.antennas;
    let span = schedule.frame_span();
    let mut y = Vec::new();
    for (t, w) in combiners.frames.iter().enumerate() {
        for n in 0..schedule.frame_len {
            let pos = (t * span + schedule.prefix_len + n) as i64;
            let mut r = vec![Complex64::new(0.0, 0.0); m];
            for (j, d) in channel.support.taps().enumerate() {
                for (k, s) in streams.iter().enumerate() {
                    let idx = pos - d;
                    if idx < 0 || idx as usize >= s.len() {
                        continue;
                    }
                    let sym = s[idx as usize];
                    for (ri, hv) in r.iter_mut().zip(channel.block(j, k)) {
                        *ri += hv * sym;
                    }
                }
            }
            for col in 0..combiners.rf_chains {
                y.push((0..m).map(|i| w[(i, col)].conj() * r[i]).sum());
            }
        }
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{build_channel, sample_paths};
    use crate::config::SystemConfig;
    use crate::frontend::{build_combiners, design_training};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup(cfg: &SystemConfig, seed: u64) -> (TrainingSchedule, CombinerSchedule, SensingOperator, Channel) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = design_training(cfg).unwrap();
        let c = build_combiners(cfg, &mut rng).unwrap();
        let op = assemble_sensing(&t, &c, cfg.antennas).unwrap();
        let ch = build_channel(&sample_paths(cfg, &mut rng), cfg);
        (t, c, op, ch)
    }

    fn small() -> SystemConfig {
        SystemConfig { antennas: 32, rf_chains: 4, frames: 5, frame_len: 13, ..Default::default() }
    }

    #[test]
    fn shapes() {
        let cfg = small();
        let (_, _, op, _) = setup(&cfg, 1);
        assert_eq!(op.rows(), 4 * 13 * 5);
        assert_eq!(op.cols(), 32 * 6 * 2);
        assert_eq!(op.to_dense().shape(), (op.rows(), op.cols()));
    }

    #[test]
    fn apply_matches_per_instant_products() {
        let cfg = small();
        let (t, c, op, ch) = setup(&cfg, 2);
        let y = op.apply(&ch.h);
        let hm = ch.taps();
        let s = t.frame_matrix();
        for (ti, w) in c.frames.iter().enumerate() {
            for n in 0..cfg.frame_len {
                let sn = s.row(n).transpose();
                let direct = w.adjoint() * (&hm * sn);
                for r in 0..cfg.rf_chains {
                    assert!((y[(ti * cfg.frame_len + n) * cfg.rf_chains + r] - direct[r]).norm() < 1e-12);
                }
            }
        }
        let dense = op.to_dense() * nalgebra::DVector::from_column_slice(&ch.h);
        for (a, b) in dense.iter().zip(&y) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn adjoint_is_conjugate_transpose() {
        let cfg = small();
        let (_, _, op, ch) = setup(&cfg, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let y: Vec<Complex64> = (0..op.rows()).map(|_| Complex64::new(rng.random(), rng.random())).collect();
        let z = op.adjoint(&y);
        let want = op.to_dense().adjoint() * nalgebra::DVector::from_column_slice(&y);
        for (a, b) in z.iter().zip(want.iter()) {
            assert!((a - b).norm() < 1e-10);
        }
        let lhs: Complex64 = op.apply(&ch.h).iter().zip(&y).map(|(a, b)| a.conj() * b).sum();
        let rhs: Complex64 = ch.h.iter().zip(&z).map(|(a, b)| a.conj() * b).sum();
        assert!((lhs - rhs).norm() < 1e-9 * lhs.norm().max(1.0));
    }

    #[test]
    fn atom_matches_channel_of_single_path() {
        let cfg = small();
        let (_, _, op, ch) = setup(&cfg, 4);
        let geom = ArrayGeometry::new(&cfg);
        let p = ch.paths[1];
        let unit = crate::channel::PathParams { gain: Complex64::new(1.0, 0.0), ..p };
        let want = op.apply(&build_channel(&[unit], &cfg).h);
        let got = op.atom(&geom, ArrayModel::SpatialWideband, p.theta, p.tau / cfg.sampling_period(), p.user);
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn scalar_rows_reduce_to_training() {
        let cfg = SystemConfig {
            antennas: 1,
            rf_chains: 1,
            users: 1,
            paths_per_user: vec![1],
            frames: 1,
            frame_len: 7,
            ..Default::default()
        };
        let (t, c, op, _) = setup(&cfg, 5);
        let a = op.to_dense();
        let w = c.frames[0][(0, 0)].conj();
        let s = t.frame_matrix();
        for n in 0..7 {
            for col in 0..s.ncols() {
                assert!((a[(n, col)] - s[(n, col)] * w).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn noiseless_is_linear_and_noise_is_white() {
        let cfg = small();
        let (_, _, op, ch) = setup(&cfg, 6);
        let y0 = simulate_rx::<ChaCha8Rng>(&op, &ch.h, None);
        assert_eq!(y0, op.apply(&ch.h));
        let h2: Vec<Complex64> = ch.h.iter().map(|v| v * Complex64::new(0.5, -2.0)).collect();
        let sum: Vec<Complex64> = ch.h.iter().zip(&h2).map(|(a, b)| a + b).collect();
        let ys = op.apply(&sum);
        let (ya, yb) = (op.apply(&ch.h), op.apply(&h2));
        for i in 0..ys.len() {
            assert!((ys[i] - ya[i] - yb[i]).norm() < 1e-11);
        }
        let zero = vec![Complex64::new(0.0, 0.0); op.cols()];
        let mut rng = ChaCha8Rng::seed_from_u64(60);
        let mut acc = (0.0, 0.0, 0usize);
        while acc.2 < 100_000 {
            for v in simulate_rx(&op, &zero, Some(&mut rng)) {
                acc.0 += v.re * v.re;
                acc.1 += v.im * v.im;
                acc.2 += 1;
            }
        }
        let n = acc.2 as f64;
        assert!((acc.0 / n - 0.5).abs() < 0.01 && (acc.1 / n - 0.5).abs() < 0.01);
        let a = simulate_rx(&op, &ch.h, Some(&mut ChaCha8Rng::seed_from_u64(8)));
        let b = simulate_rx(&op, &ch.h, Some(&mut ChaCha8Rng::seed_from_u64(8)));
        assert_eq!(a, b);
    }

    #[test]
    fn combined_noise_covariance_is_identity() {
        let cfg = SystemConfig { antennas: 8, rf_chains: 3, frames: 1, ..Default::default() };
        let (_, c, _, _) = setup(&cfg, 7);
        let w = &c.frames[0];
        let mut rng = ChaCha8Rng::seed_from_u64(70);
        let draws = 10_000;
        let mut cov = DMatrix::<Complex64>::zeros(3, 3);
        for _ in 0..draws {
            let v = nalgebra::DVector::from_fn(8, |_, _| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                Complex64::new(re, im) * FRAC_1_SQRT_2
            });
            let z = w.adjoint() * v;
            cov += &z * z.adjoint();
        }
        cov /= Complex64::new(draws as f64, 0.0);
        let e = (cov - DMatrix::<Complex64>::identity(3, 3)).map(|v| v.norm()).max();
        assert!(e < 0.05, "{e}");
    }

    #[test]
    fn time_domain_receiver_matches_operator_and_guards_isolate_frames() {
        for cfg in [
            small(),
            SystemConfig {
                antennas: 64,
                rf_chains: 8,
                frames: 4,
                frame_len: 17,
                delay_spread: 2,
                ..Default::default()
            },
        ] {
            let (t, c, op, ch) = setup(&cfg, 9);
            let streams: Vec<_> = (0..cfg.users).map(|k| t.transmit_stream(k)).collect();
            let y = receive_streams(&ch, &streams, &t, &c);
            let ya = op.apply(&ch.h);
            for (a, b) in y.iter().zip(&ya) {
                assert!((a - b).norm() < 1e-11);
            }
            // Scramble every symbol outside frame 2 and compare frame 2 bit for bit.
            let span = t.frame_span();
            let mut other = streams.clone();
            for s in &mut other {
                for (i, v) in s.iter_mut().enumerate() {
                    if i / span != 2 {
                        *v = Complex64::new(7.0 + i as f64, -3.0);
                    }
                }
            }
            let y2 = receive_streams(&ch, &other, &t, &c);
            let block = op.frame_block();
            assert_eq!(&y[2 * block..3 * block], &y2[2 * block..3 * block]);
            assert_ne!(&y[..block], &y2[..block]);
        }
    }
}
