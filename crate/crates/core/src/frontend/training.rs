use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::channel::{tap_support, TapSupport};
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::numerics::zc_sequence;

/// Per-user training symbols repeated in every frame, with cyclic guards.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingSchedule {
    pub frame_len: usize,
    pub prefix_len: usize,
    pub suffix_len: usize,
    pub frames: usize,
    pub support: TapSupport,
    pub users: usize,
    pub powers: Vec<f64>,
    /// One frame body per user, already scaled to the user's power.
    pub sequences: Vec<Vec<Complex64>>,
}

impl TrainingSchedule {
    /// Symbol of user `k` at body offset `i`; offsets outside the body wrap
    /// around, which is what the cyclic prefix and suffix transmit.
    pub fn symbol(&self, k: usize, i: i64) -> Complex64 {
        self.sequences[k][i.rem_euclid(self.frame_len as i64) as usize]
    }

    /// `N_f x |D|K` matrix whose row `n` stacks the symbols seen at instant
    /// `n` for every (tap, user) column.
    pub fn frame_matrix(&self) -> DMatrix<Complex64> {
        let k_users = self.users;
        DMatrix::from_fn(self.frame_len, self.support.len() * k_users, |n, c| {
            let (j, k) = (c / k_users, c % k_users);
            let d = self.support.lo + j as i64;
            self.symbol(k, n as i64 - d)
        })
    }

    pub fn frame_span(&self) -> usize {
        self.prefix_len + self.frame_len + self.suffix_len
    }

    /// Total number of training instants that are observed.
    pub fn observed_len(&self) -> usize {
        self.frames * self.frame_len
    }

    /// Complete transmitted stream of user `k`: prefix, body, suffix, per frame.
    pub fn transmit_stream(&self, k: usize) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(self.frames * self.frame_span());
        for _ in 0..self.frames {
            let lo = -(self.prefix_len as i64);
            let hi = (self.frame_len + self.suffix_len) as i64;
            out.extend((lo..hi).map(|i| self.symbol(k, i)));
        }
        out
    }
}

pub fn design_training(cfg: &SystemConfig) -> Result<TrainingSchedule> {
    let support = tap_support(cfg);
    let columns = support.len() * cfg.users;
    if cfg.frame_len < columns {
        return Err(Error::TrainingInfeasible(format!(
            "frame length {} is shorter than {} tap-user columns",
            cfg.frame_len, columns
        )));
    }
    let prefix_min = support.up.max(0) as usize;
    let suffix_min = support.lo.unsigned_abs() as usize;
    let prefix_len = cfg.prefix_len.unwrap_or(prefix_min);
    let suffix_len = cfg.suffix_len.unwrap_or(suffix_min);
    if prefix_len < prefix_min || suffix_len < suffix_min {
        return Err(Error::TrainingInfeasible(format!(
            "guards ({prefix_len}, {suffix_len}) shorter than required ({prefix_min}, {suffix_min})"
        )));
    }
    let powers = cfg.user_powers();
    let sequences = (0..cfg.users)
        .map(|k| {
            let z = zc_sequence(cfg.frame_len, cfg.zc_root, (support.len() * k) % cfg.frame_len)?;
            let a = powers[k].sqrt();
            Ok(z.into_iter().map(|v| v * a).collect())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TrainingSchedule {
        frame_len: cfg.frame_len,
        prefix_len,
        suffix_len,
        frames: cfg.frames,
        support,
        users: cfg.users,
        powers,
        sequences,
    })
}
