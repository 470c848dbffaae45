use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

use crate::channel::{tap_support, ArrayGeometry, ArrayModel};
use crate::config::SystemConfig;

/// Uniform candidate grid over angle, normalized delay `tau / T_s`, and user.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub angles: Vec<f64>,
    pub delays: Vec<f64>,
    pub users: usize,
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n <= 1 || hi <= lo {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

impl GridSpec {
    /// `angle_res * M` angles over `[-pi/2, pi/2]` and `delay_res * |D|`
    /// delays over `[0, D - 1]`, endpoints included.
    pub fn with_resolution(cfg: &SystemConfig, angle_res: usize, delay_res: usize) -> Self {
        let support = tap_support(cfg);
        let max_u = cfg.delay_spread.saturating_sub(1) as f64;
        Self {
            angles: linspace(-FRAC_PI_2, FRAC_PI_2, angle_res.max(1) * cfg.antennas),
            delays: linspace(0.0, max_u, delay_res.max(1) * support.len()),
            users: cfg.users,
        }
    }

    pub fn new(cfg: &SystemConfig) -> Self {
        Self::with_resolution(cfg, cfg.angle_oversampling, cfg.delay_oversampling)
    }

    pub fn len(&self) -> usize {
        self.angles.len() * self.delays.len() * self.users
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn step(v: &[f64]) -> f64 {
        if v.len() > 1 {
            v[1] - v[0]
        } else {
            1.0
        }
    }

    pub fn angle_step(&self) -> f64 {
        Self::step(&self.angles)
    }

    pub fn delay_step(&self) -> f64 {
        Self::step(&self.delays)
    }

    pub fn max_delay(&self) -> f64 {
        *self.delays.last().unwrap_or(&0.0)
    }

    /// `(user, angle index, delay index)` of flat index `i`, in lexicographic order.
    pub fn unflatten(&self, i: usize) -> (usize, usize, usize) {
        let per_user = self.angles.len() * self.delays.len();
        let (k, r) = (i / per_user, i % per_user);
        (k, r / self.delays.len(), r % self.delays.len())
    }
}

/// Steering taps of every (angle, delay) grid point, shared by all users.
#[derive(Clone, Debug)]
pub struct GridDictionary {
    pub grid: GridSpec,
    pub model: ArrayModel,
    pub geometry: ArrayGeometry,
    taps: Vec<Complex64>,
    norms: Vec<f64>,
}

impl GridDictionary {
    pub fn new(cfg: &SystemConfig, grid: GridSpec, model: ArrayModel) -> Self {
        let geometry = ArrayGeometry::new(cfg);
        let (m, nd) = (geometry.antennas, geometry.support.len());
        let points = grid.angles.len() * grid.delays.len();
        let mut taps = vec![Complex64::new(0.0, 0.0); points * nd * m];
        let mut norms = vec![0.0; points];
        for (ia, &theta) in grid.angles.iter().enumerate() {
            for (id, &u) in grid.delays.iter().enumerate() {
                let p = ia * grid.delays.len() + id;
                let block = &mut taps[p * nd * m..(p + 1) * nd * m];
                for (j, d) in geometry.support.taps().enumerate() {
                    geometry.tap_into(model, theta, u, d, &mut block[j * m..(j + 1) * m]);
                }
                norms[p] = block.iter().map(|v| v.norm_sqr()).sum();
            }
        }
        Self { grid, model, geometry, taps, norms }
    }

    pub fn point(&self, ia: usize, id: usize) -> usize {
        ia * self.grid.delays.len() + id
    }

    /// All `|D|` taps of grid point `p`, tap after tap.
    pub fn taps(&self, p: usize) -> &[Complex64] {
        let w = self.geometry.antennas * self.geometry.support.len();
        &self.taps[p * w..(p + 1) * w]
    }

    /// Squared norm of the stacked taps of grid point `p`.
    pub fn norm_sqr(&self, p: usize) -> f64 {
        self.norms[p]
    }

    pub fn points(&self) -> usize {
        self.norms.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_sizes_follow_oversampling() {
        let cfg = SystemConfig::default();
        let g = GridSpec::with_resolution(&cfg, 2, 3);
        assert_eq!(g.angles.len(), 32);
        assert_eq!(g.delays.len(), 3 * tap_support(&cfg).len());
        assert_eq!(g.angles[0], -FRAC_PI_2);
        assert!((g.angles[31] - FRAC_PI_2).abs() < 1e-15);
        assert!((g.max_delay() - 3.0).abs() < 1e-15);
        assert_eq!(g.unflatten(g.len() - 1), (1, 31, g.delays.len() - 1));
        let one = SystemConfig { delay_spread: 1, antennas: 1, rf_chains: 1, ..Default::default() };
        assert_eq!(GridSpec::new(&one).delays, vec![0.0]);
    }
}
