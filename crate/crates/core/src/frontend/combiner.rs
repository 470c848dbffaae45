use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::numerics::zc_sequence;

/// Analog combiners, one `M x R` matrix per frame.
#[derive(Clone, Debug, PartialEq)]
pub struct CombinerSchedule {
    pub antennas: usize,
    pub rf_chains: usize,
    /// Shift of the first column of frame 0.
    pub offset: usize,
    pub frames: Vec<DMatrix<Complex64>>,
}

/// Columns are length-`M` Zadoff-Chu shifts scaled by `1/sqrt(M)`. Frame `t`
/// uses shifts `offset + tR, ..., offset + tR + R - 1` (mod `M`), so
/// consecutive frames sweep the whole shift basis.
pub fn build_combiners<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> Result<CombinerSchedule> {
    let (m, r) = (cfg.antennas, cfg.rf_chains);
    if r == 0 || r > m {
        return Err(Error::InvalidConfig(format!("{r} RF chains for {m} antennas")));
    }
    let offset = rng.random_range(0..m);
    let scale = 1.0 / (m as f64).sqrt();
    let frames = (0..cfg.frames)
        .map(|t| {
            let mut w = DMatrix::zeros(m, r);
            for col in 0..r {
                let shift = (offset + t * r + col) % m;
                let z = zc_sequence(m, 1, shift)?;
                for (i, v) in z.into_iter().enumerate() {
                    w[(i, col)] = v * scale;
                }
            }
            Ok(w)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CombinerSchedule { antennas: m, rf_chains: r, offset, frames })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn columns_are_orthonormal() {
        for (m, r) in [(8, 8), (16, 4), (12, 5), (7, 3), (1, 1)] {
            let cfg = SystemConfig { antennas: m, rf_chains: r, frames: 6, ..Default::default() };
            let c = build_combiners(&cfg, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
            for w in &c.frames {
                let g = w.adjoint() * w;
                let e = (g - DMatrix::<Complex64>::identity(r, r)).map(|v| v.norm()).max();
                assert!(e <= 1e-10);
            }
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let cfg = SystemConfig::default();
        let a = build_combiners(&cfg, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let b = build_combiners(&cfg, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.frames[0], a.frames[1]);
    }

    #[test]
    fn full_cycle_covers_array() {
        let cfg = SystemConfig { antennas: 16, rf_chains: 4, frames: 4, ..Default::default() };
        let c = build_combiners(&cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let mut p = DMatrix::<Complex64>::zeros(16, 16);
        for w in &c.frames {
            p += w * w.adjoint();
        }
        let e = (p - DMatrix::<Complex64>::identity(16, 16)).map(|v| v.norm()).max();
        assert!(e < 1e-10);
    }
}
