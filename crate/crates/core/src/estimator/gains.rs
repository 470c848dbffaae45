use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::likelihood::{loglik_mean, mean_of, score_curvature};
use super::refine::RefinementConfig;
use crate::error::{Error, Result};
use crate::frontend::{QuantizedObservation, Subset};

#[derive(Clone, Debug, PartialEq)]
pub struct GainFit {
    pub gains: Vec<Complex64>,
    /// Log-likelihood minus the squared gain norm at the optimum.
    pub log_posterior: f64,
    pub iterations: usize,
}

fn posterior(atoms: &[Vec<Complex64>], x: &[Complex64], obs: &QuantizedObservation, subset: Subset) -> f64 {
    let prior: f64 = x.iter().map(|v| v.norm_sqr()).sum();
    loglik_mean(&mean_of(atoms, x, obs.len()), obs, subset) - prior
}

/// Maximizes `loglik(x) - |x|^2` over the complex gains of the given atom
/// columns by damped Newton ascent in real coordinates `[Re x; Im x]`.
pub fn map_path_gains(
    atoms: &[Vec<Complex64>],
    obs: &QuantizedObservation,
    subset: Subset,
    init: Option<&[Complex64]>,
    cfg: &RefinementConfig,
) -> Result<GainFit> {
    let p = atoms.len();
    if p == 0 {
        return Ok(GainFit {
            gains: Vec::new(),
            log_posterior: loglik_mean(&vec![Complex64::new(0.0, 0.0); obs.len()], obs, subset),
            iterations: 0,
        });
    }
    if let Some(a) = atoms.iter().find(|a| a.len() != obs.len()) {
        return Err(Error::Dimension(format!("atom of length {} for {} samples", a.len(), obs.len())));
    }
    let mut x: Vec<Complex64> = match init {
        Some(v) if v.len() == p => v.to_vec(),
        Some(v) => return Err(Error::Dimension(format!("{} initial gains for {p} atoms", v.len()))),
        None => vec![Complex64::new(0.0, 0.0); p],
    };
    let rows = obs.len();
    let cap = cfg.gain_iterations.max(1) * 10;
    let mut grad_norm = f64::INFINITY;
    for iter in 1..=cap {
        let mean = mean_of(atoms, &x, rows);
        let (score, curv, ll) = score_curvature(&mean, obs, subset);
        let value = ll - x.iter().map(|v| v.norm_sqr()).sum::<f64>();

        // Gradient in real coordinates: real form of A^H s, minus 2x.
        let mut grad = DVector::<f64>::zeros(2 * p);
        for (q, a) in atoms.iter().enumerate() {
            let c: Complex64 = a.iter().zip(&score).map(|(av, s)| av.conj() * s).sum();
            grad[q] = c.re - 2.0 * x[q].re;
            grad[p + q] = c.im - 2.0 * x[q].im;
        }
        grad_norm = grad.amax();

        // Negative Hessian: sum of -curvature * r r^T over real rows, plus 2I.
        let mut neg_h = DMatrix::<f64>::identity(2 * p, 2 * p) * 2.0;
        let mut row_re = vec![0.0; 2 * p];
        let mut row_im = vec![0.0; 2 * p];
        for n in 0..rows {
            let (w_re, w_im) = (-curv[n].re, -curv[n].im);
            if w_re == 0.0 && w_im == 0.0 {
                continue;
            }
            for (q, a) in atoms.iter().enumerate() {
                let v = a[n];
                row_re[q] = v.re;
                row_re[p + q] = -v.im;
                row_im[q] = v.im;
                row_im[p + q] = v.re;
            }
            for i in 0..2 * p {
                let (ri, ii) = (w_re * row_re[i], w_im * row_im[i]);
                for j in i..2 * p {
                    neg_h[(i, j)] += ri * row_re[j] + ii * row_im[j];
                }
            }
        }
        for i in 0..2 * p {
            for j in 0..i {
                neg_h[(i, j)] = neg_h[(j, i)];
            }
        }
        let step = match neg_h.clone().cholesky() {
            Some(ch) => ch.solve(&grad),
            None => grad.clone() * 0.5,
        };
        let decrement = grad.dot(&step);
        if !decrement.is_finite() {
            break;
        }

        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..60 {
            let cand: Vec<Complex64> = (0..p).map(|q| x[q] + t * Complex64::new(step[q], step[p + q])).collect();
            let v = posterior(atoms, &cand, obs, subset);
            if v >= value + 1e-4 * t * decrement || (v >= value && t < 1e-6) {
                x = cand;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        let scale = 1.0 + x.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let size = t * step.amax();
        if !moved || size <= cfg.gain_tolerance * scale {
            let log_posterior = posterior(atoms, &x, obs, subset);
            return Ok(GainFit { gains: x, log_posterior, iterations: iter });
        }
    }
    Err(Error::GainSolverDiverged { iterations: cap, gradient_norm: grad_norm, last: x })
}
