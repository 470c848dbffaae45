use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grid::GridDictionary;
use super::likelihood::score_curvature;
use crate::channel::{ArrayGeometry, ArrayModel, TapJet};
use crate::frontend::{QuantizedObservation, SensingOperator, Subset};

/// Form of the atom-selection score.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveKind {
    /// Squared norm of the likelihood gradient with respect to a new gain at zero.
    Literal,
    /// The same score divided by the atom's energy on the estimation samples.
    #[default]
    Normalized,
}

/// Value, gradient and Hessian in `(theta, u)` with `u = tau / T_s`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObjectiveJet {
    pub value: f64,
    pub grad: [f64; 2],
    pub hess: [[f64; 2]; 2],
}

#[derive(Clone, Debug)]
enum GramForm {
    Scaled(f64),
    Full(DMatrix<Complex64>),
}

impl GramForm {
    fn detect(m: DMatrix<Complex64>) -> Self {
        let n = m.nrows();
        let d0 = m[(0, 0)].re;
        let scale = m.iter().map(|v| v.norm()).fold(0.0, f64::max).max(1e-300);
        let scaled = (0..n).all(|i| {
            (0..n).all(|j| {
                let want = if i == j { d0 } else { 0.0 };
                (m[(i, j)] - want).norm() <= 1e-10 * scale
            })
        });
        if scaled {
            GramForm::Scaled(d0)
        } else {
            GramForm::Full(m)
        }
    }
}

/// Energy of a path's column restricted to the estimation samples, as a
/// quadratic form in its stacked steering taps.
#[derive(Clone, Debug)]
pub struct EnergyModel {
    antennas: usize,
    taps: usize,
    combiner: GramForm,
    training: Vec<GramForm>,
}

impl EnergyModel {
    pub fn new(op: &SensingOperator, frames: &[usize]) -> Self {
        Self {
            antennas: op.antennas,
            taps: op.support.len(),
            combiner: GramForm::detect(op.combiner_gram(frames.iter().copied())),
            training: (0..op.users).map(|k| GramForm::detect(op.training_gram(k))).collect(),
        }
    }

    /// Applies the energy form of user `k` to stacked taps `v`.
    fn apply(&self, k: usize, v: &[Complex64]) -> Vec<Complex64> {
        let m = self.antennas;
        let pv: Vec<Complex64> = match &self.combiner {
            GramForm::Scaled(p) => v.iter().map(|x| x * p).collect(),
            GramForm::Full(p) => {
                let mut out = Vec::with_capacity(v.len());
                for j in 0..self.taps {
                    let col = nalgebra::DVector::from_column_slice(&v[j * m..(j + 1) * m]);
                    out.extend((p * col).iter());
                }
                out
            }
        };
        match &self.training[k] {
            GramForm::Scaled(c) => pv.into_iter().map(|x| x * c).collect(),
            GramForm::Full(c) => {
                let mut out = vec![Complex64::new(0.0, 0.0); v.len()];
                for j in 0..self.taps {
                    for jj in 0..self.taps {
                        let w = c[(j, jj)];
                        if w == Complex64::new(0.0, 0.0) {
                            continue;
                        }
                        for i in 0..m {
                            out[j * m + i] += w * pv[jj * m + i];
                        }
                    }
                }
                out
            }
        }
    }

    pub fn energy(&self, k: usize, taps: &[Complex64]) -> f64 {
        dot(taps, &self.apply(k, taps)).re
    }

    /// Energies of every grid point for every user, flat in `(k, point)` order.
    pub fn grid_energies(&self, dict: &GridDictionary, users: usize) -> Vec<f64> {
        let points = dict.points();
        (0..users * points)
            .into_par_iter()
            .map(|i| {
                let (k, p) = (i / points, i % points);
                match (&self.combiner, &self.training[k]) {
                    (GramForm::Scaled(a), GramForm::Scaled(b)) => a * b * dict.norm_sqr(p),
                    _ => self.energy(k, dict.taps(p)),
                }
            })
            .collect()
    }
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Atom-selection score for one outer iteration: the likelihood scores at the
/// current model mean, back-projected onto the channel domain.
pub struct SelectionContext<'a> {
    pub geometry: &'a ArrayGeometry,
    pub model: ArrayModel,
    pub kind: ObjectiveKind,
    pub energy: &'a EnergyModel,
    pub users: usize,
    /// Adjoint of the sensing operator applied to the score vector.
    pub back_projection: Vec<Complex64>,
}

impl<'a> SelectionContext<'a> {
    pub fn new(
        op: &SensingOperator,
        obs: &QuantizedObservation,
        mean: &[Complex64],
        geometry: &'a ArrayGeometry,
        model: ArrayModel,
        kind: ObjectiveKind,
        energy: &'a EnergyModel,
    ) -> Self {
        let (score, _, _) = score_curvature(mean, obs, Subset::Estimation);
        Self { geometry, model, kind, energy, users: op.users, back_projection: op.adjoint(&score) }
    }

    /// Inner product of stacked taps with user `k`'s back-projected block.
    fn correlate(&self, k: usize, taps: &[Complex64]) -> Complex64 {
        let m = self.geometry.antennas;
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..self.geometry.support.len() {
            let z = &self.back_projection[(j * self.users + k) * m..(j * self.users + k + 1) * m];
            acc += dot(&taps[j * m..(j + 1) * m], z);
        }
        acc
    }

    fn stacked(&self, theta: f64, u: f64) -> Vec<Complex64> {
        let m = self.geometry.antennas;
        let mut v = vec![Complex64::new(0.0, 0.0); m * self.geometry.support.len()];
        for (j, d) in self.geometry.support.taps().enumerate() {
            self.geometry.tap_into(self.model, theta, u, d, &mut v[j * m..(j + 1) * m]);
        }
        v
    }

    pub fn value(&self, theta: f64, u: f64, k: usize) -> f64 {
        let a = self.stacked(theta, u);
        let f = self.correlate(k, &a).norm_sqr();
        match self.kind {
            ObjectiveKind::Literal => f,
            ObjectiveKind::Normalized => {
                let n = self.energy.energy(k, &a);
                if n > 1e-300 {
                    f / n
                } else {
                    0.0
                }
            }
        }
    }

    /// Objective on every grid point, flat in `(k, angle, delay)` order.
    pub fn grid_values(&self, dict: &GridDictionary, energies: &[f64]) -> Vec<f64> {
        let points = dict.points();
        (0..self.users * points)
            .into_par_iter()
            .map(|i| {
                let (k, p) = (i / points, i % points);
                let f = self.correlate(k, dict.taps(p)).norm_sqr();
                match self.kind {
                    ObjectiveKind::Literal => f,
                    ObjectiveKind::Normalized if energies[i] > 1e-300 => f / energies[i],
                    ObjectiveKind::Normalized => 0.0,
                }
            })
            .collect()
    }

    pub fn jet(&self, theta: f64, u: f64, k: usize) -> ObjectiveJet {
        let jets: Vec<TapJet> =
            self.geometry.support.taps().map(|d| self.geometry.tap_jet(self.model, theta, u, d)).collect();
        let stack = |f: fn(&TapJet) -> &Vec<Complex64>| -> Vec<Complex64> {
            jets.iter().flat_map(|j| f(j).iter().copied()).collect()
        };
        let a = stack(|j| &j.value);
        let a_t = stack(|j| &j.d_theta);
        let a_u = stack(|j| &j.d_u);
        let a_tt = stack(|j| &j.d_theta_theta);
        let a_tu = stack(|j| &j.d_theta_u);
        let a_uu = stack(|j| &j.d_u_u);

        let c = self.correlate(k, &a);
        let c_t = self.correlate(k, &a_t);
        let c_u = self.correlate(k, &a_u);
        let c_tt = self.correlate(k, &a_tt);
        let c_tu = self.correlate(k, &a_tu);
        let c_uu = self.correlate(k, &a_uu);
        let f = c.norm_sqr();
        let f_t = 2.0 * (c.conj() * c_t).re;
        let f_u = 2.0 * (c.conj() * c_u).re;
        let f_tt = 2.0 * (c_t.norm_sqr() + (c.conj() * c_tt).re);
        let f_tu = 2.0 * ((c_u.conj() * c_t).re + (c.conj() * c_tu).re);
        let f_uu = 2.0 * (c_u.norm_sqr() + (c.conj() * c_uu).re);
        if self.kind == ObjectiveKind::Literal {
            return ObjectiveJet { value: f, grad: [f_t, f_u], hess: [[f_tt, f_tu], [f_tu, f_uu]] };
        }

        let q = self.energy.apply(k, &a);
        let q_t = self.energy.apply(k, &a_t);
        let q_u = self.energy.apply(k, &a_u);
        let n = dot(&a, &q).re;
        if n <= 1e-300 {
            return ObjectiveJet { value: 0.0, grad: [0.0; 2], hess: [[0.0; 2]; 2] };
        }
        let n_t = 2.0 * dot(&a_t, &q).re;
        let n_u = 2.0 * dot(&a_u, &q).re;
        let n_tt = 2.0 * (dot(&a_tt, &q).re + dot(&a_t, &q_t).re);
        let n_tu = 2.0 * (dot(&a_tu, &q).re + dot(&a_t, &q_u).re);
        let n_uu = 2.0 * (dot(&a_uu, &q).re + dot(&a_u, &q_u).re);

        let (n2, n3) = (n * n, n * n * n);
        let second = |f_xy: f64, f_x: f64, f_y: f64, n_x: f64, n_y: f64, n_xy: f64| {
            f_xy / n - (f_x * n_y + f_y * n_x) / n2 - f * n_xy / n2 + 2.0 * f * n_x * n_y / n3
        };
        let h_tt = second(f_tt, f_t, f_t, n_t, n_t, n_tt);
        let h_tu = second(f_tu, f_t, f_u, n_t, n_u, n_tu);
        let h_uu = second(f_uu, f_u, f_u, n_u, n_u, n_uu);
        ObjectiveJet {
            value: f / n,
            grad: [(f_t * n - f * n_t) / n2, (f_u * n - f * n_u) / n2],
            hess: [[h_tt, h_tu], [h_tu, h_uu]],
        }
    }

    /// Gradient and Hessian in SI coordinates `(theta [rad], tau [s])`.
    pub fn grad_hessian(&self, theta: f64, tau: f64, k: usize) -> (f64, [f64; 2], [[f64; 2]; 2]) {
        let ts = self.geometry.sampling_period;
        let j = self.jet(theta, tau / ts, k);
        (
            j.value,
            [j.grad[0], j.grad[1] / ts],
            [[j.hess[0][0], j.hess[0][1] / ts], [j.hess[1][0] / ts, j.hess[1][1] / (ts * ts)]],
        )
    }
}

/// Index of the first maximal entry; NaN never wins.
pub fn argmax_first(values: &[f64]) -> usize {
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for (i, &v) in values.iter().enumerate() {
        if v > best_v {
            best = i;
            best_v = v;
        }
    }
    best
}
