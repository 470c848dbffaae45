use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

use super::grid::GridSpec;
use super::objective::{ObjectiveJet, SelectionContext};

/// Iteration controls for the continuous refinement and the gain refit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefinementConfig {
    /// Initial step multiplier before backtracking.
    pub step_size: f64,
    pub max_halvings: usize,
    pub max_iterations: usize,
    /// Stop when the relative objective gain of an iteration falls below this.
    pub tolerance: f64,
    /// Largest step, in grid cells.
    pub trust_radius: f64,
    pub gain_tolerance: f64,
    /// Gain refit iteration budget; the solver errors out after ten times this.
    pub gain_iterations: usize,
}

impl Default for RefinementConfig {
    fn default() -> Self {
        Self {
            step_size: 1.0,
            max_halvings: 20,
            max_iterations: 10,
            tolerance: 1e-8,
            trust_radius: 1.0,
            gain_tolerance: 1e-8,
            gain_iterations: 50,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    Newton,
    Gradient,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefineOutcome {
    pub theta: f64,
    /// Normalized delay `tau / T_s`.
    pub u: f64,
    pub start_value: f64,
    pub value: f64,
    pub steps: Vec<StepKind>,
}

/// Whether a symmetric 2x2 matrix is negative definite with a margin, and
/// not too badly conditioned to invert.
pub fn negative_definite(h: [[f64; 2]; 2]) -> bool {
    let (a, b, d) = (h[0][0], 0.5 * (h[0][1] + h[1][0]), h[1][1]);
    let mean = 0.5 * (a + d);
    let rad = (0.25 * (a - d) * (a - d) + b * b).sqrt();
    let (l1, l2) = (mean - rad, mean + rad);
    let scale = a.abs() + d.abs();
    if scale == 0.0 {
        return false;
    }
    l2 < -1e-12 * scale && l1.abs() <= 1e12 * l2.abs()
}

fn clamp_box(theta: f64, u: f64, max_u: f64) -> (f64, f64) {
    (theta.clamp(-FRAC_PI_2, FRAC_PI_2), u.clamp(0.0, max_u))
}

/// Newton ascent on the selection objective from `(theta, u)`, with
/// backtracking and a box clamp. Coordinates are scaled by the grid spacing.
pub fn refine(
    ctx: &SelectionContext<'_>,
    grid: &GridSpec,
    theta: f64,
    u: f64,
    k: usize,
    cfg: &RefinementConfig,
) -> RefineOutcome {
    let (ha, hd) = (grid.angle_step(), grid.delay_step());
    let max_u = grid.max_delay();
    let delay_free = max_u > 0.0;
    let (mut theta, mut u) = clamp_box(theta, u, max_u);
    let mut value = ctx.value(theta, u, k);
    let start_value = value;
    let mut steps = Vec::new();
    for _ in 0..cfg.max_iterations {
        let ObjectiveJet { grad, hess, .. } = ctx.jet(theta, u, k);
        let mut g = [grad[0] * ha, grad[1] * hd];
        let mut h = [[hess[0][0] * ha * ha, hess[0][1] * ha * hd], [hess[1][0] * ha * hd, hess[1][1] * hd * hd]];
        if !delay_free {
            g[1] = 0.0;
            h[0][1] = 0.0;
            h[1][0] = 0.0;
            h[1][1] = h[0][0].min(-1.0);
        }
        let (kind, mut step) = if negative_definite(h) {
            let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
            let s0 = -(h[1][1] * g[0] - h[0][1] * g[1]) / det;
            let s1 = -(-h[1][0] * g[0] + h[0][0] * g[1]) / det;
            (StepKind::Newton, [s0, s1])
        } else {
            let gn = g[0].hypot(g[1]);
            if gn == 0.0 || !gn.is_finite() {
                break;
            }
            (StepKind::Gradient, [g[0] / gn * cfg.trust_radius, g[1] / gn * cfg.trust_radius])
        };
        let len = step[0].hypot(step[1]);
        if !len.is_finite() {
            break;
        }
        if len > cfg.trust_radius {
            step = [step[0] * cfg.trust_radius / len, step[1] * cfg.trust_radius / len];
        }
        steps.push(kind);
        let mut eta = cfg.step_size;
        let mut accepted = None;
        for _ in 0..=cfg.max_halvings {
            let (t, uu) = clamp_box(theta + eta * step[0] * ha, u + eta * step[1] * hd, max_u);
            let v = ctx.value(t, uu, k);
            if v >= value {
                accepted = Some((t, uu, v));
                break;
            }
            eta *= 0.5;
        }
        let Some((t, uu, v)) = accepted else { break };
        let gain = (v - value) / value.abs().max(1e-300);
        theta = t;
        u = uu;
        value = v;
        if gain < cfg.tolerance {
            break;
        }
    }
    RefineOutcome { theta, u, start_value, value, steps }
}
