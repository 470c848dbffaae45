use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

use super::gains::map_path_gains;
use super::grid::{GridDictionary, GridSpec};
use super::likelihood::{loglik_mean, mean_of};
use super::objective::{argmax_first, EnergyModel, ObjectiveKind, SelectionContext};
use super::refine::{refine, RefinementConfig};
use crate::channel::{synthesize, ArrayModel, Channel, PathParams};
use crate::config::SystemConfig;
use crate::error::Result;
use crate::frontend::{QuantizedObservation, SensingOperator, Subset};

/// When the outer loop stops.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stopping {
    /// Stop at the first iteration whose validation log-likelihood does not improve.
    CrossValidation,
    /// Run exactly this many iterations (unless a duplicate atom shows up).
    Fixed(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorConfig {
    /// Newton refinement of each selected atom; off gives the on-grid variant.
    pub refine: bool,
    pub model: ArrayModel,
    pub objective: ObjectiveKind,
    pub stopping: Stopping,
    /// Safety cap on outer iterations (further capped by a quarter of the
    /// estimation samples).
    pub max_paths: Option<usize>,
    pub refinement: RefinementConfig,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            refine: true,
            model: ArrayModel::SpatialWideband,
            objective: ObjectiveKind::Normalized,
            stopping: Stopping::CrossValidation,
            max_paths: None,
            refinement: RefinementConfig::default(),
        }
    }
}

impl EstimatorConfig {
    pub fn gridless() -> Self {
        Self::default()
    }

    pub fn on_grid() -> Self {
        Self { refine: false, ..Self::default() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatedPath {
    pub theta: f64,
    /// Seconds.
    pub tau: f64,
    pub user: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    ValidationDecrease,
    DuplicateAtom,
    IterationCap,
    FixedIterations,
}

/// Snapshot after one outer iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub paths: Vec<EstimatedPath>,
    pub gains: Vec<Complex64>,
    pub cv_score: f64,
    /// Estimation log-likelihood minus the squared gain norm.
    pub log_posterior: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateState {
    pub paths: Vec<EstimatedPath>,
    pub gains: Vec<Complex64>,
    /// Validation score of every completed iteration, including a final
    /// rejected one.
    pub cv_history: Vec<f64>,
    pub trace: Vec<IterationRecord>,
    /// Outer iterations executed.
    pub iterations: usize,
    pub stop: StopReason,
    #[serde(skip)]
    pub residual_mean: Vec<Complex64>,
}

impl EstimateState {
    fn empty(rows: usize) -> Self {
        Self {
            paths: Vec::new(),
            gains: Vec::new(),
            cv_history: Vec::new(),
            trace: Vec::new(),
            iterations: 0,
            stop: StopReason::IterationCap,
            residual_mean: vec![Complex64::new(0.0, 0.0); rows],
        }
    }

    /// Paths assigned to each of `users` users.
    pub fn paths_per_user(&self, users: usize) -> Vec<usize> {
        let mut out = vec![0; users];
        for p in &self.paths {
            if p.user < users {
                out[p.user] += 1;
            }
        }
        out
    }
}

/// Validation log-likelihood of a state; minus infinity with no paths.
pub fn cv_score(state: &EstimateState, obs: &QuantizedObservation) -> f64 {
    if state.paths.is_empty() {
        return f64::NEG_INFINITY;
    }
    loglik_mean(&state.residual_mean, obs, Subset::Validation)
}

/// Greedy estimator bound to one observation.
pub struct Estimator<'a> {
    op: &'a SensingOperator,
    obs: &'a QuantizedObservation,
    dict: Arc<GridDictionary>,
    energy: EnergyModel,
    grid_energies: Vec<f64>,
    cfg: EstimatorConfig,
}

impl<'a> Estimator<'a> {
    /// `dict` may be shared between runs with the same system and grid.
    pub fn new(
        op: &'a SensingOperator,
        obs: &'a QuantizedObservation,
        dict: Arc<GridDictionary>,
        cfg: EstimatorConfig,
    ) -> Self {
        let energy = EnergyModel::new(op, &obs.partition.estimation_frames());
        let grid_energies = match cfg.objective {
            ObjectiveKind::Normalized => energy.grid_energies(&dict, op.users),
            ObjectiveKind::Literal => Vec::new(),
        };
        Self { op, obs, dict, energy, grid_energies, cfg }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.dict.grid
    }

    /// Selection context for the residual left by `mean`.
    pub fn context(&self, mean: &[Complex64]) -> SelectionContext<'_> {
        SelectionContext::new(
            self.op,
            self.obs,
            mean,
            &self.dict.geometry,
            self.dict.model,
            self.cfg.objective,
            &self.energy,
        )
    }

    /// Best grid point `(theta, u, k)` for the residual left by `mean`.
    pub fn grid_select(&self, ctx: &SelectionContext<'_>) -> (f64, f64, usize) {
        let values = ctx.grid_values(&self.dict, &self.grid_energies);
        let (k, ia, id) = self.dict.grid.unflatten(argmax_first(&values));
        (self.dict.grid.angles[ia], self.dict.grid.delays[id], k)
    }

    fn atom(&self, theta: f64, u: f64, k: usize) -> Vec<Complex64> {
        self.op.atom(&self.dict.geometry, self.dict.model, theta, u, k)
    }

    pub fn run(&self) -> Result<EstimateState> {
        let rows = self.obs.len();
        let ts = self.dict.geometry.sampling_period;
        let quarter = self.obs.partition.count(Subset::Estimation) / 4;
        let mut cap = self.cfg.max_paths.unwrap_or(usize::MAX).min(quarter).max(1);
        if let Stopping::Fixed(n) = self.cfg.stopping {
            cap = n;
        }

        let mut accepted = EstimateState::empty(rows);
        let mut best_cv = f64::NEG_INFINITY;
        let mut atoms: Vec<Vec<Complex64>> = Vec::new();
        let mut coords: Vec<(f64, f64, usize)> = Vec::new();
        let mut gains: Vec<Complex64> = Vec::new();
        let mut mean = vec![Complex64::new(0.0, 0.0); rows];
        let mut trace = Vec::new();
        let mut cv_history = Vec::new();
        let mut stop = StopReason::IterationCap;

        for _ in 0..cap {
            let ctx = self.context(&mean);
            let (mut theta, mut u, k) = self.grid_select(&ctx);
            if self.cfg.refine {
                let r = refine(&ctx, &self.dict.grid, theta, u, k, &self.cfg.refinement);
                theta = r.theta;
                u = r.u;
            }
            if coords.iter().any(|&(t, uu, kk)| kk == k && (t - theta).abs() <= 1e-9 && (uu - u).abs() <= 1e-9) {
                stop = StopReason::DuplicateAtom;
                break;
            }
            atoms.push(self.atom(theta, u, k));
            coords.push((theta, u, k));
            let mut warm = gains.clone();
            warm.push(Complex64::new(0.0, 0.0));
            let fit = map_path_gains(&atoms, self.obs, Subset::Estimation, Some(&warm), &self.cfg.refinement)?;
            gains = fit.gains;
            mean = mean_of(&atoms, &gains, rows);
            let cv = loglik_mean(&mean, self.obs, Subset::Validation);
            let paths: Vec<EstimatedPath> =
                coords.iter().map(|&(theta, u, user)| EstimatedPath { theta, tau: u * ts, user }).collect();
            trace.push(IterationRecord {
                paths: paths.clone(),
                gains: gains.clone(),
                cv_score: cv,
                log_posterior: fit.log_posterior,
            });
            cv_history.push(cv);

            match self.cfg.stopping {
                Stopping::Fixed(_) => {
                    stop = StopReason::FixedIterations;
                    accepted.paths = paths;
                    accepted.gains = gains.clone();
                    accepted.residual_mean = mean.clone();
                }
                Stopping::CrossValidation => {
                    if cv > best_cv {
                        best_cv = cv;
                        accepted.paths = paths;
                        accepted.gains = gains.clone();
                        accepted.residual_mean = mean.clone();
                    } else {
                        stop = StopReason::ValidationDecrease;
                        break;
                    }
                }
            }
        }
        accepted.iterations = trace.len();
        accepted.trace = trace;
        accepted.cv_history = cv_history;
        accepted.stop = stop;
        Ok(accepted)
    }
}

/// Gridless estimator: grid search, Newton refinement, gain refit, and
/// validation-based stopping.
pub fn nfcfgs_cv(
    op: &SensingOperator,
    obs: &QuantizedObservation,
    cfg: &SystemConfig,
    grid: &GridSpec,
    rcfg: &RefinementConfig,
) -> Result<EstimateState> {
    let dict = Arc::new(GridDictionary::new(cfg, grid.clone(), ArrayModel::SpatialWideband));
    let ecfg = EstimatorConfig {
        refinement: rcfg.clone(),
        max_paths: Some(default_path_cap(cfg)),
        ..EstimatorConfig::gridless()
    };
    Estimator::new(op, obs, dict, ecfg).run()
}

/// On-grid variant of [`nfcfgs_cv`] with the refinement step skipped.
pub fn fcfgs_cv(
    op: &SensingOperator,
    obs: &QuantizedObservation,
    cfg: &SystemConfig,
    grid: &GridSpec,
    rcfg: &RefinementConfig,
) -> Result<EstimateState> {
    let dict = Arc::new(GridDictionary::new(cfg, grid.clone(), ArrayModel::SpatialWideband));
    let ecfg = EstimatorConfig {
        refinement: rcfg.clone(),
        max_paths: Some(default_path_cap(cfg)),
        ..EstimatorConfig::on_grid()
    };
    Estimator::new(op, obs, dict, ecfg).run()
}

/// Four paths per planted path, at least four.
pub fn default_path_cap(cfg: &SystemConfig) -> usize {
    (4 * cfg.total_paths()).max(4)
}

/// Channel implied by an estimate under `model`.
pub fn reconstruct_h(state: &EstimateState, cfg: &SystemConfig, model: ArrayModel) -> Channel {
    let paths: Vec<PathParams> = state
        .paths
        .iter()
        .zip(&state.gains)
        .map(|(p, g)| PathParams { gain: *g, theta: p.theta, tau: p.tau, user: p.user })
        .collect();
    synthesize(&paths, cfg, model)
}
