//! Greedy channel estimation from quantized observations.
//!
//! Each outer iteration scores every grid atom by how strongly the
//! likelihood wants a new path there, optionally polishes the winner with
//! Newton steps over the continuous angle and delay, refits all path gains
//! by concave MAP estimation, and checks the held-out log-likelihood.

mod gains;
mod greedy;
mod grid;
mod likelihood;
mod objective;
mod refine;

pub use gains::{map_path_gains, GainFit};
pub use greedy::{
    cv_score, default_path_cap, fcfgs_cv, nfcfgs_cv, reconstruct_h, EstimateState, EstimatedPath, Estimator,
    EstimatorConfig, IterationRecord, StopReason, Stopping,
};
pub use grid::{GridDictionary, GridSpec};
pub use likelihood::{loglik, loglik_mean, mean_of, score_curvature, term, NOISE_STD};
pub use objective::{argmax_first, EnergyModel, ObjectiveJet, ObjectiveKind, SelectionContext};
pub use refine::{negative_definite, refine, RefineOutcome, RefinementConfig, StepKind};
