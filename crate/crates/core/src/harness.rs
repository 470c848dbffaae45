//! Config-driven experiments: seeded end-to-end trials, sweeps over system
//! parameters, and CSV/JSON result emission.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use crate::channel::{build_channel, sample_paths, ArrayModel, Channel, PathParams};
use crate::config::{Resolution, SystemConfig};
use crate::cv_analysis::{
    concavity_probe_on, fcv_lattice, random_segments, write_lattice_csv, CvProbeConfig, LatticePoint, ProbeQuantizer,
    ProbeSample,
};
use crate::error::{Error, Result};
use crate::estimator::{
    default_path_cap, reconstruct_h, EstimateState, Estimator, EstimatorConfig, GridDictionary, GridSpec,
    ObjectiveKind, RefinementConfig, StopReason, Stopping,
};
use crate::frontend::{
    assemble_sensing, build_combiners, design_training, make_quantizer, partition_cv, quantize, signal_variance,
    simulate_rx, QuantizedObservation, SensingOperator,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    /// Gridless: grid search plus Newton refinement.
    Nfcfgs,
    /// On-grid only.
    Fcfgs,
    /// Gridless with a narrowband array dictionary.
    Narrowband,
}

impl EstimatorKind {
    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Nfcfgs => "nfcfgs",
            EstimatorKind::Fcfgs => "fcfgs",
            EstimatorKind::Narrowband => "narrowband",
        }
    }

    pub fn model(self) -> ArrayModel {
        match self {
            EstimatorKind::Narrowband => ArrayModel::Narrowband,
            _ => ArrayModel::SpatialWideband,
        }
    }

    pub fn estimator_config(self, refinement: &RefinementConfig, objective: ObjectiveKind) -> EstimatorConfig {
        EstimatorConfig {
            refine: self != EstimatorKind::Fcfgs,
            model: self.model(),
            objective,
            stopping: Stopping::CrossValidation,
            max_paths: None,
            refinement: refinement.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    #[default]
    Nmse,
    Mismatch,
    Census,
    Cvprobe,
}

/// Values swept on top of the base system. An empty axis keeps the base value.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepAxes {
    pub snr_db: Vec<f64>,
    pub adc: Vec<Resolution>,
    pub frames: Vec<usize>,
    pub rf_chains: Vec<usize>,
    /// `[angle, delay]` grid oversampling pairs.
    pub grid: Vec<[usize; 2]>,
    /// Fixed angle of arrival for every path, in radians.
    pub aoa: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub system: SystemConfig,
    pub sweep: SweepAxes,
    pub trials: usize,
    pub estimators: Vec<EstimatorKind>,
    pub master_seed: u64,
    pub objective: ObjectiveKind,
    pub refinement: RefinementConfig,
    /// Outer-iteration cap; four per planted path when absent.
    pub max_paths: Option<usize>,
    pub probe: CvProbeConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            kind: ExperimentKind::Nmse,
            system: SystemConfig::default(),
            sweep: SweepAxes::default(),
            trials: 10,
            estimators: vec![EstimatorKind::Nfcfgs],
            master_seed: 0,
            objective: ObjectiveKind::Normalized,
            refinement: RefinementConfig::default(),
            max_paths: None,
            probe: CvProbeConfig::default(),
        }
    }
}

impl ExperimentConfig {
    /// Parses JSON, or TOML when the text does not start with `{`.
    pub fn from_text(text: &str) -> Result<Self> {
        let cfg: Self =
            if text.trim_start().starts_with('{') { serde_json::from_str(text)? } else { toml::from_str(text)? };
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be at least 1".into()));
        }
        if self.kind != ExperimentKind::Cvprobe && self.estimators.is_empty() {
            return Err(Error::InvalidConfig("no estimator selected".into()));
        }
        if self.kind == ExperimentKind::Mismatch && self.sweep.aoa.is_empty() {
            return Err(Error::InvalidConfig("the mismatch experiment needs an AoA list".into()));
        }
        for p in self.points() {
            p.system.validate().map_err(|e| Error::Trial { context: p.describe(), source: Box::new(e) })?;
        }
        Ok(())
    }

    /// Cartesian product of the sweep axes, in a fixed nesting order.
    pub fn points(&self) -> Vec<SweepPoint> {
        fn axis<T: Clone>(v: &[T], base: T) -> Vec<T> {
            if v.is_empty() {
                vec![base]
            } else {
                v.to_vec()
            }
        }
        let base = &self.system;
        let aoa: Vec<Option<f64>> =
            if self.sweep.aoa.is_empty() { vec![None] } else { self.sweep.aoa.iter().map(|&a| Some(a)).collect() };
        let mut out = Vec::new();
        for &snr in &axis(&self.sweep.snr_db, base.snr_db) {
            for &adc in &axis(&self.sweep.adc, base.adc) {
                for &frames in &axis(&self.sweep.frames, base.frames) {
                    for &rf in &axis(&self.sweep.rf_chains, base.rf_chains) {
                        for &[ra, rd] in &axis(&self.sweep.grid, [base.angle_oversampling, base.delay_oversampling]) {
                            for &a in &aoa {
                                let system = SystemConfig {
                                    snr_db: snr,
                                    adc,
                                    frames,
                                    rf_chains: rf,
                                    angle_oversampling: ra,
                                    delay_oversampling: rd,
                                    ..base.clone()
                                };
                                out.push(SweepPoint { index: out.len(), system, aoa: a });
                            }
                        }
                    }
                }
            }
        }
        out
    }

    fn path_cap(&self, cfg: &SystemConfig) -> usize {
        self.max_paths.unwrap_or_else(|| default_path_cap(cfg))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub index: usize,
    pub system: SystemConfig,
    pub aoa: Option<f64>,
}

impl SweepPoint {
    pub fn describe(&self) -> String {
        let s = &self.system;
        let mut d = format!(
            "point {} (snr {} dB, adc {}, frames {}, rf {}, grid {}x{}",
            self.index, s.snr_db, s.adc, s.frames, s.rf_chains, s.angle_oversampling, s.delay_oversampling
        );
        if let Some(a) = self.aoa {
            d.push_str(&format!(", aoa {a}"));
        }
        d.push(')');
        d
    }
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of one trial; depends only on the master seed, point and trial index.
pub fn trial_seed(master: u64, point: usize, trial: usize) -> u64 {
    mix(mix(mix(master) ^ point as u64) ^ trial as u64)
}

/// Everything one trial observes: channel, sensing operator and quantized samples.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub cfg: SystemConfig,
    pub channel: Channel,
    pub op: SensingOperator,
    pub obs: QuantizedObservation,
}

impl Scenario {
    /// Draws paths, combiners and noise from `rng`, in that order. With
    /// `aoa`, every path arrives from that angle.
    pub fn draw(cfg: &SystemConfig, aoa: Option<f64>, rng: &mut ChaCha8Rng) -> Result<Self> {
        let mut paths = sample_paths(cfg, &mut *rng);
        if let Some(a) = aoa {
            paths.iter_mut().for_each(|p| p.theta = a);
        }
        Self::with_paths(cfg, paths, true, rng)
    }

    pub fn with_paths(cfg: &SystemConfig, paths: Vec<PathParams>, noisy: bool, rng: &mut ChaCha8Rng) -> Result<Self> {
        cfg.validate()?;
        let schedule = design_training(cfg)?;
        let combiners = build_combiners(cfg, &mut *rng)?;
        let op = assemble_sensing(&schedule, &combiners, cfg.antennas)?;
        let channel = build_channel(&paths, cfg);
        let y = simulate_rx(&op, &channel.h, if noisy { Some(&mut *rng) } else { None });
        let spec = make_quantizer(cfg, signal_variance(cfg))?;
        let obs = quantize(&y, &spec, partition_cv(cfg)?)?;
        Ok(Self { cfg: cfg.clone(), channel, op, obs })
    }

    pub fn estimate(&self, dict: Arc<GridDictionary>, ecfg: EstimatorConfig) -> Result<EstimateState> {
        Estimator::new(&self.op, &self.obs, dict, ecfg).run()
    }

    /// Squared error of the channel reconstructed from `paths` and `gains`.
    pub fn squared_error(&self, state: &EstimateState) -> f64 {
        let h_hat = reconstruct_h(state, &self.cfg, ArrayModel::SpatialWideband).h;
        squared_distance(&h_hat, &self.channel.h)
    }
}

pub fn squared_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum()
}

/// Mean, over true paths, of the distance in `(theta [rad], tau / T_s)` to
/// the nearest estimated path of the same user; infinite when a user has no
/// estimate.
pub fn parameter_error(truth: &[PathParams], state: &EstimateState, sampling_period: f64) -> f64 {
    if truth.is_empty() {
        return 0.0;
    }
    let total: f64 = truth
        .iter()
        .map(|t| {
            state
                .paths
                .iter()
                .filter(|p| p.user == t.user)
                .map(|p| (p.theta - t.theta).hypot((p.tau - t.tau) / sampling_period))
                .fold(f64::INFINITY, f64::min)
        })
        .sum();
    total / truth.len() as f64
}

/// Per-trial outcome of one estimator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub point: usize,
    pub trial: usize,
    pub estimator: EstimatorKind,
    pub squared_error: f64,
    pub channel_energy: f64,
    /// `None` when the true channel is zero.
    pub nmse: Option<f64>,
    pub iterations: usize,
    pub paths_per_user: Vec<usize>,
    pub parameter_error: f64,
    pub stop: StopReason,
    pub wall_seconds: f64,
}

/// Draws one scenario and runs every estimator in `kinds` on it.
pub fn run_trial(
    ecfg: &ExperimentConfig,
    point: &SweepPoint,
    trial: usize,
    kinds: &[EstimatorKind],
    dicts: &BTreeMap<EstimatorKind, Arc<GridDictionary>>,
) -> Result<Vec<TrialRecord>> {
    let context = || format!("{} trial {trial}", point.describe());
    let wrap = |e: Error| Error::Trial { context: context(), source: Box::new(e) };
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(ecfg.master_seed, point.index, trial));
    let scenario = Scenario::draw(&point.system, point.aoa, &mut rng).map_err(wrap)?;
    let energy = scenario.channel.energy();
    kinds
        .iter()
        .map(|&kind| {
            let start = Instant::now();
            let mut cfg = kind.estimator_config(&ecfg.refinement, ecfg.objective);
            cfg.max_paths = Some(ecfg.path_cap(&point.system));
            let state = scenario.estimate(dicts[&kind].clone(), cfg).map_err(wrap)?;
            let se = scenario.squared_error(&state);
            Ok(TrialRecord {
                point: point.index,
                trial,
                estimator: kind,
                squared_error: se,
                channel_energy: energy,
                nmse: (energy > 0.0).then(|| se / energy),
                iterations: state.iterations,
                paths_per_user: state.paths_per_user(point.system.users),
                parameter_error: parameter_error(&scenario.channel.paths, &state, point.system.sampling_period()),
                stop: state.stop,
                wall_seconds: start.elapsed().as_secs_f64(),
            })
        })
        .collect()
}

fn dictionaries(point: &SweepPoint, kinds: &[EstimatorKind]) -> BTreeMap<EstimatorKind, Arc<GridDictionary>> {
    let grid = GridSpec::new(&point.system);
    let mut by_model: BTreeMap<u8, Arc<GridDictionary>> = BTreeMap::new();
    kinds
        .iter()
        .map(|&k| {
            let key = k.model() as u8;
            let d = by_model
                .entry(key)
                .or_insert_with(|| Arc::new(GridDictionary::new(&point.system, grid.clone(), k.model())))
                .clone();
            (k, d)
        })
        .collect()
}

/// Runs every (point, trial) pair in parallel; records come back in
/// (point, trial, estimator) order regardless of scheduling.
pub fn run_trials(ecfg: &ExperimentConfig, kinds: &[EstimatorKind]) -> Result<Vec<TrialRecord>> {
    ecfg.validate()?;
    let points = ecfg.points();
    let dicts: Vec<_> = points.iter().map(|p| dictionaries(p, kinds)).collect();
    let jobs: Vec<(usize, usize)> = (0..points.len()).flat_map(|p| (0..ecfg.trials).map(move |t| (p, t))).collect();
    let results: Vec<Result<Vec<TrialRecord>>> =
        jobs.par_iter().map(|&(p, t)| run_trial(ecfg, &points[p], t, kinds, &dicts[p])).collect();
    let mut out = Vec::with_capacity(jobs.len() * kinds.len());
    for r in results {
        out.extend(r?);
    }
    Ok(out)
}

/// One table cell. Non-finite numbers are stored as missing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Int(i64),
    Num(f64),
    Text(String),
    Missing,
}

impl Cell {
    pub fn num(v: f64) -> Self {
        if v.is_finite() {
            Cell::Num(v)
        } else {
            Cell::Missing
        }
    }

    pub fn int(v: usize) -> Self {
        Cell::Int(v as i64)
    }

    pub fn text(v: impl Into<String>) -> Self {
        Cell::Text(v.into())
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Int(v) => Some(*v as f64),
            Cell::Num(v) => Some(*v),
            _ => None,
        }
    }

    fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Num(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Missing => String::new(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl ResultTable {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Values of a numeric column, `None` for missing or text cells.
    pub fn values(&self, name: &str) -> Vec<Option<f64>> {
        match self.column(name) {
            Some(i) => self.rows.iter().map(|r| r[i].as_f64()).collect(),
            None => Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv_string(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r.iter().map(Cell::render)).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
    }
}

pub fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

pub fn to_db(v: f64) -> f64 {
    10.0 * v.log10()
}

fn point_columns() -> Vec<&'static str> {
    vec!["point", "snr_db", "adc_bits", "frames", "rf_chains", "angle_res", "delay_res", "aoa"]
}

fn point_cells(p: &SweepPoint) -> Vec<Cell> {
    let s = &p.system;
    vec![
        Cell::int(p.index),
        Cell::num(s.snr_db),
        Cell::text(s.adc.to_string()),
        Cell::int(s.frames),
        Cell::int(s.rf_chains),
        Cell::int(s.angle_oversampling),
        Cell::int(s.delay_oversampling),
        p.aoa.map_or(Cell::Missing, Cell::num),
    ]
}

/// Aggregate statistics of one estimator at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct Aggregate {
    pub trials: usize,
    pub degenerate: usize,
    pub nmse_mean: f64,
    pub nmse_median: f64,
    pub iterations_mean: f64,
    pub paths_mean: f64,
    pub parameter_error_median: f64,
}

pub fn aggregate<'a>(records: impl Iterator<Item = &'a TrialRecord>) -> Aggregate {
    let recs: Vec<&TrialRecord> = records.collect();
    let mut nmse: Vec<f64> = recs.iter().filter_map(|r| r.nmse).collect();
    let n = recs.len().max(1) as f64;
    let mut perr: Vec<f64> = recs.iter().map(|r| r.parameter_error).collect();
    Aggregate {
        trials: recs.len(),
        degenerate: recs.len() - nmse.len(),
        nmse_mean: if nmse.is_empty() { f64::NAN } else { nmse.iter().sum::<f64>() / nmse.len() as f64 },
        nmse_median: median(&mut nmse),
        iterations_mean: recs.iter().map(|r| r.iterations as f64).sum::<f64>() / n,
        paths_mean: recs.iter().map(|r| r.paths_per_user.iter().sum::<usize>() as f64).sum::<f64>() / n,
        parameter_error_median: median(&mut perr),
    }
}

/// Table output plus the raw per-trial records behind it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutput {
    pub table: ResultTable,
    pub trials: Vec<TrialRecord>,
    #[serde(skip)]
    pub lattice: Option<Vec<LatticePoint>>,
}

/// NMSE of each estimator at every sweep point.
pub fn nmse_sweep(ecfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let kinds = ecfg.estimators.clone();
    let trials = run_trials(ecfg, &kinds)?;
    let mut cols = point_columns();
    cols.extend([
        "estimator",
        "trials",
        "degenerate",
        "nmse",
        "nmse_db",
        "nmse_median_db",
        "mean_iterations",
        "mean_paths",
        "median_parameter_error",
    ]);
    let mut table = ResultTable::new(&cols);
    for p in ecfg.points() {
        for &k in &kinds {
            let a = aggregate(trials.iter().filter(|r| r.point == p.index && r.estimator == k));
            let mut row = point_cells(&p);
            row.extend([
                Cell::text(k.name()),
                Cell::int(a.trials),
                Cell::int(a.degenerate),
                Cell::num(a.nmse_mean),
                Cell::num(to_db(a.nmse_mean)),
                Cell::num(to_db(a.nmse_median)),
                Cell::num(a.iterations_mean),
                Cell::num(a.paths_mean),
                Cell::num(a.parameter_error_median),
            ]);
            table.push(row);
        }
    }
    Ok(ExperimentOutput { table, trials, lattice: None })
}

/// Ratio of the narrowband-model NMSE to the spatial-wideband NMSE on the
/// same realizations, per sweep point.
pub fn mismatch_experiment(ecfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let kinds = [EstimatorKind::Nfcfgs, EstimatorKind::Narrowband];
    let trials = run_trials(ecfg, &kinds)?;
    let mut cols = point_columns();
    cols.extend(["trials", "nmse_wideband", "nmse_narrowband", "degradation", "degradation_db"]);
    let mut table = ResultTable::new(&cols);
    for p in ecfg.points() {
        let wide = aggregate(trials.iter().filter(|r| r.point == p.index && r.estimator == kinds[0]));
        let narrow = aggregate(trials.iter().filter(|r| r.point == p.index && r.estimator == kinds[1]));
        let ratio = narrow.nmse_mean / wide.nmse_mean;
        let mut row = point_cells(&p);
        row.extend([
            Cell::int(wide.trials),
            Cell::num(wide.nmse_mean),
            Cell::num(narrow.nmse_mean),
            Cell::num(ratio),
            Cell::num(to_db(ratio)),
        ]);
        table.push(row);
    }
    Ok(ExperimentOutput { table, trials, lattice: None })
}

/// Mean outer-iteration counts of the gridless and on-grid estimators.
pub fn iteration_census(ecfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let kinds = [EstimatorKind::Nfcfgs, EstimatorKind::Fcfgs];
    let trials = run_trials(ecfg, &kinds)?;
    let mut cols = point_columns();
    cols.extend(["trials", "iterations_nfcfgs", "iterations_fcfgs", "paths_nfcfgs", "paths_fcfgs"]);
    let mut table = ResultTable::new(&cols);
    for p in ecfg.points() {
        let g = aggregate(trials.iter().filter(|r| r.point == p.index && r.estimator == kinds[0]));
        let f = aggregate(trials.iter().filter(|r| r.point == p.index && r.estimator == kinds[1]));
        let mut row = point_cells(&p);
        row.extend([
            Cell::int(g.trials),
            Cell::num(g.iterations_mean),
            Cell::num(f.iterations_mean),
            Cell::num(g.paths_mean),
            Cell::num(f.paths_mean),
        ]);
        table.push(row);
    }
    Ok(ExperimentOutput { table, trials, lattice: None })
}

/// Lattice and concavity summary of the held-out likelihood probe.
pub fn cv_probe_experiment(ecfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let probe = &ecfg.probe;
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(ecfg.master_seed, 0, 0));
    let sample = ProbeSample::draw(probe, &mut rng)?;
    let lattice = fcv_lattice(&sample)?;
    let segments = random_segments(probe, probe.segments, &mut rng);
    let report = concavity_probe_on(&sample, &segments, false);
    let truth = sample.fcv(&probe.truth);
    let best =
        lattice.iter().max_by(|a, b| a.minus_truth.mean.total_cmp(&b.minus_truth.mean)).expect("nonempty lattice");
    let mut table = ResultTable::new(&[
        "quantizer",
        "step",
        "draws",
        "fcv_truth",
        "fcv_truth_stderr",
        "best_h1",
        "best_h2",
        "best_minus_truth",
        "best_minus_truth_stderr",
        "segments",
        "concavity_violations",
    ]);
    table.push(vec![
        Cell::text(match probe.quantizer {
            ProbeQuantizer::Saturating(b) => format!("{b} bits"),
            ProbeQuantizer::Unbounded { step } => format!("unbounded step {step}"),
        }),
        Cell::num(sample.step),
        Cell::int(probe.draws),
        Cell::num(truth.mean),
        Cell::num(truth.stderr),
        Cell::num(best.h_hat[0]),
        Cell::num(best.h_hat[1]),
        Cell::num(best.minus_truth.mean),
        Cell::num(best.minus_truth.stderr),
        Cell::int(report.segments.len()),
        Cell::int(report.violations),
    ]);
    Ok(ExperimentOutput { table, trials: Vec::new(), lattice: Some(lattice) })
}

pub fn run_experiment(ecfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    match ecfg.kind {
        ExperimentKind::Nmse => nmse_sweep(ecfg),
        ExperimentKind::Mismatch => mismatch_experiment(ecfg),
        ExperimentKind::Census => iteration_census(ecfg),
        ExperimentKind::Cvprobe => cv_probe_experiment(ecfg),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fingerprint {
    pub package: String,
    pub version: String,
    pub git_revision: String,
    /// FNV-1a hash of the resolved configuration's JSON.
    pub config_hash: String,
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ *b as u64).wrapping_mul(0x0000_0100_0000_01b3))
}

pub fn fingerprint(ecfg: &ExperimentConfig) -> Result<Fingerprint> {
    Ok(Fingerprint {
        package: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        git_revision: option_env!("SWCE_GIT_REVISION").unwrap_or("unknown").into(),
        config_hash: format!("{:016x}", fnv1a(serde_json::to_string(ecfg)?.as_bytes())),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultDocument {
    pub fingerprint: Fingerprint,
    pub config: ExperimentConfig,
    pub table: ResultTable,
    pub trials: Vec<TrialRecord>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

/// Writes the table as CSV or the full document as JSON.
pub fn emit_results(doc: &ResultDocument, path: &Path, format: Format) -> Result<()> {
    let text = match format {
        Format::Csv => doc.table.to_csv_string(),
        Format::Json => serde_json::to_string_pretty(doc)?,
    };
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes `results.csv`, `results.json`, and for the probe `fcv_lattice.csv`
/// into `dir`, creating it if needed.
pub fn write_outputs(ecfg: &ExperimentConfig, out: &ExperimentOutput, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let doc = ResultDocument {
        fingerprint: fingerprint(ecfg)?,
        config: ecfg.clone(),
        table: out.table.clone(),
        trials: out.trials.clone(),
    };
    emit_results(&doc, &dir.join("results.csv"), Format::Csv)?;
    emit_results(&doc, &dir.join("results.json"), Format::Json)?;
    if let Some(lattice) = &out.lattice {
        write_lattice_csv(lattice, &dir.join("fcv_lattice.csv"))?;
    }
    Ok(())
}
