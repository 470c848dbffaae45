//! C interface to the simulator.
//!
//! Every function returns a [`SwceStatus`]; on failure the message is kept
//! per thread and read with [`swce_last_error`]. Objects are opaque handles
//! released with their `_free` function. Strings returned through out
//! parameters are owned by the caller and released with [`swce_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use swce::estimator::{default_path_cap, EstimateState, GridDictionary, GridSpec};
use swce::harness::{
    fingerprint, run_experiment, EstimatorKind, ExperimentConfig, ExperimentOutput, ResultDocument, Scenario,
};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SwceStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    InvalidConfig = 4,
    Failed = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SwceEstimatorKind {
    Nfcfgs = 0,
    Fcfgs = 1,
    Narrowband = 2,
}

fn estimator_kind(k: i32) -> Result<EstimatorKind, Failure> {
    match k {
        k if k == SwceEstimatorKind::Nfcfgs as i32 => Ok(EstimatorKind::Nfcfgs),
        k if k == SwceEstimatorKind::Fcfgs as i32 => Ok(EstimatorKind::Fcfgs),
        k if k == SwceEstimatorKind::Narrowband as i32 => Ok(EstimatorKind::Narrowband),
        _ => Err(Failure(SwceStatus::InvalidArgument, format!("unknown estimator kind {k}"))),
    }
}

pub struct SwceExperiment {
    cfg: ExperimentConfig,
}

pub struct SwceResults {
    cfg: ExperimentConfig,
    out: ExperimentOutput,
}

pub struct SwceScenario {
    scenario: Scenario,
}

pub struct SwceEstimate {
    state: EstimateState,
    squared_error: f64,
    channel_energy: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(SwceStatus, String);

impl From<swce::Error> for Failure {
    fn from(e: swce::Error) -> Self {
        let status = match &e {
            swce::Error::InvalidConfig(_)
            | swce::Error::Json(_)
            | swce::Error::Toml(_)
            | swce::Error::TrainingInfeasible(_)
            | swce::Error::NonCoprimeRoot { .. } => SwceStatus::InvalidConfig,
            _ => SwceStatus::Failed,
        };
        Failure(status, e.to_string())
    }
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SwceStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            SwceStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            SwceStatus::Panic
        }
    }
}

unsafe fn text<'a>(s: *const c_char) -> Result<&'a str, Failure> {
    if s.is_null() {
        return Err(Failure(SwceStatus::NullPointer, "null string".into()));
    }
    CStr::from_ptr(s).to_str().map_err(|e| Failure(SwceStatus::InvalidUtf8, e.to_string()))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| Failure(SwceStatus::NullPointer, format!("null {what}")))
}

unsafe fn handle_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| Failure(SwceStatus::NullPointer, format!("null {what}")))
}

unsafe fn out_param<'a, T>(p: *mut T) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| Failure(SwceStatus::NullPointer, "null output pointer".into()))
}

fn into_c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s).map(CString::into_raw).map_err(|_| Failure(SwceStatus::Failed, "string contains a NUL byte".into()))
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn swce_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn swce_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must be NULL or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn swce_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses an experiment description (JSON, or TOML when it does not start
/// with `{`) and validates it.
///
/// # Safety
/// `config_text` must be a NUL-terminated string; `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn swce_experiment_new(config_text: *const c_char, out: *mut *mut SwceExperiment) -> SwceStatus {
    guard(|| {
        let out = out_param(out)?;
        *out = ptr::null_mut();
        let cfg = ExperimentConfig::from_text(text(config_text)?)?;
        cfg.validate()?;
        *out = Box::into_raw(Box::new(SwceExperiment { cfg }));
        Ok(())
    })
}

/// # Safety
/// `exp` must be NULL or a handle from [`swce_experiment_new`], not yet freed.
#[no_mangle]
pub unsafe extern "C" fn swce_experiment_free(exp: *mut SwceExperiment) {
    if !exp.is_null() {
        drop(Box::from_raw(exp));
    }
}

/// # Safety
/// `exp` must be a live experiment handle.
#[no_mangle]
pub unsafe extern "C" fn swce_experiment_set_trials(exp: *mut SwceExperiment, trials: usize) -> SwceStatus {
    guard(|| {
        let exp = handle_mut(exp, "experiment")?;
        if trials == 0 {
            return Err(Failure(SwceStatus::InvalidArgument, "trials must be at least 1".into()));
        }
        exp.cfg.trials = trials;
        Ok(())
    })
}

/// # Safety
/// `exp` must be a live experiment handle.
#[no_mangle]
pub unsafe extern "C" fn swce_experiment_set_seed(exp: *mut SwceExperiment, seed: u64) -> SwceStatus {
    guard(|| {
        handle_mut(exp, "experiment")?.cfg.master_seed = seed;
        Ok(())
    })
}

/// Resolved configuration as JSON.
///
/// # Safety
/// `exp` must be a live experiment handle; `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn swce_experiment_config_json(exp: *const SwceExperiment, out: *mut *mut c_char) -> SwceStatus {
    guard(|| {
        let out = out_param(out)?;
        *out = ptr::null_mut();
        let exp = handle(exp, "experiment")?;
        *out = into_c_string(serde_json::to_string_pretty(&exp.cfg).map_err(swce::Error::from)?)?;
        Ok(())
    })
}

/// Runs every trial of the experiment.
///
/// # Safety
/// `exp` must be a live experiment handle; `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn swce_experiment_run(exp: *const SwceExperiment, out: *mut *mut SwceResults) -> SwceStatus {
    guard(|| {
        let out = out_param(out)?;
        *out = ptr::null_mut();
        let exp = handle(exp, "experiment")?;
        let results = run_experiment(&exp.cfg)?;
        *out = Box::into_raw(Box::new(SwceResults { cfg: exp.cfg.clone(), out: results }));
        Ok(())
    })
}

/// # Safety
/// `res` must be NULL or a handle from [`swce_experiment_run`], not yet freed.
#[no_mangle]
pub unsafe extern "C" fn swce_results_free(res: *mut SwceResults) {
    if !res.is_null() {
        drop(Box::from_raw(res));
    }
}

/// Number of table rows (excluding the header).
///
/// # Safety
/// `res` must be a live results handle; `rows` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn swce_results_rows(res: *const SwceResults, rows: *mut usize) -> SwceStatus {
    guard(|| {
        *out_param(rows)? = handle(res, "results")?.out.table.rows.len();
        Ok(())
    })
}

/// Result table as CSV.
///
/// # Safety
/// `res` must be a live results handle; `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn swce_results_csv(res: *const SwceResults, out: *mut *mut c_char) -> SwceStatus {
    guard(|| {
        let out = out_param(out)?;
        *out = ptr::null_mut();
        *out = into_c_string(handle(res, "results")?.out.table.to_csv_string())?;
        Ok(())
    })
}

/// Full result document (fingerprint, configuration, table, trials) as JSON.
///
/// # Safety
/// `res` must be a live results handle; `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn swce_results_json(res: *const SwceResults, out: *mut *mut c_char) -> SwceStatus {
    guard(|| {
        let out = out_param(out)?;
        *out = ptr::null_mut();
        let res = handle(res, "results")?;
        let doc = ResultDocument {
            fingerprint: fingerprint(&res.cfg)?,
            config: res.cfg.clone(),
            table: res.out.table.clone(),
            trials: res.out.trials.clone(),
        };
        *out = into_c_string(serde_json::to_string_pretty(&doc).map_err(swce::Error::from)?)?;
        Ok(())
    })
}

/// Draws one noisy, quantized scenario for the experiment's base system.
///
/// # Safety
/// `exp` must be a live experiment handle; `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn swce_scenario_draw(
    exp: *const SwceExperiment,
    seed: u64,
    out: *mut *mut SwceScenario,
) -> SwceStatus {
    guard(|| {
        let out = out_param(out)?;
        *out = ptr::null_mut();
        let exp = handle(exp, "experiment")?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scenario = Scenario::draw(&exp.cfg.system, None, &mut rng)?;
        *out = Box::into_raw(Box::new(SwceScenario { scenario }));
        Ok(())
    })
}

/// # Safety
/// `sc` must be NULL or a handle from [`swce_scenario_draw`], not yet freed.
#[no_mangle]
pub unsafe extern "C" fn swce_scenario_free(sc: *mut SwceScenario) {
    if !sc.is_null() {
        drop(Box::from_raw(sc));
    }
}

/// Number of quantized complex samples in the scenario.
///
/// # Safety
/// `sc` must be a live scenario handle; `len` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn swce_scenario_samples(sc: *const SwceScenario, len: *mut usize) -> SwceStatus {
    guard(|| {
        *out_param(len)? = handle(sc, "scenario")?.scenario.obs.len();
        Ok(())
    })
}

/// Runs one estimator (a [`SwceEstimatorKind`] value) on the scenario with
/// cross-validation stopping.
///
/// # Safety
/// `sc` must be a live scenario handle; `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn swce_scenario_estimate(
    sc: *const SwceScenario,
    kind: i32,
    out: *mut *mut SwceEstimate,
) -> SwceStatus {
    guard(|| {
        let out = out_param(out)?;
        *out = ptr::null_mut();
        let s = &handle(sc, "scenario")?.scenario;
        let kind = estimator_kind(kind)?;
        let dict = Arc::new(GridDictionary::new(&s.cfg, GridSpec::new(&s.cfg), kind.model()));
        let mut ecfg = kind.estimator_config(&Default::default(), Default::default());
        ecfg.max_paths = Some(default_path_cap(&s.cfg));
        let state = s.estimate(dict, ecfg)?;
        let squared_error = s.squared_error(&state);
        let channel_energy = s.channel.energy();
        *out = Box::into_raw(Box::new(SwceEstimate { state, squared_error, channel_energy }));
        Ok(())
    })
}

/// # Safety
/// `est` must be NULL or a handle from [`swce_scenario_estimate`], not yet freed.
#[no_mangle]
pub unsafe extern "C" fn swce_estimate_free(est: *mut SwceEstimate) {
    if !est.is_null() {
        drop(Box::from_raw(est));
    }
}

/// Normalized squared error against the scenario's true channel.
///
/// # Safety
/// `est` must be a live estimate handle; `nmse` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn swce_estimate_nmse(est: *const SwceEstimate, nmse: *mut f64) -> SwceStatus {
    guard(|| {
        let est = handle(est, "estimate")?;
        if est.channel_energy <= 0.0 {
            return Err(Failure(SwceStatus::Failed, "true channel is zero".into()));
        }
        *out_param(nmse)? = est.squared_error / est.channel_energy;
        Ok(())
    })
}

/// Number of recovered paths.
///
/// # Safety
/// `est` must be a live estimate handle; `count` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn swce_estimate_path_count(est: *const SwceEstimate, count: *mut usize) -> SwceStatus {
    guard(|| {
        *out_param(count)? = handle(est, "estimate")?.state.paths.len();
        Ok(())
    })
}

/// Copies path `index`: angle (rad), delay (s), user, and complex gain.
///
/// # Safety
/// `est` must be a live estimate handle; the output pointers writable.
#[no_mangle]
pub unsafe extern "C" fn swce_estimate_path(
    est: *const SwceEstimate,
    index: usize,
    theta: *mut f64,
    tau: *mut f64,
    user: *mut usize,
    gain_re: *mut f64,
    gain_im: *mut f64,
) -> SwceStatus {
    guard(|| {
        let st = &handle(est, "estimate")?.state;
        let Some(p) = st.paths.get(index) else {
            return Err(Failure(
                SwceStatus::InvalidArgument,
                format!("path {index} out of range ({} paths)", st.paths.len()),
            ));
        };
        let g = st.gains[index];
        *out_param(theta)? = p.theta;
        *out_param(tau)? = p.tau;
        *out_param(user)? = p.user;
        *out_param(gain_re)? = g.re;
        *out_param(gain_im)? = g.im;
        Ok(())
    })
}
