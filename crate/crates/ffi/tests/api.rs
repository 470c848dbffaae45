use std::ffi::{CStr, CString};
use std::ptr;

use swce_ffi::*;

const CONFIG: &str = r#"
trials = 2
master_seed = 7
estimators = ["nfcfgs", "fcfgs"]

[system]
antennas = 8
rf_chains = 4
users = 1
paths_per_user = [1]
frames = 5
frame_len = 8
delay_spread = 2
snr_db = 10.0
"#;

fn last_error() -> String {
    let p = swce_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn take(s: *mut std::ffi::c_char) -> String {
    let out = unsafe { CStr::from_ptr(s) }.to_string_lossy().into_owned();
    unsafe { swce_string_free(s) };
    out
}

fn experiment(text: &str) -> *mut SwceExperiment {
    let c = CString::new(text).unwrap();
    let mut exp = ptr::null_mut();
    assert_eq!(unsafe { swce_experiment_new(c.as_ptr(), &mut exp) }, SwceStatus::Ok);
    exp
}

#[test]
fn run_matches_the_library() {
    let exp = experiment(CONFIG);
    unsafe {
        let mut res = ptr::null_mut();
        assert_eq!(swce_experiment_run(exp, &mut res), SwceStatus::Ok);
        let mut rows = 0;
        assert_eq!(swce_results_rows(res, &mut rows), SwceStatus::Ok);
        assert_eq!(rows, 2);

        let mut csv = ptr::null_mut();
        assert_eq!(swce_results_csv(res, &mut csv), SwceStatus::Ok);
        let cfg = swce::harness::ExperimentConfig::from_text(CONFIG).unwrap();
        let direct = swce::harness::run_experiment(&cfg).unwrap();
        assert_eq!(take(csv), direct.table.to_csv_string());

        let mut json = ptr::null_mut();
        assert_eq!(swce_results_json(res, &mut json), SwceStatus::Ok);
        let doc: serde_json::Value = serde_json::from_str(&take(json)).unwrap();
        assert_eq!(doc["config"]["master_seed"], 7);
        assert_eq!(doc["trials"].as_array().unwrap().len(), 4);

        swce_results_free(res);
        swce_experiment_free(exp);
    }
}

#[test]
fn setters_change_the_configuration() {
    let exp = experiment(CONFIG);
    unsafe {
        assert_eq!(swce_experiment_set_trials(exp, 3), SwceStatus::Ok);
        assert_eq!(swce_experiment_set_seed(exp, 99), SwceStatus::Ok);
        assert_eq!(swce_experiment_set_trials(exp, 0), SwceStatus::InvalidArgument);
        assert!(last_error().contains("trials"));
        let mut json = ptr::null_mut();
        assert_eq!(swce_experiment_config_json(exp, &mut json), SwceStatus::Ok);
        assert!(swce_last_error().is_null());
        let v: serde_json::Value = serde_json::from_str(&take(json)).unwrap();
        assert_eq!((v["trials"].as_u64(), v["master_seed"].as_u64()), (Some(3), Some(99)));
        swce_experiment_free(exp);
    }
}

#[test]
fn scenario_estimate_reports_paths() {
    let exp = experiment(CONFIG);
    unsafe {
        let mut sc = ptr::null_mut();
        assert_eq!(swce_scenario_draw(exp, 1, &mut sc), SwceStatus::Ok);
        let mut n = 0;
        assert_eq!(swce_scenario_samples(sc, &mut n), SwceStatus::Ok);
        assert_eq!(n, 5 * 8 * 4);

        for kind in [SwceEstimatorKind::Nfcfgs, SwceEstimatorKind::Fcfgs, SwceEstimatorKind::Narrowband] {
            let mut est = ptr::null_mut();
            assert_eq!(swce_scenario_estimate(sc, kind as i32, &mut est), SwceStatus::Ok);
            let (mut count, mut nmse) = (0, f64::NAN);
            assert_eq!(swce_estimate_path_count(est, &mut count), SwceStatus::Ok);
            assert_eq!(swce_estimate_nmse(est, &mut nmse), SwceStatus::Ok);
            assert!(count >= 1 && nmse.is_finite() && nmse >= 0.0);
            let (mut th, mut tau, mut user, mut re, mut im) = (0.0, 0.0, 9, 0.0, 0.0);
            assert_eq!(swce_estimate_path(est, 0, &mut th, &mut tau, &mut user, &mut re, &mut im), SwceStatus::Ok);
            assert_eq!(user, 0);
            assert!(th.abs() <= std::f64::consts::FRAC_PI_2 + 1e-9 && tau >= 0.0);
            assert!(re.hypot(im) > 0.0);
            assert_eq!(
                swce_estimate_path(est, count, &mut th, &mut tau, &mut user, &mut re, &mut im),
                SwceStatus::InvalidArgument
            );
            swce_estimate_free(est);
        }
        let mut est = ptr::null_mut();
        assert_eq!(swce_scenario_estimate(sc, 7, &mut est), SwceStatus::InvalidArgument);
        assert!(est.is_null());
        swce_scenario_free(sc);
        swce_experiment_free(exp);
    }
}

#[test]
fn bad_inputs_return_codes() {
    unsafe {
        let mut exp = ptr::null_mut();
        assert_eq!(swce_experiment_new(ptr::null(), &mut exp), SwceStatus::NullPointer);
        let bad = CString::new("trials = \"many\"").unwrap();
        assert_eq!(swce_experiment_new(bad.as_ptr(), &mut exp), SwceStatus::InvalidConfig);
        assert!(exp.is_null());
        assert!(last_error().contains("TOML"));
        let invalid = [0xffu8, 0xfe, 0];
        assert_eq!(swce_experiment_new(invalid.as_ptr().cast(), &mut exp), SwceStatus::InvalidUtf8);
        let ok = CString::new("{}").unwrap();
        assert_eq!(swce_experiment_new(ok.as_ptr(), ptr::null_mut()), SwceStatus::NullPointer);

        let mut rows = 0;
        assert_eq!(swce_results_rows(ptr::null(), &mut rows), SwceStatus::NullPointer);
        assert!(last_error().contains("results"));
        swce_results_free(ptr::null_mut());
        swce_string_free(ptr::null_mut());

        let version = CStr::from_ptr(swce_version()).to_str().unwrap();
        assert_eq!(version, env!("CARGO_PKG_VERSION"));
    }
}
