//! The C ABI exercised from Rust.

use std::ffi::{CStr, CString};
use std::ptr;

use statfield::covariance_analysis::gamma_analytic;
use statfield::field_synthesis::GosMeasure;
use statfield::fixtures;
use statfield::grid_calculus::TestFunction;
use statfield::spectral_measure::AtomSet;
use statfield_ffi::*;

fn last_error() -> String {
    let p = sf_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

struct Handles {
    measure: *mut SfMeasure,
    grid: *mut SfGrid,
}

impl Handles {
    fn new() -> Self {
        let mut measure = ptr::null_mut();
        let mut grid = ptr::null_mut();
        unsafe {
            assert_eq!(sf_measure_fixture(&mut measure), SfStatus::Ok);
            assert_eq!(sf_grid_new(1, 8.0, 512, &mut grid), SfStatus::Ok);
        }
        Self { measure, grid }
    }
}

impl Drop for Handles {
    fn drop(&mut self) {
        unsafe {
            sf_measure_free(self.measure);
            sf_grid_free(self.grid);
        }
    }
}

#[test]
fn gamma_matches_the_library() {
    let h = Handles::new();
    let (c1, c2) = ([0.3], [-0.4]);
    let mut re = [0.0; 4];
    let mut im = [0.0; 4];
    let s = unsafe {
        sf_gamma_bumps(h.measure, h.grid, c1.as_ptr(), 0.5, c2.as_ptr(), 0.7, re.as_mut_ptr(), im.as_mut_ptr(), 4)
    };
    assert_eq!(s, SfStatus::Ok);
    let g = fixtures::grid();
    let phi = TestFunction::make_bump(&c1, 0.5, &g).unwrap();
    let psi = TestFunction::make_bump(&c2, 0.7, &g).unwrap();
    let expected = gamma_analytic(&fixtures::measure(), &phi, &psi).unwrap();
    for r in 0..2 {
        for c in 0..2 {
            assert_eq!(re[2 * r + c], expected.matrix()[(r, c)].re);
            assert_eq!(im[2 * r + c], expected.matrix()[(r, c)].im);
        }
    }
}

#[test]
fn k_of_bump_requires_room_for_the_matrix() {
    let h = Handles::new();
    let c = [0.0];
    let mut re = [0.0; 3];
    let mut im = [0.0; 3];
    let s = unsafe { sf_k_of_bump(h.measure, h.grid, c.as_ptr(), 0.5, re.as_mut_ptr(), im.as_mut_ptr(), 3) };
    assert_eq!(s, SfStatus::BufferTooSmall);
    assert!(last_error().contains("need 4"));
}

#[test]
fn bad_bump_is_invalid_argument() {
    let h = Handles::new();
    let c = [0.0];
    let mut re = [0.0; 4];
    let mut im = [0.0; 4];
    let s = unsafe { sf_k_of_bump(h.measure, h.grid, c.as_ptr(), 0.01, re.as_mut_ptr(), im.as_mut_ptr(), 4) };
    assert_eq!(s, SfStatus::InvalidArgument);
}

#[test]
fn gos_values_match_the_library_bit_for_bit() {
    let h = Handles::new();
    let mut gos = ptr::null_mut();
    unsafe {
        assert_eq!(sf_gos_new(h.measure, 150, 9, &mut gos), SfStatus::Ok);
        assert_eq!(sf_gos_ensemble_size(gos), 150);
    }
    let reference = GosMeasure::new(fixtures::measure(), 150, 9).unwrap();
    let atoms = [1usize, 2];
    let mut re = vec![0.0; 300];
    let mut im = vec![0.0; 300];
    let s = unsafe { sf_gos_xi_of_set(gos, atoms.as_ptr(), 2, re.as_mut_ptr(), im.as_mut_ptr(), 300) };
    assert_eq!(s, SfStatus::Ok);
    let xi = reference.xi_of_set(&[1, 2].into_iter().collect::<AtomSet>()).unwrap();
    for (m, sample) in xi.samples().enumerate() {
        for (k, v) in sample.iter().enumerate() {
            assert_eq!((re[2 * m + k], im[2 * m + k]), (v.re, v.im));
        }
    }
    let bad = [5usize];
    let s = unsafe { sf_gos_xi_of_set(gos, bad.as_ptr(), 1, re.as_mut_ptr(), im.as_mut_ptr(), 300) };
    assert_eq!(s, SfStatus::InvalidArgument);

    let c = [0.25];
    let s = unsafe { sf_gos_evaluate_bump(gos, h.grid, c.as_ptr(), 0.5, re.as_mut_ptr(), im.as_mut_ptr(), 300) };
    assert_eq!(s, SfStatus::Ok);
    let u = reference
        .evaluate_field(&TestFunction::make_bump(&c, 0.5, &fixtures::grid()).unwrap())
        .unwrap();
    assert_eq!((re[0], im[0]), (u.sample(0)[0].re, u.sample(0)[0].im));
    unsafe { sf_gos_free(gos) };
}

#[test]
fn measure_json_errors_carry_status_and_message() {
    let json = CString::new(r#"{"d":1,"n":2,"atoms":[{"omega":[0.0],"weight_re":[[1.0,2.0],[2.0,1.0]]}]}"#).unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { sf_measure_from_json(json.as_ptr(), &mut m) }, SfStatus::InvalidMeasure);
    assert!(m.is_null());
    assert!(last_error().contains("atom 0"));

    let json = CString::new(r#"{"d":1,"n":2,"atoms":[],"extra":1}"#).unwrap();
    assert_eq!(unsafe { sf_measure_from_json(json.as_ptr(), &mut m) }, SfStatus::Config);

    let raw = [0xffu8, 0];
    assert_eq!(unsafe { sf_measure_from_json(raw.as_ptr().cast(), &mut m) }, SfStatus::InvalidUtf8);

    let json = CString::new(r#"{"d":1,"n":1,"atoms":[{"omega":[0.5],"weight_re":[[2.0]]}]}"#).unwrap();
    assert_eq!(unsafe { sf_measure_from_json(json.as_ptr(), &mut m) }, SfStatus::Ok);
    unsafe {
        assert_eq!(sf_measure_atom_count(m), 1);
        assert_eq!(sf_measure_dim_h(m), 1);
        sf_measure_free(m);
    }
}

#[test]
fn scenario_runs_through_the_abi() {
    let config = CString::new(
        r#"{"grid":{"dim":1,"half_width":8.0,"points_per_axis":512},
            "measure":{"d":1,"n":2,"atoms":[{"omega":[1.0],"weight_re":[[0.5,0.25],[0.25,0.5]]}]},
            "ensemble_size":500,"seed":3,
            "checks":[{"name":"operator_stationarity"},{"name":"trace_link"}]}"#,
    )
    .unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { sf_run_scenario(config.as_ptr(), &mut out) }, SfStatus::Ok);
    let text = unsafe { CStr::from_ptr(out) }.to_str().unwrap().to_owned();
    unsafe { sf_string_free(out) };
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["overall_pass"], serde_json::Value::Bool(true));
    assert_eq!(v["seed"], 3);

    let mut out = ptr::null_mut();
    assert_eq!(unsafe { sf_run_demo(1, 10, &mut out) }, SfStatus::Config);
    assert!(out.is_null());
}
