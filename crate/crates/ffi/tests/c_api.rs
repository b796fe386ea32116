use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use retail_dr_ffi::*;

fn last_error() -> String {
    let p = rd_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn toy(spot: f64, dmax: f64) -> *mut RdScenarioSet {
    let mut set = ptr::null_mut();
    let st = unsafe {
        rd_scenarios_deterministic(1, 1, &spot, &0.03, &0.0015, &dmax, 500.0, &mut set)
    };
    assert_eq!(st, RdStatus::Ok);
    set
}

#[test]
fn monopoly_tariff_through_handles() {
    let set = toy(0.02, 0.0);
    let mut rep = ptr::null_mut();
    assert_eq!(unsafe { rd_solve(set, RdModel::Mpec, 0, &mut rep) }, RdStatus::Ok);
    let mut profit = 0.0;
    assert_eq!(unsafe { rd_report_expected_profit(rep, &mut profit) }, RdStatus::Ok);
    assert!((profit - 0.05 / 3.0).abs() < 1e-9, "{profit}");

    let mut buf = [0.0; 1];
    let mut n = 0;
    assert_eq!(unsafe { rd_report_tariff(rep, buf.as_mut_ptr(), 1, &mut n) }, RdStatus::Ok);
    assert_eq!(n, 1);
    assert!((buf[0] - 0.025).abs() < 1e-9);
    let mut res = 1.0;
    assert_eq!(unsafe { rd_report_max_residual(rep, &mut res) }, RdStatus::Ok);
    assert!(res <= 1e-6);
    unsafe {
        rd_report_free(rep);
        rd_scenarios_free(set);
    }
}

#[test]
fn equilibrium_prices_at_spot() {
    let set = toy(0.02, 1.0);
    for m in [RdModel::EqMilp, RdModel::EqNlp] {
        let mut rep = ptr::null_mut();
        assert_eq!(unsafe { rd_solve(set, m, 0, &mut rep) }, RdStatus::Ok);
        let (mut profit, mut avg) = (1.0, 0.0);
        unsafe {
            rd_report_expected_profit(rep, &mut profit);
            rd_report_average_tariff(rep, &mut avg);
            rd_report_free(rep);
        }
        assert!(profit.abs() <= 1e-9);
        assert!((avg - 0.02).abs() <= 1e-9);
    }
    unsafe { rd_scenarios_free(set) };
}

#[test]
fn generated_set_dimensions() {
    let name = CString::new("BM").unwrap();
    let mut set = ptr::null_mut();
    assert_eq!(unsafe { rd_scenarios_generate(name.as_ptr(), 5, 3, &mut set) }, RdStatus::Ok);
    let (mut t, mut j, mut w) = (0, 0, 0);
    assert_eq!(unsafe { rd_scenarios_dims(set, &mut t, &mut j, &mut w) }, RdStatus::Ok);
    assert_eq!((t, j, w), (24, 3, 5));
    unsafe { rd_scenarios_free(set) };
}

#[test]
fn errors_carry_codes_and_messages() {
    let bad = CString::new("Nope").unwrap();
    let mut set = ptr::null_mut();
    assert_eq!(unsafe { rd_scenarios_generate(bad.as_ptr(), 5, 0, &mut set) }, RdStatus::Config);
    assert!(last_error().contains("Nope"));
    assert!(set.is_null());

    assert_eq!(unsafe { rd_scenarios_generate(ptr::null(), 5, 0, &mut set) }, RdStatus::NullPointer);
    assert!(last_error().contains("case_name"));

    let set = toy(0.02, 0.0);
    let mut rep = ptr::null_mut();
    unsafe { rd_solve(set, RdModel::Mpec, 0, &mut rep) };
    let mut n = 0;
    assert_eq!(
        unsafe { rd_report_tariff(rep, ptr::null_mut(), 0, &mut n) },
        RdStatus::BufferTooSmall
    );
    assert_eq!(n, 1);
    let mut x = 0.0;
    assert_eq!(unsafe { rd_report_total_welfare(ptr::null(), &mut x) }, RdStatus::NullPointer);
    assert_eq!(unsafe { rd_report_total_welfare(rep, &mut x) }, RdStatus::Ok);
    assert!(rd_last_error().is_null());
    unsafe {
        rd_report_free(rep);
        rd_scenarios_free(set);
        rd_report_free(ptr::null_mut());
        rd_scenarios_free(ptr::null_mut());
    }
}

#[test]
fn best_response_buys_extra_in_cheap_hour() {
    let p = [0.02, 0.025];
    let a = [0.03, 0.03];
    let b = [0.0015, 0.0015];
    let (mut s, mut d) = ([0.0; 2], [0.0; 2]);
    let st = unsafe {
        rd_best_response(2, p.as_ptr(), a.as_ptr(), b.as_ptr(), 1.0, s.as_mut_ptr(), d.as_mut_ptr())
    };
    assert_eq!(st, RdStatus::Ok);
    // q = s - shift, so the cheap hour carries the negative shift
    assert_eq!(d, [-1.0, 1.0]);
    assert!((s[0] - 0.01 / 0.0015).abs() < 1e-12);
    let st = unsafe {
        rd_best_response(2, p.as_ptr(), a.as_ptr(), [0.0, 1.0].as_ptr(), 1.0, s.as_mut_ptr(), d.as_mut_ptr())
    };
    assert_eq!(st, RdStatus::InvalidArgument);
}

#[test]
fn version_is_set() {
    let v = unsafe { CStr::from_ptr(rd_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_compiles_as_c_and_cpp() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/retail_dr.h");
    let src = format!("#include \"{}\"\nint main(void) {{ return RD_STATUS_OK; }}\n", header.display());
    let dir = tempfile::tempdir().unwrap();
    for (cc, file) in [("cc", "t.c"), ("c++", "t.cpp")] {
        let p = dir.path().join(file);
        std::fs::write(&p, &src).unwrap();
        let Ok(out) = Command::new(cc).arg("-fsyntax-only").arg("-Wall").arg(&p).output() else {
            eprintln!("{cc} not available, skipping");
            continue;
        };
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
}
