use std::ffi::CString;
use std::ptr;

use covrecon_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as std::ffi::c_char; 256];
    let n = unsafe { covrecon_last_error(buf.as_mut_ptr(), buf.len()) };
    let bytes: Vec<u8> = buf[..n.min(255)].iter().map(|&c| c as u8).collect();
    String::from_utf8(bytes).unwrap()
}

fn space(dim: usize, n: usize, orth: bool) -> *mut CovreconSpace {
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { covrecon_space_new(dim, n, orth, &mut s) }, CovreconStatus::Ok);
    s
}

fn model(name: &str) -> *mut CovreconModel {
    let name = CString::new(name).unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { covrecon_model_new(name.as_ptr(), &mut m) }, CovreconStatus::Ok);
    m
}

#[test]
fn space_mass_is_symmetric_with_unit_row_sums_total() {
    let s = space(1, 4, false);
    let mut n = 0;
    assert_eq!(unsafe { covrecon_space_dof_count(s, &mut n) }, CovreconStatus::Ok);
    assert_eq!(n, 5);
    let mut mass = vec![0.0; 25];
    assert_eq!(unsafe { covrecon_space_mass(s, mass.as_mut_ptr(), mass.len()) }, CovreconStatus::Ok);
    // hats partition unity, so all entries sum to ∫ 1 = 1
    assert!((mass.iter().sum::<f64>() - 1.0).abs() < 1e-14);
    for i in 0..5 {
        for j in 0..5 {
            assert_eq!(mass[i * 5 + j], mass[j * 5 + i]);
        }
    }
    let mut small = vec![0.0; 3];
    assert_eq!(
        unsafe { covrecon_space_mass(s, small.as_mut_ptr(), small.len()) },
        CovreconStatus::BufferTooSmall
    );
    unsafe { covrecon_space_free(s) };
}

#[test]
fn invalid_inputs_map_to_status_codes() {
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { covrecon_space_new(3, 4, false, &mut s) }, CovreconStatus::InvalidArgument);
    assert!(last_error().contains("dim"), "{}", last_error());
    assert_eq!(unsafe { covrecon_space_new(1, 4, false, ptr::null_mut()) }, CovreconStatus::NullPointer);
    let bogus = CString::new("matern").unwrap();
    let mut m = ptr::null_mut();
    assert_ne!(unsafe { covrecon_model_new(bogus.as_ptr(), &mut m) }, CovreconStatus::Ok);
    assert!(m.is_null());
    let mut w = 0.0;
    assert_eq!(unsafe { covrecon_lambert_w(-1.0, 0, &mut w) }, CovreconStatus::InvalidArgument);
    assert_eq!(unsafe { covrecon_lambert_w(1.0, 3, &mut w) }, CovreconStatus::InvalidArgument);
    unsafe { covrecon_space_free(ptr::null_mut()) };
}

#[test]
fn asymmetric_covariance_is_rejected() {
    let s = space(1, 2, false);
    let sigma = [1.0, 0.5, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
    let mut sys = ptr::null_mut();
    assert_eq!(
        unsafe { covrecon_eigen_new(s, sigma.as_ptr(), 3, true, &mut sys) },
        CovreconStatus::NotSymmetric
    );
    assert!(sys.is_null());
    assert_eq!(
        unsafe { covrecon_eigen_new(s, sigma.as_ptr(), 2, true, &mut sys) },
        CovreconStatus::DimensionMismatch
    );
    unsafe { covrecon_space_free(s) };
}

#[test]
fn pipeline_through_the_c_abi() {
    let s = space(1, 16, false);
    let m = model("brownian-1d");
    let n = 17;

    let mut sigma = vec![0.0; n * n];
    assert_eq!(
        unsafe { covrecon_projected_covariance(m, s, sigma.as_mut_ptr(), sigma.len()) },
        CovreconStatus::Ok
    );
    let mut exact = ptr::null_mut();
    assert_eq!(unsafe { covrecon_eigen_new(s, sigma.as_ptr(), n, true, &mut exact) }, CovreconStatus::Ok);

    let rows = 2000;
    let mut samples = vec![0.0; rows * n];
    assert_eq!(
        unsafe { covrecon_sample_field(m, s, 256, rows, 9, samples.as_mut_ptr(), samples.len()) },
        CovreconStatus::Ok
    );
    let mut hat = vec![0.0; n * n];
    let mut tau = 0;
    assert_eq!(
        unsafe { covrecon_tapered_covariance(samples.as_ptr(), rows, n, 0, 1.0, hat.as_mut_ptr(), hat.len(), &mut tau) },
        CovreconStatus::Ok
    );
    assert!(tau >= 2 && tau % 2 == 0);
    let mut sampled = ptr::null_mut();
    assert_eq!(unsafe { covrecon_eigen_new(s, hat.as_ptr(), n, false, &mut sampled) }, CovreconStatus::Ok);

    let mut vals = vec![0.0; n];
    assert_eq!(unsafe { covrecon_eigen_values(exact, vals.as_mut_ptr(), n) }, CovreconStatus::Ok);
    let mut lam = vec![0.0; 3];
    assert_eq!(unsafe { covrecon_model_eigenvalues(m, 3, lam.as_mut_ptr()) }, CovreconStatus::Ok);
    for j in 0..3 {
        assert!((vals[j] - lam[j]).abs() < 1e-3 * lam[j]);
    }

    let mut report = CovreconErrorReport::default();
    assert_eq!(
        unsafe { covrecon_error_decomposition(m, exact, sampled, 5, &mut report) },
        CovreconStatus::Ok
    );
    assert!(report.total <= report.e1 + report.e2 + report.e3 + 1e-12);
    assert!(report.e3 > 0.0);
    let mut e1 = 0.0;
    assert_eq!(unsafe { covrecon_truncation_error(m, 5, &mut e1) }, CovreconStatus::Ok);
    assert_eq!(e1, report.e1);

    // eigensystems from different spaces cannot be compared
    let other = space(1, 8, false);
    let mut sig8 = vec![0.0; 81];
    unsafe { covrecon_projected_covariance(m, other, sig8.as_mut_ptr(), 81) };
    let mut sys8 = ptr::null_mut();
    unsafe { covrecon_eigen_new(other, sig8.as_ptr(), 9, true, &mut sys8) };
    assert_eq!(
        unsafe { covrecon_error_decomposition(m, exact, sys8, 5, &mut report) },
        CovreconStatus::SpaceMismatch
    );

    unsafe {
        covrecon_eigen_free(sys8);
        covrecon_eigen_free(exact);
        covrecon_eigen_free(sampled);
        covrecon_space_free(other);
        covrecon_space_free(s);
        covrecon_model_free(m);
    }
}

#[test]
fn plans_and_lambert() {
    let mut plan = CovreconPlan::default();
    assert_eq!(unsafe { covrecon_plan_brownian(0.01, 3, &mut plan) }, CovreconStatus::Ok);
    assert_eq!(plan.l_eps, 22);
    assert_eq!(plan.regime, 3);
    assert_eq!(unsafe { covrecon_plan_brownian(0.1, 0, &mut plan) }, CovreconStatus::Ok);
    assert_eq!(plan.regime, 2);
    assert_eq!(unsafe { covrecon_plan_brownian(2.0, 1, &mut plan) }, CovreconStatus::InvalidArgument);
    let mut w = 0.0;
    assert_eq!(unsafe { covrecon_lambert_w(1.0, 0, &mut w) }, CovreconStatus::Ok);
    assert!((w * w.exp() - 1.0).abs() < 1e-15);
    let x = -2.0 * (-2.0f64).exp();
    assert_eq!(unsafe { covrecon_lambert_w(x, -1, &mut w) }, CovreconStatus::Ok);
    assert!((w + 2.0).abs() < 1e-12);
}
