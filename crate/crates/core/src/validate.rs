//! Coarse self-check suites, one per subsystem, for the command-line
//! `validate` task. Each suite returns a short failure description instead of
//! panicking so the harness can report and exit cleanly.

use num_complex::Complex64;

use crate::channel::{choi_from_kraus, identity_channel, loss_channel, phase_channel};
use crate::detector::{onoff_detector, outcome_probabilities};
use crate::fock::{self, fock_projector};
use crate::gaussian::{
    condition_on_homodyne, conditional_variances, probe_params_from_variances, tmsv_covariance,
};
use crate::homodyne::{quadrature_distribution, GridSpec};
use crate::pattern::{verify_unbiasedness, PatternTable};
use crate::probe::{probe_gaussian_state, ProbeSetting};

type Check = (&'static str, fn() -> Result<(), String>);

pub fn suites() -> Vec<Check> {
    vec![
        ("fock-operators", check_fock),
        ("gaussian-calculus", check_gaussian),
        ("picture-equivalence", check_equivalence),
        ("channels-choi", check_channels),
        ("detector-povm", check_detectors),
        ("homodyne-distributions", check_homodyne),
        ("pattern-unbiasedness", check_patterns),
    ]
}

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn check_fock() -> Result<(), String> {
    let a = fock::annihilation(12);
    let num = a.dagger().mul(&a).map_err(|e| e.to_string())?;
    for k in 0..=12 {
        ensure(
            (num.get(k, k).re - k as f64).abs() < 1e-12,
            format!("number operator diagonal at {k}"),
        )?;
    }
    let d = fock::displacement_operator(Complex64::new(1.0, 0.0), 30);
    ensure(
        (d.get(0, 0).re - (-0.5f64).exp()).abs() < 1e-8,
        "displacement vacuum overlap",
    )?;
    let s = fock::squeeze_operator(0.5, 40);
    let vac = fock_projector(0, 40).conjugate_by(&s).map_err(|e| e.to_string())?;
    let (_, gamma) = vac.quadrature_moments();
    ensure(
        (gamma[(0, 0)] - (-1.0f64).exp()).abs() < 1e-6,
        "squeezed-vacuum variance",
    )
}

fn check_gaussian() -> Result<(), String> {
    for i in 0..10 {
        let r = 0.1 + 0.1 * i as f64;
        for j in 0..10 {
            let eta = 0.55 + 0.05 * j as f64;
            let (vm, vp) = conditional_variances(r, eta);
            let p = probe_params_from_variances(vm, vp).map_err(|e| e.to_string())?;
            ensure(
                (p.eta_a - eta).abs() < 1e-9 && (p.lambda - r.tanh()).abs() < 1e-9,
                format!("round trip failed at r={r}, eta={eta}"),
            )?;
        }
    }
    Ok(())
}

fn check_equivalence() -> Result<(), String> {
    let mut x = 0.37f64;
    for (r, eta) in [(0.5, 1.0), (0.5, 0.8), (0.9, 0.62)] {
        let tmsv = tmsv_covariance(r, eta).map_err(|e| e.to_string())?;
        let (vm, vp) = conditional_variances(r, eta);
        let params = probe_params_from_variances(vm, vp).map_err(|e| e.to_string())?;
        for k in 0..10 {
            x = (x * 73.0 + k as f64).rem_euclid(7.0) - 3.5;
            let theta = (x * 1.7).rem_euclid(std::f64::consts::TAU);
            let cond = condition_on_homodyne(&tmsv, x, theta).map_err(|e| e.to_string())?;
            let synth = probe_gaussian_state(&ProbeSetting::from_params(&params, theta, x));
            let err = (cond.mean.clone() - synth.mean.clone()).norm()
                + (cond.cov.clone() - synth.cov.clone()).norm();
            ensure(err < 1e-9, format!("pictures differ by {err} at r={r}, eta={eta}"))?;
        }
    }
    Ok(())
}

fn check_channels() -> Result<(), String> {
    let chi = choi_from_kraus(&identity_channel(12), 3).map_err(|e| e.to_string())?;
    for k in 0..4 {
        for m in 0..4 {
            for l in 0..4 {
                for n in 0..4 {
                    let expect = if k == m && l == n { 1.0 } else { 0.0 };
                    ensure(
                        (chi.get(k, m, l, n) - Complex64::new(expect, 0.0)).norm() < 1e-12,
                        "identity Choi",
                    )?;
                }
            }
        }
    }
    let chi = choi_from_kraus(&loss_channel(0.7, 12).map_err(|e| e.to_string())?, 3)
        .map_err(|e| e.to_string())?;
    ensure(
        (chi.get(1, 1, 0, 0).re - 0.7f64.sqrt()).abs() < 1e-12,
        "loss Choi coherence",
    )?;
    ensure(chi.min_eigenvalue() > -1e-10, "loss Choi positivity")?;
    let chi = choi_from_kraus(&phase_channel(0.5, 12), 3).map_err(|e| e.to_string())?;
    ensure(
        (chi.get(0, 0, 1, 1) - Complex64::from_polar(1.0, 0.5)).norm() < 1e-12,
        "phase Choi sign",
    )
}

fn check_detectors() -> Result<(), String> {
    let povm = onoff_detector(0.6, 0.0, 30).map_err(|e| e.to_string())?;
    ensure(povm.completeness_residual() < 1e-12, "on/off completeness")?;
    ensure(povm.min_element_eigenvalue() > -1e-12, "on/off positivity")?;
    let p = outcome_probabilities(&povm, &fock_projector(1, 30)).map_err(|e| e.to_string())?;
    ensure((p[1] - 0.6).abs() < 1e-12, "single-photon click probability")
}

fn check_homodyne() -> Result<(), String> {
    let spec = GridSpec::new(-9.0, 9.0, 2001);
    let g = quadrature_distribution(&fock_projector(1, 10), 0.0, 0.8, &spec)
        .map_err(|e| e.to_string())?;
    ensure((g.moment(2) - 1.3).abs() < 1e-6, "smeared |1> variance")?;
    ensure((g.mass - 1.0).abs() < 1e-6, "grid mass")
}

fn check_patterns() -> Result<(), String> {
    let table = PatternTable::build_auto(2, 0.9, 10.0).map_err(|e| e.to_string())?;
    for n in 0..=1usize {
        let err = verify_unbiasedness(&table, &fock_projector(n, 12), 0.9)
            .map_err(|e| e.to_string())?;
        ensure(err < 1e-3, format!("unbiasedness on |{n}> is {err}"))?;
    }
    Ok(())
}
