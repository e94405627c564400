//! Detector POVMs: on/off (bucket) and photon-number-resolving models with
//! binomial loss, plus outcome probabilities p(k) = Tr[Pi^k rho].

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fock::FockOperator;

/// A positive operator-valued measure: elements Pi^k summing to the identity
/// on the truncated space.
#[derive(Debug, Clone)]
pub struct Povm {
    pub elements: Vec<FockOperator>,
}

impl Povm {
    pub fn outcomes(&self) -> usize {
        self.elements.len()
    }

    pub fn cutoff(&self) -> usize {
        self.elements[0].cutoff()
    }

    /// Max-norm of sum_k Pi^k - I.
    pub fn completeness_residual(&self) -> f64 {
        let d = self.elements[0].dim();
        let mut acc = nalgebra::DMatrix::<Complex64>::zeros(d, d);
        for e in &self.elements {
            acc += e.matrix();
        }
        let mut res = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                let expect = if i == j { 1.0 } else { 0.0 };
                res = res.max((acc[(i, j)] - Complex64::new(expect, 0.0)).norm());
            }
        }
        res
    }

    /// Smallest eigenvalue over all elements; >= 0 up to tolerance.
    pub fn min_element_eigenvalue(&self) -> f64 {
        self.elements
            .iter()
            .map(|e| e.min_eigenvalue())
            .fold(f64::INFINITY, f64::min)
    }
}

/// On/off (bucket) detector with efficiency `eta_d` and dark-count
/// probability `p_dark`: the no-click element is
/// Pi^0 = (1 - p_dark)(1 - eta_d)^n, Pi^click = I - Pi^0.
pub fn onoff_detector(eta_d: f64, p_dark: f64, cutoff: usize) -> Result<Povm> {
    if !(0.0..=1.0).contains(&eta_d) {
        return Err(Error::domain(format!("eta_d = {eta_d} outside [0, 1]")));
    }
    if !(0.0..1.0).contains(&p_dark) {
        return Err(Error::domain(format!("p_dark = {p_dark} outside [0, 1)")));
    }
    let mut no_click = FockOperator::zeros(cutoff);
    for n in 0..=cutoff {
        let v = (1.0 - p_dark) * (1.0 - eta_d).powi(n as i32);
        no_click.set(n, n, Complex64::new(v, 0.0));
    }
    let mut click = FockOperator::identity(cutoff);
    for n in 0..=cutoff {
        let v = click.get(n, n) - no_click.get(n, n);
        click.set(n, n, v);
    }
    Ok(Povm {
        elements: vec![no_click, click],
    })
}

/// Photon-number-resolving detector with efficiency `eta_d` and outcomes
/// 0..k_max, the top element absorbing all k >= k_max:
/// <n|Pi^k|n> = C(n, k) eta^k (1-eta)^(n-k).
pub fn pnr_detector(eta_d: f64, k_max: usize, cutoff: usize) -> Result<Povm> {
    if !(0.0..=1.0).contains(&eta_d) {
        return Err(Error::domain(format!("eta_d = {eta_d} outside [0, 1]")));
    }
    if k_max == 0 {
        return Err(Error::domain("pnr detector needs k_max >= 1".to_string()));
    }
    let mut elements = vec![FockOperator::zeros(cutoff); k_max + 1];
    for n in 0..=cutoff {
        for k in 0..=n {
            let p = binomial(n, k) * eta_d.powi(k as i32) * (1.0 - eta_d).powi((n - k) as i32);
            let slot = k.min(k_max);
            let v = elements[slot].get(n, n) + Complex64::new(p, 0.0);
            elements[slot].set(n, n, v);
        }
    }
    Ok(Povm { elements })
}

fn binomial(n: usize, k: usize) -> f64 {
    let mut acc = 1.0f64;
    for i in 0..k {
        acc *= (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// Outcome probabilities p_k = Tr[Pi^k rho], clipped to [0, 1].
pub fn outcome_probabilities(povm: &Povm, rho: &FockOperator) -> Result<Vec<f64>> {
    if povm.cutoff() != rho.cutoff() {
        return Err(Error::CutoffMismatch {
            left: povm.cutoff(),
            right: rho.cutoff(),
        });
    }
    let tr = rho.trace().re;
    if (tr - 1.0).abs() > 1e-8 {
        return Err(Error::domain(format!(
            "density matrix trace {tr} differs from 1 beyond 1e-8"
        )));
    }
    let probs: Vec<f64> = povm
        .elements
        .iter()
        .map(|e| rho.expectation(e).re.clamp(0.0, 1.0))
        .collect();
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-8 {
        return Err(Error::numerical(format!(
            "outcome probabilities sum to {total}, expected 1"
        )));
    }
    Ok(probs)
}
