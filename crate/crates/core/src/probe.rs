//! Synthesis of the single-mode probe states: displaced, rotated squeezed
//! thermal states with prescribed (V_-, V_+, d, theta), in both Gaussian and
//! Fock representations.
//!
//! The probe for homodyne angle theta is the conditional state of mode B of
//! the (virtual) two-mode squeezed vacuum given outcome x_a, which equals the
//! theta = 0 conditional state conjugated by the phase-shift operator
//! U(theta) = exp(-i n theta).

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fock::{self, FockOperator};
use crate::gaussian::{GaussianState, ProbeEnsembleParams};
use crate::linalg::CMatrix;

/// Default tolerance for the probe truncation check.
pub const TRUNCATION_TOL: f64 = 1e-6;

/// One probe preparation: rotation angle, virtual mode-A outcome, resulting
/// displacement of the squeezed quadrature, and the fixed variances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeSetting {
    pub theta: f64,
    pub x_a: f64,
    pub d: f64,
    pub v_minus: f64,
    pub v_plus: f64,
}

impl ProbeSetting {
    pub fn from_params(params: &ProbeEnsembleParams, theta: f64, x_a: f64) -> Self {
        ProbeSetting {
            theta,
            x_a,
            d: params.d_coeff * x_a,
            v_minus: params.v_minus,
            v_plus: params.v_plus,
        }
    }
}

/// Decompose probe variances into a squeezed thermal state:
/// 2 n_bar + 1 = 2 sqrt(V+ V-), e^{2s} = sqrt(V+ / V-), so that
/// S(s) rho_th(n_bar) S(s)^dag has x-variance V- and p-variance V+.
pub fn squeezed_thermal_decomposition(v_minus: f64, v_plus: f64) -> Result<(f64, f64)> {
    if v_minus <= 0.0 || v_plus <= v_minus {
        return Err(Error::domain(format!(
            "need 0 < V- < V+, got V- = {v_minus}, V+ = {v_plus}"
        )));
    }
    let product = v_plus * v_minus;
    if product < 0.25 * (1.0 - 1e-5) {
        return Err(Error::domain(format!(
            "unphysical variances: V+ V- = {product} < 1/4"
        )));
    }
    let n_bar = (product.max(0.25).sqrt() - 0.5).max(0.0);
    let s = 0.25 * (v_plus / v_minus).ln();
    Ok((n_bar, s))
}

/// The probe in the Gaussian picture: mean (d, 0) and covariance
/// diag(2V-, 2V+), conjugated by U(theta).
pub fn probe_gaussian_state(setting: &ProbeSetting) -> GaussianState {
    let base = GaussianState::new(
        DVector::from_row_slice(&[setting.d, 0.0]),
        DMatrix::from_row_slice(
            2,
            2,
            &[2.0 * setting.v_minus, 0.0, 0.0, 2.0 * setting.v_plus],
        ),
    );
    base.phase_shifted(setting.theta)
}

/// Truncation diagnostic: `true` iff the population of the top three Fock
/// levels is below `epsilon` and the trace deficit is below `epsilon`.
/// Returns the leaked edge mass alongside.
pub fn truncation_check(rho: &FockOperator, epsilon: f64) -> (bool, f64) {
    let leak = rho.edge_population(3);
    let trace_deficit = (1.0 - rho.trace().re).abs();
    (leak < epsilon && trace_deficit < epsilon, leak)
}

/// Precomputed machinery for building probe states quickly, shot after shot.
///
/// The squeezed thermal state is held as its exact pure-state mixture
/// S|j><j|S^dag with geometric weights; displacement and rotation are applied
/// per component. Thermal components are kept until the discarded weight
/// drops below `tail_tol`.
pub struct ProbeFactory {
    cutoff: usize,
    n_bar: f64,
    exp_s: f64,
    weights: Vec<f64>,
    squeeze: CMatrix,
}

impl ProbeFactory {
    pub fn new(v_minus: f64, v_plus: f64, cutoff: usize, tail_tol: f64) -> Result<Self> {
        let (n_bar, s) = squeezed_thermal_decomposition(v_minus, v_plus)?;
        let mut weights = Vec::new();
        let ratio = n_bar / (n_bar + 1.0);
        let mut w = 1.0 / (n_bar + 1.0);
        let mut tail = 1.0;
        while tail > tail_tol && weights.len() <= cutoff {
            weights.push(w);
            tail -= w;
            w *= ratio;
        }
        let squeeze = fock::squeeze_operator(s, cutoff).into_matrix();
        Ok(ProbeFactory {
            cutoff,
            n_bar,
            exp_s: s.exp(),
            weights,
            squeeze,
        })
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn n_bar(&self) -> f64 {
        self.n_bar
    }

    /// Pure-state mixture of the probe at the given setting:
    /// components (w_j, U(theta) D(d/sqrt(2)) S |j>).
    ///
    /// Uses D(alpha) S = S D(alpha e^s) for real alpha, with the displaced
    /// number states built by exact recurrence, so no per-shot matrix
    /// exponential is needed.
    pub fn components(&self, theta: f64, d: f64) -> Vec<(f64, DVector<Complex64>)> {
        let beta = d / 2.0f64.sqrt() * self.exp_s;
        let displaced = displaced_number_amplitudes(beta, self.weights.len() - 1, self.cutoff);
        let dim = self.cutoff + 1;
        let phases: Vec<Complex64> = (0..dim)
            .map(|n| Complex64::from_polar(1.0, -(n as f64) * theta))
            .collect();
        self.weights
            .iter()
            .zip(displaced.iter())
            .map(|(&w, col)| {
                let mut v = &self.squeeze * col;
                for n in 0..dim {
                    v[n] *= phases[n];
                }
                (w, v)
            })
            .collect()
    }

    /// Assemble the probe density matrix from its components.
    pub fn density(&self, theta: f64, d: f64) -> FockOperator {
        let dim = self.cutoff + 1;
        let mut m = CMatrix::zeros(dim, dim);
        for (w, v) in self.components(theta, d) {
            m += (&v * v.adjoint()).map(|z| z * Complex64::new(w, 0.0));
        }
        FockOperator::from_matrix(m)
    }
}

/// Fock-space density matrix of the probe, with a truncation check at the
/// default tolerance.
pub fn probe_fock_state(setting: &ProbeSetting, cutoff: usize) -> Result<FockOperator> {
    let factory = ProbeFactory::new(setting.v_minus, setting.v_plus, cutoff, 1e-12)?;
    let rho = factory.density(setting.theta, setting.d);
    let (ok, leak) = truncation_check(&rho, TRUNCATION_TOL);
    if !ok {
        return Err(Error::Truncation {
            leaked: leak.max((1.0 - rho.trace().re).abs()),
            tolerance: TRUNCATION_TOL,
        });
    }
    Ok(rho)
}

/// Fock amplitudes of the displaced number states D(beta)|j> for real beta,
/// j = 0..=j_max, by the exact recurrence
/// sqrt(n+1) <n+1|D|j> = sqrt(j) <n|D|j-1> + beta <n|D|j>.
pub fn displaced_number_amplitudes(beta: f64, j_max: usize, cutoff: usize) -> Vec<DVector<Complex64>> {
    let dim = cutoff + 1;
    let mut cols: Vec<DVector<f64>> = Vec::with_capacity(j_max + 1);
    // coherent column j = 0
    let mut c0 = DVector::zeros(dim);
    c0[0] = (-0.5 * beta * beta).exp();
    for n in 1..dim {
        c0[n] = c0[n - 1] * beta / (n as f64).sqrt();
    }
    cols.push(c0);
    for j in 1..=j_max {
        let mut cj = DVector::zeros(dim);
        // <0|D|j> = e^{-b^2/2} (-b)^j / sqrt(j!)
        let mut first = (-0.5 * beta * beta).exp();
        for i in 1..=j {
            first *= -beta / (i as f64).sqrt();
        }
        cj[0] = first;
        let sqrt_j = (j as f64).sqrt();
        for n in 0..dim - 1 {
            cj[n + 1] = (sqrt_j * cols[j - 1][n] + beta * cj[n]) / ((n + 1) as f64).sqrt();
        }
        cols.push(cj);
    }
    cols.into_iter()
        .map(|c| c.map(|x| Complex64::new(x, 0.0)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{
        displacement_operator, fock_projector, phase_operator, squeeze_operator, thermal_state,
        x_operator,
    };
    use crate::gaussian::{condition_on_homodyne, probe_params_from_variances, tmsv_covariance};
    use crate::linalg::max_abs_diff;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn decomposition_pure_probe() {
        // conditional variances of the r = 0.5 two-mode squeezed vacuum:
        // V+/V- = cosh^2(2r), so the single-mode squeezing is ln(cosh 2r)/2
        let ch = 1.0f64.cosh();
        let (n_bar, s) = squeezed_thermal_decomposition(0.5 / ch, 0.5 * ch).unwrap();
        assert!(n_bar.abs() < 1e-12);
        assert!((s - 0.5 * ch.ln()).abs() < 1e-12);
    }

    #[test]
    fn decomposition_mixed_probe() {
        let (n_bar, _) = squeezed_thermal_decomposition(0.386421, 0.771540).unwrap();
        let expect = ((4.0f64 * 0.386421 * 0.771540).sqrt() - 1.0) / 2.0;
        assert!((n_bar - expect).abs() < 1e-12);
        assert!((n_bar - 0.046065).abs() < 1e-4, "{n_bar}");
    }

    #[test]
    fn decomposition_rejections() {
        assert!(squeezed_thermal_decomposition(0.4, 0.4).is_err());
        assert!(squeezed_thermal_decomposition(0.2, 0.8).is_err());
    }

    #[test]
    fn decomposition_reproduces_variances() {
        let cutoff = 50;
        let (vm, vp) = (0.386421, 0.771540);
        let (n_bar, s) = squeezed_thermal_decomposition(vm, vp).unwrap();
        let sq = squeeze_operator(s, cutoff);
        let rho = thermal_state(n_bar, cutoff).conjugate_by(&sq).unwrap();
        let (mean, gamma) = rho.quadrature_moments();
        assert!(mean.norm() < 1e-10);
        assert!((gamma[(0, 0)] - 2.0 * vm).abs() < 1e-8, "{}", gamma[(0, 0)]);
        assert!((gamma[(1, 1)] - 2.0 * vp).abs() < 1e-8, "{}", gamma[(1, 1)]);
    }

    #[test]
    fn squeezed_vacuum_ground_amplitude() {
        let ch = 0.5f64.cosh();
        let setting = ProbeSetting {
            theta: 0.0,
            x_a: 0.0,
            d: 0.0,
            v_minus: 0.5 * (-1.0f64).exp(),
            v_plus: 0.5 * 1.0f64.exp(),
        };
        let rho = probe_fock_state(&setting, 40).unwrap();
        assert!((rho.get(0, 0).re - 1.0 / ch).abs() < 1e-10, "{}", rho.get(0, 0));
    }

    #[test]
    fn factory_matches_operator_construction() {
        let cutoff = 40;
        let (vm, vp) = (0.386421, 0.771540);
        let (n_bar, s) = squeezed_thermal_decomposition(vm, vp).unwrap();
        let factory = ProbeFactory::new(vm, vp, cutoff, 1e-14).unwrap();
        for (theta, d) in [(0.0, 0.0), (0.9, 1.3), (4.4, -2.0)] {
            let direct = thermal_state(n_bar, cutoff)
                .conjugate_by(&squeeze_operator(s, cutoff))
                .unwrap()
                .conjugate_by(&displacement_operator(
                    Complex64::new(d / 2.0f64.sqrt(), 0.0),
                    cutoff,
                ))
                .unwrap()
                .conjugate_by(&phase_operator(theta, cutoff))
                .unwrap();
            let fast = factory.density(theta, d);
            assert!(
                max_abs_diff(direct.matrix(), fast.matrix()) < 1e-9,
                "theta={theta} d={d}"
            );
        }
    }

    #[test]
    fn quarter_rotation_swaps_variances() {
        let setting = ProbeSetting {
            theta: std::f64::consts::FRAC_PI_2,
            x_a: 0.0,
            d: 0.0,
            v_minus: 0.3,
            v_plus: 0.9,
        };
        let rho = probe_fock_state(&setting, 40).unwrap();
        let (_, gamma) = rho.quadrature_moments();
        assert!((gamma[(0, 0)] - 1.8).abs() < 1e-7);
        assert!((gamma[(1, 1)] - 0.6).abs() < 1e-7);
    }

    #[test]
    fn gaussian_and_fock_pictures_agree() {
        let cutoff = 40;
        let mut rng = StdRng::seed_from_u64(11);
        let params = probe_params_from_variances(0.35, 0.85).unwrap();
        for _ in 0..50 {
            let theta = rng.gen_range(0.0..2.0 * std::f64::consts::PI);
            let x_a = rng.gen_range(-2.5..2.5);
            let setting = ProbeSetting::from_params(&params, theta, x_a);
            let gauss = probe_gaussian_state(&setting);
            let rho = probe_fock_state(&setting, cutoff).unwrap();
            let (mean, gamma) = rho.quadrature_moments();
            assert!((mean[0] - gauss.mean[0]).abs() < 1e-6);
            assert!((mean[1] - gauss.mean[1]).abs() < 1e-6);
            for i in 0..2 {
                for j in 0..2 {
                    assert!((gamma[(i, j)] - gauss.cov[(i, j)]).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn probe_matches_conditional_state() {
        // the module's core contract, against the unambiguous two-mode
        // Gaussian conditioning
        let mut rng = StdRng::seed_from_u64(5);
        for (r, eta) in [(0.5, 1.0), (0.5, 0.8), (0.9, 0.62)] {
            let tmsv = tmsv_covariance(r, eta).unwrap();
            let (vm, vp) = crate::gaussian::conditional_variances(r, eta);
            let params = probe_params_from_variances(vm, vp).unwrap();
            for _ in 0..20 {
                let theta = rng.gen_range(0.0..2.0 * std::f64::consts::PI);
                let x_a = rng.gen_range(-3.0..3.0);
                let cond = condition_on_homodyne(&tmsv, x_a, theta).unwrap();
                let synth = probe_gaussian_state(&ProbeSetting::from_params(&params, theta, x_a));
                assert!((cond.mean[0] - synth.mean[0]).abs() < 1e-9);
                assert!((cond.mean[1] - synth.mean[1]).abs() < 1e-9);
                assert!((cond.cov.clone() - synth.cov.clone()).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn probe_covariance_independent_of_outcome() {
        let params = probe_params_from_variances(0.33, 0.9).unwrap();
        let a = probe_gaussian_state(&ProbeSetting::from_params(&params, 1.1, 0.0));
        let b = probe_gaussian_state(&ProbeSetting::from_params(&params, 1.1, 2.7));
        assert!((a.cov - b.cov).norm() < 1e-14);
        assert!(a.mean != b.mean);
    }

    #[test]
    fn truncation_check_examples() {
        let vacuum = fock_projector(0, 20);
        let (ok, leak) = truncation_check(&vacuum, 1e-6);
        assert!(ok);
        assert_eq!(leak, 0.0);

        let strong = thermal_state(0.0, 10)
            .conjugate_by(&squeeze_operator(1.2, 10))
            .unwrap();
        let (ok, _) = truncation_check(&strong, 1e-6);
        assert!(!ok);

        let displaced = fock_projector(0, 15)
            .conjugate_by(&displacement_operator(
                Complex64::new(6.0 / 2.0f64.sqrt(), 0.0),
                15,
            ))
            .unwrap();
        let (ok, _) = truncation_check(&displaced, 1e-6);
        assert!(!ok);
    }

    #[test]
    fn displaced_number_amplitudes_match_operator() {
        let cutoff = 35;
        let beta = 1.7;
        let cols = displaced_number_amplitudes(beta, 4, cutoff);
        let d = displacement_operator(Complex64::new(beta, 0.0), cutoff);
        for (j, col) in cols.iter().enumerate() {
            for n in 0..=cutoff - 8 {
                let err = (col[n] - d.get(n, j)).norm();
                assert!(err < 1e-9, "j={j} n={n}: {err}");
            }
        }
        // x-expectation of D(beta)|0> is sqrt(2) beta
        let rho = crate::fock::pure_state(&cols[0]);
        let x = rho.expectation(&x_operator(cutoff));
        assert!((x.re - 2.0f64.sqrt() * beta).abs() < 1e-9);
    }
}
