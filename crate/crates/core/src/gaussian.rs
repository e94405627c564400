//! Closed-form Gaussian calculus: two-mode squeezed vacuum covariance,
//! homodyne conditioning, and the probe-ensemble parameter formulas.
//!
//! Covariance convention: gamma_jk = <Dz_j Dz_k + Dz_k Dz_j> with
//! z = (x_A, p_A, x_B, p_B), so the matrix stores twice the usual symmetrized
//! covariance and the vacuum diagonal is 1.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::min_hermitian_eigenvalue;
use num_complex::Complex64;

/// A Gaussian state of one or two modes: mean quadrature vector and
/// covariance matrix in the doubled (vacuum = 1) convention.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl GaussianState {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Self {
        assert_eq!(mean.len() % 2, 0);
        assert_eq!(cov.nrows(), mean.len());
        assert_eq!(cov.ncols(), mean.len());
        GaussianState { mean, cov }
    }

    pub fn vacuum(modes: usize) -> Self {
        GaussianState {
            mean: DVector::zeros(2 * modes),
            cov: DMatrix::identity(2 * modes, 2 * modes),
        }
    }

    pub fn modes(&self) -> usize {
        self.mean.len() / 2
    }

    /// Symmetry residual of the covariance matrix.
    pub fn symmetry_residual(&self) -> f64 {
        let d = &self.cov - self.cov.transpose();
        d.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    /// Smallest eigenvalue of gamma + i Omega; >= 0 (up to tolerance) for a
    /// physical state.
    pub fn uncertainty_eigenvalue(&self) -> f64 {
        let n = self.mean.len();
        let mut m = DMatrix::<Complex64>::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = Complex64::new(self.cov[(i, j)], 0.0);
            }
        }
        // Omega = diag blocks [[0, 1], [-1, 0]]
        for k in 0..self.modes() {
            m[(2 * k, 2 * k + 1)] += Complex64::new(0.0, 1.0);
            m[(2 * k + 1, 2 * k)] += Complex64::new(0.0, -1.0);
        }
        min_hermitian_eigenvalue(&m)
    }

    pub fn is_physical(&self, tol: f64) -> bool {
        self.symmetry_residual() < 1e-12 && self.uncertainty_eigenvalue() > -tol
    }

    /// Mean and true variance of the rotated quadrature
    /// x_phi = x cos(phi) + p sin(phi) of a one-mode state.
    pub fn rotated_quadrature(&self, phi: f64) -> (f64, f64) {
        assert_eq!(self.modes(), 1);
        let u = Vector2::new(phi.cos(), phi.sin());
        let mu = u[0] * self.mean[0] + u[1] * self.mean[1];
        let gamma = Matrix2::new(
            self.cov[(0, 0)],
            self.cov[(0, 1)],
            self.cov[(1, 0)],
            self.cov[(1, 1)],
        );
        let var = 0.5 * (u.transpose() * gamma * u)[0];
        (mu, var)
    }

    /// One-mode state conjugated by the phase-shift operator U(phi) =
    /// exp(-i n phi), which rotates the phase-space ellipse by -phi.
    pub fn phase_shifted(&self, phi: f64) -> GaussianState {
        assert_eq!(self.modes(), 1);
        let r = phase_shift_matrix(phi);
        let mean = r * Vector2::new(self.mean[0], self.mean[1]);
        let gamma = Matrix2::new(
            self.cov[(0, 0)],
            self.cov[(0, 1)],
            self.cov[(1, 0)],
            self.cov[(1, 1)],
        );
        let g = r * gamma * r.transpose();
        GaussianState::new(
            DVector::from_row_slice(&[mean[0], mean[1]]),
            DMatrix::from_row_slice(2, 2, &[g[(0, 0)], g[(0, 1)], g[(1, 0)], g[(1, 1)]]),
        )
    }
}

/// Moment transformation matrix of conjugation by U(phi) = exp(-i n phi):
/// mean -> R mean, gamma -> R gamma R^T.
pub fn phase_shift_matrix(phi: f64) -> Matrix2<f64> {
    Matrix2::new(phi.cos(), phi.sin(), -phi.sin(), phi.cos())
}

/// Two-mode squeezed vacuum with squeezing constant `r` whose mode A went
/// through a lossy channel of transmittance `eta_a` (modeling the efficiency
/// of the mode-A homodyne detector). Zero mean; covariance
/// diag blocks 2V_A, 2V_B and off-diagonal +K (x-x), -K (p-p).
pub fn tmsv_covariance(r: f64, eta_a: f64) -> Result<GaussianState> {
    if !(0.0 < eta_a && eta_a <= 1.0) {
        return Err(Error::domain(format!("eta_a = {eta_a} outside (0, 1]")));
    }
    if r < 0.0 {
        return Err(Error::domain(format!("squeezing constant r = {r} < 0")));
    }
    let ch = (2.0 * r).cosh();
    let sh = (2.0 * r).sinh();
    let two_va = eta_a * ch + 1.0 - eta_a;
    let two_vb = ch;
    let k = eta_a.sqrt() * sh;
    let mut cov = DMatrix::zeros(4, 4);
    cov[(0, 0)] = two_va;
    cov[(1, 1)] = two_va;
    cov[(2, 2)] = two_vb;
    cov[(3, 3)] = two_vb;
    cov[(0, 2)] = k;
    cov[(2, 0)] = k;
    cov[(1, 3)] = -k;
    cov[(3, 1)] = -k;
    Ok(GaussianState::new(DVector::zeros(4), cov))
}

/// Conditional state of mode B after an ideal measurement of the rotated
/// quadrature x_A^theta = x_A cos(theta) + p_A sin(theta) with outcome
/// `x_meas` on a two-mode Gaussian state (mode A first).
pub fn condition_on_homodyne(
    state: &GaussianState,
    x_meas: f64,
    theta: f64,
) -> Result<GaussianState> {
    if state.modes() != 2 {
        return Err(Error::domain("conditioning requires a two-mode state".to_string()));
    }
    let u = Vector2::new(theta.cos(), theta.sin());
    let gamma_a = Matrix2::new(
        state.cov[(0, 0)],
        state.cov[(0, 1)],
        state.cov[(1, 0)],
        state.cov[(1, 1)],
    );
    let gamma_b = Matrix2::new(
        state.cov[(2, 2)],
        state.cov[(2, 3)],
        state.cov[(3, 2)],
        state.cov[(3, 3)],
    );
    // C has A rows, B columns.
    let c_ab = Matrix2::new(
        state.cov[(0, 2)],
        state.cov[(0, 3)],
        state.cov[(1, 2)],
        state.cov[(1, 3)],
    );
    let denom = (u.transpose() * gamma_a * u)[0];
    if denom < 1e-12 {
        return Err(Error::numerical(format!(
            "singular homodyne conditioning: measured-quadrature variance {denom:.3e}"
        )));
    }
    let ctu = c_ab.transpose() * u;
    let m_a = Vector2::new(state.mean[0], state.mean[1]);
    let m_b = Vector2::new(state.mean[2], state.mean[3]);
    let shift = ctu * ((x_meas - (u.transpose() * m_a)[0]) / denom);
    let mean = m_b + shift;
    let gamma = gamma_b - (ctu * ctu.transpose()) / denom;
    Ok(GaussianState::new(
        DVector::from_row_slice(&[mean[0], mean[1]]),
        DMatrix::from_row_slice(
            2,
            2,
            &[gamma[(0, 0)], gamma[(0, 1)], gamma[(1, 0)], gamma[(1, 1)]],
        ),
    ))
}

/// Probe-ensemble parameters recovered from the squeezed / anti-squeezed
/// variances (V_-, V_+) of the probe states.
///
/// `eta_a` is the effective efficiency of the virtual mode-A homodyne,
/// `lambda` = tanh(r) the two-mode squeezing parameter implied by V_+,
/// `v_a` the variance of the virtual mode-A quadrature outcomes, and
/// `d_coeff` the displacement of the squeezed quadrature per unit outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeEnsembleParams {
    pub v_minus: f64,
    pub v_plus: f64,
    pub eta_a: f64,
    pub lambda: f64,
    pub v_a: f64,
    pub d_coeff: f64,
}

impl ProbeEnsembleParams {
    /// The squeezing constant r implied by V_+ = cosh(2r)/2.
    pub fn squeezing_constant(&self) -> f64 {
        0.5 * (2.0 * self.v_plus + (4.0 * self.v_plus * self.v_plus - 1.0).max(0.0).sqrt()).ln()
    }
}

/// Invert the conditional-state variances into the ensemble parameters.
///
/// Requires a squeezed probe (V_- < 1/2 < V_+) and a physical pair
/// (V_+ V_- >= 1/4). Pure probes (V_+ V_- = 1/4) give eta_a = 1; an
/// overshoot up to 1e-5 (rounding of measured variances) is clamped back
/// to 1, anything larger is rejected.
pub fn probe_params_from_variances(v_minus: f64, v_plus: f64) -> Result<ProbeEnsembleParams> {
    if !(v_minus > 0.0) {
        return Err(Error::domain(format!("V- = {v_minus} must be positive")));
    }
    if v_minus >= 0.5 {
        return Err(Error::domain(format!(
            "probe not squeezed: V- = {v_minus} >= 1/2, pattern functions diverge"
        )));
    }
    if v_plus <= 0.5 {
        return Err(Error::domain(format!(
            "V+ = {v_plus} must exceed the vacuum value 1/2"
        )));
    }
    let uncertainty = v_plus * v_minus;
    if uncertainty < 0.25 * (1.0 - 1e-5) {
        return Err(Error::domain(format!(
            "unphysical variances: V+ V- = {uncertainty} < 1/4"
        )));
    }
    let mut eta_a = 2.0 * (v_plus - v_minus) / ((2.0 * v_plus - 1.0) * (2.0 * v_minus + 1.0));
    if eta_a > 1.0 {
        if eta_a > 1.0 + 1e-5 {
            return Err(Error::numerical(format!(
                "effective efficiency {eta_a} > 1 beyond tolerance"
            )));
        }
        eta_a = 1.0;
    }
    let lambda = ((2.0 * v_plus - 1.0) / (2.0 * v_plus + 1.0)).sqrt();
    let v_a = 0.5 * (2.0 * eta_a * v_plus + 1.0 - eta_a);
    let d_coeff = (2.0 * (v_plus - v_minus)).sqrt()
        * ((2.0 * v_minus + 1.0) / (2.0 * v_plus + 1.0)).sqrt();
    Ok(ProbeEnsembleParams {
        v_minus,
        v_plus,
        eta_a,
        lambda,
        v_a,
        d_coeff,
    })
}

/// Forward formulas: conditional-state variances of the two-mode squeezed
/// vacuum with mode-A efficiency eta_a. Returns (V_-, V_+).
pub fn conditional_variances(r: f64, eta_a: f64) -> (f64, f64) {
    let ch = (2.0 * r).cosh();
    let v_minus = 0.5 * (eta_a + (1.0 - eta_a) * ch) / (eta_a * ch + 1.0 - eta_a);
    let v_plus = 0.5 * ch;
    (v_minus, v_plus)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tmsv_vacuum_limit() {
        let s = tmsv_covariance(0.0, 1.0).unwrap();
        assert!((s.cov.clone() - DMatrix::identity(4, 4)).norm() < 1e-14);
    }

    #[test]
    fn tmsv_closed_forms() {
        let s = tmsv_covariance(0.5, 1.0).unwrap();
        let ch = 1.0f64.cosh();
        let sh = 1.0f64.sinh();
        assert!((s.cov[(0, 0)] - ch).abs() < 1e-12);
        assert!((s.cov[(2, 2)] - ch).abs() < 1e-12);
        assert!((s.cov[(0, 2)] - sh).abs() < 1e-12);
        assert!((s.cov[(1, 3)] + sh).abs() < 1e-12);

        let s = tmsv_covariance(0.5, 0.8).unwrap();
        assert!((s.cov[(0, 0)] - 1.434465).abs() < 1e-6, "{}", s.cov[(0, 0)]);
        assert!((s.cov[(0, 2)] - 1.051132).abs() < 1e-6, "{}", s.cov[(0, 2)]);
        assert!(s.is_physical(1e-9));
    }

    #[test]
    fn tmsv_rejects_bad_efficiency() {
        assert!(tmsv_covariance(0.5, 0.0).is_err());
        assert!(tmsv_covariance(0.5, 1.5).is_err());
    }

    #[test]
    fn conditioning_variances_and_displacement() {
        let s = tmsv_covariance(0.5, 1.0).unwrap();
        let cond = condition_on_homodyne(&s, 0.0, 0.0).unwrap();
        assert!(cond.mean.norm() < 1e-14);
        let ch = 1.0f64.cosh();
        assert!((cond.cov[(0, 0)] - 1.0 / ch).abs() < 1e-12, "{}", cond.cov[(0, 0)]);
        assert!((cond.cov[(1, 1)] - ch).abs() < 1e-12);

        let cond = condition_on_homodyne(&s, 1.0, 0.0).unwrap();
        assert!((cond.mean[0] - 1.0f64.tanh()).abs() < 1e-12);
        assert!(cond.mean[1].abs() < 1e-14);
    }

    #[test]
    fn conditioning_uncorrelated_modes() {
        let s = tmsv_covariance(0.0, 1.0).unwrap();
        for x in [-2.0, 0.0, 3.5] {
            let cond = condition_on_homodyne(&s, x, 0.7).unwrap();
            assert!(cond.mean.norm() < 1e-14);
            assert!((cond.cov.clone() - DMatrix::identity(2, 2)).norm() < 1e-14);
        }
    }

    #[test]
    fn conditional_covariance_independent_of_outcome() {
        let s = tmsv_covariance(0.8, 0.7).unwrap();
        let a = condition_on_homodyne(&s, 0.0, 1.1).unwrap();
        let b = condition_on_homodyne(&s, 4.0, 1.1).unwrap();
        assert!((a.cov - b.cov).norm() < 1e-13);
    }

    #[test]
    fn probe_params_pure_probe() {
        // exact pure-probe variances at r = 0.5
        let ch = 1.0f64.cosh();
        let p = probe_params_from_variances(0.5 / ch, 0.5 * ch).unwrap();
        assert!((p.eta_a - 1.0).abs() < 1e-12);
        assert!((p.lambda - 0.5f64.tanh()).abs() < 1e-12);

        // rounded values from the same point
        let p = probe_params_from_variances(0.324027, 0.771540).unwrap();
        assert!((p.eta_a - 1.0).abs() < 1e-5, "{}", p.eta_a);
        assert!((p.lambda - 0.462117).abs() < 1e-5, "{}", p.lambda);
    }

    #[test]
    fn probe_params_mixed_probe() {
        let p = probe_params_from_variances(0.386421, 0.771540).unwrap();
        assert!((p.eta_a - 0.8).abs() < 1e-5, "{}", p.eta_a);
    }

    #[test]
    fn probe_params_infinite_antisqueezing_limit() {
        let p = probe_params_from_variances(0.25, 1e9).unwrap();
        assert!((p.eta_a - 1.0 / 1.5).abs() < 1e-8, "{}", p.eta_a);
    }

    #[test]
    fn probe_params_rejections() {
        assert!(probe_params_from_variances(0.5, 1.0).is_err());
        assert!(probe_params_from_variances(0.6, 1.0).is_err());
        assert!(probe_params_from_variances(0.1, 0.4).is_err());
        // unphysical: V+V- < 1/4
        assert!(probe_params_from_variances(0.2, 0.8).is_err());
    }

    #[test]
    fn inversion_round_trip_grid() {
        for i in 0..10 {
            let r = 0.1 + 0.1 * i as f64;
            for j in 0..10 {
                let eta = 0.55 + 0.05 * j as f64;
                let (vm, vp) = conditional_variances(r, eta);
                let p = probe_params_from_variances(vm, vp).unwrap();
                assert!((p.eta_a - eta).abs() < 1e-9, "r={r} eta={eta}: {}", p.eta_a);
                assert!((p.lambda - r.tanh()).abs() < 1e-9);
                // consistency loop: forward formulas reproduce the variances
                let (vm2, vp2) = conditional_variances(p.squeezing_constant(), p.eta_a);
                assert!((vm2 - vm).abs() < 1e-10);
                assert!((vp2 - vp).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn conditioning_matches_parameter_formulas() {
        for (r, eta) in [(0.3, 0.9), (0.7, 0.6), (1.0, 1.0)] {
            let s = tmsv_covariance(r, eta).unwrap();
            let (vm, vp) = conditional_variances(r, eta);
            let cond = condition_on_homodyne(&s, 1.3, 0.0).unwrap();
            assert!((cond.cov[(0, 0)] - 2.0 * vm).abs() < 1e-12);
            assert!((cond.cov[(1, 1)] - 2.0 * vp).abs() < 1e-12);
            let p = probe_params_from_variances(vm, vp).unwrap();
            assert!((cond.mean[0] - p.d_coeff * 1.3).abs() < 1e-12);
        }
    }
}
