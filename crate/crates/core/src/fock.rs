//! Truncated Fock-space linear algebra.
//!
//! Conventions used throughout the crate:
//!   x = (a + a^dag)/sqrt(2),  p = i(a^dag - a)/sqrt(2),  [x, p] = i,
//! so the vacuum has quadrature variance 1/2. The phase-shift operator is
//! U(theta) = exp(-i n theta); conjugating a state with U(theta) rotates its
//! phase-space ellipse by -theta.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};

pub const PI: f64 = std::f64::consts::PI;

/// A complex operator on the truncated Fock space {|0>, ..., |N_c>}.
///
/// Represents states (density matrices), Kraus operators and unitaries alike;
/// entry (m, n) is <m|A|n>.
#[derive(Debug, Clone, PartialEq)]
pub struct FockOperator {
    cutoff: usize,
    entries: CMatrix,
}

impl FockOperator {
    pub fn from_matrix(entries: CMatrix) -> Self {
        assert_eq!(entries.nrows(), entries.ncols(), "operator must be square");
        assert!(entries.nrows() >= 2, "cutoff must be >= 1");
        FockOperator {
            cutoff: entries.nrows() - 1,
            entries,
        }
    }

    pub fn zeros(cutoff: usize) -> Self {
        assert!(cutoff >= 1);
        FockOperator {
            cutoff,
            entries: CMatrix::zeros(cutoff + 1, cutoff + 1),
        }
    }

    pub fn identity(cutoff: usize) -> Self {
        assert!(cutoff >= 1);
        FockOperator {
            cutoff,
            entries: CMatrix::identity(cutoff + 1, cutoff + 1),
        }
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn dim(&self) -> usize {
        self.cutoff + 1
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.entries
    }

    pub fn into_matrix(self) -> CMatrix {
        self.entries
    }

    pub fn get(&self, m: usize, n: usize) -> Complex64 {
        self.entries[(m, n)]
    }

    pub fn set(&mut self, m: usize, n: usize, v: Complex64) {
        self.entries[(m, n)] = v;
    }

    pub fn dagger(&self) -> Self {
        FockOperator {
            cutoff: self.cutoff,
            entries: self.entries.adjoint(),
        }
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_cutoff(other)?;
        Ok(FockOperator {
            cutoff: self.cutoff,
            entries: &self.entries * &other.entries,
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_cutoff(other)?;
        Ok(FockOperator {
            cutoff: self.cutoff,
            entries: &self.entries + &other.entries,
        })
    }

    pub fn scale(&self, c: Complex64) -> Self {
        FockOperator {
            cutoff: self.cutoff,
            entries: self.entries.map(|z| z * c),
        }
    }

    pub fn trace(&self) -> Complex64 {
        self.entries.diagonal().sum()
    }

    pub fn apply(&self, v: &DVector<Complex64>) -> DVector<Complex64> {
        &self.entries * v
    }

    /// Conjugation U . self . U^dag.
    pub fn conjugate_by(&self, u: &Self) -> Result<Self> {
        self.check_cutoff(u)?;
        Ok(FockOperator {
            cutoff: self.cutoff,
            entries: &u.entries * &self.entries * u.entries.adjoint(),
        })
    }

    pub fn check_cutoff(&self, other: &Self) -> Result<()> {
        if self.cutoff != other.cutoff {
            return Err(Error::CutoffMismatch {
                left: self.cutoff,
                right: other.cutoff,
            });
        }
        Ok(())
    }

    /// Max-norm of A - A^dag.
    pub fn hermiticity_residual(&self) -> f64 {
        linalg::hermiticity_residual(&self.entries)
    }

    /// Smallest eigenvalue, valid for Hermitian operators.
    pub fn min_eigenvalue(&self) -> f64 {
        linalg::min_hermitian_eigenvalue(&self.entries)
    }

    /// Expectation Tr[self * obs].
    pub fn expectation(&self, obs: &Self) -> Complex64 {
        debug_assert_eq!(self.cutoff, obs.cutoff);
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                acc += self.entries[(i, j)] * obs.entries[(j, i)];
            }
        }
        acc
    }

    /// First and second quadrature moments of a density matrix: returns
    /// (mean = (<x>, <p>), gamma) with gamma_jk = <Dz_j Dz_k + Dz_k Dz_j>.
    pub fn quadrature_moments(&self) -> (nalgebra::Vector2<f64>, nalgebra::Matrix2<f64>) {
        let x = x_operator(self.cutoff);
        let p = p_operator(self.cutoff);
        let mx = self.expectation(&x).re;
        let mp = self.expectation(&p).re;
        let xx = self.expectation(&x.mul(&x).unwrap()).re;
        let pp = self.expectation(&p.mul(&p).unwrap()).re;
        let xp = self
            .expectation(&x.mul(&p).unwrap().add(&p.mul(&x).unwrap()).unwrap())
            .re;
        let mean = nalgebra::Vector2::new(mx, mp);
        let g_xx = 2.0 * (xx - mx * mx);
        let g_pp = 2.0 * (pp - mp * mp);
        let g_xp = xp - 2.0 * mx * mp;
        let gamma = nalgebra::Matrix2::new(g_xx, g_xp, g_xp, g_pp);
        (mean, gamma)
    }

    /// Population of the top `levels` Fock levels.
    pub fn edge_population(&self, levels: usize) -> f64 {
        let d = self.dim();
        let lo = d.saturating_sub(levels);
        (lo..d).map(|n| self.entries[(n, n)].re).sum()
    }
}

/// Annihilation operator: entry (n-1, n) = sqrt(n).
pub fn annihilation(cutoff: usize) -> FockOperator {
    let mut a = FockOperator::zeros(cutoff);
    for n in 1..=cutoff {
        a.set(n - 1, n, Complex64::new((n as f64).sqrt(), 0.0));
    }
    a
}

/// Creation operator a^dag.
pub fn creation(cutoff: usize) -> FockOperator {
    annihilation(cutoff).dagger()
}

/// Number operator a^dag a (diagonal 0, 1, ..., N_c).
pub fn number_operator(cutoff: usize) -> FockOperator {
    let mut n_op = FockOperator::zeros(cutoff);
    for n in 0..=cutoff {
        n_op.set(n, n, Complex64::new(n as f64, 0.0));
    }
    n_op
}

/// Quadrature x = (a + a^dag)/sqrt(2).
pub fn x_operator(cutoff: usize) -> FockOperator {
    let a = annihilation(cutoff);
    let mut m = a.matrix() + a.matrix().adjoint();
    m /= Complex64::new(2.0f64.sqrt(), 0.0);
    FockOperator::from_matrix(m)
}

/// Quadrature p = i(a^dag - a)/sqrt(2).
pub fn p_operator(cutoff: usize) -> FockOperator {
    let a = annihilation(cutoff);
    let m = (a.matrix().adjoint() - a.matrix()).map(|z| z * Complex64::new(0.0, 1.0 / 2.0f64.sqrt()));
    FockOperator::from_matrix(m)
}

/// Phase-shift operator U(theta) = exp(-i n theta), diagonal.
pub fn phase_operator(theta: f64, cutoff: usize) -> FockOperator {
    let mut u = FockOperator::zeros(cutoff);
    for n in 0..=cutoff {
        u.set(n, n, Complex64::from_polar(1.0, -(n as f64) * theta));
    }
    u
}

/// Displacement operator D(alpha) = exp(alpha a^dag - alpha* a).
pub fn displacement_operator(alpha: Complex64, cutoff: usize) -> FockOperator {
    let a = annihilation(cutoff);
    let g = a.matrix().adjoint().map(|z| z) * alpha - a.matrix().map(|z| z * alpha.conj());
    FockOperator::from_matrix(linalg::exp_antihermitian(&g))
}

/// Squeeze operator S(s) = exp[(s/2)(a^2 - a^dag^2)]; squeezes x for s > 0:
/// the x-variance of S|0> is exp(-2s)/2.
pub fn squeeze_operator(s: f64, cutoff: usize) -> FockOperator {
    let a = annihilation(cutoff);
    let a2 = a.matrix() * a.matrix();
    let g = (&a2 - a2.adjoint()).map(|z| z * Complex64::new(0.5 * s, 0.0));
    FockOperator::from_matrix(linalg::exp_antihermitian(&g))
}

/// Projector |n><n|.
pub fn fock_projector(n: usize, cutoff: usize) -> FockOperator {
    assert!(n <= cutoff);
    let mut p = FockOperator::zeros(cutoff);
    p.set(n, n, Complex64::new(1.0, 0.0));
    p
}

/// Fock-basis amplitudes of the coherent state |alpha> up to the cutoff.
pub fn coherent_amplitudes(alpha: Complex64, cutoff: usize) -> DVector<Complex64> {
    let mut c = DVector::zeros(cutoff + 1);
    let norm = (-0.5 * alpha.norm_sqr()).exp();
    let mut amp = Complex64::new(norm, 0.0);
    c[0] = amp;
    for n in 1..=cutoff {
        amp *= alpha / Complex64::new((n as f64).sqrt(), 0.0);
        c[n] = amp;
    }
    c
}

/// Density matrix of a thermal state with mean photon number `n_bar`,
/// truncated (not renormalized; the geometric tail past the cutoff is lost).
pub fn thermal_state(n_bar: f64, cutoff: usize) -> FockOperator {
    assert!(n_bar >= 0.0);
    let mut rho = FockOperator::zeros(cutoff);
    let ratio = n_bar / (n_bar + 1.0);
    let mut p = 1.0 / (n_bar + 1.0);
    for n in 0..=cutoff {
        rho.set(n, n, Complex64::new(p, 0.0));
        p *= ratio;
    }
    rho
}

/// Density matrix built from a pure-state amplitude vector.
pub fn pure_state(v: &DVector<Complex64>) -> FockOperator {
    let m = v * v.adjoint();
    FockOperator::from_matrix(m)
}

/// Harmonic-oscillator eigenfunctions psi_0..psi_{n_max} at `x`, by stable
/// upward recurrence. psi_n(x) = (2^n n! sqrt(pi))^(-1/2) H_n(x) exp(-x^2/2).
pub fn hermite_wavefunctions(n_max: usize, x: f64) -> Vec<f64> {
    let mut psi = Vec::with_capacity(n_max + 1);
    let psi0 = PI.powf(-0.25) * (-0.5 * x * x).exp();
    psi.push(psi0);
    if n_max == 0 {
        return psi;
    }
    psi.push(2.0f64.sqrt() * x * psi0);
    for n in 1..n_max {
        let nf = n as f64;
        let next = (2.0 / (nf + 1.0)).sqrt() * x * psi[n] - (nf / (nf + 1.0)).sqrt() * psi[n - 1];
        psi.push(next);
    }
    psi
}

/// Single wavefunction psi_n(x).
pub fn hermite_wavefunction(n: usize, x: f64) -> f64 {
    hermite_wavefunctions(n, x)[n]
}

/// Husimi Q-function Q(alpha) = <alpha|A|alpha>/pi with the coherent state
/// expanded on the truncated space.
pub fn husimi_q(a: &FockOperator, alpha: Complex64) -> Complex64 {
    let c = coherent_amplitudes(alpha, a.cutoff());
    let av = a.apply(&c);
    c.dotc(&av) / Complex64::new(PI, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_diff;
    use crate::quad;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn annihilation_entries() {
        let a = annihilation(2);
        assert_eq!(a.get(0, 1), c(1.0));
        assert!((a.get(1, 2).re - 2.0f64.sqrt()).abs() < 1e-15);
        assert_eq!(a.get(0, 0), c(0.0));
        assert_eq!(a.get(2, 1), c(0.0));
    }

    #[test]
    fn number_operator_diagonal() {
        let n = 8;
        let num = annihilation(n).dagger().mul(&annihilation(n)).unwrap();
        for k in 0..=n {
            assert!((num.get(k, k).re - k as f64).abs() < 1e-12);
            assert!(num.get(k, k).im.abs() < 1e-15);
        }
    }

    #[test]
    fn commutator_identity_up_to_truncation() {
        let n = 10;
        let a = annihilation(n);
        let ad = a.dagger();
        let comm = a.mul(&ad).unwrap().matrix() - ad.mul(&a).unwrap().matrix();
        for k in 0..n {
            assert!((comm[(k, k)].re - 1.0).abs() < 1e-12);
        }
        // truncation artifact at the last diagonal entry
        assert!((comm[(n, n)].re + n as f64).abs() < 1e-12);
    }

    #[test]
    fn hermite_values_at_origin() {
        assert!((hermite_wavefunction(0, 0.0) - PI.powf(-0.25)).abs() < 1e-12);
        assert!(hermite_wavefunction(1, 0.0).abs() < 1e-15);
    }

    #[test]
    fn hermite_normalization_by_quadrature() {
        let n_pts = 4001;
        let dx = 24.0 / (n_pts - 1) as f64;
        let w = quad::trapezoid_weights(n_pts, dx);
        let mut norms = vec![0.0; 21];
        for i in 0..n_pts {
            let x = -12.0 + i as f64 * dx;
            let psi = hermite_wavefunctions(20, x);
            for (n, norm) in norms.iter_mut().enumerate() {
                *norm += w[i] * psi[n] * psi[n];
            }
        }
        for (n, norm) in norms.iter().enumerate() {
            assert!((norm - 1.0).abs() < 1e-10, "n={n}: {norm}");
        }
    }

    #[test]
    fn hermite_orthonormality() {
        let n_pts = 4001;
        let dx = 24.0 / (n_pts - 1) as f64;
        let w = quad::trapezoid_weights(n_pts, dx);
        let mut gram = vec![vec![0.0; 16]; 16];
        for i in 0..n_pts {
            let x = -12.0 + i as f64 * dx;
            let psi = hermite_wavefunctions(15, x);
            for m in 0..16 {
                for n in 0..16 {
                    gram[m][n] += w[i] * psi[m] * psi[n];
                }
            }
        }
        for m in 0..16 {
            for n in 0..16 {
                let expect = if m == n { 1.0 } else { 0.0 };
                assert!((gram[m][n] - expect).abs() < 1e-9, "({m},{n}): {}", gram[m][n]);
            }
        }
    }

    #[test]
    fn fock_state_quadrature_second_moment() {
        // <x^2> = n + 1/2 for |n><n|, checked on the wavefunction expansion.
        let n_pts = 4001;
        let dx = 24.0 / (n_pts - 1) as f64;
        let w = quad::trapezoid_weights(n_pts, dx);
        for n in [0usize, 1, 3, 7] {
            let mut m2 = 0.0;
            for i in 0..n_pts {
                let x = -12.0 + i as f64 * dx;
                let psi = hermite_wavefunction(n, x);
                m2 += w[i] * x * x * psi * psi;
            }
            assert!((m2 - (n as f64 + 0.5)).abs() < 1e-8, "n={n}: {m2}");
        }
    }

    #[test]
    fn phase_operator_group_property() {
        let u0 = phase_operator(0.0, 6);
        assert!(max_abs_diff(u0.matrix(), FockOperator::identity(6).matrix()) < 1e-15);
        let upi = phase_operator(PI, 6);
        assert!((upi.get(1, 1).re + 1.0).abs() < 1e-12);
        let u1 = phase_operator(0.7, 6);
        let u2 = phase_operator(1.9, 6);
        let u12 = phase_operator(2.6, 6);
        assert!(max_abs_diff(u1.mul(&u2).unwrap().matrix(), u12.matrix()) < 1e-12);
    }

    #[test]
    fn displacement_vacuum_overlap() {
        let d = displacement_operator(c(0.0), 10);
        assert!(max_abs_diff(d.matrix(), FockOperator::identity(10).matrix()) < 1e-12);

        let d1 = displacement_operator(c(1.0), 30);
        let overlap = d1.get(0, 0);
        assert!((overlap.re - (-0.5f64).exp()).abs() < 1e-8, "{overlap}");
        assert!(overlap.im.abs() < 1e-10);
    }

    #[test]
    fn displacement_inverse() {
        let cutoff = 30;
        let d = displacement_operator(c(1.0), cutoff);
        let dm = displacement_operator(c(-1.0), cutoff);
        let prod = d.mul(&dm).unwrap();
        // compare away from the truncation edge
        let sub = 24;
        let mut err = 0.0f64;
        for i in 0..sub {
            for j in 0..sub {
                let expect = if i == j { 1.0 } else { 0.0 };
                err = err.max((prod.get(i, j) - c(expect)).norm());
            }
        }
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn squeeze_variance_and_parity() {
        let cutoff = 40;
        let s = squeeze_operator(0.5, cutoff);
        assert!(
            max_abs_diff(squeeze_operator(0.0, 8).matrix(), FockOperator::identity(8).matrix())
                < 1e-12
        );
        let mut vac = DVector::zeros(cutoff + 1);
        vac[0] = c(1.0);
        let sv = s.apply(&vac);
        let rho = pure_state(&sv);
        let x2 = rho.expectation(&x_operator(cutoff).mul(&x_operator(cutoff)).unwrap());
        let expect = (-1.0f64).exp() / 2.0;
        assert!((x2.re - expect).abs() < 1e-6, "{} vs {}", x2.re, expect);
        // two-photon structure: odd amplitudes vanish
        for n in (1..=cutoff).step_by(2) {
            assert!(sv[n].norm() < 1e-12);
        }
    }

    #[test]
    fn husimi_q_values() {
        let cutoff = 30;
        let vac = fock_projector(0, cutoff);
        let q0 = husimi_q(&vac, c(0.0));
        assert!((q0.re - 1.0 / PI).abs() < 1e-12);
        let q1 = husimi_q(&vac, c(1.0));
        assert!((q1.re - (-1.0f64).exp() / PI).abs() < 1e-9);
        let qid = husimi_q(&FockOperator::identity(cutoff), c(0.0));
        assert!((qid.re - 1.0 / PI).abs() < 1e-12);
    }

    #[test]
    fn thermal_state_trace_and_mean() {
        let rho = thermal_state(0.5, 40);
        assert!((rho.trace().re - 1.0).abs() < 1e-12);
        let n_mean = rho.expectation(&number_operator(40));
        assert!((n_mean.re - 0.5).abs() < 1e-10);
    }
}
