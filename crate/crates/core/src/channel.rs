//! Quantum channels in Kraus form with exact Choi matrices.
//!
//! The Choi tensor is indexed chi_{km,ln} = <m| E(|k><l|) |n>, i.e. (k, l)
//! are input indices and (m, n) output indices, so the channel action reads
//! rho_out[m][n] = sum_{k,l} chi_{km,ln} rho_in[k][l].

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fock::{self, FockOperator};
use crate::gaussian::GaussianState;
use crate::linalg::{self, CMatrix};

/// Channels with a known closed-form Gaussian moment action; used by the
/// simulation fast path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChannelKind {
    Identity,
    Loss { transmittance: f64 },
    Phase { phi0: f64 },
    PhotonSubtraction { transmittance: f64 },
}

/// A quantum operation given by Kraus operators A_j:
/// E(rho) = sum_j A_j rho A_j^dag.
#[derive(Debug, Clone)]
pub struct KrausChannel {
    pub kraus_ops: Vec<FockOperator>,
    pub trace_preserving: bool,
    pub kind: ChannelKind,
}

impl KrausChannel {
    pub fn cutoff(&self) -> usize {
        self.kraus_ops[0].cutoff()
    }

    /// Max-norm of sum_j A_j^dag A_j - I on the leading `sub` x `sub` block.
    /// The block restriction keeps truncation leakage at the Fock edge out of
    /// trace-preservation checks.
    pub fn kraus_sum_residual(&self, sub: usize) -> f64 {
        let d = self.kraus_ops[0].dim();
        let mut acc = CMatrix::zeros(d, d);
        for a in &self.kraus_ops {
            acc += a.matrix().adjoint() * a.matrix();
        }
        let sub = sub.min(d);
        let mut res = 0.0f64;
        for i in 0..sub {
            for j in 0..sub {
                let expect = if i == j { 1.0 } else { 0.0 };
                res = res.max((acc[(i, j)] - Complex64::new(expect, 0.0)).norm());
            }
        }
        res
    }

    /// Exact Gaussian moment update, when the channel has one.
    pub fn gaussian_action(&self, state: &GaussianState) -> Option<GaussianState> {
        match self.kind {
            ChannelKind::Identity => Some(state.clone()),
            ChannelKind::Loss { transmittance: t } => {
                let mean = state.mean.map(|m| t.sqrt() * m);
                let n = state.cov.nrows();
                let mut cov = state.cov.map(|g| t * g);
                for i in 0..n {
                    cov[(i, i)] += 1.0 - t;
                }
                Some(GaussianState::new(mean, cov))
            }
            ChannelKind::Phase { phi0 } => Some(state.phase_shifted(phi0)),
            ChannelKind::PhotonSubtraction { .. } => None,
        }
    }
}

/// Choi matrix chi_{km,ln} on the truncated input/output space
/// {|0>, ..., |k_max>}.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoiMatrix {
    k_max: usize,
    entries: Vec<Complex64>,
}

impl ChoiMatrix {
    pub fn zeros(k_max: usize) -> Self {
        let d = k_max + 1;
        ChoiMatrix {
            k_max,
            entries: vec![Complex64::new(0.0, 0.0); d * d * d * d],
        }
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn dim(&self) -> usize {
        self.k_max + 1
    }

    #[inline]
    fn idx(&self, k: usize, m: usize, l: usize, n: usize) -> usize {
        let d = self.dim();
        ((k * d + m) * d + l) * d + n
    }

    pub fn get(&self, k: usize, m: usize, l: usize, n: usize) -> Complex64 {
        self.entries[self.idx(k, m, l, n)]
    }

    pub fn set(&mut self, k: usize, m: usize, l: usize, n: usize, v: Complex64) {
        let i = self.idx(k, m, l, n);
        self.entries[i] = v;
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    /// View as a matrix over the joint indices (k, m) x (l, n); positive
    /// semidefinite for a completely positive map.
    pub fn as_joint_matrix(&self) -> CMatrix {
        let d = self.dim();
        let dd = d * d;
        let mut m = CMatrix::zeros(dd, dd);
        for k in 0..d {
            for mm in 0..d {
                for l in 0..d {
                    for n in 0..d {
                        m[(k * d + mm, l * d + n)] = self.get(k, mm, l, n);
                    }
                }
            }
        }
        m
    }

    pub fn hermiticity_residual(&self) -> f64 {
        linalg::hermiticity_residual(&self.as_joint_matrix())
    }

    pub fn min_eigenvalue(&self) -> f64 {
        linalg::min_hermitian_eigenvalue(&self.as_joint_matrix())
    }

    /// Max |sum_m chi_{km,lm} - delta_kl| over k, l < sub; zero for a
    /// trace-preserving channel away from the cutoff.
    pub fn partial_trace_residual(&self, sub: usize) -> f64 {
        let d = self.dim();
        let sub = sub.min(d);
        let mut res = 0.0f64;
        for k in 0..sub {
            for l in 0..sub {
                let mut s = Complex64::new(0.0, 0.0);
                for m in 0..d {
                    s += self.get(k, m, l, m);
                }
                let expect = if k == l { 1.0 } else { 0.0 };
                res = res.max((s - Complex64::new(expect, 0.0)).norm());
            }
        }
        res
    }
}

/// Apply a channel to a density matrix: rho_out = sum_j A_j rho A_j^dag.
pub fn apply_channel(channel: &KrausChannel, rho_in: &FockOperator) -> Result<FockOperator> {
    let d = rho_in.dim();
    if channel.kraus_ops[0].dim() != d {
        return Err(Error::CutoffMismatch {
            left: channel.kraus_ops[0].cutoff(),
            right: rho_in.cutoff(),
        });
    }
    let mut out = CMatrix::zeros(d, d);
    for a in &channel.kraus_ops {
        out += a.matrix() * rho_in.matrix() * a.matrix().adjoint();
    }
    Ok(FockOperator::from_matrix(out))
}

/// Choi matrix of a Kraus channel:
/// chi_{km,ln} = sum_j <m|A_j|k> <n|A_j|l>^*.
pub fn choi_from_kraus(channel: &KrausChannel, k_max: usize) -> Result<ChoiMatrix> {
    if k_max > channel.kraus_ops[0].cutoff() {
        return Err(Error::domain(format!(
            "k_max = {k_max} exceeds channel cutoff {}",
            channel.kraus_ops[0].cutoff()
        )));
    }
    let mut chi = ChoiMatrix::zeros(k_max);
    let d = k_max + 1;
    for a in &channel.kraus_ops {
        for k in 0..d {
            for m in 0..d {
                let amk = a.get(m, k);
                if amk.norm_sqr() == 0.0 {
                    continue;
                }
                for l in 0..d {
                    for n in 0..d {
                        let v = chi.get(k, m, l, n) + amk * a.get(n, l).conj();
                        chi.set(k, m, l, n, v);
                    }
                }
            }
        }
    }
    Ok(chi)
}

/// Contract a Choi matrix with an input density matrix (both restricted to
/// the Choi's k_max): rho_out[m][n] = sum_{k,l} chi_{km,ln} rho_in[k][l].
pub fn apply_choi(chi: &ChoiMatrix, rho_in: &FockOperator) -> FockOperator {
    let d = chi.dim();
    let mut out = FockOperator::zeros(chi.k_max().max(1));
    if chi.k_max() == 0 {
        // degenerate 1x1 input space still yields a 2x2 zero-padded operator
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 0)] = chi.get(0, 0, 0, 0) * rho_in.get(0, 0);
        return FockOperator::from_matrix(m);
    }
    for m in 0..d {
        for n in 0..d {
            let mut s = Complex64::new(0.0, 0.0);
            for k in 0..d.min(rho_in.dim()) {
                for l in 0..d.min(rho_in.dim()) {
                    s += chi.get(k, m, l, n) * rho_in.get(k, l);
                }
            }
            out.set(m, n, s);
        }
    }
    out
}

/// The identity channel.
pub fn identity_channel(cutoff: usize) -> KrausChannel {
    KrausChannel {
        kraus_ops: vec![FockOperator::identity(cutoff)],
        trace_preserving: true,
        kind: ChannelKind::Identity,
    }
}

/// Lossy channel of transmittance T with Kraus operators
/// A_j = (1-T)^{j/2}/sqrt(j!) T^{n/2} a^j.
pub fn loss_channel(transmittance: f64, cutoff: usize) -> Result<KrausChannel> {
    if !(0.0..=1.0).contains(&transmittance) {
        return Err(Error::domain(format!(
            "transmittance {transmittance} outside [0, 1]"
        )));
    }
    let t = transmittance;
    let d = cutoff + 1;
    let a = fock::annihilation(cutoff);
    let mut t_half = CMatrix::zeros(d, d);
    for n in 0..d {
        t_half[(n, n)] = Complex64::new(t.powf(n as f64 / 2.0), 0.0);
    }
    let mut kraus = Vec::with_capacity(d);
    let mut a_pow = CMatrix::identity(d, d);
    let mut coeff = 1.0f64;
    for j in 0..=cutoff {
        if j > 0 {
            a_pow = &a_pow * a.matrix();
            coeff *= ((1.0 - t) / j as f64).sqrt();
        }
        let op = (&t_half * &a_pow).map(|z| z * Complex64::new(coeff, 0.0));
        // beyond j photons the operator is exactly zero for small inputs;
        // keep every order so the Kraus sum closes on the truncated space
        kraus.push(FockOperator::from_matrix(op));
    }
    Ok(KrausChannel {
        kraus_ops: kraus,
        trace_preserving: true,
        kind: ChannelKind::Loss { transmittance: t },
    })
}

/// Phase-shift channel: single unitary Kraus operator U = exp(-i n phi0).
pub fn phase_channel(phi0: f64, cutoff: usize) -> KrausChannel {
    KrausChannel {
        kraus_ops: vec![fock::phase_operator(phi0, cutoff)],
        trace_preserving: true,
        kind: ChannelKind::Phase { phi0 },
    }
}

/// Conditional single-photon subtraction realized by a tap beam splitter of
/// transmittance T heralded on one reflected photon: single Kraus operator
/// sqrt(1-T) T^{n/2} a. Trace-decreasing.
pub fn photon_subtraction(transmittance: f64, cutoff: usize) -> Result<KrausChannel> {
    if !(0.0..=1.0).contains(&transmittance) {
        return Err(Error::domain(format!(
            "transmittance {transmittance} outside [0, 1]"
        )));
    }
    let t = transmittance;
    let d = cutoff + 1;
    let a = fock::annihilation(cutoff);
    let mut t_half = CMatrix::zeros(d, d);
    for n in 0..d {
        t_half[(n, n)] = Complex64::new(t.powf(n as f64 / 2.0), 0.0);
    }
    let op = (&t_half * a.matrix()).map(|z| z * Complex64::new((1.0 - t).sqrt(), 0.0));
    Ok(KrausChannel {
        kraus_ops: vec![FockOperator::from_matrix(op)],
        trace_preserving: false,
        kind: ChannelKind::PhotonSubtraction { transmittance: t },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{coherent_amplitudes, fock_projector, pure_state};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn random_density(dim: usize, rng: &mut StdRng) -> FockOperator {
        let mut m = CMatrix::zeros(dim, dim);
        for i in 0..dim {
            for j in 0..dim {
                m[(i, j)] = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            }
        }
        let rho = &m * m.adjoint();
        let tr = rho.diagonal().sum().re;
        FockOperator::from_matrix(rho.map(|z| z / Complex64::new(tr, 0.0)))
    }

    #[test]
    fn identity_channel_is_identity() {
        let mut rng = StdRng::seed_from_u64(7);
        let rho = random_density(9, &mut rng);
        let out = apply_channel(&identity_channel(8), &rho).unwrap();
        assert!(linalg::max_abs_diff(out.matrix(), rho.matrix()) < 1e-14);
    }

    #[test]
    fn loss_on_single_photon() {
        let ch = loss_channel(0.7, 10).unwrap();
        let rho = fock_projector(1, 10);
        let out = apply_channel(&ch, &rho).unwrap();
        assert!((out.get(1, 1).re - 0.7).abs() < 1e-12);
        assert!((out.get(0, 0).re - 0.3).abs() < 1e-12);
        assert!((out.trace().re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn loss_on_coherent_state() {
        let cutoff = 30;
        let t: f64 = 0.7;
        let alpha = Complex64::new(1.0, 0.0);
        let ch = loss_channel(t, cutoff).unwrap();
        let rho = pure_state(&coherent_amplitudes(alpha, cutoff));
        let out = apply_channel(&ch, &rho).unwrap();
        let target = coherent_amplitudes(alpha * t.sqrt(), cutoff);
        let fid = target.dotc(&out.apply(&target)).re;
        assert!(fid > 1.0 - 1e-6, "fidelity {fid}");
    }

    #[test]
    fn loss_limits() {
        let mut rng = StdRng::seed_from_u64(3);
        let rho = random_density(13, &mut rng);
        let all = apply_channel(&loss_channel(1.0, 12).unwrap(), &rho).unwrap();
        assert!(linalg::max_abs_diff(all.matrix(), rho.matrix()) < 1e-12);
        let none = apply_channel(&loss_channel(0.0, 12).unwrap(), &rho).unwrap();
        assert!((none.get(0, 0).re - 1.0).abs() < 1e-12);
        for n in 1..13 {
            assert!(none.get(n, n).norm() < 1e-14);
        }
    }

    #[test]
    fn loss_rejects_bad_transmittance() {
        assert!(loss_channel(-0.1, 8).is_err());
        assert!(loss_channel(1.1, 8).is_err());
    }

    #[test]
    fn choi_of_identity() {
        let chi = choi_from_kraus(&identity_channel(10), 3).unwrap();
        for k in 0..4 {
            for m in 0..4 {
                for l in 0..4 {
                    for n in 0..4 {
                        let expect = if k == m && l == n { 1.0 } else { 0.0 };
                        assert!((chi.get(k, m, l, n) - Complex64::new(expect, 0.0)).norm() < 1e-14);
                    }
                }
            }
        }
    }

    #[test]
    fn choi_of_loss() {
        let chi = choi_from_kraus(&loss_channel(0.7, 10).unwrap(), 3).unwrap();
        assert!((chi.get(0, 0, 0, 0).re - 1.0).abs() < 1e-12);
        assert!((chi.get(1, 1, 1, 1).re - 0.7).abs() < 1e-12);
        assert!((chi.get(1, 0, 1, 0).re - 0.3).abs() < 1e-12);
        assert!((chi.get(1, 1, 0, 0).re - 0.7f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn choi_of_phase_channel() {
        let phi0 = std::f64::consts::PI / 6.0;
        let chi = choi_from_kraus(&phase_channel(phi0, 10), 3).unwrap();
        // element with input pair (k,l) = (0,1), output pair (m,n) = (0,1):
        // <0|U|0> <1|U|1>^* = e^{+i phi0}
        let z = chi.get(0, 0, 1, 1);
        assert!((z - Complex64::from_polar(1.0, phi0)).norm() < 1e-12, "{z}");
        // diagonal-preserving structure
        assert!(chi.get(0, 1, 0, 1).norm() < 1e-14);
    }

    #[test]
    fn photon_subtraction_on_two_photons() {
        let t: f64 = 0.7;
        let ch = photon_subtraction(t, 10).unwrap();
        let out = apply_channel(&ch, &fock_projector(2, 10)).unwrap();
        // output proportional to |1><1| with heralding probability 2(1-T)T
        let trace = out.trace().re;
        assert!((trace - 2.0 * (1.0 - t) * t).abs() < 1e-12, "{trace}");
        assert!((out.get(1, 1).re - trace).abs() < 1e-12);
    }

    #[test]
    fn kraus_application_equals_choi_contraction() {
        let cutoff = 16;
        let k_max = 5;
        let mut rng = StdRng::seed_from_u64(42);
        let channels = vec![
            identity_channel(cutoff),
            loss_channel(0.7, cutoff).unwrap(),
            loss_channel(0.25, cutoff).unwrap(),
            phase_channel(1.1, cutoff),
            photon_subtraction(0.8, cutoff).unwrap(),
        ];
        for ch in &channels {
            let chi = choi_from_kraus(ch, k_max).unwrap();
            for _ in 0..20 {
                // input supported on the k_max subspace, embedded at the full cutoff
                let small = random_density(k_max + 1, &mut rng);
                let mut rho = FockOperator::zeros(cutoff);
                for i in 0..=k_max {
                    for j in 0..=k_max {
                        rho.set(i, j, small.get(i, j));
                    }
                }
                let direct = apply_channel(ch, &rho).unwrap();
                let contracted = apply_choi(&chi, &small);
                let mut err = 0.0f64;
                for m in 0..=k_max {
                    for n in 0..=k_max {
                        err = err.max((direct.get(m, n) - contracted.get(m, n)).norm());
                    }
                }
                assert!(err < 1e-9, "kind {:?}: {err}", ch.kind);
            }
        }
    }

    #[test]
    fn choi_invariants() {
        let cutoff = 16;
        for ch in [
            identity_channel(cutoff),
            loss_channel(0.6, cutoff).unwrap(),
            phase_channel(0.4, cutoff),
        ] {
            let chi = choi_from_kraus(&ch, 4).unwrap();
            assert!(chi.hermiticity_residual() < 1e-12);
            assert!(chi.min_eigenvalue() > -1e-10);
            assert!(chi.partial_trace_residual(5) < 1e-10);
        }
    }

    #[test]
    fn kraus_sum_closes() {
        let ch = loss_channel(0.37, 20).unwrap();
        // exclude the top 20% of levels from the check
        assert!(ch.kraus_sum_residual(17) < 1e-10);
    }

    #[test]
    fn gaussian_action_matches_fock_for_loss() {
        // loss acting on a displaced squeezed state: compare moments
        let cutoff = 40;
        let t = 0.65;
        let ch = loss_channel(t, cutoff).unwrap();
        let d = fock::displacement_operator(Complex64::new(0.8, 0.0), cutoff);
        let s = fock::squeeze_operator(0.4, cutoff);
        let vac = fock_projector(0, cutoff);
        let rho = vac
            .conjugate_by(&s)
            .unwrap()
            .conjugate_by(&d)
            .unwrap();
        let out = apply_channel(&ch, &rho).unwrap();
        let (mean_f, gamma_f) = out.quadrature_moments();

        let (mean0, gamma0) = rho.quadrature_moments();
        let gs = GaussianState::new(
            nalgebra::DVector::from_row_slice(&[mean0[0], mean0[1]]),
            nalgebra::DMatrix::from_row_slice(
                2,
                2,
                &[gamma0[(0, 0)], gamma0[(0, 1)], gamma0[(1, 0)], gamma0[(1, 1)]],
            ),
        );
        let gout = ch.gaussian_action(&gs).unwrap();
        assert!((gout.mean[0] - mean_f[0]).abs() < 1e-8);
        assert!((gout.mean[1] - mean_f[1]).abs() < 1e-8);
        assert!((gout.cov[(0, 0)] - gamma_f[(0, 0)]).abs() < 1e-7);
        assert!((gout.cov[(1, 1)] - gamma_f[(1, 1)]).abs() < 1e-7);
        assert!((gout.cov[(0, 1)] - gamma_f[(0, 1)]).abs() < 1e-7);
    }
}
