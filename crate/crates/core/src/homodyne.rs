//! Quadrature statistics of truncated Fock states under inefficient homodyne
//! detection, plus samplers for generic and Gaussian states.
//!
//! The measured quadrature at angle phi with efficiency eta is
//!   x^phi = sqrt(eta) (x cos phi + p sin phi) + sqrt(1 - eta) x_vac,
//! so the ideal rotated-quadrature density gets scaled by sqrt(eta) and
//! convolved with a Gaussian of variance (1 - eta)/2. The ideal density is
//!   p(y, phi) = sum_{m,n} rho_mn e^{-i(m-n)phi} psi_m(y) psi_n(y),
//! the sign in the exponent fixed by U(theta) = exp(-i n theta).

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::fock::{hermite_wavefunctions, phase_operator, FockOperator};
use crate::gaussian::{GaussianState, ProbeEnsembleParams};
use crate::quad::trapezoid_weights;

/// Uniform quadrature grid specification.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub n_points: usize,
}

impl GridSpec {
    pub fn new(x_min: f64, x_max: f64, n_points: usize) -> Self {
        assert!(x_max > x_min && n_points >= 16);
        GridSpec {
            x_min,
            x_max,
            n_points,
        }
    }

    /// Default grid for a state with the given cutoff and mean magnitude:
    /// half-width 3 + sqrt(2 N_c) + |mean|, 2048 points.
    pub fn default_for(cutoff: usize, mean_abs: f64) -> Self {
        let half = 3.0 + (2.0 * cutoff as f64).sqrt() + mean_abs;
        GridSpec::new(-half, half, 2048)
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n_points - 1) as f64
    }

    pub fn points(&self) -> Vec<f64> {
        let dx = self.dx();
        (0..self.n_points).map(|i| self.x_min + i as f64 * dx).collect()
    }
}

/// A sampled probability density on a uniform grid.
#[derive(Debug, Clone)]
pub struct QuadratureGrid {
    pub spec: GridSpec,
    pub values: Vec<f64>,
    pub mass: f64,
}

impl QuadratureGrid {
    fn from_values(spec: GridSpec, mut values: Vec<f64>) -> Result<Self> {
        let mut min_v = 0.0f64;
        for v in &mut values {
            min_v = min_v.min(*v);
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        if min_v < -1e-10 {
            return Err(Error::numerical(format!(
                "quadrature density negative beyond tolerance: {min_v:.3e}"
            )));
        }
        let w = trapezoid_weights(spec.n_points, spec.dx());
        let mass: f64 = values.iter().zip(&w).map(|(v, w)| v * w).sum();
        if mass < 0.999 {
            return Err(Error::numerical(format!(
                "quadrature grid mass {mass:.6} < 0.999; grid too narrow or state leaked"
            )));
        }
        Ok(QuadratureGrid { spec, values, mass })
    }

    /// Trapezoid moment integral of x^k against the density.
    pub fn moment(&self, k: u32) -> f64 {
        let w = trapezoid_weights(self.spec.n_points, self.spec.dx());
        self.spec
            .points()
            .iter()
            .zip(&self.values)
            .zip(&w)
            .map(|((x, v), w)| x.powi(k as i32) * v * w)
            .sum()
    }

    /// Value at `x` by linear interpolation (0 outside the grid).
    pub fn value_at(&self, x: f64) -> f64 {
        let dx = self.spec.dx();
        let t = (x - self.spec.x_min) / dx;
        if t < 0.0 || t > (self.spec.n_points - 1) as f64 {
            return 0.0;
        }
        let i = (t as usize).min(self.spec.n_points - 2);
        let f = t - i as f64;
        self.values[i] * (1.0 - f) + self.values[i + 1] * f
    }
}

/// Ideal rotated-quadrature density of a density matrix on the grid.
fn ideal_density(rho: &FockOperator, phi: f64, spec: &GridSpec) -> Vec<f64> {
    // rotate the state: M = U(phi) rho U(phi)^dag carries e^{-i(m-n)phi}
    let rotated = rho
        .conjugate_by(&phase_operator(phi, rho.cutoff()))
        .expect("same cutoff");
    let dim = rho.dim();
    let xs = spec.points();
    let mut out = vec![0.0; spec.n_points];
    for (i, &x) in xs.iter().enumerate() {
        let psi = hermite_wavefunctions(rho.cutoff(), x);
        let mut acc = 0.0;
        for m in 0..dim {
            // diagonal + twice the real part of the upper triangle
            acc += rotated.get(m, m).re * psi[m] * psi[m];
            for n in (m + 1)..dim {
                acc += 2.0 * rotated.get(m, n).re * psi[m] * psi[n];
            }
        }
        out[i] = acc;
    }
    out
}

/// Ideal rotated-quadrature density of a pure-state mixture.
fn ideal_density_components(
    components: &[(f64, DVector<Complex64>)],
    phi: f64,
    spec: &GridSpec,
) -> Vec<f64> {
    let dim = components[0].1.len();
    let phases: Vec<Complex64> = (0..dim)
        .map(|n| Complex64::from_polar(1.0, -(n as f64) * phi))
        .collect();
    let xs = spec.points();
    let mut out = vec![0.0; spec.n_points];
    for (i, &x) in xs.iter().enumerate() {
        let psi = hermite_wavefunctions(dim - 1, x);
        let mut acc = 0.0;
        for (w, v) in components {
            let mut amp = Complex64::new(0.0, 0.0);
            for n in 0..dim {
                amp += v[n] * phases[n] * psi[n];
            }
            acc += w * amp.norm_sqr();
        }
        out[i] = acc;
    }
    out
}

/// Catmull-Rom interpolation of tabulated values at fractional index `t`,
/// clamped to zero outside and non-negative (the data are densities).
fn cubic_at(values: &[f64], t: f64) -> f64 {
    let n = values.len();
    if t < 0.0 || t > (n - 1) as f64 {
        return 0.0;
    }
    let i = (t as usize).min(n - 2);
    let f = t - i as f64;
    let vm = if i > 0 { values[i - 1] } else { values[i] };
    let v0 = values[i];
    let v1 = values[i + 1];
    let vp = if i + 2 < n { values[i + 2] } else { values[i + 1] };
    let a = -0.5 * vm + 1.5 * v0 - 1.5 * v1 + 0.5 * vp;
    let b = vm - 2.5 * v0 + 2.0 * v1 - 0.5 * vp;
    let c = 0.5 * (v1 - vm);
    (((a * f + b) * f + c) * f + v0).max(0.0)
}

/// Smear an ideal density with the efficiency-eta loss model:
/// p_eta(x) = integral p(y) N(x; sqrt(eta) y, (1 - eta)/2) dy.
///
/// The kernel integral runs over 201 uniform nodes across +-7 sigma with
/// renormalized Gaussian weights (mass-preserving); the source density is
/// interpolated cubically, so the cost is independent of the sigma / grid
/// spacing ratio and the bias is O(dx^4).
fn smear(ideal: &[f64], spec: &GridSpec, eta: f64) -> Vec<f64> {
    if (eta - 1.0).abs() < 1e-15 {
        return ideal.to_vec();
    }
    let sigma = ((1.0 - eta) / 2.0).sqrt();
    let dx = spec.dx();
    let xs = spec.points();
    let root_eta = eta.sqrt();

    const K: usize = 201;
    let h = 14.0 * sigma / (K - 1) as f64;
    let mut offsets = [0.0f64; K];
    let mut weights = [0.0f64; K];
    let mut total = 0.0;
    for j in 0..K {
        let t = -7.0 * sigma + j as f64 * h;
        offsets[j] = t;
        weights[j] = (-t * t / (2.0 * sigma * sigma)).exp();
        total += weights[j];
    }
    for w in weights.iter_mut() {
        *w /= total;
    }

    let mut out = vec![0.0; spec.n_points];
    for (i, o) in out.iter_mut().enumerate() {
        let x = xs[i];
        let mut acc = 0.0;
        for j in 0..K {
            // source point y with sqrt(eta) y = x - t_j
            let y = (x - offsets[j]) / root_eta;
            let t = (y - spec.x_min) / dx;
            acc += weights[j] * cubic_at(ideal, t);
        }
        *o = acc / root_eta;
    }
    out
}

/// Full measured quadrature density of a state at angle `phi` with detector
/// efficiency `eta`.
pub fn quadrature_distribution(
    rho: &FockOperator,
    phi: f64,
    eta: f64,
    spec: &GridSpec,
) -> Result<QuadratureGrid> {
    if !(0.0 < eta && eta <= 1.0) {
        return Err(Error::domain(format!("efficiency eta = {eta} outside (0, 1]")));
    }
    let tr = rho.trace().re;
    if (tr - 1.0).abs() > 1e-8 {
        return Err(Error::domain(format!(
            "density matrix trace {tr} differs from 1 beyond 1e-8"
        )));
    }
    let ideal = ideal_density(rho, phi, spec);
    QuadratureGrid::from_values(*spec, smear(&ideal, spec, eta))
}

/// Same as [`quadrature_distribution`] for a pure-state mixture; the
/// components need not be normalized collectively (mass is checked after).
pub fn quadrature_distribution_components(
    components: &[(f64, DVector<Complex64>)],
    phi: f64,
    eta: f64,
    spec: &GridSpec,
) -> Result<QuadratureGrid> {
    if !(0.0 < eta && eta <= 1.0) {
        return Err(Error::domain(format!("efficiency eta = {eta} outside (0, 1]")));
    }
    let ideal = ideal_density_components(components, phi, spec);
    QuadratureGrid::from_values(*spec, smear(&ideal, spec, eta))
}

/// Inverse-CDF sampler over a gridded density.
#[derive(Debug, Clone)]
pub struct QuadratureSampler {
    xs: Vec<f64>,
    cdf: Vec<f64>,
}

impl QuadratureSampler {
    pub fn from_grid(grid: &QuadratureGrid) -> Self {
        let xs = grid.spec.points();
        let dx = grid.spec.dx();
        let mut cdf = Vec::with_capacity(xs.len());
        cdf.push(0.0);
        for i in 1..xs.len() {
            let inc = 0.5 * (grid.values[i - 1] + grid.values[i]) * dx;
            cdf.push(cdf[i - 1] + inc);
        }
        let total = *cdf.last().unwrap();
        for c in cdf.iter_mut() {
            *c /= total;
        }
        QuadratureSampler { xs, cdf }
    }

    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        let u: f64 = rng.gen();
        // binary search for the segment containing u
        let mut lo = 0usize;
        let mut hi = self.cdf.len() - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.cdf[mid] <= u {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let span = self.cdf[hi] - self.cdf[lo];
        let f = if span > 0.0 { (u - self.cdf[lo]) / span } else { 0.5 };
        self.xs[lo] + f * (self.xs[hi] - self.xs[lo])
    }
}

/// Draw one sample of the measured quadrature of a generic state.
pub fn sample_quadrature_generic(
    rho: &FockOperator,
    phi: f64,
    eta: f64,
    rng: &mut impl Rng,
) -> Result<f64> {
    let spec = GridSpec::default_for(rho.cutoff(), {
        let (mean, _) = rho.quadrature_moments();
        mean.norm()
    });
    let grid = quadrature_distribution(rho, phi, eta, &spec)?;
    Ok(QuadratureSampler::from_grid(&grid).sample(rng))
}

/// Fast path: measured quadrature of a one-mode Gaussian state is Gaussian
/// with mean sqrt(eta) mu_phi and variance eta sigma^2_phi + (1 - eta)/2.
pub fn sample_quadrature_gaussian(
    state: &GaussianState,
    phi: f64,
    eta: f64,
    rng: &mut impl Rng,
) -> f64 {
    let (mu, var) = state.rotated_quadrature(phi);
    let std = (eta * var + (1.0 - eta) / 2.0).sqrt();
    let z: f64 = rng.sample(StandardNormal);
    eta.sqrt() * mu + std * z
}

/// Virtual mode-A outcome: Gaussian with zero mean and variance V_A,
/// independent of theta.
pub fn sample_xa(params: &ProbeEnsembleParams, rng: &mut impl Rng) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    params.v_a.sqrt() * z
}
