//! Loss-compensating pattern functions f_{m,n}(x, eta).
//!
//! Realization: the Fourier-kernel integral
//!   f_{mn}(x, eta) = (eta/2) * integral dq |q| e^{iqx} e^{q^2(1-eta)/4}
//!                    M_{mn}(sqrt(eta) q),
//! with M_{mn}(k) = <m|e^{-ikx}|n>. The net Gaussian factor
//! e^{-q^2(2 eta - 1)/4} makes the integral absolutely convergent for
//! eta > 1/2. Averaging f_{mn}(x, eta) e^{i(m-n)theta} over homodyne records
//! (x, theta) of a state measured with efficiency eta returns rho_{mn}; that
//! unbiasedness contract is this module's definition of correctness, checked
//! by [`verify_unbiasedness`].
//!
//! With this realization every f_{mn} is real and symmetric in (m, n), and
//! f_{mn}(-x) = (-1)^{m+n} f_{mn}(x).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::FockOperator;
use crate::homodyne::{quadrature_distribution, GridSpec};
use crate::quad::{composite_gauss_legendre, periodic_angle_grid, trapezoid_weights};

/// Hard lower bound on the efficiency; the kernels diverge at 1/2.
pub const ETA_HARD_MIN: f64 = 0.5 + 1e-6;

/// Default minimum efficiency accepted by estimator runs; configurable, but
/// kernel magnitude (and estimator variance) blows up below this.
pub const ETA_SOFT_MIN: f64 = 0.55;

const FILE_FORMAT_VERSION: u32 = 1;

fn check_eta(eta: f64) -> Result<()> {
    if !(eta > ETA_HARD_MIN && eta <= 1.0) {
        return Err(Error::domain(format!(
            "pattern functions require 1/2 < eta <= 1, got {eta}"
        )));
    }
    Ok(())
}

/// Generalized Laguerre polynomial L_n^alpha(z) by upward recurrence.
fn laguerre(n: usize, alpha: f64, z: f64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let mut lm1 = 1.0;
    let mut l = 1.0 + alpha - z;
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 + alpha - z) * l - (kf + alpha) * lm1) / (kf + 1.0);
        lm1 = l;
        l = next;
    }
    l
}

/// Precomputed q-nodes of the kernel integral for one (m, n, eta):
/// f(x) = sum_i wg_i * osc(q_i x), osc = cos for even m-n, sin for odd.
struct KernelNodes {
    qs: Vec<f64>,
    wg: Vec<f64>,
    odd: bool,
}

impl KernelNodes {
    /// `x_ref` is the largest |x| the nodes will be evaluated at; it sets the
    /// panel width needed to resolve the oscillation.
    fn build(m: usize, n: usize, eta: f64, x_ref: f64) -> Self {
        let (hi, lo) = if m >= n { (m, n) } else { (n, m) };
        let delta = hi - lo;
        let a = (2.0 * eta - 1.0) / 4.0;
        // truncation point: Gaussian decay beats the polynomial growth
        let power = (delta + 1 + 2 * lo) as f64;
        let mut q_max = (40.0 / a).sqrt();
        for _ in 0..3 {
            q_max = ((40.0 + power * q_max.max(2.0).ln()) / a).sqrt();
        }
        let h = (0.5f64).min(std::f64::consts::PI / (2.0 * (x_ref.abs() + 1.0)));
        let panels = (q_max / h).ceil() as usize;
        let (qs, ws) = composite_gauss_legendre(0.0, q_max, panels.max(4), 16);

        // prefactor eta * sqrt(lo!/hi!) * (eta/2)^(delta/2) * sign
        let mut fact = 1.0;
        for i in (lo + 1)..=hi {
            fact *= i as f64;
        }
        let sign = if delta % 4 < 2 { 1.0 } else { -1.0 };
        let c = eta * (eta / 2.0).powf(delta as f64 / 2.0) * sign / fact.sqrt();

        let wg = qs
            .iter()
            .zip(&ws)
            .map(|(&q, &w)| {
                let q2 = q * q;
                c * w * q.powi(delta as i32 + 1) * (-a * q2).exp() * laguerre(lo, delta as f64, eta * q2 / 2.0)
            })
            .collect();
        KernelNodes {
            qs,
            wg,
            odd: delta % 2 == 1,
        }
    }

    fn eval(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        if self.odd {
            for (q, wg) in self.qs.iter().zip(&self.wg) {
                acc += wg * (q * x).sin();
            }
        } else {
            for (q, wg) in self.qs.iter().zip(&self.wg) {
                acc += wg * (q * x).cos();
            }
        }
        acc
    }

    /// Evaluate on a uniform grid using the rotation recurrence for
    /// cos/sin(q (x0 + j dx)); one pass per node.
    fn eval_grid(&self, x0: f64, dx: f64, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (&q, &wg) in self.qs.iter().zip(&self.wg) {
            let (mut s, mut c) = (q * x0).sin_cos();
            let (sd, cd) = (q * dx).sin_cos();
            if self.odd {
                for v in out.iter_mut() {
                    *v += wg * s;
                    let s_next = s * cd + c * sd;
                    c = c * cd - s * sd;
                    s = s_next;
                }
            } else {
                for v in out.iter_mut() {
                    *v += wg * c;
                    let s_next = s * cd + c * sd;
                    c = c * cd - s * sd;
                    s = s_next;
                }
            }
        }
    }
}

/// Direct evaluation of f_{mn}(x, eta); real-valued for this realization.
pub fn pattern_value_real(m: usize, n: usize, x: f64, eta: f64) -> Result<f64> {
    check_eta(eta)?;
    Ok(KernelNodes::build(m, n, eta, x).eval(x))
}

/// f_{mn}(x, eta) as a complex number (imaginary part identically zero).
pub fn pattern_value(m: usize, n: usize, x: f64, eta: f64) -> Result<Complex64> {
    Ok(Complex64::new(pattern_value_real(m, n, x, eta)?, 0.0))
}

/// Tabulated pattern functions for one efficiency on a uniform grid, with
/// linear-interpolation lookup. Values for m < n reuse (n, m) by symmetry.
#[derive(Debug, Clone)]
pub struct PatternTable {
    pub eta: f64,
    pub m_max: usize,
    pub spec: GridSpec,
    /// values[pair(m, n)][x index], pairs with m >= n packed row-wise
    values: Vec<Vec<f64>>,
}

#[inline]
fn pair_index(m: usize, n: usize) -> usize {
    debug_assert!(m >= n);
    m * (m + 1) / 2 + n
}

impl PatternTable {
    /// Tabulate on exactly the given grid.
    pub fn build(m_max: usize, eta: f64, spec: GridSpec) -> Result<Self> {
        check_eta(eta)?;
        let x_ref = spec.x_min.abs().max(spec.x_max.abs());
        let npairs = (m_max + 1) * (m_max + 2) / 2;
        let mut values = vec![vec![0.0; spec.n_points]; npairs];
        for m in 0..=m_max {
            for n in 0..=m {
                let nodes = KernelNodes::build(m, n, eta, x_ref);
                nodes.eval_grid(spec.x_min, spec.dx(), &mut values[pair_index(m, n)]);
            }
        }
        Ok(PatternTable {
            eta,
            m_max,
            spec,
            values,
        })
    }

    /// Tabulate over [-x_half, x_half], doubling the density until the
    /// midpoint interpolation error drops below 1e-4 (relative to the local
    /// kernel scale, which grows large as eta approaches 1/2).
    pub fn build_auto(m_max: usize, eta: f64, x_half: f64) -> Result<Self> {
        check_eta(eta)?;
        let mut n_points = 4097;
        loop {
            let table = Self::build(m_max, eta, GridSpec::new(-x_half, x_half, n_points))?;
            if table.midpoint_error() < 5e-5 || n_points >= (1 << 17) + 1 {
                return Ok(table);
            }
            n_points = (n_points - 1) * 2 + 1;
        }
    }

    /// Max over sampled midpoints of |interpolated - direct| / max(1, |direct|).
    pub fn midpoint_error(&self) -> f64 {
        let dx = self.spec.dx();
        let mut worst = 0.0f64;
        for m in 0..=self.m_max {
            for n in 0..=m {
                let nodes = KernelNodes::build(m, n, self.eta, self.spec.x_max.abs());
                // sample midpoints across the grid
                let step = (self.spec.n_points / 64).max(1);
                for i in (0..self.spec.n_points - 1).step_by(step) {
                    let x = self.spec.x_min + (i as f64 + 0.5) * dx;
                    let direct = nodes.eval(x);
                    let interp = 0.5 * (self.values[pair_index(m, n)][i] + self.values[pair_index(m, n)][i + 1]);
                    let err = (interp - direct).abs() / direct.abs().max(1.0);
                    worst = worst.max(err);
                }
            }
        }
        worst
    }

    /// Linear-interpolation lookup; falls back to direct evaluation outside
    /// the tabulated range.
    pub fn value(&self, m: usize, n: usize, x: f64) -> f64 {
        debug_assert!(m <= self.m_max && n <= self.m_max);
        let (hi, lo) = if m >= n { (m, n) } else { (n, m) };
        let col = &self.values[pair_index(hi, lo)];
        let t = (x - self.spec.x_min) / self.spec.dx();
        if t < 0.0 || t > (self.spec.n_points - 1) as f64 {
            return KernelNodes::build(hi, lo, self.eta, x).eval(x);
        }
        let i = (t as usize).min(self.spec.n_points - 2);
        let f = t - i as f64;
        col[i] * (1.0 - f) + col[i + 1] * f
    }

    /// Largest |f_{mn}| over the tabulated grid.
    pub fn max_abs(&self, m: usize, n: usize) -> f64 {
        let (hi, lo) = if m >= n { (m, n) } else { (n, m) };
        self.values[pair_index(hi, lo)]
            .iter()
            .map(|v| v.abs())
            .fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> String {
        let file = TableFile {
            format_version: FILE_FORMAT_VERSION,
            eta: self.eta,
            m_max: self.m_max,
            x_min: self.spec.x_min,
            x_max: self.spec.x_max,
            n_points: self.spec.n_points,
            values: self.values.clone(),
        };
        serde_json::to_string(&file).expect("table serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: TableFile = serde_json::from_str(s)
            .map_err(|e| Error::numerical(format!("pattern table parse error: {e}")))?;
        if file.format_version != FILE_FORMAT_VERSION {
            return Err(Error::domain(format!(
                "pattern table format version {} unsupported (expected {})",
                file.format_version, FILE_FORMAT_VERSION
            )));
        }
        let spec = GridSpec::new(file.x_min, file.x_max, file.n_points);
        let expected_pairs = (file.m_max + 1) * (file.m_max + 2) / 2;
        if file.values.len() != expected_pairs
            || file.values.iter().any(|v| v.len() != file.n_points)
        {
            return Err(Error::domain("pattern table shape mismatch".to_string()));
        }
        check_eta(file.eta)?;
        Ok(PatternTable {
            eta: file.eta,
            m_max: file.m_max,
            spec,
            values: file.values,
        })
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json())
            .map_err(|e| Error::numerical(format!("cannot write pattern table: {e}")))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let s = std::fs::read_to_string(path)
            .map_err(|e| Error::numerical(format!("cannot read pattern table: {e}")))?;
        Self::from_json(&s)
    }
}

#[derive(Serialize, Deserialize)]
struct TableFile {
    format_version: u32,
    eta: f64,
    m_max: usize,
    x_min: f64,
    x_max: f64,
    n_points: usize,
    values: Vec<Vec<f64>>,
}

/// Deterministic unbiasedness check: quadrature-integrate
/// (1/2pi) d(theta) dx p_eta(x, theta) f_{mn}(x, eta) e^{i(m-n)theta}
/// against rho_{mn} and return the largest entrywise error for
/// m, n <= table.m_max.
///
/// The table supplies (eta, m_max, x-range); the kernels themselves are
/// re-evaluated exactly on the verification grid, so this checks the kernel
/// realization rather than the tabulation.
pub fn verify_unbiasedness(table: &PatternTable, rho: &FockOperator, eta: f64) -> Result<f64> {
    if (eta - table.eta).abs() > 1e-12 {
        return Err(Error::domain(format!(
            "table built for eta = {}, asked to verify at {eta}",
            table.eta
        )));
    }
    let spec = GridSpec::new(
        table.spec.x_min,
        table.spec.x_max,
        table.spec.n_points.min(4097),
    );
    let d = table.m_max + 1;
    let x_ref = spec.x_min.abs().max(spec.x_max.abs());
    // exact kernel values on the verification grid, m >= n
    let mut kernels = vec![vec![0.0; spec.n_points]; d * (d + 1) / 2];
    for m in 0..d {
        for n in 0..=m {
            KernelNodes::build(m, n, eta, x_ref).eval_grid(
                spec.x_min,
                spec.dx(),
                &mut kernels[pair_index(m, n)],
            );
        }
    }

    let n_theta = 48;
    let thetas = periodic_angle_grid(n_theta);
    let xw = trapezoid_weights(spec.n_points, spec.dx());
    let mut est = vec![Complex64::new(0.0, 0.0); d * d];
    for &theta in &thetas {
        let grid = quadrature_distribution(rho, theta, eta, &spec)?;
        for m in 0..d {
            for n in 0..d {
                let f = &kernels[pair_index(m.max(n), m.min(n))];
                let mut s = 0.0;
                for i in 0..spec.n_points {
                    s += xw[i] * grid.values[i] * f[i];
                }
                let phase = Complex64::from_polar(1.0, (m as f64 - n as f64) * theta);
                est[m * d + n] += phase * s / n_theta as f64;
            }
        }
    }
    let mut worst = 0.0f64;
    for m in 0..d {
        for n in 0..d {
            let err = (est[m * d + n] - rho.get(m, n)).norm();
            worst = worst.max(err);
        }
    }
    Ok(worst)
}
