//! End-to-end protocols: simulate process / detector tomography runs with
//! squeezed probes and reconstruct the process matrix chi_{km,ln} or the
//! POVM elements Pi^k by pattern-function averaging.
//!
//! Per shot the simulation draws theta, phi uniform on [0, 2pi) and
//! x_a ~ N(0, V_A) (clamped at 5 sqrt(V_A), with the clamp rate recorded),
//! prepares the probe with displacement d = d_coeff x_a rotated by -theta,
//! sends it through the channel (or detector) and records the measured
//! quadrature x_b at angle phi (or the outcome k). The estimators average
//!   f_{k,l}(x_a, eta_A) f_{m,n}(x_b, eta_B) e^{i(k-l)theta} e^{i(m-n)phi}
//! and rescale by (1 - lambda^2)^{-1} lambda^{-(k+l)}.
//!
//! Trace-decreasing channels are simulated by post-selection: a shot is kept
//! with probability Tr[E(rho_probe)] and the estimate is weighted by the
//! empirical success rate. The quoted standard errors treat that rate as a
//! constant; its own sampling error is not propagated.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::channel::{ChoiMatrix, KrausChannel};
use crate::detector::Povm;
use crate::error::{Error, Result};
use crate::fock::FockOperator;
use crate::gaussian::ProbeEnsembleParams;
use crate::homodyne::{
    quadrature_distribution_components, sample_quadrature_gaussian, GridSpec, QuadratureSampler,
};
use crate::mc::{self, KernelAccumulator};
use crate::pattern::PatternTable;
use crate::probe::{probe_gaussian_state, truncation_check, ProbeFactory, ProbeSetting};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// How many standard deviations of x_a to keep before clamping.
pub const XA_CLAMP_SIGMAS: f64 = 5.0;

/// One shot of a process-tomography run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProcessSampleRecord {
    pub theta: f64,
    pub x_a: f64,
    pub phi: f64,
    pub x_b: f64,
}

/// One shot of a detector-tomography run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorSampleRecord {
    pub theta: f64,
    pub x_a: f64,
    pub outcome: usize,
}

/// A completed process simulation: kept records plus run statistics.
#[derive(Debug, Clone)]
pub struct ProcessRun {
    pub records: Vec<ProcessSampleRecord>,
    pub n_requested: u64,
    pub clamp_count: u64,
    /// kept / requested; 1 for trace-preserving channels.
    pub success_rate: f64,
    pub seed: u64,
}

impl ProcessRun {
    pub fn clamp_rate(&self) -> f64 {
        self.clamp_count as f64 / self.n_requested as f64
    }
}

/// A completed detector simulation.
#[derive(Debug, Clone)]
pub struct DetectorRun {
    pub records: Vec<DetectorSampleRecord>,
    pub n_requested: u64,
    pub clamp_count: u64,
    pub seed: u64,
}

impl DetectorRun {
    pub fn clamp_rate(&self) -> f64 {
        self.clamp_count as f64 / self.n_requested as f64
    }
}

fn check_probe_cutoff(params: &ProbeEnsembleParams, cutoff: usize) -> Result<ProbeFactory> {
    let factory = ProbeFactory::new(params.v_minus, params.v_plus, cutoff, 1e-12)?;
    let d_max = params.d_coeff * XA_CLAMP_SIGMAS * params.v_a.sqrt();
    let worst = factory.density(0.0, d_max);
    let (ok, leak) = truncation_check(&worst, crate::probe::TRUNCATION_TOL);
    if !ok {
        return Err(Error::Truncation {
            leaked: leak,
            tolerance: crate::probe::TRUNCATION_TOL,
        });
    }
    Ok(factory)
}

fn draw_angles_and_xa(
    params: &ProbeEnsembleParams,
    rng: &mut impl Rng,
    clamp_count: &mut u64,
) -> (f64, f64) {
    let theta = rng.gen::<f64>() * TWO_PI;
    let z: f64 = rng.sample(StandardNormal);
    let bound = XA_CLAMP_SIGMAS * params.v_a.sqrt();
    let mut x_a = params.v_a.sqrt() * z;
    if x_a.abs() > bound {
        x_a = x_a.clamp(-bound, bound);
        *clamp_count += 1;
    }
    (theta, x_a)
}

/// Simulate a process-tomography run of `n` shots.
pub fn simulate_process_run(
    channel: &KrausChannel,
    params: &ProbeEnsembleParams,
    eta_b: f64,
    n: u64,
    seed: u64,
) -> Result<ProcessRun> {
    if !(eta_b > 0.5 + 1e-6 && eta_b <= 1.0) {
        return Err(Error::domain(format!(
            "eta_b = {eta_b} must lie in (1/2, 1] for pattern-function reconstruction"
        )));
    }
    if n == 0 {
        return Err(Error::EmptyInput("requested zero shots".to_string()));
    }
    let factory = check_probe_cutoff(params, channel.cutoff())?;
    let gaussian = channel
        .gaussian_action(&probe_gaussian_state(&ProbeSetting::from_params(params, 0.0, 0.0)))
        .is_some();

    let blocks = mc::map_blocks(n, |b, len| {
        let mut rng = mc::block_rng(seed, b);
        let mut records = Vec::with_capacity(len as usize);
        let mut clamps = 0u64;
        for _ in 0..len {
            let (theta, x_a) = draw_angles_and_xa(params, &mut rng, &mut clamps);
            let phi = rng.gen::<f64>() * TWO_PI;
            let setting = ProbeSetting::from_params(params, theta, x_a);
            if gaussian {
                let out = channel
                    .gaussian_action(&probe_gaussian_state(&setting))
                    .expect("checked above");
                let x_b = sample_quadrature_gaussian(&out, phi, eta_b, &mut rng);
                records.push(ProcessSampleRecord { theta, x_a, phi, x_b });
            } else {
                // generic Fock path with post-selection on the channel trace
                let comps = factory.components(theta, setting.d);
                let mut out_comps: Vec<(f64, DVector<Complex64>)> = Vec::new();
                let mut trace = 0.0;
                for (w, v) in &comps {
                    for a in &channel.kraus_ops {
                        let av = a.apply(v);
                        let norm = av.norm_squared();
                        trace += w * norm;
                        if norm > 1e-300 {
                            out_comps.push((*w, av));
                        }
                    }
                }
                if !channel.trace_preserving {
                    let u: f64 = rng.gen();
                    if u >= trace {
                        continue;
                    }
                }
                let scale = 1.0 / trace;
                for c in out_comps.iter_mut() {
                    c.0 *= scale;
                }
                let spec = GridSpec::default_for(channel.cutoff(), setting.d.abs());
                let grid = quadrature_distribution_components(&out_comps, phi, 1.0, &spec)
                    .expect("output density on default grid");
                let y = QuadratureSampler::from_grid(&grid).sample(&mut rng);
                let z: f64 = rng.sample(StandardNormal);
                let x_b = eta_b.sqrt() * y + ((1.0 - eta_b) / 2.0).sqrt() * z;
                records.push(ProcessSampleRecord { theta, x_a, phi, x_b });
            }
        }
        (records, clamps)
    });

    let mut records = Vec::with_capacity(n as usize);
    let mut clamp_count = 0u64;
    for (mut r, c) in blocks {
        records.append(&mut r);
        clamp_count += c;
    }
    let success_rate = records.len() as f64 / n as f64;
    Ok(ProcessRun {
        records,
        n_requested: n,
        clamp_count,
        success_rate,
        seed,
    })
}

/// Simulate a detector-tomography run of `n` shots.
pub fn simulate_detector_run(
    povm: &Povm,
    params: &ProbeEnsembleParams,
    n: u64,
    seed: u64,
) -> Result<DetectorRun> {
    if n == 0 {
        return Err(Error::EmptyInput("requested zero shots".to_string()));
    }
    let factory = check_probe_cutoff(params, povm.cutoff())?;
    let dim = povm.cutoff() + 1;

    // diagonal POVMs admit an O(dim) probability path
    let all_diagonal = povm.elements.iter().all(|e| {
        (0..dim).all(|i| (0..dim).all(|j| i == j || e.get(i, j).norm() < 1e-14))
    });
    let diagonals: Vec<Vec<f64>> = povm
        .elements
        .iter()
        .map(|e| (0..dim).map(|i| e.get(i, i).re).collect())
        .collect();

    let blocks = mc::map_blocks(n, |b, len| {
        let mut rng = mc::block_rng(seed, b);
        let mut records = Vec::with_capacity(len as usize);
        let mut clamps = 0u64;
        for _ in 0..len {
            let (theta, x_a) = draw_angles_and_xa(params, &mut rng, &mut clamps);
            let setting = ProbeSetting::from_params(params, theta, x_a);
            let comps = factory.components(theta, setting.d);
            let mut probs = vec![0.0f64; povm.outcomes()];
            if all_diagonal {
                for (w, v) in &comps {
                    for nn in 0..dim {
                        let pop = w * v[nn].norm_sqr();
                        for (k, diag) in diagonals.iter().enumerate() {
                            probs[k] += pop * diag[nn];
                        }
                    }
                }
            } else {
                for (w, v) in &comps {
                    for (k, e) in povm.elements.iter().enumerate() {
                        probs[k] += w * v.dotc(&e.apply(v)).re;
                    }
                }
            }
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            let mut outcome = povm.outcomes() - 1;
            for (k, p) in probs.iter().enumerate() {
                acc += p.max(0.0);
                if u < acc {
                    outcome = k;
                    break;
                }
            }
            records.push(DetectorSampleRecord { theta, x_a, outcome });
        }
        (records, clamps)
    });

    let mut records = Vec::with_capacity(n as usize);
    let mut clamp_count = 0u64;
    for (mut r, c) in blocks {
        records.append(&mut r);
        clamp_count += c;
    }
    Ok(DetectorRun {
        records,
        n_requested: n,
        clamp_count,
        seed,
    })
}

/// A reconstructed process matrix with per-element standard errors.
#[derive(Debug, Clone)]
pub struct ChoiEstimate {
    /// Hermitian-symmetrized estimate.
    pub chi: ChoiMatrix,
    /// Per-element standard error of the Monte-Carlo mean, same (k,m,l,n)
    /// layout as the Choi entries.
    pub std_error: Vec<f64>,
    pub n_samples: u64,
    /// Largest |chi_{km,ln} - chi*_{ln,km}| before symmetrization.
    pub raw_asymmetry: f64,
    pub max_std_error: f64,
}

fn check_table(table: &PatternTable, eta: f64, need_m: usize, side: &str) -> Result<()> {
    if (table.eta - eta).abs() > 1e-9 {
        return Err(Error::domain(format!(
            "{side} pattern table built for eta = {}, run needs {eta}",
            table.eta
        )));
    }
    if table.m_max < need_m {
        return Err(Error::domain(format!(
            "{side} pattern table m_max = {} too small (need {need_m})",
            table.m_max
        )));
    }
    Ok(())
}

/// Reconstruct chi from recorded samples.
///
/// `success_rate` rescales the estimate for post-selected (trace-decreasing)
/// runs; pass 1.0 for trace-preserving channels.
#[allow(clippy::too_many_arguments)]
pub fn estimate_choi_from_records(
    records: &[ProcessSampleRecord],
    params: &ProbeEnsembleParams,
    eta_b: f64,
    k_max: usize,
    table_a: &PatternTable,
    table_b: &PatternTable,
    success_rate: f64,
) -> Result<ChoiEstimate> {
    if records.is_empty() {
        return Err(Error::EmptyInput(
            "no samples to reconstruct from".to_string(),
        ));
    }
    check_table(table_a, params.eta_a, k_max, "mode-A")?;
    check_table(table_b, eta_b, k_max, "mode-B")?;

    let d = k_max + 1;
    let len = d * d * d * d;

    let chunk_accs: Vec<KernelAccumulator> = {
        use rayon::prelude::*;
        records
            .par_chunks(mc::BLOCK_SIZE as usize)
            .map(|chunk| {
                let mut acc = KernelAccumulator::new(len);
                let mut za = vec![Complex64::new(0.0, 0.0); d * d];
                let mut zb = vec![Complex64::new(0.0, 0.0); d * d];
                let mut g = vec![Complex64::new(0.0, 0.0); len];
                for rec in chunk {
                    fill_phase_kernel(table_a, rec.x_a, rec.theta, d, &mut za);
                    fill_phase_kernel(table_b, rec.x_b, rec.phi, d, &mut zb);
                    let mut idx = 0;
                    for k in 0..d {
                        for m in 0..d {
                            for l in 0..d {
                                let akl = za[k * d + l];
                                for nn in 0..d {
                                    g[idx] = akl * zb[m * d + nn];
                                    idx += 1;
                                }
                            }
                        }
                    }
                    acc.push_sample(&g);
                }
                acc
            })
            .collect()
    };
    let mut acc = KernelAccumulator::new(len);
    for part in &chunk_accs {
        acc.merge(part);
    }

    let lambda = params.lambda;
    let norm = 1.0 / (1.0 - lambda * lambda);
    let mut raw = vec![Complex64::new(0.0, 0.0); len];
    let mut se = vec![0.0; len];
    let mut max_se = 0.0f64;
    for k in 0..d {
        for m in 0..d {
            for l in 0..d {
                for nn in 0..d {
                    let idx = ((k * d + m) * d + l) * d + nn;
                    let scale = norm * lambda.powi(-((k + l) as i32)) * success_rate;
                    raw[idx] = acc.mean(idx) * scale;
                    se[idx] = acc.std_error(idx) * scale;
                    max_se = max_se.max(se[idx]);
                }
            }
        }
    }

    // Hermitian symmetrization chi_{km,ln} <- (chi_{km,ln} + chi*_{ln,km})/2
    let mut chi = ChoiMatrix::zeros(k_max);
    let mut asym = 0.0f64;
    for k in 0..d {
        for m in 0..d {
            for l in 0..d {
                for nn in 0..d {
                    let idx = ((k * d + m) * d + l) * d + nn;
                    let jdx = ((l * d + nn) * d + k) * d + m;
                    asym = asym.max((raw[idx] - raw[jdx].conj()).norm());
                    chi.set(k, m, l, nn, (raw[idx] + raw[jdx].conj()) * 0.5);
                }
            }
        }
    }

    Ok(ChoiEstimate {
        chi,
        std_error: se,
        n_samples: records.len() as u64,
        raw_asymmetry: asym,
        max_std_error: max_se,
    })
}

/// Reconstruct chi from a simulation run (uses its success rate).
pub fn estimate_choi(
    run: &ProcessRun,
    params: &ProbeEnsembleParams,
    eta_b: f64,
    k_max: usize,
    table_a: &PatternTable,
    table_b: &PatternTable,
) -> Result<ChoiEstimate> {
    estimate_choi_from_records(
        &run.records,
        params,
        eta_b,
        k_max,
        table_a,
        table_b,
        run.success_rate,
    )
}

#[inline]
fn fill_phase_kernel(table: &PatternTable, x: f64, angle: f64, d: usize, out: &mut [Complex64]) {
    // out[m*d + n] = f_{m,n}(x) e^{i(m-n) angle}
    let e = Complex64::from_polar(1.0, angle);
    let mut pows = vec![Complex64::new(1.0, 0.0); 2 * d - 1];
    for j in 1..d {
        pows[d - 1 + j] = pows[d - 1 + j - 1] * e;
        pows[d - 1 - j] = pows[d - 1 - j + 1] * e.conj();
    }
    for m in 0..d {
        for n in 0..d {
            let f = table.value(m, n, x);
            out[m * d + n] = pows[d - 1 + m - n] * f;
        }
    }
}

/// A reconstructed POVM element with per-element standard errors.
#[derive(Debug, Clone)]
pub struct PovmEstimate {
    /// `None` reconstructs the sum over outcomes (completeness check).
    pub outcome: Option<usize>,
    /// Hermitian-symmetrized estimate of Pi^k on {|0>,...,|m_max>}.
    pub element: FockOperator,
    /// Standard errors, (m, n) row-major, scaled like the element.
    pub std_error: Vec<f64>,
    /// Trace of the conditional-state estimate rho^k (estimates the outcome
    /// probability), with its standard error.
    pub rho_trace: f64,
    pub rho_trace_se: f64,
    /// Fraction of shots carrying this outcome (1 when `outcome` is None).
    pub empirical_frequency: f64,
    pub n_samples: u64,
    pub raw_asymmetry: f64,
}

/// Reconstruct one POVM element (or, with `outcome = None`, the sum of all
/// elements) from detector records:
/// rho^k_{m,n} = mean[ 1{outcome=k} f_{m,n}(x_a) e^{i(m-n)theta} ],
/// Pi^k_{m,n} = lambda^{-(m+n)} (1-lambda^2)^{-1} rho^k_{n,m}.
pub fn estimate_povm_from_records(
    records: &[DetectorSampleRecord],
    params: &ProbeEnsembleParams,
    outcome: Option<usize>,
    m_max: usize,
    table_a: &PatternTable,
) -> Result<PovmEstimate> {
    if records.is_empty() {
        return Err(Error::EmptyInput(
            "no samples to reconstruct from".to_string(),
        ));
    }
    check_table(table_a, params.eta_a, m_max, "mode-A")?;
    let count = match outcome {
        Some(k) => records.iter().filter(|r| r.outcome == k).count(),
        None => records.len(),
    };
    if count == 0 {
        return Err(Error::EmptyInput(format!(
            "no records with outcome {}",
            outcome.unwrap()
        )));
    }

    let d = m_max + 1;
    let len = d * d + 1; // + trace kernel

    let chunk_accs: Vec<KernelAccumulator> = {
        use rayon::prelude::*;
        records
            .par_chunks(mc::BLOCK_SIZE as usize)
            .map(|chunk| {
                let mut acc = KernelAccumulator::new(len);
                let mut g = vec![Complex64::new(0.0, 0.0); len];
                for rec in chunk {
                    let selected = outcome.map_or(true, |k| rec.outcome == k);
                    if selected {
                        fill_phase_kernel(table_a, rec.x_a, rec.theta, d, &mut g[..d * d]);
                        let mut tr = Complex64::new(0.0, 0.0);
                        for m in 0..d {
                            tr += g[m * d + m];
                        }
                        g[d * d] = tr;
                    } else {
                        g.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
                    }
                    acc.push_sample(&g);
                }
                acc
            })
            .collect()
    };
    let mut acc = KernelAccumulator::new(len);
    for part in &chunk_accs {
        acc.merge(part);
    }

    let lambda = params.lambda;
    let norm = 1.0 / (1.0 - lambda * lambda);
    // raw rho estimate, then the transposed, rescaled element
    let mut pi_raw = vec![Complex64::new(0.0, 0.0); d * d];
    let mut se = vec![0.0; d * d];
    for m in 0..d {
        for n in 0..d {
            let scale = norm * lambda.powi(-((m + n) as i32));
            // transpose: element (m,n) comes from rho_{n,m}
            pi_raw[m * d + n] = acc.mean(n * d + m) * scale;
            se[m * d + n] = acc.std_error(n * d + m) * scale;
        }
    }
    let mut element = FockOperator::zeros(m_max.max(1));
    let mut asym = 0.0f64;
    for m in 0..d {
        for n in 0..d {
            let a = pi_raw[m * d + n];
            let b = pi_raw[n * d + m].conj();
            asym = asym.max((a - b).norm());
            element.set(m, n, (a + b) * 0.5);
        }
    }

    Ok(PovmEstimate {
        outcome,
        element,
        std_error: se,
        rho_trace: acc.mean(d * d).re,
        rho_trace_se: acc.std_error(d * d),
        empirical_frequency: count as f64 / records.len() as f64,
        n_samples: records.len() as u64,
        raw_asymmetry: asym,
    })
}

/// Reconstruct one POVM element from a simulation run.
pub fn estimate_povm(
    run: &DetectorRun,
    params: &ProbeEnsembleParams,
    outcome: Option<usize>,
    m_max: usize,
    table_a: &PatternTable,
) -> Result<PovmEstimate> {
    estimate_povm_from_records(&run.records, params, outcome, m_max, table_a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{identity_channel, loss_channel, photon_subtraction};
    use crate::detector::onoff_detector;
    use crate::gaussian::probe_params_from_variances;

    fn pure_probe_params() -> ProbeEnsembleParams {
        let ch = 1.0f64.cosh();
        probe_params_from_variances(0.5 / ch, 0.5 * ch).unwrap()
    }

    #[test]
    fn process_run_is_seed_deterministic() {
        let params = pure_probe_params();
        let ch = identity_channel(30);
        let a = simulate_process_run(&ch, &params, 0.9, 2000, 11).unwrap();
        let b = simulate_process_run(&ch, &params, 0.9, 2000, 11).unwrap();
        assert_eq!(a.records, b.records);
        let c = simulate_process_run(&ch, &params, 0.9, 2000, 12).unwrap();
        assert_ne!(a.records, c.records);
    }

    #[test]
    fn process_run_invariant_under_thread_count() {
        let params = pure_probe_params();
        let ch = identity_channel(30);
        let n = 2 * mc::BLOCK_SIZE + 137;
        let pool1 = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let pool4 = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = pool1.install(|| simulate_process_run(&ch, &params, 0.85, n, 5).unwrap());
        let b = pool4.install(|| simulate_process_run(&ch, &params, 0.85, n, 5).unwrap());
        assert_eq!(a.records, b.records);
        assert_eq!(a.clamp_count, b.clamp_count);
    }

    #[test]
    fn vacuum_output_for_full_loss() {
        let params = pure_probe_params();
        let ch = loss_channel(0.0, 30).unwrap();
        let run = simulate_process_run(&ch, &params, 0.8, 40_000, 3).unwrap();
        let n = run.records.len() as f64;
        let var: f64 = run.records.iter().map(|r| r.x_b * r.x_b).sum::<f64>() / n;
        assert!((var - 0.5).abs() < 0.02, "{var}");
    }

    #[test]
    fn identity_marginal_variance() {
        // total marginal of x_b: eta_B V_B + (1 - eta_B)/2 with V_B = V_+
        let params = pure_probe_params();
        let eta_b = 0.85;
        let ch = identity_channel(30);
        let run = simulate_process_run(&ch, &params, eta_b, 60_000, 8).unwrap();
        let n = run.records.len() as f64;
        let var: f64 = run.records.iter().map(|r| r.x_b * r.x_b).sum::<f64>() / n;
        let expect = eta_b * params.v_plus + (1.0 - eta_b) / 2.0;
        assert!((var - expect).abs() < 0.02, "{var} vs {expect}");
    }

    #[test]
    fn rejects_bad_eta_b_and_zero_shots() {
        let params = pure_probe_params();
        let ch = identity_channel(30);
        assert!(simulate_process_run(&ch, &params, 0.5, 10, 1).is_err());
        assert!(simulate_process_run(&ch, &params, 0.9, 0, 1).is_err());
    }

    #[test]
    fn estimator_rejects_empty_and_mismatched_tables() {
        let params = pure_probe_params();
        let t_a = PatternTable::build_auto(2, 1.0, 8.0).unwrap();
        let t_b = PatternTable::build_auto(2, 0.9, 8.0).unwrap();
        let err = estimate_choi_from_records(&[], &params, 0.9, 2, &t_a, &t_b, 1.0);
        assert!(err.is_err());
        let rec = [ProcessSampleRecord {
            theta: 0.0,
            x_a: 0.0,
            phi: 0.0,
            x_b: 0.0,
        }];
        // wrong eta on the B side
        assert!(estimate_choi_from_records(&rec, &params, 0.8, 2, &t_a, &t_b, 1.0).is_err());
        // k_max beyond the table
        assert!(estimate_choi_from_records(&rec, &params, 0.9, 3, &t_a, &t_b, 1.0).is_err());
    }

    #[test]
    fn identity_reconstruction_small_run() {
        let params = pure_probe_params();
        let eta_b = 0.9;
        let k_max = 2;
        let ch = identity_channel(30);
        let run = simulate_process_run(&ch, &params, eta_b, 150_000, 21).unwrap();
        let t_a = PatternTable::build_auto(k_max, params.eta_a, 10.0).unwrap();
        let t_b = PatternTable::build_auto(k_max, eta_b, 10.0).unwrap();
        let est = estimate_choi(&run, &params, eta_b, k_max, &t_a, &t_b).unwrap();
        let d = k_max + 1;
        for k in 0..d {
            for m in 0..d {
                for l in 0..d {
                    for n in 0..d {
                        let idx = ((k * d + m) * d + l) * d + n;
                        let expect = if k == m && l == n { 1.0 } else { 0.0 };
                        let err = (est.chi.get(k, m, l, n) - Complex64::new(expect, 0.0)).norm();
                        let tol = (5.0 * est.std_error[idx]).max(0.05);
                        assert!(err < tol, "({k}{m}{l}{n}): err {err} tol {tol}");
                    }
                }
            }
        }
        assert!(est.n_samples == 150_000);
    }

    #[test]
    fn photon_subtraction_post_selected_reconstruction() {
        let params = pure_probe_params();
        let eta_b = 0.85;
        let k_max = 1;
        let t: f64 = 0.7;
        let cutoff = 30;
        let ch = photon_subtraction(t, cutoff).unwrap();
        let run = simulate_process_run(&ch, &params, eta_b, 20_000, 31).unwrap();
        assert!(run.success_rate > 0.01 && run.success_rate < 0.5, "{}", run.success_rate);
        assert!(run.records.len() < 20_000);

        let t_a = PatternTable::build_auto(k_max, params.eta_a, 10.0).unwrap();
        let t_b = PatternTable::build_auto(k_max, eta_b, 10.0).unwrap();
        let est = estimate_choi(&run, &params, eta_b, k_max, &t_a, &t_b).unwrap();
        // oracle: single Kraus sqrt(1-T) T^{n/2} a; on the k_max = 1 block the
        // only nonzero element is chi_{10,10} = 1 - T
        let idx = ((1 * 2 + 0) * 2 + 1) * 2 + 0;
        let err = (est.chi.get(1, 0, 1, 0) - Complex64::new(1.0 - t, 0.0)).norm();
        let tol = (6.0 * est.std_error[idx]).max(0.08);
        assert!(err < tol, "err {err}, tol {tol}, value {}", est.chi.get(1, 0, 1, 0));
    }

    #[test]
    fn detector_run_single_outcome_povm() {
        let params = pure_probe_params();
        let povm = Povm {
            elements: vec![FockOperator::identity(30)],
        };
        let run = simulate_detector_run(&povm, &params, 5_000, 2).unwrap();
        assert!(run.records.iter().all(|r| r.outcome == 0));
    }

    #[test]
    fn detector_run_click_statistics() {
        let params = pure_probe_params();
        let cutoff = 30;
        let povm = onoff_detector(1.0, 0.0, cutoff).unwrap();
        let n = 60_000;
        let run = simulate_detector_run(&povm, &params, n, 9).unwrap();
        let clicks = run.records.iter().filter(|r| r.outcome == 1).count() as f64;

        // ensemble-averaged probe by quadrature over (theta, x_a)
        let factory = ProbeFactory::new(params.v_minus, params.v_plus, cutoff, 1e-12).unwrap();
        let (xs, ws) = crate::quad::composite_gauss_legendre(
            -5.0 * params.v_a.sqrt(),
            5.0 * params.v_a.sqrt(),
            24,
            16,
        );
        let thetas = crate::quad::periodic_angle_grid(24);
        let mut no_click = 0.0;
        for &theta in &thetas {
            for (x, w) in xs.iter().zip(&ws) {
                let gauss = (-x * x / (2.0 * params.v_a)).exp()
                    / (2.0 * std::f64::consts::PI * params.v_a).sqrt();
                let rho = factory.density(theta, params.d_coeff * x);
                let p0 = rho.expectation(&povm.elements[0]).re;
                no_click += w * gauss * p0 / thetas.len() as f64;
            }
        }
        let expect_clicks = 1.0 - no_click;
        let sigma = (expect_clicks * (1.0 - expect_clicks) / n as f64).sqrt();
        assert!(
            (clicks / n as f64 - expect_clicks).abs() < 3.0 * sigma + 1e-3,
            "{} vs {expect_clicks}",
            clicks / n as f64
        );
    }

    #[test]
    fn onoff_povm_reconstruction_small_run() {
        let params = pure_probe_params();
        let m_max = 2;
        let eta_d = 0.6;
        let povm = onoff_detector(eta_d, 0.0, 30).unwrap();
        let run = simulate_detector_run(&povm, &params, 200_000, 17).unwrap();
        let table = PatternTable::build_auto(m_max, params.eta_a, 10.0).unwrap();
        let est = estimate_povm(&run, &params, Some(0), m_max, &table).unwrap();
        for m in 0..=m_max {
            let expect = (1.0 - eta_d).powi(m as i32);
            let err = (est.element.get(m, m).re - expect).abs();
            let tol = (5.0 * est.std_error[m * (m_max + 1) + m]).max(0.05);
            assert!(err < tol, "diag {m}: {err} vs {tol}");
        }
        // trace of rho^0 estimates the no-click probability
        let freq = est.empirical_frequency;
        assert!(
            (est.rho_trace - freq).abs() < 4.0 * est.rho_trace_se + 0.01,
            "{} vs {freq}",
            est.rho_trace
        );
        // unknown outcome label
        assert!(estimate_povm(&run, &params, Some(7), m_max, &table).is_err());
    }
}
