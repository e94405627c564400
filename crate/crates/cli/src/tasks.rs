//! Task orchestration: each config task maps to one run function that reads
//! inputs, computes, and writes its artifacts atomically.

use std::path::{Path, PathBuf};

use sqpt::channel::choi_from_kraus;
use sqpt::estimate::{
    estimate_choi_from_records, estimate_povm_from_records, simulate_detector_run,
    simulate_process_run,
};
use sqpt::gaussian::ProbeEnsembleParams;
use sqpt::pattern::PatternTable;

use crate::config::{RunConfig, Task};
use crate::io::{
    self, chi_to_nested, meta_path, se_to_nested, write_atomic, ChoiResultFile, PovmOutcomeResult,
    PovmResultFile, RunMeta, SampleFile, CONVENTIONS,
};
use crate::{CliError, CliResult};

/// Resolve a configured path against the optional output directory.
fn resolve(path: &Path, out_dir: Option<&Path>) -> PathBuf {
    match out_dir {
        Some(dir) if path.is_relative() => dir.join(path),
        _ => path.to_path_buf(),
    }
}

/// Execute one configured task. Returns a one-line human summary.
pub fn run(config: &RunConfig, out_dir: Option<&Path>) -> CliResult<String> {
    let workers = config.workers.unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Config(format!("cannot build worker pool: {e}")))?;
    pool.install(|| dispatch(config, out_dir))
}

fn dispatch(config: &RunConfig, out_dir: Option<&Path>) -> CliResult<String> {
    match config.task {
        Task::SimulateProcess => simulate_process(config, out_dir),
        Task::SimulateDetector => simulate_detector(config, out_dir),
        Task::Reconstruct => reconstruct(config, out_dir),
        Task::OracleChoi => oracle_choi(config, out_dir),
        Task::PatternTable => pattern_table(config, out_dir),
        Task::Validate => validate(),
    }
}

fn simulate_process(config: &RunConfig, out_dir: Option<&Path>) -> CliResult<String> {
    let channel = config.build_channel()?;
    let params = config.probe_params()?;
    let eta_b = config
        .eta_b
        .ok_or_else(|| CliError::Config("eta_b required".to_string()))?;
    check_eta_min(&params, Some(eta_b), config.eta_min)?;
    let run = simulate_process_run(&channel, &params, eta_b, config.samples, config.seed)?;
    let csv_path = resolve(config.paths.samples.as_ref().unwrap(), out_dir);
    write_atomic(&csv_path, &io::process_csv(&run.records))?;
    let meta = RunMeta {
        conventions: CONVENTIONS.to_string(),
        seed: run.seed,
        n_requested: run.n_requested,
        n_recorded: run.records.len() as u64,
        clamp_rate: run.clamp_rate(),
        success_rate: run.success_rate,
        config: config.clone(),
    };
    write_atomic(&meta_path(&csv_path), &io::to_pretty_json(&meta))?;
    Ok(format!(
        "wrote {} process samples to {} (clamp rate {:.2e}, success rate {:.4})",
        run.records.len(),
        csv_path.display(),
        run.clamp_rate(),
        run.success_rate
    ))
}

fn simulate_detector(config: &RunConfig, out_dir: Option<&Path>) -> CliResult<String> {
    let povm = config.build_detector()?;
    let params = config.probe_params()?;
    check_eta_min(&params, None, config.eta_min)?;
    let run = simulate_detector_run(&povm, &params, config.samples, config.seed)?;
    let csv_path = resolve(config.paths.samples.as_ref().unwrap(), out_dir);
    write_atomic(&csv_path, &io::detector_csv(&run.records))?;
    let meta = RunMeta {
        conventions: CONVENTIONS.to_string(),
        seed: run.seed,
        n_requested: run.n_requested,
        n_recorded: run.records.len() as u64,
        clamp_rate: run.clamp_rate(),
        success_rate: 1.0,
        config: config.clone(),
    };
    write_atomic(&meta_path(&csv_path), &io::to_pretty_json(&meta))?;
    Ok(format!(
        "wrote {} detector samples to {} (clamp rate {:.2e})",
        run.records.len(),
        csv_path.display(),
        run.clamp_rate()
    ))
}

fn check_eta_min(
    params: &ProbeEnsembleParams,
    eta_b: Option<f64>,
    eta_min: f64,
) -> CliResult<()> {
    if params.eta_a < eta_min {
        return Err(CliError::Domain(format!(
            "effective probe efficiency eta_A = {:.4} below the configured minimum {eta_min}; \
             kernel variance would blow up (lower eta_min to force the run)",
            params.eta_a
        )));
    }
    if let Some(eta_b) = eta_b {
        if eta_b < eta_min {
            return Err(CliError::Domain(format!(
                "eta_b = {eta_b} below the configured minimum {eta_min}"
            )));
        }
    }
    Ok(())
}

/// Load a pattern table from the configured path or build one.
fn table_for(
    path: Option<&PathBuf>,
    out_dir: Option<&Path>,
    m_max: usize,
    eta: f64,
) -> CliResult<PatternTable> {
    match path {
        Some(p) => {
            let p = resolve(p, out_dir);
            let table = PatternTable::load(&p)?;
            if table.m_max < m_max || (table.eta - eta).abs() > 1e-9 {
                return Err(CliError::Config(format!(
                    "pattern table {} has (m_max = {}, eta = {}), run needs (m_max >= {m_max}, eta = {eta})",
                    p.display(),
                    table.m_max,
                    table.eta
                )));
            }
            Ok(table)
        }
        None => Ok(PatternTable::build_auto(m_max, eta, 12.0)?),
    }
}

fn reconstruct(config: &RunConfig, out_dir: Option<&Path>) -> CliResult<String> {
    let params = config.probe_params()?;
    let k_max = config.k_max.unwrap();
    let csv_path = resolve(config.paths.samples.as_ref().unwrap(), out_dir);
    let out_path = resolve(config.paths.output.as_ref().unwrap(), out_dir);
    let samples = io::read_samples(&csv_path)?;

    // sidecar metadata, if the samples came from a simulate task
    let sidecar: Option<RunMeta> = std::fs::read_to_string(meta_path(&csv_path))
        .ok()
        .and_then(|s| serde_json::from_str(&s).ok());

    match samples {
        SampleFile::Process(records) => {
            let eta_b = config
                .eta_b
                .ok_or_else(|| CliError::Config("eta_b required to reconstruct".to_string()))?;
            check_eta_min(&params, Some(eta_b), config.eta_min)?;
            let success_rate = config
                .success_rate
                .or_else(|| sidecar.as_ref().map(|m| m.success_rate))
                .unwrap_or(1.0);
            let table_a = table_for(
                config.paths.pattern_table_a.as_ref(),
                out_dir,
                k_max,
                params.eta_a,
            )?;
            let table_b = table_for(
                config.paths.pattern_table_b.as_ref(),
                out_dir,
                k_max,
                eta_b,
            )?;
            let est = estimate_choi_from_records(
                &records,
                &params,
                eta_b,
                k_max,
                &table_a,
                &table_b,
                success_rate,
            )?;
            if est.max_std_error > 1.0 {
                eprintln!(
                    "warning: largest rescaled standard error is {:.3}; \
                     lambda^-(k+l) amplification dominates the high-index elements",
                    est.max_std_error
                );
            }
            let file = ChoiResultFile {
                kind: "choi-estimate".to_string(),
                conventions: CONVENTIONS.to_string(),
                k_max,
                chi: chi_to_nested(&est.chi),
                std_error: Some(se_to_nested(&est.std_error, k_max + 1)),
                n_samples: Some(est.n_samples),
                clamp_rate: sidecar.as_ref().map(|m| m.clamp_rate),
                success_rate: Some(success_rate),
                raw_asymmetry: Some(est.raw_asymmetry),
                max_std_error: Some(est.max_std_error),
                config: config.clone(),
            };
            write_atomic(&out_path, &io::to_pretty_json(&file))?;
            Ok(format!(
                "reconstructed chi (k_max = {k_max}) from {} samples -> {}",
                est.n_samples,
                out_path.display()
            ))
        }
        SampleFile::Detector(records) => {
            check_eta_min(&params, None, config.eta_min)?;
            let table_a = table_for(
                config.paths.pattern_table_a.as_ref(),
                out_dir,
                k_max,
                params.eta_a,
            )?;
            let n_outcomes = records.iter().map(|r| r.outcome).max().unwrap_or(0) + 1;
            let mut outcomes = Vec::new();
            for k in 0..n_outcomes {
                let est = estimate_povm_from_records(&records, &params, Some(k), k_max, &table_a)?;
                outcomes.push(povm_outcome_result(&est, k_max));
            }
            // completeness entry: reconstruction of sum_k Pi^k
            let total = estimate_povm_from_records(&records, &params, None, k_max, &table_a)?;
            outcomes.push(povm_outcome_result(&total, k_max));
            let file = PovmResultFile {
                kind: "povm-estimate".to_string(),
                conventions: CONVENTIONS.to_string(),
                m_max: k_max,
                outcomes,
                n_samples: records.len() as u64,
                config: config.clone(),
            };
            write_atomic(&out_path, &io::to_pretty_json(&file))?;
            Ok(format!(
                "reconstructed {n_outcomes} POVM elements (m_max = {k_max}) from {} samples -> {}",
                records.len(),
                out_path.display()
            ))
        }
    }
}

fn povm_outcome_result(est: &sqpt::estimate::PovmEstimate, m_max: usize) -> PovmOutcomeResult {
    let d = m_max + 1;
    let element = (0..d)
        .map(|m| {
            (0..d)
                .map(|n| {
                    let z = est.element.get(m, n);
                    [z.re, z.im]
                })
                .collect()
        })
        .collect();
    let std_error = (0..d)
        .map(|m| (0..d).map(|n| est.std_error[m * d + n]).collect())
        .collect();
    PovmOutcomeResult {
        outcome: est.outcome,
        element,
        std_error,
        rho_trace: est.rho_trace,
        rho_trace_se: est.rho_trace_se,
        empirical_frequency: est.empirical_frequency,
        raw_asymmetry: est.raw_asymmetry,
    }
}

fn oracle_choi(config: &RunConfig, out_dir: Option<&Path>) -> CliResult<String> {
    let channel = config.build_channel()?;
    let k_max = config.k_max.unwrap();
    let chi = choi_from_kraus(&channel, k_max)?;
    let out_path = resolve(config.paths.output.as_ref().unwrap(), out_dir);
    let file = ChoiResultFile {
        kind: "choi-oracle".to_string(),
        conventions: CONVENTIONS.to_string(),
        k_max,
        chi: chi_to_nested(&chi),
        std_error: None,
        n_samples: None,
        clamp_rate: None,
        success_rate: None,
        raw_asymmetry: None,
        max_std_error: None,
        config: config.clone(),
    };
    write_atomic(&out_path, &io::to_pretty_json(&file))?;
    Ok(format!(
        "wrote Choi oracle (k_max = {k_max}) -> {}",
        out_path.display()
    ))
}

fn pattern_table(config: &RunConfig, out_dir: Option<&Path>) -> CliResult<String> {
    let spec = config
        .pattern
        .as_ref()
        .ok_or_else(|| CliError::Config("missing [pattern] section".to_string()))?;
    let table = match spec.n_points {
        Some(n) => PatternTable::build(
            spec.m_max,
            spec.eta,
            sqpt::homodyne::GridSpec::new(-spec.x_half, spec.x_half, n),
        )?,
        None => PatternTable::build_auto(spec.m_max, spec.eta, spec.x_half)?,
    };
    let out_path = resolve(config.paths.output.as_ref().unwrap(), out_dir);
    write_atomic(&out_path, &table.to_json())?;
    Ok(format!(
        "wrote pattern table (m_max = {}, eta = {}, {} points) -> {}",
        table.m_max,
        table.eta,
        table.spec.n_points,
        out_path.display()
    ))
}

fn validate() -> CliResult<String> {
    for (name, check) in sqpt::validate::suites() {
        match check() {
            Ok(()) => println!("{name}: ok"),
            Err(msg) => {
                println!("{name}: FAIL ({msg})");
                return Err(CliError::Numerical(format!("validation suite {name}: {msg}")));
            }
        }
    }
    Ok("all validation suites passed".to_string())
}
