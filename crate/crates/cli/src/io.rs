//! Persistence: sample CSV files, JSON result files, atomic writes.
//!
//! CSV columns are `theta,x_a,phi,x_b` for process runs and `theta,x_a,k`
//! for detector runs, written with 17 significant digits so values
//! round-trip exactly. Every simulate run also writes a `<file>.meta.json`
//! sidecar holding the effective configuration and run statistics.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::{Path, PathBuf};

use sqpt::channel::ChoiMatrix;
use sqpt::estimate::{DetectorSampleRecord, ProcessSampleRecord};

use crate::config::RunConfig;
use crate::{CliError, CliResult};

/// Identifier of the numeric conventions baked into results; bump when a
/// sign/normalization choice changes.
pub const CONVENTIONS: &str = "phase-op=exp(-i n theta); pattern=fourier-kernel/1; rng=chacha12-block4096";

/// Write `content` to `path` atomically (temp file + rename).
pub fn write_atomic(path: &Path, content: &str) -> CliResult<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|e| CliError::Numerical(format!("mkdir {}: {e}", parent.display())))?;
        }
    }
    let tmp = path.with_extension(format!(
        "{}.tmp{}",
        path.extension().and_then(|e| e.to_str()).unwrap_or(""),
        std::process::id()
    ));
    {
        let mut f = std::fs::File::create(&tmp)
            .map_err(|e| CliError::Numerical(format!("create {}: {e}", tmp.display())))?;
        f.write_all(content.as_bytes())
            .map_err(|e| CliError::Numerical(format!("write {}: {e}", tmp.display())))?;
        f.sync_all().ok();
    }
    std::fs::rename(&tmp, path)
        .map_err(|e| CliError::Numerical(format!("rename to {}: {e}", path.display())))
}

pub fn process_csv(records: &[ProcessSampleRecord]) -> String {
    let mut s = String::with_capacity(records.len() * 100 + 32);
    s.push_str("theta,x_a,phi,x_b\n");
    for r in records {
        s.push_str(&format!(
            "{:.16e},{:.16e},{:.16e},{:.16e}\n",
            r.theta, r.x_a, r.phi, r.x_b
        ));
    }
    s
}

pub fn detector_csv(records: &[DetectorSampleRecord]) -> String {
    let mut s = String::with_capacity(records.len() * 60 + 16);
    s.push_str("theta,x_a,k\n");
    for r in records {
        s.push_str(&format!("{:.16e},{:.16e},{}\n", r.theta, r.x_a, r.outcome));
    }
    s
}

/// Samples parsed back from a CSV file, kind inferred from the header.
pub enum SampleFile {
    Process(Vec<ProcessSampleRecord>),
    Detector(Vec<DetectorSampleRecord>),
}

pub fn read_samples(path: &Path) -> CliResult<SampleFile> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| CliError::Config("empty samples file".to_string()))?
        .trim();
    let parse = |tok: &str, line_no: usize| -> CliResult<f64> {
        tok.trim().parse::<f64>().map_err(|e| {
            CliError::Config(format!("bad number at line {line_no}: {tok:?} ({e})"))
        })
    };
    match header {
        "theta,x_a,phi,x_b" => {
            let mut out = Vec::new();
            for (i, line) in lines.enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let mut it = line.split(',');
                let mut next = |_: ()| -> CliResult<&str> {
                    it.next()
                        .ok_or_else(|| CliError::Config(format!("short row at line {}", i + 2)))
                };
                out.push(ProcessSampleRecord {
                    theta: parse(next(())?, i + 2)?,
                    x_a: parse(next(())?, i + 2)?,
                    phi: parse(next(())?, i + 2)?,
                    x_b: parse(next(())?, i + 2)?,
                });
            }
            Ok(SampleFile::Process(out))
        }
        "theta,x_a,k" => {
            let mut out = Vec::new();
            for (i, line) in lines.enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let cols: Vec<&str> = line.split(',').collect();
                if cols.len() != 3 {
                    return Err(CliError::Config(format!("short row at line {}", i + 2)));
                }
                out.push(DetectorSampleRecord {
                    theta: parse(cols[0], i + 2)?,
                    x_a: parse(cols[1], i + 2)?,
                    outcome: cols[2].trim().parse::<usize>().map_err(|e| {
                        CliError::Config(format!("bad outcome at line {}: {e}", i + 2))
                    })?,
                });
            }
            Ok(SampleFile::Detector(out))
        }
        other => Err(CliError::Config(format!(
            "unrecognized samples header {other:?}"
        ))),
    }
}

/// Sidecar metadata written next to each samples CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMeta {
    pub conventions: String,
    pub seed: u64,
    pub n_requested: u64,
    pub n_recorded: u64,
    pub clamp_rate: f64,
    pub success_rate: f64,
    pub config: RunConfig,
}

pub fn meta_path(csv: &Path) -> PathBuf {
    let mut name = csv.file_name().unwrap_or_default().to_os_string();
    name.push(".meta.json");
    csv.with_file_name(name)
}

type ComplexGrid = Vec<Vec<[f64; 2]>>;
type ChiGrid = Vec<Vec<Vec<Vec<[f64; 2]>>>>;
type RealChiGrid = Vec<Vec<Vec<Vec<f64>>>>;

fn complex_pair(z: Complex64) -> [f64; 2] {
    [z.re, z.im]
}

pub fn chi_to_nested(chi: &ChoiMatrix) -> ChiGrid {
    let d = chi.dim();
    (0..d)
        .map(|k| {
            (0..d)
                .map(|m| {
                    (0..d)
                        .map(|l| (0..d).map(|n| complex_pair(chi.get(k, m, l, n))).collect())
                        .collect()
                })
                .collect()
        })
        .collect()
}

pub fn nested_to_chi(nested: &ChiGrid) -> CliResult<ChoiMatrix> {
    let d = nested.len();
    if d == 0 {
        return Err(CliError::Config("empty chi tensor".to_string()));
    }
    let mut chi = ChoiMatrix::zeros(d - 1);
    for (k, a) in nested.iter().enumerate() {
        if a.len() != d {
            return Err(CliError::Config("ragged chi tensor".to_string()));
        }
        for (m, b) in a.iter().enumerate() {
            for (l, c) in b.iter().enumerate() {
                for (n, z) in c.iter().enumerate() {
                    chi.set(k, m, l, n, Complex64::new(z[0], z[1]));
                }
            }
        }
    }
    Ok(chi)
}

pub fn se_to_nested(se: &[f64], d: usize) -> RealChiGrid {
    (0..d)
        .map(|k| {
            (0..d)
                .map(|m| {
                    (0..d)
                        .map(|l| {
                            (0..d)
                                .map(|n| se[((k * d + m) * d + l) * d + n])
                                .collect()
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}

pub fn nested_to_se(nested: &RealChiGrid) -> Vec<f64> {
    let d = nested.len();
    let mut out = vec![0.0; d * d * d * d];
    for (k, a) in nested.iter().enumerate() {
        for (m, b) in a.iter().enumerate() {
            for (l, c) in b.iter().enumerate() {
                for (n, v) in c.iter().enumerate() {
                    out[((k * d + m) * d + l) * d + n] = *v;
                }
            }
        }
    }
    out
}

/// Result file for process-matrix estimates and oracles.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChoiResultFile {
    /// "choi-estimate" or "choi-oracle"
    pub kind: String,
    pub conventions: String,
    pub k_max: usize,
    /// chi[k][m][l][n] as [re, im]
    pub chi: ChiGrid,
    /// parallel standard errors; absent for oracles
    #[serde(skip_serializing_if = "Option::is_none")]
    pub std_error: Option<RealChiGrid>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_samples: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clamp_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub success_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub raw_asymmetry: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_std_error: Option<f64>,
    pub config: RunConfig,
}

/// One reconstructed POVM element inside a detector result file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PovmOutcomeResult {
    /// outcome index; null for the sum over all outcomes
    pub outcome: Option<usize>,
    /// element[m][n] as [re, im]
    pub element: ComplexGrid,
    pub std_error: Vec<Vec<f64>>,
    pub rho_trace: f64,
    pub rho_trace_se: f64,
    pub empirical_frequency: f64,
    pub raw_asymmetry: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PovmResultFile {
    /// "povm-estimate"
    pub kind: String,
    pub conventions: String,
    pub m_max: usize,
    pub outcomes: Vec<PovmOutcomeResult>,
    pub n_samples: u64,
    pub config: RunConfig,
}

pub fn to_pretty_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("result serialization cannot fail")
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("cannot parse {}: {e}", path.display())))
}
