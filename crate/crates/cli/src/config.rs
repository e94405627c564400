//! Run configuration: a single TOML file, schema-validated before any
//! computation. Unknown keys are errors.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use crate::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    SimulateProcess,
    SimulateDetector,
    Reconstruct,
    OracleChoi,
    PatternTable,
    Validate,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case", tag = "type")]
pub enum ChannelSpec {
    Identity,
    Loss { transmittance: f64 },
    Phase { phi0: f64 },
    PhotonSubtraction { transmittance: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case", tag = "type")]
pub enum DetectorSpec {
    Onoff {
        eta_d: f64,
        #[serde(default)]
        p_dark: f64,
    },
    Pnr {
        eta_d: f64,
        k_max: usize,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSpec {
    pub v_minus: f64,
    pub v_plus: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    /// Samples CSV: output of simulate tasks, input of reconstruct.
    pub samples: Option<PathBuf>,
    /// Result JSON (estimates, oracles, pattern tables, reports).
    pub output: Option<PathBuf>,
    /// Optional pre-built pattern tables to reuse.
    pub pattern_table_a: Option<PathBuf>,
    pub pattern_table_b: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternSpec {
    pub eta: f64,
    pub m_max: usize,
    #[serde(default = "default_x_half")]
    pub x_half: f64,
    /// Fixed grid size; omitted = auto-refined until the interpolation
    /// criterion is met.
    pub n_points: Option<usize>,
}

fn default_x_half() -> f64 {
    12.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub task: Task,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub samples: u64,
    #[serde(default = "default_cutoff")]
    pub cutoff: usize,
    /// Worker threads; results are bit-identical for any value.
    pub workers: Option<usize>,
    /// Homodyne efficiency of the output-mode detector (process tasks).
    pub eta_b: Option<f64>,
    /// Reconstruction size: chi indices run to k_max (process) and POVM
    /// indices to m_max = k_max (detector).
    pub k_max: Option<usize>,
    /// Smallest efficiency the estimator accepts (kernel variance guard).
    #[serde(default = "default_eta_min")]
    pub eta_min: f64,
    /// Post-selection success rate override for reconstructing
    /// trace-decreasing channels from bare CSV (sidecar metadata wins).
    pub success_rate: Option<f64>,
    pub channel: Option<ChannelSpec>,
    pub detector: Option<DetectorSpec>,
    pub probe: Option<ProbeSpec>,
    pub pattern: Option<PatternSpec>,
    #[serde(default)]
    pub paths: Paths,
}

fn default_seed() -> u64 {
    1
}

fn default_cutoff() -> usize {
    35
}

fn default_eta_min() -> f64 {
    sqpt::pattern::ETA_SOFT_MIN
}

impl RunConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| CliError::Config(format!("{e}")))?;
        cfg.validate_schema()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Structural checks only; physical-domain checks are delegated to the
    /// library when the run starts.
    fn validate_schema(&self) -> CliResult<()> {
        let need = |cond: bool, what: &str| -> CliResult<()> {
            if cond {
                Ok(())
            } else {
                Err(CliError::Config(format!(
                    "task {:?} requires {what}",
                    self.task
                )))
            }
        };
        match self.task {
            Task::SimulateProcess => {
                need(self.channel.is_some(), "a [channel] section")?;
                need(self.probe.is_some(), "a [probe] section")?;
                need(self.eta_b.is_some(), "eta_b")?;
                need(self.samples > 0, "samples > 0")?;
                need(self.paths.samples.is_some(), "paths.samples")?;
            }
            Task::SimulateDetector => {
                need(self.detector.is_some(), "a [detector] section")?;
                need(self.probe.is_some(), "a [probe] section")?;
                need(self.samples > 0, "samples > 0")?;
                need(self.paths.samples.is_some(), "paths.samples")?;
            }
            Task::Reconstruct => {
                need(self.probe.is_some(), "a [probe] section")?;
                need(self.k_max.is_some(), "k_max")?;
                need(self.paths.samples.is_some(), "paths.samples")?;
                need(self.paths.output.is_some(), "paths.output")?;
            }
            Task::OracleChoi => {
                need(self.channel.is_some(), "a [channel] section")?;
                need(self.k_max.is_some(), "k_max")?;
                need(self.paths.output.is_some(), "paths.output")?;
            }
            Task::PatternTable => {
                need(self.pattern.is_some(), "a [pattern] section")?;
                need(self.paths.output.is_some(), "paths.output")?;
            }
            Task::Validate => {}
        }
        Ok(())
    }

    pub fn probe_params(&self) -> CliResult<sqpt::gaussian::ProbeEnsembleParams> {
        let probe = self
            .probe
            .as_ref()
            .ok_or_else(|| CliError::Config("missing [probe] section".to_string()))?;
        Ok(sqpt::gaussian::probe_params_from_variances(
            probe.v_minus,
            probe.v_plus,
        )?)
    }

    pub fn build_channel(&self) -> CliResult<sqpt::channel::KrausChannel> {
        let spec = self
            .channel
            .as_ref()
            .ok_or_else(|| CliError::Config("missing [channel] section".to_string()))?;
        Ok(match spec {
            ChannelSpec::Identity => sqpt::channel::identity_channel(self.cutoff),
            ChannelSpec::Loss { transmittance } => {
                sqpt::channel::loss_channel(*transmittance, self.cutoff)?
            }
            ChannelSpec::Phase { phi0 } => sqpt::channel::phase_channel(*phi0, self.cutoff),
            ChannelSpec::PhotonSubtraction { transmittance } => {
                sqpt::channel::photon_subtraction(*transmittance, self.cutoff)?
            }
        })
    }

    pub fn build_detector(&self) -> CliResult<sqpt::detector::Povm> {
        let spec = self
            .detector
            .as_ref()
            .ok_or_else(|| CliError::Config("missing [detector] section".to_string()))?;
        Ok(match spec {
            DetectorSpec::Onoff { eta_d, p_dark } => {
                sqpt::detector::onoff_detector(*eta_d, *p_dark, self.cutoff)?
            }
            DetectorSpec::Pnr { eta_d, k_max } => {
                sqpt::detector::pnr_detector(*eta_d, *k_max, self.cutoff)?
            }
        })
    }
}
