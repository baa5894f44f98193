//! TOML run configuration. Every section is optional and falls back to its
//! defaults; unknown keys are rejected. Command-line flags override file values.

use std::path::Path;

use infodyn_core::clustering::FeatureMode;
use infodyn_core::hodgepodge::HodgepodgeParams;
use infodyn_core::lcms::{SynthConfig, DEFAULT_CLIP_SIGMAS, DEFAULT_ENVELOPE_K, DEFAULT_RIDGE_FRACTION};
use infodyn_core::pdg::DEFAULT_ALPHAS;
use infodyn_core::zstack::DEFAULT_ZSTACK_ALPHA;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::io::read_text;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub out_dir: Option<String>,
    pub simulate_bz: SimulateConfig,
    pub spectra: SpectraConfig,
    pub cluster: ClusterConfig,
    pub zstack: ZStackConfig,
    pub lcms_synth: LcmsSynthConfig,
    pub lcms_analyze: LcmsAnalyzeConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = read_text(path)?;
        toml::from_str(&text).map_err(|e| CliError::validation(format!("config {}", path.display()), e.message()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub steps: u64,
    pub emit_every: u64,
    pub params: HodgepodgeParams,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self { steps: 2000, emit_every: 1, params: HodgepodgeParams::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectraConfig {
    pub alphas: Vec<f64>,
    /// Use every n-th frame; 1 keeps all.
    pub decimate: usize,
}

impl Default for SpectraConfig {
    fn default() -> Self {
        Self { alphas: DEFAULT_ALPHAS.to_vec(), decimate: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterConfig {
    pub k_min: usize,
    pub k_max: usize,
    pub mode: FeatureMode,
    pub standardize: bool,
    pub max_iter: usize,
    pub tol: f64,
    /// Also cluster every n-th pair and compare against the full run.
    pub decimate: Option<usize>,
    /// Minimum number of alternating segments reported as an oscillation.
    pub min_oscillation_runs: usize,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            k_min: 3,
            k_max: 6,
            mode: FeatureMode::Pdge,
            standardize: false,
            max_iter: 300,
            tol: 1e-9,
            decimate: None,
            min_oscillation_runs: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ZStackConfig {
    pub alpha: f64,
    /// Channels to transform; empty means all.
    pub channels: Vec<String>,
    /// `|ω|` at or below this counts as stable.
    pub stable_tolerance: f64,
    /// Write 8-bit PGM renders and level maps.
    pub renders: bool,
}

impl Default for ZStackConfig {
    fn default() -> Self {
        Self { alpha: DEFAULT_ZSTACK_ALPHA, channels: Vec::new(), stable_tolerance: 0.0, renders: true }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum GridFormat {
    #[default]
    Csv,
    Bin,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LcmsSynthConfig {
    pub format: GridFormat,
    pub generator: SynthConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LcmsAnalyzeConfig {
    pub envelope_k: f64,
    pub ridge_fraction: f64,
    pub clip_sigmas: f64,
    /// Blank matching tolerance in m/z.
    pub m_tol: f64,
    /// Blank matching tolerance in scans.
    pub t_tol: usize,
}

impl Default for LcmsAnalyzeConfig {
    fn default() -> Self {
        Self {
            envelope_k: DEFAULT_ENVELOPE_K,
            ridge_fraction: DEFAULT_RIDGE_FRACTION,
            clip_sigmas: DEFAULT_CLIP_SIGMAS,
            m_tol: 0.5,
            t_tol: 3,
        }
    }
}
