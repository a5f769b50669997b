//! Run configuration: one JSON document covering every pipeline stage.
//!
//! Each model section round-trips into its module config unchanged. The CLI
//! re-derives the per-component seeds from the root `seed`, so one number
//! pins the whole run; `--seed` and `--out` flags win over the file.

use anyhow::{Context, Result};
use handover_core::controller::ControllerConfig;
use handover_core::dataio::{Corpus, SynthConfig};
use handover_core::rot::RotConfig;
use handover_core::svae::SvaeConfig;
use handover_core::timing::TimingConfig;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub data: SynthConfig,
    pub svae: SvaeConfig,
    pub rot: RotConfig,
    pub timing: TimingConfig,
    pub controller: ControllerConfig,
    pub output_dir: Option<PathBuf>,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            data: SynthConfig::default(),
            svae: SvaeConfig::default(),
            rot: RotConfig::default(),
            timing: TimingConfig::default(),
            controller: ControllerConfig::default(),
            output_dir: None,
            seed: 7,
        }
    }
}

impl RunConfig {
    /// Read the config file, or fall back to defaults when none is given.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(RunConfig::default()),
            Some(path) => {
                let text = fs::read_to_string(path)
                    .with_context(|| format!("cannot read config {}", path.display()))?;
                serde_json::from_str(&text)
                    .with_context(|| format!("invalid config {}", path.display()))
            }
        }
    }
}

/// Output root: `--out` flag, then config `output_dir`, then $HANDOVER_HOME,
/// then ./handover_out.
pub fn resolve_out(flag: Option<PathBuf>, config: &RunConfig) -> PathBuf {
    flag.or_else(|| config.output_dir.clone())
        .or_else(|| std::env::var_os("HANDOVER_HOME").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("handover_out"))
}

/// Hold out the last fifth of the participant pairs (at least one) for
/// testing; single-pair corpora keep everything in training.
pub fn default_test_pairs(corpus: &Corpus) -> Vec<u32> {
    let ids = corpus.pair_ids();
    if ids.len() < 2 {
        return Vec::new();
    }
    let hold = (ids.len() / 5).max(1);
    ids[ids.len() - hold..].to_vec()
}

/// Simulation scenario: which agent script to replay, which controller to
/// drive, and the episode seed and length.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Scenario {
    /// "canonical" for the built-in single-handover reach, otherwise the
    /// name of a clip in the corpus directory.
    pub agent: String,
    /// "baseline", "hands" or "both".
    pub controller: String,
    /// Episode seed; defaults to the run seed.
    pub seed: Option<u64>,
    pub max_ticks: usize,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            agent: "canonical".into(),
            controller: "both".into(),
            seed: None,
            max_ticks: 300,
        }
    }
}

impl Scenario {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Scenario::default()),
            Some(path) => {
                let text = fs::read_to_string(path)
                    .with_context(|| format!("cannot read scenario {}", path.display()))?;
                serde_json::from_str(&text)
                    .with_context(|| format!("invalid scenario {}", path.display()))
            }
        }
    }
}
