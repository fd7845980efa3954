use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::data::SynthConfig;
use crate::inference::{DecodeMode, DeidOptions};
use crate::model::ModelConfig;
use crate::text::RedactionScheme;
use crate::training::TrainingConfig;

/// Overrides the config-file seed; a `--seed` flag overrides both.
pub const SEED_ENV: &str = "REDACT_SEED";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsSection {
    pub corpus: Option<PathBuf>,
    /// Defaults to `vocab.txt` beside the checkpoint.
    pub vocab: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub metrics_log: Option<PathBuf>,
}

impl PathsSection {
    pub fn require_corpus(&self) -> Result<&Path, CliError> {
        self.corpus
            .as_deref()
            .ok_or_else(|| CliError::config("missing required key `paths.corpus`"))
    }

    pub fn require_checkpoint(&self) -> Result<&Path, CliError> {
        self.checkpoint
            .as_deref()
            .ok_or_else(|| CliError::config("missing required key `paths.checkpoint`"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitSection {
    pub train_fraction: f64,
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSection {
    fn default() -> Self {
        Self {
            train_fraction: 0.8,
            validation_fraction: 0.1,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VocabSection {
    pub min_freq: usize,
    pub scheme: RedactionScheme,
}

impl Default for VocabSection {
    fn default() -> Self {
        Self {
            min_freq: 1,
            scheme: RedactionScheme::Shared,
        }
    }
}

/// Decoding used for the validation and test reports printed by `train`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecodeSection {
    pub mode: DecodeMode,
    pub window_overlap: Option<usize>,
}

impl Default for DecodeSection {
    fn default() -> Self {
        let d = DeidOptions::default();
        Self {
            mode: d.mode,
            window_overlap: d.window_overlap,
        }
    }
}

impl DecodeSection {
    pub fn options(&self) -> DeidOptions {
        DeidOptions {
            mode: self.mode,
            window_overlap: self.window_overlap,
        }
    }
}

/// Everything one invocation needs. Missing sections take their defaults;
/// unknown keys are an error.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// When set, replaces the seeds of `synth`, `split` and `training`.
    pub seed: Option<u64>,
    pub paths: PathsSection,
    pub synth: SynthConfig,
    pub split: SplitSection,
    pub vocab: VocabSection,
    pub model: ModelConfig,
    pub training: TrainingConfig,
    pub decode: DecodeSection,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::config(format!("config: {e}")))
    }

    /// Reads a TOML file; relative paths inside it resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text).map_err(|e| CliError::config(format!("{}: {}", path.display(), e.message)))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut cfg.paths.corpus,
            &mut cfg.paths.vocab,
            &mut cfg.paths.checkpoint,
            &mut cfg.paths.metrics_log,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn apply_seed(&mut self) {
        if let Some(s) = self.seed {
            self.synth.seed = s;
            self.split.seed = s;
            self.training.seed = s;
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serialises")
    }
}
