//! JSON run configuration and the shipped presets.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use stmh::model::HamiltonianSpec;
use stmh::nqs::EnsembleMode;
use stmh::sampler::SamplerConfig;
use stmh::trainer::{Estimator, PenaltyForm, TrainConfig};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub n_sites: usize,
    pub j1: f64,
    pub j2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSection {
    pub mode: EnsembleMode,
    pub heads: usize,
    pub width: usize,
}

/// Optimiser settings; the sampler lives in its own section.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub learning_rate: f64,
    pub steps: usize,
    pub lambda_start: f64,
    pub lambda_final: f64,
    pub anneal_steps: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub head_weights: Option<Vec<f64>>,
    #[serde(default)]
    pub estimator: Estimator,
    #[serde(default)]
    pub penalty: PenaltyForm,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub directory: PathBuf,
    pub run_id: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepKind {
    /// Vary the head count at fixed width.
    K,
    /// Vary the width at fixed head count.
    H,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSection {
    pub sweep: SweepKind,
    pub values: Vec<usize>,
    #[serde(default = "default_modes")]
    pub modes: Vec<EnsembleMode>,
    /// Timed steps per repeat, after the warmup.
    pub steps: usize,
    #[serde(default = "default_warmup")]
    pub warmup: usize,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
}

fn default_modes() -> Vec<EnsembleMode> {
    vec![EnsembleMode::SingleTrunk, EnsembleMode::MultiTrunk]
}

fn default_warmup() -> usize {
    5
}

fn default_repeats() -> usize {
    3
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetFamily {
    /// The two translation eigenstates of the dimer manifold.
    MgMomentum,
    /// The two dimer coverings.
    MgDimer,
    /// `(Psi_+ + i Psi_-)/sqrt 2` and `(Psi_+ - i Psi_-)/sqrt 2`, which share a support.
    MgRotated,
    /// Raw ground vectors from exact diagonalisation.
    EdGround,
    /// States read from a JSON file.
    File,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RankSection {
    pub family: TargetFamily,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default = "default_rank_tol")]
    pub rank_tol: f64,
    /// When set, also write a table-trunk checkpoint of this width that
    /// represents the targets.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub construct_width: Option<usize>,
}

fn default_rank_tol() -> f64 {
    stmh::linalg::DEFAULT_RANK_TOL
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostSection {
    /// Width of every per-head trunk; defaults to `ensemble.width`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_m: Option<usize>,
    pub h_s_values: Vec<f64>,
    #[serde(default = "default_penalty_constant")]
    pub penalty_constant: f64,
}

fn default_penalty_constant() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    pub ensemble: EnsembleSection,
    pub train: TrainSection,
    pub sampler: SamplerConfig,
    pub output: OutputSection,
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bench: Option<BenchSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank: Option<RankSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost: Option<CostSection>,
}

pub const PRESET_NAMES: [&str; 5] = ["n4", "n4b", "n4c", "n6", "n8"];

fn preset_text(name: &str) -> Option<&'static str> {
    Some(match name {
        "n4" => include_str!("../presets/n4.json"),
        "n4b" => include_str!("../presets/n4b.json"),
        "n4c" => include_str!("../presets/n4c.json"),
        "n6" => include_str!("../presets/n6.json"),
        "n8" => include_str!("../presets/n8.json"),
        _ => return None,
    })
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| CliError::Validation(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            CliError::Validation(m) => CliError::Validation(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn preset(name: &str) -> Result<Self, CliError> {
        let text = preset_text(name).ok_or_else(|| {
            CliError::Validation(format!("unknown preset {name:?}; available: {}", PRESET_NAMES.join(", ")))
        })?;
        Self::from_json(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    pub fn spec(&self) -> Result<HamiltonianSpec, CliError> {
        Ok(HamiltonianSpec::new(self.model.n_sites, self.model.j1, self.model.j2)?)
    }

    /// Trainer configuration for one seed; the sampler seed is the run seed.
    pub fn train_config(&self, seed: u64) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            learning_rate: t.learning_rate,
            steps: t.steps,
            lambda_start: t.lambda_start,
            lambda_final: t.lambda_final,
            anneal_steps: t.anneal_steps,
            head_weights: t.head_weights.clone(),
            sampler: SamplerConfig { seed, ..self.sampler.clone() },
            estimator: t.estimator,
            penalty: t.penalty,
        }
    }

    pub fn run_dir(&self) -> PathBuf {
        self.output.directory.join(&self.output.run_id)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.spec()?;
        let e = &self.ensemble;
        if e.heads == 0 || e.width == 0 {
            return Err(CliError::Validation("ensemble heads and width must be positive".into()));
        }
        self.train_config(0).validate(e.heads)?;
        if self.seeds.is_empty() {
            return Err(CliError::Validation("seeds must not be empty".into()));
        }
        if self.output.run_id.is_empty() || self.output.run_id.contains(['/', '\\']) {
            return Err(CliError::Validation("output.run_id must be a plain non-empty name".into()));
        }
        if let Some(b) = &self.bench {
            if b.values.is_empty() || b.values.contains(&0) {
                return Err(CliError::Validation("bench.values must be non-empty and positive".into()));
            }
            if b.modes.is_empty() || b.steps == 0 || b.repeats == 0 {
                return Err(CliError::Validation("bench modes, steps and repeats must be non-empty".into()));
            }
        }
        if let Some(r) = &self.rank {
            if r.family == TargetFamily::File && r.path.is_none() {
                return Err(CliError::Validation("rank.family = file needs rank.path".into()));
            }
            if !(r.rank_tol > 0.0 && r.rank_tol < 1.0) {
                return Err(CliError::Validation("rank.rank_tol must lie in (0, 1)".into()));
            }
        }
        if let Some(c) = &self.cost {
            if c.h_s_values.is_empty() || c.h_s_values.iter().any(|&h| !(h >= 0.0 && h.is_finite())) {
                return Err(CliError::Validation("cost.h_s_values must be non-empty and non-negative".into()));
            }
            if c.h_m == Some(0) {
                return Err(CliError::Validation("cost.h_m must be positive".into()));
            }
        }
        Ok(())
    }
}
