//! Run configuration, read from and persisted as TOML.

use std::path::Path;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize};

use polytrinity_core::forest::ForestParams;
use polytrinity_core::rng::derive_seed;
use polytrinity_core::rompyro::SimConfig;
use polytrinity_core::twophase::{TrainConfig, TwoPhaseConfig};
use polytrinity_core::uqpcm::{
    default_grid, smolyak_grid_with_budget, tensor_grid_with_budget, CollocationGrid, ErrorModel,
    DEFAULT_NODE_BUDGET,
};

use crate::error::{PipelineError, Result};
use crate::io::{read_text, write_text};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub groups: String,
    pub kinetics: String,
    pub density: String,
    pub conductivity: String,
    pub heat_capacity: String,
    pub experimental: String,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            groups: "bundled:groups_extended.csv".into(),
            kinetics: "bundled:kinetics.csv".into(),
            density: "bundled:density.csv".into(),
            conductivity: "bundled:conductivity.csv".into(),
            heat_capacity: "bundled:heat_capacity.csv".into(),
            experimental: "bundled:experimental.csv".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationConfig {
    pub max_size: usize,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig { max_size: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestSection {
    pub n_trees: usize,
    pub mtry: Option<usize>,
    pub min_samples_leaf: usize,
    pub max_depth: Option<usize>,
    pub bootstrap: bool,
    pub test_fraction: f64,
}

impl Default for ForestSection {
    fn default() -> Self {
        let p = ForestParams::default();
        ForestSection {
            n_trees: p.n_trees,
            mtry: p.mtry,
            min_samples_leaf: p.min_samples_leaf,
            max_depth: p.max_depth,
            bootstrap: p.bootstrap,
            test_fraction: 0.2,
        }
    }
}

impl ForestSection {
    pub fn params(&self, seed: u64) -> ForestParams {
        ForestParams {
            n_trees: self.n_trees,
            mtry: self.mtry,
            min_samples_leaf: self.min_samples_leaf,
            max_depth: self.max_depth,
            bootstrap: self.bootstrap,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictorConfig {
    pub forest: ForestSection,
    pub fingerprint_bits: usize,
    pub fingerprint_radius: u32,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        PredictorConfig {
            forest: ForestSection {
                n_trees: 100,
                min_samples_leaf: 1,
                mtry: None,
                ..Default::default()
            },
            fingerprint_bits: 1024,
            fingerprint_radius: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridChoice {
    /// Tensor 3-point rule up to 3 inputs, Smolyak level 2 above.
    Auto,
    Tensor,
    Smolyak,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UqConfig {
    pub grid: GridChoice,
    /// Smolyak level.
    pub level: usize,
    /// Tensor rule points per input.
    pub points: usize,
    pub node_budget: usize,
    /// Polymers quantified when none are named on the command line.
    pub default_count: usize,
    pub errors: ErrorModel,
}

impl Default for UqConfig {
    fn default() -> Self {
        UqConfig {
            grid: GridChoice::Smolyak,
            level: 2,
            points: 3,
            node_budget: DEFAULT_NODE_BUDGET,
            default_count: 3,
            errors: ErrorModel::default(),
        }
    }
}

impl UqConfig {
    pub fn grid(&self, dim: usize) -> Result<CollocationGrid> {
        Ok(match self.grid {
            GridChoice::Auto => default_grid(dim)?,
            GridChoice::Tensor => {
                tensor_grid_with_budget(&vec![self.points; dim], self.node_budget)?
            }
            GridChoice::Smolyak => smolyak_grid_with_budget(dim, self.level, self.node_budget)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    /// Drop experimental polymers from the pretraining corpus.
    pub exclude_experimental: bool,
    /// `finetune` also runs the single-phase baseline.
    pub with_baseline: bool,
    pub fingerprint_bits: usize,
    pub fingerprint_radius: u32,
    /// Keys left out keep the phase-1 defaults, not the generic trainer ones.
    #[serde(deserialize_with = "phase1_overrides")]
    pub phase1: TrainConfig,
    #[serde(deserialize_with = "phase2_overrides")]
    pub phase2: TrainConfig,
}

/// Gradient-norm cap applied in both phases by default.
pub const DEFAULT_MAX_GRAD_NORM: f64 = 1.0;

fn default_phases() -> (TrainConfig, TrainConfig) {
    let tp = TwoPhaseConfig::default();
    (
        TrainConfig {
            max_grad_norm: Some(DEFAULT_MAX_GRAD_NORM),
            ..tp.phase1
        },
        TrainConfig {
            max_grad_norm: Some(DEFAULT_MAX_GRAD_NORM),
            ..tp.phase2
        },
    )
}

fn merge_onto<'de, D: Deserializer<'de>>(
    base: TrainConfig,
    d: D,
) -> std::result::Result<TrainConfig, D::Error> {
    let partial = serde_json::Value::deserialize(d)?;
    let serde_json::Value::Object(partial) = partial else {
        return Err(D::Error::custom("expected a table"));
    };
    let mut merged = serde_json::to_value(base).map_err(D::Error::custom)?;
    let obj = merged
        .as_object_mut()
        .expect("struct serializes to an object");
    obj.extend(partial);
    serde_json::from_value(merged).map_err(D::Error::custom)
}

fn phase1_overrides<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<TrainConfig, D::Error> {
    merge_onto(default_phases().0, d)
}

fn phase2_overrides<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<TrainConfig, D::Error> {
    merge_onto(default_phases().1, d)
}

impl Default for TrainSection {
    fn default() -> Self {
        let tp = TwoPhaseConfig::default();
        let (phase1, phase2) = default_phases();
        TrainSection {
            exclude_experimental: true,
            with_baseline: true,
            fingerprint_bits: tp.fingerprint_bits,
            fingerprint_radius: tp.fingerprint_radius,
            phase1,
            phase2,
        }
    }
}

/// Everything a run depends on. Per-stage seeds are derived from `seed`;
/// seed fields inside sections are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    pub workers: usize,
    pub out: String,
    pub paths: Paths,
    pub generation: GenerationConfig,
    pub surrogates: ForestSection,
    pub predictors: PredictorConfig,
    pub sim: SimConfig,
    pub uq: UqConfig,
    pub train: TrainSection,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            workers: 0,
            out: "out".into(),
            paths: Paths::default(),
            generation: GenerationConfig::default(),
            surrogates: ForestSection::default(),
            predictors: PredictorConfig::default(),
            sim: SimConfig::default(),
            uq: UqConfig::default(),
            train: TrainSection::default(),
        }
    }
}

pub const CONFIG_FILE: &str = "config.toml";

/// Stream indices for seed derivation.
pub mod streams {
    pub const SURROGATES: u64 = 1;
    pub const PREDICTORS: u64 = 2;
    pub const PHASE1: u64 = 3;
    pub const PHASE2: u64 = 4;
}

impl PipelineConfig {
    pub fn from_toml(text: &str, label: &str) -> Result<Self> {
        let cfg: PipelineConfig =
            toml::from_str(text).map_err(|e| PipelineError::schema(label, e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&read_text(path)?, &path.display().to_string())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_text(path, &self.to_toml()?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seed > i64::MAX as u64 {
            return Err(PipelineError::Config(
                "seed must fit in a signed 64-bit integer".into(),
            ));
        }
        if self.generation.max_size == 0 {
            return Err(PipelineError::Config(
                "generation.max_size must be at least 1".into(),
            ));
        }
        for (name, f) in [
            ("surrogates", &self.surrogates),
            ("predictors.forest", &self.predictors.forest),
        ] {
            if f.n_trees == 0 || f.min_samples_leaf == 0 {
                return Err(PipelineError::Config(format!(
                    "{name}: n_trees and min_samples_leaf must be positive"
                )));
            }
            if !(0.0..1.0).contains(&f.test_fraction) {
                return Err(PipelineError::Config(format!(
                    "{name}: test_fraction must lie in [0, 1)"
                )));
            }
        }
        if self.predictors.fingerprint_bits == 0 || self.train.fingerprint_bits == 0 {
            return Err(PipelineError::Config(
                "fingerprint_bits must be positive".into(),
            ));
        }
        self.sim.validate()?;
        self.train.phase1.validate()?;
        self.train.phase2.validate()?;
        Ok(())
    }

    pub fn surrogate_params(&self) -> ForestParams {
        self.surrogates
            .params(derive_seed(self.seed, streams::SURROGATES))
    }

    pub fn predictor_params(&self) -> ForestParams {
        self.predictors
            .forest
            .params(derive_seed(self.seed, streams::PREDICTORS))
    }

    /// Training configuration with seeds derived from the master seed.
    pub fn two_phase(&self) -> TwoPhaseConfig {
        let t = &self.train;
        TwoPhaseConfig {
            phase1: TrainConfig {
                seed: derive_seed(self.seed, streams::PHASE1),
                ..t.phase1.clone()
            },
            phase2: TrainConfig {
                seed: derive_seed(self.seed, streams::PHASE2),
                ..t.phase2.clone()
            },
            fingerprint_bits: t.fingerprint_bits,
            fingerprint_radius: t.fingerprint_radius,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        let cfg = PipelineConfig::default();
        let text = cfg.to_toml().unwrap();
        assert_eq!(PipelineConfig::from_toml(&text, "t").unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(PipelineConfig::from_toml("bogus = 1\n", "t").is_err());
        assert!(PipelineConfig::from_toml("[generation]\nmax_size = 0\n", "t").is_err());
        let c = PipelineConfig::from_toml("seed = 7\n[sim]\nt_max = 300.0\n", "t").unwrap();
        assert_eq!((c.seed, c.sim.t_max), (7, 300.0));
        assert!(PipelineConfig::from_toml("[train.phase2]\nepoch = 3\n", "t").is_err());
    }

    #[test]
    fn partial_phase_tables_keep_phase_defaults() {
        let c = PipelineConfig::from_toml("[train.phase2]\nlearning_rate = 0.01\n", "t").unwrap();
        let d = PipelineConfig::default();
        assert_eq!(c.train.phase2.epochs, d.train.phase2.epochs);
        assert_eq!(c.train.phase2.max_grad_norm, Some(DEFAULT_MAX_GRAD_NORM));
        assert_eq!(c.train.phase2.learning_rate, 0.01);
    }
}
