//! Run configuration: one TOML document drives the whole pipeline.
//!
//! Every stage reads its parameters from a section of [`RunConfig`]
//! (`[sim]`, `[features]`, `[augment]`, `[train]`); omitted fields take
//! the reference defaults and unknown keys are rejected. Command-line
//! overrides touch exactly two knobs: the seed (shared by the signal
//! generator and the trainer) and the decomposition level.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::augment::AugmentConfig;
use crate::error::{Error, Result};
use crate::features::FeatureConfig;
use crate::flatgen::SimConfig;
use crate::fnn::TrainConfig;

/// Configuration of a full pipeline run.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Signal synthesis parameters.
    pub sim: SimConfig,
    /// Segmentation and decomposition parameters.
    pub features: FeatureConfig,
    /// Dataset augmentation switch.
    pub augment: AugmentConfig,
    /// Network training parameters.
    pub train: TrainConfig,
}

impl RunConfig {
    /// Loads a TOML file; parse problems carry the file path.
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {}", path.display(), e.message())))
    }

    /// Validates every section.
    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        self.features.validate()?;
        self.train.validate()?;
        Ok(())
    }

    /// Renders the resolved configuration as TOML, suitable for echoing
    /// into a run log and for reloading.
    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self)
            .map_err(|e| Error::Config(format!("config serialization: {e}")))
    }

    /// Applies command-line overrides: one seed feeds both the signal
    /// generator and the trainer; the level steers feature extraction.
    pub fn apply_overrides(&mut self, seed: Option<u64>, level: Option<usize>) {
        if let Some(seed) = seed {
            self.sim.rng_seed = seed;
            self.train.seed = seed;
        }
        if let Some(level) = level {
            self.features.level = level;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_survive_a_toml_round_trip() {
        let config = RunConfig::default();
        let text = config.to_toml_string().unwrap();
        let back: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, config);
        assert!(text.contains("[sim]"));
        assert!(text.contains("[train]"));
    }

    #[test]
    fn partial_files_fill_in_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(
            &path,
            "[sim]\nrng_seed = 7\n\n[features]\nlevel = 3\n",
        )
        .unwrap();
        let config = RunConfig::load(&path).unwrap();
        assert_eq!(config.sim.rng_seed, 7);
        assert_eq!(config.features.level, 3);
        assert_eq!(config.sim.speed_m_per_s, SimConfig::default().speed_m_per_s);
        assert_eq!(config.train, TrainConfig::default());
        config.validate().unwrap();
    }

    #[test]
    fn unknown_keys_and_bad_syntax_are_rejected_with_the_path() {
        let dir = tempfile::tempdir().unwrap();

        let unknown = dir.path().join("unknown.toml");
        std::fs::write(&unknown, "[sim]\nwheel_diameter_m = 1.0\n").unwrap();
        let err = RunConfig::load(&unknown).unwrap_err();
        assert!(err.to_string().contains("unknown.toml"));

        let broken = dir.path().join("broken.toml");
        std::fs::write(&broken, "[sim\n").unwrap();
        assert!(RunConfig::load(&broken).is_err());

        assert!(RunConfig::load(&dir.path().join("missing.toml")).is_err());
    }

    #[test]
    fn overrides_reach_both_seeds_and_the_level() {
        let mut config = RunConfig::default();
        config.apply_overrides(Some(1234), Some(2));
        assert_eq!(config.sim.rng_seed, 1234);
        assert_eq!(config.train.seed, 1234);
        assert_eq!(config.features.level, 2);

        config.apply_overrides(None, None);
        assert_eq!(config.sim.rng_seed, 1234);
        assert_eq!(config.features.level, 2);
    }

    #[test]
    fn validation_flags_out_of_range_sections() {
        let mut config = RunConfig::default();
        config.sim.speed_m_per_s = -1.0;
        assert!(config.validate().is_err());

        let mut config = RunConfig::default();
        config.features.level = 7;
        assert!(config.validate().is_err());

        let mut config = RunConfig::default();
        config.train.validation_fraction = 1.5;
        assert!(config.validate().is_err());
    }
}
