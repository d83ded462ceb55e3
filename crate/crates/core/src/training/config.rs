use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::Articulator;
use crate::error::{Error, Result};
use crate::models::{ModelSpec, TaskMode, Variant, DEFAULT_HIDDEN_WIDTH};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Approach {
    #[serde(rename = "ABA", alias = "aba")]
    Aba,
    #[serde(rename = "AAT", alias = "aat")]
    Aat,
}

impl Approach {
    pub fn name(self) -> &'static str {
        match self {
            Approach::Aba => "ABA",
            Approach::Aat => "AAT",
        }
    }
}

impl std::str::FromStr for Approach {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "ABA" => Ok(Approach::Aba),
            "AAT" => Ok(Approach::Aat),
            _ => Err(Error::Config(format!("unknown approach `{s}` (expected ABA or AAT)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub variant: Variant,
    pub approach: Approach,
    /// ABA only: train a subset of articulators instead of all eight.
    pub articulators: Option<Vec<Articulator>>,
    pub hidden_width: usize,
    pub max_epochs: usize,
    /// Utterances per batch.
    pub batch_size: usize,
    pub learning_rate: f64,
    pub patience: usize,
    pub seed: u64,
    pub precision: Precision,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            variant: Variant::St5,
            approach: Approach::Aat,
            articulators: None,
            hidden_width: DEFAULT_HIDDEN_WIDTH,
            max_epochs: 500,
            batch_size: 10,
            learning_rate: 0.001,
            patience: 10,
            seed: 0,
            precision: Precision::F64,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.max_epochs == 0 || self.batch_size == 0 || self.hidden_width == 0 || self.patience == 0 {
            return bad("max_epochs, batch_size, hidden_width and patience must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.patience >= self.max_epochs {
            return bad("patience must be smaller than max_epochs");
        }
        match (&self.articulators, self.approach) {
            (Some(_), Approach::Aat) => bad("articulators can only be restricted for ABA"),
            (Some(list), Approach::Aba) if list.is_empty() => bad("articulator list is empty"),
            _ => Ok(()),
        }
    }

    /// One model spec per trained network, in canonical articulator order
    /// for ABA.
    pub fn model_specs(&self) -> Vec<ModelSpec> {
        match self.approach {
            Approach::Aat => vec![ModelSpec::new(self.variant, TaskMode::Aat, self.hidden_width)],
            Approach::Aba => {
                let chosen = self.articulators.clone().unwrap_or_else(|| Articulator::ALL.to_vec());
                Articulator::ALL
                    .into_iter()
                    .filter(|a| chosen.contains(a))
                    .map(|a| ModelSpec::new(self.variant, TaskMode::Aba(a), self.hidden_width))
                    .collect()
            }
        }
    }
}

/// Experiment file: training settings plus data and output locations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Prepared-corpus directory (output of `prepare`).
    pub data: PathBuf,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub train: TrainConfig,
}

impl ExperimentConfig {
    pub fn read(path: &Path) -> Result<ExperimentConfig> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: ExperimentConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        // Relative paths are relative to the config file.
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.data, &mut cfg.output_dir] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        cfg.train.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = TrainConfig::default();
        assert_eq!((c.max_epochs, c.batch_size, c.learning_rate, c.patience), (500, 10, 0.001, 10));
        c.validate().unwrap();
        assert_eq!(c.model_specs().len(), 1);
    }

    #[test]
    fn aba_subset_order() {
        let c = TrainConfig {
            approach: Approach::Aba,
            articulators: Some(vec![Articulator::UpperLip, Articulator::Tongue]),
            ..TrainConfig::default()
        };
        let specs = c.model_specs();
        assert_eq!(specs.len(), 2);
        assert_eq!(specs[0].task_mode, TaskMode::Aba(Articulator::Tongue));
        let all = TrainConfig {
            approach: Approach::Aba,
            ..TrainConfig::default()
        };
        assert_eq!(all.model_specs().len(), 8);
    }

    #[test]
    fn rejects_bad_values() {
        for c in [
            TrainConfig { patience: 500, ..TrainConfig::default() },
            TrainConfig { learning_rate: 0.0, ..TrainConfig::default() },
            TrainConfig { batch_size: 0, ..TrainConfig::default() },
            TrainConfig { articulators: Some(vec![Articulator::Tongue]), ..TrainConfig::default() },
        ] {
            assert!(matches!(c.validate(), Err(Error::Config(_))));
        }
    }

    #[test]
    fn toml_parsing() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("exp.toml");
        fs::write(
            &path,
            "data = \"prepared\"\noutput_dir = \"runs/a\"\n[train]\nvariant = \"MT-5\"\napproach = \"ABA\"\narticulators = [\"tongue\"]\nmax_epochs = 20\n",
        )
        .unwrap();
        let cfg = ExperimentConfig::read(&path).unwrap();
        assert_eq!(cfg.data, dir.path().join("prepared"));
        assert_eq!(cfg.train.variant, Variant::Mt5);
        assert_eq!(cfg.train.max_epochs, 20);
        assert_eq!(cfg.train.batch_size, 10);
        fs::write(&path, "data = \"x\"\noutput_dir = \"y\"\n[train]\nlearnin_rate = 0.1\n").unwrap();
        assert!(matches!(ExperimentConfig::read(&path), Err(Error::Config(_))));
    }
}
