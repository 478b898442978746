//! Run configuration: one JSON document that, with the data file, fully
//! determines a run.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classifier::TrainConfig;
use crate::data::UtmZone;
use crate::encoder::EncoderConfig;
use crate::error::{Error, Result};
use crate::eval::DEFAULT_KS;
use crate::nn::AdamConfig;
use crate::pipeline::{ExperimentConfig, MethodSelection, PriorConfig};

/// How to choose the split threshold. Exactly one field may be set; with
/// neither, an unseen ratio of 0.8 is targeted.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub threshold: Option<i64>,
    pub unseen_ratio: Option<f64>,
}

pub const DEFAULT_UNSEEN_RATIO: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub unk_dropout: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainingConfig {
            batch_size: t.batch_size,
            max_epochs: t.max_epochs,
            patience: t.patience,
            unk_dropout: t.unk_dropout,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data_path: PathBuf,
    pub zone: Option<UtmZone>,
    pub max_malformed_fraction: f64,
    pub split: SplitConfig,
    pub prior: PriorConfig,
    pub encoder: EncoderConfig,
    pub optimizer: AdamConfig,
    pub training: TrainingConfig,
    pub methods: MethodSelection,
    pub ks: Vec<usize>,
    pub sweep_ratios: Vec<f64>,
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Leaves wall-clock times out of every written file.
    pub deterministic: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            data_path: PathBuf::from("data/dataset_TSMC2014_NYC.txt"),
            zone: None,
            max_malformed_fraction: 0.10,
            split: SplitConfig::default(),
            prior: PriorConfig::default(),
            encoder: EncoderConfig::default(),
            optimizer: AdamConfig::default(),
            training: TrainingConfig::default(),
            methods: MethodSelection::Both,
            ks: DEFAULT_KS.to_vec(),
            sweep_ratios: vec![0.2, 0.4, 0.6, 0.8],
            seed: 42,
            output_dir: PathBuf::from("runs/default"),
            deterministic: false,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            encoder: self.encoder,
            optimizer: self.optimizer,
            batch_size: self.training.batch_size,
            max_epochs: self.training.max_epochs,
            patience: self.training.patience,
            unk_dropout: self.training.unk_dropout,
        }
    }

    pub fn experiment(&self) -> ExperimentConfig {
        ExperimentConfig {
            prior: self.prior.clone(),
            train: self.train_config(),
            methods: self.methods,
            ks: self.ks.clone(),
        }
    }

    /// Target unseen ratio, or `None` when a fixed threshold is configured.
    pub fn target_ratio(&self) -> Option<f64> {
        match self.split.threshold {
            Some(_) => None,
            None => Some(self.split.unseen_ratio.unwrap_or(DEFAULT_UNSEEN_RATIO)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.experiment().validate()?;
        if self.split.threshold.is_some() && self.split.unseen_ratio.is_some() {
            return Err(Error::config("set either split.threshold or split.unseen_ratio, not both"));
        }
        if let Some(r) = self.split.unseen_ratio {
            if !(r > 0.0 && r < 1.0) {
                return Err(Error::config("split.unseen_ratio must lie in (0, 1)"));
            }
        }
        if !(0.0..=1.0).contains(&self.max_malformed_fraction) {
            return Err(Error::config("max_malformed_fraction must lie in [0, 1]"));
        }
        if self.sweep_ratios.iter().any(|r| !(*r > 0.0 && *r < 1.0)) {
            return Err(Error::config("sweep ratios must lie in (0, 1)"));
        }
        if self.output_dir.as_os_str().is_empty() {
            return Err(Error::config("output_dir is empty"));
        }
        Ok(())
    }

    /// Short hex digest of the configuration and the data file contents.
    pub fn run_id(&self, data_digest: &str) -> String {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(self).expect("config serializes"));
        h.update(data_digest.as_bytes());
        hex::encode(h.finalize())[..12].to_string()
    }
}

/// SHA-256 of a file, hex encoded.
pub fn file_digest(path: &Path) -> Result<String> {
    let mut f = std::fs::File::open(path).map_err(|e| Error::file(path, e))?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = std::io::Read::read(&mut f, &mut buf).map_err(|e| Error::file(path, e))?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex::encode(h.finalize()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip_and_defaults() {
        let c = RunConfig::default();
        let back: RunConfig = serde_json::from_str(&c.to_json()).unwrap();
        assert_eq!(back, c);
        let partial: RunConfig = serde_json::from_str(r#"{"seed": 3, "encoder": {"hidden_dim": 64}}"#).unwrap();
        assert_eq!(partial.seed, 3);
        assert_eq!(partial.encoder.hidden_dim, 64);
        assert_eq!(partial.encoder.window_length, 20);
        assert_eq!(partial.target_ratio(), Some(0.8));
    }

    #[test]
    fn unknown_fields_and_conflicts_are_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"sede": 3}"#).is_err());
        let c = RunConfig {
            split: SplitConfig {
                threshold: Some(5),
                unseen_ratio: Some(0.5),
            },
            ..RunConfig::default()
        };
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let mut bad = RunConfig::default();
        bad.encoder.num_attention_heads = 3;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn run_id_depends_on_config_and_data() {
        let c = RunConfig::default();
        let id = c.run_id("abc");
        assert_eq!(id.len(), 12);
        assert_eq!(id, c.run_id("abc"));
        assert_ne!(id, c.run_id("abd"));
        let other = RunConfig { seed: 1, ..RunConfig::default() };
        assert_ne!(id, other.run_id("abc"));
    }
}
