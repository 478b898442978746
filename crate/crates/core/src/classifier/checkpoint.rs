//! Binary checkpoint: `NPOICKPT`, a little-endian `u32` version, a `u64`
//! header length, a JSON header, then raw little-endian `f64` payload
//! (parameters in header order, then Adam first and second moments).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EpochMetrics, ForecastModel, Objective, Predictor, TrainConfig, TrainState};
use crate::data::{DatasetSplit, PoiSet};
use crate::encoder::{EncoderConfig, Vocabularies};
use crate::error::{Error, Result};
use crate::nn::{Adam, AdamConfig, Mat};

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"NPOICKPT";

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    encoder: EncoderConfig,
    objective: Objective,
    init_seed: u64,
    vocab: Vocabularies,
    params: Vec<(String, [usize; 2])>,
    training: Option<TrainingHeader>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TrainingHeader {
    config: TrainConfig,
    seed: u64,
    epochs_run: usize,
    best_epoch: Option<usize>,
    best_validation: Option<f64>,
    history: Vec<EpochMetrics>,
    optimizer: AdamConfig,
    optimizer_step: u64,
}

/// A model plus, optionally, the state needed to resume training.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub model: ForecastModel,
    training: Option<(TrainingHeader, Adam)>,
}

impl Checkpoint {
    pub fn from_model(model: ForecastModel) -> Self {
        Checkpoint {
            model,
            training: None,
        }
    }

    pub fn from_state(state: &TrainState) -> Self {
        let header = TrainingHeader {
            config: state.config,
            seed: state.seed,
            epochs_run: state.epochs_run,
            best_epoch: state.best_epoch,
            best_validation: Some(state.best_validation).filter(|v| v.is_finite()),
            history: state.history.clone(),
            optimizer: state.optimizer.config,
            optimizer_step: state.optimizer.step,
        };
        Checkpoint {
            model: state.predictor.model.clone(),
            training: Some((header, state.optimizer.clone())),
        }
    }

    pub fn is_resumable(&self) -> bool {
        self.training.is_some()
    }

    pub fn history(&self) -> &[EpochMetrics] {
        self.training.as_ref().map(|(h, _)| h.history.as_slice()).unwrap_or(&[])
    }

    /// Rebuilds a training state against `split`; fresh optimizer and
    /// bookkeeping when the checkpoint holds only a model.
    pub fn into_state(self, split: &DatasetSplit, pois: &PoiSet, config: TrainConfig) -> Result<TrainState> {
        let predictor = Predictor::new(self.model, split, pois)?;
        Ok(match self.training {
            Some((h, optimizer)) => TrainState {
                predictor,
                optimizer,
                config: TrainConfig {
                    max_epochs: config.max_epochs,
                    ..h.config
                },
                seed: h.seed,
                epochs_run: h.epochs_run,
                best_epoch: h.best_epoch,
                best_validation: h.best_validation.unwrap_or(f64::NEG_INFINITY),
                history: h.history,
            },
            None => {
                let optimizer = Adam::new(config.optimizer, &predictor.model.params);
                TrainState {
                    seed: predictor.model.init_seed,
                    predictor,
                    optimizer,
                    config,
                    epochs_run: 0,
                    best_epoch: None,
                    best_validation: f64::NEG_INFINITY,
                    history: Vec::new(),
                }
            }
        })
    }
}

fn write_mat<W: Write>(out: &mut W, m: &Mat) -> std::io::Result<()> {
    for &x in m.iter() {
        out.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

fn read_mat<R: Read>(input: &mut R, shape: [usize; 2]) -> Result<Mat> {
    let n = shape[0] * shape[1];
    let mut bytes = vec![0u8; n * 8];
    input.read_exact(&mut bytes).map_err(|e| Error::Format {
        what: "checkpoint",
        detail: format!("truncated payload: {e}"),
    })?;
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Ok(Mat::from_shape_vec((shape[0], shape[1]), values).expect("shape matches length"))
}

pub fn write_checkpoint<W: Write>(ckpt: &Checkpoint, mut out: W) -> Result<()> {
    let model = &ckpt.model;
    let params = &model.params;
    let header = Header {
        encoder: *model.config(),
        objective: model.objective,
        init_seed: model.init_seed,
        vocab: model.vocab.clone(),
        params: params
            .ids()
            .map(|id| {
                let m = params.get(id);
                (params.name(id).to_string(), [m.nrows(), m.ncols()])
            })
            .collect(),
        training: ckpt.training.as_ref().map(|(h, _)| h.clone()),
    };
    let json = serde_json::to_vec(&header)?;
    out.write_all(MAGIC)?;
    out.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    out.write_all(&(json.len() as u64).to_le_bytes())?;
    out.write_all(&json)?;
    for id in params.ids() {
        write_mat(&mut out, params.get(id))?;
    }
    if let Some((_, adam)) = &ckpt.training {
        for m in adam.first.iter().chain(&adam.second) {
            write_mat(&mut out, m)?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_checkpoint<R: Read>(mut input: R) -> Result<Checkpoint> {
    let bad = |detail: String| Error::Format {
        what: "checkpoint",
        detail,
    };
    let mut magic = [0u8; 8];
    input
        .read_exact(&mut magic)
        .map_err(|_| bad("file too short".into()))?;
    if &magic != MAGIC {
        return Err(bad("not a checkpoint file".into()));
    }
    let mut word = [0u8; 4];
    input.read_exact(&mut word).map_err(|_| bad("missing version".into()))?;
    let version = u32::from_le_bytes(word);
    if version != CHECKPOINT_VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let mut len = [0u8; 8];
    input.read_exact(&mut len).map_err(|_| bad("missing header length".into()))?;
    let len = u64::from_le_bytes(len);
    if len > 1 << 32 {
        return Err(bad(format!("implausible header length {len}")));
    }
    let mut json = vec![0u8; len as usize];
    input.read_exact(&mut json).map_err(|_| bad("truncated header".into()))?;
    let header: Header = serde_json::from_slice(&json)?;

    let mut model = ForecastModel::new(header.encoder, header.objective, header.vocab, header.init_seed)?;
    if header.params.len() != model.params.len() {
        return Err(bad(format!(
            "expected {} parameters, header lists {}",
            model.params.len(),
            header.params.len()
        )));
    }
    let ids: Vec<_> = model.params.ids().collect();
    for (id, (name, shape)) in ids.iter().zip(&header.params) {
        let expected = model.params.get(*id);
        if model.params.name(*id) != name || [expected.nrows(), expected.ncols()] != *shape {
            return Err(bad(format!(
                "parameter {name} {shape:?} does not match model ({} {:?})",
                model.params.name(*id),
                expected.shape()
            )));
        }
        *model.params.get_mut(*id) = read_mat(&mut input, *shape)?;
    }
    if !model.params.all_finite() {
        return Err(bad("non-finite parameter values".into()));
    }
    let training = match header.training {
        Some(h) => {
            let mut adam = Adam::new(h.optimizer, &model.params);
            adam.step = h.optimizer_step;
            for (m, (_, shape)) in adam.first.iter_mut().zip(&header.params) {
                *m = read_mat(&mut input, *shape)?;
            }
            for (m, (_, shape)) in adam.second.iter_mut().zip(&header.params) {
                *m = read_mat(&mut input, *shape)?;
            }
            Some((h, adam))
        }
        None => None,
    };
    let mut rest = [0u8; 1];
    if input.read(&mut rest)? != 0 {
        return Err(bad("trailing bytes after payload".into()));
    }
    Ok(Checkpoint { model, training })
}

/// Writes to a sibling temporary file and renames, so a failed save never
/// leaves a partial checkpoint behind.
pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    let tmp = path.with_extension("partial");
    let result = File::create(&tmp)
        .map_err(|e| Error::file(&tmp, e))
        .and_then(|f| write_checkpoint(ckpt, BufWriter::new(f)))
        .and_then(|_| std::fs::rename(&tmp, path).map_err(|e| Error::file(path, e)));
    if result.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    result
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let f = File::open(path).map_err(|e| Error::file(path, e))?;
    read_checkpoint(BufReader::new(f))
}
