use std::io::Write;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ForecastModel, Objective, Predictor, TrainingExample};
use crate::data::{DatasetSplit, PoiSet, TargetRef};
use crate::encoder::{build_window, EncoderConfig, Vocabularies};
use crate::error::{Error, Result};
use crate::nn::{Adam, AdamConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub encoder: EncoderConfig,
    pub optimizer: AdamConfig,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    /// Probability of replacing an input POI with UNK during training, so
    /// the UNK row is trained for test-time windows holding new POIs.
    pub unk_dropout: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            encoder: EncoderConfig::default(),
            optimizer: AdamConfig::default(),
            batch_size: 64,
            max_epochs: 50,
            patience: 5,
            unk_dropout: 0.1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.encoder.validate()?;
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be positive"));
        }
        if !(0.0..1.0).contains(&self.unk_dropout) {
            return Err(Error::config("unk_dropout must lie in [0, 1)"));
        }
        if !(self.optimizer.learning_rate > 0.0) {
            return Err(Error::config("learning rate must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_acc1: f64,
    pub wall_seconds: f64,
}

/// Model, optimizer and bookkeeping of a training run. The model holds the
/// best-validation parameters once [`Trainer::run`] returns.
#[derive(Debug, Clone)]
pub struct TrainState {
    pub predictor: Predictor,
    pub optimizer: Adam,
    pub config: TrainConfig,
    pub seed: u64,
    pub epochs_run: usize,
    pub best_epoch: Option<usize>,
    pub best_validation: f64,
    pub history: Vec<EpochMetrics>,
}

impl TrainState {
    pub fn objective(&self) -> Objective {
        self.predictor.model.objective
    }

    /// Epoch log as CSV: `epoch,train_loss,val_<metric>_acc1,wall_seconds`.
    pub fn write_metrics_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let metric = match self.objective() {
            Objective::Category => "val_category_acc1",
            Objective::Poi => "val_poi_acc1",
        };
        writeln!(out, "epoch,train_loss,{metric},wall_seconds")?;
        for m in &self.history {
            writeln!(
                out,
                "{},{:.6},{:.6},{:.3}",
                m.epoch, m.train_loss, m.val_acc1, m.wall_seconds
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct ExampleRef {
    user: usize,
    end: usize,
    label: usize,
}

fn label_of(objective: Objective, vocab: &Vocabularies, pois: &PoiSet, poi_id: &str) -> Option<usize> {
    match objective {
        Objective::Category => pois.get(poi_id).and_then(|p| vocab.category(&p.category_id)),
        Objective::Poi => vocab.poi(poi_id),
    }
}

/// Fraction of validation targets whose argmax class is the truth. Targets
/// whose truth has no class (unseen POIs under the baseline) count as misses.
pub fn validation_metric(
    predictor: &Predictor,
    split: &DatasetSplit,
    pois: &PoiSet,
    targets: &[TargetRef],
) -> Result<f64> {
    if targets.is_empty() {
        return Ok(0.0);
    }
    let model = &predictor.model;
    let hits: Vec<bool> = targets
        .par_iter()
        .map(|&t| {
            let truth = label_of(model.objective, &model.vocab, pois, split.target_poi(t));
            let p = predictor.predict(split, pois, t)?;
            Ok(truth == Some(p.argmax()))
        })
        .collect::<Result<_>>()?;
    Ok(hits.iter().filter(|&&h| h).count() as f64 / targets.len() as f64)
}

/// Sliding one-step-ahead training over a split's training partition.
pub struct Trainer<'a> {
    split: &'a DatasetSplit,
    pois: &'a PoiSet,
    config: TrainConfig,
    objective: Objective,
    examples: Vec<ExampleRef>,
    vocab: Vocabularies,
}

impl<'a> Trainer<'a> {
    pub fn new(
        split: &'a DatasetSplit,
        pois: &'a PoiSet,
        config: TrainConfig,
        objective: Objective,
    ) -> Result<Self> {
        config.validate()?;
        let vocab = Vocabularies::from_training(&split.train, pois);
        let mut examples = Vec::new();
        for (user, h) in split.histories.iter().enumerate() {
            let n = h.visits.iter().take_while(|v| v.timestamp < split.threshold).count();
            for end in 1..n {
                let label = label_of(objective, &vocab, pois, &h.visits[end].poi_id)
                    .ok_or_else(|| Error::contract(format!("training POI {} unlabeled", h.visits[end].poi_id)))?;
                examples.push(ExampleRef { user, end, label });
            }
        }
        if examples.is_empty() {
            return Err(Error::config("training partition yields no examples"));
        }
        Ok(Trainer {
            split,
            pois,
            config,
            objective,
            examples,
            vocab,
        })
    }

    pub fn example_count(&self) -> usize {
        self.examples.len()
    }

    pub fn initial_state(&self, seed: u64) -> Result<TrainState> {
        let model = ForecastModel::new(self.config.encoder, self.objective, self.vocab.clone(), seed)?;
        let optimizer = Adam::new(self.config.optimizer, &model.params);
        let predictor = Predictor::new(model, self.split, self.pois)?;
        Ok(TrainState {
            predictor,
            optimizer,
            config: self.config,
            seed,
            epochs_run: 0,
            best_epoch: None,
            best_validation: f64::NEG_INFINITY,
            history: Vec::new(),
        })
    }

    fn example(&self, r: ExampleRef, state: &TrainState, rng: &mut ChaCha8Rng) -> Result<TrainingExample> {
        let model = &state.predictor.model;
        let mut window = build_window(
            &self.split.histories[r.user],
            r.end,
            &model.vocab,
            self.pois,
            model.config(),
        )?;
        if self.config.unk_dropout > 0.0 {
            let unk = model.vocab.poi_unk();
            for (p, &real) in window.poi_indices.iter_mut().zip(&window.mask) {
                if real && rng.random::<f64>() < self.config.unk_dropout {
                    *p = unk;
                }
            }
        }
        Ok(TrainingExample {
            window,
            neighbors: state.predictor.social.neighbor_vectors(r.user),
            label: r.label,
        })
    }

    /// One pass over the shuffled examples; returns the mean batch loss.
    pub fn run_epoch(&self, state: &mut TrainState) -> Result<f64> {
        let epoch = state.epochs_run;
        let mut rng = ChaCha8Rng::seed_from_u64(state.seed);
        rng.set_stream(epoch as u64 + 1);
        let mut order: Vec<usize> = (0..self.examples.len()).collect();
        order.shuffle(&mut rng);

        let mut total = 0.0;
        for (b, chunk) in order.chunks(self.config.batch_size).enumerate() {
            let batch: Vec<TrainingExample> = chunk
                .iter()
                .map(|&i| self.example(self.examples[i], state, &mut rng))
                .collect::<Result<_>>()?;
            let (loss, grads) = state.predictor.model.loss_and_gradients(&batch)?;
            if !loss.is_finite() {
                log::error!("non-finite loss in epoch {epoch} batch {b}: examples {chunk:?}");
                return Err(Error::Diverged {
                    epoch,
                    batch: b,
                    loss,
                });
            }
            total += loss * chunk.len() as f64;
            let model = &mut state.predictor.model;
            state.optimizer.update(&mut model.params, &grads);
        }
        state
            .predictor
            .social
            .refresh(&state.predictor.model, self.split, self.pois)?;
        state.epochs_run += 1;
        Ok(total / self.examples.len() as f64)
    }

    /// Trains until `max_epochs` or early stopping, then restores the
    /// best-validation parameters.
    pub fn run(&self, mut state: TrainState) -> Result<TrainState> {
        let mut best_params = state.predictor.model.params.clone();
        let mut stale = 0usize;
        while state.epochs_run < self.config.max_epochs {
            let started = Instant::now();
            let epoch = state.epochs_run;
            let train_loss = self.run_epoch(&mut state)?;
            let val = validation_metric(&state.predictor, self.split, self.pois, &self.split.validation)?;
            let wall_seconds = started.elapsed().as_secs_f64();
            log::info!(
                "{:?} epoch {epoch}: loss {train_loss:.4}, val acc@1 {val:.4} ({wall_seconds:.1}s)",
                self.objective
            );
            state.history.push(EpochMetrics {
                epoch,
                train_loss,
                val_acc1: val,
                wall_seconds,
            });
            if val > state.best_validation {
                state.best_validation = val;
                state.best_epoch = Some(epoch);
                best_params = state.predictor.model.params.clone();
                stale = 0;
            } else {
                stale += 1;
                if stale >= self.config.patience {
                    log::info!("early stop after epoch {epoch}");
                    break;
                }
            }
        }
        state.predictor.model.params = best_params;
        state
            .predictor
            .social
            .refresh(&state.predictor.model, self.split, self.pois)?;
        Ok(state)
    }
}

/// Trains the category classifier on `split`.
pub fn train(split: &DatasetSplit, pois: &PoiSet, config: &TrainConfig, seed: u64) -> Result<TrainState> {
    train_with_objective(split, pois, config, Objective::Category, seed)
}

pub fn train_with_objective(
    split: &DatasetSplit,
    pois: &PoiSet,
    config: &TrainConfig,
    objective: Objective,
    seed: u64,
) -> Result<TrainState> {
    let trainer = Trainer::new(split, pois, *config, objective)?;
    log::info!(
        "training {objective:?} head on {} examples ({} validation targets)",
        trainer.example_count(),
        split.validation.len()
    );
    let state = trainer.initial_state(seed)?;
    trainer.run(state)
}
