use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::CategoryDistribution;
use crate::encoder::{linear, ContextVector, EncoderConfig, SequenceEncoder, VisitWindow, Vocabularies};
use crate::error::{Error, Result};
use crate::nn::{Gradients, ParamId, ParamStore, Tape, Var};

/// What the head predicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    /// Next-visit category (the joint method).
    Category,
    /// Next-visit POI over the training vocabulary (the baseline).
    Poi,
}

#[derive(Debug, Clone)]
enum Head {
    Mlp {
        hidden: (ParamId, ParamId),
        out: (ParamId, ParamId),
    },
    Linear {
        out: (ParamId, ParamId),
    },
}

/// Encoder plus output head, with all parameter values.
#[derive(Debug, Clone)]
pub struct ForecastModel {
    pub objective: Objective,
    pub vocab: Vocabularies,
    pub params: ParamStore,
    pub init_seed: u64,
    encoder: SequenceEncoder,
    head: Head,
}

/// One supervised example: a window, whose neighbours to fuse, and the
/// class index to predict.
#[derive(Debug, Clone)]
pub struct TrainingExample {
    pub window: VisitWindow,
    pub neighbors: Vec<ContextVector>,
    pub label: usize,
}

/// Fixed-size groups for reducing per-example gradients in a stable order.
const REDUCE_CHUNK: usize = 8;

impl ForecastModel {
    pub fn new(
        config: EncoderConfig,
        objective: Objective,
        vocab: Vocabularies,
        init_seed: u64,
    ) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(init_seed);
        let mut params = ParamStore::new();
        let encoder = SequenceEncoder::new(config, &vocab, &mut params, &mut rng)?;
        let h = config.hidden_dim;
        let head = match objective {
            Objective::Category => {
                if vocab.category_count() == 0 {
                    return Err(Error::config("empty category vocabulary"));
                }
                Head::Mlp {
                    hidden: linear(&mut params, &mut rng, "head.hidden", h, h),
                    out: linear(&mut params, &mut rng, "head.out", h, vocab.category_count()),
                }
            }
            Objective::Poi => {
                if vocab.poi_count() == 0 {
                    return Err(Error::config("empty POI vocabulary"));
                }
                Head::Linear {
                    out: linear(&mut params, &mut rng, "head.poi", h, vocab.poi_count()),
                }
            }
        };
        Ok(ForecastModel {
            objective,
            vocab,
            params,
            init_seed,
            encoder,
            head,
        })
    }

    pub fn config(&self) -> &EncoderConfig {
        self.encoder.config()
    }

    pub fn encoder(&self) -> &SequenceEncoder {
        &self.encoder
    }

    pub fn output_size(&self) -> usize {
        match self.objective {
            Objective::Category => self.vocab.category_count(),
            Objective::Poi => self.vocab.poi_count(),
        }
    }

    /// Head parameter handles, for tests that pin their values.
    pub fn head_params(&self) -> Vec<ParamId> {
        match &self.head {
            Head::Mlp { hidden, out } => vec![hidden.0, hidden.1, out.0, out.1],
            Head::Linear { out } => vec![out.0, out.1],
        }
    }

    pub(crate) fn head_logits(&self, tape: &mut Tape, f: Var) -> Var {
        match &self.head {
            Head::Mlp { hidden, out } => {
                let z = tape.affine(f, hidden.0, hidden.1);
                let z = tape.gelu(z);
                tape.affine(z, out.0, out.1)
            }
            Head::Linear { out } => tape.affine(f, out.0, out.1),
        }
    }

    /// Encoder output fused with the neighbour states.
    pub fn context(&self, window: &VisitWindow, neighbors: &[ContextVector]) -> Result<ContextVector> {
        let mut tape = Tape::new(&self.params);
        let h = self.encoder.encode(&mut tape, window)?;
        let f = self.encoder.fuse(&mut tape, h, neighbors)?;
        ContextVector::from_row(tape.value(f))
    }

    pub fn logits(&self, f: &ContextVector) -> Result<Vec<f64>> {
        if f.len() != self.config().hidden_dim {
            return Err(Error::contract(format!(
                "context width {} != hidden {}",
                f.len(),
                self.config().hidden_dim
            )));
        }
        if f.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite context vector".into()));
        }
        let mut tape = Tape::new(&self.params);
        let x = tape.input(f.as_row());
        let z = self.head_logits(&mut tape, x);
        Ok(tape.value(z).iter().copied().collect())
    }

    /// Softmax over the head's classes.
    pub fn predict(&self, f: &ContextVector) -> Result<CategoryDistribution> {
        CategoryDistribution::from_logits(&self.logits(f)?)
    }

    /// Mean cross-entropy over `batch` and its gradient for every parameter.
    ///
    /// Examples are encoded independently; the head runs once on the stacked
    /// context vectors and its input gradient is fed back per example.
    pub fn loss_and_gradients(&self, batch: &[TrainingExample]) -> Result<(f64, Gradients)> {
        if batch.is_empty() {
            return Err(Error::contract("empty batch"));
        }
        let out = self.output_size();
        if let Some(bad) = batch.iter().find(|e| e.label >= out) {
            return Err(Error::contract(format!("label {} >= {out} classes", bad.label)));
        }
        let forwards: Vec<(Tape, Var)> = batch
            .par_iter()
            .map(|ex| {
                let mut tape = Tape::new(&self.params);
                let h = self.encoder.encode(&mut tape, &ex.window)?;
                let f = self.encoder.fuse(&mut tape, h, &ex.neighbors)?;
                Ok((tape, f))
            })
            .collect::<Result<_>>()?;

        let hidden = self.config().hidden_dim;
        let mut stacked = Array2::zeros((batch.len(), hidden));
        for (i, (tape, f)) in forwards.iter().enumerate() {
            stacked.row_mut(i).assign(&tape.value(*f).row(0));
        }
        let labels: Vec<usize> = batch.iter().map(|e| e.label).collect();
        let mut head_tape = Tape::new(&self.params);
        let x = head_tape.input(stacked);
        let z = self.head_logits(&mut head_tape, x);
        let loss = head_tape.cross_entropy(z, &labels);
        let loss_value = head_tape.scalar(loss);
        let head_back = head_tape.backward(loss);
        let dx = head_back.grad(x).expect("input feeds the loss").clone();

        let partials: Vec<Gradients> = forwards
            .par_chunks(REDUCE_CHUNK)
            .enumerate()
            .map(|(c, chunk)| {
                let mut acc = Gradients::new();
                for (k, (tape, f)) in chunk.iter().enumerate() {
                    let i = c * REDUCE_CHUNK + k;
                    let seed = dx.slice(ndarray::s![i..i + 1, ..]).to_owned();
                    acc.merge(tape.backward_from(*f, seed).params);
                }
                acc
            })
            .collect();
        let mut grads = head_back.params;
        for p in partials {
            grads.merge(p);
        }
        Ok((loss_value, grads))
    }

    /// Forward-only version of [`Self::loss_and_gradients`].
    pub fn loss(&self, batch: &[TrainingExample]) -> Result<f64> {
        let mut total = 0.0;
        for ex in batch {
            let f = self.context(&ex.window, &ex.neighbors)?;
            let p = self.predict(&f)?;
            total += super::category_loss(&p, ex.label);
        }
        Ok(total / batch.len() as f64)
    }
}
