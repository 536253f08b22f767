//! Minibatch SGD for [`NadeModel`].

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::data::UserFeedback;
use crate::error::{Error, Result};
use crate::model::{sample_ordering, Gradients, ItemOrdering, NadeModel};

/// Users per partial gradient sum. Partial sums are reduced in batch order,
/// so results do not depend on the number of worker threads.
const GRAD_CHUNK: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    /// L2 coefficient on `W`, `A` and `V`.
    pub weight_decay: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Half-width of the uniform initialisation.
    pub init_scale: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            batch_size: 200,
            weight_decay: 0.01,
            epochs: 20,
            seed: 0,
            init_scale: 0.01,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::validation(format!(
                "learning rate {} must be finite and >= 0",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::validation("batch size must be positive"));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(Error::validation(format!(
                "weight decay {} must be finite and >= 0",
                self.weight_decay
            )));
        }
        if self.epochs == 0 {
            return Err(Error::validation("epochs must be positive"));
        }
        if !(self.init_scale.is_finite() && self.init_scale >= 0.0) {
            return Err(Error::validation(format!(
                "init scale {} must be finite and >= 0",
                self.init_scale
            )));
        }
        Ok(())
    }
}

/// Trains `model` in place and returns the mean ordered loss of every epoch.
///
/// Random draws come from one generator seeded with `config.seed`: per
/// epoch the user order is shuffled, then per minibatch one ordering is
/// sampled for each user in batch order.
pub fn train(model: &mut NadeModel, data: &[UserFeedback], config: &TrainConfig) -> Result<Vec<f64>> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::validation("no training users"));
    }
    let m = model.n_items();
    if let Some(fb) = data.iter().find(|fb| fb.len() != m) {
        return Err(Error::validation(format!(
            "feedback covers {} items, model {}",
            fb.len(),
            m
        )));
    }

    let mut rng = crate::seeded_rng(config.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut trace = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            let orderings: Vec<ItemOrdering> = batch.iter().map(|_| sample_ordering(m, &mut rng)).collect();
            let (loss, mut grads) = batch_gradient(model, data, batch, &orderings);
            epoch_loss += loss;
            grads.scale(1.0 / batch.len() as f64);
            model.sgd_step(&grads, config.learning_rate, config.weight_decay);
        }
        let mean = epoch_loss / data.len() as f64;
        log::debug!("epoch {}: mean ordered loss {mean:.6}", epoch + 1);
        trace.push(mean);
    }
    Ok(trace)
}

/// Summed loss and gradient over one minibatch.
fn batch_gradient(
    model: &NadeModel,
    data: &[UserFeedback],
    batch: &[usize],
    orderings: &[ItemOrdering],
) -> (f64, Gradients) {
    let (m, h) = (model.n_items(), model.n_hidden());
    let partials: Vec<(f64, Gradients)> = batch
        .par_chunks(GRAD_CHUNK)
        .zip(orderings.par_chunks(GRAD_CHUNK))
        .map(|(users, ords)| {
            let mut grads = Gradients::zeros(m, h);
            let mut loss = 0.0;
            for (&u, ord) in users.iter().zip(ords) {
                loss += model.accumulate_loss_grad(&data[u], ord, &mut grads);
            }
            (loss, grads)
        })
        .collect();
    let mut parts = partials.into_iter();
    let (mut loss, mut grads) = parts.next().expect("non-empty batch");
    for (l, g) in parts {
        loss += l;
        grads.add_assign(&g);
    }
    (loss, grads)
}
