use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::optim::{AdamW, AdamWConfig};
use crate::error::{Error, Result};
use crate::tensor::{GradStore, ParamStore};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StopConfig {
    pub max_epochs: usize,
    /// Epochs without a new best validation loss tolerated before stopping.
    pub patience: usize,
}

impl StopConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_epochs == 0 || self.patience > self.max_epochs {
            return Err(Error::Config(format!("need 0 < patience <= max_epochs, got {self:?}")));
        }
        Ok(())
    }
}

/// What a pipeline supplies to the training loop.
pub trait Objective {
    /// Adds the full-batch training-loss gradient to `grads` and returns the
    /// loss. `rng` drives dropout.
    fn accumulate(&self, store: &ParamStore, grads: &mut GradStore, rng: &mut ChaCha8Rng) -> Result<f64>;

    /// Loss on the held-out validation examples, dropout off.
    fn validation_loss(&self, store: &ParamStore) -> Result<f64>;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub history: Vec<EpochRecord>,
}

/// Full-batch AdamW with early stopping on validation loss. On return the
/// store holds the parameters of the best epoch.
pub fn train_loop<O: Objective + ?Sized>(
    store: &mut ParamStore,
    objective: &O,
    opt: AdamWConfig,
    stop: StopConfig,
    seed: u64,
) -> Result<TrainOutcome> {
    stop.validate()?;
    let mut optimizer = AdamW::new(opt)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut grads = GradStore::zeros_like(store);
    let mut best = store.clone();
    let mut best_val = f64::INFINITY;
    let mut best_epoch = 0;
    let mut bad = 0;
    let mut history = Vec::new();
    for epoch in 0..stop.max_epochs {
        grads.zero();
        let train_loss = objective.accumulate(store, &mut grads, &mut rng)?;
        if !train_loss.is_finite() {
            return Err(Error::NonFinite(format!("training loss {train_loss} at epoch {epoch}")));
        }
        optimizer.step(store, &grads).map_err(|e| Error::NonFinite(format!("epoch {epoch}: {e}")))?;
        let val_loss = objective.validation_loss(store)?;
        if !val_loss.is_finite() {
            return Err(Error::NonFinite(format!("validation loss {val_loss} at epoch {epoch}")));
        }
        history.push(EpochRecord { epoch, train_loss, val_loss });
        if val_loss < best_val {
            best_val = val_loss;
            best_epoch = epoch;
            best.copy_values_from(store)?;
            bad = 0;
        } else {
            bad += 1;
            if bad > stop.patience {
                break;
            }
        }
    }
    store.copy_values_from(&best)?;
    Ok(TrainOutcome { best_epoch, best_val_loss: best_val, history })
}
