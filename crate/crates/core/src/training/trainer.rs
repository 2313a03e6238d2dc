use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::backprop::{backprop_sequence, mse_loss};
use super::optim::MomentumSgd;
use crate::blstm::BlstmModel;
use crate::error::{Error, Result};
use crate::features::FeatureSequence;

/// An (input, target) training example.
pub type SeqPair = (FeatureSequence, FeatureSequence);

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    /// Zero returns the initial model untouched.
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    /// Utterances per gradient update; the update uses their mean gradient.
    pub batch_size: usize,
    pub seed: u64,
    /// Cap on the global L2 norm of each update's gradient.
    pub gradient_clip: f64,
    /// Visit training utterances in a seed-keyed random order each epoch.
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-5,
            momentum: 0.9,
            max_epochs: 100,
            patience: 20,
            batch_size: 1,
            seed: 0,
            gradient_clip: 5.0,
            shuffle: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!(
                "momentum must lie in [0, 1), got {}",
                self.momentum
            )));
        }
        if self.patience == 0 || self.batch_size == 0 {
            return Err(Error::Config(
                "patience and batch_size must be at least 1".into(),
            ));
        }
        if self.gradient_clip.is_nan() || self.gradient_clip <= 0.0 {
            return Err(Error::Config(format!(
                "gradient_clip must be positive, got {}",
                self.gradient_clip
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    MaxEpochs,
    Patience,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub valid_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were returned; 0 when no epoch ran.
    pub best_epoch: usize,
    pub stopped: StopReason,
}

impl TrainReport {
    /// `epoch<TAB>train_loss<TAB>valid_loss` per epoch, then `best_epoch=<k>`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for e in &self.epochs {
            let _ = writeln!(out, "{}\t{}\t{}", e.epoch, e.train_loss, e.valid_loss);
        }
        let _ = writeln!(out, "best_epoch={}", self.best_epoch);
        out
    }

    pub fn best(&self) -> Option<&EpochRecord> {
        self.epochs.iter().find(|e| e.epoch == self.best_epoch)
    }
}

/// Mean per-utterance MSE of the model's predictions.
pub fn mean_loss(model: &BlstmModel, set: &[SeqPair]) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::EmptyInput("no utterances to evaluate".into()));
    }
    let mut sum = 0.0;
    for (x, y) in set {
        sum += mse_loss(&model.forward(x)?, y)?;
    }
    Ok(sum / set.len() as f64)
}

/// Full-sequence BPTT with momentum SGD. After every epoch the validation
/// loss is measured; the parameters of the best epoch (first on ties) are
/// returned. Deterministic for a fixed config.
pub fn train(
    model: &BlstmModel,
    train_set: &[SeqPair],
    valid_set: &[SeqPair],
    cfg: &TrainConfig,
) -> Result<(BlstmModel, TrainReport)> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::EmptyInput("training set is empty".into()));
    }
    if valid_set.is_empty() {
        return Err(Error::EmptyInput("validation set is empty".into()));
    }

    let mut current = model.clone();
    let mut flat = current.params().to_flat();
    let mut opt = MomentumSgd::new(
        flat.len(),
        cfg.learning_rate,
        cfg.momentum,
        cfg.gradient_clip,
    );
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    let mut best = model.clone();
    let mut best_epoch = 0;
    let mut best_loss = f64::INFINITY;
    let mut since_best = 0;
    let mut epochs = Vec::new();
    let mut stopped = StopReason::MaxEpochs;

    for epoch in 1..=cfg.max_epochs {
        if cfg.shuffle {
            order.shuffle(&mut rng);
        }
        let mut loss_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut acc = vec![0.0; flat.len()];
            for &k in batch {
                let (x, y) = &train_set[k];
                let (loss, g) =
                    backprop_sequence(&current, x, y).map_err(|e| diverged(epoch, e))?;
                loss_sum += loss;
                for (a, v) in acc.iter_mut().zip(g.to_flat()) {
                    *a += v;
                }
            }
            let scale = 1.0 / batch.len() as f64;
            acc.iter_mut().for_each(|a| *a *= scale);
            opt.step(&mut flat, &mut acc)?;
            current.params_mut().set_flat(&flat)?;
        }
        let train_loss = loss_sum / train_set.len() as f64;
        let valid_loss = mean_loss(&current, valid_set).map_err(|e| diverged(epoch, e))?;
        if !valid_loss.is_finite() || !train_loss.is_finite() {
            return Err(Error::Numeric(format!(
                "training diverged at epoch {epoch}: train {train_loss}, valid {valid_loss}"
            )));
        }
        epochs.push(EpochRecord {
            epoch,
            train_loss,
            valid_loss,
        });
        if valid_loss < best_loss {
            best_loss = valid_loss;
            best_epoch = epoch;
            best = current.clone();
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                stopped = StopReason::Patience;
                break;
            }
        }
    }

    Ok((
        best,
        TrainReport {
            epochs,
            best_epoch,
            stopped,
        },
    ))
}

fn diverged(epoch: usize, e: Error) -> Error {
    match e {
        Error::Numeric(m) | Error::Validation(m) => {
            Error::Numeric(format!("training diverged at epoch {epoch}: {m}"))
        }
        other => other,
    }
}
