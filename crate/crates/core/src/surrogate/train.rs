use log::{debug, info};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{Dataset, SurrogateError, SurrogateModel};
use crate::corpus::DatasetSplit;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean minibatch loss over the epoch.
    pub train_loss: f64,
    /// Inference-mode loss on the held-out side; `None` when it is empty.
    pub validation_loss: Option<f64>,
    pub learning_rate: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingCurve {
    pub epochs: Vec<EpochStats>,
}

fn mse(model: &SurrogateModel, data: &Dataset, indices: &[usize], chunk: usize) -> f64 {
    let mut total = 0.0;
    let mut count = 0usize;
    for part in indices.chunks(chunk.max(1)) {
        let inputs: Vec<_> = part.iter().map(|&i| &data.inputs[i]).collect();
        for (row, &i) in model.predict_inputs(&inputs).iter().zip(part) {
            for (y, t) in row.iter().zip(&data.targets[i]) {
                total += (y - t) * (y - t);
                count += 1;
            }
        }
    }
    total / count.max(1) as f64
}

/// Minibatch SGD with momentum on mean squared error. Uses the optimisation
/// settings in `model.config`; the learning rate halves whenever the epoch
/// train loss fails to improve for `plateau_patience` epochs.
pub fn train_model(
    model: &mut SurrogateModel,
    data: &Dataset,
    split: &DatasetSplit,
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<TrainingCurve, SurrogateError> {
    if split.train.is_empty() {
        return Err(SurrogateError::EmptyDataset);
    }
    if let Some(&bad) = split.train.iter().chain(&split.test).find(|&&i| i >= data.len()) {
        return Err(SurrogateError::InvalidConfig(format!(
            "split index {bad} outside dataset of {}",
            data.len()
        )));
    }
    let cfg = model.config.clone();
    let mut curve = TrainingCurve::default();
    let mut velocity: Vec<Vec<f64>> = model.params_mut().iter().map(|p| vec![0.0; p.value.len()]).collect();
    let mut lr = cfg.learning_rate;
    let mut best = f64::INFINITY;
    let mut stale = 0usize;
    let mut order = split.train.clone();

    for epoch in 0..cfg.epochs {
        let mut rng = seed::rng(seed::derive(cfg.seed, &[0x7a1, epoch as u64]));
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut seen = 0usize;
        for part in order.chunks(cfg.batch_size) {
            // Batch normalisation needs at least two examples.
            if part.len() < 2 {
                continue;
            }
            let batch = data.batch(part);
            model.zero_grad();
            let loss = model.loss_and_backward(&batch, Some(&mut rng));
            if !loss.is_finite() {
                return Err(SurrogateError::DivergedTraining { epoch });
            }
            for (p, v) in model.params_mut().into_iter().zip(velocity.iter_mut()) {
                for ((w, g), m) in p.value.iter_mut().zip(&p.grad).zip(v.iter_mut()) {
                    *m = cfg.momentum * *m - lr * g;
                    *w += *m;
                }
            }
            loss_sum += loss * part.len() as f64;
            seen += part.len();
        }
        let train_loss = loss_sum / seen.max(1) as f64;
        if !train_loss.is_finite() {
            return Err(SurrogateError::DivergedTraining { epoch });
        }
        let validation_loss = (!split.test.is_empty()).then(|| mse(model, data, &split.test, 256));
        let stats = EpochStats {
            epoch,
            train_loss,
            validation_loss,
            learning_rate: lr,
        };
        info!(
            "epoch {epoch}: train {train_loss:.6} validation {} lr {lr}",
            validation_loss.map_or("-".into(), |v| format!("{v:.6}"))
        );
        on_epoch(&stats);
        curve.epochs.push(stats);

        if train_loss < best {
            best = train_loss;
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.plateau_patience.max(1) {
                lr *= 0.5;
                stale = 0;
                debug!("plateau: learning rate now {lr}");
            }
        }
    }
    Ok(curve)
}
