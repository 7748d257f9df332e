use log::warn;
use serde::{Deserialize, Serialize};

use super::{Dataset, SurrogateError, SurrogateModel};

/// Per-output accuracy. Outputs with zero variance in the truth have no R²
/// and are left out of `mean_r2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mae: Vec<f64>,
    pub r2: Vec<Option<f64>>,
    pub mean_mae: f64,
    pub mean_r2: f64,
    pub degenerate: Vec<usize>,
}

/// Scores prediction rows against truth rows of equal width.
pub fn evaluate_predictions(predicted: &[Vec<f64>], truth: &[Vec<f64>]) -> Result<EvalReport, SurrogateError> {
    if truth.is_empty() || predicted.len() != truth.len() {
        return Err(SurrogateError::EmptyDataset);
    }
    let n = truth[0].len();
    let count = truth.len() as f64;
    let mut mae = Vec::with_capacity(n);
    let mut r2 = Vec::with_capacity(n);
    let mut degenerate = Vec::new();
    for o in 0..n {
        let mean = truth.iter().map(|t| t[o]).sum::<f64>() / count;
        let mut abs = 0.0;
        let mut ss_res = 0.0;
        let mut ss_tot = 0.0;
        for (p, t) in predicted.iter().zip(truth) {
            let e = t[o] - p[o];
            abs += e.abs();
            ss_res += e * e;
            ss_tot += (t[o] - mean) * (t[o] - mean);
        }
        mae.push(abs / count);
        if ss_tot > 0.0 {
            r2.push(Some(1.0 - ss_res / ss_tot));
        } else {
            warn!("output {o} has zero variance; R² undefined");
            degenerate.push(o);
            r2.push(None);
        }
    }
    let defined: Vec<f64> = r2.iter().flatten().copied().collect();
    if defined.is_empty() {
        return Err(SurrogateError::DegenerateOutput);
    }
    Ok(EvalReport {
        mean_mae: mae.iter().sum::<f64>() / n as f64,
        mean_r2: defined.iter().sum::<f64>() / defined.len() as f64,
        mae,
        r2,
        degenerate,
    })
}

pub fn evaluate_model(model: &SurrogateModel, data: &Dataset, indices: &[usize]) -> Result<EvalReport, SurrogateError> {
    let mut predicted = Vec::with_capacity(indices.len());
    for part in indices.chunks(256) {
        let inputs: Vec<_> = part.iter().map(|&i| &data.inputs[i]).collect();
        predicted.extend(model.predict_inputs(&inputs));
    }
    let truth: Vec<Vec<f64>> = indices.iter().map(|&i| data.targets[i].clone()).collect();
    evaluate_predictions(&predicted, &truth)
}

/// Scores the constant predictor that always outputs the mean of `train`.
pub fn evaluate_mean_baseline(data: &Dataset, train: &[usize], test: &[usize]) -> Result<EvalReport, SurrogateError> {
    if train.is_empty() {
        return Err(SurrogateError::EmptyDataset);
    }
    let width = data.targets[train[0]].len();
    let mut mean = vec![0.0; width];
    for &i in train {
        for (m, t) in mean.iter_mut().zip(&data.targets[i]) {
            *m += t / train.len() as f64;
        }
    }
    let truth: Vec<Vec<f64>> = test.iter().map(|&i| data.targets[i].clone()).collect();
    evaluate_predictions(&vec![mean; test.len()], &truth)
}
