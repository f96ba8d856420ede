use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::matrix::TokenMatrix;
use super::model::{argmax, probe_backward, probe_forward, ProbeParams, ProbeShape};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSpec {
    pub epochs: u32,
    pub lr: f64,
    pub batch: u32,
    pub seed: u64,
}

impl Default for TrainSpec {
    fn default() -> Self {
        Self {
            epochs: 40,
            lr: 0.001,
            batch: 8,
            seed: 0,
        }
    }
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

/// Adam without weight decay.
struct Adam {
    m: ProbeParams,
    v: ProbeParams,
    step: i32,
}

impl Adam {
    fn new(shape: ProbeShape) -> Self {
        Self {
            m: ProbeParams::zeros(shape),
            v: ProbeParams::zeros(shape),
            step: 0,
        }
    }

    fn update(&mut self, params: &mut ProbeParams, grad: &ProbeParams, lr: f64) {
        self.step += 1;
        let c1 = 1.0 - BETA1.powi(self.step);
        let c2 = 1.0 - BETA2.powi(self.step);
        let moments = self.m.tensors_mut().into_iter().zip(self.v.tensors_mut());
        for ((p, (_, g)), (m, v)) in params
            .tensors_mut()
            .into_iter()
            .zip(grad.tensors())
            .zip(moments)
        {
            for i in 0..p.len() {
                m[i] = BETA1 * m[i] + (1.0 - BETA1) * g[i];
                v[i] = BETA2 * v[i] + (1.0 - BETA2) * g[i] * g[i];
                p[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + EPS);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedProbe {
    pub params: ProbeParams,
    /// Mean cross-entropy over the whole training set after each epoch.
    pub loss_history: Vec<f64>,
}

/// Mini-batch Adam on mean cross-entropy.
///
/// Batch order is shuffled each epoch from `spec.seed`; initial parameters
/// come from the same seed. Per-sample gradients are computed in parallel and
/// summed in sample order, so results are identical for any thread count.
pub fn train_probe(
    dataset: &[(TokenMatrix, usize)],
    shape: ProbeShape,
    spec: &TrainSpec,
) -> Result<TrainedProbe> {
    if dataset.is_empty() {
        return Err(Error::domain("cannot train on an empty dataset"));
    }
    if let Some((_, y)) = dataset.iter().find(|(_, y)| *y >= shape.classes) {
        return Err(Error::domain(format!(
            "label {y} out of range for {} classes",
            shape.classes
        )));
    }
    if spec.batch == 0 {
        return Err(Error::domain("batch size must be positive"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let init_seed = rand::Rng::gen::<u64>(&mut rng);
    let mut params = ProbeParams::init(shape, init_seed);
    let mut adam = Adam::new(shape);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut loss_history = Vec::with_capacity(spec.epochs as usize);

    for _ in 0..spec.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(spec.batch as usize) {
            let grads = batch
                .par_iter()
                .map(|&i| probe_backward(&params, &dataset[i].0, dataset[i].1).map(|(_, g)| g))
                .collect::<Result<Vec<_>>>()?;
            let mut mean = ProbeParams::zeros(shape);
            let w = 1.0 / grads.len() as f64;
            for g in &grads {
                mean.axpy(w, g);
            }
            adam.update(&mut params, &mean, spec.lr);
        }
        loss_history.push(mean_loss(&params, dataset)?);
    }
    Ok(TrainedProbe {
        params,
        loss_history,
    })
}

pub fn mean_loss(params: &ProbeParams, dataset: &[(TokenMatrix, usize)]) -> Result<f64> {
    let losses = dataset
        .par_iter()
        .map(|(z, y)| {
            let out = probe_forward(params, z)?;
            Ok(-out.probs[*y].max(f64::MIN_POSITIVE).ln())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(losses.iter().sum::<f64>() / losses.len() as f64)
}

/// Fraction of samples whose argmax prediction equals the label.
pub fn accuracy(params: &ProbeParams, dataset: &[(TokenMatrix, usize)]) -> Result<f64> {
    let hits = dataset
        .par_iter()
        .map(|(z, y)| Ok(usize::from(argmax(&probe_forward(params, z)?.probs) == *y)))
        .collect::<Result<Vec<usize>>>()?;
    Ok(hits.iter().sum::<usize>() as f64 / dataset.len() as f64)
}
