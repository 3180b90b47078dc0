//! Fully connected network with ReLU hidden layers and a softmax output,
//! trained on mean cross-entropy by gradient descent with momentum.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_width, check_xy, Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpParams {
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub epochs: usize,
    pub momentum: f64,
    /// `None` trains on the full batch every step.
    pub batch_size: Option<usize>,
}

impl Default for MlpParams {
    fn default() -> Self {
        MlpParams { hidden: vec![16], learning_rate: 1e-2, epochs: 500, momentum: 0.9, batch_size: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major `outputs x inputs`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    fn he_uniform(inputs: usize, outputs: usize, rng: &mut ChaCha8Rng) -> Self {
        let limit = (6.0 / inputs as f64).sqrt();
        Layer {
            inputs,
            outputs,
            weights: (0..inputs * outputs).map(|_| rng.gen_range(-limit..limit)).collect(),
            bias: vec![0.0; outputs],
        }
    }

    fn forward(&self, x: &[f64]) -> Vec<f64> {
        (0..self.outputs)
            .map(|o| {
                let w = &self.weights[o * self.inputs..(o + 1) * self.inputs];
                self.bias[o] + w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub params: MlpParams,
    pub seed: u64,
    pub layers: Vec<Layer>,
    /// Mean cross-entropy on the training set after the last epoch.
    pub final_loss: f64,
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

fn cross_entropy(z: &[f64], label: usize) -> f64 {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    lse - z[label]
}

impl MlpModel {
    /// Randomly initialised network of the given shape.
    pub fn new(inputs: usize, classes: usize, params: &MlpParams, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sizes = vec![inputs];
        sizes.extend(&params.hidden);
        sizes.push(classes);
        let layers = sizes.windows(2).map(|w| Layer::he_uniform(w[0], w[1], &mut rng)).collect();
        MlpModel { params: params.clone(), seed, layers, final_loss: f64::NAN }
    }

    pub fn inputs(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn classes(&self) -> usize {
        self.layers.last().map_or(0, |l| l.outputs)
    }

    /// Pre-activations of every layer for one row; the last entry is the logits.
    fn activations(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut out: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        let mut input = x.to_vec();
        for (k, layer) in self.layers.iter().enumerate() {
            let z = layer.forward(&input);
            if k + 1 < self.layers.len() {
                input = z.iter().map(|v| v.max(0.0)).collect();
            }
            out.push(z);
        }
        out
    }

    pub fn predict_proba(&self, x: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        check_width(x, self.inputs(), "MLP")?;
        Ok(x.iter()
            .map(|row| softmax(self.activations(row).last().expect("at least one layer")))
            .collect())
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// All weights and biases, layer by layer (weights first).
    pub fn parameters(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.parameter_count());
        for l in &self.layers {
            p.extend(&l.weights);
            p.extend(&l.bias);
        }
        p
    }

    pub fn set_parameters(&mut self, p: &[f64]) {
        let mut k = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&p[k..k + nw]);
            k += nw;
            let nb = l.bias.len();
            l.bias.copy_from_slice(&p[k..k + nb]);
            k += nb;
        }
    }

    /// Mean cross-entropy over the rows and its gradient with respect to
    /// [`MlpModel::parameters`], by backpropagation.
    pub fn loss_and_gradient(&self, x: &[Vec<f64>], y: &[usize]) -> (f64, Vec<f64>) {
        let n = x.len() as f64;
        let mut grads: Vec<(Vec<f64>, Vec<f64>)> = self
            .layers
            .iter()
            .map(|l| (vec![0.0; l.weights.len()], vec![0.0; l.bias.len()]))
            .collect();
        let mut loss = 0.0;
        for (row, &label) in x.iter().zip(y) {
            let z = self.activations(row);
            let logits = z.last().expect("at least one layer");
            loss += cross_entropy(logits, label);
            let mut delta = softmax(logits);
            delta[label] -= 1.0;
            for k in (0..self.layers.len()).rev() {
                let layer = &self.layers[k];
                let input: Vec<f64> = if k == 0 { row.clone() } else { z[k - 1].iter().map(|v| v.max(0.0)).collect() };
                let (gw, gb) = &mut grads[k];
                for o in 0..layer.outputs {
                    gb[o] += delta[o];
                    for i in 0..layer.inputs {
                        gw[o * layer.inputs + i] += delta[o] * input[i];
                    }
                }
                if k > 0 {
                    let prev = &z[k - 1];
                    delta = (0..layer.inputs)
                        .map(|i| {
                            if prev[i] <= 0.0 {
                                return 0.0;
                            }
                            (0..layer.outputs).map(|o| layer.weights[o * layer.inputs + i] * delta[o]).sum()
                        })
                        .collect();
                }
            }
        }
        let mut flat = Vec::with_capacity(self.parameter_count());
        for (gw, gb) in grads {
            flat.extend(gw.into_iter().map(|g| g / n));
            flat.extend(gb.into_iter().map(|g| g / n));
        }
        (loss / n, flat)
    }
}

/// Train a classifier on rows `x` with labels `y` in `0..n_classes`.
pub fn train_mlp(x: &[Vec<f64>], y: &[usize], n_classes: usize, params: &MlpParams, seed: u64) -> Result<MlpModel> {
    let nf = check_xy(x, y, n_classes)?;
    if params.learning_rate.is_nan() || params.learning_rate <= 0.0 || params.hidden.contains(&0) || !(0.0..1.0).contains(&params.momentum) {
        return Err(Error::InvalidArgument(
            "MLP needs a positive learning rate, non-empty hidden layers and momentum in [0, 1)".into(),
        ));
    }
    let mut model = MlpModel::new(nf, n_classes, params, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let batch = params.batch_size.unwrap_or(x.len()).clamp(1, x.len());
    let mut theta = model.parameters();
    let mut velocity = vec![0.0; theta.len()];
    let mut order: Vec<usize> = (0..x.len()).collect();
    for epoch in 0..params.epochs {
        if batch < x.len() {
            order.shuffle(&mut rng);
        }
        for chunk in order.chunks(batch) {
            let bx: Vec<Vec<f64>> = chunk.iter().map(|&i| x[i].clone()).collect();
            let by: Vec<usize> = chunk.iter().map(|&i| y[i]).collect();
            let (loss, grad) = model.loss_and_gradient(&bx, &by);
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch });
            }
            for ((t, v), g) in theta.iter_mut().zip(&mut velocity).zip(&grad) {
                *v = params.momentum * *v - params.learning_rate * g;
                *t += *v;
            }
            if theta.iter().any(|t| !t.is_finite()) {
                return Err(Error::Diverged { epoch });
            }
            model.set_parameters(&theta);
        }
    }
    let (loss, _) = model.loss_and_gradient(x, y);
    if !loss.is_finite() {
        return Err(Error::Diverged { epoch: params.epochs });
    }
    model.final_loss = loss;
    Ok(model)
}
