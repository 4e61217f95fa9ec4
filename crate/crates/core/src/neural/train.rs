use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::data::{Dataset, Split};
use super::network::{apply_activation, argmax, Activation, DenseNetwork, Workspace};
use super::noise::MultinomialNoiseSpec;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::{derive_labeled, seeded};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum TrainMethod {
    Erm,
    BayesMulti { p1: f64, p2: f64 },
}

impl TrainMethod {
    pub fn bayes_multi(spec: MultinomialNoiseSpec) -> Self {
        TrainMethod::BayesMulti {
            p1: spec.p1,
            p2: spec.p2,
        }
    }

    pub fn spec(&self) -> Option<MultinomialNoiseSpec> {
        match *self {
            TrainMethod::Erm => None,
            TrainMethod::BayesMulti { p1, p2 } => Some(MultinomialNoiseSpec { p1, p2 }),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            TrainMethod::Erm => "erm",
            TrainMethod::BayesMulti { .. } => "bayesmulti",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainHyper {
    pub lr: f64,
    pub epochs: usize,
    pub batch: usize,
    pub seed: u64,
}

impl Default for TrainHyper {
    fn default() -> Self {
        TrainHyper {
            lr: 0.1,
            epochs: 500,
            batch: 16,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub net: DenseNetwork,
    pub history: Vec<TrainRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
}

/// Mean cross-entropy over `batch` and its gradient with respect to every
/// weight and bias. `masks[i]`, when present, multiplies layer `i`'s weights
/// elementwise for this pass; the gradient flows through the product with the
/// mask held constant.
pub fn loss_and_gradients(
    net: &DenseNetwork,
    ds: &Dataset,
    batch: &[usize],
    masks: &[Option<Matrix>],
) -> Result<(f64, Gradients)> {
    if batch.is_empty() {
        return Err(Error::Argument("empty batch".into()));
    }
    if net.layers.last().map(|l| l.activation) != Some(Activation::Softmax) {
        return Err(Error::Argument("training needs a softmax output layer".into()));
    }
    if masks.len() != net.layers.len() {
        return Err(Error::Argument("one mask slot per layer is required".into()));
    }
    if ds.dim() != net.input_dim() {
        return Err(Error::Argument(format!(
            "dataset has {} features, network expects {}",
            ds.dim(),
            net.input_dim()
        )));
    }

    let effective: Vec<Matrix> = net
        .layers
        .iter()
        .zip(masks)
        .map(|(l, m)| match m {
            Some(m) => l.weights.hadamard(m),
            None => l.weights.clone(),
        })
        .collect();

    let mut grad_w: Vec<Matrix> = net
        .layers
        .iter()
        .map(|l| Matrix::zeros(l.outputs(), l.inputs()))
        .collect();
    let mut grad_b: Vec<Vec<f64>> = net.layers.iter().map(|l| vec![0.0; l.outputs()]).collect();
    let mut total_loss = 0.0;
    let n_layers = net.layers.len();

    let mut acts: Vec<Vec<f64>> = Vec::with_capacity(n_layers + 1);
    for &idx in batch {
        acts.clear();
        acts.push(ds.inputs[idx].clone());
        for (layer, w) in net.layers.iter().zip(&effective) {
            let prev = acts.last().expect("input pushed");
            let mut z = w.matvec(prev)?;
            for (zi, b) in z.iter_mut().zip(&layer.bias) {
                *zi += b;
            }
            apply_activation(layer.activation, &mut z);
            acts.push(z);
        }
        let label = ds.labels[idx];
        let probs = &acts[n_layers];
        total_loss -= probs[label].ln();

        let mut delta: Vec<f64> = probs.clone();
        delta[label] -= 1.0;
        for li in (0..n_layers).rev() {
            let input = &acts[li];
            let gw = &mut grad_w[li];
            for (r, d) in delta.iter().enumerate() {
                grad_b[li][r] += d;
                for (c, a) in input.iter().enumerate() {
                    gw.data[r * gw.cols + c] += d * a;
                }
            }
            if li == 0 {
                break;
            }
            let w = &effective[li];
            let below = net.layers[li - 1].activation;
            let mut next = vec![0.0; w.cols];
            for (r, d) in delta.iter().enumerate() {
                for (c, n) in next.iter_mut().enumerate() {
                    *n += w.data[r * w.cols + c] * d;
                }
            }
            if below == Activation::Relu {
                for (n, a) in next.iter_mut().zip(&acts[li]) {
                    if *a <= 0.0 {
                        *n = 0.0;
                    }
                }
            }
            delta = next;
        }
    }

    let scale = 1.0 / batch.len() as f64;
    for (gw, mask) in grad_w.iter_mut().zip(masks) {
        match mask {
            Some(m) => gw.data.iter_mut().zip(&m.data).for_each(|(g, f)| *g *= f * scale),
            None => gw.data.iter_mut().for_each(|g| *g *= scale),
        }
    }
    grad_b.iter_mut().flatten().for_each(|g| *g *= scale);
    Ok((
        total_loss * scale,
        Gradients {
            weights: grad_w,
            biases: grad_b,
        },
    ))
}

/// Mini-batch SGD on cross-entropy. BayesMulti attaches `spec` to every
/// non-final layer and draws fresh masks for each mini-batch.
pub fn train(net: &DenseNetwork, ds: &Dataset, method: TrainMethod, hyper: &TrainHyper) -> Result<TrainedModel> {
    if !(hyper.lr > 0.0 && hyper.lr.is_finite()) || hyper.epochs == 0 || hyper.batch == 0 {
        return Err(Error::Argument(format!("invalid training hyperparameters {hyper:?}")));
    }
    let mut train_idx = ds.indices(Split::Train);
    if train_idx.is_empty() {
        return Err(Error::Argument("dataset has no training rows".into()));
    }
    if let Some(spec) = method.spec() {
        spec.validate()?;
    }
    let mut net = net.clone().with_noise(method.spec());
    net.validate()?;

    let mut shuffle_rng = seeded(derive_labeled(hyper.seed, "shuffle", 0));
    let mut mask_rng = seeded(derive_labeled(hyper.seed, "mask", 0));
    let no_masks: Vec<Option<Matrix>> = vec![None; net.layers.len()];
    let mut history = Vec::with_capacity(hyper.epochs);

    for epoch in 0..hyper.epochs {
        train_idx.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        for batch in train_idx.chunks(hyper.batch) {
            let masks = match method {
                TrainMethod::Erm => no_masks.clone(),
                TrainMethod::BayesMulti { .. } => net.sample_masks(&mut mask_rng)?,
            };
            let (loss, grads) = loss_and_gradients(&net, ds, batch, &masks)?;
            if !loss.is_finite() {
                return Err(Error::Training { epoch, loss });
            }
            epoch_loss += loss * batch.len() as f64;
            for (layer, (gw, gb)) in net.layers.iter_mut().zip(grads.weights.iter().zip(&grads.biases)) {
                layer
                    .weights
                    .data
                    .iter_mut()
                    .zip(&gw.data)
                    .for_each(|(w, g)| *w -= hyper.lr * g);
                layer.bias.iter_mut().zip(gb).for_each(|(b, g)| *b -= hyper.lr * g);
            }
        }
        let train_loss = epoch_loss / train_idx.len() as f64;
        if !train_loss.is_finite() || !net.layers.iter().all(|l| l.weights.is_finite()) {
            return Err(Error::Training {
                epoch,
                loss: train_loss,
            });
        }
        let val_accuracy = accuracy(&net.deployed(), ds, Split::Val).unwrap_or(f64::NAN);
        history.push(TrainRecord {
            epoch,
            train_loss,
            val_accuracy,
        });
    }
    Ok(TrainedModel { net, history })
}

/// Fraction of rows in `split` whose clean prediction matches the label.
pub fn accuracy(net: &DenseNetwork, ds: &Dataset, split: Split) -> Result<f64> {
    let idx = ds.indices(split);
    if idx.is_empty() {
        return Err(Error::Argument(format!("dataset has no {split:?} rows")));
    }
    if ds.dim() != net.input_dim() {
        return Err(Error::Argument("dataset and network dimensions differ".into()));
    }
    let weights = net.weights_flat();
    let mut ws = Workspace::default();
    let correct = idx
        .iter()
        .filter(|&&i| argmax(net.forward_with(&weights, &ds.inputs[i], &mut ws)) == ds.labels[i])
        .count();
    Ok(correct as f64 / idx.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoothedPrediction {
    pub mean: Vec<f64>,
    pub std_err: Vec<f64>,
    pub n_samples: usize,
}

/// Monte-Carlo estimate of `E_η[f(θ₀ ⊙ η)]` with `η` drawn i.i.d. from `spec`
/// on every weight of the network.
pub fn smoothed_predict(
    net: &DenseNetwork,
    x: &[f64],
    spec: &MultinomialNoiseSpec,
    n_samples: usize,
    seed: u64,
) -> Result<SmoothedPrediction> {
    if n_samples == 0 {
        return Err(Error::Argument("n_samples must be at least 1".into()));
    }
    spec.validate()?;
    if x.len() != net.input_dim() {
        return Err(Error::Argument(format!(
            "input has {} features, network expects {}",
            x.len(),
            net.input_dim()
        )));
    }
    let theta = net.weights_flat();
    let k = net.output_dim();
    let mut rng = seeded(seed);
    let mut ws = Workspace::default();
    let mut perturbed = theta.clone();
    let mut mean = vec![0.0; k];
    let mut m2 = vec![0.0; k];
    for i in 0..n_samples {
        for (p, t) in perturbed.iter_mut().zip(&theta) {
            *p = t * spec.draw(&mut rng);
        }
        let out = net.forward_with(&perturbed, x, &mut ws);
        let count = (i + 1) as f64;
        for c in 0..k {
            let d = out[c] - mean[c];
            mean[c] += d / count;
            m2[c] += d * (out[c] - mean[c]);
        }
    }
    let n = n_samples as f64;
    let std_err = if n_samples < 2 {
        vec![0.0; k]
    } else {
        m2.iter().map(|v| (v.max(0.0) / (n - 1.0) / n).sqrt()).collect()
    };
    Ok(SmoothedPrediction {
        mean,
        std_err,
        n_samples,
    })
}
