use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::noise::{sample_noise_mask, MultinomialNoiseSpec};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::{seeded, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Identity,
    Softmax,
}

/// Affine map `activation(W·x + b)` with `W` stored `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn inputs(&self) -> usize {
        self.weights.cols
    }

    pub fn outputs(&self) -> usize {
        self.weights.rows
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForwardMode {
    Clean,
    /// Fresh masks on every noise site, drawn from the seeded stream.
    Noisy {
        seed: u64,
    },
}

/// Scratch buffers for allocation-free repeated forward passes.
#[derive(Debug, Default, Clone)]
pub struct Workspace {
    a: Vec<f64>,
    b: Vec<f64>,
}

/// Layered fully connected network with optional multinomial noise sites.
///
/// `noise_sites[i]` attaches a noise spec to layer `i`'s weight matrix. The
/// final layer never carries a site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelFile", into = "ModelFile")]
pub struct DenseNetwork {
    pub layers: Vec<Layer>,
    pub noise_sites: Vec<Option<MultinomialNoiseSpec>>,
}

impl DenseNetwork {
    pub fn new(layers: Vec<Layer>, noise_sites: Vec<Option<MultinomialNoiseSpec>>) -> Result<Self> {
        let net = DenseNetwork { layers, noise_sites };
        net.validate()?;
        Ok(net)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::Argument("network has no layers".into()));
        }
        if self.noise_sites.len() != self.layers.len() {
            return Err(Error::Argument(format!(
                "{} noise-site entries for {} layers",
                self.noise_sites.len(),
                self.layers.len()
            )));
        }
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            if layer.bias.len() != layer.outputs() {
                return Err(Error::Argument(format!(
                    "layer {i}: bias length {} for {} outputs",
                    layer.bias.len(),
                    layer.outputs()
                )));
            }
            if i > 0 && layer.inputs() != self.layers[i - 1].outputs() {
                return Err(Error::Argument(format!(
                    "layer {i} expects {} inputs but layer {} produces {}",
                    layer.inputs(),
                    i - 1,
                    self.layers[i - 1].outputs()
                )));
            }
            if layer.activation == Activation::Softmax && i != last {
                return Err(Error::Argument(format!("softmax on non-final layer {i}")));
            }
            if !layer.weights.is_finite() || layer.bias.iter().any(|b| !b.is_finite()) {
                return Err(Error::Domain(format!("layer {i} has non-finite parameters")));
            }
        }
        if self.noise_sites[last].is_some() {
            return Err(Error::Argument("the final layer cannot carry a noise site".into()));
        }
        for spec in self.noise_sites.iter().flatten() {
            spec.validate()?;
        }
        Ok(())
    }

    /// He-initialised network with ReLU hidden layers and a softmax output.
    /// `dims` lists layer widths from input to output.
    pub fn random(dims: &[usize], seed: u64) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::Argument(format!("invalid layer widths {dims:?}")));
        }
        let mut rng = seeded(seed);
        let n_layers = dims.len() - 1;
        let layers = (0..n_layers)
            .map(|i| {
                let (fan_in, fan_out) = (dims[i], dims[i + 1]);
                let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive std");
                let data = (0..fan_in * fan_out).map(|_| normal.sample(&mut rng)).collect();
                Layer {
                    weights: Matrix {
                        rows: fan_out,
                        cols: fan_in,
                        data,
                    },
                    bias: vec![0.0; fan_out],
                    activation: if i + 1 == n_layers {
                        Activation::Softmax
                    } else {
                        Activation::Relu
                    },
                }
            })
            .collect();
        DenseNetwork::new(layers, vec![None; n_layers])
    }

    /// Attaches `spec` to every layer except the final one.
    pub fn with_noise(mut self, spec: Option<MultinomialNoiseSpec>) -> Self {
        let last = self.layers.len() - 1;
        for (i, site) in self.noise_sites.iter_mut().enumerate() {
            *site = if i == last { None } else { spec };
        }
        self
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs()
    }

    /// Total number of weights (biases excluded).
    pub fn theta_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len()).sum()
    }

    pub fn weights_flat(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.data.iter().copied())
            .collect()
    }

    pub fn set_weights_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.theta_count() {
            return Err(Error::Argument(format!(
                "{} weights for a network with {}",
                flat.len(),
                self.theta_count()
            )));
        }
        let mut offset = 0;
        for layer in &mut self.layers {
            let n = layer.weights.len();
            layer.weights.data.copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::Argument(format!(
                "input has {} features, network expects {}",
                x.len(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut ws = Workspace::default();
        Ok(self.forward_with(&self.weights_flat(), x, &mut ws).to_vec())
    }

    pub fn forward_mode(&self, x: &[f64], mode: ForwardMode) -> Result<Vec<f64>> {
        match mode {
            ForwardMode::Clean => self.forward(x),
            ForwardMode::Noisy { seed } => {
                let masks = self.sample_masks(&mut seeded(seed))?;
                self.forward_masked(x, &masks)
            }
        }
    }

    /// One mask per noise site (None elsewhere).
    pub fn sample_masks(&self, rng: &mut Rng) -> Result<Vec<Option<Matrix>>> {
        self.layers
            .iter()
            .zip(&self.noise_sites)
            .map(|(layer, site)| match site {
                Some(spec) => sample_noise_mask(spec, layer.outputs(), layer.inputs(), rng).map(Some),
                None => Ok(None),
            })
            .collect()
    }

    /// Forward pass with explicit per-layer weight masks. Any layer may be
    /// masked here, including the final one.
    pub fn forward_masked(&self, x: &[f64], masks: &[Option<Matrix>]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        if masks.len() != self.layers.len() {
            return Err(Error::Argument(format!(
                "{} masks for {} layers",
                masks.len(),
                self.layers.len()
            )));
        }
        let mut flat = Vec::with_capacity(self.theta_count());
        for (layer, mask) in self.layers.iter().zip(masks) {
            match mask {
                Some(m) => {
                    if (m.rows, m.cols) != (layer.outputs(), layer.inputs()) {
                        return Err(Error::Argument("mask shape does not match layer".into()));
                    }
                    flat.extend(layer.weights.data.iter().zip(&m.data).map(|(w, f)| w * f));
                }
                None => flat.extend_from_slice(&layer.weights.data),
            }
        }
        let mut ws = Workspace::default();
        Ok(self.forward_with(&flat, x, &mut ws).to_vec())
    }

    /// Forward pass using `weights` (flattened in layer order) in place of the
    /// stored weights. Biases and activations come from `self`. Inputs are
    /// not checked; the caller guarantees matching lengths.
    pub fn forward_with<'w>(&self, weights: &[f64], x: &[f64], ws: &'w mut Workspace) -> &'w [f64] {
        ws.a.clear();
        ws.a.extend_from_slice(x);
        let mut offset = 0;
        for layer in &self.layers {
            let (rows, cols) = (layer.weights.rows, layer.weights.cols);
            let w = &weights[offset..offset + rows * cols];
            offset += rows * cols;
            ws.b.clear();
            for r in 0..rows {
                let row = &w[r * cols..(r + 1) * cols];
                let mut z = layer.bias[r];
                for (wi, xi) in row.iter().zip(&ws.a) {
                    z += wi * xi;
                }
                ws.b.push(z);
            }
            apply_activation(layer.activation, &mut ws.b);
            std::mem::swap(&mut ws.a, &mut ws.b);
        }
        &ws.a
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.forward(x)?))
    }

    /// Inference network: every noise-site weight matrix is scaled by its
    /// mask mean `E[η]` and the sites are removed.
    pub fn deployed(&self) -> DenseNetwork {
        let mut net = self.clone();
        for (layer, site) in net.layers.iter_mut().zip(net.noise_sites.iter_mut()) {
            if let Some(spec) = site.take() {
                let f = spec.mean_factor();
                layer.weights.data.iter_mut().for_each(|w| *w *= f);
            }
        }
        net
    }

    pub fn weight_matrices(&self) -> Vec<Matrix> {
        self.layers.iter().map(|l| l.weights.clone()).collect()
    }

    pub fn with_weight_matrices(&self, weights: Vec<Matrix>) -> Result<DenseNetwork> {
        if weights.len() != self.layers.len() {
            return Err(Error::Argument("weight matrix count differs from layer count".into()));
        }
        let mut net = self.clone();
        for (layer, w) in net.layers.iter_mut().zip(weights) {
            if (w.rows, w.cols) != (layer.weights.rows, layer.weights.cols) {
                return Err(Error::Argument("weight matrix shape mismatch".into()));
            }
            layer.weights = w;
        }
        Ok(net)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

pub fn apply_activation(act: Activation, z: &mut [f64]) {
    match act {
        Activation::Identity => {}
        Activation::Relu => z.iter_mut().for_each(|v| *v = v.max(0.0)),
        Activation::Softmax => softmax_in_place(z),
    }
}

pub(crate) fn softmax_in_place(z: &mut [f64]) {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - m).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
}

/// Index of the largest entry; ties resolve to the smallest index.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i] > v[best] {
            best = i;
        }
    }
    best
}

#[derive(Serialize, Deserialize)]
struct LayerFile {
    inputs: usize,
    outputs: usize,
    activation: Activation,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

/// On-disk model layout, version 1.
#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: u32,
    layers: Vec<LayerFile>,
    noise_sites: Vec<Option<MultinomialNoiseSpec>>,
}

impl TryFrom<ModelFile> for DenseNetwork {
    type Error = Error;

    fn try_from(file: ModelFile) -> Result<Self> {
        if file.format != 1 {
            return Err(Error::Format(format!("unsupported model format {}", file.format)));
        }
        let layers = file
            .layers
            .into_iter()
            .map(|l| {
                Ok(Layer {
                    weights: Matrix::from_vec(l.outputs, l.inputs, l.weights)?,
                    bias: l.bias,
                    activation: l.activation,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        DenseNetwork::new(layers, file.noise_sites)
    }
}

impl From<DenseNetwork> for ModelFile {
    fn from(net: DenseNetwork) -> Self {
        ModelFile {
            format: 1,
            layers: net
                .layers
                .into_iter()
                .map(|l| LayerFile {
                    inputs: l.weights.cols,
                    outputs: l.weights.rows,
                    activation: l.activation,
                    weights: l.weights.data,
                    bias: l.bias,
                })
                .collect(),
            noise_sites: net.noise_sites,
        }
    }
}
