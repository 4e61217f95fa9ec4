//! Device-level simulation: weight drift under a non-ideality profile and
//! differential-pair crossbar matrix-vector products.

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ivdata::{ConductanceSet, IvSample, IvTrace};
use crate::matrix::Matrix;
use crate::neural::{argmax, Dataset, DenseNetwork, Split, Workspace};
use crate::nonideality::{chi_square_quantile, NonIdealityProfile, SigmaVariant, DEFAULT_REQUIRED_LEN};
use crate::rng::{derive_seed, seeded, Rng};

fn lognormal(sigma: f64) -> Result<Option<Normal<f64>>> {
    if sigma == 0.0 {
        return Ok(None);
    }
    Normal::new(0.0, sigma)
        .map(Some)
        .map_err(|e| Error::Argument(format!("invalid σ {sigma}: {e}")))
}

#[inline]
fn level_index(level: f64, required_len: usize) -> usize {
    ((level * (required_len - 1) as f64).floor() as usize).min(required_len - 1)
}

/// Maps each weight matrix through the device model: the weight's relative
/// magnitude selects a ratio-table entry, and an i.i.d. log-normal factor
/// `exp(λ)`, `λ ~ N(0, σ²)`, is applied on top.
pub fn map_weights(params: &[Matrix], profile: &NonIdealityProfile, seed: u64) -> Result<Vec<Matrix>> {
    profile.validate()?;
    if let Some(i) = params.iter().position(|m| !m.is_finite()) {
        return Err(Error::Domain(format!("weight matrix {i} has non-finite entries")));
    }
    let normal = lognormal(profile.sigma())?;
    let mut rng = seeded(seed);
    let len = profile.required_len;
    Ok(params
        .iter()
        .map(|m| {
            let max = m.max_abs();
            let mut out = m.clone();
            if max == 0.0 {
                return out;
            }
            for w in out.data.iter_mut() {
                let ratio = profile.ratio_table[level_index(w.abs() / max, len)];
                let drift = match &normal {
                    Some(n) => n.sample(&mut rng).exp(),
                    None => 1.0,
                };
                *w *= ratio * drift;
            }
            out
        })
        .collect())
}

/// [`map_weights`] applied to every layer of `net`. Biases are left digital.
pub fn map_network(net: &DenseNetwork, profile: &NonIdealityProfile, seed: u64) -> Result<DenseNetwork> {
    let mapped = map_weights(&net.weight_matrices(), profile, seed)?;
    net.with_weight_matrices(mapped)
}

/// Test accuracy of each trial; trial `t` maps the deployed network with
/// sub-seed `derive_seed(seed, t)`.
pub fn trial_accuracies(
    net: &DenseNetwork,
    profile: &NonIdealityProfile,
    ds: &Dataset,
    trials: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if trials == 0 {
        return Err(Error::Argument("trials must be at least 1".into()));
    }
    let test = ds.indices(Split::Test);
    if test.is_empty() {
        return Err(Error::Argument("dataset has no test rows".into()));
    }
    if ds.dim() != net.input_dim() {
        return Err(Error::Argument("dataset and network dimensions differ".into()));
    }
    let base = net.deployed();
    let mut ws = Workspace::default();
    (0..trials)
        .map(|t| {
            let mapped = map_network(&base, profile, derive_seed(seed, t as u64))?;
            let w = mapped.weights_flat();
            let correct = test
                .iter()
                .filter(|&&i| argmax(mapped.forward_with(&w, &ds.inputs[i], &mut ws)) == ds.labels[i])
                .count();
            Ok(correct as f64 / test.len() as f64)
        })
        .collect()
}

/// Sample mean and sample standard deviation (`n − 1` denominator, zero for
/// a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Mean and standard deviation of test accuracy over `trials` independent
/// weight mappings.
pub fn evaluate_under_profile(
    net: &DenseNetwork,
    profile: &NonIdealityProfile,
    ds: &Dataset,
    trials: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    Ok(mean_std(&trial_accuracies(net, profile, ds, trials, seed)?))
}

/// Smallest `L ≥ 35` for which `fraction · L` is an integer, if one exists
/// below 3500.
fn required_len_for(fraction: f64) -> Option<usize> {
    (DEFAULT_REQUIRED_LEN..=100 * DEFAULT_REQUIRED_LEN).find(|&len| {
        let x = fraction * len as f64;
        (x - x.round()).abs() <= 1e-9 * x.max(1.0)
    })
}

/// A synthetic profile with the requested usability.
///
/// The LCIS covers the first `l` of `L` levels with `l / L` equal to
/// `mono_fraction` whenever a suitable `L` up to 3500 exists (otherwise
/// `L = 35` and `l = ⌈35·mono_fraction⌉`). The remaining ratio-table entries
/// fall linearly towards 0.5 and `σ = ln((l / L) / usability)`.
pub fn synthesize_profile(usability: f64, mono_fraction: f64) -> Result<NonIdealityProfile> {
    if !(usability > 0.0 && usability <= 1.0) {
        return Err(Error::Argument(format!(
            "usability must lie in (0, 1], got {usability}"
        )));
    }
    if !(mono_fraction > 0.0 && mono_fraction <= 1.0) {
        return Err(Error::Argument(format!(
            "mono_fraction must lie in (0, 1], got {mono_fraction}"
        )));
    }
    if mono_fraction < usability {
        return Err(Error::Domain(format!(
            "mono_fraction {mono_fraction} below usability {usability} would need σ < 0"
        )));
    }
    let (required_len, lcis_len) = match required_len_for(mono_fraction) {
        Some(len) => (len, (mono_fraction * len as f64).round() as usize),
        None => {
            let len = DEFAULT_REQUIRED_LEN;
            (len, ((mono_fraction * len as f64).ceil() as usize).clamp(1, len))
        }
    };
    let mono = lcis_len as f64 / required_len as f64;
    let sigma = (mono / usability).ln().max(0.0);
    let tail = (required_len - lcis_len) as f64;
    let ratio_table = (0..required_len)
        .map(|i| {
            if i < lcis_len {
                1.0
            } else {
                1.0 - 0.5 * (i + 1 - lcis_len) as f64 / tail
            }
        })
        .collect();
    let profile = NonIdealityProfile {
        lcis_start: 0,
        lcis_end: lcis_len,
        lcis_len,
        required_len,
        window_start: 0,
        window_end: required_len,
        ratio_table,
        sigma_mle: sigma,
        sigma_95: sigma,
        sigma_variant: SigmaVariant::Upper95,
        usability: mono * (-sigma).exp(),
        c_min: 1e-6,
        c_max: 1e-4,
    };
    profile.validate()?;
    Ok(profile)
}

/// Two-cycle conductance data whose extracted profile (with no smoothing)
/// reproduces `profile`. Only profiles whose LCIS starts at 0 and whose
/// remaining ratios strictly decrease below 1 are realizable.
pub fn realize_profile(profile: &NonIdealityProfile) -> Result<ConductanceSet> {
    profile.validate()?;
    let (l, len) = (profile.lcis_len, profile.required_len);
    let table = &profile.ratio_table;
    let shape_ok = profile.lcis_start == 0
        && l <= len
        && table[..l].iter().all(|&r| r == 1.0)
        && table[l..].iter().all(|&r| r < 1.0 && r > 0.0)
        && table[l..].windows(2).all(|w| w[1] < w[0]);
    if !shape_ok || !(profile.c_max > profile.c_min && profile.c_min > 0.0) {
        return Err(Error::Argument(
            "profile shape cannot be realized as a conductance curve".into(),
        ));
    }
    let (c_min, span) = (profile.c_min, profile.c_max - profile.c_min);

    let mut curve = Vec::with_capacity(len + 1);
    for i in 0..l {
        let frac = if l == 1 {
            1.0
        } else {
            0.1 + 0.9 * i as f64 / (l - 1) as f64
        };
        curve.push(if i + 1 == l { profile.c_max } else { c_min + frac * span });
    }
    curve.extend(table[l..].iter().map(|r| c_min + r * span));
    curve.push(c_min);

    let n = 2 * len;
    let target = match profile.sigma_variant {
        SigmaVariant::Mle => profile.sigma_mle,
        SigmaVariant::Upper95 => profile.sigma_95 * (chi_square_quantile(0.025, n - 1)? / (n - 1) as f64).sqrt(),
        SigmaVariant::Literal975 => profile.sigma_95 * (chi_square_quantile(0.975, n - 1)? / (n - 1) as f64).sqrt(),
    };
    let a = spread_for_sigma(target);
    let up = a.exp();
    let down = 2.0 - up;
    let rows = vec![
        curve.iter().map(|c| c * up).collect(),
        curve.iter().map(|c| c * down).collect(),
    ];
    ConductanceSet::from_rows(rows)
}

/// Solves `(a² + ln²(2 − eᵃ)) / 2 = σ²` for `a ∈ [0, ln 2)`, so that the
/// pair `(eᵃ, 2 − eᵃ)` has mean 1 and log-RMS σ.
fn spread_for_sigma(sigma: f64) -> f64 {
    if sigma <= 0.0 {
        return 0.0;
    }
    let f = |a: f64| {
        let b = (2.0 - a.exp()).ln();
        ((a * a + b * b) / 2.0).sqrt() - sigma
    };
    let (mut lo, mut hi) = (0.0_f64, std::f64::consts::LN_2);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// An I-V sweep file realizing `profile`: each cycle runs 0 → +6 V over the
/// conductance curve, back to 0 V and through −3 V.
pub fn realize_trace(profile: &NonIdealityProfile, device_id: &str) -> Result<IvTrace> {
    let cond = realize_profile(profile)?;
    let n = cond.n_points();
    let cycles = cond
        .per_cycle
        .iter()
        .map(|row| {
            let mut samples = vec![IvSample {
                voltage: 0.0,
                current: 0.0,
            }];
            for (j, g) in row.iter().enumerate() {
                let v = 6.0 * (j + 1) as f64 / n as f64;
                samples.push(IvSample {
                    voltage: v,
                    current: g * v,
                });
            }
            let g_low = row[row.len() - 1];
            for v in [3.0, 0.0, -3.0, 0.0] {
                samples.push(IvSample {
                    voltage: v,
                    current: g_low * v,
                });
            }
            samples
        })
        .collect();
    IvTrace::new(device_id, vec![1, 2], cycles)
}

/// Crossbar geometry and device model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossbarModel {
    pub rows: usize,
    pub cols: usize,
    pub g_min: f64,
    pub g_max: f64,
    pub profile: NonIdealityProfile,
}

/// Conductances written into the array for one weight matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ProgrammedArray {
    pub g_plus: Matrix,
    pub g_minus: Matrix,
    /// Weight units per siemens of differential conductance, including the
    /// log-normal mean correction.
    pub scale: f64,
}

impl ProgrammedArray {
    /// Column currents `(G⁺ − G⁻)·x`, converted back to weight units.
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.g_plus.cols {
            return Err(Error::Argument(format!(
                "input length {} does not match {} programmed columns",
                x.len(),
                self.g_plus.cols
            )));
        }
        Ok((0..self.g_plus.rows)
            .map(|r| {
                let plus = self.g_plus.row(r);
                let minus = self.g_minus.row(r);
                let mut acc = 0.0;
                for ((p, m), xi) in plus.iter().zip(minus).zip(x) {
                    acc += (p - m) * xi;
                }
                acc * self.scale
            })
            .collect())
    }
}

impl CrossbarModel {
    pub fn new(rows: usize, cols: usize, profile: NonIdealityProfile) -> Result<Self> {
        let model = CrossbarModel {
            rows,
            cols,
            g_min: profile.c_min,
            g_max: profile.c_max,
            profile,
        };
        model.validate()?;
        Ok(model)
    }

    /// The default 10×10 array.
    pub fn square10(profile: NonIdealityProfile) -> Result<Self> {
        Self::new(10, 10, profile)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::Argument("crossbar needs at least one row and column".into()));
        }
        if !(self.g_max > self.g_min && self.g_min > 0.0 && self.g_max.is_finite()) {
            return Err(Error::Argument(format!(
                "conductance range [{}, {}] is invalid",
                self.g_min, self.g_max
            )));
        }
        self.profile.validate()
    }

    /// Whether a `out × inputs` weight matrix fits with two devices per weight.
    pub fn fits(&self, out: usize, inputs: usize) -> bool {
        out <= self.rows && 2 * inputs <= self.cols
    }

    /// Encodes `w` as differential conductance pairs around the midpoint of
    /// the range and perturbs every device once.
    pub fn program(&self, w: &Matrix, seed: u64) -> Result<ProgrammedArray> {
        if !self.fits(w.rows, w.cols) {
            return Err(Error::Argument(format!(
                "{}×{} weights need {}×{} devices, crossbar is {}×{}",
                w.rows,
                w.cols,
                w.rows,
                2 * w.cols,
                self.rows,
                self.cols
            )));
        }
        if !w.is_finite() {
            return Err(Error::Domain("weight matrix has non-finite entries".into()));
        }
        let sigma = self.profile.sigma();
        let normal = lognormal(sigma)?;
        let mut rng = seeded(seed);
        let mid = 0.5 * (self.g_min + self.g_max);
        let half = 0.5 * (self.g_max - self.g_min);
        let w_max = w.max_abs();
        let unit = if w_max > 0.0 { half / w_max } else { 0.0 };

        let mut g_plus = Matrix::zeros(w.rows, w.cols);
        let mut g_minus = Matrix::zeros(w.rows, w.cols);
        for (i, &wi) in w.data.iter().enumerate() {
            g_plus.data[i] = self.perturb(mid + unit * wi, &normal, &mut rng);
            g_minus.data[i] = self.perturb(mid - unit * wi, &normal, &mut rng);
        }
        let scale = if unit > 0.0 {
            (-0.5 * sigma * sigma).exp() / (2.0 * unit)
        } else {
            0.0
        };
        Ok(ProgrammedArray { g_plus, g_minus, scale })
    }

    fn perturb(&self, g: f64, normal: &Option<Normal<f64>>, rng: &mut Rng) -> f64 {
        let level = ((g - self.g_min) / (self.g_max - self.g_min)).clamp(0.0, 1.0);
        let ratio = self.profile.ratio_table[level_index(level, self.profile.required_len)];
        let drift = match normal {
            Some(n) => n.sample(rng).exp(),
            None => 1.0,
        };
        g * ratio * drift
    }
}

/// One programming of `w` followed by a read with input `x`.
pub fn crossbar_matvec(model: &CrossbarModel, w: &Matrix, x: &[f64], seed: u64) -> Result<Vec<f64>> {
    model.program(w, seed)?.matvec(x)
}

/// Accuracy of the deployed `net` on `split` when layer `layer` is computed
/// by a crossbar programmed once with `seed`; the other layers stay digital.
pub fn crossbar_accuracy(
    net: &DenseNetwork,
    layer: usize,
    model: &CrossbarModel,
    ds: &Dataset,
    split: Split,
    seed: u64,
) -> Result<f64> {
    let net = net.deployed();
    if layer >= net.layers.len() {
        return Err(Error::Argument(format!(
            "layer {layer} out of range for a {}-layer network",
            net.layers.len()
        )));
    }
    let idx = ds.indices(split);
    if idx.is_empty() {
        return Err(Error::Argument(format!("dataset has no {split:?} rows")));
    }
    let array = model.program(&net.layers[layer].weights, seed)?;
    let mut correct = 0;
    for &i in &idx {
        let mut a = ds.inputs[i].clone();
        for (li, l) in net.layers.iter().enumerate() {
            let mut z = if li == layer {
                array.matvec(&a)?
            } else {
                l.weights.matvec(&a)?
            };
            for (zi, b) in z.iter_mut().zip(&l.bias) {
                *zi += b;
            }
            crate::neural::apply_activation(l.activation, &mut z);
            a = z;
        }
        if argmax(&a) == ds.labels[i] {
            correct += 1;
        }
    }
    Ok(correct as f64 / idx.len() as f64)
}
