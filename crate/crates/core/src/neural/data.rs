use std::path::Path;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_labeled, seeded};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

/// Labelled samples with a train/val/test assignment per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub inputs: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub splits: Vec<Split>,
    pub n_classes: usize,
}

impl Dataset {
    pub fn new(inputs: Vec<Vec<f64>>, labels: Vec<usize>, splits: Vec<Split>, n_classes: usize) -> Result<Self> {
        let ds = Dataset {
            inputs,
            labels,
            splits,
            n_classes,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.inputs.len();
        if self.labels.len() != n || self.splits.len() != n {
            return Err(Error::Argument("inputs, labels and splits differ in length".into()));
        }
        if let Some(&bad) = self.labels.iter().find(|&&l| l >= self.n_classes) {
            return Err(Error::Argument(format!("label {bad} outside [0, {})", self.n_classes)));
        }
        let d = self.dim();
        if self.inputs.iter().any(|x| x.len() != d) {
            return Err(Error::Argument("ragged input rows".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.inputs.first().map_or(0, Vec::len)
    }

    pub fn indices(&self, split: Split) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.splits[i] == split).collect()
    }

    /// Assigns a seeded 70/15/15 train/val/test split.
    pub fn assign_splits(&mut self, seed: u64) {
        let n = self.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut seeded(derive_labeled(seed, "split", 0)));
        let n_train = (n * 70).div_ceil(100);
        let n_val = (n - n_train) / 2;
        for (rank, &i) in order.iter().enumerate() {
            self.splits[i] = if rank < n_train {
                Split::Train
            } else if rank < n_train + n_val {
                Split::Val
            } else {
                Split::Test
            };
        }
    }

    /// Loads `label,f0,f1,...` CSV (with a header row) and assigns a seeded split.
    pub fn from_csv(path: impl AsRef<Path>, seed: u64) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path.as_ref())
            .map_err(|e| Error::Format(e.to_string()))?;
        let mut inputs = Vec::new();
        let mut labels = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| Error::Format(e.to_string()))?;
            let row = rec.position().map_or(0, |p| p.line());
            let label: usize = rec.get(0).and_then(|s| s.parse().ok()).ok_or_else(|| Error::Parse {
                row,
                message: "label must be a non-negative integer".into(),
            })?;
            let feats = rec
                .iter()
                .skip(1)
                .map(|s| {
                    s.parse::<f64>().map_err(|_| Error::Parse {
                        row,
                        message: format!("non-numeric feature `{s}`"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            labels.push(label);
            inputs.push(feats);
        }
        if inputs.is_empty() {
            return Err(Error::EmptyInput("dataset file has no rows".into()));
        }
        let n_classes = labels.iter().max().map_or(0, |m| m + 1);
        let n = inputs.len();
        let mut ds = Dataset::new(inputs, labels, vec![Split::Train; n], n_classes)?;
        ds.assign_splits(seed);
        Ok(ds)
    }
}

/// Two interleaved unit half-circles: class 0 on the upper arc centred at the
/// origin, class 1 on the lower arc centred at `(1, 0.5)`, each jittered by
/// isotropic Gaussian noise.
pub fn make_moons(n: usize, noise_std: f64, seed: u64) -> Result<Dataset> {
    if n < 4 {
        return Err(Error::Argument(format!("make_moons needs n ≥ 4, got {n}")));
    }
    if !(noise_std >= 0.0 && noise_std.is_finite()) {
        return Err(Error::Argument(format!("noise_std must be ≥ 0, got {noise_std}")));
    }
    let n_upper = n / 2;
    let n_lower = n - n_upper;
    let arc = |count: usize, i: usize| {
        if count == 1 {
            0.0
        } else {
            std::f64::consts::PI * i as f64 / (count - 1) as f64
        }
    };

    let mut inputs = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n_upper {
        let t = arc(n_upper, i);
        inputs.push(vec![t.cos(), t.sin()]);
        labels.push(0);
    }
    for i in 0..n_lower {
        let t = arc(n_lower, i);
        inputs.push(vec![1.0 - t.cos(), 0.5 - t.sin()]);
        labels.push(1);
    }
    if noise_std > 0.0 {
        let normal = Normal::new(0.0, noise_std).expect("valid std");
        let mut rng = seeded(derive_labeled(seed, "moons", 0));
        for x in &mut inputs {
            for v in x.iter_mut() {
                *v += normal.sample(&mut rng);
            }
        }
    }
    let mut ds = Dataset::new(inputs, labels, vec![Split::Train; n], 2)?;
    ds.assign_splits(seed);
    Ok(ds)
}
