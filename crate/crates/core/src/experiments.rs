//! The moons crossbar experiment: train an ERM and a BayesMulti network,
//! run one layer through a simulated crossbar and compare accuracies.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::memsim::{crossbar_accuracy, CrossbarModel};
use crate::neural::{accuracy, make_moons, train, DenseNetwork, MultinomialNoiseSpec, Split, TrainHyper, TrainMethod};
use crate::nonideality::NonIdealityProfile;

/// Settings of one crossbar demo run. Defaults follow the 2-10-2 moons setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossbarDemo {
    pub samples: usize,
    pub noise_std: f64,
    pub data_seed: u64,
    pub hidden: usize,
    pub hyper: TrainHyper,
    pub spec: MultinomialNoiseSpec,
    /// Layer computed on the crossbar; the others stay digital.
    pub layer: usize,
    /// Independent programmings averaged into the hardware accuracy.
    pub programmings: usize,
    pub program_seed: u64,
    pub rows: usize,
    pub cols: usize,
}

impl Default for CrossbarDemo {
    fn default() -> Self {
        CrossbarDemo {
            samples: 300,
            noise_std: 0.1,
            data_seed: 2024,
            hidden: 10,
            hyper: TrainHyper::default(),
            spec: MultinomialNoiseSpec { p1: 0.1, p2: 0.1 },
            layer: 0,
            programmings: 10,
            program_seed: 1000,
            rows: 10,
            cols: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodGap {
    pub method: String,
    pub software_accuracy: f64,
    pub hardware_accuracy: f64,
    /// `software_accuracy − hardware_accuracy`.
    pub gap: f64,
}

impl CrossbarDemo {
    /// Trains both networks from the same initialisation and reports their
    /// software and simulated-hardware test accuracies under `profile`.
    pub fn run(&self, profile: &NonIdealityProfile) -> Result<Vec<MethodGap>> {
        let ds = make_moons(self.samples, self.noise_std, self.data_seed)?;
        let init = DenseNetwork::random(&[2, self.hidden, 2], self.hyper.seed)?;
        let model = CrossbarModel::new(self.rows, self.cols, profile.clone())?;
        [TrainMethod::Erm, TrainMethod::bayes_multi(self.spec)]
            .into_iter()
            .map(|method| {
                let net = train(&init, &ds, method, &self.hyper)?.net.deployed();
                let software = accuracy(&net, &ds, Split::Test)?;
                let mut hardware = 0.0;
                for k in 0..self.programmings {
                    hardware +=
                        crossbar_accuracy(&net, self.layer, &model, &ds, Split::Test, self.program_seed + k as u64)?;
                }
                hardware /= self.programmings as f64;
                Ok(MethodGap {
                    method: method.name().to_string(),
                    software_accuracy: software,
                    hardware_accuracy: hardware,
                    gap: software - hardware,
                })
            })
            .collect()
    }
}
