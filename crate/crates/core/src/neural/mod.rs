//! Dense feed-forward networks with multiplicative multinomial weight noise.

mod data;
mod network;
mod noise;
mod train;

pub use data::{make_moons, Dataset, Split};
pub use network::{apply_activation, argmax, Activation, DenseNetwork, ForwardMode, Layer, Workspace};
pub use noise::{sample_noise_mask, MultinomialNoiseSpec, NOISE_FACTORS};
pub use train::{
    accuracy, loss_and_gradients, smoothed_predict, train, Gradients, SmoothedPrediction, TrainHyper, TrainMethod,
    TrainRecord, TrainedModel,
};
