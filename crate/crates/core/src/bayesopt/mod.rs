//! Gaussian-process Bayesian optimization over finite grids.
//!
//! [`CampaignState`] drives the human-in-the-loop fabrication campaign
//! (suggest a configuration, fabricate and measure it, tell the result).
//! [`optimize_alpha`] uses the same surrogate to pick the multinomial noise
//! parameters for BayesMulti training.

mod alpha;
mod campaign;
mod gp;
mod optim;
mod space;

pub use alpha::{
    default_alpha_grid, default_alpha_profiles, maximize_over_grid, optimize_alpha, score_alpha, AlphaEvaluation,
    AlphaSearch, AlphaSearchResult, DEFAULT_ALPHA_TRIALS, DEFAULT_ALPHA_USABILITIES,
};
pub use campaign::{CampaignState, Observation, Suggestion, MLE_MIN_OBSERVATIONS};
pub use gp::{
    ei_argmax, expected_improvement, fit_hyper_mle, log_marginal_likelihood, normal_cdf, normal_pdf, se_kernel,
    GpHyper, GpState, HyperMode, LENGTH_BOUNDS, MAX_JITTER, MLE_STARTS, NOISE_BOUNDS, SIGNAL_BOUNDS,
};
pub use optim::nelder_mead;
pub use space::{format_config, Configuration, Dimension, DimensionKind, RawValue, SearchSpace};
