use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::campaign::MLE_MIN_OBSERVATIONS;
use super::gp::{ei_argmax, GpHyper, GpState, HyperMode};
use crate::error::{Error, Result};
use crate::memsim::{evaluate_under_profile, synthesize_profile};
use crate::neural::{train, Dataset, DenseNetwork, MultinomialNoiseSpec, TrainHyper, TrainMethod};
use crate::nonideality::NonIdealityProfile;
use crate::rng::{derive_labeled, seeded};

/// Usability levels of the default profile set used to score α.
pub const DEFAULT_ALPHA_USABILITIES: [f64; 4] = [1.0, 0.7, 0.5, 0.3];
pub const DEFAULT_ALPHA_TRIALS: usize = 5;

pub fn default_alpha_profiles() -> Vec<NonIdealityProfile> {
    DEFAULT_ALPHA_USABILITIES
        .iter()
        .map(|&u| synthesize_profile(u, 1.0).expect("valid usability"))
        .collect()
}

/// `(p1, p2)` over `{0, 0.1, …, 0.5}²`.
pub fn default_alpha_grid() -> Vec<(f64, f64)> {
    let steps: Vec<f64> = (0..6).map(|i| i as f64 / 10.0).collect();
    steps
        .iter()
        .flat_map(|&p1| steps.iter().map(move |&p2| (p1, p2)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaEvaluation {
    pub p1: f64,
    pub p2: f64,
    pub score: f64,
    pub per_profile: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaSearchResult {
    pub best: MultinomialNoiseSpec,
    pub best_score: f64,
    /// Evaluations in the order they were made.
    pub trace: Vec<AlphaEvaluation>,
}

#[derive(Debug, Clone)]
pub struct AlphaSearch<'a> {
    pub template: &'a DenseNetwork,
    pub dataset: &'a Dataset,
    pub grid: Vec<(f64, f64)>,
    pub budget: usize,
    pub profiles: Vec<NonIdealityProfile>,
    pub trials: usize,
    pub hyper: TrainHyper,
    pub seed: u64,
}

/// Trains with BayesMulti at `(p1, p2)` and averages the mean test accuracy
/// over `profiles`.
pub fn score_alpha(
    template: &DenseNetwork,
    ds: &Dataset,
    spec: MultinomialNoiseSpec,
    profiles: &[NonIdealityProfile],
    trials: usize,
    hyper: &TrainHyper,
    seed: u64,
) -> Result<AlphaEvaluation> {
    if profiles.is_empty() {
        return Err(Error::Argument("at least one profile is needed to score α".into()));
    }
    let trained = train(template, ds, TrainMethod::bayes_multi(spec), hyper)?;
    let per_profile = profiles
        .iter()
        .enumerate()
        .map(|(i, p)| {
            evaluate_under_profile(
                &trained.net,
                p,
                ds,
                trials,
                derive_labeled(seed, "alpha-eval", i as u64),
            )
            .map(|(m, _)| m)
        })
        .collect::<Result<Vec<f64>>>()?;
    let score = per_profile.iter().sum::<f64>() / per_profile.len() as f64;
    Ok(AlphaEvaluation {
        p1: spec.p1,
        p2: spec.p2,
        score,
        per_profile,
    })
}

fn encode_grid(grid: &[(f64, f64)]) -> Vec<f64> {
    let scale = |vals: Vec<f64>| {
        let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        vals.into_iter()
            .map(move |v| if hi > lo { (v - lo) / (hi - lo) } else { 0.0 })
            .collect::<Vec<_>>()
    };
    let a = scale(grid.iter().map(|g| g.0).collect());
    let b = scale(grid.iter().map(|g| g.1).collect());
    a.into_iter().zip(b).flat_map(|(x, y)| [x, y]).collect()
}

/// GP-EI search over a finite list of grid points for `budget`
/// evaluations of `objective(index)`. The first point is drawn at random,
/// hyperparameters are fixed until three points are observed and fitted by
/// maximum likelihood afterwards. Returns `(index, value)` pairs in
/// evaluation order.
pub fn maximize_over_grid<F>(
    encoded: &[f64],
    dim: usize,
    budget: usize,
    seed: u64,
    mut objective: F,
) -> Result<Vec<(usize, f64)>>
where
    F: FnMut(usize) -> Result<f64>,
{
    let n = encoded.len() / dim;
    let mut observed = vec![false; n];
    let mut trace: Vec<(usize, f64)> = Vec::new();
    for step in 0..budget.min(n) {
        let index = if step == 0 {
            seeded(derive_labeled(seed, "initial", 0)).random_range(0..n)
        } else {
            let x: Vec<Vec<f64>> = trace
                .iter()
                .map(|(i, _)| encoded[i * dim..(i + 1) * dim].to_vec())
                .collect();
            let y: Vec<f64> = trace.iter().map(|(_, v)| *v).collect();
            let mode = if trace.len() >= MLE_MIN_OBSERVATIONS {
                HyperMode::Mle
            } else {
                HyperMode::Fixed(GpHyper::default())
            };
            let gp = GpState::fit(x, y.clone(), mode)?;
            let best = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let worst = y.iter().cloned().fold(f64::INFINITY, f64::min);
            let eligible: Vec<bool> = observed.iter().map(|o| !o).collect();
            ei_argmax(&gp, encoded, dim, &eligible, best, 0.01 * (best - worst))
                .expect("unobserved point")
                .0
        };
        let value = objective(index)?;
        if !value.is_finite() {
            return Err(Error::Numerical(format!("objective at grid point {index} is {value}")));
        }
        observed[index] = true;
        trace.push((index, value));
    }
    Ok(trace)
}

impl AlphaSearch<'_> {
    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::Argument("α grid is empty".into()));
        }
        for &(p1, p2) in &self.grid {
            MultinomialNoiseSpec::new(p1, p2)
                .map_err(|_| Error::Argument(format!("α grid point ({p1}, {p2}) is infeasible")))?;
        }
        if self.budget < 2 {
            return Err(Error::Argument("α search budget must be at least 2".into()));
        }
        Ok(())
    }

    pub fn run(&self) -> Result<AlphaSearchResult> {
        self.validate()?;
        let encoded = encode_grid(&self.grid);
        let mut evaluations: Vec<Option<AlphaEvaluation>> = vec![None; self.grid.len()];
        let trace = maximize_over_grid(&encoded, 2, self.budget, self.seed, |i| {
            let (p1, p2) = self.grid[i];
            let spec = MultinomialNoiseSpec::new(p1, p2)?;
            let eval = score_alpha(
                self.template,
                self.dataset,
                spec,
                &self.profiles,
                self.trials,
                &self.hyper,
                self.seed,
            )?;
            let score = eval.score;
            evaluations[i] = Some(eval);
            Ok(score)
        })?;
        let trace: Vec<AlphaEvaluation> = trace
            .iter()
            .map(|(i, _)| evaluations[*i].clone().expect("evaluated"))
            .collect();
        // Best score; equal scores resolve to the earliest grid point.
        let best = trace
            .iter()
            .min_by(|a, b| {
                b.score.total_cmp(&a.score).then_with(|| {
                    let ia = self.grid.iter().position(|g| *g == (a.p1, a.p2));
                    let ib = self.grid.iter().position(|g| *g == (b.p1, b.p2));
                    ia.cmp(&ib)
                })
            })
            .expect("budget ≥ 1");
        Ok(AlphaSearchResult {
            best: MultinomialNoiseSpec::new(best.p1, best.p2)?,
            best_score: best.score,
            trace,
        })
    }
}

/// Searches `grid` for the noise spec whose BayesMulti-trained network scores
/// highest on average across `profiles`.
#[allow(clippy::too_many_arguments)]
pub fn optimize_alpha(
    template: &DenseNetwork,
    dataset: &Dataset,
    grid: &[(f64, f64)],
    budget: usize,
    profiles: &[NonIdealityProfile],
    trials: usize,
    hyper: &TrainHyper,
    seed: u64,
) -> Result<AlphaSearchResult> {
    AlphaSearch {
        template,
        dataset,
        grid: grid.to_vec(),
        budget,
        profiles: profiles.to_vec(),
        trials,
        hyper: *hyper,
        seed,
    }
    .run()
}
