use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::gp::{ei_argmax, GpHyper, GpState, HyperMode};
use super::space::{format_config, Configuration, SearchSpace};
use crate::error::{Error, Result};
use crate::rng::{derive_labeled, seeded};

/// Observations needed before hyperparameters are fitted by maximum likelihood.
pub const MLE_MIN_OBSERVATIONS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub config: Configuration,
    pub value: f64,
    pub timestamp: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Suggestion {
    pub config: Configuration,
    pub index: usize,
    /// Expected improvement at the suggestion; absent for initial random points.
    pub expected_improvement: Option<f64>,
}

/// Persistent state of an ask/tell campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignState {
    pub format: u32,
    pub space: SearchSpace,
    pub history: Vec<Observation>,
    pub hyper_mode: HyperMode,
    /// Hyperparameters from the most recent fit.
    pub gp_hyper: Option<GpHyper>,
    pub pending: Option<Configuration>,
    pub seed: u64,
    pub n_init: usize,
    /// Exploration margin as a fraction of the observed value range.
    pub xi_fraction: f64,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl CampaignState {
    pub fn new(space: SearchSpace, seed: u64) -> Result<Self> {
        space.validate()?;
        Ok(CampaignState {
            format: 1,
            space,
            history: Vec::new(),
            hyper_mode: HyperMode::Mle,
            gp_hyper: None,
            pending: None,
            seed,
            n_init: 1,
            xi_fraction: 0.01,
            warnings: Vec::new(),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let state: CampaignState = serde_json::from_str(text)?;
        if state.format != 1 {
            return Err(Error::Format(format!("unsupported campaign format {}", state.format)));
        }
        state.space.validate()?;
        Ok(state)
    }

    fn observed_mask(&self) -> Result<Vec<bool>> {
        let mut mask = vec![false; self.space.grid_size()];
        for obs in &self.history {
            mask[self.space.index_of(&obs.config)?] = true;
        }
        Ok(mask)
    }

    /// Hyperparameters the next suggestion will use.
    fn current_hyper(&self) -> GpHyper {
        match self.hyper_mode {
            HyperMode::Fixed(h) => h,
            HyperMode::Mle => self.gp_hyper.unwrap_or_default(),
        }
    }

    fn refit(&mut self) -> Result<()> {
        self.gp_hyper = match self.hyper_mode {
            HyperMode::Fixed(h) => Some(h),
            HyperMode::Mle if self.history.len() >= MLE_MIN_OBSERVATIONS => {
                let (x, y) = self.training_data()?;
                Some(GpState::fit(x, y, HyperMode::Mle)?.hyper)
            }
            HyperMode::Mle => Some(GpHyper::default()),
        };
        Ok(())
    }

    fn training_data(&self) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
        let x = self
            .history
            .iter()
            .map(|o| self.space.encode(&o.config))
            .collect::<Result<_>>()?;
        Ok((x, self.history.iter().map(|o| o.value).collect()))
    }

    /// Posterior over the grid given the current history.
    pub fn gp(&self) -> Result<GpState> {
        let (x, y) = self.training_data()?;
        GpState::fit(x, y, HyperMode::Fixed(self.current_hyper()))
    }

    /// Proposes the next configuration and records it as pending. Repeated
    /// calls without an intervening `tell` return the same point.
    pub fn suggest(&mut self) -> Result<Suggestion> {
        let observed = self.observed_mask()?;
        let remaining = observed.iter().filter(|o| !**o).count();
        if remaining == 0 {
            return Err(Error::Exhausted(observed.len()));
        }
        let suggestion = if self.history.len() < self.n_init {
            let mut rng = seeded(derive_labeled(self.seed, "initial", self.history.len() as u64));
            let pick = rng.random_range(0..remaining);
            let index = observed
                .iter()
                .enumerate()
                .filter(|(_, o)| !**o)
                .nth(pick)
                .map(|(i, _)| i)
                .expect("in range");
            Suggestion {
                config: self.space.point(index)?,
                index,
                expected_improvement: None,
            }
        } else {
            let gp = self.gp()?;
            let best = self.history.iter().map(|o| o.value).fold(f64::NEG_INFINITY, f64::max);
            let worst = self.history.iter().map(|o| o.value).fold(f64::INFINITY, f64::min);
            let xi = self.xi_fraction * (best - worst);
            let eligible: Vec<bool> = observed.iter().map(|o| !o).collect();
            let grid = self.space.encoded_grid();
            let (index, ei) =
                ei_argmax(&gp, &grid, self.space.dim(), &eligible, best, xi).expect("unobserved point exists");
            Suggestion {
                config: self.space.point(index)?,
                index,
                expected_improvement: Some(ei),
            }
        };
        self.pending = Some(suggestion.config.clone());
        Ok(suggestion)
    }

    /// Records a measurement. Replicates of an observed configuration are
    /// accepted with a warning.
    pub fn tell(
        &mut self,
        config: &[crate::bayesopt::RawValue],
        value: f64,
        timestamp: &str,
        note: Option<String>,
    ) -> Result<Option<String>> {
        if !value.is_finite() {
            return Err(Error::Argument(format!("objective value {value} is not finite")));
        }
        let index = self.space.index_of(config)?;
        let config = self.space.point(index)?;
        let mut warning = None;
        if self.history.iter().any(|o| o.config == config) {
            let w = format!("replicate measurement of {}", format_config(&config));
            self.warnings.push(w.clone());
            warning = Some(w);
        }
        if self.pending.as_ref() == Some(&config) {
            self.pending = None;
        }
        self.history.push(Observation {
            config,
            value,
            timestamp: timestamp.to_string(),
            note,
        });
        self.refit()?;
        Ok(warning)
    }

    pub fn best(&self) -> Option<&Observation> {
        self.history
            .iter()
            .fold(None, |acc: Option<&Observation>, o| match acc {
                Some(b) if b.value >= o.value => Some(b),
                _ => Some(o),
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bayesopt::{Dimension, RawValue};

    fn toy() -> SearchSpace {
        SearchSpace::new(vec![
            Dimension::numeric("a", "", &[0.0, 0.5, 1.0]),
            Dimension::numeric("b", "", &[0.0, 0.5, 1.0]),
        ])
        .unwrap()
    }

    #[test]
    fn first_suggestion_is_on_grid_and_stable() {
        let mut s = CampaignState::new(SearchSpace::fabrication_default(), 11).unwrap();
        let a = s.suggest().unwrap();
        let b = s.suggest().unwrap();
        assert_eq!(a, b);
        assert!(s.space.index_of(&a.config).is_ok());
        assert_eq!(s.pending, Some(a.config));
    }

    #[test]
    fn exhausts_small_grid() {
        let mut s = CampaignState::new(toy(), 0).unwrap();
        for i in 0..9 {
            let sug = s.suggest().unwrap();
            s.tell(&sug.config, i as f64 * 0.1, "t", None).unwrap();
        }
        assert!(matches!(s.suggest(), Err(Error::Exhausted(9))));
    }

    #[test]
    fn replicate_is_warned_not_rejected() {
        let mut s = CampaignState::new(toy(), 0).unwrap();
        let c = vec![RawValue::Number(0.5), RawValue::Number(1.0)];
        assert!(s.tell(&c, 0.2, "t", None).unwrap().is_none());
        assert!(s.tell(&c, 0.3, "t", None).unwrap().is_some());
        assert_eq!(s.history.len(), 2);
    }

    #[test]
    fn state_round_trips() {
        let mut s = CampaignState::new(SearchSpace::fabrication_default(), 3).unwrap();
        let c = s.space.parse_config(&["MAPbBr3", "1", "250", "10", "100"]).unwrap();
        s.tell(&c, 0.36, "2024-01-01T00:00:00Z", Some("initial".into()))
            .unwrap();
        s.suggest().unwrap();
        let back = CampaignState::from_json(&s.to_json().unwrap()).unwrap();
        assert_eq!(back, s);
    }
}
