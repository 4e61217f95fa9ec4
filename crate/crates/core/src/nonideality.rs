//! Device non-ideality factors and the usability score.
//!
//! Two factors are extracted from a [`ConductanceSet`]:
//!
//! * the **monotonic factor** `min(l / required_len, 1)`, where `l` is the
//!   length of the longest contiguous strictly increasing run (LCIS) of the
//!   smoothed mean conductance curve, and
//! * the **stochastic factor** `exp(-σ)`, where `σ` is the log-normal spread
//!   of per-cycle conductance around the mean curve.
//!
//! Their product is the usability score in `[0, 1]`. The ratio table records,
//! for each of the `required_len` programmable levels, how much a weight
//! mapped onto that level is attenuated when it falls outside the LCIS.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::ivdata::ConductanceSet;

pub const DEFAULT_REQUIRED_LEN: usize = 35;

/// Which σ estimate drives the usability score and the weight drift.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaVariant {
    /// Maximum-likelihood estimate.
    Mle,
    /// Upper 95% bound using the lower-tail (2.5th percentile) chi-square
    /// quantile, which always exceeds the MLE.
    #[default]
    Upper95,
    /// The same bound computed with the 97.5th percentile quantile. This is
    /// smaller than the MLE for every `n ≥ 2` and is kept for comparison only.
    Literal975,
}

impl std::str::FromStr for SigmaVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mle" => Ok(SigmaVariant::Mle),
            "upper95" => Ok(SigmaVariant::Upper95),
            "literal975" => Ok(SigmaVariant::Literal975),
            other => Err(Error::Argument(format!(
                "unknown sigma variant `{other}` (expected mle, upper95 or literal975)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaEstimate {
    pub mle: f64,
    pub upper95: f64,
    pub literal975: f64,
    pub n: usize,
}

impl SigmaEstimate {
    pub fn get(&self, variant: SigmaVariant) -> f64 {
        match variant {
            SigmaVariant::Mle => self.mle,
            SigmaVariant::Upper95 => self.upper95,
            SigmaVariant::Literal975 => self.literal975,
        }
    }
}

/// Extracted device model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonIdealityProfile {
    pub lcis_start: usize,
    pub lcis_end: usize,
    pub lcis_len: usize,
    pub required_len: usize,
    /// Start and end (exclusive) of the operative window after extension to
    /// `required_len`; σ is estimated over this window.
    pub window_start: usize,
    pub window_end: usize,
    pub ratio_table: Vec<f64>,
    pub sigma_mle: f64,
    pub sigma_95: f64,
    pub sigma_variant: SigmaVariant,
    pub usability: f64,
    pub c_min: f64,
    pub c_max: f64,
}

impl NonIdealityProfile {
    /// A device with no non-idealities.
    pub fn ideal(required_len: usize) -> Self {
        NonIdealityProfile {
            lcis_start: 0,
            lcis_end: required_len,
            lcis_len: required_len,
            required_len,
            window_start: 0,
            window_end: required_len,
            ratio_table: vec![1.0; required_len],
            sigma_mle: 0.0,
            sigma_95: 0.0,
            sigma_variant: SigmaVariant::Upper95,
            usability: 1.0,
            c_min: 1e-6,
            c_max: 1e-4,
        }
    }

    /// The σ selected by `sigma_variant`.
    pub fn sigma(&self) -> f64 {
        match self.sigma_variant {
            SigmaVariant::Mle => self.sigma_mle,
            _ => self.sigma_95,
        }
    }

    pub fn monotonic_factor(&self) -> f64 {
        monotonic_factor(self.lcis_len, self.required_len)
    }

    pub fn is_ideal(&self) -> bool {
        self.sigma() == 0.0 && self.ratio_table.iter().all(|&r| r == 1.0)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: NonIdealityProfile = serde_json::from_str(text)?;
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.required_len == 0 || self.ratio_table.len() != self.required_len {
            return Err(Error::Argument(format!(
                "ratio table has {} entries for required_len {}",
                self.ratio_table.len(),
                self.required_len
            )));
        }
        if self.lcis_len == 0 || self.lcis_end < self.lcis_start || self.lcis_end - self.lcis_start != self.lcis_len {
            return Err(Error::Argument("inconsistent LCIS bounds".into()));
        }
        if self.ratio_table.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(Error::Argument("ratio table entries must lie in [0, 1]".into()));
        }
        if !(self.sigma_mle >= 0.0 && self.sigma_95.is_finite() && self.sigma_95 >= 0.0) {
            return Err(Error::Argument(
                "sigma estimates must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }
}

pub fn monotonic_factor(lcis_len: usize, required_len: usize) -> f64 {
    (lcis_len as f64 / required_len as f64).min(1.0)
}

pub fn usability(lcis_len: usize, required_len: usize, sigma: f64) -> f64 {
    monotonic_factor(lcis_len, required_len) * (-sigma).exp()
}

/// Longest contiguous strictly increasing run, as `[start, end)`.
/// Equal-length runs resolve to the smallest start.
pub fn lcis(seq: &[f64]) -> Result<(usize, usize)> {
    if seq.is_empty() {
        return Err(Error::Argument("LCIS of an empty sequence".into()));
    }
    let (mut best_start, mut best_len) = (0, 1);
    let mut run_start = 0;
    for i in 1..seq.len() {
        if seq[i].partial_cmp(&seq[i - 1]) != Some(std::cmp::Ordering::Greater) {
            run_start = i;
        }
        let len = i + 1 - run_start;
        if len > best_len {
            best_start = run_start;
            best_len = len;
        }
    }
    Ok((best_start, best_start + best_len))
}

/// Lower-tail chi-square quantile with `dof` degrees of freedom.
pub fn chi_square_quantile(prob: f64, dof: usize) -> Result<f64> {
    let dist = ChiSquared::new(dof as f64).map_err(|e| Error::Argument(format!("chi-square with {dof} dof: {e}")))?;
    Ok(dist.inverse_cdf(prob))
}

/// Log-normal spread of per-cycle conductance around the mean curve over
/// positions `[start, end)`.
pub fn estimate_sigma(cond: &ConductanceSet, start: usize, end: usize) -> Result<SigmaEstimate> {
    if end <= start || end > cond.mean_smoothed.len() {
        return Err(Error::Argument(format!(
            "window [{start}, {end}) is empty or exceeds curve length {}",
            cond.mean_smoothed.len()
        )));
    }
    let n = cond.n_cycles() * (end - start);
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "σ estimation needs at least 2 samples, window holds {n}"
        )));
    }
    let mut sum_sq = 0.0;
    for (i, row) in cond.per_cycle.iter().enumerate() {
        for (j, (&c, &m)) in row.iter().zip(&cond.mean_smoothed).enumerate().take(end).skip(start) {
            if !(c > 0.0 && m > 0.0) {
                return Err(Error::Domain(format!(
                    "non-positive conductance at cycle {i}, point {j} ({c} vs mean {m})"
                )));
            }
            let lr = (c / m).ln();
            sum_sq += lr * lr;
        }
    }
    let var_mle = sum_sq / n as f64;
    let dof = n - 1;
    let scaled = dof as f64 * var_mle;
    let q_lo = chi_square_quantile(0.025, dof)?;
    let q_hi = chi_square_quantile(0.975, dof)?;
    Ok(SigmaEstimate {
        mle: var_mle.sqrt(),
        upper95: (scaled / q_lo).sqrt(),
        literal975: (scaled / q_hi).sqrt(),
        n,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioTable {
    pub ratios: Vec<f64>,
    pub window_start: usize,
    pub window_end: usize,
}

/// Per-level attenuation for a curve whose LCIS is `[start, end)`.
///
/// When the LCIS is shorter than `required_len` the operative window is
/// extended forward to `required_len` points (shifted back if it would run
/// past the curve end). Levels inside the original LCIS keep ratio 1; the
/// others get the relative position of their conductance between the global
/// curve extrema. A flat curve maps every level to 1.
pub fn build_ratio_table(mean_curve: &[f64], start: usize, end: usize, required_len: usize) -> Result<RatioTable> {
    if required_len == 0 {
        return Err(Error::Argument("required_len must be at least 1".into()));
    }
    if mean_curve.len() < required_len {
        return Err(Error::InsufficientData(format!(
            "curve has {} points, required_len is {required_len}",
            mean_curve.len()
        )));
    }
    if end <= start || end > mean_curve.len() {
        return Err(Error::Argument(format!("invalid LCIS bounds [{start}, {end})")));
    }
    let mut ratios = vec![1.0; required_len];
    if end - start >= required_len {
        return Ok(RatioTable {
            ratios,
            window_start: start,
            window_end: end,
        });
    }

    let c_max = mean_curve.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let c_min = mean_curve.iter().cloned().fold(f64::INFINITY, f64::min);
    let span = c_max - c_min;

    let max_index = mean_curve.len();
    let mut w_start = start;
    let mut w_end = start + required_len;
    if w_end > max_index {
        w_start = w_start + max_index - w_end;
        w_end = max_index;
    }
    for (i, r) in ratios.iter_mut().enumerate() {
        let idx = w_start + i;
        *r = if (start..end).contains(&idx) || span <= 0.0 {
            1.0
        } else {
            ((mean_curve[idx] - c_min) / span).clamp(0.0, 1.0)
        };
    }
    Ok(RatioTable {
        ratios,
        window_start: w_start,
        window_end: w_end,
    })
}

pub fn compute_profile(
    cond: &ConductanceSet,
    required_len: usize,
    variant: SigmaVariant,
) -> Result<NonIdealityProfile> {
    let curve = &cond.mean_smoothed;
    let (lcis_start, lcis_end) = lcis(curve)?;
    let table = build_ratio_table(curve, lcis_start, lcis_end, required_len)?;
    let sigma = estimate_sigma(cond, table.window_start, table.window_end)?;
    let lcis_len = lcis_end - lcis_start;
    let c_max = curve.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let c_min = curve.iter().cloned().fold(f64::INFINITY, f64::min);
    let (sigma_95, sigma_used) = match variant {
        SigmaVariant::Mle => (sigma.upper95, sigma.mle),
        SigmaVariant::Upper95 => (sigma.upper95, sigma.upper95),
        SigmaVariant::Literal975 => (sigma.literal975, sigma.literal975),
    };
    Ok(NonIdealityProfile {
        lcis_start,
        lcis_end,
        lcis_len,
        required_len,
        window_start: table.window_start,
        window_end: table.window_end,
        ratio_table: table.ratios,
        sigma_mle: sigma.mle,
        sigma_95,
        sigma_variant: variant,
        usability: usability(lcis_len, required_len, sigma_used),
        c_min,
        c_max,
    })
}
