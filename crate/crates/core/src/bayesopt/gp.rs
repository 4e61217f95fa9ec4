use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::optim::nelder_mead;
use crate::error::{Error, Result};

/// Largest diagonal jitter, relative to the signal variance, tried before
/// factorization is declared failed.
pub const MAX_JITTER: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpHyper {
    pub length_scale: f64,
    pub signal_var: f64,
    pub noise_var: f64,
}

impl Default for GpHyper {
    fn default() -> Self {
        GpHyper {
            length_scale: 0.3,
            signal_var: 0.1,
            noise_var: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum HyperMode {
    Fixed(GpHyper),
    Mle,
}

pub const LENGTH_BOUNDS: (f64, f64) = (0.05, 5.0);
pub const NOISE_BOUNDS: (f64, f64) = (1e-8, 1.0);
pub const MLE_STARTS: usize = 8;
/// Bounds on the signal variance relative to the target variance.
pub const SIGNAL_BOUNDS: (f64, f64) = (1e-2, 1e2);
const MLE_ITERATIONS: usize = 120;

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Squared-exponential kernel `s² exp(−‖a − b‖² / 2ℓ²)`.
#[inline]
pub fn se_kernel(a: &[f64], b: &[f64], hyper: &GpHyper) -> f64 {
    hyper.signal_var * (-0.5 * sq_dist(a, b) / (hyper.length_scale * hyper.length_scale)).exp()
}

/// Fitted Gaussian-process posterior with constant prior mean.
#[derive(Debug, Clone)]
pub struct GpState {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    pub hyper: GpHyper,
    pub prior_mean: f64,
    /// Diagonal jitter that was added on top of the noise variance.
    pub jitter: f64,
    /// Lower Cholesky factor of `K + (noise + jitter)·I`, row-major.
    chol: Vec<f64>,
    alpha: Vec<f64>,
}

fn gram(x: &[Vec<f64>], hyper: &GpHyper, diag: f64) -> DMatrix<f64> {
    let n = x.len();
    DMatrix::from_fn(n, n, |i, j| {
        se_kernel(&x[i], &x[j], hyper) + if i == j { diag } else { 0.0 }
    })
}

fn factorize(x: &[Vec<f64>], hyper: &GpHyper) -> Result<(Cholesky<f64, nalgebra::Dyn>, f64)> {
    let mut jitter = 0.0;
    loop {
        if let Some(c) = Cholesky::new(gram(x, hyper, hyper.noise_var + jitter)) {
            return Ok((c, jitter));
        }
        jitter = if jitter == 0.0 {
            1e-12 * hyper.signal_var
        } else {
            jitter * 10.0
        };
        if jitter > MAX_JITTER * hyper.signal_var * (1.0 + 1e-9) {
            return Err(Error::Numerical(format!(
                "Gram matrix not positive definite with jitter up to {MAX_JITTER:e} ({hyper:?})"
            )));
        }
    }
}

/// Log marginal likelihood of centred targets under `hyper`.
pub fn log_marginal_likelihood(x: &[Vec<f64>], y: &[f64], hyper: &GpHyper) -> Result<f64> {
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let centred = DVector::from_iterator(y.len(), y.iter().map(|v| v - mean));
    let (chol, _) = factorize(x, hyper)?;
    let alpha = chol.solve(&centred);
    let log_det: f64 = chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum();
    let n = y.len() as f64;
    Ok(-0.5 * centred.dot(&alpha) - log_det - 0.5 * n * (2.0 * std::f64::consts::PI).ln())
}

fn sample_variance(y: &[f64]) -> f64 {
    let n = y.len() as f64;
    let m = y.iter().sum::<f64>() / n;
    y.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n
}

/// Hyperparameters maximizing the log marginal likelihood: Nelder-Mead in
/// log space from `MLE_STARTS` fixed starting points, clamped to the bounds.
/// The search runs on standardized targets, so the signal bounds
/// `[1e-2, 1e2]` and `NOISE_BOUNDS` are relative to the target variance; the
/// result is returned in the original units.
pub fn fit_hyper_mle(x: &[Vec<f64>], y: &[f64]) -> Result<GpHyper> {
    let v = sample_variance(y);
    let scale = if v > 0.0 && v.is_finite() { v } else { 1.0 };
    let sd = scale.sqrt();
    let z: Vec<f64> = y.iter().map(|t| t / sd).collect();
    let lo = [LENGTH_BOUNDS.0.ln(), SIGNAL_BOUNDS.0.ln(), NOISE_BOUNDS.0.ln()];
    let hi = [LENGTH_BOUNDS.1.ln(), SIGNAL_BOUNDS.1.ln(), NOISE_BOUNDS.1.ln()];
    let to_hyper = |p: &[f64]| {
        let c = |i: usize| p[i].clamp(lo[i], hi[i]).exp();
        GpHyper {
            length_scale: c(0).clamp(LENGTH_BOUNDS.0, LENGTH_BOUNDS.1),
            signal_var: c(1),
            noise_var: c(2).clamp(NOISE_BOUNDS.0, NOISE_BOUNDS.1),
        }
    };
    let objective = |p: &[f64]| match log_marginal_likelihood(x, &z, &to_hyper(p)) {
        Ok(l) if l.is_finite() => -l,
        _ => f64::INFINITY,
    };

    let mut best: Option<(f64, Vec<f64>)> = None;
    for s in 0..MLE_STARTS {
        // Fixed low-discrepancy starts inside the box.
        let frac = [
            (s as f64 + 0.5) / MLE_STARTS as f64,
            ((s * 3 % MLE_STARTS) as f64 + 0.5) / MLE_STARTS as f64,
            ((s * 5 % MLE_STARTS) as f64 + 0.5) / MLE_STARTS as f64,
        ];
        let start: Vec<f64> = (0..3).map(|i| lo[i] + frac[i] * (hi[i] - lo[i])).collect();
        let (p, f) = nelder_mead(&objective, &start, 0.5, MLE_ITERATIONS, 1e-8);
        let p: Vec<f64> = p.iter().enumerate().map(|(i, v)| v.clamp(lo[i], hi[i])).collect();
        if f.is_finite() && best.as_ref().is_none_or(|(bf, _)| f < *bf) {
            best = Some((f, p));
        }
    }
    match best {
        Some((_, p)) => {
            let h = to_hyper(&p);
            Ok(GpHyper {
                length_scale: h.length_scale,
                signal_var: h.signal_var * scale,
                noise_var: h.noise_var * scale,
            })
        }
        None => Err(Error::Numerical(
            "marginal likelihood is not finite at any start".into(),
        )),
    }
}

impl GpState {
    pub fn fit(x: Vec<Vec<f64>>, y: Vec<f64>, mode: HyperMode) -> Result<Self> {
        if x.is_empty() || x.len() != y.len() {
            return Err(Error::InsufficientData("a GP needs at least one observation".into()));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Argument("GP targets must be finite".into()));
        }
        let hyper = match mode {
            HyperMode::Fixed(h) => h,
            HyperMode::Mle => fit_hyper_mle(&x, &y)?,
        };
        if !(hyper.length_scale > 0.0 && hyper.signal_var > 0.0 && hyper.noise_var >= 0.0) {
            return Err(Error::Argument(format!("invalid GP hyperparameters {hyper:?}")));
        }
        let prior_mean = y.iter().sum::<f64>() / y.len() as f64;
        let (chol, jitter) = factorize(&x, &hyper)?;
        let centred = DVector::from_iterator(y.len(), y.iter().map(|v| v - prior_mean));
        let alpha = chol.solve(&centred).iter().copied().collect();
        let l = chol.l();
        let n = x.len();
        let mut flat = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                flat[i * n + j] = l[(i, j)];
            }
        }
        Ok(GpState {
            x,
            y,
            hyper,
            prior_mean,
            jitter,
            chol: flat,
            alpha,
        })
    }

    /// Posterior mean and variance at `p`. The variance is not clipped and
    /// may be marginally negative through rounding.
    pub fn predict_raw(&self, p: &[f64], scratch: &mut Vec<f64>) -> (f64, f64) {
        let n = self.x.len();
        scratch.clear();
        scratch.extend(self.x.iter().map(|xi| se_kernel(xi, p, &self.hyper)));
        let mean = self.prior_mean + scratch.iter().zip(&self.alpha).map(|(k, a)| k * a).sum::<f64>();
        // Forward substitution L v = k*, in place.
        for i in 0..n {
            let row = &self.chol[i * n..i * n + i];
            let s: f64 = row.iter().zip(&scratch[..i]).map(|(l, v)| l * v).sum();
            scratch[i] = (scratch[i] - s) / self.chol[i * n + i];
        }
        let explained: f64 = scratch.iter().map(|v| v * v).sum();
        (mean, self.hyper.signal_var - explained)
    }

    /// Posterior mean and standard deviation, with variance clipped at 0.
    pub fn predict(&self, p: &[f64]) -> (f64, f64) {
        let (m, v) = self.predict_raw(p, &mut Vec::new());
        (m, v.max(0.0).sqrt())
    }
}

pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Expected improvement over `best + xi` for a posterior with mean `mu` and
/// standard deviation `s`.
pub fn expected_improvement(mu: f64, s: f64, best: f64, xi: f64) -> f64 {
    let gain = mu - best - xi;
    if s <= 0.0 {
        return gain.max(0.0);
    }
    let z = gain / s;
    (gain * normal_cdf(z) + s * normal_pdf(z)).max(0.0)
}

/// Index (into `candidates`, `dim` values each) of the largest expected
/// improvement among entries with `eligible[i]`; ties go to the lowest index.
pub fn ei_argmax(
    gp: &GpState,
    candidates: &[f64],
    dim: usize,
    eligible: &[bool],
    best: f64,
    xi: f64,
) -> Option<(usize, f64)> {
    let mut scratch = Vec::with_capacity(gp.x.len());
    let mut out: Option<(usize, f64)> = None;
    for (i, p) in candidates.chunks_exact(dim).enumerate() {
        if !eligible[i] {
            continue;
        }
        let (m, v) = gp.predict_raw(p, &mut scratch);
        let ei = expected_improvement(m, v.max(0.0).sqrt(), best, xi);
        if out.is_none_or(|(_, b)| ei > b) {
            out = Some((i, ei));
        }
    }
    out
}
