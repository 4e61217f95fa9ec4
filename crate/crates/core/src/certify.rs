//! Certified robustness of multinomial weight smoothing.
//!
//! The smoothed classifier is `f_π(θ) = E_η[f(θ ⊙ η)]` with `η` drawn i.i.d.
//! from `{0, 0.5, 1}` with probabilities `(p1, p2, 1 − p1 − p2)`. When the
//! top-class score exceeds one half, the prediction is claimed to survive any
//! multiplicative perturbation `δ` that moves at most `⌊r⌋` coordinates
//! outside `{0.5, 1}`. This module evaluates `r`, the divergence bound behind
//! it, and checks the claim by exhaustive enumeration on tiny networks.

use rand::seq::index::sample;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF};

use crate::error::{Error, Result};
use crate::neural::{argmax, smoothed_predict, DenseNetwork, MultinomialNoiseSpec, Workspace, NOISE_FACTORS};
use crate::rng::seeded;

/// Largest Θ evaluated by full `3^Θ` enumeration.
pub const EXACT_THETA_CAP: usize = 14;
/// Largest Θ accepted by [`verify_certificate`].
pub const VERIFY_THETA_CAP: usize = 10;
/// Assignments of the `{0.5, 1}` coordinates tried per subset before
/// switching to sampling.
pub const REMAINDER_SAMPLE_CAP: usize = 512;
pub const DEFAULT_VALUE_GRID: [f64; 5] = [-1.0, 0.1, 0.25, 2.0, 5.0];
/// Tolerance of the divergence-bound check.
pub const BOUND_TOLERANCE: f64 = 1e-9;

fn check_probabilities(p1: f64, p2: f64) -> Result<()> {
    if !(p1 > 0.0 && p1 < 1.0) {
        return Err(Error::Domain(format!("p1 must lie strictly between 0 and 1, got {p1}")));
    }
    if !((0.0..1.0).contains(&p2) && p1 + p2 <= 1.0 + 1e-12) {
        return Err(Error::Domain(format!("p2 = {p2} is invalid for p1 = {p1}")));
    }
    Ok(())
}

/// `r = [ln(1.5 − f) − Θ ln(1 − p2)] / [ln p1 − ln(1 − p2)]`.
pub fn certified_radius(f_pi0: f64, theta_count: usize, p1: f64, p2: f64) -> Result<f64> {
    check_probabilities(p1, p2)?;
    if !(0.0..=1.0).contains(&f_pi0) {
        return Err(Error::Domain(format!("f_pi0 must lie in [0, 1], got {f_pi0}")));
    }
    let ln_keep = (-p2).ln_1p();
    let denom = p1.ln() - ln_keep;
    if denom == 0.0 {
        return Err(Error::Domain(format!("p1 = 1 − p2 = {p1} makes the radius undefined")));
    }
    let numer = (0.5 - f_pi0).ln_1p() - theta_count as f64 * ln_keep;
    // Adding 0.0 turns a signed zero at the boundary into +0.
    Ok(numer / denom + 0.0)
}

/// Counts of coordinates of `δ` equal to 0 (`k`), 0.5 (`l`) and 1 (`m`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerturbationPattern {
    pub k: usize,
    pub l: usize,
    pub m: usize,
}

impl PerturbationPattern {
    pub fn of(delta: &[f64]) -> Self {
        let count = |v: f64| delta.iter().filter(|&&d| d == v).count();
        PerturbationPattern {
            k: count(0.0),
            l: count(0.5),
            m: count(1.0),
        }
    }

    pub fn identity(theta_count: usize) -> Self {
        PerturbationPattern {
            k: 0,
            l: 0,
            m: theta_count,
        }
    }

    /// Coordinates outside `{0.5, 1}`.
    pub fn off_support(&self, theta_count: usize) -> usize {
        theta_count - self.l - self.m
    }
}

/// `D = λ(1 − P) + [λ − p1^{−k}]₊ P` with `P = p1^{Θ−m−l} (1 − p2)^l`.
pub fn df_bound(lambda: f64, pattern: &PerturbationPattern, theta_count: usize, p1: f64, p2: f64) -> Result<f64> {
    check_probabilities(p1, p2)?;
    if pattern.k + pattern.l + pattern.m > theta_count {
        return Err(Error::Argument(format!(
            "pattern {pattern:?} exceeds Θ = {theta_count}"
        )));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::Argument(format!(
            "λ must be finite and non-negative, got {lambda}"
        )));
    }
    let overlap = p1.powi((theta_count - pattern.m - pattern.l) as i32) * (1.0 - p2).powi(pattern.l as i32);
    let excess = (lambda - p1.powi(-(pattern.k as i32))).max(0.0);
    Ok(lambda * (1.0 - overlap) + excess * overlap)
}

/// Exact `Σ_η P(η) f(θ ⊙ η)` over `η ∈ {0, 0.5, 1}^Θ` for an arbitrary
/// vector-valued `f`. Atoms of zero probability are skipped; atoms are
/// visited in a fixed order.
pub fn exact_smoothed_fn<F>(theta: &[f64], p1: f64, p2: f64, mut f: F) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Vec<f64>,
{
    let spec = MultinomialNoiseSpec::new(p1, p2)?;
    if theta.len() > EXACT_THETA_CAP {
        return Err(Error::Size(format!(
            "Θ = {} exceeds the enumeration cap of {EXACT_THETA_CAP}; use smoothed_predict",
            theta.len()
        )));
    }
    let probs = spec.probabilities();
    let n = theta.len();
    let mut digits = vec![0usize; n];
    let mut perturbed: Vec<f64> = theta.iter().map(|t| t * NOISE_FACTORS[0]).collect();
    let mut acc: Vec<f64> = Vec::new();
    loop {
        let p: f64 = digits.iter().map(|&d| probs[d]).product();
        if p > 0.0 {
            let out = f(&perturbed);
            if acc.is_empty() {
                acc = vec![0.0; out.len()];
            }
            for (a, o) in acc.iter_mut().zip(&out) {
                *a += p * o;
            }
        }
        // Odometer increment, last coordinate fastest.
        let mut i = n;
        loop {
            if i == 0 {
                return Ok(acc);
            }
            i -= 1;
            digits[i] += 1;
            if digits[i] < 3 {
                perturbed[i] = theta[i] * NOISE_FACTORS[digits[i]];
                break;
            }
            digits[i] = 0;
            perturbed[i] = theta[i] * NOISE_FACTORS[0];
        }
    }
}

/// Exact smoothed class probabilities of `net` at `x`, with noise on every
/// weight (`Θ` = weight count).
pub fn exact_smoothed(net: &DenseNetwork, x: &[f64], p1: f64, p2: f64) -> Result<Vec<f64>> {
    exact_smoothed_at(net, &net.weights_flat(), x, p1, p2)
}

/// [`exact_smoothed`] with the weights of `net` replaced by `theta`.
pub fn exact_smoothed_at(net: &DenseNetwork, theta: &[f64], x: &[f64], p1: f64, p2: f64) -> Result<Vec<f64>> {
    if x.len() != net.input_dim() {
        return Err(Error::Argument(format!(
            "input has {} features, network expects {}",
            x.len(),
            net.input_dim()
        )));
    }
    if theta.len() != net.theta_count() {
        return Err(Error::Argument("weight vector length differs from Θ".into()));
    }
    let mut ws = Workspace::default();
    exact_smoothed_fn(theta, p1, p2, |w| net.forward_with(w, x, &mut ws).to_vec())
}

/// One-sided Clopper-Pearson lower bound on a success probability.
pub fn clopper_pearson_lower(successes: u64, trials: u64, alpha: f64) -> Result<f64> {
    if trials == 0 || successes > trials {
        return Err(Error::Argument(format!("{successes} successes in {trials} trials")));
    }
    if successes == 0 {
        return Ok(0.0);
    }
    let beta = Beta::new(successes as f64, (trials - successes + 1) as f64)
        .map_err(|e| Error::Numerical(format!("beta distribution: {e}")))?;
    Ok(beta.inverse_cdf(alpha))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessCertificate {
    pub class: usize,
    pub f_pi0: f64,
    pub theta_count: usize,
    pub p1: f64,
    pub p2: f64,
    pub radius: f64,
    pub certified: bool,
    /// Whether `f_pi0` is exact or a Monte-Carlo lower bound.
    pub exact: bool,
}

impl RobustnessCertificate {
    pub fn budget(&self) -> Option<usize> {
        (self.certified && self.radius >= 0.0).then(|| self.radius.floor() as usize)
    }
}

/// Monte-Carlo samples used when Θ exceeds the enumeration cap.
pub const MC_SAMPLES: usize = 100_000;
pub const MC_ALPHA: f64 = 0.001;

/// Certificate for the smoothed prediction of `net` at `x`. Above the
/// enumeration cap the top-class score is replaced by a 99.9% Clopper-Pearson
/// lower bound built from `⌊Σ f⌋` successes over `MC_SAMPLES` draws.
pub fn certify_prediction(net: &DenseNetwork, x: &[f64], p1: f64, p2: f64, seed: u64) -> Result<RobustnessCertificate> {
    check_probabilities(p1, p2)?;
    let theta_count = net.theta_count();
    let (class, f_pi0, exact) = if theta_count <= EXACT_THETA_CAP {
        let probs = exact_smoothed(net, x, p1, p2)?;
        let c = argmax(&probs);
        (c, probs[c], true)
    } else {
        let spec = MultinomialNoiseSpec::new(p1, p2)?;
        let s = smoothed_predict(net, x, &spec, MC_SAMPLES, seed)?;
        let c = argmax(&s.mean);
        let successes = (s.mean[c] * MC_SAMPLES as f64).floor() as u64;
        (c, clopper_pearson_lower(successes, MC_SAMPLES as u64, MC_ALPHA)?, false)
    };
    let radius = certified_radius(f_pi0, theta_count, p1, p2)?;
    Ok(RobustnessCertificate {
        class,
        f_pi0,
        theta_count,
        p1,
        p2,
        radius,
        certified: radius >= 0.0 && f_pi0 > 0.5,
        exact,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counterexample {
    pub delta: Vec<f64>,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub f_pi0: f64,
    pub theta_count: usize,
    pub p1: f64,
    pub p2: f64,
    pub radius: f64,
    pub certified: bool,
    pub budget: usize,
    pub tested_patterns: usize,
    /// Smallest `f_π(θ₀ ⊙ δ) − 0.5` over the tested perturbations.
    pub min_margin: f64,
    /// Perturbations inside the certified set whose score fell to 0.5 or below.
    pub counterexamples: Vec<Counterexample>,
    /// Tested perturbations where `f_π(θ₀ ⊙ δ) < f_pi0 − D(1, pattern) − 1e-9`.
    pub bound_violations: usize,
    /// Smallest `f_π(θ₀ ⊙ δ) − (f_pi0 − D(1, pattern))` observed.
    pub min_bound_slack: f64,
    /// Probes with one coordinate more than the budget allows.
    pub uncertified_probes: usize,
    /// Those probes whose score fell to 0.5 or below; not failures.
    pub uncertified_flips: usize,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.counterexamples.is_empty() && self.bound_violations == 0
    }
}

fn for_each_subset(n: usize, size: usize, mut visit: impl FnMut(&[usize])) {
    let mut idx: Vec<usize> = (0..size).collect();
    loop {
        visit(&idx);
        let mut i = size;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] < n - size + i {
                idx[i] += 1;
                for j in i + 1..size {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
            if i == 0 {
                return;
            }
        }
    }
}

/// Uncertified probes drawn per report.
pub const UNCERTIFIED_PROBES: usize = 32;

/// Checks the certificate of `net` at `x` by brute force. Every subset of at
/// most `⌊r⌋` coordinates takes every combination of `value_grid` entries;
/// the other coordinates sweep `{0.5, 1}` exhaustively, or through
/// `REMAINDER_SAMPLE_CAP` seeded draws when that is too many.
pub fn verify_certificate(
    net: &DenseNetwork,
    x: &[f64],
    p1: f64,
    p2: f64,
    value_grid: &[f64],
    seed: u64,
) -> Result<VerificationReport> {
    let theta0 = net.weights_flat();
    let theta_count = theta0.len();
    if theta_count > VERIFY_THETA_CAP {
        return Err(Error::Size(format!(
            "Θ = {theta_count} exceeds the verification cap of {VERIFY_THETA_CAP}"
        )));
    }
    if value_grid.iter().any(|v| !v.is_finite()) {
        return Err(Error::Argument("value grid must be finite".into()));
    }
    let cert = certify_prediction(net, x, p1, p2, seed)?;
    if !cert.certified {
        return Err(Error::NotCertifiable(format!(
            "smoothed top score {:.6} gives radius {:.6}",
            cert.f_pi0, cert.radius
        )));
    }
    let budget = (cert.radius.floor() as usize).min(theta_count);
    let class = cert.class;
    let mut rng = seeded(seed);
    let mut ws = Workspace::default();
    let mut delta = vec![1.0; theta_count];
    let mut scaled = vec![0.0; theta_count];

    let mut report = VerificationReport {
        f_pi0: cert.f_pi0,
        theta_count,
        p1,
        p2,
        radius: cert.radius,
        certified: cert.certified,
        budget,
        tested_patterns: 0,
        min_margin: f64::INFINITY,
        counterexamples: Vec::new(),
        bound_violations: 0,
        min_bound_slack: f64::INFINITY,
        uncertified_probes: 0,
        uncertified_flips: 0,
    };

    let mut score_of = |delta: &[f64], scaled: &mut Vec<f64>| -> Result<f64> {
        for ((s, t), d) in scaled.iter_mut().zip(&theta0).zip(delta) {
            *s = t * d;
        }
        let probs = exact_smoothed_fn(scaled, p1, p2, |w| net.forward_with(w, x, &mut ws).to_vec())?;
        Ok(probs[class])
    };

    let record = |delta: &[f64], score: f64, report: &mut VerificationReport| -> Result<()> {
        report.tested_patterns += 1;
        report.min_margin = report.min_margin.min(score - 0.5);
        if score <= 0.5 {
            report.counterexamples.push(Counterexample {
                delta: delta.to_vec(),
                score,
            });
        }
        let bound = df_bound(1.0, &PerturbationPattern::of(delta), theta_count, p1, p2)?;
        let slack = score - (cert.f_pi0 - bound);
        report.min_bound_slack = report.min_bound_slack.min(slack);
        if slack < -BOUND_TOLERANCE {
            report.bound_violations += 1;
        }
        Ok(())
    };

    for size in 0..=budget {
        let rest = theta_count - size;
        let exhaustive = rest < usize::BITS as usize && (1usize << rest) <= REMAINDER_SAMPLE_CAP;
        let mut subsets: Vec<Vec<usize>> = Vec::new();
        for_each_subset(theta_count, size, |s| subsets.push(s.to_vec()));
        for subset in &subsets {
            let others: Vec<usize> = (0..theta_count).filter(|i| !subset.contains(i)).collect();
            let combos = value_grid.len().pow(size as u32);
            for combo in 0..combos {
                let mut c = combo;
                for &i in subset.iter().rev() {
                    delta[i] = value_grid[c % value_grid.len()];
                    c /= value_grid.len();
                }
                let assignments: Vec<u64> = if exhaustive {
                    (0..1u64 << rest).collect()
                } else {
                    (0..REMAINDER_SAMPLE_CAP).map(|_| rng.random::<u64>()).collect()
                };
                for bits in assignments {
                    for (j, &i) in others.iter().enumerate() {
                        delta[i] = if bits >> j & 1 == 1 { 0.5 } else { 1.0 };
                    }
                    let score = score_of(&delta, &mut scaled)?;
                    record(&delta, score, &mut report)?;
                }
            }
        }
    }

    if budget < theta_count && !value_grid.is_empty() {
        for _ in 0..UNCERTIFIED_PROBES {
            let chosen = sample(&mut rng, theta_count, budget + 1).into_vec();
            for (i, d) in delta.iter_mut().enumerate() {
                *d = if chosen.contains(&i) {
                    value_grid[rng.random_range(0..value_grid.len())]
                } else if rng.random::<bool>() {
                    0.5
                } else {
                    1.0
                };
            }
            let score = score_of(&delta, &mut scaled)?;
            report.uncertified_probes += 1;
            if score <= 0.5 {
                report.uncertified_flips += 1;
            }
        }
    }
    Ok(report)
}
