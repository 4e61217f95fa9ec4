//! Independent reference implementations used as test oracles. Nothing here
//! calls into the library's numerical code.
#![allow(dead_code)]

use statrs::distribution::{Continuous, ContinuousCDF, Normal};

/// O(n²) longest strictly increasing contiguous run; earliest start wins.
pub fn lcis_brute(seq: &[f64]) -> (usize, usize) {
    let mut best = (0, 1);
    for s in 0..seq.len() {
        for e in s + 1..=seq.len() {
            let increasing = (s + 1..e).all(|i| seq[i] > seq[i - 1]);
            if increasing && e - s > best.1 - best.0 {
                best = (s, e);
            }
        }
    }
    best
}

/// Gaussian elimination with partial pivoting.
pub fn dense_solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .zip(b)
        .map(|(row, bi)| {
            let mut r = row.clone();
            r.push(*bi);
            r
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap();
        m.swap(col, pivot);
        let pivot_row = m[col].clone();
        for row in m.iter_mut().skip(col + 1) {
            let f = row[col] / pivot_row[col];
            for (v, p) in row.iter_mut().zip(&pivot_row).skip(col) {
                *v -= f * p;
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| m[r][c] * x[c]).sum();
        x[r] = (m[r][n] - s) / m[r][r];
    }
    x
}

pub fn rbf(a: &[f64], b: &[f64], length: f64, signal: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    signal * (-d2 / (2.0 * length * length)).exp()
}

/// GP posterior mean and variance by explicit dense solves, constant prior
/// mean equal to the average target.
pub fn gp_posterior(x: &[Vec<f64>], y: &[f64], length: f64, signal: f64, noise: f64, p: &[f64]) -> (f64, f64) {
    let n = x.len();
    let mu0 = y.iter().sum::<f64>() / n as f64;
    let k: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| rbf(&x[i], &x[j], length, signal) + if i == j { noise } else { 0.0 })
                .collect()
        })
        .collect();
    let ks: Vec<f64> = x.iter().map(|xi| rbf(xi, p, length, signal)).collect();
    let centred: Vec<f64> = y.iter().map(|v| v - mu0).collect();
    let alpha = dense_solve(&k, &centred);
    let v = dense_solve(&k, &ks);
    let mean = mu0 + ks.iter().zip(&alpha).map(|(a, b)| a * b).sum::<f64>();
    let var = signal - ks.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>();
    (mean, var)
}

pub fn ei_reference(mu: f64, s: f64, best: f64, xi: f64) -> f64 {
    let gain = mu - best - xi;
    if s <= 0.0 {
        return gain.max(0.0);
    }
    let n = Normal::standard();
    let z = gain / s;
    gain * n.cdf(z) + s * n.pdf(z)
}

/// Probabilities of factors 0, 0.5, 1.
pub fn factor_probs(p1: f64, p2: f64) -> [f64; 3] {
    [p1, p2, (1.0 - p1 - p2).max(0.0)]
}

/// `Σ_η P(η) g(θ ⊙ η)` by explicit recursion over `{0, 0.5, 1}^Θ`.
pub fn enumerate_smoothed(theta: &[f64], p1: f64, p2: f64, g: &dyn Fn(&[f64]) -> Vec<f64>) -> Vec<f64> {
    fn rec(
        i: usize,
        theta: &[f64],
        cur: &mut Vec<f64>,
        prob: f64,
        probs: &[f64; 3],
        g: &dyn Fn(&[f64]) -> Vec<f64>,
        acc: &mut Vec<f64>,
    ) {
        if i == theta.len() {
            let out = g(cur);
            if acc.is_empty() {
                acc.resize(out.len(), 0.0);
            }
            for (a, o) in acc.iter_mut().zip(out) {
                *a += prob * o;
            }
            return;
        }
        for (f, p) in [0.0, 0.5, 1.0].iter().zip(probs) {
            if *p == 0.0 {
                continue;
            }
            cur.push(theta[i] * f);
            rec(i + 1, theta, cur, prob * p, probs, g, acc);
            cur.pop();
        }
    }
    let probs = factor_probs(p1, p2);
    let mut acc = Vec::new();
    rec(0, theta, &mut Vec::new(), 1.0, &probs, g, &mut acc);
    acc
}

/// Forward pass of a ReLU/softmax MLP written out directly. `layers` holds
/// `(weights out×in row-major, bias)`; the last layer is softmax.
pub fn mlp_forward(layers: &[(Vec<Vec<f64>>, Vec<f64>)], x: &[f64]) -> Vec<f64> {
    let mut a = x.to_vec();
    for (li, (w, b)) in layers.iter().enumerate() {
        let z: Vec<f64> = w
            .iter()
            .zip(b)
            .map(|(row, bi)| bi + row.iter().zip(&a).map(|(p, q)| p * q).sum::<f64>())
            .collect();
        a = if li + 1 == layers.len() {
            let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
            let s: f64 = e.iter().sum();
            e.into_iter().map(|v| v / s).collect()
        } else {
            z.into_iter().map(|v| v.max(0.0)).collect()
        };
    }
    a
}

/// `Σ_η [λ π₀(η) − π_δ(η)]₊` over the joint support, where `π_δ` is the law
/// of `δ ⊙ η`. Both laws factor over coordinates; atoms are keyed by value.
pub fn divergence_by_enumeration(lambda: f64, delta: &[f64], p1: f64, p2: f64) -> f64 {
    let probs = factor_probs(p1, p2);
    let atoms = |scale: f64| -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = Vec::new();
        for (f, p) in [0.0, 0.5, 1.0].iter().zip(probs) {
            let v = scale * f;
            match out.iter_mut().find(|(x, _)| *x == v) {
                Some(e) => e.1 += p,
                None => out.push((v, p)),
            }
        }
        out
    };
    let base: Vec<Vec<(f64, f64)>> = delta.iter().map(|_| atoms(1.0)).collect();
    let shifted: Vec<Vec<(f64, f64)>> = delta.iter().map(|d| atoms(*d)).collect();
    // Union of supports per coordinate.
    let support: Vec<Vec<f64>> = base
        .iter()
        .zip(&shifted)
        .map(|(a, b)| {
            let mut s: Vec<f64> = a.iter().chain(b).map(|(v, _)| *v).collect();
            s.sort_by(f64::total_cmp);
            s.dedup();
            s
        })
        .collect();
    let mass = |atoms: &[(f64, f64)], v: f64| atoms.iter().filter(|(x, _)| *x == v).map(|(_, p)| p).sum::<f64>();
    let n = delta.len();
    let mut idx = vec![0usize; n];
    let mut total = 0.0;
    loop {
        let mut p0 = 1.0;
        let mut pd = 1.0;
        for i in 0..n {
            let v = support[i][idx[i]];
            p0 *= mass(&base[i], v);
            pd *= mass(&shifted[i], v);
        }
        total += (lambda * p0 - pd).max(0.0);
        let mut i = 0;
        loop {
            if i == n {
                return total;
            }
            idx[i] += 1;
            if idx[i] < support[i].len() {
                break;
            }
            idx[i] = 0;
            i += 1;
        }
    }
}

/// Total-variation overlap `Σ_v min(π₀(v), π_δ(v))` of one coordinate.
pub fn coordinate_overlap(delta: f64, p1: f64, p2: f64) -> f64 {
    1.0 - divergence_by_enumeration(1.0, &[delta], p1, p2)
}
