//! Browser bindings for the static demo page in `www/`.

use memrobust::bayesopt::{expected_improvement, GpHyper, GpState, HyperMode};
use memrobust::certify::certified_radius;
use memrobust::memsim::{map_weights, synthesize_profile};
use memrobust::Matrix;
use wasm_bindgen::prelude::*;

fn js_err(e: memrobust::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Certified radius over an `nf × np` grid, row-major with `f_pi0` along the
/// rows (0.5 to 1) and `p1` along the columns (0.01 to 0.99). Entries where
/// the radius is undefined are NaN.
#[wasm_bindgen]
pub fn radius_heatmap(theta_count: usize, p2: f64, nf: usize, np: usize) -> Vec<f64> {
    let step = |i: usize, n: usize| if n > 1 { i as f64 / (n - 1) as f64 } else { 0.0 };
    let mut out = Vec::with_capacity(nf * np);
    for i in 0..nf {
        let f = 0.5 + 0.5 * step(i, nf);
        for j in 0..np {
            let p1 = 0.01 + 0.98 * step(j, np);
            out.push(certified_radius(f, theta_count, p1, p2).unwrap_or(f64::NAN));
        }
    }
    out
}

/// Histogram of mapped / target weight ratios for one weight programmed
/// `draws` times under a synthesized profile. Returns `[lo, hi, counts…]`.
#[wasm_bindgen]
pub fn mapping_histogram(
    usability: f64,
    mono_fraction: f64,
    draws: u32,
    bins: usize,
    seed: u64,
) -> Result<Vec<f64>, JsError> {
    let profile = synthesize_profile(usability, mono_fraction).map_err(js_err)?;
    let w = Matrix::from_rows(&[vec![1.0]]).map_err(js_err)?;
    let ratios: Vec<f64> = (0..draws as u64)
        .map(|k| map_weights(std::slice::from_ref(&w), &profile, seed.wrapping_add(k)).map(|m| m[0].data[0]))
        .collect::<Result<_, _>>()
        .map_err(js_err)?;
    let bins = bins.max(1);
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut out = vec![0.0; bins + 2];
    out[0] = lo;
    out[1] = hi;
    for r in ratios {
        let b = (((r - lo) / width) as usize).min(bins - 1);
        out[2 + b] += 1.0;
    }
    Ok(out)
}

/// 1D GP posterior and expected improvement on `n` points of [0, 1].
/// A non-positive `length_scale` fits all hyperparameters by maximum
/// likelihood. Returns `[mean, sd, ei]` per point, flattened.
#[wasm_bindgen]
pub fn gp_ei_1d(xs: &[f64], ys: &[f64], length_scale: f64, noise_var: f64, n: usize) -> Result<Vec<f64>, JsError> {
    let x: Vec<Vec<f64>> = xs.iter().map(|&v| vec![v]).collect();
    let mode = if length_scale > 0.0 {
        let var = if ys.len() > 1 {
            let m = ys.iter().sum::<f64>() / ys.len() as f64;
            ys.iter().map(|y| (y - m).powi(2)).sum::<f64>() / (ys.len() - 1) as f64
        } else {
            0.0
        };
        HyperMode::Fixed(GpHyper {
            length_scale,
            signal_var: if var > 0.0 { var } else { 1.0 },
            noise_var,
        })
    } else {
        HyperMode::Mle
    };
    let gp = GpState::fit(x, ys.to_vec(), mode).map_err(js_err)?;
    let best = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let worst = ys.iter().copied().fold(f64::INFINITY, f64::min);
    let xi = 0.01 * (best - worst);
    let mut out = Vec::with_capacity(3 * n);
    for i in 0..n {
        let p = if n > 1 { i as f64 / (n - 1) as f64 } else { 0.5 };
        let (m, s) = gp.predict(&[p]);
        out.extend([m, s, expected_improvement(m, s, best, xi)]);
    }
    Ok(out)
}
