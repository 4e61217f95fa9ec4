//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use common::{coordinate_overlap, ei_reference, enumerate_smoothed, gp_posterior, lcis_brute, mlp_forward};
use memrobust::bayesopt::{
    default_alpha_grid, default_alpha_profiles, optimize_alpha, CampaignState, Dimension, GpHyper, GpState, HyperMode,
    SearchSpace,
};
use memrobust::certify::{
    certified_radius, certify_prediction, exact_smoothed, verify_certificate, DEFAULT_VALUE_GRID,
};
use memrobust::experiments::CrossbarDemo;
use memrobust::ivdata::ConductanceSet;
use memrobust::memsim::{evaluate_under_profile, map_weights, realize_profile, realize_trace, synthesize_profile};
use memrobust::neural::{
    loss_and_gradients, make_moons, sample_noise_mask, smoothed_predict, train, Dataset, DenseNetwork,
    MultinomialNoiseSpec, Split, TrainHyper, TrainMethod,
};
use memrobust::nonideality::{compute_profile, estimate_sigma, lcis, NonIdealityProfile, SigmaVariant};
use memrobust::rng::{derive_labeled, seeded};
use memrobust::Matrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};

const SIGMA_REL_TOL: f64 = 0.10;
const ROUND_TRIP_TOL: f64 = 1e-9;
const LOGNORMAL_REL_TOL: f64 = 0.01;
const GRAD_REL_TOL: f64 = 1e-4;
const RADIUS_REL_TOL: f64 = 1e-12;
const WORKED_TOL: f64 = 1e-4;
const BOUND_TOL: f64 = 1e-9;
const MC_SE_MULT: f64 = 3.0;
const ROUNDING_TOL: f64 = 1e-12;
const INTERP_TOL: f64 = 1e-6;
const DENSE_TOL: f64 = 1e-8;
const BO_CAP: usize = 300;
const BO_REACH: usize = 100;
const BO_REACH_FRACTION: f64 = 0.8;
const CLEAN_ACCURACY: f64 = 0.95;
const GAP_MARGIN: f64 = 0.10;
const CROSSBAR_WINS: usize = 8;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn run(id: u32, name: &str, limit: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let outcome = f();
    let elapsed = start.elapsed();
    let (ok, detail) = match outcome {
        Ok(d) if elapsed <= limit => (true, d),
        Ok(d) => (false, format!("{d}; took longer than {:?}", limit)),
        Err(e) => (false, e),
    };
    println!(
        "{} {id:>2} {name}: {detail} [{:.2} s]",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
    ok
}

fn c1_lcis() -> Outcome {
    let mut rng = seeded(1);
    for k in 0..1000 {
        let n = rng.random_range(1..=200);
        let seq: Vec<f64> = (0..n).map(|_| rng.random_range(0..6) as f64).collect();
        let got = lcis(&seq).map_err(|e| e.to_string())?;
        ensure(got == lcis_brute(&seq), || {
            format!("sequence {k}: {got:?} vs {:?}", lcis_brute(&seq))
        })?;
    }
    Ok("1000 sequences match the brute force".into())
}

fn c2_sigma() -> Outcome {
    let mut worst: f64 = 0.0;
    for (k, sigma) in [0.1, 0.3, 0.7].into_iter().enumerate() {
        let mut rng = seeded(100 + k as u64);
        let noise: Normal<f64> = Normal::new(0.0, sigma).unwrap();
        let curve: Vec<f64> = (0..50).map(|j| 1e-5 * (1.0 + j as f64 / 50.0)).collect();
        let per_cycle = (0..10)
            .map(|_| curve.iter().map(|c| c * noise.sample(&mut rng).exp()).collect())
            .collect();
        let cond = ConductanceSet {
            positive_quadrant_index: (0..50).collect(),
            per_cycle,
            mean_smoothed: curve,
        };
        let est = estimate_sigma(&cond, 0, 50).map_err(|e| e.to_string())?;
        ensure(est.n == 500, || format!("n = {}", est.n))?;
        let rel = (est.mle - sigma).abs() / sigma;
        worst = worst.max(rel);
        ensure(rel <= SIGMA_REL_TOL, || {
            format!("σ = {sigma}: MLE {} (rel {rel:.3})", est.mle)
        })?;
        ensure(est.upper95 > est.mle, || {
            format!("σ = {sigma}: upper {} ≤ MLE {}", est.upper95, est.mle)
        })?;
    }
    Ok(format!("worst relative error {worst:.4}"))
}

fn c3_round_trip() -> Outcome {
    let mut rng = seeded(2);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let u: f64 = rng.random_range(0.01..=1.0);
        let m: f64 = rng.random_range(u..=1.0);
        let p = synthesize_profile(u, m).map_err(|e| e.to_string())?;
        let cond = realize_profile(&p).map_err(|e| e.to_string())?;
        let back = compute_profile(&cond, p.required_len, SigmaVariant::Upper95).map_err(|e| e.to_string())?;
        worst = worst.max((back.usability - u).abs());
    }
    ensure(worst <= ROUND_TRIP_TOL, || format!("worst error {worst:e}"))?;
    Ok(format!("100 targets, worst error {worst:.1e}"))
}

fn c4_mapping() -> Outcome {
    let net = DenseNetwork::random(&[100, 99, 2], 0).unwrap();
    ensure(net.theta_count() >= 10_000, || "network too small".into())?;
    let mats = net.weight_matrices();
    let mapped = map_weights(&mats, &NonIdealityProfile::ideal(35), 1).map_err(|e| e.to_string())?;
    let identical = mats
        .iter()
        .zip(&mapped)
        .all(|(a, b)| a.data.iter().zip(&b.data).all(|(x, y)| x.to_bits() == y.to_bits()));
    ensure(identical, || "ideal mapping changed a weight".into())?;

    let p = synthesize_profile(0.5, 0.7).unwrap();
    let w = Matrix::from_rows(&[vec![0.8]]).unwrap();
    let ratio = p.ratio_table[p.required_len - 1];
    let n = 100_000u64;
    let mut sum = 0.0;
    for s in 0..n {
        sum += map_weights(std::slice::from_ref(&w), &p, s).map_err(|e| e.to_string())?[0].data[0] / 0.8;
    }
    let mean = sum / n as f64;
    let want = ratio * (p.sigma() * p.sigma() / 2.0).exp();
    let rel = (mean - want).abs() / want;
    ensure(rel <= LOGNORMAL_REL_TOL, || format!("mean {mean} vs {want}"))?;
    Ok(format!(
        "{} params bit-identical; lognormal mean rel error {rel:.4}",
        net.theta_count()
    ))
}

fn as_layers(net: &DenseNetwork, masks: &[Option<Matrix>]) -> Vec<(Vec<Vec<f64>>, Vec<f64>)> {
    net.layers
        .iter()
        .zip(masks)
        .map(|(l, m)| {
            let rows = (0..l.weights.rows)
                .map(|r| {
                    (0..l.weights.cols)
                        .map(|c| l.weights.get(r, c) * m.as_ref().map_or(1.0, |m| m.get(r, c)))
                        .collect()
                })
                .collect();
            (rows, l.bias.clone())
        })
        .collect()
}

fn gradient_error(masked: bool) -> f64 {
    let mut rng = seeded(5);
    let mut net = DenseNetwork::random(&[2, 4, 3], 9).unwrap();
    for l in &mut net.layers {
        l.bias.iter_mut().for_each(|b| *b = rng.random_range(-0.5..0.5));
    }
    let inputs: Vec<Vec<f64>> = (0..6)
        .map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
        .collect();
    let ds = Dataset::new(inputs, vec![0, 1, 2, 0, 1, 2], vec![Split::Train; 6], 3).unwrap();
    let batch: Vec<usize> = (0..6).collect();
    let masks: Vec<Option<Matrix>> = if masked {
        let spec = MultinomialNoiseSpec::new(0.2, 0.3).unwrap();
        let mut mrng = seeded(44);
        net.layers
            .iter()
            .map(|l| Some(sample_noise_mask(&spec, l.weights.rows, l.weights.cols, &mut mrng).unwrap()))
            .collect()
    } else {
        vec![None; net.layers.len()]
    };
    let loss = |n: &DenseNetwork| {
        let layers = as_layers(n, &masks);
        batch
            .iter()
            .map(|&i| -mlp_forward(&layers, &ds.inputs[i])[ds.labels[i]].ln())
            .sum::<f64>()
            / 6.0
    };
    let (_, grads) = loss_and_gradients(&net, &ds, &batch, &masks).unwrap();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    let mut compare = |an: f64, fd: f64| {
        if an.abs().max(fd.abs()) > 1e-7 {
            worst = worst.max((an - fd).abs() / an.abs().max(fd.abs()));
        }
    };
    for li in 0..net.layers.len() {
        for k in 0..net.layers[li].weights.data.len() {
            let (mut a, mut b) = (net.clone(), net.clone());
            a.layers[li].weights.data[k] += h;
            b.layers[li].weights.data[k] -= h;
            compare(grads.weights[li].data[k], (loss(&a) - loss(&b)) / (2.0 * h));
        }
        for k in 0..net.layers[li].bias.len() {
            let (mut a, mut b) = (net.clone(), net.clone());
            a.layers[li].bias[k] += h;
            b.layers[li].bias[k] -= h;
            compare(grads.biases[li][k], (loss(&a) - loss(&b)) / (2.0 * h));
        }
    }
    worst
}

fn c5_gradients() -> Outcome {
    let clean = gradient_error(false);
    let masked = gradient_error(true);
    ensure(clean <= GRAD_REL_TOL && masked <= GRAD_REL_TOL, || {
        format!("clean {clean:e}, masked {masked:e}")
    })?;
    Ok(format!("max relative error clean {clean:.1e}, masked {masked:.1e}"))
}

#[derive(serde::Deserialize)]
struct OracleCase {
    f_pi0: String,
    theta_count: usize,
    p1: String,
    p2: String,
    radius: String,
}

#[derive(serde::Deserialize)]
struct OracleFile {
    cases: Vec<OracleCase>,
}

fn c6_radius() -> Outcome {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/data/radius_oracle.json");
    let oracle: OracleFile =
        serde_json::from_str(&std::fs::read_to_string(&path).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    ensure(oracle.cases.len() == 200, || {
        format!("{} oracle cases", oracle.cases.len())
    })?;
    let mut worst: f64 = 0.0;
    for c in &oracle.cases {
        let parse = |s: &str| s.parse::<f64>().unwrap();
        let want = parse(&c.radius);
        let got =
            certified_radius(parse(&c.f_pi0), c.theta_count, parse(&c.p1), parse(&c.p2)).map_err(|e| e.to_string())?;
        worst = worst.max((got - want).abs() / want.abs().max(f64::MIN_POSITIVE));
    }
    ensure(worst <= RADIUS_REL_TOL, || format!("worst relative error {worst:e}"))?;
    let boundary = certified_radius(0.5, 7, 0.3, 0.0).unwrap();
    let second = certified_radius(1.0, 11, 0.9, 0.0).unwrap();
    let third = certified_radius(0.75, 3, 0.5, 0.0).unwrap();
    ensure(boundary == 0.0, || format!("boundary radius {boundary}"))?;
    ensure((second - 6.5788).abs() <= WORKED_TOL, || {
        format!("second example {second}")
    })?;
    ensure((third - 0.41504).abs() <= WORKED_TOL, || {
        format!("third example {third}")
    })?;
    Ok(format!(
        "200 tuples, worst relative error {worst:.1e}; examples {boundary}, {second:.4}, {third:.5}"
    ))
}

fn tiny_net(rng: &mut memrobust::rng::Rng, index: usize) -> DenseNetwork {
    let dims: &[usize] = match index % 3 {
        0 => &[2, 2],
        1 => &[3, 2],
        _ => &[2, 2, 2],
    };
    let mut net = DenseNetwork::random(dims, rng.random()).unwrap();
    for l in &mut net.layers {
        l.bias.iter_mut().for_each(|b| *b = rng.random_range(-2.0..2.0));
    }
    net
}

/// Smallest `f_δ − (f − TV)` over single-coordinate perturbations, where TV
/// is bounded through the per-coordinate overlap of the two noise laws.
fn overlap_slack(net: &DenseNetwork, x: &[f64], p1: f64, p2: f64, class: usize, f: f64) -> f64 {
    let theta = net.weights_flat();
    let score = |delta: &[f64]| {
        let scaled: Vec<f64> = theta.iter().zip(delta).map(|(t, d)| t * d).collect();
        enumerate_smoothed(&scaled, p1, p2, &|w| {
            let mut probe = net.clone();
            probe.set_weights_flat(w).unwrap();
            probe.forward(x).unwrap()
        })[class]
    };
    let mut worst = f64::INFINITY;
    for i in 0..theta.len() {
        for v in DEFAULT_VALUE_GRID {
            for rest in [1.0, 0.5] {
                let mut delta = vec![rest; theta.len()];
                delta[i] = v;
                let overlap: f64 = delta.iter().map(|d| coordinate_overlap(*d, p1, p2)).product();
                worst = worst.min(score(&delta) - (f - (1.0 - overlap)));
            }
        }
    }
    worst
}

fn c7_soundness() -> Outcome {
    let mut rng = seeded(7);
    let mut nets = 0;
    let mut draws = 0;
    let mut patterns = 0;
    let mut counterexamples = 0;
    let mut violations = 0;
    let mut worst_slack = f64::INFINITY;
    let mut overlap_worst = f64::INFINITY;
    while nets < 50 {
        draws += 1;
        let net = tiny_net(&mut rng, nets);
        let x: Vec<f64> = (0..net.input_dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let p1 = rng.random_range(0.55..0.7);
        let p2 = rng.random_range(0.0..0.1);
        let cert = certify_prediction(&net, &x, p1, p2, 0).map_err(|e| e.to_string())?;
        if !cert.certified || cert.radius < 1.0 {
            continue;
        }
        ensure(net.theta_count() <= 8, || "net too large".into())?;
        let report = verify_certificate(&net, &x, p1, p2, &DEFAULT_VALUE_GRID, 0).map_err(|e| e.to_string())?;
        patterns += report.tested_patterns;
        counterexamples += report.counterexamples.len();
        violations += report.bound_violations;
        worst_slack = worst_slack.min(report.min_bound_slack);
        overlap_worst = overlap_worst.min(overlap_slack(&net, &x, p1, p2, cert.class, cert.f_pi0));
        nets += 1;
    }
    println!(
        "     7 diagnostic: overlap-based bound f_δ ≥ f − (1 − Π overlap) has worst slack {overlap_worst:.3e} on single-coordinate δ"
    );
    let summary = format!(
        "{nets} nets ({draws} draws), {patterns} patterns, {counterexamples} counterexamples, {violations} λ=1 bound violations (worst slack {worst_slack:.3e})"
    );
    ensure(
        counterexamples == 0 && violations == 0 && worst_slack >= -BOUND_TOL,
        || summary.clone(),
    )?;
    Ok(summary)
}

fn c8_exact_vs_mc() -> Outcome {
    let mut rng = seeded(8);
    let mut worst: f64 = 0.0;
    for k in 0..10u64 {
        let mut net = DenseNetwork::random(&[2, 2, 2], 800 + k).unwrap();
        for l in &mut net.layers {
            l.bias.iter_mut().for_each(|b| *b = rng.random_range(-1.0..1.0));
        }
        ensure(net.theta_count() == 8, || "Θ ≠ 8".into())?;
        let x = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let (p1, p2) = (rng.random_range(0.05..0.4), rng.random_range(0.05..0.4));
        let exact = exact_smoothed(&net, &x, p1, p2).map_err(|e| e.to_string())?;
        let spec = MultinomialNoiseSpec::new(p1, p2).unwrap();
        let mc = smoothed_predict(&net, &x, &spec, 100_000, k).map_err(|e| e.to_string())?;
        for (c, ((&m, &se), &e)) in mc.mean.iter().zip(&mc.std_err).zip(&exact).enumerate() {
            let diff = (m - e).abs();
            ensure(diff <= MC_SE_MULT * se + ROUNDING_TOL, || {
                format!("net {k} class {c}: |{m} − {e}| vs standard error {se}")
            })?;
            if se > 0.0 {
                worst = worst.max(diff / se);
            }
        }
    }
    Ok(format!("10 nets, worst deviation {worst:.2} standard errors"))
}

fn c9_gp() -> Outcome {
    let x: Vec<Vec<f64>> = (0..7).map(|i| vec![i as f64 / 6.0, (i * i % 5) as f64 / 4.0]).collect();
    let y: Vec<f64> = x.iter().map(|p| (3.0 * p[0]).sin() + p[1]).collect();
    let gp = GpState::fit(
        x.clone(),
        y.clone(),
        HyperMode::Fixed(GpHyper {
            length_scale: 0.3,
            signal_var: 1.0,
            noise_var: 0.0,
        }),
    )
    .map_err(|e| e.to_string())?;
    let interp = x
        .iter()
        .zip(&y)
        .map(|(p, t)| (gp.predict(p).0 - t).abs())
        .fold(0.0, f64::max);
    ensure(interp <= INTERP_TOL, || format!("interpolation error {interp:e}"))?;

    let xd = vec![
        vec![0.1, 0.2],
        vec![0.4, 0.9],
        vec![0.8, 0.3],
        vec![0.5, 0.5],
        vec![0.0, 1.0],
    ];
    let yd = vec![0.3, -0.2, 1.1, 0.7, 0.05];
    let h = GpHyper {
        length_scale: 0.35,
        signal_var: 0.8,
        noise_var: 1e-3,
    };
    let gp = GpState::fit(xd.clone(), yd.clone(), HyperMode::Fixed(h)).map_err(|e| e.to_string())?;
    let mut dense: f64 = 0.0;
    for p in [[0.2, 0.2], [0.6, 0.7], [1.0, 0.0]] {
        let (m, _) = gp.predict(&p);
        dense = dense.max((m - gp_posterior(&xd, &yd, 0.35, 0.8, 1e-3, &p).0).abs());
    }
    ensure(dense <= DENSE_TOL, || format!("dense-solve mismatch {dense:e}"))?;

    let space = SearchSpace::new(vec![
        Dimension::categorical("material", &["A", "B", "C"]),
        Dimension::numeric("size", "nm", &[10.0, 20.0, 40.0]),
    ])
    .unwrap();
    let mut state = CampaignState::new(space.clone(), 4).unwrap();
    for (cfg, v) in [(["A", "10"], 0.2), (["C", "40"], 0.5), (["B", "20"], 0.9)] {
        state
            .tell(&space.parse_config(&cfg).unwrap(), v, "t", None)
            .map_err(|e| e.to_string())?;
    }
    let h = state.gp_hyper.ok_or("no fitted hyperparameters")?;
    let xs: Vec<Vec<f64>> = state.history.iter().map(|o| space.encode(&o.config).unwrap()).collect();
    let ys: Vec<f64> = state.history.iter().map(|o| o.value).collect();
    let mut brute: Option<(usize, f64)> = None;
    for i in 0..9 {
        let p = space.encode_index(i);
        if xs.contains(&p) {
            continue;
        }
        let (m, v) = gp_posterior(&xs, &ys, h.length_scale, h.signal_var, h.noise_var, &p);
        let ei = ei_reference(m, v.max(0.0).sqrt(), 0.9, 0.01 * 0.7);
        if brute.is_none_or(|(_, b)| ei > b) {
            brute = Some((i, ei));
        }
    }
    let s = state.suggest().map_err(|e| e.to_string())?;
    let (bi, _) = brute.unwrap();
    ensure(s.index == bi, || {
        format!("suggested {} but brute-force argmax is {bi}", s.index)
    })?;
    Ok(format!(
        "interpolation {interp:.1e}, dense solve {dense:.1e}, 3×3 argmax index {bi}"
    ))
}

fn c10_bo() -> Outcome {
    let space = SearchSpace::fabrication_default();
    let n = space.grid_size();
    ensure(n == 8400, || format!("grid has {n} points"))?;
    let mut bo = Vec::new();
    let mut random = Vec::new();
    for s in 0..20u64 {
        let target = seeded(derive_labeled(s, "target", 0)).random_range(0..n);
        let xs = space.encode_index(target);
        let mut state = CampaignState::new(space.clone(), s).unwrap();
        let mut evals = 0;
        loop {
            let sug = state.suggest().map_err(|e| e.to_string())?;
            evals += 1;
            if sug.index == target || evals >= BO_CAP {
                break;
            }
            let d: f64 = space
                .encode_index(sug.index)
                .iter()
                .zip(&xs)
                .map(|(a, b)| (a - b).powi(2))
                .sum();
            state
                .tell(&sug.config, (-d / 0.1).exp(), "t", None)
                .map_err(|e| e.to_string())?;
        }
        bo.push(evals);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut seeded(derive_labeled(s, "random-search", 0)));
        random.push(order.iter().position(|&i| i == target).unwrap() + 1);
    }
    let median = |v: &mut Vec<usize>| {
        v.sort();
        (v[9] + v[10]) as f64 / 2.0
    };
    let reached = bo.iter().filter(|&&e| e <= BO_REACH).count();
    let (mb, mr) = (median(&mut bo), median(&mut random));
    let summary = format!("median GP-EI {mb} vs random {mr}; {reached}/20 within {BO_REACH}");
    ensure(mb < mr && reached as f64 >= BO_REACH_FRACTION * 20.0, || {
        summary.clone()
    })?;
    Ok(summary)
}

fn c11_gap() -> Outcome {
    let ds = make_moons(300, 0.1, 2024).map_err(|e| e.to_string())?;
    let init = DenseNetwork::random(&[2, 10, 2], 2024).unwrap();
    let hyper = TrainHyper {
        lr: 0.1,
        epochs: 500,
        batch: 16,
        seed: 2024,
    };
    let erm = train(&init, &ds, TrainMethod::Erm, &hyper)
        .map_err(|e| e.to_string())?
        .net;
    let search = optimize_alpha(
        &init,
        &ds,
        &default_alpha_grid(),
        15,
        &default_alpha_profiles(),
        5,
        &hyper,
        2024,
    )
    .map_err(|e| e.to_string())?;
    let bm = train(&init, &ds, TrainMethod::bayes_multi(search.best), &hyper)
        .map_err(|e| e.to_string())?
        .net;
    let mut at = BTreeMap::new();
    for (i, u) in [1.0, 0.5].into_iter().enumerate() {
        let profile = synthesize_profile(u, 1.0).unwrap();
        let seed = derive_labeled(2024, "gap", i as u64);
        let e = evaluate_under_profile(&erm, &profile, &ds, 10, seed)
            .map_err(|e| e.to_string())?
            .0;
        let b = evaluate_under_profile(&bm, &profile, &ds, 10, seed)
            .map_err(|e| e.to_string())?
            .0;
        at.insert(i, (e, b));
    }
    let (e1, b1) = at[&0];
    let (e5, b5) = at[&1];

    let profile = synthesize_profile(0.5, 0.7).unwrap();
    let mut wins = 0;
    for rep in 0..10u64 {
        let demo = CrossbarDemo {
            hyper: TrainHyper {
                seed: rep,
                ..TrainHyper::default()
            },
            ..CrossbarDemo::default()
        };
        let gaps = demo.run(&profile).map_err(|e| e.to_string())?;
        if gaps[1].gap < gaps[0].gap {
            wins += 1;
        }
    }
    let summary = format!(
        "α = ({}, {}); u=1: ERM {e1:.3}, BayesMulti {b1:.3}; u=0.5: ERM {e5:.3}, BayesMulti {b5:.3} (diff {:.3}); crossbar wins {wins}/10",
        search.best.p1,
        search.best.p2,
        b5 - e5
    );
    ensure(
        e1 >= CLEAN_ACCURACY && b1 >= CLEAN_ACCURACY && b5 - e5 >= GAP_MARGIN && wins >= CROSSBAR_WINS,
        || summary.clone(),
    )?;
    Ok(summary)
}

fn bin(dir: &Path, args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_memrobust"))
        .current_dir(dir)
        .env_remove("MEMROBUST_SEED")
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("{args:?} failed: {}", String::from_utf8_lossy(&out.stderr)));
    }
    Ok(out.stdout)
}

/// Result files of a run directory, manifests excluded.
fn results(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut files = BTreeMap::new();
    for entry in std::fs::read_dir(dir).into_iter().flatten().flatten() {
        let path = entry.path();
        if path.file_name().is_some_and(|n| n != "manifest.json") {
            files.insert(
                path.strip_prefix(dir).unwrap().to_path_buf(),
                std::fs::read(&path).unwrap(),
            );
        }
    }
    files
}

/// Runs one scenario in a fresh directory and returns every file it left
/// behind plus the captured stdout.
fn scenario(steps: &[Vec<&str>]) -> Result<BTreeMap<PathBuf, Vec<u8>>, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let trace = realize_trace(&synthesize_profile(0.5, 1.0).unwrap(), "fixture").unwrap();
    std::fs::write(dir.path().join("device.csv"), trace.to_csv_string()).map_err(|e| e.to_string())?;
    let mut all = BTreeMap::new();
    for (k, step) in steps.iter().enumerate() {
        let out = format!("run{k}");
        let mut args = step.clone();
        args.extend(["--out", &out]);
        let stdout = bin(dir.path(), &args)?;
        all.insert(PathBuf::from(format!("stdout{k}")), stdout);
        for (name, bytes) in results(&dir.path().join(&out)) {
            all.insert(Path::new(&out).join(name), bytes);
        }
    }
    for name in ["campaign.json", "device.csv"] {
        if let Ok(bytes) = std::fs::read(dir.path().join(name)) {
            all.insert(PathBuf::from(name), bytes);
        }
    }
    Ok(all)
}

fn c12_determinism() -> Outcome {
    let scenarios: Vec<(&str, Vec<Vec<&str>>)> = vec![
        ("ingest", vec![vec!["ingest", "device.csv"]]),
        (
            "campaign",
            vec![
                vec!["campaign", "init"],
                vec!["campaign", "suggest"],
                vec![
                    "campaign",
                    "tell",
                    "--config",
                    "MAPbBr3,1,250,10,100",
                    "--value",
                    "0.36",
                    "--measured-at",
                    "t0",
                ],
                vec![
                    "campaign",
                    "tell",
                    "--config",
                    "MAPbI3,1.5,150,15,200",
                    "--value",
                    "0.93",
                    "--measured-at",
                    "t1",
                ],
                vec!["campaign", "suggest"],
                vec!["campaign", "status"],
            ],
        ),
        (
            "train/sweep",
            vec![
                vec!["train", "--method", "erm", "--epochs", "40"],
                vec![
                    "train",
                    "--alpha-search",
                    "--alpha-budget",
                    "3",
                    "--alpha-trials",
                    "2",
                    "--epochs",
                    "40",
                ],
                vec![
                    "sweep",
                    "--model",
                    "run0/model.json",
                    "--model",
                    "run1/model.json",
                    "--trials",
                    "3",
                ],
            ],
        ),
        ("certify", vec![vec!["certify"]]),
        (
            "crossbar-demo",
            vec![vec![
                "crossbar-demo",
                "--epochs",
                "60",
                "--programmings",
                "2",
                "--reps",
                "2",
            ]],
        ),
    ];
    let mut files = 0;
    for (name, steps) in &scenarios {
        let a = scenario(steps)?;
        let b = scenario(steps)?;
        ensure(a.keys().eq(b.keys()), || format!("{name}: different file sets"))?;
        for (path, bytes) in &a {
            ensure(b[path] == *bytes, || {
                format!("{name}: {} differs between runs", path.display())
            })?;
        }
        files += a.len();
    }
    Ok(format!("{} scenarios, {files} outputs byte-identical", scenarios.len()))
}

fn main() {
    let secs = Duration::from_secs;
    let results = [
        run(1, "LCIS oracle equivalence", secs(5), c1_lcis),
        run(2, "σ recovery", secs(1), c2_sigma),
        run(3, "usability round trip", secs(1), c3_round_trip),
        run(4, "weight-mapping identity", secs(5), c4_mapping),
        run(5, "gradient correctness", secs(1), c5_gradients),
        run(6, "certified-radius formula", secs(1), c6_radius),
        run(7, "certificate soundness", secs(120), c7_soundness),
        run(8, "exact vs Monte Carlo smoothing", secs(60), c8_exact_vs_mc),
        run(9, "GP/EI correctness", secs(5), c9_gp),
        run(10, "BO efficiency", secs(600), c10_bo),
        run(11, "robustness gap", secs(900), c11_gap),
        run(12, "CLI determinism", secs(600), c12_determinism),
    ];
    let failed = results.iter().filter(|ok| !**ok).count();
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
