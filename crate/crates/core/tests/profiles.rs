mod common;

use common::lcis_brute;
use memrobust::ivdata::{extract_conductance, parse_iv_str, smooth_mean_curve, ConductanceSet};
use memrobust::memsim::{realize_profile, realize_trace, synthesize_profile};
use memrobust::nonideality::{compute_profile, estimate_sigma, lcis, SigmaVariant};
use memrobust::rng::seeded;
use rand::Rng;
use rand_distr::{Distribution, Normal};

#[test]
fn lcis_matches_brute_force() {
    let mut rng = seeded(1);
    for _ in 0..1000 {
        let n = rng.random_range(1..=200);
        // Small alphabet so equal neighbours and tied runs are common.
        let seq: Vec<f64> = (0..n).map(|_| rng.random_range(0..6) as f64).collect();
        assert_eq!(lcis(&seq).unwrap(), lcis_brute(&seq), "{seq:?}");
    }
}

fn planted(sigma: f64, cycles: usize, points: usize, seed: u64) -> ConductanceSet {
    let mut rng = seeded(seed);
    let noise = Normal::new(0.0, sigma).unwrap();
    let curve: Vec<f64> = (0..points).map(|j| 1e-5 * (1.0 + j as f64 / points as f64)).collect();
    let per_cycle = (0..cycles)
        .map(|_| curve.iter().map(|c| c * noise.sample(&mut rng).exp()).collect())
        .collect();
    ConductanceSet {
        positive_quadrant_index: (0..points).collect(),
        per_cycle,
        mean_smoothed: curve,
    }
}

#[test]
fn sigma_recovers_planted_value() {
    for (k, sigma) in [0.1, 0.3, 0.7].into_iter().enumerate() {
        let cond = planted(sigma, 10, 50, 100 + k as u64);
        let est = estimate_sigma(&cond, 0, 50).unwrap();
        assert_eq!(est.n, 500);
        assert!((est.mle - sigma).abs() / sigma <= 0.10, "σ={sigma} got {}", est.mle);
        assert!(est.upper95 > est.mle);
    }
}

#[test]
fn synthesized_usability_round_trips() {
    let mut rng = seeded(2);
    for _ in 0..100 {
        let u: f64 = rng.random_range(0.01..=1.0);
        let m: f64 = rng.random_range(u..=1.0);
        let p = synthesize_profile(u, m).unwrap();
        assert!((p.usability - u).abs() <= 1e-12);
        let back = compute_profile(&realize_profile(&p).unwrap(), p.required_len, SigmaVariant::Upper95).unwrap();
        assert!((back.usability - u).abs() <= 1e-9, "u={u} m={m} got {}", back.usability);
    }
}

#[test]
fn realized_sweep_file_round_trips_through_ingest() {
    let p = synthesize_profile(0.5, 1.0).unwrap();
    let text = realize_trace(&p, "fixture").unwrap().to_csv_string();
    let trace = parse_iv_str(&text, "fixture").unwrap();
    assert_eq!(trace.to_csv_string(), text);
    let cond = extract_conductance(&trace).unwrap();
    let back = compute_profile(&cond, p.required_len, SigmaVariant::Upper95).unwrap();
    assert!((back.usability - 0.5).abs() < 1e-6);
}

#[test]
fn smoothing_matches_hand_average() {
    let cond = ConductanceSet::from_rows(vec![vec![1.0, 2.0, 9.0, 2.0, 1.0]]).unwrap();
    let got = smooth_mean_curve(&cond, 3).unwrap();
    let want = [1.5, 4.0, 13.0 / 3.0, 4.0, 1.5];
    for (g, w) in got.iter().zip(want) {
        assert!((g - w).abs() < 1e-15);
    }
}
