use std::path::PathBuf;

use clap::Args;
use memrobust::certify::{certify_prediction, verify_certificate, DEFAULT_VALUE_GRID, VERIFY_THETA_CAP};
use memrobust::neural::DenseNetwork;
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::output::{read_text, RunDir};
use crate::Global;

/// Θ = 6 network certified at `x = [1]`, `p1 = 0.6`, `p2 = 0`.
const FIXTURE: &str = include_str!("../fixtures/theta6.json");

#[derive(Args, Serialize)]
pub struct CertifyArgs {
    /// Model file; the bundled Θ = 6 fixture when omitted.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Input point, comma-separated.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub x: Vec<f64>,
    #[arg(long, default_value_t = 0.6)]
    pub p1: f64,
    #[arg(long, default_value_t = 0.0)]
    pub p2: f64,
    /// Values taken by the coordinates outside {0.5, 1} during verification.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "-1,0.1,0.25,2,5",
        allow_hyphen_values = true
    )]
    pub value_grid: Vec<f64>,
}

#[derive(Serialize)]
struct Report {
    f_pi0: f64,
    class: usize,
    theta_count: usize,
    p1: f64,
    p2: f64,
    radius: f64,
    certified: bool,
    exact: bool,
    budget: Option<usize>,
    tested_patterns: usize,
    min_margin: Option<f64>,
    counterexamples: usize,
    bound_violations: usize,
    min_bound_slack: Option<f64>,
    uncertified_probes: usize,
    uncertified_flips: usize,
}

pub fn run(global: &Global, args: CertifyArgs) -> CliResult<()> {
    let net = match &args.model {
        Some(p) => DenseNetwork::from_json(&read_text(p)?)?,
        None => DenseNetwork::from_json(FIXTURE)?,
    };
    let cert = certify_prediction(&net, &args.x, args.p1, args.p2, global.seed)?;
    let mut report = Report {
        f_pi0: cert.f_pi0,
        class: cert.class,
        theta_count: cert.theta_count,
        p1: cert.p1,
        p2: cert.p2,
        radius: cert.radius,
        certified: cert.certified,
        exact: cert.exact,
        budget: cert.budget(),
        tested_patterns: 0,
        min_margin: None,
        counterexamples: 0,
        bound_violations: 0,
        min_bound_slack: None,
        uncertified_probes: 0,
        uncertified_flips: 0,
    };
    if cert.certified && cert.theta_count <= VERIFY_THETA_CAP {
        let v = verify_certificate(&net, &args.x, args.p1, args.p2, &args.value_grid, global.seed)?;
        report.tested_patterns = v.tested_patterns;
        report.min_margin = Some(v.min_margin);
        report.counterexamples = v.counterexamples.len();
        report.bound_violations = v.bound_violations;
        report.min_bound_slack = Some(v.min_bound_slack);
        report.uncertified_probes = v.uncertified_probes;
        report.uncertified_flips = v.uncertified_flips;
    }

    let run = RunDir::create(global.out.as_deref())?;
    run.write_json("certificate.json", &report)?;
    run.write_manifest("certify", global.seed, &args)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    if args.value_grid != DEFAULT_VALUE_GRID {
        eprintln!("note: non-default value grid {:?}", args.value_grid);
    }
    if report.counterexamples > 0 {
        return Err(CliError::Counterexample(report.counterexamples));
    }
    Ok(())
}
