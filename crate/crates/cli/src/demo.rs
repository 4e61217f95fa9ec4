use std::path::PathBuf;

use clap::Args;
use memrobust::experiments::CrossbarDemo;
use memrobust::memsim::synthesize_profile;
use memrobust::neural::{MultinomialNoiseSpec, TrainHyper};
use memrobust::nonideality::NonIdealityProfile;
use serde::Serialize;

use crate::error::CliResult;
use crate::output::{num, read_text, RunDir};
use crate::Global;

#[derive(Args, Serialize)]
pub struct DemoArgs {
    /// Profile JSON from `ingest`; otherwise one is synthesized.
    #[arg(long)]
    pub profile: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    pub usability: f64,
    #[arg(long, default_value_t = 0.7)]
    pub mono_fraction: f64,
    #[arg(long, default_value_t = 0.1)]
    pub p1: f64,
    #[arg(long, default_value_t = 0.1)]
    pub p2: f64,
    /// Layer computed on the crossbar.
    #[arg(long, default_value_t = 0)]
    pub layer: usize,
    /// Programmings averaged per accuracy.
    #[arg(long, default_value_t = 10)]
    pub programmings: usize,
    /// Repetitions with training seeds `seed, seed + 1, …`.
    #[arg(long, default_value_t = 1)]
    pub reps: u64,
    #[arg(long, default_value_t = 300)]
    pub samples: usize,
    #[arg(long, default_value_t = 2024)]
    pub data_seed: u64,
    #[arg(long, default_value_t = 500)]
    pub epochs: usize,
}

pub fn run(global: &Global, args: DemoArgs) -> CliResult<()> {
    let profile = match &args.profile {
        Some(p) => NonIdealityProfile::from_json(&read_text(p)?)?,
        None => synthesize_profile(args.usability, args.mono_fraction)?,
    };
    let spec = MultinomialNoiseSpec::new(args.p1, args.p2)?;
    let mut rows = Vec::new();
    println!(
        "profile usability {:.3}, layer {} on a 10x10 crossbar",
        profile.usability, args.layer
    );
    println!(
        "{:>4}  {:<11} {:>9} {:>9} {:>8}",
        "rep", "method", "software", "hardware", "gap"
    );
    for rep in 0..args.reps {
        let demo = CrossbarDemo {
            samples: args.samples,
            data_seed: args.data_seed,
            hyper: TrainHyper {
                epochs: args.epochs,
                seed: global.seed + rep,
                ..TrainHyper::default()
            },
            spec,
            layer: args.layer,
            programmings: args.programmings,
            ..CrossbarDemo::default()
        };
        let gaps = demo.run(&profile)?;
        for g in &gaps {
            println!(
                "{rep:>4}  {:<11} {:>9.4} {:>9.4} {:>8.4}",
                g.method, g.software_accuracy, g.hardware_accuracy, g.gap
            );
            rows.push(vec![
                rep.to_string(),
                g.method.clone(),
                num(g.software_accuracy),
                num(g.hardware_accuracy),
                num(g.gap),
            ]);
        }
    }
    let run = RunDir::create(global.out.as_deref())?;
    run.write_csv(
        "crossbar_demo.csv",
        &["rep", "method", "software_accuracy", "hardware_accuracy", "gap"],
        &rows,
    )?;
    run.write_manifest("crossbar-demo", global.seed, &args)?;
    Ok(())
}
