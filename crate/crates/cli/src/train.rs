use std::path::PathBuf;

use clap::Args;
use memrobust::bayesopt::{default_alpha_grid, default_alpha_profiles, optimize_alpha, DEFAULT_ALPHA_TRIALS};
use memrobust::memsim::{mean_std, synthesize_profile, trial_accuracies};
use memrobust::neural::{
    accuracy, make_moons, train, Dataset, DenseNetwork, MultinomialNoiseSpec, Split, TrainHyper, TrainMethod,
};
use memrobust::rng::derive_labeled;
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::output::{num, read_text, RunDir};
use crate::Global;

#[derive(Args, Serialize, Clone)]
pub struct DataArgs {
    /// CSV with header and rows `label,f0,f1,...`; moons are generated otherwise.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, default_value_t = 300)]
    pub samples: usize,
    #[arg(long, default_value_t = 0.1)]
    pub noise: f64,
    /// Seed of the dataset and its train/val/test split.
    #[arg(long, default_value_t = 2024)]
    pub data_seed: u64,
}

impl DataArgs {
    pub fn load(&self) -> CliResult<Dataset> {
        Ok(match &self.data {
            Some(p) => Dataset::from_csv(p, self.data_seed)?,
            None => make_moons(self.samples, self.noise, self.data_seed)?,
        })
    }
}

#[derive(Args, Serialize)]
pub struct TrainArgs {
    /// `erm` or `bayesmulti`.
    #[arg(long, default_value = "bayesmulti")]
    pub method: String,
    #[arg(long, default_value_t = 0.1)]
    pub p1: f64,
    #[arg(long, default_value_t = 0.1)]
    pub p2: f64,
    /// Choose (p1, p2) by GP-EI search over the default α grid.
    #[arg(long)]
    pub alpha_search: bool,
    #[arg(long, default_value_t = 15)]
    pub alpha_budget: usize,
    #[arg(long, default_value_t = DEFAULT_ALPHA_TRIALS)]
    pub alpha_trials: usize,
    #[command(flatten)]
    pub data: DataArgs,
    /// Hidden layer widths, comma-separated.
    #[arg(long, default_value = "10", value_delimiter = ',')]
    pub hidden: Vec<usize>,
    #[arg(long, default_value_t = 0.1)]
    pub lr: f64,
    #[arg(long, default_value_t = 500)]
    pub epochs: usize,
    #[arg(long, default_value_t = 16)]
    pub batch: usize,
}

pub fn run_train(global: &Global, args: TrainArgs) -> CliResult<()> {
    let ds = args.data.load()?;
    let mut dims = vec![ds.dim()];
    dims.extend(&args.hidden);
    dims.push(ds.n_classes);
    let init = DenseNetwork::random(&dims, global.seed)?;
    let hyper = TrainHyper {
        lr: args.lr,
        epochs: args.epochs,
        batch: args.batch,
        seed: global.seed,
    };
    let run = RunDir::create(global.out.as_deref())?;

    let method = match args.method.as_str() {
        "erm" => TrainMethod::Erm,
        "bayesmulti" if args.alpha_search => {
            let res = optimize_alpha(
                &init,
                &ds,
                &default_alpha_grid(),
                args.alpha_budget,
                &default_alpha_profiles(),
                args.alpha_trials,
                &hyper,
                global.seed,
            )?;
            let rows: Vec<Vec<String>> = res
                .trace
                .iter()
                .map(|e| vec![num(e.p1), num(e.p2), num(e.score)])
                .collect();
            run.write_csv("alpha_trace.csv", &["p1", "p2", "score"], &rows)?;
            println!(
                "alpha search  p1={} p2={} score={:.4}",
                res.best.p1, res.best.p2, res.best_score
            );
            TrainMethod::bayes_multi(res.best)
        }
        "bayesmulti" => TrainMethod::bayes_multi(MultinomialNoiseSpec::new(args.p1, args.p2)?),
        other => {
            return Err(CliError::Usage(format!(
                "unknown method `{other}` (expected erm or bayesmulti)"
            )))
        }
    };

    let trained = train(&init, &ds, method, &hyper)?;
    let mut model = trained.net.to_json()?;
    model.push('\n');
    run.write("model.json", model.as_bytes())?;
    let rows: Vec<Vec<String>> = trained
        .history
        .iter()
        .map(|r| vec![r.epoch.to_string(), num(r.train_loss), num(r.val_accuracy)])
        .collect();
    run.write_csv("history.csv", &["epoch", "train_loss", "val_accuracy"], &rows)?;
    run.write_manifest("train", global.seed, &args)?;

    let test = accuracy(&trained.net, &ds, Split::Test)?;
    println!("method        {}", method.name());
    if let Some(s) = method.spec() {
        println!("alpha         p1={} p2={}", s.p1, s.p2);
    }
    println!("test accuracy {test:.4}");
    println!("model         {}", run.file("model.json").display());
    Ok(())
}

#[derive(Args, Serialize)]
pub struct SweepArgs {
    /// Model files; may be repeated.
    #[arg(long = "model", required = true)]
    pub models: Vec<PathBuf>,
    #[command(flatten)]
    pub data: DataArgs,
    /// Usability levels, comma-separated.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "1.0,0.9,0.8,0.7,0.6,0.5,0.4,0.3,0.2,0.1"
    )]
    pub usability: Vec<f64>,
    /// Monotonic factor of the synthesized profiles; 1 gives a pure stochastic
    /// sweep. Levels above it use a monotonic factor equal to the usability.
    #[arg(long, default_value_t = 1.0)]
    pub mono_fraction: f64,
    #[arg(long, default_value_t = 10)]
    pub trials: usize,
}

fn method_label(net: &DenseNetwork) -> &'static str {
    if net.noise_sites.iter().any(|s| s.is_some_and(|s| !s.is_noiseless())) {
        "bayesmulti"
    } else {
        "erm"
    }
}

pub fn run_sweep(global: &Global, args: SweepArgs) -> CliResult<()> {
    let ds = args.data.load()?;
    let mut models: Vec<(String, DenseNetwork)> = Vec::new();
    for path in &args.models {
        let net = DenseNetwork::from_json(&read_text(path)?)?;
        let mut label = method_label(&net).to_string();
        if models.iter().any(|(l, _)| *l == label) {
            label = path
                .file_stem()
                .map_or(label.clone(), |s| s.to_string_lossy().into_owned());
        }
        models.push((label, net));
    }

    let mut per_trial = Vec::new();
    let mut summary = Vec::new();
    for (i, &u) in args.usability.iter().enumerate() {
        let mono = args.mono_fraction.max(u);
        let profile = synthesize_profile(u, mono)?;
        // Both methods see the same weight-mapping draws at a given level.
        let seed = derive_labeled(global.seed, "sweep", i as u64);
        for (label, net) in &models {
            let accs = trial_accuracies(net, &profile, &ds, args.trials, seed)?;
            for (t, a) in accs.iter().enumerate() {
                per_trial.push(vec![num(u), label.clone(), t.to_string(), num(*a)]);
            }
            let (m, s) = mean_std(&accs);
            println!("usability {u:<4} {label:<12} mean {m:.4} std {s:.4}");
            summary.push(vec![num(u), label.clone(), num(m), num(s)]);
        }
    }
    let run = RunDir::create(global.out.as_deref())?;
    run.write_csv(
        "sweep_trials.csv",
        &["usability", "method", "trial", "accuracy"],
        &per_trial,
    )?;
    run.write_csv("sweep_summary.csv", &["usability", "method", "mean", "std"], &summary)?;
    run.write_manifest("sweep", global.seed, &args)?;
    Ok(())
}
