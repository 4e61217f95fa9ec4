use std::path::PathBuf;

use clap::Args;
use memrobust::ivdata::{extract_conductance, parse_iv_file};
use memrobust::nonideality::{compute_profile, SigmaVariant, DEFAULT_REQUIRED_LEN};
use serde::Serialize;

use crate::error::CliResult;
use crate::output::RunDir;
use crate::Global;

#[derive(Args, Serialize)]
pub struct IngestArgs {
    /// CSV file with header `voltage,current,cycle`.
    pub iv_file: PathBuf,
    #[arg(long, default_value_t = DEFAULT_REQUIRED_LEN)]
    pub required_len: usize,
    /// `mle`, `upper95` or `literal975`.
    #[arg(long, default_value = "upper95")]
    pub sigma: String,
    /// Odd moving-average window for the mean curve.
    #[arg(long, default_value_t = 5)]
    pub window: usize,
}

pub fn run(global: &Global, args: IngestArgs) -> CliResult<()> {
    let variant: SigmaVariant = args.sigma.parse()?;
    let trace = parse_iv_file(&args.iv_file)?;
    let cond = extract_conductance(&trace)?.smoothed(args.window)?;
    let profile = compute_profile(&cond, args.required_len, variant)?;

    let run = RunDir::create(global.out.as_deref())?;
    run.write_json("profile.json", &profile)?;
    run.write_manifest("ingest", global.seed, &args)?;

    println!("device        {}", trace.device_id);
    println!("cycles        {} x {} points", cond.n_cycles(), cond.n_points());
    println!(
        "lcis          [{}, {}) length {}",
        profile.lcis_start, profile.lcis_end, profile.lcis_len
    );
    println!("sigma_mle     {:.6}", profile.sigma_mle);
    println!("sigma_95      {:.6}", profile.sigma_95);
    println!("usability     {:.3}", profile.usability);
    println!("profile       {}", run.file("profile.json").display());
    Ok(())
}
