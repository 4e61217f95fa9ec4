use std::path::{Path, PathBuf};

use clap::{Args, Subcommand};
use memrobust::bayesopt::{format_config, CampaignState, SearchSpace};
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::output::{read_text, write_atomic, RunDir, StateLock};
use crate::Global;

#[derive(Subcommand)]
pub enum CampaignCommand {
    /// Create a new campaign state file.
    Init(InitArgs),
    /// Propose the next configuration to fabricate.
    Suggest(StateArgs),
    /// Record a measured usability.
    Tell(TellArgs),
    /// Print the best result and the history.
    Status(StateArgs),
}

#[derive(Args, Serialize)]
pub struct StateArgs {
    #[arg(long, default_value = "campaign.json")]
    pub state: PathBuf,
}

#[derive(Args, Serialize)]
pub struct InitArgs {
    #[arg(long, default_value = "campaign.json")]
    pub state: PathBuf,
    /// JSON search-space definition; the 8400-point fabrication grid otherwise.
    #[arg(long)]
    pub space: Option<PathBuf>,
    /// Random suggestions before the GP takes over.
    #[arg(long, default_value_t = 1)]
    pub n_init: usize,
    /// Replace an existing state file.
    #[arg(long)]
    pub force: bool,
}

#[derive(Args, Serialize)]
pub struct TellArgs {
    #[arg(long, default_value = "campaign.json")]
    pub state: PathBuf,
    /// Comma-separated values, one per dimension, e.g. `MAPbI3,1.5,150,15,200`.
    #[arg(long)]
    pub config: String,
    #[arg(long)]
    pub value: f64,
    /// Measurement timestamp (default: now, RFC 3339).
    #[arg(long)]
    pub measured_at: Option<String>,
    #[arg(long)]
    pub note: Option<String>,
}

fn load(path: &Path) -> CliResult<CampaignState> {
    Ok(CampaignState::from_json(&read_text(path)?)?)
}

fn save(path: &Path, state: &CampaignState) -> CliResult<()> {
    let mut text = state.to_json()?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn run(global: &Global, cmd: CampaignCommand) -> CliResult<()> {
    match cmd {
        CampaignCommand::Init(a) => init(global, a),
        CampaignCommand::Suggest(a) => suggest(global, a),
        CampaignCommand::Tell(a) => tell(global, a),
        CampaignCommand::Status(a) => status(global, a),
    }
}

fn init(global: &Global, args: InitArgs) -> CliResult<()> {
    let _lock = StateLock::acquire(&args.state)?;
    if args.state.exists() && !args.force {
        return Err(CliError::Usage(format!(
            "{} already exists; pass --force to replace it",
            args.state.display()
        )));
    }
    let space = match &args.space {
        Some(p) => SearchSpace::from_json(&read_text(p)?)?,
        None => SearchSpace::fabrication_default(),
    };
    let mut state = CampaignState::new(space, global.seed)?;
    state.n_init = args.n_init.max(1);
    save(&args.state, &state)?;
    RunDir::create(global.out.as_deref())?.write_manifest("campaign init", global.seed, &args)?;
    println!(
        "initialised {} with {} grid points",
        args.state.display(),
        state.space.grid_size()
    );
    Ok(())
}

fn suggest(global: &Global, args: StateArgs) -> CliResult<()> {
    let _lock = StateLock::acquire(&args.state)?;
    let mut state = load(&args.state)?;
    let s = state.suggest()?;
    save(&args.state, &state)?;
    let run = RunDir::create(global.out.as_deref())?;
    run.write_json("suggestion.json", &s)?;
    run.write_manifest("campaign suggest", global.seed, &args)?;
    match s.expected_improvement {
        Some(ei) => println!("{}  (expected improvement {ei:.6})", format_config(&s.config)),
        None => println!("{}  (initial random point)", format_config(&s.config)),
    }
    Ok(())
}

fn tell(global: &Global, args: TellArgs) -> CliResult<()> {
    let _lock = StateLock::acquire(&args.state)?;
    let mut state = load(&args.state)?;
    let parts: Vec<&str> = args.config.split(',').map(str::trim).collect();
    let config = state.space.parse_config(&parts)?;
    let stamp = args
        .measured_at
        .clone()
        .unwrap_or_else(|| chrono::Utc::now().to_rfc3339());
    let warning = state.tell(&config, args.value, &stamp, args.note.clone())?;
    save(&args.state, &state)?;
    RunDir::create(global.out.as_deref())?.write_manifest("campaign tell", global.seed, &args)?;
    if let Some(w) = warning {
        eprintln!("warning: {w}");
    }
    println!(
        "recorded {} = {}  ({} observations)",
        format_config(&config),
        args.value,
        state.history.len()
    );
    Ok(())
}

fn status(global: &Global, args: StateArgs) -> CliResult<()> {
    let state = load(&args.state)?;
    RunDir::create(global.out.as_deref())?.write_manifest("campaign status", global.seed, &args)?;
    println!("grid points   {}", state.space.grid_size());
    println!("observations  {}", state.history.len());
    if let Some(p) = &state.pending {
        println!("pending       {}", format_config(p));
    }
    if let Some(b) = state.best() {
        println!("best          {} = {}", format_config(&b.config), b.value);
    }
    if !state.history.is_empty() {
        println!();
        println!("{:>4}  {:<40}  {:>10}  timestamp", "#", "configuration", "value");
        for (i, o) in state.history.iter().enumerate() {
            println!(
                "{:>4}  {:<40}  {:>10.4}  {}",
                i + 1,
                format_config(&o.config),
                o.value,
                o.timestamp
            );
        }
    }
    Ok(())
}
