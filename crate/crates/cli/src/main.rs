use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use vidauction::engine::{
    run_comparison, run_simulation, ComparisonCell, Mechanism, SimConfig, TraceSource,
};
use vidauction::io::{
    comparison_table, emit_capacity_trace, emit_encounter_trace, generate_synthetic_traces,
    load_config, parse_capacity_trace, parse_encounter_trace, write_result, CapacityTrace,
    ConfigFile, EncounterTrace, OutputFormat,
};
use vidauction::momd::check_sufficient_conditions;
use vidauction::strategy::PolicyKind;
use vidauction::{AuctionError, IoError, SimError};

mod oracle;

/// Set to any non-empty value for progress messages on stderr.
const VERBOSE_ENV: &str = "VIDAUCTION_VERBOSE";

#[derive(Parser)]
#[command(name = "vidauction", version, about = "Auction-based cooperative video streaming simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write per-run results.
    Simulate(SimulateArgs),
    /// Run a grid of configurations over shared replications.
    Compare(CompareArgs),
    /// Check the sufficient conditions for decreasing marginal scores.
    Verify(VerifyArgs),
    /// Brute-force optimum of a small auction instance.
    Oracle(OracleArgs),
    /// Write synthetic capacity and encounter traces.
    GenTraces(GenTracesArgs),
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    /// Directory with capacity.csv and optionally encounters.csv.
    #[arg(long)]
    traces: Option<PathBuf>,
    #[arg(long)]
    mechanism: Option<Mechanism>,
    #[arg(long = "K")]
    k: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "csv")]
    format: OutputFormat,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum Toggle {
    Off,
    On,
}

#[derive(Args, Serialize)]
struct CompareArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    traces: Option<PathBuf>,
    #[arg(long, default_value_t = 200)]
    replications: usize,
    /// Replication `i` uses synthetic traces seeded with `seed + i`.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, value_delimiter = ',')]
    mechanisms: Vec<Mechanism>,
    #[arg(long = "K", value_delimiter = ',')]
    k: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    adaptations: Vec<PolicyKind>,
    #[arg(long, value_delimiter = ',')]
    overhead_energy: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    overhead_time: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    participation: Vec<Toggle>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "csv")]
    #[serde(skip)]
    format: OutputFormat,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    config: PathBuf,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    kind: oracle::Kind,
}

#[derive(Args)]
struct GenTracesArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    step: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

/// Failure classes with fixed exit codes.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Trace(String),
    SizeGuard(String),
    Other(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Other(_) => 1,
            CliError::Config(_) => 2,
            CliError::Trace(_) => 3,
            CliError::SizeGuard(_) => 4,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Trace(_) => "trace",
            CliError::SizeGuard(_) => "size_guard",
            CliError::Other(_) => "runtime",
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Trace(m) | CliError::SizeGuard(m) | CliError::Other(m) => m,
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Config(_) | SimError::Model(_) => CliError::Config(e.to_string()),
            SimError::TraceUnderrun { .. } | SimError::UnreachableCompletion { .. } => {
                CliError::Trace(e.to_string())
            }
            SimError::Auction(AuctionError::SizeGuard(_)) => CliError::SizeGuard(e.to_string()),
            _ => CliError::Other(e.to_string()),
        }
    }
}

fn config_err(e: IoError) -> CliError {
    CliError::Config(e.to_string())
}

fn trace_err(e: IoError) -> CliError {
    CliError::Trace(e.to_string())
}

fn write_err(e: IoError) -> CliError {
    CliError::Other(e.to_string())
}

fn verbose() -> bool {
    std::env::var(VERBOSE_ENV).is_ok_and(|v| !v.is_empty())
}

fn note(msg: impl AsRef<str>) {
    if verbose() {
        eprintln!("{}", msg.as_ref());
    }
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Other(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, contents).map_err(|e| CliError::Other(format!("{}: {e}", path.display())))
}

fn read(path: &Path) -> Result<String, IoError> {
    std::fs::read_to_string(path).map_err(|source| IoError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Capacity (required) and encounter (optional) traces from `dir`.
fn load_traces(dir: &Path, cfg: &ConfigFile) -> Result<(CapacityTrace, EncounterTrace), CliError> {
    let names = cfg.user_names();
    let cap_path = dir.join("capacity.csv");
    let cap_text = read(&cap_path).map_err(trace_err)?;
    let cap = parse_capacity_trace(&cap_text, &cap_path.display().to_string(), Some(&names))
        .map_err(trace_err)?;
    let enc_path = dir.join("encounters.csv");
    let enc = if enc_path.exists() {
        let text = read(&enc_path).map_err(trace_err)?;
        parse_encounter_trace(&text, &enc_path.display().to_string(), Some(&names)).map_err(trace_err)?
    } else {
        cfg.default_encounters()
    };
    Ok((cap, enc))
}

fn synthetic(cfg: &ConfigFile, seed: u64) -> Result<(CapacityTrace, EncounterTrace), CliError> {
    let stats = cfg.capacity_stats().map_err(config_err)?;
    let cap = generate_synthetic_traces(&stats, cfg.traces.horizon_s, cfg.traces.step_s, seed)
        .map_err(config_err)?;
    Ok((cap, cfg.default_encounters()))
}

fn simulate(args: SimulateArgs) -> Result<(), CliError> {
    let mut cfg = load_config(&args.config).map_err(config_err)?;
    if let Some(m) = args.mechanism {
        cfg.mechanism = m;
    }
    if let Some(k) = args.k {
        cfg.segments_per_auction = k;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    let sim = cfg.to_sim_config().map_err(config_err)?;
    let (cap, enc) = match &args.traces {
        Some(dir) => load_traces(dir, &cfg)?,
        None => synthetic(&cfg, cfg.seed)?,
    };
    note(format!("simulating {} users with {}", sim.users.len(), sim.mechanism.as_str()));
    let result = run_simulation(&sim, &cap, &enc)?;

    let files = write_result(&args.out, &result, args.format, sim.record_events).map_err(write_err)?;
    // Snapshot: the effective config plus the exact traces used, so
    // `simulate --config OUT/config.toml --traces OUT` reproduces the run.
    write(&args.out.join("config.toml"), &cfg.effective().to_toml())?;
    write(&args.out.join("capacity.csv"), &emit_capacity_trace(&cap))?;
    write(&args.out.join("encounters.csv"), &emit_encounter_trace(&enc))?;
    for f in files {
        note(format!("wrote {}", f.display()));
    }
    println!(
        "social_welfare={} rebuffer_ratio={} degradation_ratio={} auctions={}",
        vidauction::io::format_sig(result.social_welfare),
        vidauction::io::format_sig(result.rebuffer_ratio),
        vidauction::io::format_sig(result.degradation_ratio),
        result.auction_count
    );
    Ok(())
}

fn grid(base: &ConfigFile, args: &CompareArgs) -> Result<Vec<ComparisonCell>, CliError> {
    fn or<T: Clone>(v: &[T], d: T) -> Vec<T> {
        if v.is_empty() {
            vec![d]
        } else {
            v.to_vec()
        }
    }
    let mut cells = Vec::new();
    for &mech in &or(&args.mechanisms, base.mechanism) {
        for &k in &or(&args.k, base.segments_per_auction) {
            for &adapt in &or(&args.adaptations, base.adaptation.kind) {
                for &energy in &or(&args.overhead_energy, base.overhead_energy_per_auction) {
                    for &time in &or(&args.overhead_time, base.overhead_time_per_auction_s) {
                        let filter = if base.participation.enabled { Toggle::On } else { Toggle::Off };
                        for &part in &or(&args.participation, filter) {
                            let mut c = base.clone();
                            c.mechanism = mech;
                            c.segments_per_auction = k;
                            c.adaptation.kind = adapt;
                            c.overhead_energy_per_auction = energy;
                            c.overhead_time_per_auction_s = time;
                            c.participation.enabled = matches!(part, Toggle::On);
                            c.record_events = false;
                            let config: SimConfig = c.to_sim_config().map_err(config_err)?;
                            let label = format!(
                                "{} K={} {} e={} t={}{}",
                                mech.as_str(),
                                k,
                                adapt.as_str(),
                                energy,
                                time,
                                if c.participation.enabled { " filter" } else { "" }
                            );
                            cells.push(ComparisonCell { label, config });
                        }
                    }
                }
            }
        }
    }
    Ok(cells)
}

fn compare(args: CompareArgs) -> Result<(), CliError> {
    let cfg = load_config(&args.config).map_err(config_err)?;
    let cells = grid(&cfg, &args)?;
    let source = match &args.traces {
        Some(dir) => {
            let (c, e) = load_traces(dir, &cfg)?;
            TraceSource::Fixed(c, e)
        }
        None => TraceSource::Synthetic {
            stats: cfg.capacity_stats().map_err(config_err)?,
            horizon_s: cfg.traces.horizon_s,
            step_s: cfg.traces.step_s,
            encounters: cfg.default_encounters(),
        },
    };
    note(format!("{} cells x {} replications", cells.len(), args.replications));
    let out = run_comparison(&cells, &source, args.replications, args.seed)?;
    let table = comparison_table(&out.rows).render(args.format);
    write(&args.out.join(format!("comparison.{}", args.format.extension())), &table)?;
    write(&args.out.join("config.toml"), &cfg.effective().to_toml())?;
    let grid = serde_json::to_string_pretty(&args).expect("grid serializes");
    write(&args.out.join("grid.json"), &grid)?;
    print!("{}", comparison_table(&out.rows).render(OutputFormat::Csv));
    Ok(())
}

fn verify(args: VerifyArgs) -> Result<(), CliError> {
    let cfg = load_config(&args.config).map_err(config_err)?;
    let profiles = cfg.profiles().map_err(config_err)?;
    let k = cfg.segments_per_auction;
    println!("downloader,bidder,nonnegative,nonincreasing,detail");
    let mut failures = 0;
    let mut pairs = 0;
    for (d, entry) in profiles.iter().zip(&cfg.users) {
        // Airtime cost is priced at the downloader's first mean capacity.
        let cost = match entry.capacity.first() {
            Some(phase) => d.estimated_cost_model(phase.mean_mbps),
            None => d.cost_model(),
        };
        for b in &profiles {
            let report = check_sufficient_conditions(&cost, b, k);
            pairs += 1;
            let mut detail = Vec::new();
            if let Some(r) = report.nonnegative.violating_rate {
                detail.push(format!(
                    "quality {} < cost {} at r={r}",
                    vidauction::io::format_sig(report.nonnegative.lhs),
                    vidauction::io::format_sig(report.nonnegative.rhs)
                ));
            }
            if !report.nonincreasing.pass {
                detail.push(format!(
                    "2K*c(top)+loss {} > |gap| {}",
                    vidauction::io::format_sig(report.nonincreasing.lhs),
                    vidauction::io::format_sig(report.nonincreasing.rhs)
                ));
            }
            if !report.pass() {
                failures += 1;
            }
            let verdict = |ok: bool| if ok { "pass" } else { "fail" };
            println!(
                "{},{},{},{},{}",
                d.name,
                b.name,
                verdict(report.nonnegative.pass),
                verdict(report.nonincreasing.pass),
                detail.join("; ")
            );
        }
    }
    println!("summary: {} of {pairs} pairs pass (K={k})", pairs - failures);
    Ok(())
}

fn gen_traces(args: GenTracesArgs) -> Result<(), CliError> {
    let mut cfg = load_config(&args.config).map_err(config_err)?;
    if let Some(h) = args.horizon {
        cfg.traces.horizon_s = h;
    }
    if let Some(s) = args.step {
        cfg.traces.step_s = s;
    }
    let (cap, enc) = synthetic(&cfg, args.seed.unwrap_or(cfg.seed))?;
    write(&args.out.join("capacity.csv"), &emit_capacity_trace(&cap))?;
    write(&args.out.join("encounters.csv"), &emit_encounter_trace(&enc))?;
    note(format!("wrote traces for {} users to {}", cap.series.len(), args.out.display()));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Compare(a) => compare(a),
        Command::Verify(a) => verify(a),
        Command::Oracle(a) => oracle::run(&a.instance, a.kind),
        Command::GenTraces(a) => gen_traces(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let body = serde_json::json!({ "error": e.kind(), "message": e.message() });
            eprintln!("{body}");
            ExitCode::from(e.code())
        }
    }
}
