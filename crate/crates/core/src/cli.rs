//! Command-line front end. Data goes to files; diagnostics go to stderr.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use crate::ap_locator::{build_database, read_apdb_csv, write_apdb_csv, ApDatabase};
use crate::config::RunConfig;
use crate::coverage::{write_coverage_csv, write_coverage_users_csv, CoverageSeries};
use crate::error::{Error, Result};
use crate::evaluation::evaluate;
use crate::experiments::{
    run_experiments, write_coverage_svg, write_grid_csv, write_histograms_csv, ExperimentContext, SamplingStrategy,
    Scenario,
};
use crate::pairing::{pair_observations, write_pairs_csv};
use crate::reconstructor::{build_timeline, read_timeline_csv, write_timeline_csv};
use crate::synthgen::{
    generate_world, nonempty_fraction, read_truth_aps_csv, read_truth_positions_csv, simulate_sensors_with_stats,
    write_dataset,
};
use crate::trace_model::{ingest_traces, TraceSet};

#[derive(Debug, Parser)]
#[command(name = "wifitrace", version, about = "Locate WiFi access points and reconstruct mobility from scan logs")]
pub struct Cli {
    /// key = value file overriding built-in defaults
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Worker threads (default: all cores). Output does not depend on it.
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    pub threads: Option<u64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset with ground truth
    Synth(SynthArgs),
    /// Pair GPS with WiFi and build the AP database
    Locate(LocateArgs),
    /// Bin scans into per-user position timelines
    Reconstruct(ReconstructArgs),
    /// Daily time coverage of a database
    Coverage(CoverageArgs),
    /// Sampling strategy x data-sharing scenario grid
    Experiment(ExperimentArgs),
    /// Score outputs against ground-truth files
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub users: Option<u64>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub days: Option<u64>,
    #[arg(long)]
    pub routine_change_day: Option<usize>,
    #[arg(long)]
    pub colocated_fraction: Option<f64>,
    #[arg(long)]
    pub gps_noise_m: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    #[arg(long, default_value = "gps.jsonl")]
    pub gps: PathBuf,
    #[arg(long, default_value = "wifi.jsonl")]
    pub wifi: PathBuf,
}

#[derive(Debug, Args)]
pub struct LocateArgs {
    #[command(flatten)]
    pub traces: TraceArgs,
    #[arg(long, default_value = "apdb.csv")]
    pub out: PathBuf,
    /// Also write the paired observations
    #[arg(long)]
    pub pairs: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    #[command(flatten)]
    pub traces: TraceArgs,
    #[arg(long, default_value = "apdb.csv")]
    pub apdb: PathBuf,
    #[arg(long, default_value = "timeline.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CoverageArgs {
    #[command(flatten)]
    pub traces: TraceArgs,
    #[arg(long, default_value = "apdb.csv")]
    pub apdb: PathBuf,
    #[arg(long, default_value = "coverage.csv")]
    pub out: PathBuf,
    #[arg(long)]
    pub users_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyKind {
    Initial,
    Random,
    Top,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScenarioArg {
    Global,
    Personal,
    GlobalExcludingSelf,
}

impl From<ScenarioArg> for Scenario {
    fn from(s: ScenarioArg) -> Self {
        match s {
            ScenarioArg::Global => Scenario::Global,
            ScenarioArg::Personal => Scenario::Personal,
            ScenarioArg::GlobalExcludingSelf => Scenario::GlobalExcludingSelf,
        }
    }
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// Directory holding gps.jsonl and wifi.jsonl
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, value_delimiter = ',', required = true)]
    pub strategy: Vec<StrategyKind>,
    #[arg(long, value_delimiter = ',', default_value = "7")]
    pub days: Vec<u32>,
    #[arg(long, value_delimiter = ',', default_value = "0.01")]
    pub fraction: Vec<f64>,
    /// Random sampling rate in paired fixes per user-day; replaces --fraction
    #[arg(long, value_delimiter = ',')]
    pub fixes_per_day: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "20")]
    pub k: Vec<usize>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "global,personal,global-excluding-self")]
    pub scenario: Vec<ScenarioArg>,
    /// One SVG line plot per grid cell
    #[arg(long)]
    pub plots: bool,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Directory holding truth_aps.csv and truth_positions.csv
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, default_value = "apdb.csv")]
    pub apdb: PathBuf,
    #[arg(long, default_value = "timeline.csv")]
    pub timeline: PathBuf,
    /// JSON report
    #[arg(long, default_value = "metrics.json")]
    pub out: PathBuf,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

fn finish(mut w: BufWriter<File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

fn load_traces(a: &TraceArgs) -> Result<TraceSet> {
    let (traces, report) = ingest_traces(&a.gps, &a.wifi)?;
    info!("{report}");
    Ok(traces)
}

fn load_apdb(path: &Path) -> Result<ApDatabase> {
    read_apdb_csv(open(path)?)
}

/// Defaults, then the config file, then flags.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.world.seed = s;
    }
    Ok(cfg)
}

pub fn run(cli: Cli) -> Result<()> {
    let mut cfg = resolve_config(&cli)?;
    if let Some(n) = cli.threads {
        // a second call in the same process fails; the first pool stays
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n as usize).build_global();
    }
    match cli.command {
        Command::Synth(a) => {
            let w = &mut cfg.world;
            if let Some(v) = a.users {
                w.n_users = v as usize;
            }
            if let Some(v) = a.days {
                w.n_days = v as usize;
            }
            if a.routine_change_day.is_some() {
                w.routine_change_day = a.routine_change_day;
            }
            if let Some(v) = a.colocated_fraction {
                w.colocated_fraction = v;
            }
            if let Some(v) = a.gps_noise_m {
                w.gps_noise_m = v;
            }
            cmd_synth(&cfg, &a.out)
        }
        Command::Locate(a) => cmd_locate(&cfg, &load_traces(&a.traces)?, &a.out, a.pairs.as_deref()),
        Command::Reconstruct(a) => {
            let db = load_apdb(&a.apdb)?;
            let traces = load_traces(&a.traces)?;
            let timelines = build_timeline(traces.scans(), &db, cfg.bin_ms);
            let mut w = create(&a.out)?;
            write_timeline_csv(&timelines, &mut w)?;
            finish(w, &a.out)?;
            let bins: usize = timelines.iter().map(|t| t.bins_with_data()).sum();
            let est: usize = timelines.iter().map(|t| t.estimated_bins()).sum();
            info!("{} users, {bins} bins with data, {est} estimated", timelines.len());
            Ok(())
        }
        Command::Coverage(a) => {
            let db = load_apdb(&a.apdb)?;
            let traces = load_traces(&a.traces)?;
            let timelines = build_timeline(traces.scans(), &db, cfg.bin_ms);
            let series = CoverageSeries::from_timelines(&timelines, traces.start().unwrap_or_default());
            let mut w = create(&a.out)?;
            write_coverage_csv(&series, "global", "full", "all", &mut w)?;
            finish(w, &a.out)?;
            if let Some(p) = &a.users_out {
                let mut w = create(p)?;
                write_coverage_users_csv(&series, "global", "full", "all", &mut w)?;
                finish(w, p)?;
            }
            match series.overall_mean() {
                Some(m) => info!("mean coverage {m:.4} over {} user-days", series.per_user_day.len()),
                None => info!("no WiFi data"),
            }
            Ok(())
        }
        Command::Experiment(a) => cmd_experiment(&cfg, &a),
        Command::Evaluate(a) => {
            let truth_aps = read_truth_aps_csv(open(&a.dataset.join("truth_aps.csv"))?)?;
            let truth_pos = read_truth_positions_csv(open(&a.dataset.join("truth_positions.csv"))?)?;
            let db = load_apdb(&a.apdb)?;
            let tl = read_timeline_csv(open(&a.timeline)?)?;
            let report = evaluate(&truth_aps, &truth_pos, &db, &tl, cfg.bin_ms, cfg.locator.earth_radius_m);
            let mut w = create(&a.out)?;
            serde_json::to_writer_pretty(&mut w, &report)?;
            writeln!(w).map_err(|e| Error::io(&a.out, e))?;
            finish(w, &a.out)?;
            info!("{report}");
            Ok(())
        }
    }
}

pub fn cmd_synth(cfg: &RunConfig, out: &Path) -> Result<()> {
    let gt = generate_world(&cfg.world)?;
    let (traces, stats) = simulate_sensors_with_stats(&gt, &cfg.world);
    write_dataset(&gt, &traces, out)?;
    info!(
        "{} users, {} days: {} static APs, {} mobile APs, {} GPS fixes, {} scans ({:.1}% non-empty), {} sightings",
        cfg.world.n_users,
        cfg.world.n_days,
        gt.static_aps.len(),
        gt.mobile_aps.len(),
        stats.fixes,
        stats.scans,
        100.0 * nonempty_fraction(&traces).unwrap_or(0.0),
        stats.sightings
    );
    Ok(())
}

pub fn cmd_locate(cfg: &RunConfig, traces: &TraceSet, out: &Path, pairs: Option<&Path>) -> Result<()> {
    cfg.pairing.validate()?;
    cfg.locator.validate()?;
    let obs = pair_observations(traces, &cfg.pairing);
    if let Some(p) = pairs {
        let mut w = create(p)?;
        write_pairs_csv(&obs, &mut w)?;
        finish(w, p)?;
    }
    let db = build_database(&obs, &cfg.locator, "all observations");
    let mut w = create(out)?;
    write_apdb_csv(&db, &mut w)?;
    finish(w, out)?;
    info!("{} paired observations", obs.len());
    info!("{}", db.census());
    Ok(())
}

fn grid(ctx: &ExperimentContext<'_>, cfg: &RunConfig, a: &ExperimentArgs) -> Result<Vec<SamplingStrategy>> {
    let mut cells = Vec::new();
    for kind in &a.strategy {
        match kind {
            StrategyKind::Initial => cells.extend(a.days.iter().map(|&days| SamplingStrategy::InitialPeriod { days })),
            StrategyKind::Random => {
                let seed = cfg.world.seed;
                if a.fixes_per_day.is_empty() {
                    cells.extend(a.fraction.iter().map(|&f| SamplingStrategy::RandomFraction { f, seed }));
                } else {
                    for &r in &a.fixes_per_day {
                        let f = ctx.fraction_for_fixes_per_day(r)?;
                        info!("{r} fixes per user-day -> fraction {f:.6}");
                        cells.push(SamplingStrategy::RandomFraction { f, seed });
                    }
                }
            }
            StrategyKind::Top => cells.extend(a.k.iter().map(|&k| SamplingStrategy::TopRouters { k })),
        }
    }
    for c in &cells {
        c.validate()?;
    }
    Ok(cells)
}

pub fn cmd_experiment(cfg: &RunConfig, a: &ExperimentArgs) -> Result<()> {
    let traces = load_traces(&TraceArgs {
        gps: a.dataset.join("gps.jsonl"),
        wifi: a.dataset.join("wifi.jsonl"),
    })?;
    let ctx = ExperimentContext::new(&traces, cfg.experiment())?;
    let scenarios: Vec<Scenario> = a.scenario.iter().map(|&s| s.into()).collect();
    let mut all = Vec::new();
    fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    for strategy in grid(&ctx, cfg, a)? {
        let results = run_experiments(&ctx, strategy, &scenarios)?;
        for r in &results {
            match r.mean_coverage {
                Some(m) => info!("{} {} {}: mean coverage {m:.4}", strategy.name(), strategy.param(), r.scenario),
                None => info!("{} {} {}: no WiFi data", strategy.name(), strategy.param(), r.scenario),
            }
        }
        if a.plots {
            let p = a.out.join(format!("plot_{}_{}.svg", strategy.name(), strategy.param()));
            let mut w = create(&p)?;
            write_coverage_svg(&results, &format!("{} {}", strategy.name(), strategy.param()), &mut w)?;
            finish(w, &p)?;
        }
        all.extend(results);
    }
    let p = a.out.join("experiment_grid.csv");
    let mut w = create(&p)?;
    write_grid_csv(&all, &mut w)?;
    finish(w, &p)?;
    let p = a.out.join("histograms.csv");
    let mut w = create(&p)?;
    write_histograms_csv(&all, &mut w)?;
    finish(w, &p)
}
