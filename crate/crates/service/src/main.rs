use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use hitl_core::metrics::ElectrodeSite;
use hitl_core::par::Execution;
use hitl_core::signal::CalibrationConfig;
use hitl_core::sim::{Scene, SimConfig};
use hitl_core::DeviceSource;
use hitl_service::bench::{self, BenchConfig, BenchDevice, FailureOverride};
use hitl_service::live::{self, LiveConfig};
use hitl_service::script::{run_scripted, scripted_calibration, ScriptedUser, UserProfile};
use hitl_service::session::{replay, SessionConfig};
use hitl_service::trace::{write_lines, TraceFile};

/// Assistive pick-and-place sessions: live server, trace replay and batch runs.
#[derive(Parser)]
#[command(name = "hitl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Serve live sessions over WebSocket.
    Serve(ServeArgs),
    /// Re-run a trace and print its hash.
    Replay(ReplayArgs),
    /// Run scripted sessions for several devices and write reports.
    Bench(BenchArgs),
    /// Run one scripted session and write its trace.
    Record(RecordArgs),
}

#[derive(Args)]
struct WorldArgs {
    /// Scene TOML; the built-in tabletop when omitted.
    #[arg(long)]
    scene: Option<PathBuf>,
    /// Simulation config TOML.
    #[arg(long)]
    sim: Option<PathBuf>,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long)]
    port: u16,
    #[arg(long)]
    device: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Electrode site for sEMG: forearm or ear.
    #[arg(long, default_value = "forearm")]
    site: String,
    /// sEMG calibration TOML.
    #[arg(long)]
    calibration: Option<PathBuf>,
    /// Directory for finished session traces.
    #[arg(long)]
    trace_dir: Option<PathBuf>,
    #[command(flatten)]
    world: WorldArgs,
}

#[derive(Args)]
struct ReplayArgs {
    #[arg(long)]
    trace: PathBuf,
    /// Fail unless the replayed trace hashes to this value.
    #[arg(long)]
    verify_hash: Option<String>,
}

#[derive(Args)]
struct BenchArgs {
    /// Comma-separated: mouse, direct, voice, switch, semg, semg-ear.
    #[arg(long)]
    devices: String,
    /// Sessions per device; each attempts every object once.
    #[arg(long)]
    trials: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Extra grasp failure probability, DEVICE:OBJECT:P. Repeatable.
    #[arg(long = "fail")]
    failures: Vec<String>,
    /// Re-run sessions that fault or are cut off.
    #[arg(long)]
    retry_on_failure: bool,
    /// Run sessions one after another.
    #[arg(long)]
    sequential: bool,
    #[command(flatten)]
    world: WorldArgs,
}

#[derive(Args)]
struct RecordArgs {
    #[arg(long)]
    device: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Keep only the input records.
    #[arg(long)]
    script_only: bool,
    /// Pick order, comma-separated object labels.
    #[arg(long, default_value = "block1,block2,block3,ycb")]
    order: String,
    /// Use the noiseless simulation instead of the default one.
    #[arg(long)]
    ideal: bool,
    #[command(flatten)]
    world: WorldArgs,
}

fn load_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

impl WorldArgs {
    fn load(&self, default_sim: SimConfig) -> Result<(Scene, Option<String>, SimConfig)> {
        let scene = match &self.scene {
            Some(p) => Scene::load(p).with_context(|| format!("loading scene {}", p.display()))?,
            None => Scene::default_tabletop(),
        };
        let sim = match &self.sim {
            Some(p) => load_toml(p)?,
            None => default_sim,
        };
        let scene_file = self.scene.as_ref().map(|p| p.display().to_string());
        Ok((scene, scene_file, sim))
    }
}

fn parse_device(s: &str) -> Result<DeviceSource> {
    DeviceSource::parse(s).with_context(|| format!("unknown device {s:?}"))
}

fn serve(args: ServeArgs) -> Result<()> {
    let device = parse_device(&args.device)?;
    let (scene, scene_file, sim) = args.world.load(SimConfig::default())?;
    let mut cfg = SessionConfig::new(device, scene, sim.with_seed(args.seed));
    cfg.scene_file = scene_file;
    if device == DeviceSource::Semg {
        cfg.site = match args.site.as_str() {
            "forearm" => ElectrodeSite::Forearm,
            "ear" => ElectrodeSite::Ear,
            other => bail!("unknown site {other:?}"),
        };
    }
    if let Some(p) = &args.calibration {
        cfg.calibration = load_toml(p)?;
    }
    let listener = TcpListener::bind(("127.0.0.1", args.port)).with_context(|| format!("binding port {}", args.port))?;
    eprintln!("listening on ws://{}", listener.local_addr()?);
    let mut live = LiveConfig::new(cfg);
    live.trace_dir = args.trace_dir;
    live::serve(listener, live)?;
    Ok(())
}

fn bench_cmd(args: BenchArgs) -> Result<()> {
    let devices = BenchDevice::parse_list(&args.devices)?;
    let mut cfg = BenchConfig::new(devices, args.trials, args.seed);
    let (scene, _, sim) = args.world.load(SimConfig::default())?;
    cfg.scene = scene;
    cfg.sim = sim;
    cfg.failures = args.failures.iter().map(|f| FailureOverride::parse(f)).collect::<Result<_, _>>()?;
    cfg.retry_on_failure = args.retry_on_failure;
    cfg.mode = if args.sequential { Execution::Sequential } else { Execution::Parallel };
    let outcome = bench::run(&cfg)?;
    bench::write_reports(&outcome, &args.out)?;
    print!("{}", hitl_core::metrics::export::success_table(&outcome.report));
    Ok(())
}

fn record_cmd(args: RecordArgs) -> Result<()> {
    let device = parse_device(&args.device)?;
    let default_sim = if args.ideal { SimConfig::ideal() } else { SimConfig::default() };
    let (scene, scene_file, sim) = args.world.load(default_sim)?;
    let mut cfg = SessionConfig::new(device, scene, sim.with_seed(args.seed));
    cfg.scene_file = scene_file;
    if device == DeviceSource::Semg {
        cfg.calibration = scripted_calibration(args.seed, &CalibrationConfig::default())?;
    }
    let order: Vec<&str> = args.order.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    let user = ScriptedUser::new(device, UserProfile::for_device(device), args.seed).with_order(&order);
    let trace = run_scripted(&cfg, user, bench::SESSION_LIMIT)?;
    let lines = if args.script_only { trace.script_lines() } else { trace.lines.clone() };
    write_lines(&args.out, &lines.context("trace lines were not kept")?)?;
    println!("{} trials={} t={:.3}", trace.hash, trace.trials_done, trace.end_t);
    Ok(())
}

/// Exit code 2 covers every way a replay can fail.
fn replay_cmd(args: ReplayArgs) -> ExitCode {
    let result = TraceFile::load(&args.trace)
        .map_err(anyhow::Error::from)
        .and_then(|file| replay(&file).map_err(anyhow::Error::from));
    match result {
        Err(e) => {
            eprintln!("replay failed: {e}");
            ExitCode::from(2)
        }
        Ok(trace) => {
            println!("{}", trace.hash);
            eprintln!(
                "trials={} placed={} t={:.3}",
                trace.trials_done,
                trace.scene.in_zone(hitl_core::sim::Zone::PlaceArea).count(),
                trace.end_t
            );
            match args.verify_hash {
                Some(h) if !h.eq_ignore_ascii_case(&trace.hash) => {
                    eprintln!("hash mismatch: expected {h}");
                    ExitCode::from(2)
                }
                _ => ExitCode::SUCCESS,
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Replay(args) => return replay_cmd(args),
        Command::Serve(args) => serve(args),
        Command::Bench(args) => bench_cmd(args),
        Command::Record(args) => record_cmd(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
