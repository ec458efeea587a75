use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use corrcache::analysis::{model_hit_report, AnalysisOptions};
use corrcache::engine::{Access, CacheState, MainStream};
use corrcache::harness::{reproduce, run_sweep, ExperimentConfig, ReproduceOptions};
use corrcache::policy::{EvictionPolicy, Lfru, PolicyKind};
use corrcache::trace::{read_trace, write_trace_to};
use corrcache::workload::{parse_workload, preset, preset_names, WorkloadSpec};
use corrcache::{simulate_with, CacheConfig, Error, PolicyParams, Result, SimOptions};

/// Cache simulation and working-set analysis for correlated request streams.
///
/// Exit codes: 0 success, 1 I/O failure, 2 configuration or domain error,
/// 3 internal consistency failure.
#[derive(Parser)]
#[command(name = "corrcache", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a trace from a preset name or a workload TOML file.
    Generate {
        /// Preset name (see `presets`) or path to a workload file.
        source: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Multiplies the horizon (grouped) or slot count (toroid).
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        /// Trace file to write; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Replay a trace file through one cache and policy.
    Simulate(SimulateArgs),
    /// Run a capacity sweep described by an experiment TOML file.
    Sweep {
        config: PathBuf,
        /// Output directory; overrides the file's `out` key.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve the working-set model and tabulate per-client hit probabilities.
    Analyze {
        /// Grouped preset name or path to a grouped workload file.
        model: String,
        /// Bytes, or a percentage of the total data volume such as `2.5%`.
        #[arg(long)]
        capacity: String,
        /// Monte-Carlo samples for delay distributions without a quadrature path.
        #[arg(long, default_value_t = 1_000_000)]
        mc_samples: usize,
        #[arg(long, default_value_t = 0)]
        mc_seed: u64,
        /// Report CSV to write; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a preset's capacity sweep, plus the simulation/model overlay for
    /// grouped presets.
    Reproduce {
        preset: String,
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        /// Seeds, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "1")]
        seeds: Vec<u64>,
        /// Overlay capacity in percent of the total data volume.
        #[arg(long, default_value_t = 10.0)]
        overlay_pct: f64,
        /// Sweep grid in percent of the total data volume, comma separated.
        /// Defaults depend on the workload kind.
        #[arg(long, value_delimiter = ',')]
        percents: Option<Vec<f64>>,
        /// Policies, comma separated. Defaults depend on the workload kind.
        #[arg(long, value_delimiter = ',')]
        policies: Option<Vec<String>>,
        #[arg(long, default_value_t = 1_000_000)]
        mc_samples: usize,
        #[arg(long, default_value = "reproduce")]
        out: PathBuf,
    },
    /// List the built-in workload presets.
    Presets,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    trace: PathBuf,
    /// lru, lfu, sieve, belady, static-opt, lfru:<w> or lfrus:<w>:<gamma>.
    #[arg(long)]
    policy: String,
    /// Bytes, or a percentage of the total data volume such as `2.5%`.
    #[arg(long)]
    capacity: String,
    /// Per-client local LRU cache size as a fraction of the capacity.
    #[arg(long, default_value_t = 0.0)]
    local_frac: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Directory for metrics.csv and summary.txt; summary on stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the follow matrix (lfru/lfrus only) as `c1,c2,count` blocks.
    #[arg(long)]
    follow_dump: Option<PathBuf>,
    /// Main-cache requests between follow matrix checkpoints; 0 dumps only
    /// the final state.
    #[arg(long, default_value_t = 0)]
    follow_every: u64,
}

fn parse_capacity(text: &str, total_volume: u64) -> Result<u64> {
    let bad = || Error::config(format!("bad capacity {text:?}"));
    let bytes = match text.trim().strip_suffix('%') {
        Some(p) => {
            let p: f64 = p.trim().parse().map_err(|_| bad())?;
            if !(p > 0.0 && p.is_finite()) {
                return Err(bad());
            }
            (p / 100.0 * total_volume as f64).round() as u64
        }
        None => text.trim().parse().map_err(|_| bad())?,
    };
    if bytes == 0 {
        return Err(Error::config(format!("capacity {text:?} resolves to 0 bytes")));
    }
    Ok(bytes)
}

fn load_workload(source: &str) -> Result<WorkloadSpec> {
    if preset_names().iter().any(|n| n == source) {
        return preset(source);
    }
    let path = Path::new(source);
    if !path.exists() {
        return Err(Error::config(format!(
            "{source:?} is neither a preset ({}) nor a file",
            preset_names().join(", ")
        )));
    }
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_workload(source, &text)
}

fn write_file(path: &Path, f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<()> {
    let mut buf = Vec::new();
    f(&mut buf).map_err(|e| Error::io(path, e))?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

fn write_out(out: Option<&Path>, f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<()> {
    match out {
        Some(p) => write_file(p, f),
        None => {
            let mut buf = Vec::new();
            f(&mut buf).map_err(|e| Error::io("<stdout>", e))?;
            match std::io::stdout().write_all(&buf) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Error::io("<stdout>", e)),
                _ => Ok(()),
            }
        }
    }
}

/// LFRU that snapshots its follow matrix every `every` main-cache requests.
struct FollowDump {
    inner: Lfru,
    every: u64,
    seen: u64,
    buf: Vec<u8>,
}

impl FollowDump {
    fn checkpoint(&mut self) {
        let _ = writeln!(self.buf, "# checkpoint={}", self.seen);
        let _ = self.inner.tracker().write_csv(&mut self.buf);
    }
}

impl EvictionPolicy for FollowDump {
    fn name(&self) -> String {
        self.inner.name()
    }
    fn prepare(&mut self, stream: &MainStream, config: &CacheConfig) -> Result<()> {
        self.inner.prepare(stream, config)
    }
    fn observe(&mut self, state: &CacheState, access: &Access, hit: bool) {
        self.inner.observe(state, access, hit);
        self.seen += 1;
        if self.every > 0 && self.seen % self.every == 0 {
            self.checkpoint();
        }
    }
    fn on_hit(&mut self, state: &CacheState, access: &Access) {
        self.inner.on_hit(state, access)
    }
    fn on_admit(&mut self, state: &CacheState, access: &Access) {
        self.inner.on_admit(state, access)
    }
    fn victim(&mut self, state: &CacheState, access: &Access) -> Option<usize> {
        self.inner.victim(state, access)
    }
    fn on_evict(&mut self, state: &CacheState, key: usize) {
        self.inner.on_evict(state, key)
    }
}

fn simulate_cmd(a: SimulateArgs) -> Result<()> {
    let params: PolicyParams = a.policy.parse()?;
    let trace = read_trace(&a.trace)?;
    let capacity = parse_capacity(&a.capacity, trace.catalog.total_volume())?;
    let config = CacheConfig::new(capacity)?.with_local_fraction(a.local_frac)?;
    let opts = SimOptions::default();
    let metrics = match &a.follow_dump {
        Some(path) => {
            let gamma = match params.kind {
                PolicyKind::Lfru => None,
                PolicyKind::Lfrus => Some(params.gamma),
                _ => return Err(Error::config("--follow-dump needs an lfru or lfrus policy")),
            };
            let mut p = FollowDump {
                inner: Lfru::new(params.window, gamma).with_name(params.to_string()),
                every: a.follow_every,
                seen: 0,
                buf: Vec::new(),
            };
            let m = simulate_with(&trace, &mut p, &config, a.seed, opts)?;
            p.checkpoint();
            write_file(path, |b| b.write_all(&p.buf))?;
            m
        }
        None => {
            let mut p = params.build()?;
            simulate_with(&trace, p.as_mut(), &config, a.seed, opts)?
        }
    };
    let hash = trace.meta.config_hash.clone();
    match &a.out {
        Some(dir) => {
            write_file(&dir.join("metrics.csv"), |b| metrics.write_csv(b))?;
            write_file(&dir.join("summary.txt"), |b| metrics.write_summary(&hash, b))
        }
        None => write_out(None, |b| metrics.write_summary(&hash, b)),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate {
            source,
            seed,
            scale,
            out,
        } => {
            let trace = load_workload(&source)?.scaled(scale)?.generate(seed)?;
            write_out(out.as_deref(), |b| write_trace_to(&trace, b))
        }
        Command::Simulate(a) => simulate_cmd(a),
        Command::Sweep { config, out } => {
            let text = std::fs::read_to_string(&config).map_err(|e| Error::io(&config, e))?;
            let dir = config.parent().unwrap_or(Path::new("."));
            let mut cfg = ExperimentConfig::parse(&text, dir)?;
            if let Some(o) = out {
                cfg.out_dir = o;
            }
            let report = run_sweep(&cfg)?;
            for p in report.write_all(&cfg.out_dir)? {
                eprintln!("wrote {}", p.display());
            }
            Ok(())
        }
        Command::Analyze {
            model,
            capacity,
            mc_samples,
            mc_seed,
            out,
        } => {
            let model = load_workload(&model)?.model()?;
            let b = parse_capacity(&capacity, model.total_volume().round() as u64)?;
            let opts = AnalysisOptions {
                mc_samples,
                mc_seed,
                ..Default::default()
            };
            let report = model_hit_report(&model, b as f64, &opts)?;
            write_out(out.as_deref(), |w| report.write_csv(w))
        }
        Command::Reproduce {
            preset,
            scale,
            seeds,
            overlay_pct,
            percents,
            policies,
            mc_samples,
            out,
        } => {
            let opts = ReproduceOptions {
                scale,
                seeds,
                overlay_pct,
                percents,
                policies,
                analysis: AnalysisOptions {
                    mc_samples,
                    ..Default::default()
                },
            };
            let r = reproduce(&preset, &opts)?;
            for p in r.write_all(&out)? {
                eprintln!("wrote {}", p.display());
            }
            if let Some(o) = &r.overlay {
                if let Some(d) = o.max_abs_diff(corrcache::harness::OVERLAY_MIN_REQUESTS) {
                    eprintln!("overlay max |sim - model| = {d}");
                }
            }
            Ok(())
        }
        Command::Presets => {
            for n in preset_names() {
                println!("{n}");
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
