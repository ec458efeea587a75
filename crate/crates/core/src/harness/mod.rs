//! Capacity sweeps, policy comparisons and preset reproduction.
//!
//! Experiment files are TOML:
//!
//! ```toml
//! policies = ["lru", "lfu", "lfru:20", "belady"]
//! seeds = [1, 2, 3]
//! capacities = { percent = [0.1, 0.5, 1.0, 2.0] }   # or { bytes = [...] }
//! capacity_base = "volume"       # or "footprint"; percent base
//! local_frac = 0.0               # default 0.05 for toroid workloads, else 0
//! out = "results"                # default "."
//!
//! [trace]
//! preset = "grouped-4.1"         # or workload = "file.toml", or file = "trace.txt"
//! scale = 1.0
//! ```

mod compare;
mod reproduce;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::Deserialize;

pub use compare::{compare_policies, Multiplier, PolicyComparison};
pub use reproduce::{overlay_rows, reproduce, role_client, Overlay, OverlayRow, ReproduceOptions, Reproduction, OVERLAY_MIN_REQUESTS};

use crate::engine::{simulate_with, CacheConfig, SimOptions};
use crate::error::{Error, Result};
use crate::metrics::Tally;
use crate::policy::{PolicyKind, PolicyParams, StaticRates};
use crate::trace::{config_hash, read_trace, ClientId, ObjectCatalog, Trace};
use crate::workload::{parse_workload, preset, WorkloadKind, WorkloadSpec};

/// Version of the sweep CSV layouts.
pub const SCHEMA_VERSION: u32 = 1;

pub const TOROID_LOCAL_FRAC: f64 = 0.05;

#[derive(Debug, Clone)]
pub enum TraceSource {
    Workload { spec: WorkloadSpec },
    File { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CapacityBase {
    /// Sum of all catalogued object sizes.
    Volume,
    /// Sum of the sizes of objects the trace actually requests.
    Footprint,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CapacityGrid {
    Bytes(Vec<u64>),
    Percent(Vec<f64>),
}

impl CapacityGrid {
    pub fn len(&self) -> usize {
        match self {
            CapacityGrid::Bytes(v) => v.len(),
            CapacityGrid::Percent(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn validate(&self) -> Result<()> {
        let increasing = match self {
            CapacityGrid::Bytes(v) => v.first().is_some_and(|&b| b > 0) && v.windows(2).all(|w| w[0] < w[1]),
            CapacityGrid::Percent(v) => {
                v.first().is_some_and(|&p| p > 0.0)
                    && v.iter().all(|p| p.is_finite())
                    && v.windows(2).all(|w| w[0] < w[1])
            }
        };
        if !increasing {
            return Err(Error::config(
                "capacity grid must be non-empty, positive and strictly increasing",
            ));
        }
        Ok(())
    }

    /// `(percent, bytes)` of entry `i` against `base` bytes.
    fn resolve(&self, i: usize, base: u64) -> Result<(Option<f64>, u64)> {
        match self {
            CapacityGrid::Bytes(v) => Ok((None, v[i])),
            CapacityGrid::Percent(v) => {
                let bytes = (v[i] / 100.0 * base as f64).round() as u64;
                if bytes == 0 {
                    return Err(Error::config(format!(
                        "{}% of {base} bytes rounds to an empty cache",
                        v[i]
                    )));
                }
                Ok((Some(v[i]), bytes))
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub source: TraceSource,
    pub policies: Vec<PolicyParams>,
    pub capacities: CapacityGrid,
    pub base: CapacityBase,
    pub local_frac: f64,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
    pub config_hash: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentFile {
    trace: TraceFile,
    policies: Vec<String>,
    capacities: CapacitiesFile,
    #[serde(default)]
    capacity_base: Option<String>,
    local_frac: Option<f64>,
    #[serde(default = "default_seeds")]
    seeds: Vec<u64>,
    out: Option<PathBuf>,
}

fn default_seeds() -> Vec<u64> {
    vec![1]
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TraceFile {
    preset: Option<String>,
    workload: Option<PathBuf>,
    file: Option<PathBuf>,
    #[serde(default = "one")]
    scale: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CapacitiesFile {
    bytes: Option<Vec<u64>>,
    percent: Option<Vec<f64>>,
}

/// Resolves `static-opt:model` against the workload's model; everything
/// else goes through the ordinary policy parser.
pub fn parse_policy(text: &str, source: &TraceSource) -> Result<PolicyParams> {
    if text.trim().eq_ignore_ascii_case("static-opt:model") {
        let TraceSource::Workload { spec } = source else {
            return Err(Error::config("static-opt:model needs a generated workload"));
        };
        let rates = spec.model()?.weighted_rates();
        return Ok(PolicyParams::static_opt(StaticRates::Model(Arc::new(rates))));
    }
    text.parse()
}

impl ExperimentConfig {
    /// Parses an experiment file. Relative paths resolve against `dir`.
    pub fn parse(text: &str, dir: &Path) -> Result<Self> {
        let f: ExperimentFile =
            toml::from_str(text).map_err(|e| Error::config(e.message().trim().to_string()))?;
        let t = f.trace;
        let source = match (t.preset, t.workload, t.file) {
            (Some(name), None, None) => TraceSource::Workload {
                spec: preset(&name)?.scaled(t.scale)?,
            },
            (None, Some(p), None) => {
                let path = dir.join(p);
                let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
                let name = path.display().to_string();
                TraceSource::Workload {
                    spec: parse_workload(&name, &text)?.scaled(t.scale)?,
                }
            }
            (None, None, Some(p)) => TraceSource::File { path: dir.join(p) },
            _ => return Err(Error::config("[trace] needs exactly one of preset, workload or file")),
        };
        let capacities = match (f.capacities.bytes, f.capacities.percent) {
            (Some(b), None) => CapacityGrid::Bytes(b),
            (None, Some(p)) => CapacityGrid::Percent(p),
            _ => return Err(Error::config("capacities needs exactly one of bytes or percent")),
        };
        let base = match f.capacity_base.as_deref() {
            None | Some("volume") => CapacityBase::Volume,
            Some("footprint") => CapacityBase::Footprint,
            Some(o) => return Err(Error::config(format!("unknown capacity_base {o:?}"))),
        };
        let toroid = matches!(&source, TraceSource::Workload { spec } if matches!(spec.kind, WorkloadKind::Toroid(_)));
        let policies = f
            .policies
            .iter()
            .map(|p| parse_policy(p, &source))
            .collect::<Result<Vec<_>>>()?;
        let config = ExperimentConfig {
            source,
            policies,
            capacities,
            base,
            local_frac: f.local_frac.unwrap_or(if toroid { TOROID_LOCAL_FRAC } else { 0.0 }),
            seeds: f.seeds,
            out_dir: dir.join(f.out.unwrap_or_else(|| PathBuf::from("."))),
            config_hash: config_hash(text),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.policies.is_empty() {
            return Err(Error::config("at least one policy is required"));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("at least one seed is required"));
        }
        let mut seen = self.seeds.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != self.seeds.len() {
            return Err(Error::config("seeds must be distinct"));
        }
        self.capacities.validate()?;
        CacheConfig::new(1)?.with_local_fraction(self.local_frac)?;
        for p in &self.policies {
            p.validate()?;
        }
        Ok(())
    }

    /// The trace each seed runs on. Generated workloads use the seed; a
    /// trace file is read once and shared by every seed.
    pub fn traces(&self) -> Result<Vec<Arc<Trace>>> {
        match &self.source {
            TraceSource::Workload { spec } => self
                .seeds
                .par_iter()
                .map(|&s| spec.generate(s).map(Arc::new))
                .collect(),
            TraceSource::File { path } => {
                let t = Arc::new(read_trace(path)?);
                Ok(vec![t; self.seeds.len()])
            }
        }
    }

    fn base_bytes(&self, trace: &Trace) -> u64 {
        match self.base {
            CapacityBase::Volume => trace.catalog.total_volume(),
            CapacityBase::Footprint => trace.catalog.footprint_volume(&trace.events),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub policy: String,
    pub capacity_index: usize,
    pub capacity_pct: Option<f64>,
    pub capacity_bytes: u64,
    pub seed: u64,
    pub requests: u64,
    pub hits: u64,
    /// `None` when no request reached the main cache.
    pub hit_ratio: Option<f64>,
    pub clients: Vec<(ClientId, Tally)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    /// Ordered by policy (configuration order), capacity, seed.
    pub rows: Vec<SweepRow>,
    pub config_hash: String,
    pub version: String,
}

/// Mean and spread of one (policy, capacity) cell across seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub policy: String,
    pub capacity_index: usize,
    pub capacity_pct: Option<f64>,
    pub capacity_bytes: (u64, u64),
    pub seeds: Vec<u64>,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    /// Standard error of the mean; 0 for a single seed.
    pub stderr: f64,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), |x| x.to_string())
}

fn fmt_pct(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| x.to_string())
}

impl SweepReport {
    fn header(&self, out: &mut impl Write, table: &str) -> std::io::Result<()> {
        writeln!(
            out,
            "# corrcache {table} schema={SCHEMA_VERSION} version={} config_hash={}",
            self.version, self.config_hash
        )
    }

    pub fn policies(&self) -> Vec<String> {
        let mut v: Vec<String> = Vec::new();
        for r in &self.rows {
            if !v.contains(&r.policy) {
                v.push(r.policy.clone());
            }
        }
        v
    }

    /// Columns `policy,capacity_pct,capacity_bytes,seed,requests,hits,hit_ratio`.
    pub fn write_csv(&self, out: &mut impl Write) -> std::io::Result<()> {
        self.header(out, "sweep")?;
        writeln!(out, "policy,capacity_pct,capacity_bytes,seed,requests,hits,hit_ratio")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.policy,
                fmt_pct(r.capacity_pct),
                r.capacity_bytes,
                r.seed,
                r.requests,
                r.hits,
                fmt_opt(r.hit_ratio)
            )?;
        }
        Ok(())
    }

    /// Columns `policy,capacity_pct,capacity_bytes,seed,client,requests,hits,hit_ratio`.
    pub fn write_clients_csv(&self, out: &mut impl Write) -> std::io::Result<()> {
        self.header(out, "sweep-clients")?;
        writeln!(out, "policy,capacity_pct,capacity_bytes,seed,client,requests,hits,hit_ratio")?;
        for r in &self.rows {
            for (c, t) in &r.clients {
                writeln!(
                    out,
                    "{},{},{},{},{},{},{},{}",
                    r.policy,
                    fmt_pct(r.capacity_pct),
                    r.capacity_bytes,
                    r.seed,
                    c,
                    t.requests,
                    t.hits,
                    fmt_opt(t.ratio())
                )?;
            }
        }
        Ok(())
    }

    /// Per (policy, capacity) mean, min, max and standard error over the
    /// seeds with a defined ratio.
    pub fn aggregate(&self) -> Vec<AggregateRow> {
        let mut cells: BTreeMap<(usize, usize), Vec<&SweepRow>> = BTreeMap::new();
        let policies = self.policies();
        for r in &self.rows {
            let p = policies.iter().position(|x| *x == r.policy).expect("listed");
            cells.entry((p, r.capacity_index)).or_default().push(r);
        }
        cells
            .into_values()
            .filter_map(|rows| {
                let ratios: Vec<f64> = rows.iter().filter_map(|r| r.hit_ratio).collect();
                if ratios.is_empty() {
                    return None;
                }
                let n = ratios.len() as f64;
                let mean = ratios.iter().sum::<f64>() / n;
                let stderr = if ratios.len() > 1 {
                    let var = ratios.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
                    (var / n).sqrt()
                } else {
                    0.0
                };
                let first = rows[0];
                Some(AggregateRow {
                    policy: first.policy.clone(),
                    capacity_index: first.capacity_index,
                    capacity_pct: first.capacity_pct,
                    capacity_bytes: (
                        rows.iter().map(|r| r.capacity_bytes).min().unwrap_or(0),
                        rows.iter().map(|r| r.capacity_bytes).max().unwrap_or(0),
                    ),
                    seeds: rows.iter().filter(|r| r.hit_ratio.is_some()).map(|r| r.seed).collect(),
                    mean,
                    min: ratios.iter().copied().fold(f64::INFINITY, f64::min),
                    max: ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                    stderr,
                })
            })
            .collect()
    }

    /// Columns `policy,capacity_pct,capacity_bytes_min,capacity_bytes_max,seeds,mean,min,max,stderr`;
    /// `seeds` lists the contributing seeds separated by `;`.
    pub fn write_aggregate_csv(&self, out: &mut impl Write) -> std::io::Result<()> {
        self.header(out, "sweep-aggregate")?;
        writeln!(
            out,
            "policy,capacity_pct,capacity_bytes_min,capacity_bytes_max,seeds,mean,min,max,stderr"
        )?;
        for a in self.aggregate() {
            let seeds: Vec<String> = a.seeds.iter().map(u64::to_string).collect();
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                a.policy,
                fmt_pct(a.capacity_pct),
                a.capacity_bytes.0,
                a.capacity_bytes.1,
                seeds.join(";"),
                a.mean,
                a.min,
                a.max,
                a.stderr
            )?;
        }
        Ok(())
    }

    /// Writes `sweep.csv`, `sweep_clients.csv`, `sweep_aggregate.csv` and,
    /// with two or more policies, `compare_gaps.csv` and `compare_multipliers.csv`.
    pub fn write_all(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut written = Vec::new();
        let mut emit = |name: &str, f: &dyn Fn(&mut Vec<u8>) -> std::io::Result<()>| -> Result<()> {
            let path = dir.join(name);
            let mut buf = Vec::new();
            f(&mut buf).map_err(|e| Error::io(&path, e))?;
            std::fs::write(&path, buf).map_err(|e| Error::io(&path, e))?;
            written.push(path);
            Ok(())
        };
        emit("sweep.csv", &|b| self.write_csv(b))?;
        emit("sweep_clients.csv", &|b| self.write_clients_csv(b))?;
        emit("sweep_aggregate.csv", &|b| self.write_aggregate_csv(b))?;
        if self.policies().len() >= 2 {
            let cmp = compare_policies(self)?;
            emit("compare_gaps.csv", &|b| cmp.write_gaps_csv(b))?;
            emit("compare_multipliers.csv", &|b| cmp.write_multipliers_csv(b))?;
        }
        Ok(written)
    }
}

/// Runs every (policy, capacity, seed) cell. Cells run concurrently; rows
/// come back in configuration order. All policies of one seed share one
/// trace.
pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepReport> {
    config.validate()?;
    let traces = config.traces()?;
    if let Some(p) = config.policies.iter().find(|p| p.kind == PolicyKind::Belady) {
        for t in &traces {
            if t.catalog.uniform_size().is_none() {
                return Err(Error::config(format!(
                    "policy {p}: the trace has objects of different sizes"
                )));
            }
        }
    }
    let mut cells = Vec::new();
    for p in &config.policies {
        for c in 0..config.capacities.len() {
            for (s, &seed) in config.seeds.iter().enumerate() {
                cells.push((p, c, s, seed));
            }
        }
    }
    let rows = cells
        .into_par_iter()
        .map(|(p, c, s, seed)| {
            let trace = &traces[s];
            let ctx = || format!("policy {p}, capacity #{}, seed {seed}", c + 1);
            let (pct, bytes) = config
                .capacities
                .resolve(c, config.base_bytes(trace))
                .map_err(|e| e.context(ctx()))?;
            run_cell(trace, p, bytes, config.local_frac, seed).map_err(|e| e.context(ctx())).map(
                |(requests, hits, clients)| SweepRow {
                    policy: p.to_string(),
                    capacity_index: c,
                    capacity_pct: pct,
                    capacity_bytes: bytes,
                    seed,
                    requests,
                    hits,
                    hit_ratio: (requests > 0).then(|| hits as f64 / requests as f64),
                    clients,
                },
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepReport {
        rows,
        config_hash: config.config_hash.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
    })
}

type CellResult = (u64, u64, Vec<(ClientId, Tally)>);

fn run_cell(trace: &Trace, p: &PolicyParams, bytes: u64, local_frac: f64, seed: u64) -> Result<CellResult> {
    let cache = CacheConfig::new(bytes)?.with_local_fraction(local_frac)?;
    let mut policy = p.build()?;
    let m = simulate_with(trace, policy.as_mut(), &cache, seed, SimOptions::default())?;
    Ok((m.forwarded, m.hits, m.per_client.into_iter().collect()))
}

/// The catalog a source's traces use, without generating them.
pub fn source_catalog(source: &TraceSource) -> Result<ObjectCatalog> {
    match source {
        TraceSource::Workload { spec } => match &spec.kind {
            WorkloadKind::Grouped(g) => g.catalog(),
            WorkloadKind::Toroid(t) => t.catalog(),
        },
        TraceSource::File { path } => Ok(read_trace(path)?.catalog),
    }
}
