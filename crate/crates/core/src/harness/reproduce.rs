use std::io::Write;
use std::path::{Path, PathBuf};

use super::{parse_policy, run_sweep, CapacityBase, CapacityGrid, ExperimentConfig, SweepReport, TraceSource, TOROID_LOCAL_FRAC};
use crate::analysis::{model_hit_report, AnalysisOptions, CharacteristicTime, HitReport};
use crate::engine::{simulate, CacheConfig};
use crate::error::{Error, Result};
use crate::metrics::{ClientRole, SimulationMetrics};
use crate::policy::{PolicyKind, PolicyParams};
use crate::trace::{ClientId, ObjectId};
use crate::workload::{preset, preset_text, GroupedSpec, WorkloadKind};

#[derive(Debug, Clone)]
pub struct ReproduceOptions {
    /// Multiplies the preset's horizon or slot count.
    pub scale: f64,
    pub seeds: Vec<u64>,
    /// Capacity of the simulation/model overlay, percent of total volume.
    pub overlay_pct: f64,
    /// Sweep grid in percent of total volume; `None` picks a default.
    pub percents: Option<Vec<f64>>,
    /// Policy strings; `None` picks a default set for the workload kind.
    pub policies: Option<Vec<String>>,
    pub analysis: AnalysisOptions,
}

impl Default for ReproduceOptions {
    fn default() -> Self {
        ReproduceOptions {
            scale: 1.0,
            seeds: vec![1],
            overlay_pct: 10.0,
            percents: None,
            policies: None,
            analysis: AnalysisOptions::default(),
        }
    }
}

const GROUPED_PERCENTS: &[f64] = &[0.1, 0.2, 0.5, 1.0, 2.0, 3.0, 3.5, 4.0, 5.0, 7.5, 10.0];
const TOROID_PERCENTS: &[f64] = &[0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0];

/// One client/object pair of the simulation/model overlay.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlayRow {
    /// Zero-based group index.
    pub group: usize,
    pub role: ClientRole,
    pub object: ObjectId,
    pub requests: u64,
    pub sim_hit: Option<f64>,
    pub model_hit: f64,
}

impl OverlayRow {
    pub fn abs_diff(&self) -> Option<f64> {
        self.sim_hit.map(|s| (s - self.model_hit).abs())
    }
}

/// Simulated LRU per-client hit ratios next to the model's predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct Overlay {
    pub time: CharacteristicTime,
    pub capacity_bytes: u64,
    pub seed: u64,
    pub rows: Vec<OverlayRow>,
}

/// Rows with fewer simulated requests than this are left out of the
/// headline deviation.
pub const OVERLAY_MIN_REQUESTS: u64 = 100;

impl Overlay {
    /// Largest `|sim − model|` over rows with at least `min_requests`.
    pub fn max_abs_diff(&self, min_requests: u64) -> Option<f64> {
        self.rows
            .iter()
            .filter(|r| r.requests >= min_requests)
            .filter_map(OverlayRow::abs_diff)
            .fold(None, |acc, d| Some(acc.map_or(d, |a: f64| a.max(d))))
    }

    /// Columns `group,client_role,follower_index,object,requests,sim_hit,model_hit,abs_diff`.
    pub fn write_csv(&self, out: &mut impl Write) -> std::io::Result<()> {
        let t = &self.time;
        writeln!(out, "# t_star={}", t.t_star)?;
        writeln!(out, "# b={}", t.b)?;
        writeln!(out, "# residual={}", t.residual)?;
        writeln!(out, "# method={}", t.method)?;
        writeln!(out, "# seed={}", self.seed)?;
        let max = self
            .max_abs_diff(OVERLAY_MIN_REQUESTS)
            .map_or("undefined".to_string(), |d| d.to_string());
        writeln!(out, "# max_abs_diff(requests>={OVERLAY_MIN_REQUESTS})={max}")?;
        writeln!(out, "group,client_role,follower_index,object,requests,sim_hit,model_hit,abs_diff")?;
        for r in &self.rows {
            let (role, idx) = match r.role {
                ClientRole::Leader => ("leader", 0),
                ClientRole::Follower(i) => ("follower", i),
            };
            let opt = |v: Option<f64>| v.map_or("undefined".to_string(), |x| x.to_string());
            writeln!(
                out,
                "{},{role},{idx},{},{},{},{},{}",
                r.group + 1,
                r.object,
                r.requests,
                opt(r.sim_hit),
                r.model_hit,
                opt(r.abs_diff())
            )?;
        }
        Ok(())
    }
}

/// Client id of a model role in a grouped trace.
pub fn role_client(spec: &GroupedSpec, group: usize, role: ClientRole) -> ClientId {
    let leader = spec.leader_client(group);
    match role {
        ClientRole::Leader => leader,
        ClientRole::Follower(i) => ClientId(leader.0 + i as u32),
    }
}

/// Pairs a model report with simulated per-(client, object) tallies.
pub fn overlay_rows(spec: &GroupedSpec, report: &HitReport, metrics: &SimulationMetrics) -> Vec<OverlayRow> {
    report
        .rows
        .iter()
        .map(|r| {
            let t = metrics
                .per_pair
                .get(&(role_client(spec, r.group, r.role), r.object))
                .copied()
                .unwrap_or_default();
            OverlayRow {
                group: r.group,
                role: r.role,
                object: r.object,
                requests: t.requests,
                sim_hit: t.ratio(),
                model_hit: r.hit_prob,
            }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct Reproduction {
    pub preset: String,
    pub sweep: SweepReport,
    /// Present for grouped presets.
    pub overlay: Option<Overlay>,
}

impl Reproduction {
    /// Sweep tables plus `overlay.csv` when there is an overlay.
    pub fn write_all(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let mut written = self.sweep.write_all(dir)?;
        if let Some(o) = &self.overlay {
            let path = dir.join("overlay.csv");
            let mut buf = Vec::new();
            o.write_csv(&mut buf).map_err(|e| Error::io(&path, e))?;
            std::fs::write(&path, buf).map_err(|e| Error::io(&path, e))?;
            written.push(path);
        }
        Ok(written)
    }
}

/// Runs a preset's capacity sweep and, for grouped presets, the LRU
/// simulation/model overlay at `overlay_pct` of the total volume.
pub fn reproduce(name: &str, options: &ReproduceOptions) -> Result<Reproduction> {
    let spec = preset(name)?.scaled(options.scale)?;
    let text = preset_text(name).expect("preset resolved above");
    let (toroid, uniform) = match &spec.kind {
        WorkloadKind::Grouped(g) => (false, matches!(g.sizes, crate::workload::SizeRule::Constant(_))),
        WorkloadKind::Toroid(t) => (true, t.versioning.is_none()),
    };
    let source = TraceSource::Workload { spec: spec.clone() };
    let policies = match &options.policies {
        Some(p) => p.clone(),
        None => {
            let mut p: Vec<&str> = if toroid {
                vec!["lru", "lfu", "sieve", "lfru:2", "lfru:20", "lfrus:2:0.5"]
            } else {
                vec!["lru", "lfu", "sieve", "lfru:20", "static-opt:model"]
            };
            if uniform {
                p.push("belady");
            }
            p.into_iter().map(String::from).collect()
        }
    };
    let policies = policies
        .iter()
        .map(|p| parse_policy(p, &source))
        .collect::<Result<Vec<PolicyParams>>>()?;
    let percents = options.percents.clone().unwrap_or_else(|| {
        if toroid { TOROID_PERCENTS } else { GROUPED_PERCENTS }.to_vec()
    });
    let config = ExperimentConfig {
        source,
        policies,
        capacities: CapacityGrid::Percent(percents),
        base: CapacityBase::Volume,
        local_frac: if toroid { TOROID_LOCAL_FRAC } else { 0.0 },
        seeds: options.seeds.clone(),
        out_dir: PathBuf::from("."),
        config_hash: crate::trace::config_hash(&format!("{text}\n#scale={}", options.scale)),
    };
    let sweep = run_sweep(&config)?;

    let overlay = match &spec.kind {
        WorkloadKind::Grouped(g) => {
            let seed = options.seeds[0];
            let trace = spec.generate(seed)?;
            let bytes = (options.overlay_pct / 100.0 * trace.catalog.total_volume() as f64).round() as u64;
            let model = spec.model()?;
            let report = model_hit_report(&model, bytes as f64, &options.analysis)?;
            let metrics = simulate(&trace, &PolicyParams::new(PolicyKind::Lru), &CacheConfig::new(bytes)?, seed)?;
            Some(Overlay {
                rows: overlay_rows(g, &report, &metrics),
                time: report.time,
                capacity_bytes: bytes,
                seed,
            })
        }
        WorkloadKind::Toroid(_) => None,
    };
    Ok(Reproduction {
        preset: name.to_string(),
        sweep,
        overlay,
    })
}
