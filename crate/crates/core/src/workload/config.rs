//! Workload files (TOML) and the named presets, which are themselves
//! embedded workload files.
//!
//! ```toml
//! kind = "grouped"
//! horizon = 2000.0
//! sizes = { even = 2, odd = 5 }     # or sizes = 1
//!
//! [[group]]
//! objects = [1, 1000]               # first and last id, inclusive
//! rate = 10.0
//! zipf = 0.8
//! followers = 8
//! delay = { kind = "structured", delta = 10.0 }
//! ```
//!
//! Delay kinds: `structured {delta}`, `list {delays}`, `uniform {alpha, beta}`
//! (i.i.d.) or `uniform {bounds = [[a, b], ...]}`, `normal {mean, std}`.
//!
//! ```toml
//! kind = "toroid"
//! slots = 20000
//! newly_visible_only = false
//! groups = [[4, 8, 12], [20, 40]]   # follower delays per group
//! dynamics = { kind = "shuffle", period = 50 }
//! versioning = { near = 10.0, far = 50.0, sizes = [1000000, 500000, 100000] }
//! ```

use std::sync::Arc;

use serde::Deserialize;

use super::{gen_grouped_trace, gen_toroid_trace, Dynamics, GroupSpec, GroupedSpec, SizeRule, ToroidSpec, Versioning};
use crate::analysis::{DelaySpec, NormalDelays, WorkingSetModel};
use crate::error::{Error, Result};
use crate::trace::{config_hash, Trace};

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum FileSpec {
    Grouped {
        horizon: f64,
        #[serde(default)]
        sizes: Option<SizesFile>,
        #[serde(rename = "group")]
        groups: Vec<GroupFile>,
    },
    Toroid(ToroidFile),
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum SizesFile {
    Constant(u64),
    EvenOdd { even: u64, odd: u64 },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GroupFile {
    objects: [u32; 2],
    rate: f64,
    #[serde(default)]
    zipf: f64,
    #[serde(default)]
    followers: usize,
    #[serde(default)]
    delay: Option<DelayFile>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum DelayFile {
    Structured {
        delta: f64,
    },
    List {
        delays: Vec<f64>,
    },
    Uniform {
        alpha: Option<f64>,
        beta: Option<f64>,
        bounds: Option<Vec<[f64; 2]>>,
    },
    Normal {
        mean: f64,
        std: f64,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ToroidFile {
    slots: u64,
    groups: Vec<Vec<u32>>,
    side: Option<f64>,
    objects: Option<usize>,
    speed: Option<f64>,
    turn_period: Option<u64>,
    radius: Option<f64>,
    object_size: Option<u64>,
    #[serde(default)]
    newly_visible_only: bool,
    versioning: Option<VersioningFile>,
    dynamics: Option<DynamicsFile>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct VersioningFile {
    near: Option<f64>,
    far: Option<f64>,
    sizes: Option<[u64; 3]>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum DynamicsFile {
    None,
    Shuffle {
        period: u64,
    },
    Switch {
        period: u64,
        probabilities: Vec<f64>,
        step: u32,
    },
}

fn delay_spec(d: Option<DelayFile>, followers: usize, g: usize) -> Result<DelaySpec> {
    let bad = |m: &str| Error::config(format!("group {}: {m}", g + 1));
    Ok(match d {
        None if followers == 0 => DelaySpec::StructuredList { delays: vec![] },
        None => return Err(bad("followers need a delay specification")),
        Some(DelayFile::Structured { delta }) => DelaySpec::Structured { delta },
        Some(DelayFile::List { delays }) => DelaySpec::StructuredList { delays },
        Some(DelayFile::Uniform { alpha, beta, bounds }) => match (alpha, beta, bounds) {
            (Some(a), Some(b), None) => DelaySpec::iid_uniform(a, b, followers),
            (None, None, Some(bounds)) => DelaySpec::Uniform {
                bounds: bounds.into_iter().map(|[a, b]| (a, b)).collect(),
            },
            _ => return Err(bad("uniform delays need either alpha and beta, or bounds")),
        },
        Some(DelayFile::Normal { mean, std }) => DelaySpec::Joint(Arc::new(
            NormalDelays::new(vec![mean; followers], vec![std; followers]).map_err(|e| bad(&e))?,
        )),
    })
}

/// A parsed workload: what to generate, plus the text it came from.
#[derive(Debug, Clone)]
pub struct WorkloadSpec {
    pub name: String,
    pub kind: WorkloadKind,
    pub config_hash: String,
}

#[derive(Debug, Clone)]
pub enum WorkloadKind {
    Grouped(GroupedSpec),
    Toroid(ToroidSpec),
}

impl WorkloadSpec {
    /// Multiplies the horizon (or slot count) by `scale`.
    pub fn scaled(mut self, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::config(format!("scale {scale} must be positive")));
        }
        match &mut self.kind {
            WorkloadKind::Grouped(g) => g.horizon *= scale,
            WorkloadKind::Toroid(t) => t.slots = ((t.slots as f64 * scale).round() as u64).max(1),
        }
        Ok(self)
    }

    pub fn generate(&self, seed: u64) -> Result<Trace> {
        let mut trace = match &self.kind {
            WorkloadKind::Grouped(g) => gen_grouped_trace(g, seed)?,
            WorkloadKind::Toroid(t) => gen_toroid_trace(t, seed)?,
        };
        trace.meta.config_hash = self.config_hash.clone();
        trace.meta.extra.insert("workload".into(), self.name.clone());
        match &self.kind {
            WorkloadKind::Grouped(g) => trace.meta.extra.insert("horizon".into(), g.horizon.to_string()),
            WorkloadKind::Toroid(t) => trace.meta.extra.insert("slots".into(), t.slots.to_string()),
        };
        Ok(trace)
    }

    /// The analytical model, for grouped workloads.
    pub fn model(&self) -> Result<WorkingSetModel> {
        match &self.kind {
            WorkloadKind::Grouped(g) => g.model(),
            WorkloadKind::Toroid(_) => Err(Error::config(format!(
                "{} is a toroid workload; the analytical model needs a grouped one",
                self.name
            ))),
        }
    }
}

/// Parses a workload file's text. `name` labels the result.
pub fn parse_workload(name: &str, text: &str) -> Result<WorkloadSpec> {
    let file: FileSpec = toml::from_str(text)
        .map_err(|e| Error::config(format!("{name}: {}", e.message().trim())))?;
    let kind = match file {
        FileSpec::Grouped { horizon, sizes, groups } => {
            let sizes = match sizes {
                None => SizeRule::Constant(1),
                Some(SizesFile::Constant(s)) => SizeRule::Constant(s),
                Some(SizesFile::EvenOdd { even, odd }) => SizeRule::EvenOdd { even, odd },
            };
            let groups = groups
                .into_iter()
                .enumerate()
                .map(|(g, f)| {
                    let [first, last] = f.objects;
                    if last < first {
                        return Err(Error::config(format!("group {}: object range is reversed", g + 1)));
                    }
                    Ok(GroupSpec {
                        first_object: first,
                        objects: last - first + 1,
                        leader_rate: f.rate,
                        zipf: f.zipf,
                        followers: f.followers,
                        delays: delay_spec(f.delay, f.followers, g)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let spec = GroupedSpec { groups, horizon, sizes };
            spec.validate()?;
            WorkloadKind::Grouped(spec)
        }
        FileSpec::Toroid(f) => {
            let d = ToroidSpec::default();
            let spec = ToroidSpec {
                side: f.side.unwrap_or(d.side),
                objects: f.objects.unwrap_or(d.objects),
                speed: f.speed.unwrap_or(d.speed),
                turn_period: f.turn_period.unwrap_or(d.turn_period),
                radius: f.radius.unwrap_or(d.radius),
                groups: f.groups,
                slots: f.slots,
                object_size: f.object_size.unwrap_or(d.object_size),
                versioning: f.versioning.map(|v| {
                    let d = Versioning::default();
                    Versioning {
                        near: v.near.unwrap_or(d.near),
                        far: v.far.unwrap_or(d.far),
                        sizes: v.sizes.unwrap_or(d.sizes),
                    }
                }),
                newly_visible_only: f.newly_visible_only,
                dynamics: match f.dynamics {
                    None | Some(DynamicsFile::None) => Dynamics::None,
                    Some(DynamicsFile::Shuffle { period }) => Dynamics::OrderShuffle { period },
                    Some(DynamicsFile::Switch {
                        period,
                        probabilities,
                        step,
                    }) => Dynamics::LeaderSwitch {
                        period,
                        probabilities,
                        step,
                    },
                },
            };
            spec.validate()?;
            WorkloadKind::Toroid(spec)
        }
    };
    Ok(WorkloadSpec {
        name: name.to_string(),
        kind,
        config_hash: config_hash(text),
    })
}

const TOROID_TRACE1_GROUPS: &str = "groups = [[4, 8, 12, 16, 20, 24, 28, 32], [8, 16, 24, 32], [20, 40]]";

const PRESETS: &[(&str, &str)] = &[
    (
        "grouped-4.1",
        r#"kind = "grouped"
horizon = 2000.0
sizes = 1

[[group]]
objects = [1, 1000]
rate = 10.0
zipf = 0.8
followers = 8
delay = { kind = "structured", delta = 10.0 }

[[group]]
objects = [1001, 2000]
rate = 15.0
zipf = 0.85
followers = 6
delay = { kind = "structured", delta = 20.0 }

[[group]]
objects = [2001, 3000]
rate = 20.0
zipf = 0.9
followers = 4
delay = { kind = "structured", delta = 30.0 }
"#,
    ),
    (
        "fig2-setup",
        r#"kind = "grouped"
horizon = 10000.0
sizes = { even = 2, odd = 5 }

[[group]]
objects = [1, 1000]
rate = 10.0
zipf = 1.0
followers = 6
delay = { kind = "uniform", alpha = -10.0, beta = 20.0 }

[[group]]
objects = [1001, 2000]
rate = 8.0
zipf = 1.0
followers = 4
delay = { kind = "uniform", alpha = 15.0, beta = 30.0 }

[[group]]
objects = [2001, 3000]
rate = 12.0
zipf = 1.0
followers = 3
delay = { kind = "uniform", alpha = -5.0, beta = 40.0 }
"#,
    ),
];

/// Single-group delay-study presets: `(name, followers, alpha, beta)`.
/// `fig3a-std*` keep the mean delay at 30 and set `β − α = std·√12`.
fn fig3_variants() -> Vec<(String, usize, f64, f64)> {
    let mut v = vec![("fig3-setup".to_string(), 4, 0.0, 60.0)];
    for std in [5.0f64, 15.0, 25.0] {
        let half = std * 3f64.sqrt();
        v.push((format!("fig3a-std{std}"), 4, 30.0 - half, 30.0 + half));
    }
    for f in [2, 4, 8] {
        v.push((format!("fig3b-f{f}"), f, 0.0, 60.0));
    }
    v
}

fn fig3_text(followers: usize, alpha: f64, beta: f64) -> String {
    format!(
        r#"kind = "grouped"
horizon = 5000.0
sizes = {{ even = 2, odd = 5 }}

[[group]]
objects = [1, 5000]
rate = 20.0
zipf = 1.0
followers = {followers}
delay = {{ kind = "uniform", alpha = {alpha:?}, beta = {beta:?} }}
"#
    )
}

fn toroid_text(groups: &str, extra: &str) -> String {
    format!("kind = \"toroid\"\nslots = 20000\n{groups}\n{extra}")
}

fn toroid_presets() -> Vec<(String, String)> {
    let t1 = TOROID_TRACE1_GROUPS;
    let switch = |p: u64| {
        format!("dynamics = {{ kind = \"switch\", period = {p}, probabilities = [0.5, 0.3, 0.2], step = 5 }}\n")
    };
    vec![
        ("toroid-trace1".into(), toroid_text(t1, "")),
        (
            "toroid-shuffle".into(),
            toroid_text(t1, "dynamics = { kind = \"shuffle\", period = 50 }\n"),
        ),
        (
            "toroid-shuffle-slow".into(),
            toroid_text(t1, "dynamics = { kind = \"shuffle\", period = 5000 }\n"),
        ),
        ("toroid-switch".into(), toroid_text(t1, &switch(50))),
        ("toroid-switch-slow".into(), toroid_text(t1, &switch(5000))),
        ("toroid-delay-uniform".into(), toroid_text("groups = [[25, 50]]", "")),
        ("toroid-delay-nonuniform".into(), toroid_text("groups = [[25, 90]]", "")),
        (
            "toroid-versioned".into(),
            toroid_text(
                t1,
                "newly_visible_only = true\nversioning = { near = 10.0, far = 50.0, sizes = [1000000, 500000, 100000] }\n",
            ),
        ),
    ]
}

fn all_presets() -> Vec<(String, String)> {
    let mut v: Vec<(String, String)> = PRESETS
        .iter()
        .map(|(n, t)| (n.to_string(), t.to_string()))
        .collect();
    v.extend(fig3_variants().into_iter().map(|(n, f, a, b)| (n, fig3_text(f, a, b))));
    v.extend(toroid_presets());
    v
}

pub fn preset_names() -> Vec<String> {
    all_presets().into_iter().map(|(n, _)| n).collect()
}

/// The text of a named preset.
pub fn preset_text(name: &str) -> Option<String> {
    all_presets().into_iter().find(|(n, _)| n == name).map(|(_, t)| t)
}

/// Looks up and parses a named preset.
pub fn preset(name: &str) -> Result<WorkloadSpec> {
    let text = preset_text(name).ok_or_else(|| {
        Error::config(format!("unknown preset {name:?}; known: {}", preset_names().join(", ")))
    })?;
    parse_workload(name, &text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_parses() {
        for name in preset_names() {
            preset(&name).unwrap_or_else(|e| panic!("{name}: {e}"));
        }
    }

    #[test]
    fn fig3a_presets_keep_mean_and_spread() {
        let spec = preset("fig3a-std15").unwrap();
        let WorkloadKind::Grouped(g) = spec.kind else { panic!() };
        let DelaySpec::Uniform { bounds } = &g.groups[0].delays else { panic!() };
        let (a, b) = bounds[0];
        assert!((0.5 * (a + b) - 30.0).abs() < 1e-9);
        assert!(((b - a) / 12f64.sqrt() - 15.0).abs() < 1e-9);
    }

    #[test]
    fn scale_multiplies_the_horizon() {
        let spec = preset("grouped-4.1").unwrap().scaled(0.5).unwrap();
        let WorkloadKind::Grouped(g) = spec.kind else { panic!() };
        assert_eq!(g.horizon, 1000.0);
        let spec = preset("toroid-trace1").unwrap().scaled(0.1).unwrap();
        let WorkloadKind::Toroid(t) = spec.kind else { panic!() };
        assert_eq!(t.slots, 2000);
        assert_eq!(t.client_count(), 17);
    }

    #[test]
    fn unknown_keys_and_presets_are_config_errors() {
        let err = parse_workload("x", "kind = \"grouped\"\nhorizon = 1.0\nbogus = 3\ngroup = []").unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert_eq!(preset("nope").unwrap_err().exit_code(), 2);
    }

    #[test]
    fn normal_delays_become_a_sampler() {
        let text = r#"kind = "grouped"
horizon = 10.0
[[group]]
objects = [1, 3]
rate = 1.0
followers = 2
delay = { kind = "normal", mean = 30.0, std = 5.0 }
"#;
        let spec = parse_workload("n", text).unwrap();
        let m = spec.model().unwrap();
        assert!(matches!(m.groups[0].delays, DelaySpec::Joint(_)));
        assert!(spec.generate(1).is_ok());
    }

    #[test]
    fn generated_trace_records_its_config_hash() {
        let spec = preset("grouped-4.1").unwrap().scaled(0.01).unwrap();
        let t = spec.generate(3).unwrap();
        assert_eq!(t.meta.config_hash, spec.config_hash);
        assert_eq!(t.meta.config_hash.len(), 16);
    }
}
