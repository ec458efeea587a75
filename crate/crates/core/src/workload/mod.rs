//! Trace generators: grouped leader/follower Poisson streams and the
//! toroidal motion workload, plus named presets and config files.

mod config;
mod toroid;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::{Distribution, Exp};

pub use config::{parse_workload, preset, preset_names, preset_text, WorkloadKind, WorkloadSpec};
pub use toroid::{
    apply_leader_switch, apply_order_shuffle, gen_toroid_trace, torus_distance, Dynamics,
    ToroidSpec, Versioning, VERSION_HIGH, VERSION_LOW, VERSION_MIDDLE,
};

use crate::analysis::{DelaySpec, ModelGroup, WorkingSetModel};
use crate::error::{Error, Result};
use crate::trace::{ClientId, ObjectCatalog, ObjectId, RequestEvent, Trace, TraceMeta};

/// `p(d) = d^{-s} / Σ_{k=1..D} k^{-s}` for ranks `d = 1..=D`.
pub fn zipf_pmf(count: usize, s: f64) -> Vec<f64> {
    let w: Vec<f64> = (1..=count).map(|d| (d as f64).powf(-s)).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

/// One leader and its followers requesting a contiguous object range.
#[derive(Debug, Clone)]
pub struct GroupSpec {
    /// First object id; the group requests `first_object..first_object+objects`.
    pub first_object: u32,
    pub objects: u32,
    /// Total leader request rate `λ^g`.
    pub leader_rate: f64,
    /// Zipf exponent over the range; the first id is the most popular.
    pub zipf: f64,
    pub followers: usize,
    pub delays: DelaySpec,
}

impl GroupSpec {
    pub fn object_ids(&self) -> impl Iterator<Item = u32> {
        self.first_object..self.first_object + self.objects
    }

    fn validate(&self, g: usize) -> Result<()> {
        let err = |m: String| Err(Error::config(format!("group {}: {m}", g + 1)));
        if self.first_object == 0 || self.objects == 0 {
            return err("object range must be non-empty and start at id 1 or later".into());
        }
        if self.first_object.checked_add(self.objects).is_none() {
            return err("object range overflows".into());
        }
        if !(self.leader_rate > 0.0 && self.leader_rate.is_finite()) {
            return err(format!("leader rate {} must be positive", self.leader_rate));
        }
        if !(self.zipf >= 0.0 && self.zipf.is_finite()) {
            return err(format!("zipf exponent {} must be non-negative", self.zipf));
        }
        self.delays.validate(self.followers).or_else(err)
    }
}

/// Object sizes for generated catalogs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SizeRule {
    Constant(u64),
    /// Even ids get `even`, odd ids `odd`.
    EvenOdd { even: u64, odd: u64 },
}

impl SizeRule {
    pub fn size(&self, id: u32) -> u64 {
        match *self {
            SizeRule::Constant(s) => s,
            SizeRule::EvenOdd { even, odd } => {
                if id % 2 == 0 {
                    even
                } else {
                    odd
                }
            }
        }
    }
}

/// The grouped client request model over `[0, horizon]`.
#[derive(Debug, Clone)]
pub struct GroupedSpec {
    pub groups: Vec<GroupSpec>,
    pub horizon: f64,
    pub sizes: SizeRule,
}

impl GroupedSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::config(format!("horizon {} must be positive", self.horizon)));
        }
        if self.groups.is_empty() {
            return Err(Error::config("at least one group is required"));
        }
        if let SizeRule::Constant(0) | SizeRule::EvenOdd { even: 0, .. } | SizeRule::EvenOdd { odd: 0, .. } =
            self.sizes
        {
            return Err(Error::config("object sizes must be positive"));
        }
        for (g, group) in self.groups.iter().enumerate() {
            group.validate(g)?;
        }
        Ok(())
    }

    /// Client id of group `g`'s leader; its followers take the next ids.
    pub fn leader_client(&self, g: usize) -> ClientId {
        let before: usize = self.groups[..g].iter().map(|x| 1 + x.followers).sum();
        ClientId::from_index(before)
    }

    pub fn client_count(&self) -> usize {
        self.groups.iter().map(|x| 1 + x.followers).sum()
    }

    /// Every object any group can request, ascending.
    pub fn object_ids(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self.groups.iter().flat_map(GroupSpec::object_ids).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    pub fn catalog(&self) -> Result<ObjectCatalog> {
        let mut c = ObjectCatalog::new();
        for id in self.object_ids() {
            c.insert(ObjectId::new(id), self.sizes.size(id))?;
        }
        Ok(c)
    }

    /// The analytical model with `λ^g(d) = λ^g·p^g(d)`.
    pub fn model(&self) -> Result<WorkingSetModel> {
        self.validate()?;
        let ids = self.object_ids();
        let groups = self
            .groups
            .iter()
            .map(|g| {
                let pmf = zipf_pmf(g.objects as usize, g.zipf);
                let rates = g
                    .object_ids()
                    .zip(pmf)
                    .map(|(id, p)| {
                        let d = ids.binary_search(&id).expect("collected above");
                        (d, g.leader_rate * p)
                    })
                    .collect();
                ModelGroup {
                    rates,
                    followers: g.followers,
                    delays: g.delays.clone(),
                }
            })
            .collect();
        Ok(WorkingSetModel {
            objects: ids.iter().map(|&id| ObjectId::new(id)).collect(),
            sizes: ids.iter().map(|&id| self.sizes.size(id) as f64).collect(),
            groups,
        })
    }
}

/// Generates a grouped trace.
///
/// Each leader's requests form a Poisson process of rate `λ^g` on
/// `[0, horizon]` with objects drawn from the group's Zipf law. Every
/// follower repeats each leader request after a freshly drawn delay; copies
/// that would land before time 0 are dropped, copies after the horizon are
/// kept.
pub fn gen_grouped_trace(spec: &GroupedSpec, seed: u64) -> Result<Trace> {
    spec.validate()?;
    let mut events = Vec::new();
    for (g, group) in spec.groups.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(g as u64);
        let gap = Exp::new(group.leader_rate).map_err(|e| Error::config(e.to_string()))?;
        let popularity = WeightedAliasIndex::new(zipf_pmf(group.objects as usize, group.zipf))
            .map_err(|e| Error::config(format!("group {}: {e}", g + 1)))?;
        let leader = spec.leader_client(g);
        let mut delays = vec![0.0; group.followers];
        let mut t = 0.0;
        loop {
            t += gap.sample(&mut rng);
            if t > spec.horizon {
                break;
            }
            let object = ObjectId::new(group.first_object + popularity.sample(&mut rng) as u32);
            events.push(RequestEvent::new(t, leader, object));
            group.delays.sample(&mut rng, &mut delays);
            for (i, &d) in delays.iter().enumerate() {
                let at = t + d;
                if at >= 0.0 {
                    events.push(RequestEvent::new(at, ClientId(leader.0 + 1 + i as u32), object));
                }
            }
        }
    }
    let meta = TraceMeta {
        generator: "grouped".into(),
        seed,
        ..Default::default()
    };
    Ok(Trace::new(events, spec.catalog()?, meta))
}
