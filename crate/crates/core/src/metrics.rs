//! Hit/miss tallies and their text encodings.

use std::collections::BTreeMap;
use std::io::Write;

use crate::analysis::WorkingSetModel;
use crate::error::{Error, Result};
use crate::trace::{ClientId, ObjectId};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Tally {
    pub requests: u64,
    pub hits: u64,
}

impl Tally {
    pub fn ratio(&self) -> Option<f64> {
        (self.requests > 0).then(|| self.hits as f64 / self.requests as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvictionRecord {
    /// Main-stream position of the request that caused the eviction.
    pub seq: usize,
    pub object: ObjectId,
}

/// Counts collected at the main cache.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimulationMetrics {
    pub policy: String,
    pub capacity: u64,
    pub local_capacity: u64,
    pub seed: u64,
    /// Every request in the trace, including those served locally.
    pub trace_events: u64,
    pub local_hits: u64,
    /// Requests that reached the main cache.
    pub forwarded: u64,
    pub hits: u64,
    /// Requests for identities larger than the whole cache.
    pub oversize_bypassed: u64,
    pub evictions: u64,
    pub per_pair: BTreeMap<(ClientId, ObjectId), Tally>,
    pub per_client: BTreeMap<ClientId, Tally>,
    pub local_hits_per_client: BTreeMap<ClientId, u64>,
    pub eviction_log: Option<Vec<EvictionRecord>>,
}

impl SimulationMetrics {
    pub fn requests(&self) -> u64 {
        self.forwarded
    }

    pub fn hit_ratio(&self) -> Result<f64> {
        measured_hit_ratio(self)
    }

    pub fn client_hit_ratio(&self, client: ClientId) -> Option<f64> {
        self.per_client.get(&client).and_then(Tally::ratio)
    }

    /// Main-cache tally summed over the clients in `clients` for one object.
    pub fn object_tally(&self, object: ObjectId, clients: impl IntoIterator<Item = ClientId>) -> Tally {
        clients.into_iter().fold(Tally::default(), |acc, c| {
            let t = self.per_pair.get(&(c, object)).copied().unwrap_or_default();
            Tally {
                requests: acc.requests + t.requests,
                hits: acc.hits + t.hits,
            }
        })
    }

    /// CSV with columns `client,object,version,requests,hits`: one row per
    /// (client, object), then one `<client>,*,*` row per client, then a
    /// `*,*,*` total row.
    pub fn write_csv(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "client,object,version,requests,hits")?;
        for ((c, o), t) in &self.per_pair {
            let v = o.version.map_or("-".to_string(), |v| v.to_string());
            writeln!(out, "{},{},{},{},{}", c, o.id, v, t.requests, t.hits)?;
        }
        for (c, t) in &self.per_client {
            writeln!(out, "{},*,*,{},{}", c, t.requests, t.hits)?;
        }
        writeln!(out, "*,*,*,{},{}", self.forwarded, self.hits)
    }

    /// `key=value` summary, one pair per line, fixed key order.
    pub fn write_summary(&self, config_hash: &str, out: &mut impl Write) -> std::io::Result<()> {
        let ratio = self
            .hit_ratio()
            .map_or("undefined".to_string(), |r| r.to_string());
        writeln!(out, "policy={}", self.policy)?;
        writeln!(out, "capacity={}", self.capacity)?;
        writeln!(out, "local_capacity={}", self.local_capacity)?;
        writeln!(out, "seed={}", self.seed)?;
        writeln!(out, "config_hash={config_hash}")?;
        writeln!(out, "trace_events={}", self.trace_events)?;
        writeln!(out, "local_hits={}", self.local_hits)?;
        writeln!(out, "forwarded={}", self.forwarded)?;
        writeln!(out, "hits={}", self.hits)?;
        writeln!(out, "hit_ratio={ratio}")?;
        writeln!(out, "oversize_bypassed={}", self.oversize_bypassed)?;
        writeln!(out, "evictions={}", self.evictions)
    }
}

/// Main-cache hits over main-cache requests.
pub fn measured_hit_ratio(metrics: &SimulationMetrics) -> Result<f64> {
    if metrics.forwarded == 0 {
        return Err(Error::Undefined("hit ratio of an empty request stream".into()));
    }
    Ok(metrics.hits as f64 / metrics.forwarded as f64)
}

/// Which client of a group a hit probability refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ClientRole {
    Leader,
    /// One-based follower index.
    Follower(usize),
}

/// Rate-weighted hit rate `Σ_g Σ_d λ^g(d)·(h_leader + Σ_i h_i)` divided by
/// the total request rate `Σ_g λ^g·(1 + f^g)`.
///
/// `h(group, role, object)` supplies the per-client hit fraction.
pub fn normalized_model_hit_rate(
    model: &WorkingSetModel,
    h: impl Fn(usize, ClientRole, ObjectId) -> f64,
) -> Result<f64> {
    let mut weighted = 0.0;
    let mut total = 0.0;
    for (g, group) in model.groups.iter().enumerate() {
        for &(obj, rate) in &group.rates {
            let object = model.objects[obj];
            weighted += rate * h(g, ClientRole::Leader, object);
            for i in 1..=group.followers {
                weighted += rate * h(g, ClientRole::Follower(i), object);
            }
            total += rate * (1 + group.followers) as f64;
        }
    }
    if total <= 0.0 {
        return Err(Error::Undefined("total request rate is zero".into()));
    }
    Ok(weighted / total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{DelaySpec, ModelGroup};

    fn metrics(hits: u64, requests: u64) -> SimulationMetrics {
        SimulationMetrics {
            hits,
            forwarded: requests,
            ..Default::default()
        }
    }

    #[test]
    fn ratio_bounds() {
        assert_eq!(measured_hit_ratio(&metrics(0, 5)).unwrap(), 0.0);
        assert_eq!(measured_hit_ratio(&metrics(5, 5)).unwrap(), 1.0);
        assert!(matches!(measured_hit_ratio(&metrics(0, 0)), Err(Error::Undefined(_))));
    }

    #[test]
    fn uniform_h_normalizes_to_itself() {
        let model = WorkingSetModel {
            objects: vec![ObjectId::new(1)],
            sizes: vec![1.0],
            groups: vec![ModelGroup {
                rates: vec![(0, 1.0)],
                followers: 1,
                delays: DelaySpec::Structured { delta: 1.0 },
            }],
        };
        let r = normalized_model_hit_rate(&model, |_, _, _| 0.5).unwrap();
        assert_eq!(r, 0.5);
    }

    #[test]
    fn zero_rate_model_is_undefined() {
        let model = WorkingSetModel {
            objects: vec![],
            sizes: vec![],
            groups: vec![],
        };
        assert!(normalized_model_hit_rate(&model, |_, _, _| 1.0).is_err());
    }

    #[test]
    fn csv_has_pairs_clients_and_total() {
        let mut m = metrics(1, 3);
        m.per_pair.insert((ClientId(1), ObjectId::new(2)), Tally { requests: 2, hits: 1 });
        m.per_pair.insert((ClientId(2), ObjectId::versioned(2, 1)), Tally { requests: 1, hits: 0 });
        m.per_client.insert(ClientId(1), Tally { requests: 2, hits: 1 });
        m.per_client.insert(ClientId(2), Tally { requests: 1, hits: 0 });
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "client,object,version,requests,hits\n1,2,-,2,1\n2,2,1,1,0\n1,*,*,2,1\n2,*,*,1,0\n*,*,*,3,1\n"
        );
    }
}
