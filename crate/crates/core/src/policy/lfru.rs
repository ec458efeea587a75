use std::collections::BTreeMap;

use super::{EvictionPolicy, FollowTracker};
use crate::engine::{Access, CacheState};

/// Least-followed, then least recently used.
///
/// Every resident identity is associated with the client that last requested
/// it. The victim comes from the client whose requests other clients have
/// followed the fewest times (the row maximum of the follow matrix); within
/// that score the least recently used identity goes.
#[derive(Debug, Clone)]
pub struct Lfru {
    name: String,
    tracker: FollowTracker,
    /// Resident keys per associated client, keyed by access stamp.
    by_client: Vec<BTreeMap<u64, usize>>,
    entry: Vec<Option<(usize, u64)>>,
}

impl Lfru {
    /// `gamma: None` gives plain counts; `Some(g)` the discounted variant.
    pub fn new(window: usize, gamma: Option<f64>) -> Self {
        let name = match gamma {
            None => format!("lfru:{window}"),
            Some(g) => format!("lfrus:{window}:{g}"),
        };
        Lfru {
            name,
            tracker: FollowTracker::new(window, gamma),
            by_client: Vec::new(),
            entry: Vec::new(),
        }
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn tracker(&self) -> &FollowTracker {
        &self.tracker
    }

    fn detach(&mut self, key: usize) {
        if let Some((c, s)) = self.entry.get_mut(key).and_then(Option::take) {
            self.by_client[c].remove(&s);
        }
    }

    fn attach(&mut self, state: &CacheState, access: &Access) {
        let key = access.key;
        self.detach(key);
        if self.entry.len() < state.keys() {
            self.entry.resize(state.keys(), None);
        }
        let c = state.last_requester(key).unwrap_or(access.client);
        if self.by_client.len() <= c {
            self.by_client.resize(c + 1, BTreeMap::new());
        }
        let s = state.stamp(key);
        self.by_client[c].insert(s, key);
        self.entry[key] = Some((c, s));
    }
}

impl EvictionPolicy for Lfru {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn observe(&mut self, _state: &CacheState, access: &Access, hit: bool) {
        self.tracker.record(access.client, access.key, hit);
    }

    fn on_hit(&mut self, state: &CacheState, access: &Access) {
        self.attach(state, access);
    }

    fn on_admit(&mut self, state: &CacheState, access: &Access) {
        self.attach(state, access);
    }

    fn victim(&mut self, _state: &CacheState, _access: &Access) -> Option<usize> {
        self.by_client
            .iter()
            .enumerate()
            .filter_map(|(c, m)| {
                m.first_key_value()
                    .map(|(&s, &k)| (self.tracker.row_score(c), s, k))
            })
            .min()
            .map(|(_, _, k)| k)
    }

    fn on_evict(&mut self, _state: &CacheState, key: usize) {
        self.detach(key);
    }
}
