use std::collections::BTreeSet;

use super::EvictionPolicy;
use crate::engine::{Access, CacheState};

/// Least frequently used with lifetime counts.
///
/// Counts cover every main-cache request since the start of the run and
/// survive eviction. Equal counts fall back to least recently used.
#[derive(Debug, Default, Clone)]
pub struct Lfu {
    counts: Vec<u64>,
    /// `(count, stamp, key)` for every resident key.
    order: BTreeSet<(u64, u64, usize)>,
    entry: Vec<Option<(u64, u64)>>,
}

impl Lfu {
    fn grow(&mut self, keys: usize) {
        if self.counts.len() < keys {
            self.counts.resize(keys, 0);
            self.entry.resize(keys, None);
        }
    }

    fn reindex(&mut self, state: &CacheState, key: usize) {
        if let Some((c, s)) = self.entry[key].take() {
            self.order.remove(&(c, s, key));
        }
        let e = (self.counts[key], state.stamp(key));
        self.order.insert((e.0, e.1, key));
        self.entry[key] = Some(e);
    }

    pub fn count(&self, key: usize) -> u64 {
        self.counts.get(key).copied().unwrap_or(0)
    }
}

impl EvictionPolicy for Lfu {
    fn name(&self) -> String {
        "lfu".into()
    }

    fn observe(&mut self, state: &CacheState, access: &Access, _hit: bool) {
        self.grow(state.keys());
        self.counts[access.key] += 1;
    }

    fn on_hit(&mut self, state: &CacheState, access: &Access) {
        self.reindex(state, access.key);
    }

    fn on_admit(&mut self, state: &CacheState, access: &Access) {
        self.reindex(state, access.key);
    }

    fn victim(&mut self, _state: &CacheState, _access: &Access) -> Option<usize> {
        self.order.first().map(|&(_, _, k)| k)
    }

    fn on_evict(&mut self, _state: &CacheState, key: usize) {
        if let Some((c, s)) = self.entry[key].take() {
            self.order.remove(&(c, s, key));
        }
    }
}
