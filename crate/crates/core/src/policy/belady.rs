use std::cmp::Reverse;
use std::collections::BTreeSet;

use super::EvictionPolicy;
use crate::engine::{Access, CacheConfig, CacheState, MainStream};
use crate::error::{Error, Result};

/// Next-use position meaning "never requested again".
pub const NEVER: usize = usize::MAX;

/// For every stream position, the position of the next request for the same
/// identity (or [`NEVER`]). One backward pass.
pub fn next_use_index(keys: &[usize], key_space: usize) -> Vec<usize> {
    let mut next = vec![NEVER; keys.len()];
    let mut seen = vec![NEVER; key_space];
    for (pos, &k) in keys.iter().enumerate().rev() {
        next[pos] = seen[k];
        seen[k] = pos;
    }
    next
}

/// Offline optimal for equal-size identities: evicts the resident identity
/// whose next request is furthest away, ties to least recently used.
#[derive(Debug, Default, Clone)]
pub struct Belady {
    next: Vec<usize>,
    order: BTreeSet<(Reverse<usize>, u64, usize)>,
    entry: Vec<Option<(usize, u64)>>,
}

impl Belady {
    fn reindex(&mut self, state: &CacheState, access: &Access) {
        let key = access.key;
        if let Some((n, s)) = self.entry[key].take() {
            self.order.remove(&(Reverse(n), s, key));
        }
        let e = (self.next[access.seq], state.stamp(key));
        self.order.insert((Reverse(e.0), e.1, key));
        self.entry[key] = Some(e);
    }
}

impl EvictionPolicy for Belady {
    fn name(&self) -> String {
        "belady".into()
    }

    fn prepare(&mut self, stream: &MainStream, _config: &CacheConfig) -> Result<()> {
        let mut sizes = stream.accesses.iter().map(|a| stream.sizes[a.key]);
        if let Some(first) = sizes.next() {
            if sizes.any(|s| s != first) {
                return Err(Error::config(
                    "belady requires every requested object to have the same size",
                ));
            }
        }
        let keys: Vec<usize> = stream.accesses.iter().map(|a| a.key).collect();
        self.next = next_use_index(&keys, stream.keys());
        self.entry = vec![None; stream.keys()];
        self.order.clear();
        Ok(())
    }

    fn on_hit(&mut self, state: &CacheState, access: &Access) {
        self.reindex(state, access);
    }

    fn on_admit(&mut self, state: &CacheState, access: &Access) {
        self.reindex(state, access);
    }

    fn victim(&mut self, _state: &CacheState, _access: &Access) -> Option<usize> {
        self.order.first().map(|&(_, _, k)| k)
    }

    fn on_evict(&mut self, _state: &CacheState, key: usize) {
        if let Some((n, s)) = self.entry[key].take() {
            self.order.remove(&(Reverse(n), s, key));
        }
    }
}
