use super::EvictionPolicy;
use crate::engine::{Access, CacheState, RecencyList};

/// SIEVE: one insertion-ordered queue, a visited bit per entry and a hand.
///
/// New entries go to the newest end and hits only set the visited bit. The
/// hand starts at the oldest entry and moves toward newer ones, clearing
/// visited bits, until it finds an unvisited entry to evict; it then rests
/// on the next newer entry and wraps back to the oldest end when it runs
/// off the newest one.
#[derive(Debug, Default, Clone)]
pub struct Sieve {
    queue: Option<RecencyList>,
    visited: Vec<bool>,
    hand: Option<usize>,
}

impl Sieve {
    fn queue(&mut self, keys: usize) -> &mut RecencyList {
        if self.visited.len() < keys {
            self.visited.resize(keys, false);
        }
        self.queue.get_or_insert_with(|| RecencyList::new(keys))
    }

    pub fn is_visited(&self, key: usize) -> bool {
        self.visited.get(key).copied().unwrap_or(false)
    }

    pub fn hand(&self) -> Option<usize> {
        self.hand
    }
}

impl EvictionPolicy for Sieve {
    fn name(&self) -> String {
        "sieve".into()
    }

    fn on_hit(&mut self, state: &CacheState, access: &Access) {
        self.queue(state.keys());
        self.visited[access.key] = true;
    }

    fn on_admit(&mut self, state: &CacheState, access: &Access) {
        self.queue(state.keys()).push_front(access.key);
        self.visited[access.key] = false;
    }

    fn victim(&mut self, _state: &CacheState, _access: &Access) -> Option<usize> {
        let queue = self.queue.as_ref()?;
        let oldest = queue.lru()?;
        let mut cur = self.hand.filter(|&h| queue.contains(h)).unwrap_or(oldest);
        while self.visited[cur] {
            self.visited[cur] = false;
            cur = queue.newer(cur).unwrap_or(oldest);
        }
        self.hand = queue.newer(cur);
        Some(cur)
    }

    fn on_evict(&mut self, state: &CacheState, key: usize) {
        let queue = self.queue(state.keys());
        if queue.contains(key) {
            queue.remove(key);
        }
        if self.hand == Some(key) {
            self.hand = None;
        }
    }
}
