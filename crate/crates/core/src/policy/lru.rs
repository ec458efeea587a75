use super::EvictionPolicy;
use crate::engine::{Access, CacheState};

/// Evicts the least recently used identity; the engine's recency list is
/// the whole policy.
#[derive(Debug, Default, Clone)]
pub struct Lru;

impl EvictionPolicy for Lru {
    fn name(&self) -> String {
        "lru".into()
    }

    fn victim(&mut self, state: &CacheState, _access: &Access) -> Option<usize> {
        state.lru()
    }
}
