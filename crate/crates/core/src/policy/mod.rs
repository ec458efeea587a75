//! Eviction policies behind one victim-selection contract.
//!
//! The engine calls, for every main-cache request and in this order:
//! [`EvictionPolicy::observe`] (after hit determination, before any state
//! change), then either [`EvictionPolicy::on_hit`] or, on a miss, repeated
//! [`EvictionPolicy::victim`] / [`EvictionPolicy::on_evict`] pairs followed
//! by [`EvictionPolicy::on_admit`].

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::engine::{Access, CacheConfig, CacheState, MainStream};
use crate::error::{Error, Result};
use crate::trace::ObjectId;

mod belady;
mod follow;
mod lfru;
mod lfu;
mod lru;
mod sieve;
mod static_opt;

pub use belady::{next_use_index, Belady, NEVER};
pub use follow::{lfrus_weighting, FollowTracker};
pub use lfru::Lfru;
pub use lfu::Lfu;
pub use lru::Lru;
pub use sieve::Sieve;
pub use static_opt::{static_optimal_select, Selection, SelectionMethod, StaticOpt};

pub trait EvictionPolicy: Send {
    fn name(&self) -> String;

    /// Called once with the whole main-cache stream before the first request.
    fn prepare(&mut self, _stream: &MainStream, _config: &CacheConfig) -> Result<()> {
        Ok(())
    }

    /// Identities placed in the cache before the first request.
    fn preload(&mut self, _stream: &MainStream, _config: &CacheConfig) -> Vec<usize> {
        Vec::new()
    }

    /// Whether a missed identity is admitted. Only the static policy declines.
    fn admits(&self, _state: &CacheState, _access: &Access) -> bool {
        true
    }

    fn observe(&mut self, _state: &CacheState, _access: &Access, _hit: bool) {}

    fn on_hit(&mut self, _state: &CacheState, _access: &Access) {}

    fn on_admit(&mut self, _state: &CacheState, _access: &Access) {}

    /// A resident identity to evict, or `None` when the cache is empty.
    fn victim(&mut self, state: &CacheState, access: &Access) -> Option<usize>;

    fn on_evict(&mut self, _state: &CacheState, _key: usize) {}
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PolicyKind {
    Lru,
    Lfu,
    Sieve,
    Belady,
    StaticOpt,
    Lfru,
    Lfrus,
}

/// Where the static policy gets its per-object request weights from.
#[derive(Debug, Clone, PartialEq)]
pub enum StaticRates {
    /// `Σ_g λ^g(d)·(1 + f^g)` per identity, from a generator model.
    Model(Arc<BTreeMap<ObjectId, f64>>),
    /// Request counts of the main-cache stream itself.
    Empirical,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    pub kind: PolicyKind,
    /// Follow window `w`; the window spans the last `w + 1` requests.
    pub window: usize,
    pub gamma: f64,
    pub rates: Option<StaticRates>,
}

impl PolicyParams {
    pub fn new(kind: PolicyKind) -> Self {
        PolicyParams {
            kind,
            window: 0,
            gamma: 1.0,
            rates: None,
        }
    }

    pub fn lfru(window: usize) -> Self {
        PolicyParams {
            window,
            ..Self::new(PolicyKind::Lfru)
        }
    }

    pub fn lfrus(window: usize, gamma: f64) -> Self {
        PolicyParams {
            window,
            gamma,
            ..Self::new(PolicyKind::Lfrus)
        }
    }

    pub fn static_opt(rates: StaticRates) -> Self {
        PolicyParams {
            rates: Some(rates),
            ..Self::new(PolicyKind::StaticOpt)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind == PolicyKind::Lfrus && !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::config(format!("gamma {} outside (0, 1]", self.gamma)));
        }
        if self.kind == PolicyKind::StaticOpt && self.rates.is_none() {
            return Err(Error::config("static-opt needs request rates"));
        }
        Ok(())
    }

    pub fn build(&self) -> Result<Box<dyn EvictionPolicy>> {
        self.validate()?;
        let name = self.to_string();
        Ok(match self.kind {
            PolicyKind::Lru => Box::new(Lru),
            PolicyKind::Lfu => Box::new(Lfu::default()),
            PolicyKind::Sieve => Box::new(Sieve::default()),
            PolicyKind::Belady => Box::new(Belady::default()),
            PolicyKind::StaticOpt => Box::new(StaticOpt::new(
                self.rates.clone().expect("validated"),
            )),
            PolicyKind::Lfru => Box::new(Lfru::new(self.window, None).with_name(name)),
            PolicyKind::Lfrus => {
                Box::new(Lfru::new(self.window, Some(self.gamma)).with_name(name))
            }
        })
    }
}

impl fmt::Display for PolicyParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            PolicyKind::Lru => f.write_str("lru"),
            PolicyKind::Lfu => f.write_str("lfu"),
            PolicyKind::Sieve => f.write_str("sieve"),
            PolicyKind::Belady => f.write_str("belady"),
            PolicyKind::StaticOpt => f.write_str("static-opt"),
            PolicyKind::Lfru => write!(f, "lfru:{}", self.window),
            PolicyKind::Lfrus => write!(f, "lfrus:{}:{}", self.window, self.gamma),
        }
    }
}

/// Parses `lru`, `lfu`, `sieve`, `belady`, `static-opt`, `lfru:<w>` and
/// `lfrus:<w>:<gamma>`. A bare `static-opt` uses empirical rates.
impl FromStr for PolicyParams {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let mut parts = s.split(':');
        let head = parts.next().unwrap_or_default();
        let rest: Vec<&str> = parts.collect();
        let bad = || Error::config(format!("unknown policy {s:?}; expected lru, lfu, sieve, belady, static-opt, lfru:<w>, lfrus:<w>:<gamma>"));
        let window = |tok: &str| {
            tok.parse::<usize>()
                .map_err(|_| Error::config(format!("bad window {tok:?} in {s:?}")))
        };
        let params = match (head, rest.as_slice()) {
            ("lru", []) => Self::new(PolicyKind::Lru),
            ("lfu", []) => Self::new(PolicyKind::Lfu),
            ("sieve", []) => Self::new(PolicyKind::Sieve),
            ("belady", []) => Self::new(PolicyKind::Belady),
            ("static-opt", []) => Self::static_opt(StaticRates::Empirical),
            ("lfru", [w]) => Self::lfru(window(w)?),
            ("lfrus", [w, g]) => {
                let gamma = g
                    .parse::<f64>()
                    .map_err(|_| Error::config(format!("bad gamma {g:?} in {s:?}")))?;
                Self::lfrus(window(w)?, gamma)
            }
            _ => return Err(bad()),
        };
        params.validate()?;
        Ok(params)
    }
}
