//! Naive reference implementations used as test oracles.
#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap, VecDeque};

use corrcache::engine::{Access, CacheState};
use corrcache::policy::{EvictionPolicy, Lfru};
use corrcache::trace::TraceMeta;
use corrcache::{ClientId, ObjectCatalog, ObjectId, RequestEvent, Trace};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A unit-size trace with skewed object choice so that hits happen.
pub fn random_unit_trace(seed: u64, events: usize, clients: u32, objects: u32) -> Trace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut catalog = ObjectCatalog::new();
    for d in 1..=objects {
        catalog.insert(ObjectId::new(d), 1).unwrap();
    }
    let evs = (0..events)
        .map(|i| {
            let u: f64 = rng.random();
            let d = 1 + ((u * u * objects as f64) as u32).min(objects - 1);
            let c = rng.random_range(1..=clients);
            RequestEvent::new(i as f64, ClientId(c), ObjectId::new(d))
        })
        .collect();
    Trace::new(evs, catalog, TraceMeta::default())
}

/// Each client draws from its own slice of the catalog, sometimes twice in
/// a row: every hit is a self-hit, so no follow is ever recorded.
pub fn self_hit_trace(seed: u64, events: usize, clients: u32, objects: u32) -> Trace {
    let per = objects / clients;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut catalog = ObjectCatalog::new();
    for d in 1..=objects {
        catalog.insert(ObjectId::new(d), 1).unwrap();
    }
    let mut evs = Vec::new();
    let mut t = 0.0;
    while evs.len() < events {
        let c = rng.random_range(1..=clients);
        let d = ObjectId::new((c - 1) * per + rng.random_range(1..=per));
        let c = ClientId(c);
        evs.push(RequestEvent::new(t, c, d));
        t += 1.0;
        if rng.random_bool(0.5) {
            evs.push(RequestEvent::new(t, c, d));
            t += 1.0;
        }
    }
    Trace::new(evs, catalog, TraceMeta::default())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Naive {
    Lru,
    Lfu,
    Belady,
}

/// Evicted object ids and hit count of a unit-size cache of `cap` slots,
/// choosing victims by full scans.
pub fn naive_run(trace: &Trace, cap: usize, kind: Naive) -> (Vec<u32>, u64) {
    let objs: Vec<ObjectId> = trace.events.iter().map(|e| e.object).collect();
    // resident object -> last access position
    let mut resident: HashMap<ObjectId, usize> = HashMap::new();
    let mut counts: HashMap<ObjectId, u64> = HashMap::new();
    let mut evicted = Vec::new();
    let mut hits = 0;
    // next[i]: position of the next request for objs[i] after i.
    let mut next = vec![usize::MAX; objs.len()];
    let mut seen: HashMap<ObjectId, usize> = HashMap::new();
    for i in (0..objs.len()).rev() {
        if let Some(&j) = seen.get(&objs[i]) {
            next[i] = j;
        }
        seen.insert(objs[i], i);
    }
    for (i, &o) in objs.iter().enumerate() {
        *counts.entry(o).or_default() += 1;
        if let Some(last) = resident.get_mut(&o) {
            hits += 1;
            *last = i;
            continue;
        }
        if resident.len() == cap {
            let victim = *resident
                .iter()
                .min_by(|(a, la), (b, lb)| {
                    let key = |o: &ObjectId, l: usize| match kind {
                        Naive::Lru => (0u64, 0usize, l),
                        Naive::Lfu => (counts[o], 0, l),
                        Naive::Belady => (0, usize::MAX - next[l], l),
                    };
                    key(a, **la).cmp(&key(b, **lb))
                })
                .map(|(o, _)| o)
                .unwrap();
            resident.remove(&victim);
            evicted.push(victim.id);
        }
        resident.insert(o, i);
    }
    (evicted, hits)
}

/// Subset enumeration in Gray-code order: the best total weight with total
/// size at most `cap`.
pub fn exhaustive_knapsack(sizes: &[u64], weights: &[f64], cap: u64) -> f64 {
    let n = sizes.len();
    let (mut size, mut weight) = (0u64, 0.0f64);
    let mut inside = vec![false; n];
    let mut best = 0.0f64;
    for k in 1u64..(1u64 << n) {
        let bit = k.trailing_zeros() as usize;
        inside[bit] = !inside[bit];
        if inside[bit] {
            size += sizes[bit];
            weight += weights[bit];
        } else {
            size -= sizes[bit];
            weight -= weights[bit];
        }
        if size <= cap && weight > best {
            best = weight;
        }
    }
    best
}

/// Wraps an LFRU instance, keeps its own follow windows and compares a
/// from-scratch matrix with the policy's incremental one at checkpoints.
pub struct FollowOracle {
    pub inner: Lfru,
    window: usize,
    gamma: f64,
    last: HashMap<usize, usize>,
    windows: BTreeMap<usize, VecDeque<Option<usize>>>,
    pub checkpoints: Vec<usize>,
    seen: usize,
    pub mismatches: usize,
    pub checked: usize,
}

impl FollowOracle {
    pub fn new(window: usize, gamma: Option<f64>, checkpoints: Vec<usize>) -> Self {
        FollowOracle {
            inner: Lfru::new(window, gamma),
            window,
            gamma: gamma.unwrap_or(1.0),
            last: HashMap::new(),
            windows: BTreeMap::new(),
            checkpoints,
            seen: 0,
            mismatches: 0,
            checked: 0,
        }
    }

    fn scratch_entry(&self, c1: usize, c2: usize) -> u32 {
        if c1 == c2 {
            return 0;
        }
        let Some(w) = self.windows.get(&c2) else { return 0 };
        let n = w.len();
        let sum: f64 = w
            .iter()
            .enumerate()
            .filter(|(_, o)| **o == Some(c1))
            .map(|(k, _)| self.gamma.powi((n - 1 - k) as i32))
            .sum();
        (sum + 1e-9).floor() as u32
    }

    fn compare(&mut self) {
        let clients = self.windows.keys().chain(self.last.values()).copied().max().map_or(0, |m| m + 1);
        for c1 in 0..clients {
            for c2 in 0..clients {
                self.checked += 1;
                if self.inner.tracker().entry(c1, c2) != self.scratch_entry(c1, c2) {
                    self.mismatches += 1;
                }
            }
        }
    }
}

impl EvictionPolicy for FollowOracle {
    fn name(&self) -> String {
        "follow-oracle".into()
    }
    fn observe(&mut self, state: &CacheState, access: &Access, hit: bool) {
        self.inner.observe(state, access, hit);
        let followed = self.last.get(&access.key).copied().filter(|&c| hit && c != access.client);
        self.last.insert(access.key, access.client);
        let w = self.windows.entry(access.client).or_default();
        w.push_back(followed);
        while w.len() > self.window + 1 {
            w.pop_front();
        }
        if self.checkpoints.binary_search(&self.seen).is_ok() {
            self.compare();
        }
        self.seen += 1;
    }
    fn on_hit(&mut self, state: &CacheState, access: &Access) {
        self.inner.on_hit(state, access)
    }
    fn on_admit(&mut self, state: &CacheState, access: &Access) {
        self.inner.on_admit(state, access)
    }
    fn victim(&mut self, state: &CacheState, access: &Access) -> Option<usize> {
        self.inner.victim(state, access)
    }
    fn on_evict(&mut self, state: &CacheState, key: usize) {
        self.inner.on_evict(state, key)
    }
}
