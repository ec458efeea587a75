//! Event-driven simulation of one shared cache, optionally fronted by
//! private per-client LRU caches.
//!
//! Requests are first routed through the local caches (when enabled); only
//! local misses reach the main cache, and only those are counted or shown to
//! the eviction policy. Because local caches are plain LRU and independent of
//! the main policy, the main-cache stream is fixed before simulation starts,
//! which lets offline policies (Belady) index it ahead of time.

use crate::error::{Error, Result};
use crate::metrics::{EvictionRecord, SimulationMetrics, Tally};
use crate::policy::{EvictionPolicy, PolicyParams};
use crate::trace::{validate_trace, ClientId, ObjectId, Trace};

const NIL: u32 = u32::MAX;

/// Intrusive doubly-linked recency list over dense key indices.
///
/// Head is most recently used, tail least recently used. All operations are
/// O(1).
#[derive(Debug, Clone)]
pub struct RecencyList {
    prev: Vec<u32>,
    next: Vec<u32>,
    linked: Vec<bool>,
    head: u32,
    tail: u32,
    len: usize,
}

impl RecencyList {
    pub fn new(keys: usize) -> Self {
        RecencyList {
            prev: vec![NIL; keys],
            next: vec![NIL; keys],
            linked: vec![false; keys],
            head: NIL,
            tail: NIL,
            len: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn contains(&self, key: usize) -> bool {
        self.linked[key]
    }

    pub fn push_front(&mut self, key: usize) {
        debug_assert!(!self.linked[key]);
        let k = key as u32;
        self.prev[key] = NIL;
        self.next[key] = self.head;
        if self.head != NIL {
            self.prev[self.head as usize] = k;
        } else {
            self.tail = k;
        }
        self.head = k;
        self.linked[key] = true;
        self.len += 1;
    }

    pub fn remove(&mut self, key: usize) {
        debug_assert!(self.linked[key]);
        let (p, n) = (self.prev[key], self.next[key]);
        if p != NIL {
            self.next[p as usize] = n;
        } else {
            self.head = n;
        }
        if n != NIL {
            self.prev[n as usize] = p;
        } else {
            self.tail = p;
        }
        self.linked[key] = false;
        self.len -= 1;
    }

    /// Moves a linked key to the head.
    pub fn touch(&mut self, key: usize) {
        if self.head as usize != key {
            self.remove(key);
            self.push_front(key);
        }
    }

    pub fn lru(&self) -> Option<usize> {
        (self.tail != NIL).then_some(self.tail as usize)
    }

    pub fn mru(&self) -> Option<usize> {
        (self.head != NIL).then_some(self.head as usize)
    }

    /// Neighbour one step towards the most-recent end.
    pub fn newer(&self, key: usize) -> Option<usize> {
        let p = self.prev[key];
        (self.linked[key] && p != NIL).then_some(p as usize)
    }

    /// Keys from most to least recently used.
    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        let mut cur = self.head;
        std::iter::from_fn(move || {
            (cur != NIL).then(|| {
                let k = cur as usize;
                cur = self.next[k];
                k
            })
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CacheConfig {
    pub capacity: u64,
    pub local_cache_fraction: f64,
}

impl CacheConfig {
    pub fn new(capacity: u64) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::config("cache capacity must be positive"));
        }
        Ok(CacheConfig {
            capacity,
            local_cache_fraction: 0.0,
        })
    }

    pub fn with_local_fraction(mut self, fraction: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&fraction) {
            return Err(Error::config(format!(
                "local cache fraction {fraction} outside [0, 1)"
            )));
        }
        self.local_cache_fraction = fraction;
        Ok(self)
    }

    pub fn local_capacity(&self) -> u64 {
        (self.local_cache_fraction * self.capacity as f64).floor() as u64
    }
}

/// One request as seen by the main cache.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Access {
    /// Position in the main-cache stream.
    pub seq: usize,
    /// Position in the originating trace.
    pub event: usize,
    /// Dense client index (`ClientId - 1`).
    pub client: usize,
    /// Dense identity index into the trace catalog.
    pub key: usize,
    pub time: f64,
}

/// The request stream that reaches the main cache.
#[derive(Debug, Clone)]
pub struct MainStream {
    pub accesses: Vec<Access>,
    pub objects: Vec<ObjectId>,
    pub sizes: Vec<u64>,
    pub clients: usize,
    /// Requests absorbed by each client's local cache.
    pub local_hits: Vec<u64>,
    pub local_capacity: u64,
}

impl MainStream {
    pub fn keys(&self) -> usize {
        self.objects.len()
    }
}

/// Runs every request through its client's private LRU cache and returns
/// the misses, in trace order.
pub fn route_through_local_caches(trace: &Trace, config: &CacheConfig) -> MainStream {
    let keys = trace.catalog.len();
    let objects: Vec<ObjectId> = trace.catalog.iter().map(|(o, _)| o).collect();
    let sizes: Vec<u64> = trace.catalog.iter().map(|(_, s)| s).collect();
    let clients = trace.client_count();
    let local_capacity = config.local_capacity();

    struct Local {
        list: RecencyList,
        used: u64,
    }
    let mut locals: Vec<Option<Local>> = (0..clients).map(|_| None).collect();
    let mut local_hits = vec![0u64; clients];
    let mut accesses = Vec::with_capacity(trace.len());

    for (i, e) in trace.events.iter().enumerate() {
        let key = trace
            .catalog
            .index_of(&e.object)
            .expect("validated trace references catalogued objects");
        let client = e.client.index();
        if local_capacity > 0 {
            let local = locals[client].get_or_insert_with(|| Local {
                list: RecencyList::new(keys),
                used: 0,
            });
            if local.list.contains(key) {
                local.list.touch(key);
                local_hits[client] += 1;
                continue;
            }
            let size = sizes[key];
            if size <= local_capacity {
                while local.used + size > local_capacity {
                    let victim = local.list.lru().expect("non-empty while over capacity");
                    local.list.remove(victim);
                    local.used -= sizes[victim];
                }
                local.list.push_front(key);
                local.used += size;
            }
        }
        accesses.push(Access {
            seq: accesses.len(),
            event: i,
            client,
            key,
            time: e.time,
        });
    }

    MainStream {
        accesses,
        objects,
        sizes,
        clients,
        local_hits,
        local_capacity,
    }
}

/// Residency, recency and requester bookkeeping for the main cache.
#[derive(Debug, Clone)]
pub struct CacheState {
    capacity: u64,
    used: u64,
    sizes: Vec<u64>,
    objects: Vec<ObjectId>,
    recency: RecencyList,
    stamp: Vec<u64>,
    last_requester: Vec<Option<usize>>,
    clock: u64,
}

impl CacheState {
    pub fn new(capacity: u64, objects: Vec<ObjectId>, sizes: Vec<u64>) -> Self {
        let keys = sizes.len();
        CacheState {
            capacity,
            used: 0,
            sizes,
            objects,
            recency: RecencyList::new(keys),
            stamp: vec![0; keys],
            last_requester: vec![None; keys],
            clock: 0,
        }
    }

    pub fn capacity(&self) -> u64 {
        self.capacity
    }

    pub fn used(&self) -> u64 {
        self.used
    }

    pub fn len(&self) -> usize {
        self.recency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.recency.is_empty()
    }

    pub fn keys(&self) -> usize {
        self.sizes.len()
    }

    pub fn contains(&self, key: usize) -> bool {
        self.recency.contains(key)
    }

    pub fn size(&self, key: usize) -> u64 {
        self.sizes[key]
    }

    pub fn object(&self, key: usize) -> ObjectId {
        self.objects[key]
    }

    /// Logical time of the last access; larger is more recent.
    pub fn stamp(&self, key: usize) -> u64 {
        self.stamp[key]
    }

    /// Client that most recently requested a resident identity.
    pub fn last_requester(&self, key: usize) -> Option<usize> {
        self.last_requester[key]
    }

    pub fn lru(&self) -> Option<usize> {
        self.recency.lru()
    }

    /// Resident keys from most to least recently used.
    pub fn iter_mru(&self) -> impl Iterator<Item = usize> + '_ {
        self.recency.iter()
    }

    fn next_stamp(&mut self) -> u64 {
        self.clock += 1;
        self.clock
    }

    fn touch(&mut self, key: usize, client: Option<usize>) {
        self.recency.touch(key);
        self.stamp[key] = self.next_stamp();
        self.last_requester[key] = client;
    }

    fn insert(&mut self, key: usize, client: Option<usize>) {
        self.recency.push_front(key);
        self.used += self.sizes[key];
        self.stamp[key] = self.next_stamp();
        self.last_requester[key] = client;
    }

    fn remove(&mut self, key: usize) {
        self.recency.remove(key);
        self.used -= self.sizes[key];
        self.last_requester[key] = None;
    }

    fn check(&self) -> Result<()> {
        if self.used > self.capacity {
            return Err(Error::Consistency(format!(
                "used {} exceeds capacity {}",
                self.used, self.capacity
            )));
        }
        Ok(())
    }
}

/// Asks the policy for victims until the incoming identity fits, then
/// inserts it at the most-recent position. Returns victims in eviction order.
pub fn admit_with_eviction(
    state: &mut CacheState,
    access: &Access,
    policy: &mut dyn EvictionPolicy,
) -> Result<Vec<usize>> {
    let key = access.key;
    if state.contains(key) {
        return Err(Error::Consistency(format!(
            "admitting resident identity {}",
            state.object(key)
        )));
    }
    let size = state.size(key);
    if size > state.capacity {
        return Err(Error::Domain(format!(
            "identity {} of size {size} exceeds capacity {}",
            state.object(key),
            state.capacity
        )));
    }
    let mut evicted = Vec::new();
    while state.used + size > state.capacity {
        let victim = policy.victim(state, access).ok_or_else(|| {
            Error::Consistency(format!("{} returned no victim from a full cache", policy.name()))
        })?;
        if !state.contains(victim) {
            return Err(Error::Consistency(format!(
                "{} chose non-resident victim {}",
                policy.name(),
                state.object(victim)
            )));
        }
        state.remove(victim);
        policy.on_evict(state, victim);
        evicted.push(victim);
    }
    state.insert(key, Some(access.client));
    policy.on_admit(state, access);
    Ok(evicted)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SimOptions {
    /// Keep the full eviction sequence in the returned metrics.
    pub record_evictions: bool,
}

/// Simulates `trace` under the policy described by `params`.
pub fn simulate(
    trace: &Trace,
    params: &PolicyParams,
    config: &CacheConfig,
    seed: u64,
) -> Result<SimulationMetrics> {
    let mut policy = params.build()?;
    simulate_with(trace, policy.as_mut(), config, seed, SimOptions::default())
}

/// Simulates `trace` under an already-constructed policy instance.
///
/// `seed` is recorded in the metrics; every shipped policy is deterministic.
pub fn simulate_with(
    trace: &Trace,
    policy: &mut dyn EvictionPolicy,
    config: &CacheConfig,
    seed: u64,
    options: SimOptions,
) -> Result<SimulationMetrics> {
    validate_trace(trace).into_result()?;
    let stream = route_through_local_caches(trace, config);
    run_stream(&stream, policy, config, seed, options).map(|mut m| {
        m.trace_events = trace.len() as u64;
        m
    })
}

/// Runs the main cache over a pre-routed stream.
pub fn run_stream(
    stream: &MainStream,
    policy: &mut dyn EvictionPolicy,
    config: &CacheConfig,
    seed: u64,
    options: SimOptions,
) -> Result<SimulationMetrics> {
    policy.prepare(stream, config)?;

    let keys = stream.keys();
    let clients = stream.clients;
    let mut state = CacheState::new(config.capacity, stream.objects.clone(), stream.sizes.clone());
    let mut pair = vec![Tally::default(); clients * keys];
    let mut hits = 0u64;
    let mut bypassed = 0u64;
    let mut evictions = 0u64;
    let mut log = options.record_evictions.then(Vec::new);

    for key in policy.preload(stream, config) {
        if state.contains(key) || state.used + state.size(key) > state.capacity {
            return Err(Error::Consistency(format!(
                "{} preload does not fit",
                policy.name()
            )));
        }
        state.insert(key, None);
    }

    for access in &stream.accesses {
        let hit = state.contains(access.key);
        policy.observe(&state, access, hit);
        let tally = &mut pair[access.client * keys + access.key];
        tally.requests += 1;
        if hit {
            tally.hits += 1;
            hits += 1;
            state.touch(access.key, Some(access.client));
            policy.on_hit(&state, access);
            continue;
        }
        if state.size(access.key) > state.capacity {
            bypassed += 1;
            continue;
        }
        if !policy.admits(&state, access) {
            continue;
        }
        let victims = admit_with_eviction(&mut state, access, policy)?;
        evictions += victims.len() as u64;
        if let Some(log) = log.as_mut() {
            log.extend(victims.iter().map(|&v| EvictionRecord {
                seq: access.seq,
                object: stream.objects[v],
            }));
        }
        state.check()?;
    }

    let mut metrics = SimulationMetrics {
        policy: policy.name(),
        capacity: config.capacity,
        local_capacity: stream.local_capacity,
        seed,
        trace_events: stream.accesses.len() as u64 + stream.local_hits.iter().sum::<u64>(),
        local_hits: stream.local_hits.iter().sum(),
        forwarded: stream.accesses.len() as u64,
        hits,
        oversize_bypassed: bypassed,
        evictions,
        eviction_log: log,
        ..Default::default()
    };
    for c in 0..clients {
        let mut client_total = Tally::default();
        for k in 0..keys {
            let t = pair[c * keys + k];
            if t.requests > 0 {
                metrics
                    .per_pair
                    .insert((ClientId::from_index(c), stream.objects[k]), t);
                client_total.requests += t.requests;
                client_total.hits += t.hits;
            }
        }
        if client_total.requests > 0 || stream.local_hits[c] > 0 {
            metrics.per_client.insert(ClientId::from_index(c), client_total);
            metrics
                .local_hits_per_client
                .insert(ClientId::from_index(c), stream.local_hits[c]);
        }
    }
    Ok(metrics)
}
