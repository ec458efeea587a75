use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::{Distribution, UnitSphere};

use crate::error::{Error, Result};
use crate::trace::{ClientId, ObjectCatalog, ObjectId, RequestEvent, Trace, TraceMeta};

pub const VERSION_HIGH: u8 = 0;
pub const VERSION_MIDDLE: u8 = 1;
pub const VERSION_LOW: u8 = 2;

/// Distance-dependent quality tiers. Every tier of an object is a separate
/// cache identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Versioning {
    /// Below this distance the high tier is requested.
    pub near: f64,
    /// Beyond this distance the low tier is requested.
    pub far: f64,
    /// Sizes of the high, middle and low tiers.
    pub sizes: [u64; 3],
}

impl Default for Versioning {
    fn default() -> Self {
        Versioning {
            near: 10.0,
            far: 50.0,
            sizes: [1_000_000, 500_000, 100_000],
        }
    }
}

impl Versioning {
    pub fn tier(&self, distance: f64) -> u8 {
        if distance < self.near {
            VERSION_HIGH
        } else if distance <= self.far {
            VERSION_MIDDLE
        } else {
            VERSION_LOW
        }
    }
}

/// How followers are re-arranged over time.
#[derive(Debug, Clone, PartialEq)]
pub enum Dynamics {
    None,
    /// Every `period` slots, followers `2i-1` and `2i` of each group swap
    /// their delays.
    OrderShuffle { period: u64 },
    /// Every `period` slots each follower picks a leader with the given
    /// probabilities; the `k`-th follower to join a leader trails it by
    /// `k·step` slots.
    LeaderSwitch {
        period: u64,
        probabilities: Vec<f64>,
        step: u32,
    },
}

/// Leaders wander a 3-D torus; followers replay their leader's path with
/// a delay; every client requests the objects around it.
#[derive(Debug, Clone, PartialEq)]
pub struct ToroidSpec {
    pub side: f64,
    pub objects: usize,
    pub speed: f64,
    /// Slots between direction changes.
    pub turn_period: u64,
    pub radius: f64,
    /// Follower delays in slots, per group.
    pub groups: Vec<Vec<u32>>,
    pub slots: u64,
    pub object_size: u64,
    pub versioning: Option<Versioning>,
    /// Request an identity only if the client did not request it in the
    /// previous slot.
    pub newly_visible_only: bool,
    pub dynamics: Dynamics,
}

impl Default for ToroidSpec {
    fn default() -> Self {
        ToroidSpec {
            side: 1000.0,
            objects: 4000,
            speed: 25.0,
            turn_period: 10,
            radius: 50.0,
            groups: Vec::new(),
            slots: 20_000,
            object_size: 1,
            versioning: None,
            newly_visible_only: false,
            dynamics: Dynamics::None,
        }
    }
}

impl ToroidSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::config(m));
        if !(self.side > 0.0 && self.side.is_finite()) {
            return bad(format!("side {} must be positive", self.side));
        }
        if self.objects == 0 || self.objects > u32::MAX as usize {
            return bad(format!("object count {} out of range", self.objects));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) || self.speed.is_nan() || self.speed < 0.0 {
            return bad("radius must be positive and speed non-negative".into());
        }
        if self.turn_period == 0 || self.slots == 0 || self.object_size == 0 {
            return bad("turn period, slot count and object size must be positive".into());
        }
        if self.groups.is_empty() {
            return bad("at least one group is required".into());
        }
        if self.groups.iter().flatten().any(|&d| d == 0) {
            return bad("follower delays must be at least one slot".into());
        }
        if let Some(v) = &self.versioning {
            if v.near.is_nan() || v.far.is_nan() || v.near > v.far || v.sizes.contains(&0) {
                return bad("versioning needs near <= far and positive sizes".into());
            }
        }
        match &self.dynamics {
            Dynamics::None => {}
            Dynamics::OrderShuffle { period } => {
                if *period == 0 {
                    return bad("shuffle period must be positive".into());
                }
            }
            Dynamics::LeaderSwitch {
                period,
                probabilities,
                step,
            } => {
                if *period == 0 || *step == 0 {
                    return bad("switch period and step must be positive".into());
                }
                if probabilities.len() != self.groups.len() {
                    return bad(format!(
                        "{} switch probabilities for {} leaders",
                        probabilities.len(),
                        self.groups.len()
                    ));
                }
                let sum: f64 = probabilities.iter().sum();
                if probabilities.iter().any(|p| p.is_nan() || *p < 0.0) || (sum - 1.0).abs() > 1e-9 {
                    return bad("switch probabilities must be non-negative and sum to 1".into());
                }
            }
        }
        Ok(())
    }

    pub fn client_count(&self) -> usize {
        self.groups.iter().map(|g| 1 + g.len()).sum()
    }

    fn max_delay(&self) -> u32 {
        let fixed = self.groups.iter().flatten().copied().max().unwrap_or(0);
        match &self.dynamics {
            Dynamics::LeaderSwitch { step, .. } => {
                let followers = self.groups.iter().map(Vec::len).sum::<usize>() as u32;
                fixed.max(step * followers)
            }
            _ => fixed,
        }
    }

    pub fn catalog(&self) -> Result<ObjectCatalog> {
        let mut c = ObjectCatalog::new();
        for id in 1..=self.objects as u32 {
            match &self.versioning {
                None => {
                    c.insert(ObjectId::new(id), self.object_size)?;
                }
                Some(v) => {
                    for (tier, &size) in v.sizes.iter().enumerate() {
                        c.insert(ObjectId::versioned(id, tier as u8), size)?;
                    }
                }
            }
        }
        Ok(c)
    }
}

/// Per-axis minimal displacement distance on a torus of the given side.
pub fn torus_distance(a: [f64; 3], b: [f64; 3], side: f64) -> f64 {
    let mut s = 0.0;
    for k in 0..3 {
        let d = (a[k] - b[k]).abs() % side;
        let d = d.min(side - d);
        s += d * d;
    }
    s.sqrt()
}

/// Swaps the delays of followers `2i-1` and `2i` (one-based); a trailing
/// odd follower keeps its delay.
pub fn apply_order_shuffle(delays: &mut [u32]) {
    for pair in delays.chunks_exact_mut(2) {
        pair.swap(0, 1);
    }
}

/// Draws a leader for each follower in id order. Returns `(leader, delay)`
/// per follower, where the `k`-th joiner of a leader gets delay `k·step`.
pub fn apply_leader_switch<R: Rng + ?Sized>(
    followers: usize,
    chooser: &WeightedAliasIndex<f64>,
    leaders: usize,
    step: u32,
    rng: &mut R,
) -> Vec<(usize, u32)> {
    let mut joined = vec![0u32; leaders];
    (0..followers)
        .map(|_| {
            let l = chooser.sample(rng);
            joined[l] += 1;
            (l, step * joined[l])
        })
        .collect()
}

/// Uniform grid over the torus with cells at least `radius` wide, so a
/// query only needs the 3×3×3 block around its cell.
struct Grid {
    cells: usize,
    cell: f64,
    buckets: Vec<Vec<u32>>,
}

impl Grid {
    fn new(positions: &[[f64; 3]], side: f64, radius: f64) -> Self {
        let cells = ((side / radius).floor() as usize).clamp(1, 256);
        let cell = side / cells as f64;
        let mut buckets = vec![Vec::new(); cells * cells * cells];
        let mut g = Grid {
            cells,
            cell,
            buckets: Vec::new(),
        };
        for (i, p) in positions.iter().enumerate() {
            buckets[g.index(g.coords(*p))].push(i as u32);
        }
        g.buckets = buckets;
        g
    }

    fn coords(&self, p: [f64; 3]) -> [usize; 3] {
        p.map(|x| ((x / self.cell) as usize).min(self.cells - 1))
    }

    fn index(&self, c: [usize; 3]) -> usize {
        (c[0] * self.cells + c[1]) * self.cells + c[2]
    }

    fn neighbours(&self, p: [f64; 3], out: &mut Vec<u32>) {
        out.clear();
        let c = self.coords(p);
        let n = self.cells as isize;
        let span: Vec<isize> = if self.cells >= 3 { vec![-1, 0, 1] } else { (0..n).collect() };
        let wrap = |base: usize, d: isize| -> usize {
            if self.cells >= 3 {
                (base as isize + d).rem_euclid(n) as usize
            } else {
                d as usize
            }
        };
        for &dx in &span {
            for &dy in &span {
                for &dz in &span {
                    let idx = self.index([wrap(c[0], dx), wrap(c[1], dy), wrap(c[2], dz)]);
                    out.extend_from_slice(&self.buckets[idx]);
                }
            }
        }
    }
}

struct Follower {
    client: ClientId,
    leader: usize,
    delay: u32,
}

/// Generates the toroidal motion trace. Event times are slot numbers.
///
/// Client ids run group by group, leader first. A follower trailing by `τ`
/// slots sits where its leader was `τ` slots ago and makes no requests
/// before slot `τ`.
pub fn gen_toroid_trace(spec: &ToroidSpec, seed: u64) -> Result<Trace> {
    spec.validate()?;
    let side = spec.side;
    let mut world = ChaCha8Rng::seed_from_u64(seed);
    let positions: Vec<[f64; 3]> = (0..spec.objects)
        .map(|_| [0; 3].map(|_| world.random_range(0.0..side)))
        .collect();
    let grid = Grid::new(&positions, side, spec.radius);

    let leaders = spec.groups.len();
    let mut motion: Vec<ChaCha8Rng> = (0..leaders)
        .map(|g| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            r.set_stream(1 + g as u64);
            r
        })
        .collect();
    let mut dyn_rng = ChaCha8Rng::seed_from_u64(seed);
    dyn_rng.set_stream(1 + leaders as u64);

    let mut leader_client = Vec::with_capacity(leaders);
    let mut followers = Vec::new();
    let mut next = 0usize;
    for (g, delays) in spec.groups.iter().enumerate() {
        leader_client.push(ClientId::from_index(next));
        next += 1;
        for &delay in delays {
            followers.push(Follower {
                client: ClientId::from_index(next),
                leader: g,
                delay,
            });
            next += 1;
        }
    }
    let chooser = match &spec.dynamics {
        Dynamics::LeaderSwitch { probabilities, .. } => Some(
            WeightedAliasIndex::new(probabilities.clone())
                .map_err(|e| Error::config(format!("switch probabilities: {e}")))?,
        ),
        _ => None,
    };

    let history = spec.max_delay() as usize + 1;
    let mut trail = vec![vec![[0.0; 3]; history]; leaders];
    let mut pos: Vec<[f64; 3]> = motion
        .iter_mut()
        .map(|r| [0; 3].map(|_| r.random_range(0.0..side)))
        .collect();
    let mut dir = vec![[0.0; 3]; leaders];

    let clients = spec.client_count();
    let mut previous: Vec<HashSet<ObjectId>> = vec![HashSet::new(); clients];
    let mut current: Vec<HashSet<ObjectId>> = vec![HashSet::new(); clients];
    let mut near = Vec::new();
    let mut events = Vec::new();

    for slot in 0..spec.slots {
        if slot > 0 {
            match &spec.dynamics {
                Dynamics::OrderShuffle { period } if slot % period == 0 => {
                    let mut start = 0;
                    for delays in &spec.groups {
                        let group = &mut followers[start..start + delays.len()];
                        let mut d: Vec<u32> = group.iter().map(|f| f.delay).collect();
                        apply_order_shuffle(&mut d);
                        for (f, d) in group.iter_mut().zip(d) {
                            f.delay = d;
                        }
                        start += delays.len();
                    }
                }
                Dynamics::LeaderSwitch { period, step, .. } if slot % period == 0 => {
                    let chooser = chooser.as_ref().expect("built for switch");
                    let picks = apply_leader_switch(followers.len(), chooser, leaders, *step, &mut dyn_rng);
                    for (f, (l, d)) in followers.iter_mut().zip(picks) {
                        f.leader = l;
                        f.delay = d;
                    }
                }
                _ => {}
            }
        }

        for g in 0..leaders {
            if slot % spec.turn_period == 0 {
                dir[g] = UnitSphere.sample(&mut motion[g]);
            }
            trail[g][slot as usize % history] = pos[g];
        }

        let mut emit = |client: ClientId, at: [f64; 3], events: &mut Vec<RequestEvent>| {
            let c = client.index();
            grid.neighbours(at, &mut near);
            for &o in near.iter() {
                let dist = torus_distance(at, positions[o as usize], side);
                if dist > spec.radius {
                    continue;
                }
                let id = o + 1;
                let object = match &spec.versioning {
                    None => ObjectId::new(id),
                    Some(v) => ObjectId::versioned(id, v.tier(dist)),
                };
                if spec.newly_visible_only {
                    current[c].insert(object);
                    if previous[c].contains(&object) {
                        continue;
                    }
                }
                events.push(RequestEvent::new(slot as f64, client, object));
            }
        };

        for g in 0..leaders {
            emit(leader_client[g], pos[g], &mut events);
        }
        for f in &followers {
            if slot < f.delay as u64 {
                continue;
            }
            let at = trail[f.leader][(slot - f.delay as u64) as usize % history];
            emit(f.client, at, &mut events);
        }

        if spec.newly_visible_only {
            std::mem::swap(&mut previous, &mut current);
            current.iter_mut().for_each(HashSet::clear);
        }
        for g in 0..leaders {
            for k in 0..3 {
                pos[g][k] = (pos[g][k] + spec.speed * dir[g][k]).rem_euclid(side);
                // rem_euclid can round up to exactly `side`.
                if pos[g][k] >= side {
                    pos[g][k] = 0.0;
                }
            }
        }
    }

    let meta = TraceMeta {
        generator: "toroid".into(),
        seed,
        ..Default::default()
    };
    Ok(Trace::new(events, spec.catalog()?, meta))
}
