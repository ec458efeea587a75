//! Offline static placement: pick the fixed set of identities that maximizes
//! the request-weighted hit rate subject to the byte budget (0/1 knapsack).

use std::collections::{BTreeMap, HashSet};

use super::{EvictionPolicy, StaticRates};
use crate::engine::{Access, CacheConfig, CacheState, MainStream};
use crate::error::{Error, Result};
use crate::trace::{ObjectCatalog, ObjectId};

/// Largest item count solved exactly when sizes differ.
const EXACT_LIMIT: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionMethod {
    /// Equal sizes: the heaviest `⌊b/s⌋` identities.
    TopK,
    /// Meet-in-the-middle enumeration over all subsets.
    Exhaustive,
    /// Density-greedy; not guaranteed optimal.
    Heuristic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    /// Chosen identities in catalog order.
    pub chosen: Vec<ObjectId>,
    pub value: f64,
    pub used: u64,
    pub method: SelectionMethod,
}

impl Selection {
    pub fn is_exact(&self) -> bool {
        self.method != SelectionMethod::Heuristic
    }
}

struct Item {
    catalog_index: usize,
    size: u64,
    weight: f64,
}

/// Chooses the cached set `x` maximizing `Σ_d w(d)·x(d)` with
/// `Σ_d s(d)·x(d) ≤ capacity`, where `w(d) = Σ_g λ^g(d)·(1 + f^g)`.
///
/// Every catalogued identity needs a weight. Exact for equal sizes and for
/// up to 25 candidate identities; density-greedy (flagged) beyond that.
pub fn static_optimal_select(
    catalog: &ObjectCatalog,
    weights: &BTreeMap<ObjectId, f64>,
    capacity: u64,
) -> Result<Selection> {
    if capacity == 0 {
        return Err(Error::config("static placement needs a positive capacity"));
    }
    let mut items = Vec::new();
    for (i, (obj, size)) in catalog.iter().enumerate() {
        let w = *weights
            .get(&obj)
            .ok_or_else(|| Error::config(format!("no request rate for object {obj}")))?;
        if !(w >= 0.0 && w.is_finite()) {
            return Err(Error::config(format!("bad request rate {w} for object {obj}")));
        }
        if size <= capacity && w > 0.0 {
            items.push(Item {
                catalog_index: i,
                size,
                weight: w,
            });
        }
    }

    let uniform = items.first().map(|f| f.size).filter(|&s| items.iter().all(|i| i.size == s));
    let (mut picked, method) = if items.is_empty() {
        (Vec::new(), SelectionMethod::TopK)
    } else if let Some(s) = uniform {
        let k = (capacity / s) as usize;
        let mut order: Vec<usize> = (0..items.len()).collect();
        order.sort_by(|&a, &b| {
            items[b]
                .weight
                .total_cmp(&items[a].weight)
                .then(items[a].catalog_index.cmp(&items[b].catalog_index))
        });
        order.truncate(k);
        (order, SelectionMethod::TopK)
    } else if items.len() <= EXACT_LIMIT {
        (meet_in_the_middle(&items, capacity), SelectionMethod::Exhaustive)
    } else {
        (greedy(&items, capacity), SelectionMethod::Heuristic)
    };

    picked.sort_by_key(|&i| items[i].catalog_index);
    let chosen = picked
        .iter()
        .map(|&i| catalog.get(items[i].catalog_index).0)
        .collect();
    let value = picked.iter().map(|&i| items[i].weight).sum();
    let used = picked.iter().map(|&i| items[i].size).sum();
    Ok(Selection {
        chosen,
        value,
        used,
        method,
    })
}

fn subsets(items: &[Item], offset: usize, count: usize) -> Vec<(u64, f64, u32)> {
    (0u32..1 << count)
        .map(|mask| {
            let mut size = 0u64;
            let mut value = 0.0;
            for b in 0..count {
                if mask >> b & 1 == 1 {
                    size += items[offset + b].size;
                    value += items[offset + b].weight;
                }
            }
            (size, value, mask)
        })
        .collect()
}

fn meet_in_the_middle(items: &[Item], capacity: u64) -> Vec<usize> {
    let half = items.len() / 2;
    let rest = items.len() - half;
    let left = subsets(items, 0, half);
    let mut right = subsets(items, half, rest);
    right.sort_by(|a, b| a.0.cmp(&b.0).then(a.2.cmp(&b.2)));
    // Running best value among right subsets no larger than each size.
    let mut best_upto: Vec<(u64, f64, u32)> = Vec::with_capacity(right.len());
    for &(s, v, m) in &right {
        match best_upto.last() {
            Some(&(_, bv, _)) if bv >= v => best_upto.push((s, bv, best_upto.last().unwrap().2)),
            _ => best_upto.push((s, v, m)),
        }
    }

    let mut best = (f64::NEG_INFINITY, 0u32, 0u32);
    for &(ls, lv, lm) in &left {
        if ls > capacity {
            continue;
        }
        let room = capacity - ls;
        let n = best_upto.partition_point(|&(s, _, _)| s <= room);
        if n == 0 {
            continue;
        }
        let (_, rv, rm) = best_upto[n - 1];
        if lv + rv > best.0 {
            best = (lv + rv, lm, rm);
        }
    }
    let (_, lm, rm) = best;
    (0..half)
        .filter(|b| lm >> b & 1 == 1)
        .chain((0..rest).filter(|b| rm >> b & 1 == 1).map(|b| b + half))
        .collect()
}

fn greedy(items: &[Item], capacity: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.sort_by(|&a, &b| {
        let da = items[a].weight / items[a].size as f64;
        let db = items[b].weight / items[b].size as f64;
        db.total_cmp(&da).then(a.cmp(&b))
    });
    let mut used = 0;
    let mut picked = Vec::new();
    for i in order {
        if used + items[i].size <= capacity {
            used += items[i].size;
            picked.push(i);
        }
    }
    let value: f64 = picked.iter().map(|&i| items[i].weight).sum();
    // The best single item bounds the greedy loss to a factor of two.
    let single = (0..items.len()).max_by(|&a, &b| items[a].weight.total_cmp(&items[b].weight));
    match single {
        Some(s) if items[s].weight > value => vec![s],
        _ => picked,
    }
}

/// Holds the static optimal set for the whole run.
///
/// The chosen set is loaded before the first request and other identities
/// are never admitted, so the cache content never changes.
#[derive(Debug, Clone)]
pub struct StaticOpt {
    rates: StaticRates,
    selected: HashSet<usize>,
    order: Vec<usize>,
    selection: Option<Selection>,
}

impl StaticOpt {
    pub fn new(rates: StaticRates) -> Self {
        StaticOpt {
            rates,
            selected: HashSet::new(),
            order: Vec::new(),
            selection: None,
        }
    }

    pub fn selection(&self) -> Option<&Selection> {
        self.selection.as_ref()
    }
}

impl EvictionPolicy for StaticOpt {
    fn name(&self) -> String {
        "static-opt".into()
    }

    fn prepare(&mut self, stream: &MainStream, config: &CacheConfig) -> Result<()> {
        let mut catalog = ObjectCatalog::new();
        for (&o, &s) in stream.objects.iter().zip(&stream.sizes) {
            catalog.insert(o, s)?;
        }
        let weights: BTreeMap<ObjectId, f64> = match &self.rates {
            StaticRates::Model(m) => {
                let mut w = (**m).clone();
                // Identities the model never requests carry no weight.
                for o in &stream.objects {
                    w.entry(*o).or_insert(0.0);
                }
                w
            }
            StaticRates::Empirical => {
                let mut counts = vec![0u64; stream.keys()];
                for a in &stream.accesses {
                    counts[a.key] += 1;
                }
                stream
                    .objects
                    .iter()
                    .zip(counts)
                    .map(|(&o, c)| (o, c as f64))
                    .collect()
            }
        };
        let selection = static_optimal_select(&catalog, &weights, config.capacity)?;
        self.order = selection
            .chosen
            .iter()
            .map(|o| catalog.index_of(o).expect("chosen from catalog"))
            .collect();
        self.selected = self.order.iter().copied().collect();
        self.selection = Some(selection);
        Ok(())
    }

    fn preload(&mut self, _stream: &MainStream, _config: &CacheConfig) -> Vec<usize> {
        self.order.clone()
    }

    fn admits(&self, _state: &CacheState, access: &Access) -> bool {
        self.selected.contains(&access.key)
    }

    fn victim(&mut self, _state: &CacheState, _access: &Access) -> Option<usize> {
        None
    }
}
