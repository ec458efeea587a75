//! Working-set analysis of the grouped leader/follower model.
//!
//! A group's leader requests object `d` as a Poisson process of rate
//! `λ^g(d)`; each of its `f^g` followers repeats every leader request after
//! its own delay. Under the working-set approximation an object is cached
//! iff it was requested in the last `t*` time units, where `t*` solves
//! `Σ_d s(d)·p(d, t*) = b`.

mod delay;
mod eval;
mod report;

use std::collections::BTreeMap;

pub use delay::{DelaySampler, DelaySpec, NormalDelays};
pub use eval::{AnalysisOptions, ModelEvaluator};
pub use report::{
    follower_hit_prob, leader_hit_prob, model_hit_report, p_requested,
    solve_characteristic_time, CharacteristicTime, HitReport, HitRow,
};

use crate::error::{Error, Result};
use crate::trace::ObjectId;

/// One client group of the model.
#[derive(Debug, Clone)]
pub struct ModelGroup {
    /// `(object index, λ^g(d))` for every object the group requests.
    pub rates: Vec<(usize, f64)>,
    pub followers: usize,
    pub delays: DelaySpec,
}

impl ModelGroup {
    pub fn leader_rate(&self) -> f64 {
        self.rates.iter().map(|&(_, r)| r).sum()
    }
}

/// Objects, their sizes and the groups requesting them.
#[derive(Debug, Clone)]
pub struct WorkingSetModel {
    pub objects: Vec<ObjectId>,
    pub sizes: Vec<f64>,
    pub groups: Vec<ModelGroup>,
}

impl WorkingSetModel {
    pub fn validate(&self) -> Result<()> {
        if self.objects.len() != self.sizes.len() {
            return Err(Error::config("model needs exactly one size per object"));
        }
        if let Some(s) = self.sizes.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
            return Err(Error::config(format!("object size {s} must be positive")));
        }
        for (g, group) in self.groups.iter().enumerate() {
            for &(d, r) in &group.rates {
                if d >= self.objects.len() {
                    return Err(Error::config(format!("group {g} rates an unknown object index {d}")));
                }
                if !(r >= 0.0 && r.is_finite()) {
                    return Err(Error::config(format!("group {g} has bad rate {r}")));
                }
            }
            group
                .delays
                .validate(group.followers)
                .map_err(|e| Error::config(format!("group {g}: {e}")))?;
        }
        Ok(())
    }

    /// Sum of all object sizes.
    pub fn total_volume(&self) -> f64 {
        self.sizes.iter().sum()
    }

    /// Volume of objects with a positive request rate: the limit of the
    /// working-set size as `t` grows.
    pub fn reachable_volume(&self) -> f64 {
        let mut reach = vec![false; self.objects.len()];
        for g in &self.groups {
            for &(d, r) in &g.rates {
                reach[d] |= r > 0.0;
            }
        }
        reach
            .iter()
            .zip(&self.sizes)
            .filter(|(r, _)| **r)
            .map(|(_, s)| s)
            .sum()
    }

    /// Per-object request weight `Σ_g λ^g(d)·(1 + f^g)`.
    pub fn weighted_rates(&self) -> BTreeMap<ObjectId, f64> {
        let mut w: BTreeMap<ObjectId, f64> = self.objects.iter().map(|&o| (o, 0.0)).collect();
        for g in &self.groups {
            for &(d, r) in &g.rates {
                *w.get_mut(&self.objects[d]).expect("validated index") +=
                    r * (1 + g.followers) as f64;
            }
        }
        w
    }

    pub fn index_of(&self, object: ObjectId) -> Option<usize> {
        self.objects.iter().position(|&o| o == object)
    }
}
