use std::io::Write;

use super::{AnalysisOptions, ModelEvaluator, WorkingSetModel};
use crate::error::{Error, Result};
use crate::metrics::{normalized_model_hit_rate, ClientRole};
use crate::trace::ObjectId;

/// Solution of the working-set fixed point `Σ_d s(d)·p(d, t) = b`.
#[derive(Debug, Clone, PartialEq)]
pub struct CharacteristicTime {
    pub t_star: f64,
    pub b: f64,
    /// `|b − Σ_d s(d)·p(d, t_star)|`.
    pub residual: f64,
    pub tolerance: f64,
    pub iterations: usize,
    pub method: String,
    pub mc_samples: Option<usize>,
}

/// Bisection on `t`. The bracket `[0, T]` starts at `T = 1` and doubles
/// until the working set reaches `b`.
pub fn solve_characteristic_time(
    model: &WorkingSetModel,
    b: f64,
    options: &AnalysisOptions,
) -> Result<CharacteristicTime> {
    let ev = ModelEvaluator::new(model, *options)?;
    solve_with(&ev, b)
}

pub(crate) fn solve_with(ev: &ModelEvaluator<'_>, b: f64) -> Result<CharacteristicTime> {
    if b.is_nan() || b <= 0.0 || b.is_infinite() {
        return Err(Error::Domain(format!("capacity {b} must be positive and finite")));
    }
    let volume = ev.model().reachable_volume();
    if b >= volume {
        return Err(Error::Unbounded { capacity: b, volume });
    }
    let opts = ev.options();
    let tol = opts.rel_tolerance * b;
    let mut iterations = 0;

    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while ev.working_set(hi) < b {
        lo = hi;
        hi *= 2.0;
        iterations += 1;
        if !hi.is_finite() {
            return Err(Error::Consistency("working set never reaches the capacity".into()));
        }
    }
    let mut best = (hi, (ev.working_set(hi) - b).abs());
    while iterations < opts.max_iterations + 64 {
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        let ws = ev.working_set(mid);
        let r = (ws - b).abs();
        if r < best.1 {
            best = (mid, r);
        }
        if r <= tol || mid <= lo || mid >= hi {
            break;
        }
        if ws < b {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(CharacteristicTime {
        t_star: best.0,
        b,
        residual: best.1,
        tolerance: tol,
        iterations,
        method: format!("bisection;{}", ev.method()),
        mc_samples: ev.mc_samples(),
    })
}

fn check_object(model: &WorkingSetModel, d: usize) -> Result<()> {
    if d >= model.objects.len() {
        return Err(Error::config(format!("object index {d} outside the model")));
    }
    Ok(())
}

fn check_group(model: &WorkingSetModel, g: usize) -> Result<()> {
    if g >= model.groups.len() {
        return Err(Error::config(format!("group index {g} outside the model")));
    }
    Ok(())
}

/// `p(d, t)`: probability that object index `d` was requested by anyone in
/// the last `t` time units.
pub fn p_requested(
    model: &WorkingSetModel,
    d: usize,
    t: f64,
    options: &AnalysisOptions,
) -> Result<f64> {
    check_object(model, d)?;
    if t.is_nan() || t < 0.0 {
        return Err(Error::Domain(format!("time {t} must be non-negative")));
    }
    Ok(ModelEvaluator::new(model, *options)?.p_requested(d, t))
}

/// Hit probability of group `g`'s leader for object index `d`.
pub fn leader_hit_prob(
    model: &WorkingSetModel,
    d: usize,
    g: usize,
    t_star: f64,
    options: &AnalysisOptions,
) -> Result<f64> {
    check_object(model, d)?;
    check_group(model, g)?;
    let ev = ModelEvaluator::new(model, *options)?;
    let p = ev.p_requested(d, t_star);
    Ok(1.0 - (1.0 - p) * ev.leader_miss_factor(g, t_star))
}

/// Hit probability of follower `i` (one-based) of group `g` for object `d`.
pub fn follower_hit_prob(
    model: &WorkingSetModel,
    d: usize,
    g: usize,
    i: usize,
    t_star: f64,
    options: &AnalysisOptions,
) -> Result<f64> {
    check_object(model, d)?;
    check_group(model, g)?;
    let f = model.groups[g].followers;
    if i == 0 || i > f {
        return Err(Error::config(format!("group {g} has no follower {i}")));
    }
    let ev = ModelEvaluator::new(model, *options)?;
    let p = ev.p_requested(d, t_star);
    Ok(1.0 - (1.0 - p) * ev.follower_miss_factors(g, t_star)[i - 1])
}

#[derive(Debug, Clone, PartialEq)]
pub struct HitRow {
    /// Zero-based group index.
    pub group: usize,
    pub role: ClientRole,
    pub object: ObjectId,
    pub hit_prob: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HitReport {
    pub time: CharacteristicTime,
    pub rows: Vec<HitRow>,
}

impl HitReport {
    pub fn get(&self, group: usize, role: ClientRole, object: ObjectId) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.group == group && r.role == role && r.object == object)
            .map(|r| r.hit_prob)
    }

    /// Request-rate weighted model hit ratio over all clients.
    pub fn overall_hit_ratio(&self, model: &WorkingSetModel) -> Result<f64> {
        let index: std::collections::HashMap<(usize, ClientRole, ObjectId), f64> = self
            .rows
            .iter()
            .map(|r| ((r.group, r.role, r.object), r.hit_prob))
            .collect();
        normalized_model_hit_rate(model, |g, role, o| {
            index.get(&(g, role, o)).copied().unwrap_or(0.0)
        })
    }

    /// CSV with `#`-prefixed solver metadata. Groups are one-based and the
    /// leader's follower index is 0.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let t = &self.time;
        writeln!(out, "# t_star={}", t.t_star)?;
        writeln!(out, "# b={}", t.b)?;
        writeln!(out, "# residual={}", t.residual)?;
        writeln!(out, "# method={}", t.method)?;
        if let Some(n) = t.mc_samples {
            writeln!(out, "# mc_samples={n}")?;
        }
        writeln!(out, "group,client_role,follower_index,object,hit_prob")?;
        for r in &self.rows {
            let (role, idx) = match r.role {
                ClientRole::Leader => ("leader", 0),
                ClientRole::Follower(i) => ("follower", i),
            };
            writeln!(out, "{},{},{},{},{}", r.group + 1, role, idx, r.object, r.hit_prob)?;
        }
        Ok(())
    }
}

/// Solves for `t*` at capacity `b` and tabulates every leader and follower
/// hit probability for every object each group requests.
pub fn model_hit_report(
    model: &WorkingSetModel,
    b: f64,
    options: &AnalysisOptions,
) -> Result<HitReport> {
    let ev = ModelEvaluator::new(model, *options)?;
    let time = solve_with(&ev, b)?;
    let t = time.t_star;
    let mut rows = Vec::new();
    for (g, group) in model.groups.iter().enumerate() {
        let leader = ev.leader_miss_factor(g, t);
        let followers = ev.follower_miss_factors(g, t);
        for &(d, _) in &group.rates {
            let miss = 1.0 - ev.p_requested(d, t);
            let object = model.objects[d];
            rows.push(HitRow {
                group: g,
                role: ClientRole::Leader,
                object,
                hit_prob: 1.0 - miss * leader,
            });
            for (i, q) in followers.iter().enumerate() {
                rows.push(HitRow {
                    group: g,
                    role: ClientRole::Follower(i + 1),
                    object,
                    hit_prob: 1.0 - miss * q,
                });
            }
        }
    }
    Ok(HitReport { time, rows })
}
