use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{DelaySampler, DelaySpec, WorkingSetModel};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisOptions {
    /// Solver stops once `|Σ s·p − b| ≤ rel_tolerance·b`.
    pub rel_tolerance: f64,
    /// Adaptive Simpson tolerance, relative to the integration width.
    pub quad_tolerance: f64,
    pub mc_samples: usize,
    pub mc_seed: u64,
    pub max_iterations: usize,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            rel_tolerance: 1e-6,
            quad_tolerance: 1e-8,
            mc_samples: 1_000_000,
            mc_seed: 0,
            max_iterations: 200,
        }
    }
}

/// Sorted gaps between consecutive request offsets `{0, Δ_1, …, Δ_f}`,
/// pooled over `samples` draws. The covered length of
/// `[-t, 0] ∪ ⋃_i [-t-Δ_i, -Δ_i]` for one draw is `t + Σ_k min(gap_k, t)`.
#[derive(Debug, Clone)]
struct GapPool {
    gaps: Vec<f64>,
    prefix: Vec<f64>,
    samples: usize,
}

impl GapPool {
    fn new(mut gaps: Vec<f64>, samples: usize) -> Self {
        gaps.sort_by(f64::total_cmp);
        let mut prefix = Vec::with_capacity(gaps.len() + 1);
        prefix.push(0.0);
        let mut acc = 0.0;
        for g in &gaps {
            acc += g;
            prefix.push(acc);
        }
        GapPool {
            gaps,
            prefix,
            samples,
        }
    }

    fn push_gaps(offsets: &mut [f64], out: &mut Vec<f64>) {
        offsets.sort_by(f64::total_cmp);
        out.extend(offsets.windows(2).map(|w| w[1] - w[0]));
    }

    fn covered(&self, t: f64) -> f64 {
        let k = self.gaps.partition_point(|&g| g < t);
        let below = self.prefix[k];
        let above = (self.gaps.len() - k) as f64 * t;
        t + (below + above) / self.samples as f64
    }
}

#[derive(Debug, Clone)]
enum Kernel {
    Closed { followers: usize, delta: f64 },
    Fixed { delays: Vec<f64>, pool: GapPool },
    Uniform { bounds: Vec<(f64, f64)> },
    Sampled { sampler: Arc<dyn DelaySampler>, pool: GapPool, stream: u64 },
}

/// Precomputed per-group kernels for repeated evaluation at different `t`.
#[derive(Debug, Clone)]
pub struct ModelEvaluator<'m> {
    model: &'m WorkingSetModel,
    options: AnalysisOptions,
    kernels: Vec<Kernel>,
    /// `(group, λ^g(d))` per object.
    per_object: Vec<Vec<(usize, f64)>>,
}

impl<'m> ModelEvaluator<'m> {
    pub fn new(model: &'m WorkingSetModel, options: AnalysisOptions) -> Result<Self> {
        model.validate()?;
        let mut per_object = vec![Vec::new(); model.objects.len()];
        let mut kernels = Vec::with_capacity(model.groups.len());
        for (g, group) in model.groups.iter().enumerate() {
            for &(d, r) in &group.rates {
                if r > 0.0 {
                    per_object[d].push((g, r));
                }
            }
            let f = group.followers;
            kernels.push(match &group.delays {
                DelaySpec::Structured { delta } => Kernel::Closed {
                    followers: f,
                    delta: *delta,
                },
                DelaySpec::StructuredList { delays } => fixed(delays.clone()),
                DelaySpec::Uniform { bounds } if group.delays.is_deterministic() => {
                    fixed(bounds.iter().map(|b| b.0).collect())
                }
                DelaySpec::Uniform { bounds } => Kernel::Uniform {
                    bounds: bounds.clone(),
                },
                DelaySpec::Joint(sampler) => {
                    let stream = g as u64;
                    let mut gaps = Vec::with_capacity(options.mc_samples * f);
                    let mut offsets = vec![0.0; f + 1];
                    let mut rng = mc_rng(options.mc_seed, stream);
                    for _ in 0..options.mc_samples {
                        offsets[0] = 0.0;
                        sampler.sample(&mut rng, &mut offsets[1..]);
                        GapPool::push_gaps(&mut offsets, &mut gaps);
                    }
                    Kernel::Sampled {
                        sampler: sampler.clone(),
                        pool: GapPool::new(gaps, options.mc_samples.max(1)),
                        stream,
                    }
                }
            });
        }
        Ok(ModelEvaluator {
            model,
            options,
            kernels,
            per_object,
        })
    }

    pub fn model(&self) -> &WorkingSetModel {
        self.model
    }

    pub fn options(&self) -> &AnalysisOptions {
        &self.options
    }

    /// Expected length of time, before now, during which one leader request
    /// of group `g` or any of its follower copies lands in `[-t, 0]`.
    pub fn covered_length(&self, g: usize, t: f64) -> f64 {
        match &self.kernels[g] {
            Kernel::Closed { followers, delta } => t + *followers as f64 * delta.min(t),
            Kernel::Fixed { pool, .. } | Kernel::Sampled { pool, .. } => pool.covered(t),
            Kernel::Uniform { bounds } => uniform_covered(bounds, t, self.options.quad_tolerance),
        }
    }

    /// Probability that object `d` was requested within the last `t`.
    pub fn p_requested(&self, d: usize, t: f64) -> f64 {
        let covered: Vec<f64> = (0..self.kernels.len()).map(|g| self.covered_length(g, t)).collect();
        self.p_with(d, &covered)
    }

    fn p_with(&self, d: usize, covered: &[f64]) -> f64 {
        let x: f64 = self.per_object[d].iter().map(|&(g, r)| r * covered[g]).sum();
        -(-x).exp_m1()
    }

    /// Expected working-set volume `Σ_d s(d)·p(d, t)`.
    pub fn working_set(&self, t: f64) -> f64 {
        let covered: Vec<f64> = (0..self.kernels.len()).map(|g| self.covered_length(g, t)).collect();
        (0..self.model.objects.len())
            .map(|d| self.model.sizes[d] * self.p_with(d, &covered))
            .sum()
    }

    /// Probability that none of a leader request's own follower copies was
    /// made within the `t` before it.
    pub fn leader_miss_factor(&self, g: usize, t: f64) -> f64 {
        match &self.kernels[g] {
            Kernel::Closed { .. } => 1.0,
            Kernel::Fixed { delays, .. } => {
                if delays.iter().any(|&x| (-t..=0.0).contains(&x)) {
                    0.0
                } else {
                    1.0
                }
            }
            Kernel::Uniform { bounds } => {
                bounds.iter().map(|&b| 1.0 - uniform_mass(b, -t, 0.0)).product()
            }
            Kernel::Sampled { .. } => self.sampled_factors(g, t).0,
        }
    }

    /// For each follower `i` (index 0 is follower 1), the probability that
    /// neither the leader nor any other follower of the same leader request
    /// requested the object within the `t` before follower `i`.
    pub fn follower_miss_factors(&self, g: usize, t: f64) -> Vec<f64> {
        match &self.kernels[g] {
            Kernel::Closed { followers, delta } => {
                let v = if *delta < t { 0.0 } else { 1.0 };
                vec![v; *followers]
            }
            Kernel::Fixed { delays, .. } => (0..delays.len())
                .map(|i| if fixed_follower_clear(delays, i, t) { 1.0 } else { 0.0 })
                .collect(),
            Kernel::Uniform { bounds } => (0..bounds.len())
                .map(|i| uniform_follower_clear(bounds, i, t, self.options.quad_tolerance))
                .collect(),
            Kernel::Sampled { .. } => self.sampled_factors(g, t).1,
        }
    }

    fn sampled_factors(&self, g: usize, t: f64) -> (f64, Vec<f64>) {
        let Kernel::Sampled { sampler, stream, .. } = &self.kernels[g] else {
            unreachable!("sampled kernel");
        };
        let f = sampler.followers();
        let n = self.options.mc_samples.max(1);
        let mut rng = mc_rng(self.options.mc_seed, *stream);
        let mut delays = vec![0.0; f];
        let mut leader_clear = 0usize;
        let mut follower_clear = vec![0usize; f];
        for _ in 0..n {
            sampler.sample(&mut rng, &mut delays);
            if !delays.iter().any(|&x| (-t..=0.0).contains(&x)) {
                leader_clear += 1;
            }
            for (i, c) in follower_clear.iter_mut().enumerate() {
                if fixed_follower_clear(&delays, i, t) {
                    *c += 1;
                }
            }
        }
        (
            leader_clear as f64 / n as f64,
            follower_clear.iter().map(|&c| c as f64 / n as f64).collect(),
        )
    }

    /// Short description of how each group is evaluated.
    pub fn method(&self) -> String {
        let mut parts: Vec<&str> = self
            .kernels
            .iter()
            .map(|k| match k {
                Kernel::Closed { .. } => "closed-form",
                Kernel::Fixed { .. } => "interval-union",
                Kernel::Uniform { .. } => "adaptive-simpson",
                Kernel::Sampled { .. } => "monte-carlo",
            })
            .collect();
        parts.sort_unstable();
        parts.dedup();
        parts.join("+")
    }

    /// Monte-Carlo sample count, if any group needed sampling.
    pub fn mc_samples(&self) -> Option<usize> {
        self.kernels
            .iter()
            .any(|k| matches!(k, Kernel::Sampled { .. }))
            .then_some(self.options.mc_samples)
    }
}

fn fixed(delays: Vec<f64>) -> Kernel {
    let mut offsets: Vec<f64> = std::iter::once(0.0).chain(delays.iter().copied()).collect();
    let mut gaps = Vec::new();
    GapPool::push_gaps(&mut offsets, &mut gaps);
    Kernel::Fixed {
        delays,
        pool: GapPool::new(gaps, 1),
    }
}

fn mc_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn fixed_follower_clear(delays: &[f64], i: usize, t: f64) -> bool {
    let x = delays[i];
    if (0.0..=t).contains(&x) {
        return false;
    }
    delays
        .iter()
        .enumerate()
        .all(|(j, &y)| j == i || !(-t..=0.0).contains(&(y - x)))
}

/// `P(Δ ∈ [lo, hi])` for `Δ ~ U[α, β]`; a point mass when `α = β`.
fn uniform_mass((a, b): (f64, f64), lo: f64, hi: f64) -> f64 {
    if a == b {
        return if (lo..=hi).contains(&a) { 1.0 } else { 0.0 };
    }
    let overlap = hi.min(b) - lo.max(a);
    (overlap / (b - a)).clamp(0.0, 1.0)
}

/// Integrates `f` over `[lo, hi]` split at `breaks`. Point masses make the
/// integrand jump at breakpoints, so each piece is integrated with those
/// factors frozen at the piece midpoint.
fn piecewise<F: Fn(f64, f64) -> f64>(f: F, lo: f64, hi: f64, breaks: &mut Vec<f64>, tol: f64) -> f64 {
    breaks.retain(|&x| x > lo && x < hi);
    breaks.push(lo);
    breaks.push(hi);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    breaks
        .windows(2)
        .map(|w| {
            let mid = 0.5 * (w[0] + w[1]);
            adaptive_simpson(&|x| f(x, mid), w[0], w[1], tol * (w[1] - w[0]).max(1.0))
        })
        .sum()
}

/// Follower `j`'s chance of falling in `[lo, hi]`, with point masses judged
/// at `probe` (the interior of the current piece) instead of at `x`.
fn mass_at(b: (f64, f64), lo: f64, hi: f64, probe_lo: f64, probe_hi: f64) -> f64 {
    if b.0 == b.1 {
        uniform_mass(b, probe_lo, probe_hi)
    } else {
        uniform_mass(b, lo, hi)
    }
}

fn uniform_covered(bounds: &[(f64, f64)], t: f64, tol: f64) -> f64 {
    if bounds.is_empty() {
        return t;
    }
    // With u = -τ, the leader copy covers u ∈ [0, t] and follower i's copy
    // lands in the window iff Δ_i ∈ [u - t, u].
    let lo = bounds.iter().map(|b| b.0).fold(0.0, f64::min);
    let hi = bounds.iter().map(|b| b.1 + t).fold(t, f64::max);
    let mut breaks = vec![0.0, t];
    for &(a, b) in bounds {
        breaks.extend([a, b, a + t, b + t]);
    }
    let miss_all = |u: f64, probe: f64| -> f64 {
        bounds
            .iter()
            .map(|&b| 1.0 - mass_at(b, u - t, u, probe - t, probe))
            .product()
    };
    let outside = piecewise(
        |u, probe| {
            if (0.0..=t).contains(&probe) {
                0.0
            } else {
                1.0 - miss_all(u, probe)
            }
        },
        lo,
        hi,
        &mut breaks,
        tol,
    );
    t + outside
}

fn uniform_follower_clear(bounds: &[(f64, f64)], i: usize, t: f64, tol: f64) -> f64 {
    let (a, b) = bounds[i];
    let others = |x: f64, probe: f64| -> f64 {
        bounds
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, &bj)| 1.0 - mass_at(bj, x - t, x, probe - t, probe))
            .product()
    };
    if a == b {
        return if (0.0..=t).contains(&a) { 0.0 } else { others(a, a) };
    }
    let mut breaks = vec![0.0, t];
    for (j, &(aj, bj)) in bounds.iter().enumerate() {
        if j != i {
            breaks.extend([aj, bj, aj + t, bj + t]);
        }
    }
    let integral = piecewise(
        |x, probe| {
            if (0.0..=t).contains(&probe) {
                0.0
            } else {
                others(x, probe)
            }
        },
        a,
        b,
        &mut breaks,
        tol,
    );
    integral / (b - a)
}

pub(crate) fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, eps: f64) -> f64 {
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, eps, 48)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    eps: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * eps {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * eps, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * eps, depth - 1)
}
