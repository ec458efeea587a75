use std::fmt;
use std::sync::Arc;

use rand::RngCore;
use rand_distr::{Distribution, Normal, Uniform};

/// Draws one joint vector of follower delays.
pub trait DelaySampler: fmt::Debug + Send + Sync {
    fn followers(&self) -> usize;
    fn sample(&self, rng: &mut dyn RngCore, out: &mut [f64]);
}

/// Independent normal delays per follower; unbounded support, so the
/// analysis treats it by Monte Carlo.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalDelays {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormalDelays {
    pub fn new(mean: Vec<f64>, std: Vec<f64>) -> Result<Self, String> {
        if mean.len() != std.len() {
            return Err("normal delays need one std per mean".into());
        }
        if mean.iter().chain(&std).any(|v| !v.is_finite()) || std.iter().any(|&s| s < 0.0) {
            return Err("normal delay parameters must be finite with std >= 0".into());
        }
        Ok(NormalDelays { mean, std })
    }
}

impl DelaySampler for NormalDelays {
    fn followers(&self) -> usize {
        self.mean.len()
    }

    fn sample(&self, mut rng: &mut dyn RngCore, out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = Normal::new(self.mean[i], self.std[i])
                .expect("validated std")
                .sample(&mut rng);
        }
    }
}

/// Follower delays `Δ_i` relative to the leader's request.
#[derive(Debug, Clone)]
pub enum DelaySpec {
    /// `Δ_i = i·δ` for `i = 1..=f`.
    Structured { delta: f64 },
    /// Fixed `Δ_i`, one per follower.
    StructuredList { delays: Vec<f64> },
    /// Independent `Δ_i ~ U[α_i, β_i]`, redrawn for every leader request.
    Uniform { bounds: Vec<(f64, f64)> },
    /// Arbitrary joint law, known only through samples.
    Joint(Arc<dyn DelaySampler>),
}

impl DelaySpec {
    /// The same `U[α, β]` for each of `f` followers.
    pub fn iid_uniform(alpha: f64, beta: f64, followers: usize) -> Self {
        DelaySpec::Uniform {
            bounds: vec![(alpha, beta); followers],
        }
    }

    pub fn validate(&self, followers: usize) -> Result<(), String> {
        let count = |n: usize| {
            if n == followers {
                Ok(())
            } else {
                Err(format!("{n} delays given for {followers} followers"))
            }
        };
        match self {
            DelaySpec::Structured { delta } => {
                if !(*delta > 0.0 && delta.is_finite()) {
                    return Err(format!("structured delay {delta} must be positive"));
                }
                Ok(())
            }
            DelaySpec::StructuredList { delays } => {
                if let Some(d) = delays.iter().find(|d| !d.is_finite()) {
                    return Err(format!("delay {d} is not finite"));
                }
                count(delays.len())
            }
            DelaySpec::Uniform { bounds } => {
                for &(a, b) in bounds {
                    if !(a.is_finite() && b.is_finite()) {
                        return Err(format!(
                            "uniform delay [{a}, {b}] has unbounded support; use a sampler"
                        ));
                    }
                    if a > b {
                        return Err(format!("uniform delay bounds [{a}, {b}] are reversed"));
                    }
                }
                count(bounds.len())
            }
            DelaySpec::Joint(s) => count(s.followers()),
        }
    }

    /// Fills `out` with one draw of `(Δ_1, …, Δ_f)`.
    pub fn sample(&self, rng: &mut dyn RngCore, out: &mut [f64]) {
        match self {
            DelaySpec::Structured { delta } => {
                for (i, o) in out.iter_mut().enumerate() {
                    *o = (i + 1) as f64 * delta;
                }
            }
            DelaySpec::StructuredList { delays } => out.copy_from_slice(delays),
            DelaySpec::Uniform { bounds } => {
                let mut rng = rng;
                for (o, &(a, b)) in out.iter_mut().zip(bounds) {
                    *o = if a == b {
                        a
                    } else {
                        Uniform::new_inclusive(a, b).expect("validated").sample(&mut rng)
                    };
                }
            }
            DelaySpec::Joint(s) => s.sample(rng, out),
        }
    }

    /// Whether the delays are the same for every leader request.
    pub fn is_deterministic(&self) -> bool {
        match self {
            DelaySpec::Structured { .. } | DelaySpec::StructuredList { .. } => true,
            DelaySpec::Uniform { bounds } => bounds.iter().all(|(a, b)| a == b),
            DelaySpec::Joint(_) => false,
        }
    }
}
