//! Cache simulation and working-set analysis for correlated client request
//! streams.
//!
//! The crate generates grouped leader/follower and toroidal-motion request
//! traces, replays them through a shared cache under several eviction
//! policies, and predicts per-client hit probabilities analytically.

pub mod analysis;
pub mod engine;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod policy;
pub mod trace;
pub mod workload;

pub use engine::{simulate, simulate_with, CacheConfig, SimOptions};
pub use error::{Error, Result};
pub use metrics::SimulationMetrics;
pub use policy::{EvictionPolicy, PolicyKind, PolicyParams};
pub use trace::{ClientId, ObjectCatalog, ObjectId, RequestEvent, Trace};
