//! C ABI over `corrcache`.
//!
//! Every fallible call returns a [`CorrcacheStatus`] and writes its result
//! through an out pointer. On failure a message is kept per thread and can
//! be read with [`corrcache_last_error`]. Handles are opaque and must be
//! released with the matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use corrcache::analysis::{model_hit_report, AnalysisOptions, HitReport, WorkingSetModel};
use corrcache::metrics::ClientRole;
use corrcache::trace::{read_trace, write_trace};
use corrcache::workload::{parse_workload, preset, WorkloadSpec};
use corrcache::{simulate, CacheConfig, ClientId, Error, ObjectId, PolicyParams, SimulationMetrics, Trace};

/// Result of a call. Values 1 to 3 match the command-line exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorrcacheStatus {
    Ok = 0,
    Io = 1,
    /// Invalid configuration, parse failure or out-of-domain argument.
    Config = 2,
    Consistency = 3,
    NullPointer = 4,
    InvalidUtf8 = 5,
    /// The requested client, group or object is not present.
    NotFound = 6,
    Panic = 7,
}

/// Aggregate counts of one simulation.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CorrcacheSummary {
    pub trace_events: u64,
    pub local_hits: u64,
    /// Requests that reached the main cache.
    pub requests: u64,
    pub hits: u64,
    pub evictions: u64,
    /// `hits / requests`, NaN when there were no requests.
    pub hit_ratio: f64,
}

pub struct CorrcacheTrace(Trace);

pub struct CorrcacheMetrics(SimulationMetrics);

pub struct CorrcacheModel(WorkingSetModel);

pub struct CorrcacheReport(HitReport);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> CorrcacheStatus {
    match e.exit_code() {
        1 => CorrcacheStatus::Io,
        3 => CorrcacheStatus::Consistency,
        _ => CorrcacheStatus::Config,
    }
}

struct Fail(CorrcacheStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> CorrcacheStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CorrcacheStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside corrcache".into());
            CorrcacheStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail(CorrcacheStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(CorrcacheStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref()
        .ok_or_else(|| Fail(CorrcacheStatus::NullPointer, format!("{what} is null")))
}

unsafe fn put<T>(out: *mut T, value: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail(CorrcacheStatus::NullPointer, format!("{what} is null")));
    }
    out.write(value);
    Ok(())
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

/// Message of the last failed call on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn corrcache_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn corrcache_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

fn workload(preset_or_toml: &str) -> corrcache::Result<WorkloadSpec> {
    if preset_or_toml.contains('=') {
        parse_workload("inline", preset_or_toml)
    } else {
        preset(preset_or_toml)
    }
}

/// Generates a trace from a preset name or the text of a workload TOML
/// file, with the horizon or slot count multiplied by `scale`.
///
/// # Safety
/// `source` must be a valid NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn corrcache_trace_generate(
    source: *const c_char,
    seed: u64,
    scale: f64,
    out: *mut *mut CorrcacheTrace,
) -> CorrcacheStatus {
    guard(|| {
        let spec = workload(text(source, "source")?)?.scaled(scale)?;
        let trace = spec.generate(seed)?;
        put(out, boxed(CorrcacheTrace(trace)), "out")
    })
}

/// Reads a trace file.
///
/// # Safety
/// `path` must be a valid NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn corrcache_trace_read(path: *const c_char, out: *mut *mut CorrcacheTrace) -> CorrcacheStatus {
    guard(|| {
        let trace = read_trace(text(path, "path")?)?;
        put(out, boxed(CorrcacheTrace(trace)), "out")
    })
}

/// Writes a trace file.
///
/// # Safety
/// `trace` must come from this library; `path` must be a valid string.
#[no_mangle]
pub unsafe extern "C" fn corrcache_trace_write(trace: *const CorrcacheTrace, path: *const c_char) -> CorrcacheStatus {
    guard(|| {
        let t = handle(trace, "trace")?;
        write_trace(&t.0, text(path, "path")?)?;
        Ok(())
    })
}

/// Number of events, 0 for NULL.
///
/// # Safety
/// `trace` must be NULL or come from this library.
#[no_mangle]
pub unsafe extern "C" fn corrcache_trace_len(trace: *const CorrcacheTrace) -> usize {
    trace.as_ref().map_or(0, |t| t.0.len())
}

/// Sum of all catalogued object sizes, 0 for NULL.
///
/// # Safety
/// `trace` must be NULL or come from this library.
#[no_mangle]
pub unsafe extern "C" fn corrcache_trace_total_volume(trace: *const CorrcacheTrace) -> u64 {
    trace.as_ref().map_or(0, |t| t.0.catalog.total_volume())
}

/// # Safety
/// `trace` must be NULL or an unfreed handle from this library.
#[no_mangle]
pub unsafe extern "C" fn corrcache_trace_free(trace: *mut CorrcacheTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}

/// Replays `trace` through a cache of `capacity` bytes. `policy` uses the
/// command-line syntax, e.g. `lru` or `lfrus:2:0.5`; `local_frac` sizes the
/// per-client local caches.
///
/// # Safety
/// `trace` must come from this library, `policy` must be a valid string and
/// `out` writable.
#[no_mangle]
pub unsafe extern "C" fn corrcache_simulate(
    trace: *const CorrcacheTrace,
    policy: *const c_char,
    capacity: u64,
    local_frac: f64,
    seed: u64,
    out: *mut *mut CorrcacheMetrics,
) -> CorrcacheStatus {
    guard(|| {
        let t = handle(trace, "trace")?;
        let params: PolicyParams = text(policy, "policy")?.parse()?;
        let config = CacheConfig::new(capacity)?.with_local_fraction(local_frac)?;
        let m = simulate(&t.0, &params, &config, seed)?;
        put(out, boxed(CorrcacheMetrics(m)), "out")
    })
}

/// # Safety
/// `metrics` must come from this library and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn corrcache_metrics_summary(
    metrics: *const CorrcacheMetrics,
    out: *mut CorrcacheSummary,
) -> CorrcacheStatus {
    guard(|| {
        let m = &handle(metrics, "metrics")?.0;
        let summary = CorrcacheSummary {
            trace_events: m.trace_events,
            local_hits: m.local_hits,
            requests: m.forwarded,
            hits: m.hits,
            evictions: m.evictions,
            hit_ratio: m.hit_ratio().unwrap_or(f64::NAN),
        };
        put(out, summary, "out")
    })
}

/// Main-cache hit ratio of one client (ids as in the trace).
///
/// # Safety
/// `metrics` must come from this library and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn corrcache_metrics_client_hit_ratio(
    metrics: *const CorrcacheMetrics,
    client: u32,
    out: *mut f64,
) -> CorrcacheStatus {
    guard(|| {
        let m = &handle(metrics, "metrics")?.0;
        let r = m
            .client_hit_ratio(ClientId(client))
            .ok_or_else(|| Fail(CorrcacheStatus::NotFound, format!("client {client} has no main-cache requests")))?;
        put(out, r, "out")
    })
}

/// # Safety
/// `metrics` must be NULL or an unfreed handle from this library.
#[no_mangle]
pub unsafe extern "C" fn corrcache_metrics_free(metrics: *mut CorrcacheMetrics) {
    if !metrics.is_null() {
        drop(Box::from_raw(metrics));
    }
}

/// Builds the working-set model of a grouped preset or workload text.
///
/// # Safety
/// `source` must be a valid NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn corrcache_model_new(source: *const c_char, out: *mut *mut CorrcacheModel) -> CorrcacheStatus {
    guard(|| {
        let model = workload(text(source, "source")?)?.model()?;
        put(out, boxed(CorrcacheModel(model)), "out")
    })
}

/// Sum of all object sizes in the model.
///
/// # Safety
/// `model` must be NULL or come from this library.
#[no_mangle]
pub unsafe extern "C" fn corrcache_model_total_volume(model: *const CorrcacheModel) -> f64 {
    model.as_ref().map_or(0.0, |m| m.0.total_volume())
}

/// # Safety
/// `model` must be NULL or an unfreed handle from this library.
#[no_mangle]
pub unsafe extern "C" fn corrcache_model_free(model: *mut CorrcacheModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Solves for the characteristic time at `capacity` and tabulates every
/// client's hit probability. `mc_samples` of 0 keeps the default.
///
/// # Safety
/// `model` must come from this library and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn corrcache_model_solve(
    model: *const CorrcacheModel,
    capacity: f64,
    mc_samples: usize,
    mc_seed: u64,
    out: *mut *mut CorrcacheReport,
) -> CorrcacheStatus {
    guard(|| {
        let m = handle(model, "model")?;
        let mut opts = AnalysisOptions {
            mc_seed,
            ..Default::default()
        };
        if mc_samples > 0 {
            opts.mc_samples = mc_samples;
        }
        let report = model_hit_report(&m.0, capacity, &opts)?;
        put(out, boxed(CorrcacheReport(report)), "out")
    })
}

/// The solved characteristic time, NaN for NULL.
///
/// # Safety
/// `report` must be NULL or come from this library.
#[no_mangle]
pub unsafe extern "C" fn corrcache_report_t_star(report: *const CorrcacheReport) -> f64 {
    report.as_ref().map_or(f64::NAN, |r| r.0.time.t_star)
}

/// Hit probability of one client for one object. `group` is zero-based;
/// `follower` is 0 for the leader and 1-based for followers.
///
/// # Safety
/// `report` must come from this library and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn corrcache_report_hit_prob(
    report: *const CorrcacheReport,
    group: usize,
    follower: usize,
    object: u32,
    out: *mut f64,
) -> CorrcacheStatus {
    guard(|| {
        let r = &handle(report, "report")?.0;
        let role = match follower {
            0 => ClientRole::Leader,
            i => ClientRole::Follower(i),
        };
        let p = r.get(group, role, ObjectId::new(object)).ok_or_else(|| {
            Fail(
                CorrcacheStatus::NotFound,
                format!("no entry for group {group}, follower {follower}, object {object}"),
            )
        })?;
        put(out, p, "out")
    })
}

/// # Safety
/// `report` must be NULL or an unfreed handle from this library.
#[no_mangle]
pub unsafe extern "C" fn corrcache_report_free(report: *mut CorrcacheReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}
