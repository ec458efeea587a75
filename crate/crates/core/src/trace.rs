//! Request traces: identities, the object catalog, validation and the text
//! file format shared by every generator and simulator.
//!
//! A trace file is UTF-8 text:
//!
//! ```text
//! #meta generator=grouped
//! #meta seed=7
//! #obj 1 - 1
//! #obj 2 0 1000000
//! 0.25 1 1 -
//! 3 2 2 0
//! ```
//!
//! `#meta` lines carry `key=value` metadata, `#obj <id> <version|-> <size>`
//! lines form the catalog, and every other non-empty line is an event
//! `<time> <client> <object> <version|->`. Times are written as the shortest
//! decimal that parses back to the same `f64`.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// A cacheable identity: object index plus optional quality tier.
///
/// With versioning, `(id, version)` pairs are distinct cache entries; a
/// request for one tier is never served by another.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ObjectId {
    pub id: u32,
    pub version: Option<u8>,
}

impl ObjectId {
    pub const fn new(id: u32) -> Self {
        ObjectId { id, version: None }
    }

    pub const fn versioned(id: u32, version: u8) -> Self {
        ObjectId {
            id,
            version: Some(version),
        }
    }
}

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.version {
            Some(v) => write!(f, "{}:{}", self.id, v),
            None => write!(f, "{}", self.id),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ClientId(pub u32);

impl ClientId {
    /// Zero-based dense index, `id - 1`.
    pub fn index(self) -> usize {
        (self.0 as usize).saturating_sub(1)
    }

    pub fn from_index(index: usize) -> Self {
        ClientId(index as u32 + 1)
    }
}

impl fmt::Display for ClientId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RequestEvent {
    pub time: f64,
    pub client: ClientId,
    pub object: ObjectId,
}

impl RequestEvent {
    pub fn new(time: f64, client: ClientId, object: ObjectId) -> Self {
        RequestEvent {
            time,
            client,
            object,
        }
    }

    /// The total order used for traces: time, then client, then object.
    pub fn trace_order(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.client.cmp(&other.client))
            .then(self.object.cmp(&other.object))
    }
}

/// Object sizes in bytes, in insertion order, with O(1) lookup.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ObjectCatalog {
    entries: Vec<(ObjectId, u64)>,
    index: HashMap<ObjectId, usize>,
    total_volume: u64,
}

impl ObjectCatalog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, object: ObjectId, size: u64) -> Result<usize> {
        if size == 0 {
            return Err(Error::config(format!("object {object} has zero size")));
        }
        if object.id == 0 {
            return Err(Error::config("object ids start at 1"));
        }
        if self.index.contains_key(&object) {
            return Err(Error::config(format!("object {object} listed twice")));
        }
        let slot = self.entries.len();
        self.entries.push((object, size));
        self.index.insert(object, slot);
        self.total_volume += size;
        Ok(slot)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn size(&self, object: &ObjectId) -> Option<u64> {
        self.index.get(object).map(|&i| self.entries[i].1)
    }

    /// Dense index of an identity, in insertion order.
    pub fn index_of(&self, object: &ObjectId) -> Option<usize> {
        self.index.get(object).copied()
    }

    pub fn get(&self, index: usize) -> (ObjectId, u64) {
        self.entries[index]
    }

    pub fn iter(&self) -> impl Iterator<Item = (ObjectId, u64)> + '_ {
        self.entries.iter().copied()
    }

    pub fn total_volume(&self) -> u64 {
        self.total_volume
    }

    /// Number of distinct identities referenced by `events`.
    pub fn footprint(events: &[RequestEvent]) -> usize {
        events.iter().map(|e| e.object).collect::<HashSet<_>>().len()
    }

    /// Total size of the distinct identities referenced by `events`.
    pub fn footprint_volume(&self, events: &[RequestEvent]) -> u64 {
        events
            .iter()
            .map(|e| e.object)
            .collect::<HashSet<_>>()
            .iter()
            .filter_map(|o| self.size(o))
            .sum()
    }

    /// True when every catalogued identity has the same size.
    pub fn uniform_size(&self) -> Option<u64> {
        let first = self.entries.first()?.1;
        self.entries
            .iter()
            .all(|&(_, s)| s == first)
            .then_some(first)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TraceMeta {
    pub generator: String,
    pub seed: u64,
    pub config_hash: String,
    /// Any further `#meta` keys, written in key order.
    pub extra: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub events: Vec<RequestEvent>,
    pub catalog: ObjectCatalog,
    pub meta: TraceMeta,
}

impl Trace {
    /// Builds a trace, sorting events into trace order.
    pub fn new(mut events: Vec<RequestEvent>, catalog: ObjectCatalog, meta: TraceMeta) -> Self {
        events.sort_by(RequestEvent::trace_order);
        Trace {
            events,
            catalog,
            meta,
        }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Largest client id in the trace (0 when empty).
    pub fn client_count(&self) -> usize {
        self.events.iter().map(|e| e.client.0 as usize).max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ViolationKind {
    Unsorted,
    BadTime,
    UnknownObject(ObjectId),
    ZeroClient,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub index: usize,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ViolationKind::Unsorted => write!(f, "unsorted at index {}", self.index),
            ViolationKind::BadTime => {
                write!(f, "negative or non-finite time at index {}", self.index)
            }
            ViolationKind::UnknownObject(o) => {
                write!(f, "unknown object {o} at index {}", self.index)
            }
            ViolationKind::ZeroClient => write!(f, "client id 0 at index {}", self.index),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        match self.violations.first() {
            None => Ok(()),
            Some(v) => Err(Error::config(format!(
                "invalid trace ({} violations, first: {v})",
                self.violations.len()
            ))),
        }
    }
}

/// Checks ordering, time positivity and catalog coverage.
pub fn validate_trace(trace: &Trace) -> ValidationReport {
    let mut violations = Vec::new();
    for (i, e) in trace.events.iter().enumerate() {
        if !e.time.is_finite() || e.time < 0.0 {
            violations.push(Violation {
                index: i,
                kind: ViolationKind::BadTime,
            });
        }
        if e.client.0 == 0 {
            violations.push(Violation {
                index: i,
                kind: ViolationKind::ZeroClient,
            });
        }
        if trace.catalog.index_of(&e.object).is_none() {
            violations.push(Violation {
                index: i,
                kind: ViolationKind::UnknownObject(e.object),
            });
        }
        if i > 0 && trace.events[i - 1].trace_order(e) == Ordering::Greater {
            violations.push(Violation {
                index: i,
                kind: ViolationKind::Unsorted,
            });
        }
    }
    ValidationReport { violations }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TraceStats {
    pub event_count: usize,
    pub distinct_objects: usize,
    pub distinct_clients: usize,
    pub total_volume: u64,
    pub duration: f64,
}

pub fn trace_stats(trace: &Trace) -> TraceStats {
    let duration = match (trace.events.first(), trace.events.last()) {
        (Some(a), Some(b)) if trace.events.len() > 1 => b.time - a.time,
        _ => 0.0,
    };
    TraceStats {
        event_count: trace.events.len(),
        distinct_objects: ObjectCatalog::footprint(&trace.events),
        distinct_clients: trace
            .events
            .iter()
            .map(|e| e.client)
            .collect::<HashSet<_>>()
            .len(),
        total_volume: trace.catalog.total_volume(),
        duration,
    }
}

/// Short stable digest of a configuration text.
pub fn config_hash(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    hex::encode(&digest[..8])
}

fn write_version(out: &mut impl Write, v: Option<u8>) -> std::io::Result<()> {
    match v {
        Some(v) => write!(out, "{v}"),
        None => out.write_all(b"-"),
    }
}

pub fn write_trace_to(trace: &Trace, out: &mut impl Write) -> std::io::Result<()> {
    let meta = &trace.meta;
    writeln!(out, "#meta generator={}", meta.generator)?;
    writeln!(out, "#meta seed={}", meta.seed)?;
    writeln!(out, "#meta config_hash={}", meta.config_hash)?;
    for (k, v) in &meta.extra {
        writeln!(out, "#meta {k}={v}")?;
    }
    for (obj, size) in trace.catalog.iter() {
        write!(out, "#obj {} ", obj.id)?;
        write_version(out, obj.version)?;
        writeln!(out, " {size}")?;
    }
    for e in &trace.events {
        write!(out, "{} {} {} ", e.time, e.client.0, e.object.id)?;
        write_version(out, e.object.version)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn write_trace(trace: &Trace, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_trace_to(trace, &mut out)
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(path, e))
}

fn parse_version(tok: &str) -> std::result::Result<Option<u8>, String> {
    if tok == "-" {
        Ok(None)
    } else {
        tok.parse::<u8>()
            .map(Some)
            .map_err(|_| format!("bad version {tok:?}"))
    }
}

fn parse_field<T: std::str::FromStr>(tok: Option<&str>, what: &str) -> std::result::Result<T, String> {
    let tok = tok.ok_or_else(|| format!("missing {what}"))?;
    tok.parse::<T>().map_err(|_| format!("bad {what} {tok:?}"))
}

/// Reads a trace in file order; events are not re-sorted, so
/// [`validate_trace`] reports ordering problems in the file as written.
pub fn read_trace_from(input: impl BufRead, path: &Path) -> Result<Trace> {
    let mut trace = Trace::default();
    let err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    for (n, line) in input.lines().enumerate() {
        let lineno = n + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("#meta ") {
            let (k, v) = rest
                .split_once('=')
                .ok_or_else(|| err(lineno, format!("metadata without '=': {rest:?}")))?;
            match k {
                "generator" => trace.meta.generator = v.to_string(),
                "seed" => {
                    trace.meta.seed = v
                        .parse()
                        .map_err(|_| err(lineno, format!("bad seed {v:?}")))?
                }
                "config_hash" => trace.meta.config_hash = v.to_string(),
                _ => {
                    trace.meta.extra.insert(k.to_string(), v.to_string());
                }
            }
        } else if let Some(rest) = line.strip_prefix("#obj ") {
            let mut it = rest.split_whitespace();
            let parsed = (|| -> std::result::Result<(ObjectId, u64), String> {
                let id: u32 = parse_field(it.next(), "object id")?;
                let version = parse_version(it.next().ok_or("missing version")?)?;
                let size: u64 = parse_field(it.next(), "size")?;
                if it.next().is_some() {
                    return Err("trailing fields".into());
                }
                Ok((ObjectId { id, version }, size))
            })()
            .map_err(|m| err(lineno, m))?;
            trace
                .catalog
                .insert(parsed.0, parsed.1)
                .map_err(|e| err(lineno, e.to_string()))?;
        } else if line.starts_with('#') {
            continue;
        } else {
            let mut it = line.split_whitespace();
            let event = (|| -> std::result::Result<RequestEvent, String> {
                let time: f64 = parse_field(it.next(), "time")?;
                let client: u32 = parse_field(it.next(), "client")?;
                let id: u32 = parse_field(it.next(), "object id")?;
                let version = parse_version(it.next().ok_or("missing version")?)?;
                if it.next().is_some() {
                    return Err("trailing fields".into());
                }
                Ok(RequestEvent::new(time, ClientId(client), ObjectId { id, version }))
            })()
            .map_err(|m| err(lineno, m))?;
            trace.events.push(event);
        }
    }
    Ok(trace)
}

pub fn read_trace(path: impl AsRef<Path>) -> Result<Trace> {
    let path: PathBuf = path.as_ref().to_path_buf();
    let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
    read_trace_from(BufReader::new(file), &path)
}
