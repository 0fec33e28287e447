//! The in-process execution engine.
//!
//! Vertices are hash-partitioned over workers. Each worker owns its vertices
//! outright and talks to the others only through FIFO channels; topology
//! events go to a separate queue that a worker drains before touching
//! algorithm messages. A single coordinator (the [`Engine`] owner's thread)
//! feeds events, runs global relabels and answers queries by waiting for
//! quiescence.
//!
//! Two backends share the vertex plumbing: real threads, and a seeded
//! single-threaded interleaving of virtual workers for reproducible runs.

mod partition;
mod sim;
mod threaded;

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use crossbeam_utils::Backoff;
use rustc_hash::{FxHashMap, FxHashSet};
use thiserror::Error;

use crate::event::{Timestamp, TopologyEvent};
use crate::global_relabel::{GrConfig, GrPhase, GrState};
use crate::maxflow::{check_invariants, ExecMode, VertexState, Violation};
use crate::oracle::StaticGraph;
use crate::VertexId;

use partition::{owner, Control, Reply, TopoItem};
use sim::SimBackend;
use threaded::ThreadedBackend;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schedule {
    /// One OS thread per worker.
    Threaded,
    /// Virtual workers interleaved by a seeded generator on the caller's
    /// thread.
    Deterministic { seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub source: VertexId,
    pub sink: VertexId,
    pub workers: usize,
    /// Projection factor for the vertex count used as the source height.
    pub alpha: f64,
    pub gr: GrConfig,
    pub schedule: Schedule,
    /// Topology events buffered per worker before a hand-off. 1 forwards
    /// every event immediately.
    pub topology_batch: usize,
    /// Test hook: added to every reported flow value.
    #[doc(hidden)]
    pub debug_flow_offset: i64,
}

impl EngineConfig {
    pub fn new(source: VertexId, sink: VertexId) -> Self {
        EngineConfig {
            source,
            sink,
            workers: 1,
            alpha: 1.1,
            gr: GrConfig::default(),
            schedule: Schedule::Threaded,
            topology_batch: 256,
            debug_flow_offset: 0,
        }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    pub fn deterministic(mut self, seed: u64) -> Self {
        self.schedule = Schedule::Deterministic { seed };
        self
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        if self.source == self.sink {
            return Err(EngineError::Config(format!(
                "source and sink must differ (both are {})",
                self.source
            )));
        }
        if self.workers == 0 {
            return Err(EngineError::Config("at least one worker is required".into()));
        }
        if !(self.alpha.is_finite() && self.alpha > 1.0) {
            return Err(EngineError::Config(format!(
                "alpha must be greater than 1, got {}",
                self.alpha
            )));
        }
        self.gr
            .validate()
            .map_err(|e| EngineError::Config(e.to_string()))
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EngineError {
    #[error("deleting from edge ({src}, {dst}) would leave capacity {capacity}")]
    StreamValidity {
        src: VertexId,
        dst: VertexId,
        capacity: i64,
    },
    #[error("edge ({src}, {dst}) event has a zero capacity delta")]
    ZeroDelta { src: VertexId, dst: VertexId },
    #[error("invalid engine configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphCounters {
    /// Historical maximum vertex count, source and sink included.
    pub n_max: u64,
    /// Vertex count the terminal heights are pinned to.
    pub n_projected: u64,
    pub alpha: f64,
}

/// `ceil(alpha * n)`, ignoring float noise right at an integer.
pub fn projected_count(alpha: f64, n: u64) -> u64 {
    let x = alpha * n as f64;
    let r = x.round();
    let p = if (x - r).abs() < 1e-9 { r } else { x.ceil() };
    (p as u64).max(n)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryResult {
    pub trigger_timestamp: Timestamp,
    pub flow_value: u64,
    pub involved_vertices: BTreeSet<VertexId>,
    pub latency: Duration,
    pub events_ingested: u64,
}

/// A frozen copy of every vertex, taken at quiescence.
#[derive(Debug, Clone)]
pub struct EngineSnapshot {
    pub source: VertexId,
    pub sink: VertexId,
    pub n_max: u64,
    pub n_projected: u64,
    pub vertices: BTreeMap<VertexId, VertexState>,
}

impl EngineSnapshot {
    pub fn violations(&self) -> Vec<Violation> {
        check_invariants(&self.vertices, self.n_max)
    }

    pub fn sink_excess(&self) -> i64 {
        self.vertices.get(&self.sink).map_or(0, |t| t.excess)
    }
}

enum Backend {
    Threaded(ThreadedBackend),
    Sim(SimBackend),
}

impl Backend {
    fn push_topology(&mut self, worker: usize, item: TopoItem) {
        match self {
            Backend::Threaded(b) => b.push_topology(worker, item),
            Backend::Sim(b) => b.push_topology(worker, item),
        }
    }

    fn after_ingest(&mut self) {
        if let Backend::Sim(b) = self {
            b.after_ingest();
        }
    }

    fn flush(&mut self) {
        if let Backend::Threaded(b) = self {
            b.flush();
        }
    }

    fn is_quiescent(&self) -> bool {
        match self {
            Backend::Threaded(b) => b.is_quiescent(),
            Backend::Sim(b) => b.is_quiescent(),
        }
    }

    fn broadcast(&mut self, cmd: Control) -> Vec<Reply> {
        match self {
            Backend::Threaded(b) => b.broadcast(cmd),
            Backend::Sim(b) => b.broadcast(cmd),
        }
    }

    fn total_lifts(&self) -> u64 {
        match self {
            Backend::Threaded(b) => b.total_lifts(),
            Backend::Sim(b) => b.total_lifts(),
        }
    }
}

/// A standing `(source, sink)` max-flow query over a changing graph.
pub struct Engine {
    config: EngineConfig,
    backend: Backend,
    capacities: FxHashMap<(VertexId, VertexId), i64>,
    vertices: FxHashSet<VertexId>,
    counters: GraphCounters,
    gr: GrState,
    events_ingested: u64,
    since_gr_check: u32,
    epoch: Instant,
}

const GR_CHECK_EVERY: u32 = 1024;

impl Engine {
    pub fn new(config: EngineConfig) -> Result<Self, EngineError> {
        config.validate()?;
        let n_max = 2;
        let n_projected = projected_count(config.alpha, n_max);
        let backend = match config.schedule {
            Schedule::Threaded => Backend::Threaded(ThreadedBackend::new(
                config.workers,
                config.source,
                config.sink,
                n_projected,
                config.topology_batch,
            )),
            Schedule::Deterministic { seed } => Backend::Sim(SimBackend::new(
                config.workers,
                config.source,
                config.sink,
                n_projected,
                seed,
            )),
        };
        let vertices = [config.source, config.sink].into_iter().collect();
        Ok(Engine {
            gr: GrState::new(config.gr.clone()),
            counters: GraphCounters {
                n_max,
                n_projected,
                alpha: config.alpha,
            },
            config,
            backend,
            capacities: FxHashMap::default(),
            vertices,
            events_ingested: 0,
            since_gr_check: 0,
            epoch: Instant::now(),
        })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn counters(&self) -> GraphCounters {
        self.counters
    }

    pub fn gr_state(&self) -> &GrState {
        &self.gr
    }

    pub fn events_ingested(&self) -> u64 {
        self.events_ingested
    }

    fn owner(&self, id: VertexId) -> usize {
        owner(id, self.config.workers)
    }

    fn now(&self) -> Duration {
        match &self.backend {
            Backend::Threaded(_) => self.epoch.elapsed(),
            Backend::Sim(b) => Duration::from_micros(b.clock_us()),
        }
    }

    /// Applies one capacity change. Rejected events leave the engine
    /// untouched.
    pub fn ingest(&mut self, ev: TopologyEvent) -> Result<(), EngineError> {
        let (src, dst, delta) = (ev.src, ev.dst, ev.capacity_delta);
        if delta == 0 {
            return Err(EngineError::ZeroDelta { src, dst });
        }
        let current = self.capacities.get(&(src, dst)).copied().unwrap_or(0);
        let capacity = current + delta;
        if capacity < 0 {
            return Err(EngineError::StreamValidity { src, dst, capacity });
        }
        if capacity == 0 {
            self.capacities.remove(&(src, dst));
        } else {
            self.capacities.insert((src, dst), capacity);
        }

        for v in [src, dst] {
            if self.vertices.insert(v) {
                self.counters.n_max += 1;
            }
        }
        if self.counters.n_max > self.counters.n_projected {
            let n = projected_count(self.counters.alpha, self.counters.n_max);
            self.counters.n_projected = n;
            let (s, t) = (self.owner(self.config.source), self.owner(self.config.sink));
            self.backend.push_topology(s, TopoItem::NewMax(n));
            if t != s {
                self.backend.push_topology(t, TopoItem::NewMax(n));
            }
        }
        let w = self.owner(src);
        self.backend.push_topology(w, TopoItem::Edge { src, dst, delta });
        self.events_ingested += 1;
        self.backend.after_ingest();

        self.since_gr_check += 1;
        if self.since_gr_check >= GR_CHECK_EVERY {
            self.since_gr_check = 0;
            self.maybe_global_relabel();
        }
        Ok(())
    }

    /// Hands buffered topology events to the workers.
    pub fn flush(&mut self) {
        self.backend.flush();
    }

    /// Flushes, then reports whether anything is queued or in flight.
    pub fn is_quiescent(&mut self) -> bool {
        self.backend.flush();
        self.backend.is_quiescent()
    }

    /// Total items queued anywhere in the fabric. Meant for inspection at
    /// quiescence.
    pub fn inspect_queues(&mut self) -> usize {
        match &mut self.backend {
            Backend::Sim(b) => b.queue_len(),
            Backend::Threaded(b) => b
                .broadcast(Control::QueueLen)
                .into_iter()
                .map(|r| match r {
                    Reply::QueueLen(n) => n,
                    _ => unreachable!("queue length request answered with {r:?}"),
                })
                .sum(),
        }
    }

    fn progress(&mut self, backoff: &Backoff) {
        match &mut self.backend {
            Backend::Sim(b) => b.progress(),
            Backend::Threaded(_) => {
                if backoff.is_completed() {
                    std::thread::sleep(Duration::from_micros(50));
                } else {
                    backoff.snooze();
                }
            }
        }
    }

    fn wait_quiescent(&mut self) {
        self.backend.flush();
        let backoff = Backoff::new();
        while !self.backend.is_quiescent() {
            self.progress(&backoff);
        }
    }

    /// Runs until quiescent, with global relabels allowed to fire.
    fn converge(&mut self) {
        self.backend.flush();
        let backoff = Backoff::new();
        while !self.backend.is_quiescent() {
            if self.maybe_global_relabel() {
                backoff.reset();
                continue;
            }
            self.progress(&backoff);
        }
    }

    fn maybe_global_relabel(&mut self) -> bool {
        self.gr.observe_lifts(self.backend.total_lifts());
        if !self.gr.check_trigger(self.now(), self.counters.n_max) {
            return false;
        }
        self.backend.flush();
        if self.backend.is_quiescent() {
            return false;
        }
        self.global_relabel(false);
        true
    }

    fn advance(&mut self, phase: GrPhase) {
        let now = self.now();
        self.gr
            .advance(phase, now)
            .expect("global relabel phases are driven in order");
    }

    fn global_relabel(&mut self, capture: bool) -> Option<EngineSnapshot> {
        self.advance(GrPhase::Drain);
        self.backend.broadcast(Control::SetMode(ExecMode::NoLift));
        self.wait_quiescent();
        self.advance(GrPhase::RelabelUp);
        self.backend
            .broadcast(Control::RelabelUp(self.counters.n_projected));
        self.advance(GrPhase::RelabelDown);
        self.backend.broadcast(Control::SeedDescent);
        self.wait_quiescent();
        let snapshot = capture.then(|| self.take_snapshot());
        self.backend.broadcast(Control::Resume);
        self.advance(GrPhase::Normal);
        self.gr.reset_lifts(self.backend.total_lifts());
        snapshot
    }

    /// Runs a full global relabel now.
    pub fn force_global_relabel(&mut self) {
        self.global_relabel(false);
    }

    /// Runs a global relabel and captures the state right after the descent,
    /// before any vertex resumes pushing.
    pub fn global_relabel_and_capture(&mut self) -> EngineSnapshot {
        self.global_relabel(true).expect("capture requested")
    }

    fn take_snapshot(&mut self) -> EngineSnapshot {
        let mut vertices = BTreeMap::new();
        for reply in self.backend.broadcast(Control::Snapshot) {
            match reply {
                Reply::Snapshot(vs) => vertices.extend(vs.into_iter().map(|v| (v.id, v))),
                other => unreachable!("snapshot request answered with {other:?}"),
            }
        }
        EngineSnapshot {
            source: self.config.source,
            sink: self.config.sink,
            n_max: self.counters.n_max,
            n_projected: self.counters.n_projected,
            vertices,
        }
    }

    /// Converges, then copies out every vertex.
    pub fn snapshot(&mut self) -> EngineSnapshot {
        self.converge();
        self.take_snapshot()
    }

    /// Blocks ingestion, converges and extracts the flow value and the set of
    /// vertices carrying flow.
    pub fn query(&mut self, trigger_timestamp: Timestamp) -> QueryResult {
        let requested = Instant::now();
        self.converge();
        let mut sink_excess = 0;
        let mut involved = BTreeSet::new();
        for reply in self.backend.broadcast(Control::Collect) {
            match reply {
                Reply::Collected {
                    sink_excess: e,
                    involved: vs,
                } => {
                    if let Some(e) = e {
                        sink_excess = e;
                    }
                    involved.extend(vs);
                }
                other => unreachable!("collect request answered with {other:?}"),
            }
        }
        let value = sink_excess + self.config.debug_flow_offset;
        QueryResult {
            trigger_timestamp,
            flow_value: value.max(0) as u64,
            involved_vertices: involved,
            latency: requested.elapsed(),
            events_ingested: self.events_ingested,
        }
    }

    /// The aggregate capacity graph ingested so far.
    pub fn graph(&self) -> StaticGraph {
        let mut g = StaticGraph::new();
        for &v in &self.vertices {
            g.add_vertex(v);
        }
        for (&(u, v), &c) in &self.capacities {
            g.apply_delta(u, v, c)
                .expect("stored capacities are positive");
        }
        g
    }

    pub fn capacity(&self, src: VertexId, dst: VertexId) -> i64 {
        self.capacities.get(&(src, dst)).copied().unwrap_or(0)
    }

    /// Whether a deterministic run ever let a worker read a message while it
    /// had topology queued.
    pub fn topology_priority_violated(&self) -> bool {
        match &self.backend {
            Backend::Sim(b) => b.priority_violated,
            Backend::Threaded(_) => false,
        }
    }
}
