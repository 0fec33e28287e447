//! A complete streaming run: events in, one record per query out.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use thiserror::Error;

use crate::event::{SlidingWindow, StreamError, Throttle, Timestamp, TopologyEvent};
use crate::metrics::{stability_score, QueryRecord, QuerySchedule, RunSummary, Segment};
use crate::oracle::{max_flow_reference, StaticGraph};
use crate::runtime::{Engine, EngineConfig, EngineError, QueryResult};
use crate::VertexId;

#[derive(Debug, Clone)]
pub struct SessionConfig {
    pub engine: EngineConfig,
    /// Dataset time between queries.
    pub query_interval: Timestamp,
    /// Retract additions older than this; the input must be add-only.
    pub window: Option<Timestamp>,
    /// Offered events per second.
    pub rate: Option<f64>,
    /// Compare every query against the reference solver.
    pub oracle_check: bool,
    /// Answer each query with a fresh engine built from the current graph.
    pub static_baseline: bool,
}

impl SessionConfig {
    pub fn new(engine: EngineConfig, query_interval: Timestamp) -> Self {
        SessionConfig {
            engine,
            query_interval,
            window: None,
            rate: None,
            oracle_check: false,
            static_baseline: false,
        }
    }

    pub fn validate(&self) -> Result<(), SessionError> {
        if self.query_interval == 0 {
            return Err(SessionError::Config("query interval must be positive".into()));
        }
        if self.window == Some(0) {
            return Err(SessionError::Config("window size must be positive".into()));
        }
        if let Some(r) = self.rate {
            if !(r.is_finite() && r > 0.0) {
                return Err(SessionError::Config(format!("offered rate must be positive, got {r}")));
            }
        }
        self.engine
            .validate()
            .map_err(|e| SessionError::Config(e.to_string()))
    }
}

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Stream(#[from] StreamError),
    #[error("event {index}: {source}")]
    Engine {
        index: u64,
        #[source]
        source: EngineError,
    },
    #[error("query at {trigger}: engine reported {engine}, reference solver found {oracle}")]
    OracleMismatch {
        trigger: Timestamp,
        engine: u64,
        oracle: u64,
    },
}

impl SessionError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            SessionError::Config(_) | SessionError::Stream(StreamError::Config(_)) => 2,
            SessionError::OracleMismatch { .. } => 3,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub records: Vec<QueryRecord>,
    pub results: Vec<QueryResult>,
    pub summary: RunSummary,
}

/// Builds a fresh engine from `graph` and queries it once.
fn static_query(config: &EngineConfig, graph: &StaticGraph, trigger: Timestamp) -> QueryResult {
    let mut engine = Engine::new(config.clone()).expect("configuration validated");
    for (u, v, c) in graph.edges() {
        engine
            .ingest(TopologyEvent::add(trigger, u, v, c as i64))
            .expect("aggregate capacities are positive");
    }
    engine.query(trigger)
}

struct Driver<'a> {
    config: &'a SessionConfig,
    engine: Engine,
    graph: Option<StaticGraph>,
    // the static graph drops loops, but deleting one must still be checked
    loops: BTreeMap<VertexId, i64>,
    ingested: u64,
    previous: BTreeSet<VertexId>,
    segment_start: Instant,
    segment_events: u64,
    records: Vec<QueryRecord>,
    results: Vec<QueryResult>,
    segments: Vec<Segment>,
}

impl Driver<'_> {
    fn query(&mut self, trigger: Timestamp) -> Result<(), SessionError> {
        let mut result = match &self.graph {
            Some(graph) => static_query(&self.config.engine, graph, trigger),
            None => self.engine.query(trigger),
        };
        result.events_ingested = self.ingested;
        let segment = Segment {
            events: self.ingested - self.segment_events,
            duration: self.segment_start.elapsed(),
        };
        if self.config.oracle_check {
            let graph = match &self.graph {
                Some(g) => g.clone(),
                None => self.engine.graph(),
            };
            let oracle = max_flow_reference(&graph, self.config.engine.source, self.config.engine.sink)
                .map_err(|e| SessionError::Config(e.to_string()))?
                .value;
            if oracle != result.flow_value {
                return Err(SessionError::OracleMismatch {
                    trigger,
                    engine: result.flow_value,
                    oracle,
                });
            }
        }
        let stability = stability_score(&result.involved_vertices, &self.previous);
        self.records.push(QueryRecord {
            trigger_timestamp: trigger,
            events_ingested: self.ingested,
            flow_value: result.flow_value,
            latency_ms: result.latency.as_secs_f64() * 1e3,
            stability_pct: stability,
            segment_events_per_sec: (!segment.duration.is_zero())
                .then(|| segment.events as f64 / segment.duration.as_secs_f64()),
        });
        self.segments.push(segment);
        self.previous = result.involved_vertices.clone();
        self.results.push(result);
        self.segment_start = Instant::now();
        self.segment_events = self.ingested;
        Ok(())
    }

    fn ingest(&mut self, ev: TopologyEvent) -> Result<(), SessionError> {
        let index = self.ingested;
        let engine_error = |source| SessionError::Engine { index, source };
        match &mut self.graph {
            Some(graph) => {
                let current = if ev.src == ev.dst {
                    self.loops.get(&ev.src).copied().unwrap_or(0)
                } else {
                    graph.capacity(ev.src, ev.dst) as i64
                };
                let capacity = current + ev.capacity_delta;
                if ev.capacity_delta == 0 {
                    return Err(engine_error(EngineError::ZeroDelta {
                        src: ev.src,
                        dst: ev.dst,
                    }));
                }
                if capacity < 0 {
                    return Err(engine_error(EngineError::StreamValidity {
                        src: ev.src,
                        dst: ev.dst,
                        capacity,
                    }));
                }
                graph.add_vertex(ev.src);
                graph.add_vertex(ev.dst);
                if ev.src == ev.dst {
                    self.loops.insert(ev.src, capacity);
                } else {
                    graph.apply(&ev).expect("checked above");
                }
            }
            None => self.engine.ingest(ev).map_err(engine_error)?,
        }
        self.ingested += 1;
        Ok(())
    }
}

/// Streams `events` through an engine, querying whenever an event's
/// timestamp passes the previous trigger by more than the query interval,
/// and once more after the last event.
pub fn run_session<I>(events: I, config: &SessionConfig) -> Result<RunReport, SessionError>
where
    I: Iterator<Item = Result<TopologyEvent, StreamError>>,
{
    config.validate()?;
    let mut engine_config = config.engine.clone();
    if config.rate.is_some() {
        engine_config.topology_batch = 1;
    }
    let mut throttle = Throttle::new(config.rate)?;
    let events: Box<dyn Iterator<Item = Result<TopologyEvent, StreamError>>> = match config.window {
        Some(w) => Box::new(SlidingWindow::new(events, w)?),
        None => Box::new(events),
    };
    let mut driver = Driver {
        config,
        engine: Engine::new(engine_config).map_err(|e| SessionError::Config(e.to_string()))?,
        graph: config.static_baseline.then(StaticGraph::new),
        loops: BTreeMap::new(),
        ingested: 0,
        previous: BTreeSet::new(),
        segment_start: Instant::now(),
        segment_events: 0,
        records: Vec::new(),
        results: Vec::new(),
        segments: Vec::new(),
    };
    let mut schedule = QuerySchedule::new(config.query_interval);
    let mut last_ts = None;
    for ev in events {
        let ev = ev?;
        if schedule.observe(ev.timestamp) {
            driver.query(ev.timestamp)?;
        }
        throttle.acquire();
        driver.ingest(ev)?;
        last_ts = Some(ev.timestamp);
    }
    if let Some(ts) = last_ts {
        driver.query(ts)?;
    }
    let summary = RunSummary::new(driver.ingested, &driver.records, &driver.segments);
    Ok(RunReport {
        records: driver.records,
        results: driver.results,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diamond() -> Vec<Result<TopologyEvent, StreamError>> {
        [(0, 1, 10), (0, 2, 10), (1, 3, 10), (2, 3, 10), (1, 2, 5)]
            .into_iter()
            .enumerate()
            .map(|(i, (u, v, c))| Ok(TopologyEvent::add(i as u64, u, v, c)))
            .collect()
    }

    fn config() -> SessionConfig {
        let mut c = SessionConfig::new(EngineConfig::new(0, 3).deterministic(3), 1000);
        c.oracle_check = true;
        c
    }

    #[test]
    fn empty_stream_has_no_queries() {
        let report = run_session(std::iter::empty(), &config()).unwrap();
        assert_eq!(report.summary.events, 0);
        assert_eq!(report.summary.queries, 0);
    }

    #[test]
    fn single_final_query_on_diamond() {
        let report = run_session(diamond().into_iter(), &config()).unwrap();
        assert_eq!(report.records.len(), 1);
        assert_eq!(report.records[0].flow_value, 20);
        assert_eq!(report.records[0].events_ingested, 5);
        assert_eq!(report.records[0].trigger_timestamp, 4);
    }

    #[test]
    fn queries_fire_before_trigger_event() {
        let mut c = config();
        c.query_interval = 1;
        let report = run_session(diamond().into_iter(), &c).unwrap();
        // triggers at t=2 (after 2 events) and t=4 (after 4), then the final one
        let seen: Vec<_> = report
            .records
            .iter()
            .map(|r| (r.trigger_timestamp, r.events_ingested))
            .collect();
        assert_eq!(seen, vec![(2, 2), (4, 4), (4, 5)]);
    }

    #[test]
    fn oracle_mismatch_is_reported() {
        let mut c = config();
        c.engine.debug_flow_offset = 1;
        let err = run_session(diamond().into_iter(), &c).unwrap_err();
        assert!(matches!(err, SessionError::OracleMismatch { engine: 21, oracle: 20, .. }));
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn static_baseline_matches_values() {
        let mut c = config();
        c.static_baseline = true;
        c.query_interval = 1;
        let report = run_session(diamond().into_iter(), &c).unwrap();
        assert_eq!(report.records.last().unwrap().flow_value, 20);
    }

    #[test]
    fn static_baseline_checks_loop_deletions() {
        let mut c = config();
        c.static_baseline = true;
        let ok = vec![Ok(TopologyEvent::add(0, 1, 1, 4)), Ok(TopologyEvent::delete(1, 1, 1, 4))];
        assert!(run_session(ok.into_iter(), &c).is_ok());
        let bad = vec![Ok(TopologyEvent::add(0, 1, 1, 4)), Ok(TopologyEvent::delete(1, 1, 1, 5))];
        assert_eq!(run_session(bad.into_iter(), &c).unwrap_err().exit_code(), 1);
    }

    #[test]
    fn config_errors_map_to_exit_code_two() {
        let mut c = config();
        c.query_interval = 0;
        assert_eq!(run_session(std::iter::empty(), &c).unwrap_err().exit_code(), 2);
        let mut c = config();
        c.rate = Some(0.0);
        assert_eq!(run_session(std::iter::empty(), &c).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn invalid_deletion_fails_the_run() {
        let events = vec![Ok(TopologyEvent::delete(0, 1, 2, 1))];
        let err = run_session(events.into_iter(), &config()).unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }
}
