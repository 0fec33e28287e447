//! Streaming maximum flow over a dynamic graph.
//!
//! Topology events (edge capacity additions and deletions) are ingested into
//! an in-process, shared-nothing engine running an asynchronous
//! vertex-centric push-relabel program. Queries block ingestion, wait for
//! quiescence and read the flow value off the sink.
//!
//! ```
//! use dynflow_core::{Engine, EngineConfig, TopologyEvent};
//!
//! let mut engine = Engine::new(EngineConfig::new(0, 3)).unwrap();
//! for (src, dst, cap) in [(0, 1, 10), (0, 2, 10), (1, 3, 10), (2, 3, 10), (1, 2, 5)] {
//!     engine.ingest(TopologyEvent::add(0, src, dst, cap)).unwrap();
//! }
//! assert_eq!(engine.query(0).flow_value, 20);
//! ```

pub mod event;
pub mod global_relabel;
pub mod maxflow;
pub mod metrics;
pub mod oracle;
pub mod runtime;
pub mod session;

/// Vertex identifiers as they appear in event logs.
pub type VertexId = u64;

pub use event::{StreamConfig, StreamError, Timestamp, TopologyEvent};
pub use global_relabel::{GrConfig, GrPhase, GrState};
pub use maxflow::{Height, VertexKind, VertexState};
pub use metrics::{stability_score, QueryRecord, ThroughputSummary};
pub use oracle::{max_flow_reference, StaticGraph};
pub use runtime::{Engine, EngineConfig, EngineError, EngineSnapshot, QueryResult, Schedule};
pub use session::{run_session, RunReport, SessionConfig, SessionError};
