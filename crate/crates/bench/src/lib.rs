//! Synthetic event streams for benchmarking.

use std::time::{Duration, Instant};

use dynflow_core::{Engine, EngineConfig, TopologyEvent, VertexId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const SOURCE: VertexId = 0;
pub const SINK: VertexId = 1;

/// A growing multigraph: endpoints are drawn preferentially from vertices
/// already seen, new vertices appear at a steady rate, and the source and
/// sink are wired in often enough to carry real flow. Timestamps count
/// events.
pub fn growth_stream(events: usize, seed: u64) -> Vec<TopologyEvent> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen: Vec<VertexId> = vec![2, 3];
    let mut next: VertexId = 4;
    let mut out = Vec::with_capacity(events);
    for ts in 0..events as u64 {
        let mut pick = |rng: &mut ChaCha8Rng| {
            if rng.gen_bool(0.1) {
                let v = next;
                next += 1;
                seen.push(v);
                v
            } else {
                // the endpoint list repeats busy vertices, which biases
                // draws towards them
                let v = seen[rng.gen_range(0..seen.len())];
                seen.push(v);
                v
            }
        };
        let src = if rng.gen_bool(0.05) { SOURCE } else { pick(&mut rng) };
        let dst = if rng.gen_bool(0.05) { SINK } else { pick(&mut rng) };
        if src == dst {
            continue;
        }
        out.push(TopologyEvent::add(ts, src, dst, rng.gen_range(1..=5)));
    }
    out
}

/// Ingests every event, queries once at the end and returns the elapsed
/// time with the flow value.
pub fn saturation_run(config: EngineConfig, events: &[TopologyEvent]) -> (Duration, u64) {
    let mut engine = Engine::new(config).expect("valid configuration");
    let start = Instant::now();
    for &ev in events {
        engine.ingest(ev).expect("generated streams are delete-valid");
    }
    let value = engine.query(events.last().map_or(0, |e| e.timestamp)).flow_value;
    (start.elapsed(), value)
}
