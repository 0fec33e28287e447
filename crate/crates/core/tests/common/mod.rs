//! Test-side reference implementations and stream generators. Nothing here
//! reuses the crate's own solver, so agreement is meaningful.

#![allow(dead_code)]

use std::collections::{BTreeMap, BinaryHeap, HashMap, VecDeque};
use std::cmp::Reverse;
use std::io::Write;

use dynflow_core::{EngineSnapshot, Height, TopologyEvent, VertexId, VertexKind};
use rand::seq::SliceRandom;
use rand::Rng;

/// Aggregate capacities, kept independently of the engine.
#[derive(Debug, Clone, Default)]
pub struct Graph {
    pub cap: BTreeMap<(VertexId, VertexId), i64>,
}

impl Graph {
    pub fn apply(&mut self, ev: &TopologyEvent) {
        let c = self.cap.entry((ev.src, ev.dst)).or_insert(0);
        *c += ev.capacity_delta;
        assert!(*c >= 0, "generator produced an invalid deletion");
        if *c == 0 {
            self.cap.remove(&(ev.src, ev.dst));
        }
    }

    pub fn from_events(events: &[TopologyEvent]) -> Self {
        let mut g = Graph::default();
        for e in events {
            g.apply(e);
        }
        g
    }
}

/// Dinic's algorithm over an adjacency list.
pub fn dinic(graph: &Graph, s: VertexId, t: VertexId) -> i64 {
    let mut ids: HashMap<VertexId, usize> = HashMap::new();
    let id = |v: VertexId, ids: &mut HashMap<VertexId, usize>| {
        let n = ids.len();
        *ids.entry(v).or_insert(n)
    };
    let (si, ti) = (id(s, &mut ids), id(t, &mut ids));
    let mut arcs: Vec<(usize, usize, i64)> = Vec::new();
    for (&(u, v), &c) in &graph.cap {
        if u != v && c > 0 {
            arcs.push((id(u, &mut ids), id(v, &mut ids), c));
        }
    }
    let n = ids.len();
    let mut head = vec![Vec::new(); n];
    let mut to = Vec::new();
    let mut cap = Vec::new();
    for (u, v, c) in arcs {
        head[u].push(to.len());
        to.push(v);
        cap.push(c);
        head[v].push(to.len());
        to.push(u);
        cap.push(0);
    }
    let mut total = 0;
    loop {
        let mut level = vec![usize::MAX; n];
        level[si] = 0;
        let mut q = VecDeque::from([si]);
        while let Some(u) = q.pop_front() {
            for &e in &head[u] {
                if cap[e] > 0 && level[to[e]] == usize::MAX {
                    level[to[e]] = level[u] + 1;
                    q.push_back(to[e]);
                }
            }
        }
        if level[ti] == usize::MAX {
            return total;
        }
        let mut it = vec![0usize; n];
        loop {
            // iterative blocking-flow DFS
            let mut path: Vec<usize> = Vec::new();
            let mut u = si;
            let pushed = loop {
                if u == ti {
                    let f = path.iter().map(|&e| cap[e]).min().unwrap();
                    for &e in &path {
                        cap[e] -= f;
                        cap[e ^ 1] += f;
                    }
                    break f;
                }
                let mut advanced = false;
                while it[u] < head[u].len() {
                    let e = head[u][it[u]];
                    if cap[e] > 0 && level[to[e]] == level[u] + 1 {
                        path.push(e);
                        u = to[e];
                        advanced = true;
                        break;
                    }
                    it[u] += 1;
                }
                if !advanced {
                    if u == si {
                        break 0;
                    }
                    level[u] = usize::MAX;
                    let e = path.pop().unwrap();
                    u = to[e ^ 1];
                    it[u] += 1;
                }
            };
            if pushed == 0 {
                break;
            }
            total += pushed;
        }
    }
}

fn finite(h: Height) -> Option<u64> {
    h.get()
}

/// Expected post-relabel heights on the frozen residual graph of `snap`.
///
/// Positive heights: the sink and every normal vertex in deficit are fixed
/// at 0, the source at the projected count; every other vertex is one more
/// than its lowest residual successor. Negative heights mirror this with the
/// source at 0 and the sink at the projected count, following residual arcs
/// forwards.
pub fn expected_heights(snap: &EngineSnapshot) -> BTreeMap<VertexId, (Option<u64>, Option<u64>)> {
    let np = snap.n_projected;
    // succ[v] = {w : c_f(v,w) > 0}; pred is its reverse
    let mut pred: HashMap<VertexId, Vec<VertexId>> = HashMap::new();
    let mut succ: HashMap<VertexId, Vec<VertexId>> = HashMap::new();
    for (&v, state) in &snap.vertices {
        for m in state.neighbours() {
            if m.res_cap_out > 0 {
                succ.entry(v).or_default().push(m.id);
                pred.entry(m.id).or_default().push(v);
            }
        }
    }
    let run = |anchors: Vec<(VertexId, u64)>, arcs: &HashMap<VertexId, Vec<VertexId>>| {
        let fixed: HashMap<VertexId, u64> = anchors.iter().copied().collect();
        let mut dist: HashMap<VertexId, u64> = HashMap::new();
        let mut heap = BinaryHeap::new();
        for &(v, d) in &anchors {
            dist.insert(v, d);
            heap.push(Reverse((d, v)));
        }
        while let Some(Reverse((d, v))) = heap.pop() {
            if dist.get(&v) != Some(&d) {
                continue;
            }
            for &u in arcs.get(&v).map(Vec::as_slice).unwrap_or(&[]) {
                if fixed.contains_key(&u) {
                    continue;
                }
                if dist.get(&u).is_none_or(|&old| d + 1 < old) {
                    dist.insert(u, d + 1);
                    heap.push(Reverse((d + 1, u)));
                }
            }
        }
        dist
    };
    let mut pos_anchors = vec![(snap.sink, 0), (snap.source, np)];
    for (&v, state) in &snap.vertices {
        if state.kind == VertexKind::Normal && state.excess < 0 {
            pos_anchors.push((v, 0));
        }
    }
    // h(v) follows residual arcs v -> w, so walk predecessors from anchors
    let pos = run(pos_anchors, &pred);
    let neg = run(vec![(snap.source, 0), (snap.sink, np)], &succ);
    snap.vertices
        .keys()
        .map(|&v| (v, (pos.get(&v).copied(), neg.get(&v).copied())))
        .collect()
}

/// Heights actually held by the engine, for comparison with
/// [`expected_heights`].
pub fn actual_heights(snap: &EngineSnapshot) -> BTreeMap<VertexId, (Option<u64>, Option<u64>)> {
    snap.vertices
        .iter()
        .map(|(&v, s)| (v, (finite(s.height_pos), finite(s.height_neg))))
        .collect()
}

/// A random add-only multigraph stream in random order.
pub fn add_only_stream<R: Rng>(rng: &mut R, max_vertices: u64, max_events: usize) -> (VertexId, VertexId, Vec<TopologyEvent>) {
    let n = rng.gen_range(2..=max_vertices);
    let count = rng.gen_range(1..=max_events);
    let s = rng.gen_range(0..n);
    let t = loop {
        let t = rng.gen_range(0..n);
        if t != s {
            break t;
        }
    };
    let mut pairs: Vec<(u64, u64, i64)> = (0..count)
        .map(|_| {
            let u = rng.gen_range(0..n);
            let v = rng.gen_range(0..n);
            (u, v, rng.gen_range(1..=20))
        })
        .collect();
    pairs.shuffle(rng);
    let events = pairs
        .into_iter()
        .enumerate()
        .map(|(i, (u, v, c))| TopologyEvent::add(i as u64, u, v, c))
        .collect();
    (s, t, events)
}

/// A delete-valid stream of interleaved additions and deletions with at
/// least 30% deletions, covering full-edge removals, partial decreases and
/// isolation of whole vertices.
pub fn mixed_stream<R: Rng>(rng: &mut R, max_vertices: u64, max_events: usize) -> (VertexId, VertexId, Vec<TopologyEvent>) {
    let n = rng.gen_range(3..=max_vertices);
    let target = rng.gen_range(20..=max_events.max(20));
    let s = rng.gen_range(0..n);
    let t = loop {
        let t = rng.gen_range(0..n);
        if t != s {
            break t;
        }
    };
    let mut live: BTreeMap<(u64, u64), i64> = BTreeMap::new();
    let mut events = Vec::new();
    let mut deletions = 0usize;
    let mut ts = 0u64;
    let del = |events: &mut Vec<TopologyEvent>, live: &mut BTreeMap<(u64, u64), i64>, key: (u64, u64), w: i64, ts: u64| {
        let c = live.get_mut(&key).unwrap();
        *c -= w;
        if *c == 0 {
            live.remove(&key);
        }
        events.push(TopologyEvent::delete(ts, key.0, key.1, w));
    };
    while events.len() < target {
        ts += rng.gen_range(0..3);
        let r: f64 = rng.gen();
        if r < 0.42 && !live.is_empty() {
            let keys: Vec<_> = live.keys().copied().collect();
            let key = *keys.choose(rng).unwrap();
            let c = live[&key];
            let kind: f64 = rng.gen();
            if kind < 0.55 {
                del(&mut events, &mut live, key, c, ts);
                deletions += 1;
            } else if kind < 0.85 {
                let w = if c > 1 { rng.gen_range(1..c) } else { 1 };
                del(&mut events, &mut live, key, w, ts);
                deletions += 1;
            } else {
                let x = if rng.gen_bool(0.5) { key.0 } else { key.1 };
                let incident: Vec<_> = live.keys().copied().filter(|&(a, b)| a == x || b == x).collect();
                for k in incident {
                    let c = live[&k];
                    del(&mut events, &mut live, k, c, ts);
                    deletions += 1;
                }
            }
        } else {
            let u = rng.gen_range(0..n);
            let v = rng.gen_range(0..n);
            let w = rng.gen_range(1..=20);
            *live.entry((u, v)).or_insert(0) += w;
            events.push(TopologyEvent::add(ts, u, v, w));
        }
    }
    while (deletions as f64) < 0.3 * events.len() as f64 && !live.is_empty() {
        let key = *live.keys().next().unwrap();
        let c = live[&key];
        del(&mut events, &mut live, key, c, ts);
        deletions += 1;
    }
    (s, t, events)
}

/// Growing multigraph with a steady trickle of new vertices; source 0 and
/// sink 1 are wired in at a fixed rate. Timestamps count events.
pub fn growth_stream<R: Rng>(rng: &mut R, events: usize) -> Vec<TopologyEvent> {
    let mut seen: Vec<VertexId> = vec![2, 3];
    let mut next: VertexId = 4;
    let mut out = Vec::with_capacity(events);
    let mut ts = 0;
    while out.len() < events {
        let mut pick = |rng: &mut R| {
            let v = if rng.gen_bool(0.1) {
                next += 1;
                next - 1
            } else {
                seen[rng.gen_range(0..seen.len())]
            };
            seen.push(v);
            v
        };
        let u = if rng.gen_bool(0.05) { 0 } else { pick(rng) };
        let v = if rng.gen_bool(0.05) { 1 } else { pick(rng) };
        if u != v {
            out.push(TopologyEvent::add(ts, u, v, rng.gen_range(1..=5)));
            ts += 1;
        }
    }
    out
}

pub fn verdict(criterion: u32, pass: bool, detail: &str) {
    let word = if pass { "PASS" } else { "FAIL" };
    line(&format!("criterion {criterion}: {word} - {detail}"));
}

pub fn warn(criterion: u32, detail: &str) {
    line(&format!("criterion {criterion}: WARN - {detail}"));
}

/// Writes straight to the process stdout so the line shows up even when
/// the harness captures test output.
pub fn line(s: &str) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{s}");
    let _ = out.flush();
}
