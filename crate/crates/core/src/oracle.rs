//! Static reference max-flow (shortest augmenting paths) used to cross-check
//! the streaming engine.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use thiserror::Error;

use crate::event::TopologyEvent;
use crate::VertexId;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OracleError {
    #[error("source and sink must differ (both are {0})")]
    SameEndpoints(VertexId),
    #[error("capacity of ({src}, {dst}) would become negative ({capacity})")]
    NegativeCapacity {
        src: VertexId,
        dst: VertexId,
        capacity: i64,
    },
}

/// Aggregate capacities over ordered vertex pairs. Self-loops are dropped.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StaticGraph {
    vertices: BTreeSet<VertexId>,
    capacity: BTreeMap<(VertexId, VertexId), u64>,
}

impl StaticGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_vertex(&mut self, v: VertexId) {
        self.vertices.insert(v);
    }

    /// Applies a signed capacity change. Pairs that drop to zero are removed.
    pub fn apply_delta(&mut self, src: VertexId, dst: VertexId, delta: i64) -> Result<(), OracleError> {
        self.vertices.insert(src);
        self.vertices.insert(dst);
        if src == dst {
            return Ok(());
        }
        let current = self.capacity.get(&(src, dst)).copied().unwrap_or(0) as i64;
        let next = current + delta;
        if next < 0 {
            return Err(OracleError::NegativeCapacity {
                src,
                dst,
                capacity: next,
            });
        }
        if next == 0 {
            self.capacity.remove(&(src, dst));
        } else {
            self.capacity.insert((src, dst), next as u64);
        }
        Ok(())
    }

    pub fn apply(&mut self, ev: &TopologyEvent) -> Result<(), OracleError> {
        self.apply_delta(ev.src, ev.dst, ev.capacity_delta)
    }

    pub fn from_events<'a, I>(events: I) -> Result<Self, OracleError>
    where
        I: IntoIterator<Item = &'a TopologyEvent>,
    {
        let mut g = StaticGraph::new();
        for ev in events {
            g.apply(ev)?;
        }
        Ok(g)
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertices(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.vertices.iter().copied()
    }

    pub fn capacity(&self, src: VertexId, dst: VertexId) -> u64 {
        self.capacity.get(&(src, dst)).copied().unwrap_or(0)
    }

    pub fn edges(&self) -> impl Iterator<Item = (VertexId, VertexId, u64)> + '_ {
        self.capacity.iter().map(|(&(u, v), &c)| (u, v, c))
    }

    pub fn edge_count(&self) -> usize {
        self.capacity.len()
    }
}

/// A maximum flow: its value and the flow carried by each capacitated pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowSolution {
    pub value: u64,
    pub flow: BTreeMap<(VertexId, VertexId), u64>,
}

struct Arc {
    to: usize,
    rev: usize,
    cap: u64,
    pair: Option<(VertexId, VertexId)>,
}

/// Edmonds-Karp max flow on the aggregate capacities of `g`.
///
/// A source or sink that does not appear in `g` yields a zero flow.
pub fn max_flow_reference(
    g: &StaticGraph,
    s: VertexId,
    t: VertexId,
) -> Result<FlowSolution, OracleError> {
    if s == t {
        return Err(OracleError::SameEndpoints(s));
    }
    let empty = FlowSolution {
        value: 0,
        flow: BTreeMap::new(),
    };
    if !g.vertices.contains(&s) || !g.vertices.contains(&t) {
        return Ok(empty);
    }
    let ids: Vec<VertexId> = g.vertices.iter().copied().collect();
    let index = |v: VertexId| ids.binary_search(&v).unwrap();
    let mut adj: Vec<Vec<Arc>> = (0..ids.len()).map(|_| Vec::new()).collect();
    for (&(u, v), &c) in &g.capacity {
        let (a, b) = (index(u), index(v));
        let ra = adj[b].len();
        let rb = adj[a].len();
        adj[a].push(Arc {
            to: b,
            rev: ra,
            cap: c,
            pair: Some((u, v)),
        });
        adj[b].push(Arc {
            to: a,
            rev: rb,
            cap: 0,
            pair: None,
        });
    }
    let (si, ti) = (index(s), index(t));
    let mut value = 0u64;
    let mut parent: Vec<Option<(usize, usize)>> = vec![None; ids.len()];
    loop {
        parent.iter_mut().for_each(|p| *p = None);
        let mut seen = vec![false; ids.len()];
        seen[si] = true;
        let mut queue = VecDeque::from([si]);
        while let Some(u) = queue.pop_front() {
            if u == ti {
                break;
            }
            for (k, arc) in adj[u].iter().enumerate() {
                if arc.cap > 0 && !seen[arc.to] {
                    seen[arc.to] = true;
                    parent[arc.to] = Some((u, k));
                    queue.push_back(arc.to);
                }
            }
        }
        if !seen[ti] {
            break;
        }
        let mut bottleneck = u64::MAX;
        let mut v = ti;
        while let Some((u, k)) = parent[v] {
            bottleneck = bottleneck.min(adj[u][k].cap);
            v = u;
        }
        let mut v = ti;
        while let Some((u, k)) = parent[v] {
            adj[u][k].cap -= bottleneck;
            let (to, rev) = (adj[u][k].to, adj[u][k].rev);
            adj[to][rev].cap += bottleneck;
            v = u;
        }
        value += bottleneck;
    }
    let mut flow = BTreeMap::new();
    for arcs in &adj {
        for arc in arcs {
            if let Some(pair) = arc.pair {
                let used = g.capacity[&pair] - arc.cap;
                if used > 0 {
                    flow.insert(pair, used);
                }
            }
        }
    }
    Ok(FlowSolution { value, flow })
}

/// Vertices incident to a pair that carries positive flow.
pub fn throughflow_vertices(flow: &BTreeMap<(VertexId, VertexId), u64>) -> BTreeSet<VertexId> {
    flow.iter()
        .filter(|(_, &f)| f > 0)
        .flat_map(|(&(u, v), _)| [u, v])
        .collect()
}

/// Checks capacity and conservation constraints of `flow` on `g`.
pub fn validate_flow(
    g: &StaticGraph,
    s: VertexId,
    t: VertexId,
    solution: &FlowSolution,
) -> Result<(), String> {
    let mut net: BTreeMap<VertexId, i128> = BTreeMap::new();
    for (&(u, v), &f) in &solution.flow {
        let cap = g.capacity(u, v);
        if f > cap {
            return Err(format!("flow {f} exceeds capacity {cap} on ({u}, {v})"));
        }
        *net.entry(u).or_default() -= f as i128;
        *net.entry(v).or_default() += f as i128;
    }
    for (&v, &e) in &net {
        if v != s && v != t && e != 0 {
            return Err(format!("conservation violated at {v}: net inflow {e}"));
        }
    }
    let into_t = net.get(&t).copied().unwrap_or(0);
    if into_t != solution.value as i128 {
        return Err(format!(
            "value {} disagrees with net inflow {into_t} at the sink",
            solution.value
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn graph(edges: &[(u64, u64, i64)]) -> StaticGraph {
        let mut g = StaticGraph::new();
        for &(u, v, c) in edges {
            g.apply_delta(u, v, c).unwrap();
        }
        g
    }

    fn diamond() -> StaticGraph {
        // s=0, a=1, b=2, t=3
        graph(&[(0, 1, 10), (0, 2, 10), (1, 3, 10), (2, 3, 10), (1, 2, 5)])
    }

    #[test]
    fn single_edge() {
        let g = graph(&[(0, 1, 5)]);
        let sol = max_flow_reference(&g, 0, 1).unwrap();
        assert_eq!(sol.value, 5);
        assert_eq!(throughflow_vertices(&sol.flow), BTreeSet::from([0, 1]));
    }

    #[test]
    fn diamond_value_and_vertices() {
        let g = diamond();
        let sol = max_flow_reference(&g, 0, 3).unwrap();
        assert_eq!(sol.value, 20);
        validate_flow(&g, 0, 3, &sol).unwrap();
        assert_eq!(throughflow_vertices(&sol.flow), BTreeSet::from([0, 1, 2, 3]));
    }

    #[test]
    fn unreachable_sink_and_missing_vertices() {
        let g = graph(&[(0, 1, 5), (2, 3, 5)]);
        let sol = max_flow_reference(&g, 0, 3).unwrap();
        assert_eq!(sol.value, 0);
        assert!(throughflow_vertices(&sol.flow).is_empty());
        assert_eq!(max_flow_reference(&g, 0, 99).unwrap().value, 0);
    }

    #[test]
    fn same_endpoints_is_an_error() {
        assert_eq!(
            max_flow_reference(&diamond(), 1, 1),
            Err(OracleError::SameEndpoints(1))
        );
    }

    #[test]
    fn deltas_aggregate_and_self_loops_vanish() {
        let mut g = graph(&[(0, 1, 3), (0, 1, 2), (1, 1, 7)]);
        assert_eq!(g.capacity(0, 1), 5);
        assert_eq!(g.edge_count(), 1);
        g.apply_delta(0, 1, -5).unwrap();
        assert_eq!(g.edge_count(), 0);
        assert!(matches!(
            g.apply_delta(0, 1, -1),
            Err(OracleError::NegativeCapacity { .. })
        ));
    }

    /// Enumerates every simple s-t path over a unit-capacity multigraph (each
    /// parallel edge distinct) and returns the size of the largest set of
    /// pairwise edge-disjoint paths.
    fn brute_force_disjoint_paths(n: u64, edges: &[(u64, u64)], s: u64, t: u64) -> u64 {
        fn walk(
            at: u64,
            t: u64,
            edges: &[(u64, u64)],
            visited: &mut Vec<u64>,
            used: &mut Vec<usize>,
            out: &mut Vec<u64>,
        ) {
            if at == t {
                out.push(used.iter().fold(0u64, |m, &e| m | (1 << e)));
                return;
            }
            for (k, &(u, v)) in edges.iter().enumerate() {
                if u == at && !visited.contains(&v) {
                    visited.push(v);
                    used.push(k);
                    walk(v, t, edges, visited, used, out);
                    used.pop();
                    visited.pop();
                }
            }
        }
        fn best(paths: &[u64], from: usize, taken: u64) -> u64 {
            let mut result = 0;
            for i in from..paths.len() {
                if paths[i] & taken == 0 {
                    result = result.max(1 + best(paths, i + 1, taken | paths[i]));
                }
            }
            result
        }
        let _ = n;
        let mut paths = Vec::new();
        walk(s, t, edges, &mut vec![s], &mut Vec::new(), &mut paths);
        best(&paths, 0, 0)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn matches_disjoint_path_enumeration(
            n in 3u64..=8,
            raw in prop::collection::vec((0u64..8, 0u64..8), 0..12),
        ) {
            let edges: Vec<(u64, u64)> = raw
                .into_iter()
                .map(|(u, v)| (u % n, v % n))
                .filter(|(u, v)| u != v)
                .collect();
            let mut g = StaticGraph::new();
            for v in 0..n {
                g.add_vertex(v);
            }
            for &(u, v) in &edges {
                g.apply_delta(u, v, 1).unwrap();
            }
            let sol = max_flow_reference(&g, 0, n - 1).unwrap();
            validate_flow(&g, 0, n - 1, &sol).unwrap();
            prop_assert_eq!(sol.value, brute_force_disjoint_paths(n, &edges, 0, n - 1));
        }

        #[test]
        fn value_is_order_independent(
            raw in prop::collection::vec((0u64..6, 0u64..6, 1i64..10), 1..30),
            seed in any::<u64>(),
        ) {
            let events: Vec<TopologyEvent> =
                raw.iter().map(|&(u, v, c)| TopologyEvent::add(0, u, v, c)).collect();
            let mut shuffled = events.clone();
            let mut x = seed | 1;
            for i in (1..shuffled.len()).rev() {
                x ^= x << 13;
                x ^= x >> 7;
                x ^= x << 17;
                shuffled.swap(i, (x % (i as u64 + 1)) as usize);
            }
            let a = max_flow_reference(&StaticGraph::from_events(&events).unwrap(), 0, 5).unwrap();
            let b = max_flow_reference(&StaticGraph::from_events(&shuffled).unwrap(), 0, 5).unwrap();
            prop_assert_eq!(a.value, b.value);
        }
    }
}
