use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::partition::{owner, Control, Partition, Reply, TopoItem};
use crate::maxflow::Outgoing;
use crate::VertexId;

/// Single-threaded backend that interleaves virtual workers in an order
/// drawn from a seeded generator. Every run with the same seed and input
/// produces the same trace.
pub(crate) struct SimBackend {
    parts: Vec<Partition>,
    topo: Vec<VecDeque<TopoItem>>,
    // channels[receiver][sender]
    channels: Vec<Vec<VecDeque<Outgoing>>>,
    queued: usize,
    rng: ChaCha8Rng,
    clock_us: u64,
    /// Set when a worker consumed a message while its topology queue was
    /// nonempty. Never expected to be set.
    pub priority_violated: bool,
}

impl SimBackend {
    pub fn new(workers: usize, source: VertexId, sink: VertexId, n_projected: u64, seed: u64) -> Self {
        SimBackend {
            parts: (0..workers)
                .map(|i| Partition::new(i, workers, source, sink, n_projected))
                .collect(),
            topo: (0..workers).map(|_| VecDeque::new()).collect(),
            channels: (0..workers)
                .map(|_| (0..workers).map(|_| VecDeque::new()).collect())
                .collect(),
            queued: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
            clock_us: 0,
            priority_violated: false,
        }
    }

    fn workers(&self) -> usize {
        self.parts.len()
    }

    pub fn clock_us(&self) -> u64 {
        self.clock_us
    }

    pub fn push_topology(&mut self, worker: usize, item: TopoItem) {
        self.topo[worker].push_back(item);
        self.queued += 1;
    }

    fn route(&mut self, from: usize) {
        let workers = self.workers();
        let out = std::mem::take(&mut self.parts[from].out);
        self.queued += out.len();
        for o in out {
            self.channels[owner(o.to, workers)][from].push_back(o);
        }
    }

    pub fn is_quiescent(&self) -> bool {
        self.queued == 0
    }

    pub fn queue_len(&self) -> usize {
        self.queued
    }

    /// Runs one scheduling step. Returns false when nothing is queued.
    pub fn step(&mut self) -> bool {
        if self.queued == 0 {
            return false;
        }
        let workers = self.workers();
        let busy: Vec<usize> = (0..workers)
            .filter(|&w| !self.topo[w].is_empty() || self.channels[w].iter().any(|c| !c.is_empty()))
            .collect();
        let w = busy[self.rng.gen_range(0..busy.len())];
        if let Some(item) = self.topo[w].pop_front() {
            self.queued -= 1;
            self.clock_us += 1;
            self.parts[w].apply_topology(item);
        } else {
            let senders: Vec<usize> = (0..workers).filter(|&s| !self.channels[w][s].is_empty()).collect();
            let s = senders[self.rng.gen_range(0..senders.len())];
            let take = self.rng.gen_range(1..=8usize).min(self.channels[w][s].len());
            if !self.topo[w].is_empty() {
                self.priority_violated = true;
            }
            let mut batch: Vec<Outgoing> = self.channels[w][s].drain(..take).collect();
            self.queued -= take;
            self.clock_us += take as u64;
            self.parts[w].apply_messages(&mut batch);
        }
        self.route(w);
        true
    }

    /// A few random steps, so ingestion and computation interleave.
    pub fn after_ingest(&mut self) {
        let n = self.rng.gen_range(0..=3);
        for _ in 0..n {
            if !self.step() {
                break;
            }
        }
    }

    pub fn progress(&mut self) {
        for _ in 0..256 {
            if !self.step() {
                break;
            }
        }
    }

    pub fn broadcast(&mut self, cmd: Control) -> Vec<Reply> {
        let mut replies = Vec::with_capacity(self.workers());
        for w in 0..self.workers() {
            let queued = self.topo[w].len() + self.channels[w].iter().map(VecDeque::len).sum::<usize>();
            replies.push(self.parts[w].control(cmd, queued));
            self.route(w);
        }
        replies
    }

    pub fn total_lifts(&self) -> u64 {
        self.parts.iter().map(|p| p.lifts).sum()
    }
}
