use rustc_hash::FxHashMap;

use crate::maxflow::{Ctx, ExecMode, Outgoing, VertexKind, VertexState};
use crate::VertexId;

/// Work delivered to the owner of an edge's tail, or to the owners of the
/// source and sink.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum TopoItem {
    Edge {
        src: VertexId,
        dst: VertexId,
        delta: i64,
    },
    NewMax(u64),
}

/// Coordinator commands. Each one is answered with exactly one [`Reply`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Control {
    SetMode(ExecMode),
    /// Reset heights and enter descent mode.
    RelabelUp(u64),
    /// Let every vertex whose height differs from infinity announce it.
    SeedDescent,
    /// Back to normal mode; every vertex holding excess discharges again.
    Resume,
    Collect,
    Snapshot,
    QueueLen,
    Shutdown,
}

#[derive(Debug)]
pub(crate) enum Reply {
    Ack,
    Collected {
        sink_excess: Option<i64>,
        involved: Vec<VertexId>,
    },
    Snapshot(Vec<VertexState>),
    QueueLen(usize),
}

/// Stable hash partitioning of vertex ids over workers.
pub(crate) fn owner(id: VertexId, workers: usize) -> usize {
    let mut z = id.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^= z >> 31;
    (z % workers as u64) as usize
}

/// The vertices owned by one worker, plus the handler plumbing shared by
/// both execution backends. Outgoing messages collect in `out`; the backend
/// routes them after each call.
pub(crate) struct Partition {
    source: VertexId,
    sink: VertexId,
    n_projected: u64,
    vertices: FxHashMap<VertexId, VertexState>,
    mode: ExecMode,
    pub lifts: u64,
    pub out: Vec<Outgoing>,
}

fn materialise(
    vertices: &mut FxHashMap<VertexId, VertexState>,
    id: VertexId,
    source: VertexId,
    sink: VertexId,
    n_projected: u64,
) -> &mut VertexState {
    vertices.entry(id).or_insert_with(|| {
        let kind = if id == source {
            VertexKind::Source
        } else if id == sink {
            VertexKind::Sink
        } else {
            VertexKind::Normal
        };
        VertexState::new(id, kind, n_projected)
    })
}

impl Partition {
    pub fn new(index: usize, workers: usize, source: VertexId, sink: VertexId, n_projected: u64) -> Self {
        let mut p = Partition {
            source,
            sink,
            n_projected,
            vertices: FxHashMap::default(),
            mode: ExecMode::Normal,
            lifts: 0,
            out: Vec::new(),
        };
        for id in [source, sink] {
            if owner(id, workers) == index {
                materialise(&mut p.vertices, id, source, sink, n_projected);
            }
        }
        p
    }

    pub fn apply_topology(&mut self, item: TopoItem) {
        let mut ctx = Ctx::new(self.source, self.mode, &mut self.out);
        match item {
            TopoItem::Edge { src, dst, delta } => {
                materialise(&mut self.vertices, src, self.source, self.sink, self.n_projected)
                    .on_edge_changed(dst, delta, &mut ctx);
            }
            TopoItem::NewMax(n) => {
                self.n_projected = n;
                for id in [self.source, self.sink] {
                    if let Some(v) = self.vertices.get_mut(&id) {
                        v.on_new_max_vertex_count(n, &mut ctx);
                    }
                }
            }
        }
        self.lifts += ctx.lifts;
    }

    /// Handles a batch of messages. Runs addressed to the same vertex are
    /// received one by one and settled once.
    pub fn apply_messages(&mut self, batch: &mut [Outgoing]) {
        batch.sort_by_key(|o| o.to);
        let mut ctx = Ctx::new(self.source, self.mode, &mut self.out);
        let mut i = 0;
        while i < batch.len() {
            let to = batch[i].to;
            let v = materialise(&mut self.vertices, to, self.source, self.sink, self.n_projected);
            while i < batch.len() && batch[i].to == to {
                v.receive(&batch[i].msg, &mut ctx);
                i += 1;
            }
            v.settle(&mut ctx);
        }
        self.lifts += ctx.lifts;
    }

    pub fn control(&mut self, cmd: Control, queued: usize) -> Reply {
        match cmd {
            Control::SetMode(mode) => {
                self.mode = mode;
                Reply::Ack
            }
            Control::RelabelUp(n) => {
                self.n_projected = n;
                for v in self.vertices.values_mut() {
                    v.relabel_up(n);
                }
                self.mode = ExecMode::Descend;
                Reply::Ack
            }
            Control::SeedDescent => {
                let mut ctx = Ctx::new(self.source, self.mode, &mut self.out);
                for v in self.vertices.values_mut() {
                    v.broadcast_height_if_needed(&mut ctx);
                }
                Reply::Ack
            }
            Control::Resume => {
                self.mode = ExecMode::Normal;
                let mut ctx = Ctx::new(self.source, self.mode, &mut self.out);
                for v in self.vertices.values_mut() {
                    if v.excess != 0 {
                        v.settle(&mut ctx);
                    }
                }
                self.lifts += ctx.lifts;
                Reply::Ack
            }
            Control::Collect => Reply::Collected {
                sink_excess: self.vertices.get(&self.sink).map(|t| t.excess),
                involved: self
                    .vertices
                    .values()
                    .filter(|v| v.carries_flow())
                    .map(|v| v.id)
                    .collect(),
            },
            Control::Snapshot => Reply::Snapshot(self.vertices.values().cloned().collect()),
            Control::QueueLen => Reply::QueueLen(queued + self.out.len()),
            Control::Shutdown => Reply::Ack,
        }
    }
}
