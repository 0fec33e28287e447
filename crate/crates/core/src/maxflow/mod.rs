//! The dynamic push-relabel vertex program.
//!
//! Every vertex keeps only local state: its excess, a height for positive
//! flow and one for negative flow (deficits), and per-neighbour mirrors of
//! the residual capacities in both directions and of the neighbour's heights.
//! All cross-vertex effects leave as [`AlgMessage`]s appended to the handler
//! context's outbox. The runtime guarantees FIFO delivery per vertex pair and
//! serial execution of the handlers of any one vertex.

mod invariants;

use std::fmt;

use rustc_hash::FxHashMap;
use thiserror::Error;

use crate::VertexId;

pub use invariants::{check_invariants, Violation, ViolationKind};

/// A vertex height; `INFINITE` sorts above every finite height.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Height(u64);

impl Height {
    pub const ZERO: Height = Height(0);
    pub const INFINITE: Height = Height(u64::MAX);

    pub fn finite(h: u64) -> Height {
        assert!(h != u64::MAX, "height overflow");
        Height(h)
    }

    pub fn is_finite(self) -> bool {
        self != Height::INFINITE
    }

    pub fn get(self) -> Option<u64> {
        self.is_finite().then_some(self.0)
    }

    /// `self + 1`, with infinity absorbing.
    pub fn succ(self) -> Height {
        if self.is_finite() {
            Height::finite(self.0 + 1)
        } else {
            self
        }
    }
}

impl fmt::Debug for Height {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Height {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.get() {
            Some(h) => write!(f, "{h}"),
            None => f.write_str("inf"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VertexKind {
    Source,
    Sink,
    Normal,
}

/// Which vertex operations are enabled while handlers run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecMode {
    /// Push, lift and discharge all enabled.
    Normal,
    /// Lifts disabled (message draining before a global relabel).
    NoLift,
    /// Only height descent: no push, lift or discharge.
    Descend,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Payload {
    /// Flow moved from sender to receiver. Zero is a pure height notification.
    Flow(i64),
    /// Change in the capacity of the edge sender -> receiver.
    CapacityOffset(i64),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlgMessage {
    pub sender: VertexId,
    /// The sender's position in the receiver's neighbour table, once known.
    pub receiver_slot: Option<u32>,
    /// The receiver's position in the sender's neighbour table.
    pub sender_slot: u32,
    pub payload: Payload,
    /// Sender heights; omitted when the receiver cannot use them.
    pub height_pos: Option<Height>,
    pub height_neg: Option<Height>,
}

/// A message addressed to a vertex.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outgoing {
    pub to: VertexId,
    pub msg: AlgMessage,
}

/// What a vertex knows about one neighbour.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighbourMirror {
    pub id: VertexId,
    /// c_f(v, w).
    pub res_cap_out: i64,
    /// c_f(w, v), as far as v knows.
    pub res_cap_in: i64,
    /// Aggregate capacity of v -> w applied at v.
    pub capacity_out: i64,
    pub nbr_height_pos: Height,
    pub nbr_height_neg: Height,
    /// Last `height_pos` of ours that this neighbour has been sent.
    pub sent_height_pos: Height,
    pub sent_height_neg: Height,
    /// Our position in the neighbour's table.
    pub remote_slot: Option<u32>,
}

impl NeighbourMirror {
    fn new(id: VertexId) -> Self {
        NeighbourMirror {
            id,
            res_cap_out: 0,
            res_cap_in: 0,
            capacity_out: 0,
            nbr_height_pos: Height::INFINITE,
            nbr_height_neg: Height::INFINITE,
            sent_height_pos: Height::INFINITE,
            sent_height_neg: Height::INFINITE,
            remote_slot: None,
        }
    }

    /// Net flow v -> w.
    pub fn net_flow(&self) -> i64 {
        self.capacity_out - self.res_cap_out
    }

    /// Whether the neighbour needs our positive height (c_f(w, v) > 0).
    fn wants_pos(&self) -> bool {
        self.res_cap_in > 0
    }

    /// Whether the neighbour needs our negative height (c_f(v, w) > 0).
    fn wants_neg(&self) -> bool {
        self.res_cap_out > 0
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MaxflowError {
    #[error("lift on vertex {0} requires a normal vertex with nonzero excess")]
    LiftPrecondition(VertexId),
    #[error("vertex {0} has no neighbour with residual capacity to lift towards")]
    NoResidualNeighbour(VertexId),
}

/// Handler context supplied by the runtime.
pub struct Ctx<'a> {
    pub source: VertexId,
    pub mode: ExecMode,
    /// Incremented by every lift.
    pub lifts: u64,
    pub out: &'a mut Vec<Outgoing>,
}

impl<'a> Ctx<'a> {
    pub fn new(source: VertexId, mode: ExecMode, out: &'a mut Vec<Outgoing>) -> Self {
        Ctx {
            source,
            mode,
            lifts: 0,
            out,
        }
    }
}

#[derive(Debug, Clone)]
pub struct VertexState {
    pub id: VertexId,
    pub kind: VertexKind,
    pub excess: i64,
    pub height_pos: Height,
    pub height_neg: Height,
    neighbours: Vec<NeighbourMirror>,
    index: FxHashMap<VertexId, u32>,
    // heights at the last full broadcast
    announced_pos: Height,
    announced_neg: Height,
    // slots touched since the last broadcast
    touched: Vec<u32>,
}

impl VertexState {
    /// A fresh vertex. Sources start at `(n_projected, 0)`, sinks at
    /// `(0, n_projected)` and normal vertices at infinity.
    pub fn new(id: VertexId, kind: VertexKind, n_projected: u64) -> Self {
        let (height_pos, height_neg) = match kind {
            VertexKind::Source => (Height::finite(n_projected), Height::ZERO),
            VertexKind::Sink => (Height::ZERO, Height::finite(n_projected)),
            VertexKind::Normal => (Height::INFINITE, Height::INFINITE),
        };
        VertexState {
            id,
            kind,
            excess: 0,
            height_pos,
            height_neg,
            neighbours: Vec::new(),
            index: FxHashMap::default(),
            announced_pos: height_pos,
            announced_neg: height_neg,
            touched: Vec::new(),
        }
    }

    pub fn neighbours(&self) -> &[NeighbourMirror] {
        &self.neighbours
    }

    pub fn neighbour(&self, id: VertexId) -> Option<&NeighbourMirror> {
        self.index.get(&id).map(|&i| &self.neighbours[i as usize])
    }

    pub fn slot_of(&self, id: VertexId) -> Option<usize> {
        self.index.get(&id).map(|&i| i as usize)
    }

    /// Whether any incident pair carries nonzero net flow.
    pub fn carries_flow(&self) -> bool {
        self.neighbours.iter().any(|m| m.net_flow() != 0)
    }

    fn add_neighbour(&mut self, id: VertexId) -> usize {
        let slot = self.neighbours.len();
        self.neighbours.push(NeighbourMirror::new(id));
        self.index.insert(id, slot as u32);
        slot
    }

    #[cfg(test)]
    pub(crate) fn neighbour_mut(&mut self, id: VertexId) -> &mut NeighbourMirror {
        let slot = match self.slot_of(id) {
            Some(s) => s,
            None => self.add_neighbour(id),
        };
        &mut self.neighbours[slot]
    }

    fn touch(&mut self, slot: usize) {
        let slot = slot as u32;
        if !self.touched.contains(&slot) {
            self.touched.push(slot);
        }
    }

    /// Builds a message to the neighbour at `slot`, attaching whichever of
    /// our heights that neighbour currently needs. Messages that move flow
    /// carry both: the residuals they create on the far side may not be
    /// visible here yet, and a stale mirror there lets both ends pull the
    /// same units back and forth forever.
    fn message_to(&mut self, slot: usize, payload: Payload) -> Outgoing {
        let (hp, hn) = (self.height_pos, self.height_neg);
        let moves_flow = matches!(payload, Payload::Flow(f) if f != 0);
        let m = &mut self.neighbours[slot];
        let height_pos = (moves_flow || m.wants_pos()).then(|| {
            m.sent_height_pos = hp;
            hp
        });
        let height_neg = (moves_flow || m.wants_neg()).then(|| {
            m.sent_height_neg = hn;
            hn
        });
        Outgoing {
            to: m.id,
            msg: AlgMessage {
                sender: self.id,
                receiver_slot: m.remote_slot,
                sender_slot: slot as u32,
                payload,
                height_pos,
                height_neg,
            },
        }
    }

    /// Pushes as much positive or negative flow as allowed towards the
    /// neighbour at `slot`.
    pub fn push(&mut self, slot: usize) -> Option<Outgoing> {
        let m = &self.neighbours[slot];
        let amount = if self.excess > 0 && self.height_pos > m.nbr_height_pos {
            self.excess.min(m.res_cap_out.max(0))
        } else if self.excess < 0 && self.height_neg > m.nbr_height_neg {
            -(-self.excess).min(m.res_cap_in.max(0))
        } else {
            0
        };
        if amount == 0 {
            return None;
        }
        self.excess -= amount;
        let m = &mut self.neighbours[slot];
        m.res_cap_out -= amount;
        m.res_cap_in += amount;
        Some(self.message_to(slot, Payload::Flow(amount)))
    }

    /// Raises the relevant height to one above the lowest neighbour that can
    /// still take flow.
    pub fn lift(&mut self) -> Result<Height, MaxflowError> {
        if self.kind != VertexKind::Normal || self.excess == 0 {
            return Err(MaxflowError::LiftPrecondition(self.id));
        }
        let positive = self.excess > 0;
        let lowest = self
            .neighbours
            .iter()
            .filter_map(|m| {
                if positive {
                    (m.res_cap_out > 0).then_some(m.nbr_height_pos)
                } else {
                    (m.res_cap_in > 0).then_some(m.nbr_height_neg)
                }
            })
            .min()
            .ok_or(MaxflowError::NoResidualNeighbour(self.id))?;
        let h = lowest.succ();
        if positive {
            self.height_pos = h;
        } else {
            self.height_neg = h;
        }
        Ok(h)
    }

    /// Drains excess by pushing to every neighbour and lifting until nothing
    /// is left. Sources and sinks make a single pass.
    ///
    /// The lift target is gathered during the push scan, so every round costs
    /// one pass over the neighbour table.
    pub fn discharge(&mut self, ctx: &mut Ctx<'_>) {
        if ctx.mode == ExecMode::Descend {
            return;
        }
        if self.excess < 0 && !self.height_neg.is_finite() {
            return;
        }
        loop {
            // fixed heights: a sink never has a lower neighbour, a source
            // never has a lower negative neighbour
            if self.excess == 0
                || (self.kind == VertexKind::Sink && self.excess > 0)
                || (self.kind == VertexKind::Source && self.excess < 0)
            {
                return;
            }
            let positive = self.excess > 0;
            let mut lowest = Height::INFINITE;
            for slot in 0..self.neighbours.len() {
                if let Some(out) = self.push(slot) {
                    ctx.out.push(out);
                    // the push opened the reverse arc, which bounds the
                    // other height
                    self.clamp_heights(slot);
                    if self.excess == 0 {
                        return;
                    }
                }
                let m = &self.neighbours[slot];
                if positive && m.res_cap_out > 0 {
                    lowest = lowest.min(m.nbr_height_pos);
                } else if !positive && m.res_cap_in > 0 {
                    lowest = lowest.min(m.nbr_height_neg);
                }
            }
            if self.kind != VertexKind::Normal || ctx.mode == ExecMode::NoLift {
                return;
            }
            if !lowest.is_finite() {
                // nothing reachable yet; wait for height updates
                return;
            }
            if positive {
                self.height_pos = lowest.succ();
            } else {
                self.height_neg = lowest.succ();
            }
            ctx.lifts += 1;
        }
    }

    /// Restores `h(v) <= h(w) + 1` (and its negative twin) towards the
    /// neighbour at `slot`, first by saturating the edge, then by descending.
    pub fn restore_height_invariant(&mut self, slot: usize, ctx: &mut Ctx<'_>) {
        if ctx.mode != ExecMode::Descend {
            if let Some(out) = self.push(slot) {
                ctx.out.push(out);
            }
        }
        self.clamp_heights(slot);
    }

    fn clamp_heights(&mut self, slot: usize) {
        if self.kind != VertexKind::Normal {
            return;
        }
        let m = &self.neighbours[slot];
        let cap_pos = m.nbr_height_pos.succ();
        if m.res_cap_out > 0 && self.height_pos > cap_pos {
            self.height_pos = cap_pos;
        }
        let cap_neg = m.nbr_height_neg.succ();
        if m.res_cap_in > 0 && self.height_neg > cap_neg {
            self.height_neg = cap_neg;
        }
    }

    /// Sends current heights to neighbours holding a stale copy they need.
    ///
    /// After a height change every neighbour is checked; otherwise only the
    /// neighbours touched since the last call, whose need may have changed.
    pub fn broadcast_height_if_needed(&mut self, ctx: &mut Ctx<'_>) {
        let changed =
            self.height_pos != self.announced_pos || self.height_neg != self.announced_neg;
        let (hp, hn) = (self.height_pos, self.height_neg);
        let stale = |m: &NeighbourMirror| {
            (m.wants_pos() && m.sent_height_pos != hp) || (m.wants_neg() && m.sent_height_neg != hn)
        };
        if changed {
            for slot in 0..self.neighbours.len() {
                if stale(&self.neighbours[slot]) {
                    let out = self.message_to(slot, Payload::Flow(0));
                    ctx.out.push(out);
                }
            }
            self.announced_pos = hp;
            self.announced_neg = hn;
        } else {
            for i in 0..self.touched.len() {
                let slot = self.touched[i] as usize;
                if stale(&self.neighbours[slot]) {
                    let out = self.message_to(slot, Payload::Flow(0));
                    ctx.out.push(out);
                }
            }
        }
        self.touched.clear();
    }

    /// The projected vertex count grew: re-pin source and sink heights.
    pub fn on_new_max_vertex_count(&mut self, new_count: u64, ctx: &mut Ctx<'_>) {
        match self.kind {
            VertexKind::Source => {
                self.height_pos = Height::finite(new_count);
                self.discharge(ctx);
            }
            VertexKind::Sink => {
                self.height_neg = Height::finite(new_count);
                self.discharge(ctx);
            }
            VertexKind::Normal => {}
        }
        self.broadcast_height_if_needed(ctx);
    }

    /// The capacity of this vertex's out-edge to `w` changed by `delta`.
    pub fn on_edge_changed(&mut self, w: VertexId, delta: i64, ctx: &mut Ctx<'_>) {
        // loops, edges into the source and edges out of the sink carry no flow
        if w == self.id || w == ctx.source || self.kind == VertexKind::Sink {
            return;
        }
        let slot = match self.slot_of(w) {
            Some(slot) => slot,
            None => {
                let slot = self.add_neighbour(w);
                let out = self.message_to(slot, Payload::Flow(0));
                ctx.out.push(out);
                slot
            }
        };
        let m = &mut self.neighbours[slot];
        m.res_cap_out += delta;
        m.capacity_out += delta;
        if self.kind == VertexKind::Source {
            self.excess += delta;
        }
        let out = self.message_to(slot, Payload::CapacityOffset(delta));
        ctx.out.push(out);
        self.touch(slot);
        self.restore_height_invariant(slot, ctx);
        self.discharge(ctx);
        self.broadcast_height_if_needed(ctx);
    }

    /// Message handling up to, but excluding, discharge and broadcast. The
    /// runtime calls [`settle`](Self::settle) once after a run of messages
    /// for the same vertex.
    pub fn receive(&mut self, msg: &AlgMessage, ctx: &mut Ctx<'_>) {
        let slot = match msg.receiver_slot {
            Some(slot) => {
                debug_assert_eq!(self.neighbours[slot as usize].id, msg.sender);
                slot as usize
            }
            None => match self.slot_of(msg.sender) {
                Some(slot) => slot,
                None => {
                    let slot = self.add_neighbour(msg.sender);
                    self.neighbours[slot].remote_slot = Some(msg.sender_slot);
                    let out = self.message_to(slot, Payload::Flow(0));
                    ctx.out.push(out);
                    slot
                }
            },
        };
        let m = &mut self.neighbours[slot];
        m.remote_slot = Some(msg.sender_slot);
        if let Some(h) = msg.height_pos {
            m.nbr_height_pos = h;
        }
        if let Some(h) = msg.height_neg {
            m.nbr_height_neg = h;
        }
        match msg.payload {
            Payload::CapacityOffset(delta) => m.res_cap_in += delta,
            Payload::Flow(flow) => {
                m.res_cap_out += flow;
                m.res_cap_in -= flow;
                self.excess += flow;
            }
        }
        let m = &mut self.neighbours[slot];
        if m.res_cap_in < 0 {
            // the sender's edge shrank below its flow: hand the difference back
            let flow = -m.res_cap_in;
            m.res_cap_out -= flow;
            m.res_cap_in += flow;
            self.excess -= flow;
            let out = self.message_to(slot, Payload::Flow(flow));
            ctx.out.push(out);
        }
        self.touch(slot);
        self.restore_height_invariant(slot, ctx);
        if self.kind == VertexKind::Normal && self.excess < 0 && self.height_pos > Height::ZERO {
            self.height_pos = Height::ZERO;
        }
    }

    pub fn settle(&mut self, ctx: &mut Ctx<'_>) {
        self.discharge(ctx);
        self.broadcast_height_if_needed(ctx);
    }

    pub fn on_message_received(&mut self, msg: &AlgMessage, ctx: &mut Ctx<'_>) {
        self.receive(msg, ctx);
        self.settle(ctx);
    }

    /// Global relabel, upward phase: forget all height knowledge.
    ///
    /// Neighbour mirrors are reset to infinity on both sides, so the descent
    /// phase starts from a coherent view.
    pub fn relabel_up(&mut self, n_projected: u64) {
        let (hp, hn) = match self.kind {
            VertexKind::Source => (Height::finite(n_projected), Height::ZERO),
            VertexKind::Sink => (Height::ZERO, Height::finite(n_projected)),
            VertexKind::Normal if self.excess < 0 => (Height::ZERO, Height::INFINITE),
            VertexKind::Normal => (Height::INFINITE, Height::INFINITE),
        };
        self.height_pos = hp;
        self.height_neg = hn;
        for m in &mut self.neighbours {
            m.nbr_height_pos = Height::INFINITE;
            m.nbr_height_neg = Height::INFINITE;
            m.sent_height_pos = Height::INFINITE;
            m.sent_height_neg = Height::INFINITE;
        }
        self.announced_pos = Height::INFINITE;
        self.announced_neg = Height::INFINITE;
        self.touched.clear();
    }

    /// Global relabel, downward phase: one message handled with flow
    /// movement disabled.
    pub fn relabel_down_step(&mut self, msg: &AlgMessage, ctx: &mut Ctx<'_>) {
        let mode = ctx.mode;
        ctx.mode = ExecMode::Descend;
        self.on_message_received(msg, ctx);
        ctx.mode = mode;
    }
}
