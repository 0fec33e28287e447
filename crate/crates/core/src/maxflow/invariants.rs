//! Whole-graph checks of the vertex-local invariants on a frozen, quiescent
//! engine state.

use std::collections::BTreeMap;
use std::fmt;

use super::{Height, VertexKind, VertexState};
use crate::VertexId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ViolationKind {
    /// A residual capacity is negative.
    NegativeResidual,
    /// A normal vertex holds excess.
    NormalExcess,
    /// Source or sink heights are off their pinned values.
    TerminalHeight,
    /// `c_f(v,w) > 0` but `h(v) > h(w) + 1`.
    PositiveSlope,
    /// `c_f(w,v) > 0` but `h-(v) > h-(w) + 1`.
    NegativeSlope,
    /// A needed mirrored height differs from the neighbour's height, or the
    /// neighbour's record of what it sent disagrees with the mirror.
    MirrorCoherence,
    /// The two endpoints disagree on a residual capacity.
    ResidualSymmetry,
    /// Residuals of a pair do not sum to the pair's capacities.
    SkewSymmetry,
    /// A vertex in deficit has a positive height.
    DeficitPlacement,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub vertex: VertexId,
    pub kind: ViolationKind,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} at {}: {}", self.kind, self.vertex, self.detail)
    }
}

/// Scans every vertex and neighbour pair. Only meaningful at quiescence.
pub fn check_invariants(
    vertices: &BTreeMap<VertexId, VertexState>,
    n_max: u64,
) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut report = |vertex: VertexId, kind: ViolationKind, detail: String| {
        out.push(Violation { vertex, kind, detail })
    };
    let floor = Height::finite(n_max);
    for (&id, v) in vertices {
        match v.kind {
            VertexKind::Source => {
                if v.height_pos < floor || v.height_neg != Height::ZERO {
                    report(
                        id,
                        ViolationKind::TerminalHeight,
                        format!("source heights ({}, {}) with n_max {n_max}", v.height_pos, v.height_neg),
                    );
                }
            }
            VertexKind::Sink => {
                if v.height_pos != Height::ZERO || v.height_neg < floor {
                    report(
                        id,
                        ViolationKind::TerminalHeight,
                        format!("sink heights ({}, {}) with n_max {n_max}", v.height_pos, v.height_neg),
                    );
                }
            }
            VertexKind::Normal => {
                if v.excess != 0 {
                    report(id, ViolationKind::NormalExcess, format!("excess {}", v.excess));
                }
                if v.excess < 0 && v.height_pos != Height::ZERO {
                    report(
                        id,
                        ViolationKind::DeficitPlacement,
                        format!("excess {} at height {}", v.excess, v.height_pos),
                    );
                }
            }
        }
        for m in v.neighbours() {
            let w = match vertices.get(&m.id) {
                Some(w) => w,
                None => {
                    report(
                        id,
                        ViolationKind::ResidualSymmetry,
                        format!("neighbour {} does not exist", m.id),
                    );
                    continue;
                }
            };
            if m.res_cap_out < 0 {
                report(
                    id,
                    ViolationKind::NegativeResidual,
                    format!("c_f({id},{}) = {}", m.id, m.res_cap_out),
                );
            }
            let back = match w.neighbour(id) {
                Some(back) => back,
                None => {
                    report(
                        id,
                        ViolationKind::ResidualSymmetry,
                        format!("{} does not know {id}", m.id),
                    );
                    continue;
                }
            };
            if m.res_cap_out != back.res_cap_in || m.res_cap_in != back.res_cap_out {
                report(
                    id,
                    ViolationKind::ResidualSymmetry,
                    format!(
                        "pair ({id},{}): ({}, {}) vs ({}, {})",
                        m.id, m.res_cap_out, m.res_cap_in, back.res_cap_in, back.res_cap_out
                    ),
                );
            }
            if m.res_cap_out + m.res_cap_in != m.capacity_out + back.capacity_out {
                report(
                    id,
                    ViolationKind::SkewSymmetry,
                    format!(
                        "pair ({id},{}): residuals {} + {} vs capacities {} + {}",
                        m.id, m.res_cap_out, m.res_cap_in, m.capacity_out, back.capacity_out
                    ),
                );
            }
            if m.res_cap_out > 0 && v.height_pos > w.height_pos.succ() {
                report(
                    id,
                    ViolationKind::PositiveSlope,
                    format!("h({id}) = {} > h({}) + 1 = {}", v.height_pos, m.id, w.height_pos.succ()),
                );
            }
            // c_f(w, v) > 0 constrains h-(v) unless v is the sink
            if v.kind != VertexKind::Sink
                && back.res_cap_out > 0
                && v.height_neg > w.height_neg.succ()
            {
                report(
                    id,
                    ViolationKind::NegativeSlope,
                    format!("h-({id}) = {} > h-({}) + 1", v.height_neg, m.id),
                );
            }
            if (m.res_cap_out > 0 && m.nbr_height_pos != w.height_pos)
                || (m.res_cap_in > 0 && m.nbr_height_neg != w.height_neg)
                || m.nbr_height_pos != back.sent_height_pos
                || m.nbr_height_neg != back.sent_height_neg
            {
                report(
                    id,
                    ViolationKind::MirrorCoherence,
                    format!(
                        "mirror of {} is ({}, {}), actual ({}, {}), last sent ({}, {})",
                        m.id,
                        m.nbr_height_pos,
                        m.nbr_height_neg,
                        w.height_pos,
                        w.height_neg,
                        back.sent_height_pos,
                        back.sent_height_neg
                    ),
                );
            }
        }
    }
    out
}
