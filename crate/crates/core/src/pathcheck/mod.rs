//! Sample-path oracles over recorded floating-queue traces: the lower-bound
//! counting policy, the high/low regime partition of a window, the checks
//! built on it, path transformations and steady-state metrics.

mod intervals;
mod lower;
mod metrics;
mod report;
mod transform;

pub use intervals::{
    partition_intervals, partition_with_lookahead, verify_interval_lemmas, FakeLookahead, IntervalPartition, IntervalReport, LocalExtremum, LowRun,
    ViolationKind, ViolationRecord,
};
pub use lower::{lower_bound_admissions, verify_cumulative_bound, Band, CumulativeBound, LowerBoundTrace};
pub use metrics::{compute_metrics, linear_fit, DelayEstimate, LinearFit, MetricsAccumulator, MetricsReport, NodeMetrics};
pub use report::{check_trace, TraceCheckReport};
pub use transform::{
    extract_nondecreasing_segments, transform_path_nondecreasing, PathSegment, SegmentSlot,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::queues::{step_floating_node, FloatingQueueState, FlowSplit, NodeFlows};

/// Per-node columns of a trace. Flow columns have one entry per slot;
/// backlog columns have one more, ending with the backlog after the last slot.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct NodeTrace {
    pub a_r: Vec<u32>,
    pub a_f: Vec<u32>,
    pub a_r_adm: Vec<u32>,
    pub a_f_adm: Vec<u32>,
    pub b_r: Vec<u32>,
    pub b_f: Vec<u32>,
    pub q_real: Vec<u64>,
    pub q_fake: Vec<u64>,
}

impl NodeTrace {
    fn with_initial(q_real: u64, q_fake: u64, capacity: usize) -> Self {
        let mut q_r = Vec::with_capacity(capacity + 1);
        let mut q_f = Vec::with_capacity(capacity + 1);
        q_r.push(q_real);
        q_f.push(q_fake);
        Self {
            a_r: Vec::with_capacity(capacity),
            a_f: Vec::with_capacity(capacity),
            a_r_adm: Vec::with_capacity(capacity),
            a_f_adm: Vec::with_capacity(capacity),
            b_r: Vec::with_capacity(capacity),
            b_f: Vec::with_capacity(capacity),
            q_real: q_r,
            q_fake: q_f,
        }
    }

    pub fn len(&self) -> usize {
        self.a_r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a_r.is_empty()
    }

    pub fn flows(&self, t: usize) -> NodeFlows {
        NodeFlows {
            a_r: self.a_r[t],
            a_f: self.a_f[t],
            a_r_admitted: self.a_r_adm[t],
            a_f_admitted: self.a_f_adm[t],
            b_r: self.b_r[t],
            b_f: self.b_f[t],
            drops: self.a_r[t] - self.a_r_adm[t],
        }
    }

    pub fn drops(&self, t: usize) -> u32 {
        self.a_r[t] - self.a_r_adm[t]
    }

    /// `Q(t) = Q^r(t) + Q^f(t)`, defined for `t` in `0..=len`.
    pub fn total(&self, t: usize) -> u64 {
        self.q_real[t] + self.q_fake[t]
    }

    fn push(&mut self, flows: &NodeFlows, q_real: u64, q_fake: u64) {
        self.a_r.push(flows.a_r);
        self.a_f.push(flows.a_f);
        self.a_r_adm.push(flows.a_r_admitted);
        self.a_f_adm.push(flows.a_f_admitted);
        self.b_r.push(flows.b_r);
        self.b_f.push(flows.b_f);
        self.q_real.push(q_real);
        self.q_fake.push(q_fake);
    }
}

/// A recorded floating-queue sample path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub buffer_size: u64,
    pub states: Vec<u32>,
    pub actions: Vec<u32>,
    pub costs: Vec<f64>,
    pub nodes: Vec<NodeTrace>,
}

impl TraceRecord {
    pub fn new(initial: &FloatingQueueState) -> Self {
        Self::with_capacity(initial, 0)
    }

    pub fn with_capacity(initial: &FloatingQueueState, capacity: usize) -> Self {
        Self {
            buffer_size: initial.buffer_size,
            states: Vec::with_capacity(capacity),
            actions: Vec::with_capacity(capacity),
            costs: Vec::with_capacity(capacity),
            nodes: initial
                .real
                .iter()
                .zip(&initial.fake)
                .map(|(&r, &f)| NodeTrace::with_initial(r, f, capacity))
                .collect(),
        }
    }

    /// Appends one slot: the flows of `split` and the post-update backlogs.
    pub fn record(&mut self, state: usize, action: usize, cost: f64, split: &FlowSplit, after: &FloatingQueueState) {
        self.states.push(state as u32);
        self.actions.push(action as u32);
        self.costs.push(cost);
        for (k, node) in self.nodes.iter_mut().enumerate() {
            node.push(&split.nodes[k], after.real[k], after.fake[k]);
        }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Node `n` (1-based).
    pub fn node(&self, n: usize) -> &NodeTrace {
        &self.nodes[n - 1]
    }

    /// Recomputes every slot from `(a_r, a_f, b_r + b_f)` and the recorded
    /// backlogs, and compares all derived fields bit for bit.
    pub fn replay_check(&self) -> Result<()> {
        for (k, node) in self.nodes.iter().enumerate() {
            if node.q_real.len() != node.len() + 1 || node.q_fake.len() != node.len() + 1 {
                return Err(Error::Trace(format!("node {}: backlog column length mismatch", k + 1)));
            }
            for t in 0..node.len() {
                let services = node.b_r[t] + node.b_f[t];
                let (real, fake, flows) = step_floating_node(
                    node.q_real[t],
                    node.q_fake[t],
                    self.buffer_size,
                    node.a_r[t],
                    node.a_f[t],
                    services,
                )
                .map_err(|e| Error::Consistency {
                    node: k + 1,
                    detail: format!("slot {t}: {e}"),
                })?;
                if flows != node.flows(t) || real != node.q_real[t + 1] || fake != node.q_fake[t + 1] {
                    return Err(Error::Consistency {
                        node: k + 1,
                        detail: format!("slot {t}: replay disagrees with the recorded fields"),
                    });
                }
            }
        }
        Ok(())
    }

    /// The slot range `[start, end)` as a standalone trace whose initial
    /// backlogs are those at `start`.
    pub fn slice(&self, start: usize, end: usize) -> TraceRecord {
        TraceRecord {
            buffer_size: self.buffer_size,
            states: self.states[start..end].to_vec(),
            actions: self.actions[start..end].to_vec(),
            costs: self.costs[start..end].to_vec(),
            nodes: self
                .nodes
                .iter()
                .map(|n| NodeTrace {
                    a_r: n.a_r[start..end].to_vec(),
                    a_f: n.a_f[start..end].to_vec(),
                    a_r_adm: n.a_r_adm[start..end].to_vec(),
                    a_f_adm: n.a_f_adm[start..end].to_vec(),
                    b_r: n.b_r[start..end].to_vec(),
                    b_f: n.b_f[start..end].to_vec(),
                    q_real: n.q_real[start..=end].to_vec(),
                    q_fake: n.q_fake[start..=end].to_vec(),
                })
                .collect(),
        }
    }
}

/// Builds a single-node trace by driving the node update with the given
/// per-slot real arrivals, fake arrivals and services.
pub fn synthetic_node_trace(buffer: u64, q_fake0: u64, slots: &[(u32, u32, u32)]) -> Result<TraceRecord> {
    let initial = FloatingQueueState::new(buffer, vec![q_fake0]);
    let mut trace = TraceRecord::with_capacity(&initial, slots.len());
    let (mut q_r, mut q_f) = (0u64, q_fake0);
    for &(a_r, a_f, services) in slots {
        let (r, f, flows) = step_floating_node(q_r, q_f, buffer, a_r, a_f, services)?;
        trace.states.push(0);
        trace.actions.push(0);
        trace.costs.push(0.0);
        trace.nodes[0].push(&flows, r, f);
        q_r = r;
        q_f = f;
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_trace_replays() {
        let trace = synthetic_node_trace(4, 2, &[(3, 0, 1), (2, 1, 0), (0, 0, 5), (4, 0, 2)]).unwrap();
        assert_eq!(trace.len(), 4);
        trace.replay_check().unwrap();
        let node = trace.node(1);
        assert_eq!(node.q_real, vec![0, 3, 4, 0, 4]);
        assert_eq!(node.drops(1), 1);
        assert_eq!(node.total(2), node.q_real[2] + node.q_fake[2]);
    }

    #[test]
    fn tampered_trace_fails_replay() {
        let mut trace = synthetic_node_trace(4, 0, &[(2, 0, 0), (2, 0, 1)]).unwrap();
        trace.nodes[0].q_fake[2] += 1;
        assert!(matches!(trace.replay_check(), Err(Error::Consistency { node: 1, .. })));
    }

    #[test]
    fn slice_keeps_replaying() {
        let slots: Vec<_> = (0..50).map(|t| ((t % 3) as u32, (t % 2) as u32, (t % 4) as u32)).collect();
        let trace = synthetic_node_trace(6, 5, &slots).unwrap();
        let part = trace.slice(10, 30);
        assert_eq!(part.len(), 20);
        part.replay_check().unwrap();
    }
}
