use serde::Serialize;

use super::TraceRecord;
use crate::error::{Error, Result};
use crate::queues::step_floating_node;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SegmentSlot {
    pub a_r: u32,
    pub a_f: u32,
    pub a_r_adm: u32,
    pub a_f_adm: u32,
    pub b_r: u32,
    pub b_f: u32,
}

/// A single node's sample path over consecutive slots. `q_real` and `q_fake`
/// hold one more entry than `slots`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PathSegment {
    pub node: usize,
    pub start: usize,
    pub buffer_size: u64,
    pub slots: Vec<SegmentSlot>,
    pub q_real: Vec<u64>,
    pub q_fake: Vec<u64>,
}

impl PathSegment {
    /// Slots `[start, end)` of node `n` (1-based).
    pub fn from_trace(trace: &TraceRecord, n: usize, start: usize, end: usize) -> Self {
        let node = trace.node(n);
        Self {
            node: n,
            start,
            buffer_size: trace.buffer_size,
            slots: (start..end)
                .map(|t| SegmentSlot {
                    a_r: node.a_r[t],
                    a_f: node.a_f[t],
                    a_r_adm: node.a_r_adm[t],
                    a_f_adm: node.a_f_adm[t],
                    b_r: node.b_r[t],
                    b_f: node.b_f[t],
                })
                .collect(),
            q_real: node.q_real[start..=end].to_vec(),
            q_fake: node.q_fake[start..=end].to_vec(),
        }
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// Drives the node update from the segment's initial backlogs with the
    /// recorded arrivals and services, and checks that every derived field
    /// and backlog matches.
    pub fn replay(&self) -> Result<()> {
        let (mut q_r, mut q_f) = (self.q_real[0], self.q_fake[0]);
        for (k, s) in self.slots.iter().enumerate() {
            let (r, f, flows) = step_floating_node(q_r, q_f, self.buffer_size, s.a_r, s.a_f, s.b_r + s.b_f)?;
            let matches = flows.a_r_admitted == s.a_r_adm
                && flows.a_f_admitted == s.a_f_adm
                && flows.b_r == s.b_r
                && flows.b_f == s.b_f
                && r == self.q_real[k + 1]
                && f == self.q_fake[k + 1];
            if !matches {
                return Err(Error::Consistency {
                    node: self.node,
                    detail: format!("segment offset {k}: replay disagrees"),
                });
            }
            (q_r, q_f) = (r, f);
        }
        Ok(())
    }
}

/// Rewrites a segment with non-decreasing fake backlog into the equivalent
/// path with no fake services: `b^f` becomes 0 and is netted out of `a^f`.
/// Real flows and both backlog sequences are unchanged.
pub fn transform_path_nondecreasing(segment: &PathSegment, delta_max: u32) -> Result<PathSegment> {
    if segment.buffer_size < 2 * delta_max as u64 {
        return Err(Error::TransformPrecondition {
            offset: 0,
            detail: format!("buffer {} below 2 * delta_max", segment.buffer_size),
        });
    }
    if let Some(offset) = segment.q_fake.windows(2).position(|w| w[1] < w[0]) {
        return Err(Error::NotNonDecreasing { offset });
    }
    let mut out = segment.clone();
    for (offset, (slot, &q_f)) in out.slots.iter_mut().zip(&segment.q_fake).enumerate() {
        // Fake packets actually removed this slot.
        let served = (q_f.min(slot.b_f as u64)) as u32;
        let a_f = slot.a_f.checked_sub(served).ok_or_else(|| Error::TransformPrecondition {
            offset,
            detail: format!("fake services {served} exceed fake arrivals {}", slot.a_f),
        })?;
        slot.a_f = a_f;
        slot.b_f = 0;
        slot.a_f_adm = a_f + (slot.a_r - slot.a_r_adm);
    }
    Ok(out)
}

/// Maximal runs of at least `min_len` slots over which node `n`'s fake
/// backlog never decreases, in slot order.
pub fn extract_nondecreasing_segments(trace: &TraceRecord, n: usize, min_len: usize) -> Vec<PathSegment> {
    let qf = &trace.node(n).q_fake;
    let mut out = Vec::new();
    let mut start = 0;
    for t in 0..=trace.len() {
        let breaks = t == trace.len() || qf[t + 1] < qf[t];
        if breaks {
            if t - start >= min_len.max(1) {
                out.push(PathSegment::from_trace(trace, n, start, t));
            }
            start = t + 1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pathcheck::synthetic_node_trace;

    #[test]
    fn canonical_segment_is_unchanged() {
        let trace = synthetic_node_trace(6, 1, &[(1, 1, 0), (0, 2, 0), (2, 0, 0)]).unwrap();
        let seg = PathSegment::from_trace(&trace, 1, 0, 3);
        assert_eq!(transform_path_nondecreasing(&seg, 2).unwrap(), seg);
    }

    #[test]
    fn fake_service_is_netted_out() {
        // Q^r = 0, Q^f = 4: two units of service all hit fake packets.
        let trace = synthetic_node_trace(6, 4, &[(0, 3, 2)]).unwrap();
        let seg = PathSegment::from_trace(&trace, 1, 0, 1);
        assert_eq!(seg.slots[0].b_f, 2);
        let out = transform_path_nondecreasing(&seg, 3).unwrap();
        assert_eq!((out.slots[0].b_f, out.slots[0].a_f), (0, 1));
        assert_eq!(out.q_fake, seg.q_fake);
        out.replay().unwrap();
    }

    #[test]
    fn decreasing_segment_is_rejected() {
        let trace = synthetic_node_trace(6, 4, &[(0, 0, 0), (0, 0, 1)]).unwrap();
        let seg = PathSegment::from_trace(&trace, 1, 0, 2);
        assert!(matches!(
            transform_path_nondecreasing(&seg, 2),
            Err(Error::NotNonDecreasing { offset: 1 })
        ));
    }

    #[test]
    fn extracted_segments_transform_and_replay() {
        let slots: Vec<_> = (0..2000)
            .map(|t: u32| ((t * 7 % 3), (t * 11 % 3), (t * 13 % 4)))
            .collect();
        let trace = synthetic_node_trace(8, 2, &slots).unwrap();
        let segments = extract_nondecreasing_segments(&trace, 1, 2);
        assert!(!segments.is_empty());
        for seg in &segments {
            seg.replay().unwrap();
            let out = transform_path_nondecreasing(seg, 4).unwrap();
            out.replay().unwrap();
            assert_eq!((&out.q_real, &out.q_fake), (&seg.q_real, &seg.q_fake));
            assert!(out.slots.iter().all(|s| s.b_f == 0));
        }
    }
}
