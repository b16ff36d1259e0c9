use serde::Serialize;

use super::{
    extract_nondecreasing_segments, lower_bound_admissions, partition_with_lookahead, transform_path_nondecreasing, verify_cumulative_bound,
    verify_interval_lemmas, CumulativeBound, FakeLookahead, IntervalReport, TraceRecord,
};
use crate::error::Result;

/// Everything `floatnet check` verifies on one trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceCheckReport {
    pub slots: usize,
    pub replay_ok: bool,
    pub replay_error: Option<String>,
    pub cumulative: Vec<CumulativeBound>,
    pub intervals: Vec<IntervalReport>,
    pub segments_checked: usize,
    pub segment_failures: Vec<String>,
}

impl TraceCheckReport {
    pub fn violations(&self) -> usize {
        self.cumulative.iter().filter(|c| !c.holds).count()
            + self.intervals.iter().map(|r| r.violations.len()).sum::<usize>()
            + self.segment_failures.len()
            + usize::from(!self.replay_ok)
    }

    pub fn passed(&self) -> bool {
        self.violations() == 0
    }
}

/// Replays the trace, then runs the cumulative admission bound from slot 0,
/// the interval checks on every node over each window `(t0, len)`, and the
/// fake-service transform on every non-decreasing segment of at least
/// `min_segment` slots.
pub fn check_trace(trace: &TraceRecord, gamma: &[f64], delta_max: u32, windows: &[(usize, usize)], min_segment: usize) -> Result<TraceCheckReport> {
    let replay = trace.replay_check();
    let lower = lower_bound_admissions(trace, gamma, delta_max)?;
    let cumulative = verify_cumulative_bound(trace, &lower, 0, trace.len());
    let mut intervals = Vec::new();
    let first = windows.iter().map(|w| w.0).min().unwrap_or(0);
    for n in 1..=trace.node_count() {
        let lookahead = FakeLookahead::new(trace, n, first);
        for &(t0, len) in windows {
            let partition = partition_with_lookahead(trace, &lookahead, gamma[n - 1], t0, len);
            intervals.push(verify_interval_lemmas(trace, &partition, &lower));
        }
    }
    let mut segments_checked = 0;
    let mut segment_failures = Vec::new();
    for n in 1..=trace.node_count() {
        for segment in extract_nondecreasing_segments(trace, n, min_segment) {
            segments_checked += 1;
            let outcome = transform_path_nondecreasing(&segment, delta_max).and_then(|s| s.replay());
            if let Err(e) = outcome {
                segment_failures.push(format!("node {n}, segment at slot {}: {e}", segment.start));
            }
        }
    }
    Ok(TraceCheckReport {
        slots: trace.len(),
        replay_ok: replay.is_ok(),
        replay_error: replay.err().map(|e| e.to_string()),
        cumulative,
        intervals,
        segments_checked,
        segment_failures,
    })
}
