use serde::Serialize;

use super::{LowerBoundTrace, TraceRecord};

const NONE: usize = usize::MAX;

/// The `j`-th local minimum / maximum pair inside a low run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct LocalExtremum {
    /// First slot at which the local minimum is reached.
    pub minus: usize,
    /// Last slot of the following local maximum.
    pub plus: usize,
    /// False when no slot met the local-minimum condition and `minus` fell
    /// back to the end of the run.
    pub genuine: bool,
}

/// A maximal run `[start, end]` of slots with `Q^f < gamma - B/2`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LowRun {
    pub start: usize,
    pub end: usize,
    pub extrema: Vec<LocalExtremum>,
}

/// High/low regime split of one node's window `[t0, end]` (inclusive).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntervalPartition {
    pub node: usize,
    pub t0: usize,
    pub end: usize,
    pub threshold: f64,
    /// Membership of `t0 + i` in the high regime.
    pub high: Vec<bool>,
    /// Slots immediately preceding each low run that starts after `t0`.
    pub before_runs: Vec<usize>,
    pub runs: Vec<LowRun>,
}

impl IntervalPartition {
    pub fn is_high(&self, t: usize) -> bool {
        self.high[t - self.t0]
    }

    pub fn high_slots(&self) -> impl Iterator<Item = usize> + '_ {
        (self.t0..=self.end).filter(|&t| self.is_high(t))
    }

    pub fn low_slots(&self) -> impl Iterator<Item = usize> + '_ {
        (self.t0..=self.end).filter(|&t| !self.is_high(t))
    }

    /// Number of low runs in the window.
    pub fn run_count(&self) -> usize {
        self.runs.len()
    }
}

/// For each `t >= from`, the first later index whose value is strictly
/// greater (or smaller) than `values[t]`, or `NONE`.
fn next_strict(values: &[u64], from: usize, greater: bool) -> Vec<usize> {
    let mut out = vec![NONE; values.len() - from];
    let mut stack: Vec<usize> = Vec::new();
    for t in from..values.len() {
        while let Some(&top) = stack.last() {
            let beaten = if greater { values[t] > values[top] } else { values[t] < values[top] };
            if !beaten {
                break;
            }
            out[top - from] = t;
            stack.pop();
        }
        stack.push(t);
    }
    out
}

/// Forward look-ahead over one node's fake backlog: for every slot from
/// `from` on, the next slot where `Q^f` is strictly higher and strictly
/// lower. Independent of the window start, so one index serves any number
/// of windows beginning at or after `from`.
#[derive(Debug, Clone)]
pub struct FakeLookahead {
    pub node: usize,
    from: usize,
    next_greater: Vec<usize>,
    next_smaller: Vec<usize>,
}

impl FakeLookahead {
    pub fn new(trace: &TraceRecord, n: usize, from: usize) -> Self {
        let qf = &trace.node(n).q_fake;
        Self {
            node: n,
            from,
            next_greater: next_strict(qf, from, true),
            next_smaller: next_strict(qf, from, false),
        }
    }

    /// `Q^f` does not go below its value at `t` before it next rises.
    fn holds_until_rise(&self, t: usize) -> bool {
        let (ns, ng) = (self.next_smaller[t - self.from], self.next_greater[t - self.from]);
        ns == NONE || (ng != NONE && ns > ng)
    }
}

/// Splits node `n`'s window `[t0, t0 + len)` into high-regime slots
/// (`Q^f >= gamma - B/2`) and low runs, and locates the local minima and
/// maxima of `Q^f` inside every low run.
///
/// `Q^f(t0 - 1)` is taken as infinite. A slot is a local minimum when the
/// fake backlog just dropped and does not go lower before it next rises.
pub fn partition_intervals(trace: &TraceRecord, n: usize, gamma: f64, t0: usize, len: usize) -> IntervalPartition {
    partition_with_lookahead(trace, &FakeLookahead::new(trace, n, t0), gamma, t0, len)
}

/// As [`partition_intervals`], reusing a precomputed look-ahead.
pub fn partition_with_lookahead(trace: &TraceRecord, lookahead: &FakeLookahead, gamma: f64, t0: usize, len: usize) -> IntervalPartition {
    assert!(len >= 1 && t0 + len <= trace.len(), "window outside trace");
    assert!(lookahead.from <= t0, "look-ahead starts after the window");
    let n = lookahead.node;
    let qf = &trace.node(n).q_fake;
    let end = t0 + len - 1;
    let threshold = gamma - trace.buffer_size as f64 / 2.0;
    let low = |t: usize| (qf[t] as f64) < threshold;
    let is_local_min = |t: usize| (t == t0 || qf[t] < qf[t - 1]) && lookahead.holds_until_rise(t);

    let high = (t0..=end).map(|t| !low(t)).collect();
    let mut runs = Vec::new();
    let mut before_runs = Vec::new();
    let mut search = t0;
    while let Some(start) = (search..=end).find(|&t| low(t)) {
        let run_end = (start + 1..=end).find(|&t| !low(t)).map_or(end, |t| t - 1);
        if start > t0 {
            before_runs.push(start - 1);
        }
        let mut extrema = Vec::new();
        let mut from = start;
        loop {
            let (minus, genuine) = match (from..=run_end).find(|&t| is_local_min(t)) {
                Some(t) => (t, true),
                None => (run_end, false),
            };
            let plus = (minus + 1..=run_end).find(|&t| qf[t] > qf[t + 1]).unwrap_or(run_end);
            extrema.push(LocalExtremum { minus, plus, genuine });
            if plus == run_end {
                break;
            }
            from = plus + 1;
        }
        runs.push(LowRun {
            start,
            end: run_end,
            extrema,
        });
        search = run_end + 1;
    }

    IntervalPartition {
        node: n,
        t0,
        end,
        threshold,
        high,
        before_runs,
        runs,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    /// A high-regime slot admitted fewer real packets than the lower bound.
    HighRegime,
    /// Low-regime admissions fell below the lower bound (less any slack).
    LowRegime,
    /// Whole-window admissions fell below the lower bound (less any slack).
    WindowTotal,
    /// `Q^r` at a local minimum differs from the previous slot's real arrivals.
    LocalMinRealBacklog,
    /// The slot before a local minimum had its backlog inside the band.
    LocalMinInsideBand,
    /// `Q^f` before a local minimum reached the band's lower edge.
    LocalMinFakeBefore,
    /// `Q^f` after a local maximum reached the band's lower edge.
    LocalMaxFakeAfter,
    /// Admissions over a minimum-to-maximum interval fell below the bound.
    IntervalDomination,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ViolationRecord {
    pub node: usize,
    pub kind: ViolationKind,
    pub slot: usize,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntervalReport {
    pub node: usize,
    pub t0: usize,
    pub end: usize,
    pub low_runs: usize,
    pub pairs: usize,
    pub pairs_checked: usize,
    /// Pairs without a genuine local minimum, or too close to the window or
    /// trace edges to evaluate.
    pub pairs_skipped: usize,
    /// Whether the window started with a nonempty real queue, in which case
    /// the low-regime and window sums are checked with `B` of slack.
    pub slack_applied: bool,
    pub low_regime: (u64, u64),
    pub window_total: (u64, u64),
    pub violations: Vec<ViolationRecord>,
}

impl IntervalReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Runs every interval-level check on one partitioned node window.
pub fn verify_interval_lemmas(trace: &TraceRecord, partition: &IntervalPartition, lower: &LowerBoundTrace) -> IntervalReport {
    let n = partition.node;
    let node = trace.node(n);
    let hat = &lower.a_r_hat[n - 1];
    let edge = lower.bands[n - 1].lo;
    let (t0, end) = (partition.t0, partition.end);
    let slack_applied = node.q_real[t0] != 0;
    let slack = if slack_applied { trace.buffer_size } else { 0 };
    let mut violations = Vec::new();
    let mut flag = |kind, slot, detail: String| violations.push(ViolationRecord { node: n, kind, slot, detail });

    let mut in_before = vec![false; end - t0 + 1];
    for &t in &partition.before_runs {
        in_before[t - t0] = true;
    }

    let (mut low_lhs, mut low_rhs, mut all_lhs, mut all_rhs) = (0u64, 0u64, 0u64, 0u64);
    for t in t0..=end {
        let (adm, h) = (node.a_r_adm[t] as u64, hat[t] as u64);
        all_lhs += adm;
        all_rhs += h;
        if partition.is_high(t) && !in_before[t - t0] {
            if adm < h {
                flag(ViolationKind::HighRegime, t, format!("admitted {adm} < lower bound {h}"));
            }
        } else {
            low_lhs += adm;
            low_rhs += h;
        }
    }
    if low_lhs + slack < low_rhs {
        flag(
            ViolationKind::LowRegime,
            t0,
            format!("admitted {low_lhs} + slack {slack} < lower bound {low_rhs}"),
        );
    }
    if all_lhs + slack < all_rhs {
        flag(
            ViolationKind::WindowTotal,
            t0,
            format!("admitted {all_lhs} + slack {slack} < lower bound {all_rhs}"),
        );
    }

    let (mut pairs, mut checked) = (0, 0);
    for run in &partition.runs {
        for ext in &run.extrema {
            pairs += 1;
            let (minus, plus) = (ext.minus, ext.plus);
            if !ext.genuine || plus + 1 > node.len() {
                continue;
            }
            if minus == t0 {
                // No slot before the window; with an empty real queue the
                // interval starts at t0 itself.
                if slack_applied {
                    continue;
                }
                checked += 1;
                interval_sum(node.a_r_adm.as_slice(), hat, t0, plus, &mut flag);
                continue;
            }
            checked += 1;
            let before = minus - 1;
            if node.q_real[minus] != node.a_r[before] as u64 {
                flag(
                    ViolationKind::LocalMinRealBacklog,
                    minus,
                    format!("Q^r = {} but previous real arrivals {}", node.q_real[minus], node.a_r[before]),
                );
            }
            if hat[before] != 0 {
                flag(ViolationKind::LocalMinInsideBand, before, format!("lower bound admitted {}", hat[before]));
            }
            if node.q_fake[before] as f64 >= edge {
                flag(
                    ViolationKind::LocalMinFakeBefore,
                    before,
                    format!("Q^f = {} >= {edge}", node.q_fake[before]),
                );
            }
            if node.q_fake[plus + 1] as f64 >= edge {
                flag(
                    ViolationKind::LocalMaxFakeAfter,
                    plus + 1,
                    format!("Q^f = {} >= {edge}", node.q_fake[plus + 1]),
                );
            }
            interval_sum(node.a_r_adm.as_slice(), hat, before, plus, &mut flag);
        }
    }

    IntervalReport {
        node: n,
        t0,
        end,
        low_runs: partition.runs.len(),
        pairs,
        pairs_checked: checked,
        pairs_skipped: pairs - checked,
        slack_applied,
        low_regime: (low_lhs, low_rhs),
        window_total: (all_lhs, all_rhs),
        violations,
    }
}

fn interval_sum(adm: &[u32], hat: &[u32], from: usize, to: usize, flag: &mut impl FnMut(ViolationKind, usize, String)) {
    let lhs: u64 = adm[from..=to].iter().map(|&x| x as u64).sum();
    let rhs: u64 = hat[from..=to].iter().map(|&x| x as u64).sum();
    if lhs < rhs {
        flag(
            ViolationKind::IntervalDomination,
            from,
            format!("slots {from}..={to}: admitted {lhs} < lower bound {rhs}"),
        );
    }
}
