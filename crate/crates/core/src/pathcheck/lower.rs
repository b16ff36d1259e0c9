use serde::Serialize;

use super::TraceRecord;
use crate::error::{Error, Result};

/// The closed admission band `[gamma - B/2 + delta, gamma + B/2 - delta]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Band {
    pub lo: f64,
    pub hi: f64,
}

impl Band {
    pub fn new(gamma: f64, buffer: u64, delta_max: u32) -> Self {
        let half = buffer as f64 / 2.0 - delta_max as f64;
        Self {
            lo: gamma - half,
            hi: gamma + half,
        }
    }

    pub fn contains(&self, q: u64) -> bool {
        let q = q as f64;
        self.lo <= q && q <= self.hi
    }
}

/// Admissions counted by the lower-bound policy: a slot's real arrivals count
/// in full when the total backlog is inside the band, otherwise not at all.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LowerBoundTrace {
    pub bands: Vec<Band>,
    pub a_r_hat: Vec<Vec<u32>>,
    pub d_hat: Vec<Vec<u32>>,
}

impl LowerBoundTrace {
    /// `a_r_hat` of node `n` (1-based) at slot `t`.
    pub fn admitted(&self, n: usize, t: usize) -> u32 {
        self.a_r_hat[n - 1][t]
    }
}

pub fn lower_bound_admissions(trace: &TraceRecord, gamma: &[f64], delta_max: u32) -> Result<LowerBoundTrace> {
    let buffer = trace.buffer_size;
    if !buffer.is_multiple_of(2) || buffer < 2 * delta_max as u64 {
        return Err(Error::LowerBoundPreconditions(format!(
            "buffer {buffer} must be even and at least 2 * delta_max = {}",
            2 * delta_max
        )));
    }
    if gamma.len() != trace.node_count() {
        return Err(Error::Config(format!(
            "multiplier vector has {} entries for {} nodes",
            gamma.len(),
            trace.node_count()
        )));
    }
    let bands: Vec<Band> = gamma.iter().map(|&g| Band::new(g, buffer, delta_max)).collect();
    let mut a_r_hat = Vec::with_capacity(trace.node_count());
    let mut d_hat = Vec::with_capacity(trace.node_count());
    for (node, band) in trace.nodes.iter().zip(&bands) {
        let hat: Vec<u32> = (0..node.len())
            .map(|t| if band.contains(node.total(t)) { node.a_r[t] } else { 0 })
            .collect();
        d_hat.push(node.a_r.iter().zip(&hat).map(|(a, h)| a - h).collect());
        a_r_hat.push(hat);
    }
    Ok(LowerBoundTrace { bands, a_r_hat, d_hat })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CumulativeBound {
    pub node: usize,
    /// Sum of admitted real arrivals over the window.
    pub lhs: u64,
    /// Sum of lower-bound admissions minus `B`.
    pub rhs: i64,
    pub holds: bool,
}

/// Evaluates `sum a^r' >= sum a_hat^r - B` over slots `[t0, t0 + len)` for
/// every node.
pub fn verify_cumulative_bound(trace: &TraceRecord, lower: &LowerBoundTrace, t0: usize, len: usize) -> Vec<CumulativeBound> {
    let end = (t0 + len).min(trace.len());
    trace
        .nodes
        .iter()
        .enumerate()
        .map(|(k, node)| {
            let lhs: u64 = node.a_r_adm[t0..end].iter().map(|&x| x as u64).sum();
            let hat: u64 = lower.a_r_hat[k][t0..end].iter().map(|&x| x as u64).sum();
            let rhs = hat as i64 - trace.buffer_size as i64;
            CumulativeBound {
                node: k + 1,
                lhs,
                rhs,
                holds: lhs as i64 >= rhs,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pathcheck::synthetic_node_trace;

    #[test]
    fn band_membership() {
        let band = Band::new(10.0, 8, 1);
        assert_eq!((band.lo, band.hi), (7.0, 13.0));
        assert!(band.contains(7) && band.contains(13) && !band.contains(6) && !band.contains(14));
    }

    #[test]
    fn inside_and_outside_band() {
        // Band [8, 12]: Q = 10 is inside, Q = 16 above.
        let trace = synthetic_node_trace(8, 10, &[(2, 0, 0), (2, 0, 0)]).unwrap();
        let lower = lower_bound_admissions(&trace, &[10.0], 2).unwrap();
        assert_eq!(lower.a_r_hat[0][0], 2);
        assert_eq!(trace.node(1).total(1), 12);
        assert_eq!(lower.bands[0], Band::new(10.0, 8, 2));
        let trace = synthetic_node_trace(8, 16, &[(2, 0, 0)]).unwrap();
        let lower = lower_bound_admissions(&trace, &[10.0], 2).unwrap();
        assert_eq!((lower.a_r_hat[0][0], lower.d_hat[0][0]), (0, 2));
    }

    #[test]
    fn rejects_odd_or_small_buffers() {
        let trace = synthetic_node_trace(7, 0, &[(1, 0, 0)]).unwrap();
        assert!(matches!(
            lower_bound_admissions(&trace, &[1.0], 2),
            Err(Error::LowerBoundPreconditions(_))
        ));
        let trace = synthetic_node_trace(2, 0, &[(1, 0, 0)]).unwrap();
        assert!(lower_bound_admissions(&trace, &[1.0], 2).is_err());
    }

    #[test]
    fn all_idle_window() {
        let trace = synthetic_node_trace(4, 0, &[(0, 0, 0); 10]).unwrap();
        let lower = lower_bound_admissions(&trace, &[3.0], 1).unwrap();
        let report = verify_cumulative_bound(&trace, &lower, 0, 10);
        assert_eq!(report[0], CumulativeBound { node: 1, lhs: 0, rhs: -4, holds: true });
    }

    #[test]
    fn degenerate_band_still_bounded() {
        // B = 2 delta: the band collapses to the single point gamma.
        let slots: Vec<_> = (0..200).map(|t| ((t * 7 % 3) as u32, (t % 2) as u32, (t * 5 % 3) as u32)).collect();
        let trace = synthetic_node_trace(4, 3, &slots).unwrap();
        let lower = lower_bound_admissions(&trace, &[4.0], 2).unwrap();
        for t in 0..trace.len() {
            let q = trace.node(1).total(t);
            assert_eq!(lower.a_r_hat[0][t] > 0, q == 4 && trace.node(1).a_r[t] > 0);
        }
        for t0 in 0..150 {
            assert!(verify_cumulative_bound(&trace, &lower, t0, 50)[0].holds);
        }
    }
}
