use serde::Serialize;

use super::TraceRecord;
use crate::error::{Error, Result};
use crate::model::Scenario;
use crate::queues::{decompose_link_flows, NodeFlows};

/// A Little's-law delay; infinite (and flagged) when nothing was admitted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DelayEstimate {
    pub slots: f64,
    pub flagged: bool,
}

impl DelayEstimate {
    fn new(occupancy: f64, rate: f64) -> Self {
        if rate > 0.0 {
            Self {
                slots: occupancy / rate,
                flagged: false,
            }
        } else {
            Self {
                slots: f64::INFINITY,
                flagged: true,
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeMetrics {
    pub node: usize,
    pub avg_real_arrivals: f64,
    pub avg_arrivals: f64,
    pub avg_admitted: f64,
    pub avg_drops: f64,
    pub avg_real_backlog: f64,
    /// `B` over the admitted real rate.
    pub per_hop_delay: DelayEstimate,
    /// Mean real backlog over the admitted real rate.
    pub occupancy_delay: DelayEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub slots: u64,
    pub burn_in: u64,
    pub buffer_size: u64,
    pub avg_cost: f64,
    /// `avg_cost` plus the drop penalty times the total drop rate.
    pub penalized_cost: f64,
    /// Real packets leaving the network per slot.
    pub throughput: f64,
    /// Real drops per slot, summed over nodes.
    pub drop_rate: f64,
    pub max_total_backlog: u64,
    pub nodes: Vec<NodeMetrics>,
    /// `(r, fraction of slots with max_n |Q_n - gamma_n| > r)` for
    /// `r = 0..=r_max`; empty without multipliers.
    pub deviation_tail: Vec<(u64, f64)>,
}

impl MetricsReport {
    /// Mean of the per-node drop rates.
    pub fn mean_hop_drops(&self) -> f64 {
        self.nodes.iter().map(|n| n.avg_drops).sum::<f64>() / self.nodes.len() as f64
    }

    /// Mean of the finite per-node delays.
    pub fn mean_hop_delay(&self) -> f64 {
        mean_finite(self.nodes.iter().map(|n| n.per_hop_delay.slots))
    }

    pub fn mean_occupancy_delay(&self) -> f64 {
        mean_finite(self.nodes.iter().map(|n| n.occupancy_delay.slots))
    }

    pub fn tail_at(&self, radius: u64) -> f64 {
        self.deviation_tail.get(radius as usize).map_or(0.0, |&(_, f)| f)
    }
}

fn mean_finite(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, count) = values.filter(|v| v.is_finite()).fold((0.0, 0), |(s, c), v| (s + v, c + 1));
    if count == 0 {
        f64::INFINITY
    } else {
        sum / count as f64
    }
}

#[derive(Debug, Clone, Default)]
struct NodeSums {
    real_arrivals: u64,
    arrivals: u64,
    admitted: u64,
    drops: u64,
    real_backlog: u64,
}

/// Streaming time averages over the measurement window.
#[derive(Debug, Clone)]
pub struct MetricsAccumulator {
    buffer_size: u64,
    penalty_per_drop: f64,
    gamma: Option<Vec<f64>>,
    slots: u64,
    cost: f64,
    exits: u64,
    max_total: u64,
    nodes: Vec<NodeSums>,
    /// Slot counts by `ceil(max_n |Q_n - gamma_n|)`.
    deviation: Vec<u64>,
}

impl MetricsAccumulator {
    pub fn new(node_count: usize, buffer_size: u64, penalty_per_drop: f64, gamma: Option<Vec<f64>>) -> Self {
        Self {
            buffer_size,
            penalty_per_drop,
            gamma,
            slots: 0,
            cost: 0.0,
            exits: 0,
            max_total: 0,
            nodes: vec![NodeSums::default(); node_count],
            deviation: Vec::new(),
        }
    }

    /// Adds one slot: backlogs at its start, its cost, flows and real exits.
    pub fn observe(&mut self, q_real: &[u64], q_total: &[u64], cost: f64, flows: &[NodeFlows], exit_real: u32) {
        self.slots += 1;
        self.cost += cost;
        self.exits += exit_real as u64;
        let mut total = 0;
        for ((sums, f), (&qr, &q)) in self.nodes.iter_mut().zip(flows).zip(q_real.iter().zip(q_total)) {
            sums.real_arrivals += f.a_r as u64;
            sums.arrivals += f.arrivals() as u64;
            sums.admitted += f.a_r_admitted as u64;
            sums.drops += f.drops as u64;
            sums.real_backlog += qr;
            total += q;
        }
        self.max_total = self.max_total.max(total);
        if let Some(gamma) = &self.gamma {
            let dev = q_total
                .iter()
                .zip(gamma)
                .map(|(&q, &g)| (q as f64 - g).abs())
                .fold(0.0, f64::max)
                .ceil() as usize;
            if self.deviation.len() <= dev {
                self.deviation.resize(dev + 1, 0);
            }
            self.deviation[dev] += 1;
        }
    }

    pub fn finish(&self, burn_in: u64) -> Result<MetricsReport> {
        if self.slots == 0 {
            return Err(Error::EmptyWindow {
                horizon: burn_in,
                burn_in,
            });
        }
        let t = self.slots as f64;
        let nodes: Vec<NodeMetrics> = self
            .nodes
            .iter()
            .enumerate()
            .map(|(k, s)| {
                let admitted = s.admitted as f64 / t;
                let backlog = s.real_backlog as f64 / t;
                NodeMetrics {
                    node: k + 1,
                    avg_real_arrivals: s.real_arrivals as f64 / t,
                    avg_arrivals: s.arrivals as f64 / t,
                    avg_admitted: admitted,
                    avg_drops: s.drops as f64 / t,
                    avg_real_backlog: backlog,
                    per_hop_delay: DelayEstimate::new(self.buffer_size as f64, admitted),
                    occupancy_delay: DelayEstimate::new(backlog, admitted),
                }
            })
            .collect();
        let drop_rate = nodes.iter().map(|n| n.avg_drops).sum::<f64>();
        let avg_cost = self.cost / t;
        let mut deviation_tail = Vec::with_capacity(self.deviation.len());
        let mut above = self.slots;
        for (r, &count) in self.deviation.iter().enumerate() {
            above -= count;
            deviation_tail.push((r as u64, above as f64 / t));
        }
        Ok(MetricsReport {
            slots: self.slots,
            burn_in,
            buffer_size: self.buffer_size,
            avg_cost,
            penalized_cost: avg_cost + self.penalty_per_drop * drop_rate,
            throughput: self.exits as f64 / t,
            drop_rate,
            max_total_backlog: self.max_total,
            nodes,
            deviation_tail,
        })
    }
}

/// Time averages of a recorded trace over slots `[burn_in, len)`. End-to-end
/// exits are rebuilt from each slot's action and recorded per-node services.
pub fn compute_metrics(trace: &TraceRecord, scenario: &Scenario, burn_in: usize, gamma: Option<&[f64]>) -> Result<MetricsReport> {
    if trace.len() <= burn_in {
        return Err(Error::EmptyWindow {
            horizon: trace.len() as u64,
            burn_in: burn_in as u64,
        });
    }
    let n = trace.node_count();
    let mut acc = MetricsAccumulator::new(n, trace.buffer_size, scenario.penalty_per_drop(), gamma.map(<[f64]>::to_vec));
    let mut q_real = vec![0; n];
    let mut q_total = vec![0; n];
    let mut flows = vec![NodeFlows::default(); n];
    let mut services = vec![(0, 0); n];
    for t in burn_in..trace.len() {
        for (k, node) in trace.nodes.iter().enumerate() {
            q_real[k] = node.q_real[t];
            q_total[k] = node.total(t);
            flows[k] = node.flows(t);
            services[k] = (node.b_r[t], node.b_f[t]);
        }
        let state = scenario.states().get(trace.states[t] as usize);
        let action = state.and_then(|s| s.actions().get(trace.actions[t] as usize));
        let action = action.ok_or_else(|| {
            Error::Trace(format!(
                "slot {t}: state {} / action {} not in scenario",
                trace.states[t], trace.actions[t]
            ))
        })?;
        let (mu_r, _) = decompose_link_flows(action.services(), &services)?;
        let exit_real = (1..=n).map(|i| mu_r.get(i, 0)).sum();
        acc.observe(&q_real, &q_total, trace.costs[t], &flows, exit_real);
    }
    acc.finish(burn_in as u64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares `y = slope * x + intercept`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> LinearFit {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    LinearFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    }
}
